//! Model formulas, column-oriented datasets, and design-matrix construction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::StatsError;

/// Response variable the model is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Response {
    /// Phonetic-similarity score.
    Sp,
    /// User-experience rating.
    Ux,
}

impl Response {
    pub fn column_name(self) -> &'static str {
        match self {
            Response::Sp => "phonetic_similarity",
            Response::Ux => "ux",
        }
    }

    /// Offset added to the response before fitting. The similarity score can
    /// be exactly zero, which a gamma model cannot represent, so it carries a
    /// small shift; the experience rating is bounded away from zero already.
    pub fn default_offset(self) -> f64 {
        match self {
            Response::Sp => 1e-4,
            Response::Ux => 0.0,
        }
    }
}

/// Link function for the gamma GLM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Link {
    Log,
    Inverse,
}

/// The nine fixed predictors shared by both study models, in model order:
/// the four voice parameters, then annoyance, reverberation, distance,
/// English proficiency, and hearing difficulty.
pub const DEFAULT_FIXED_TERMS: [&str; 9] = [
    "volume",
    "pitch",
    "emphasis",
    "speed",
    "ar",
    "t30_s",
    "distance_cm",
    "english_cefr",
    "hearing_difficulty",
];

/// Specification of one GLM: response, fixed terms, interactions, random
/// intercepts, link, and response offset.
#[derive(Debug, Clone)]
pub struct ModelFormula {
    pub response: Response,
    pub fixed_terms: Vec<String>,
    /// Pairs of numeric columns whose elementwise product enters the design.
    pub interactions: Vec<(String, String)>,
    /// Categorical grouping columns fitted as ridge-penalized intercepts.
    pub random_intercepts: Vec<String>,
    pub link: Link,
    /// Added to the response before fitting; must be non-negative.
    pub response_offset: f64,
    /// The model equations carry no explicit intercept term, but fitting
    /// without one forces the covariates to absorb the baseline. An intercept
    /// is included by default; disable it to match the bare equations.
    pub include_intercept: bool,
}

impl ModelFormula {
    /// The study model for a response: nine fixed predictors, the
    /// volume-by-reverberation interaction, and random intercepts for
    /// subject and word.
    pub fn for_response(response: Response) -> Self {
        ModelFormula {
            response,
            fixed_terms: DEFAULT_FIXED_TERMS.iter().map(|s| s.to_string()).collect(),
            interactions: vec![("volume".to_string(), "t30_s".to_string())],
            random_intercepts: vec!["subject_id".to_string(), "word_id".to_string()],
            link: Link::Log,
            response_offset: response.default_offset(),
            include_intercept: true,
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if !self.response_offset.is_finite() || self.response_offset < 0.0 {
            return Err(StatsError::InvalidFormula(format!(
                "response offset must be finite and non-negative, got {}",
                self.response_offset
            )));
        }
        if self.fixed_terms.is_empty() && self.interactions.is_empty() && !self.include_intercept {
            return Err(StatsError::InvalidFormula(
                "formula has no intercept, fixed terms, or interactions".to_string(),
            ));
        }
        Ok(())
    }
}

/// Column-oriented dataset: named numeric and categorical columns of equal
/// length.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    rows: Option<usize>,
    numeric: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn len(&self) -> usize {
        self.rows.unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_new_column(&mut self, name: &str, len: usize) -> Result<(), StatsError> {
        if self.numeric.contains_key(name) || self.categorical.contains_key(name) {
            return Err(StatsError::DuplicateColumn(name.to_string()));
        }
        match self.rows {
            None => {
                self.rows = Some(len);
                Ok(())
            }
            Some(expected) if expected == len => Ok(()),
            Some(expected) => Err(StatsError::ColumnLength {
                column: name.to_string(),
                expected,
                got: len,
            }),
        }
    }

    pub fn add_numeric(
        &mut self,
        name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<(), StatsError> {
        let name = name.into();
        self.check_new_column(&name, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(name));
        }
        self.numeric.insert(name, values);
        Ok(())
    }

    pub fn add_categorical(
        &mut self,
        name: impl Into<String>,
        values: Vec<String>,
    ) -> Result<(), StatsError> {
        let name = name.into();
        self.check_new_column(&name, values.len())?;
        self.categorical.insert(name, values);
        Ok(())
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], StatsError> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| StatsError::MissingColumn(name.to_string()))
    }

    pub fn categorical(&self, name: &str) -> Result<&[String], StatsError> {
        self.categorical
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| StatsError::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.numeric.contains_key(name) || self.categorical.contains_key(name)
    }
}

/// One ridge-penalized block of indicator columns for a grouping column.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltyBlock {
    pub group: String,
    /// First column index of the block within the design matrix.
    pub start: usize,
    /// Number of columns (levels) in the block.
    pub len: usize,
    /// Level names in column order (sorted).
    pub levels: Vec<String>,
}

/// Design matrix with named columns. The leading `n_fixed` columns are
/// unpenalized (intercept, fixed terms, interactions); the remainder are
/// random-intercept indicator blocks.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub n_fixed: usize,
    pub penalty_blocks: Vec<PenaltyBlock>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }
}

fn variance_is_zero(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Build the design matrix for a formula: intercept (when enabled), fixed
/// terms in formula order, interaction products, then indicator columns per
/// random-intercept level with levels sorted. The column order is
/// deterministic given the formula and data.
pub fn build_design_matrix(
    data: &Dataset,
    formula: &ModelFormula,
) -> Result<DesignMatrix, StatsError> {
    formula.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(StatsError::TooFewRows { rows: 0, cols: 0 });
    }

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    if formula.include_intercept {
        columns.push(("intercept".to_string(), vec![1.0; n]));
    }
    for term in &formula.fixed_terms {
        let values = data.numeric(term)?.to_vec();
        if variance_is_zero(&values) {
            return Err(StatsError::ConstantColumn(term.clone()));
        }
        columns.push((term.clone(), values));
    }
    for (a, b) in &formula.interactions {
        let left = data.numeric(a)?;
        let right = data.numeric(b)?;
        let product: Vec<f64> = left.iter().zip(right).map(|(x, y)| x * y).collect();
        let name = format!("{a}:{b}");
        if variance_is_zero(&product) {
            return Err(StatsError::ConstantColumn(name));
        }
        columns.push((name, product));
    }
    let n_fixed = columns.len();

    let mut penalty_blocks = Vec::new();
    for group in &formula.random_intercepts {
        let values = data.categorical(group)?;
        let mut levels: Vec<String> = values.to_vec();
        levels.sort();
        levels.dedup();
        let start = columns.len();
        for level in &levels {
            let indicator: Vec<f64> = values
                .iter()
                .map(|v| if v == level { 1.0 } else { 0.0 })
                .collect();
            columns.push((format!("{group}={level}"), indicator));
        }
        penalty_blocks.push(PenaltyBlock {
            group: group.clone(),
            start,
            len: levels.len(),
            levels,
        });
    }

    let p = columns.len();
    let mut matrix = DMatrix::zeros(n, p);
    let mut column_names = Vec::with_capacity(p);
    for (j, (name, values)) in columns.into_iter().enumerate() {
        matrix.set_column(j, &DVector::from_vec(values));
        column_names.push(name);
    }

    Ok(DesignMatrix {
        matrix,
        column_names,
        n_fixed,
        penalty_blocks,
    })
}

/// Extract the (offset-shifted) response vector for a formula.
pub(crate) fn response_vector(
    data: &Dataset,
    formula: &ModelFormula,
) -> Result<DVector<f64>, StatsError> {
    let raw = data.numeric(formula.response.column_name())?;
    let shifted: Vec<f64> = raw.iter().map(|y| y + formula.response_offset).collect();
    if let Some((i, y)) = shifted
        .iter()
        .enumerate()
        .find(|(_, y)| !y.is_finite() || **y <= 0.0)
    {
        return Err(StatsError::InvalidResponse(format!(
            "row {i}: response {y} is not strictly positive after offset {}",
            formula.response_offset
        )));
    }
    Ok(DVector::from_vec(shifted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bare_formula() -> ModelFormula {
        ModelFormula {
            response: Response::Sp,
            fixed_terms: vec![],
            interactions: vec![],
            random_intercepts: vec![],
            link: Link::Log,
            response_offset: 0.0,
            include_intercept: true,
        }
    }

    #[test]
    fn interaction_column_is_the_elementwise_product() {
        let mut data = Dataset::new();
        data.add_numeric("volume", vec![1.0, 2.0]).unwrap();
        data.add_numeric("t30_s", vec![0.5, 0.5]).unwrap();
        let mut formula = bare_formula();
        formula.include_intercept = false;
        formula.fixed_terms = vec!["volume".to_string()];
        formula.interactions = vec![("volume".to_string(), "t30_s".to_string())];
        let design = build_design_matrix(&data, &formula).unwrap();
        assert_eq!(design.column_names, vec!["volume", "volume:t30_s"]);
        assert_eq!(design.matrix.column(1).as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn three_subjects_become_three_one_hot_columns() {
        let mut data = Dataset::new();
        data.add_numeric("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        data.add_categorical(
            "subject_id",
            ["s2", "s1", "s3", "s1"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        let mut formula = bare_formula();
        formula.fixed_terms = vec!["x".to_string()];
        formula.random_intercepts = vec!["subject_id".to_string()];
        let design = build_design_matrix(&data, &formula).unwrap();
        assert_eq!(
            design.column_names,
            vec!["intercept", "x", "subject_id=s1", "subject_id=s2", "subject_id=s3"]
        );
        assert_eq!(design.n_fixed, 2);
        assert_eq!(design.penalty_blocks.len(), 1);
        assert_eq!(design.penalty_blocks[0].start, 2);
        assert_eq!(design.penalty_blocks[0].len, 3);
        for i in 0..4 {
            let row_sum: f64 = (2..5).map(|j| design.matrix[(i, j)]).sum();
            assert_eq!(row_sum, 1.0, "row {i} must be one-hot across subjects");
        }
        assert_eq!(design.matrix[(0, 3)], 1.0);
        assert_eq!(design.matrix[(1, 2)], 1.0);
        assert_eq!(design.matrix[(2, 4)], 1.0);
        assert_eq!(design.matrix[(3, 2)], 1.0);
    }

    #[test]
    fn random_corpus_matches_a_naive_per_row_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 40;
        let volume: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let pitch: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..4.0)).collect();
        let t30: Vec<f64> = (0..n).map(|_| rng.gen_range(0.04..0.8)).collect();
        let subjects: Vec<String> = (0..n).map(|i| format!("s{:02}", i % 7)).collect();
        let words: Vec<String> = (0..n).map(|i| format!("w{:02}", (i * 3) % 5)).collect();

        let mut data = Dataset::new();
        data.add_numeric("volume", volume.clone()).unwrap();
        data.add_numeric("pitch", pitch.clone()).unwrap();
        data.add_numeric("t30_s", t30.clone()).unwrap();
        data.add_categorical("subject_id", subjects.clone()).unwrap();
        data.add_categorical("word_id", words.clone()).unwrap();

        let mut formula = bare_formula();
        formula.fixed_terms = vec!["volume".to_string(), "pitch".to_string(), "t30_s".to_string()];
        formula.interactions = vec![("volume".to_string(), "t30_s".to_string())];
        formula.random_intercepts = vec!["subject_id".to_string(), "word_id".to_string()];
        let design = build_design_matrix(&data, &formula).unwrap();

        // Naive oracle: assemble each row independently from first principles.
        let mut subject_levels: Vec<String> = subjects.clone();
        subject_levels.sort();
        subject_levels.dedup();
        let mut word_levels: Vec<String> = words.clone();
        word_levels.sort();
        word_levels.dedup();
        assert_eq!(
            design.n_cols(),
            1 + 3 + 1 + subject_levels.len() + word_levels.len()
        );
        for i in 0..n {
            let mut expected = vec![1.0, volume[i], pitch[i], t30[i], volume[i] * t30[i]];
            for level in &subject_levels {
                expected.push(if &subjects[i] == level { 1.0 } else { 0.0 });
            }
            for level in &word_levels {
                expected.push(if &words[i] == level { 1.0 } else { 0.0 });
            }
            for (j, e) in expected.iter().enumerate() {
                assert_eq!(design.matrix[(i, j)], *e, "row {i}, column {j}");
            }
        }

        // Same formula and data produce the same column order.
        let again = build_design_matrix(&data, &formula).unwrap();
        assert_eq!(design.column_names, again.column_names);
    }

    #[test]
    fn missing_column_is_an_error() {
        let mut data = Dataset::new();
        data.add_numeric("x", vec![1.0, 2.0]).unwrap();
        let mut formula = bare_formula();
        formula.fixed_terms = vec!["y".to_string()];
        match build_design_matrix(&data, &formula) {
            Err(StatsError::MissingColumn(name)) => assert_eq!(name, "y"),
            other => panic!("expected missing-column error, got {other:?}"),
        }
    }

    #[test]
    fn constant_column_is_an_error() {
        let mut data = Dataset::new();
        data.add_numeric("x", vec![3.0, 3.0, 3.0]).unwrap();
        let mut formula = bare_formula();
        formula.fixed_terms = vec!["x".to_string()];
        match build_design_matrix(&data, &formula) {
            Err(StatsError::ConstantColumn(name)) => assert_eq!(name, "x"),
            other => panic!("expected constant-column error, got {other:?}"),
        }
    }

    #[test]
    fn intercept_can_be_dropped() {
        let mut data = Dataset::new();
        data.add_numeric("x", vec![1.0, 2.0]).unwrap();
        let mut formula = bare_formula();
        formula.fixed_terms = vec!["x".to_string()];
        let with = build_design_matrix(&data, &formula).unwrap();
        assert_eq!(with.column_names[0], "intercept");
        formula.include_intercept = false;
        let without = build_design_matrix(&data, &formula).unwrap();
        assert_eq!(without.column_names, vec!["x"]);
    }

    #[test]
    fn dataset_rejects_mismatched_and_duplicate_columns() {
        let mut data = Dataset::new();
        data.add_numeric("x", vec![1.0, 2.0]).unwrap();
        match data.add_numeric("y", vec![1.0]) {
            Err(StatsError::ColumnLength { expected, got, .. }) => {
                assert_eq!((expected, got), (2, 1));
            }
            other => panic!("expected length error, got {other:?}"),
        }
        assert!(matches!(
            data.add_numeric("x", vec![0.0, 0.0]),
            Err(StatsError::DuplicateColumn(_))
        ));
        assert!(matches!(
            data.add_numeric("z", vec![f64::NAN, 0.0]),
            Err(StatsError::NonFinite(_))
        ));
    }

    #[test]
    fn default_formula_lists_the_nine_predictors_and_interaction() {
        let formula = ModelFormula::for_response(Response::Sp);
        assert_eq!(formula.fixed_terms.len(), 9);
        assert_eq!(formula.interactions, vec![("volume".to_string(), "t30_s".to_string())]);
        assert_eq!(formula.random_intercepts, vec!["subject_id", "word_id"]);
        assert_eq!(formula.response_offset, 1e-4);
        assert_eq!(ModelFormula::for_response(Response::Ux).response_offset, 0.0);
    }
}
