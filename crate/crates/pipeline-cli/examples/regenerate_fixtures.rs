//! Regenerates the committed paired-evaluation fixture CSVs from the
//! in-crate generator. Run after changing the fixture construction:
//!
//!     cargo run -p pipeline-cli --example regenerate_fixtures

use std::path::Path;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).expect("fixtures directory");
    let (fixed, adaptive) = pipeline::evaluation_fixture();
    etv_model::write_study_tuples(&dir.join("evaluation_fixed.csv"), &fixed)
        .expect("write fixed rows");
    etv_model::write_study_tuples(&dir.join("evaluation_adaptive.csv"), &adaptive)
        .expect("write adaptive rows");
    println!(
        "wrote {} fixed and {} adaptive rows under {}",
        fixed.len(),
        adaptive.len(),
        dir.display()
    );
}
