//! Weight-file serialization.
//!
//! Layout: an ASCII magic line, one line of human-readable JSON describing
//! the architecture and tensor shapes, a `DATA` separator line, then every
//! tensor's values as little-endian `f64` in header order (layer parameters
//! first, then extra tensors sorted by name). Round trips are bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::layer::{Layer, LayerSpec, Param};
use crate::model::{Model, ModelExtras};
use crate::tensor::Tensor;
use crate::{NnError, Result};

const MAGIC: &str = "NNWEIGHTS";
const SEPARATOR: &str = "DATA";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct HeaderParam {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLayer {
    spec: LayerSpec,
    params: Vec<HeaderParam>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderExtra {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    layers: Vec<HeaderLayer>,
    extras: Vec<HeaderExtra>,
    notes: BTreeMap<String, String>,
}

pub fn save_weights(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_weights(model, &mut w)
}

pub fn write_weights<W: Write>(model: &Model, w: &mut W) -> Result<()> {
    let header = Header {
        version: WEIGHTS_VERSION,
        layers: model
            .layers
            .iter()
            .map(|l| HeaderLayer {
                spec: l.spec.clone(),
                params: l
                    .params
                    .iter()
                    .map(|p| HeaderParam {
                        name: p.name.to_string(),
                        shape: p.value.shape().to_vec(),
                        trainable: p.trainable,
                    })
                    .collect(),
            })
            .collect(),
        extras: model
            .extras
            .tensors
            .iter()
            .map(|(name, t)| HeaderExtra {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        notes: model.extras.notes.clone(),
    };
    writeln!(w, "{MAGIC}")?;
    serde_json::to_writer(&mut *w, &header)
        .map_err(|e| NnError::Format(format!("header serialization failed: {e}")))?;
    writeln!(w)?;
    writeln!(w, "{SEPARATOR}")?;
    for layer in &model.layers {
        for param in &layer.params {
            write_tensor(w, &param.value)?;
        }
    }
    for tensor in model.extras.tensors.values() {
        write_tensor(w, tensor)?;
    }
    Ok(())
}

fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Model> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    read_weights(&mut r)
}

pub fn read_weights<R: Read>(r: &mut R) -> Result<Model> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    let magic_end = find_newline(&bytes, 0)?;
    let magic = std::str::from_utf8(&bytes[..magic_end])
        .map_err(|_| NnError::Format("magic line is not UTF-8".into()))?;
    if magic != MAGIC {
        return Err(NnError::Format(format!(
            "not a weight file (magic line {magic:?})"
        )));
    }

    let header_end = find_newline(&bytes, magic_end + 1)?;
    let header: Header = serde_json::from_slice(&bytes[magic_end + 1..header_end])
        .map_err(|e| NnError::Format(format!("malformed header: {e}")))?;
    if header.version != WEIGHTS_VERSION {
        return Err(NnError::UnsupportedVersion(header.version));
    }

    let sep_end = find_newline(&bytes, header_end + 1)?;
    let sep = std::str::from_utf8(&bytes[header_end + 1..sep_end])
        .map_err(|_| NnError::Format("separator line is not UTF-8".into()))?;
    if sep != SEPARATOR {
        return Err(NnError::Format(format!(
            "expected data separator, found {sep:?}"
        )));
    }

    // Validate shapes against the specs before touching the blob.
    let mut layers = Vec::with_capacity(header.layers.len());
    for (idx, hl) in header.layers.iter().enumerate() {
        hl.spec.validate()?;
        let expected = hl.spec.param_specs();
        if expected.len() != hl.params.len() {
            return Err(NnError::Format(format!(
                "layer {idx} ({}) declares {} parameters, expected {}",
                hl.spec.kind(),
                hl.params.len(),
                expected.len()
            )));
        }
        for ((name, shape, trainable), hp) in expected.iter().zip(&hl.params) {
            if *name != hp.name || *shape != hp.shape || *trainable != hp.trainable {
                return Err(NnError::Format(format!(
                    "layer {idx} ({}) parameter {:?} has shape {:?}, expected {name:?} with shape {shape:?}",
                    hl.spec.kind(),
                    hp.name,
                    hp.shape
                )));
            }
        }
        layers.push(hl);
    }

    let total_values: usize = header
        .layers
        .iter()
        .flat_map(|l| l.params.iter().map(|p| p.shape.iter().product::<usize>()))
        .chain(
            header
                .extras
                .iter()
                .map(|e| e.shape.iter().product::<usize>()),
        )
        .sum();
    let blob = &bytes[sep_end + 1..];
    if blob.len() < total_values * 8 {
        return Err(NnError::Format(format!(
            "weight data truncated: expected {} bytes, found {}",
            total_values * 8,
            blob.len()
        )));
    }
    if blob.len() > total_values * 8 {
        return Err(NnError::Format(format!(
            "weight data has {} trailing bytes",
            blob.len() - total_values * 8
        )));
    }

    let mut offset = 0usize;
    let mut read_tensor = |shape: &[usize]| -> Tensor {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let start = offset + i * 8;
            let arr: [u8; 8] = blob[start..start + 8].try_into().expect("bounds checked");
            data.push(f64::from_le_bytes(arr));
        }
        offset += n * 8;
        Tensor::from_vec(shape, data).expect("shape/product checked")
    };

    let layers: Vec<Layer> = layers
        .into_iter()
        .map(|hl| Layer {
            spec: hl.spec.clone(),
            params: hl
                .spec
                .param_specs()
                .into_iter()
                .map(|(name, shape, trainable)| Param {
                    name,
                    value: read_tensor(&shape),
                    trainable,
                })
                .collect(),
        })
        .collect();

    let mut extras = ModelExtras {
        tensors: BTreeMap::new(),
        notes: header.notes,
    };
    for he in &header.extras {
        extras
            .tensors
            .insert(he.name.clone(), read_tensor(&he.shape));
    }

    Ok(Model { layers, extras })
}

fn find_newline(bytes: &[u8], from: usize) -> Result<usize> {
    bytes[from..]
        .iter()
        .position(|b| *b == b'\n')
        .map(|p| from + p)
        .ok_or_else(|| NnError::Format("unexpected end of file before data section".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_model() -> Model {
        let mut model = Model::new(vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 2,
                kernel: (3, 3),
                stride: 1,
                padding: (1, 1),
            },
            LayerSpec::BatchNorm {
                channels: 2,
                epsilon: 1e-5,
                momentum: 0.1,
            },
            LayerSpec::Relu,
            LayerSpec::GlobalAvgPool,
            LayerSpec::FullyConnected {
                in_features: 2,
                out_features: 1,
            },
        ])
        .unwrap();
        model.init_params(42);
        // Scribble on the running stats so the round trip covers them too.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in model.layers[1].param_mut("running_mean").data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        model
            .extras
            .tensors
            .insert("input_mean".into(), Tensor::from_vec(&[3], vec![0.1, -0.5, 2.0]).unwrap());
        model
            .extras
            .notes
            .insert("input_features".into(), "a,b,c".into());
        model
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = sample_model();
        let mut buf = Vec::new();
        write_weights(&model, &mut buf).unwrap();
        let loaded = read_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
        // Serialize again: identical bytes.
        let mut buf2 = Vec::new();
        write_weights(&loaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_unknown_version() {
        let model = sample_model();
        let mut buf = Vec::new();
        write_weights(&model, &mut buf).unwrap();
        // Patch the version field inside the (ASCII) header line, leaving
        // the binary blob untouched.
        let magic_end = buf.iter().position(|b| *b == b'\n').unwrap();
        let header_end = magic_end
            + 1
            + buf[magic_end + 1..].iter().position(|b| *b == b'\n').unwrap();
        let header = std::str::from_utf8(&buf[magic_end + 1..header_end]).unwrap();
        assert!(header.contains("\"version\":1"));
        let patched_header = header.replacen("\"version\":1", "\"version\":9", 1);
        let mut patched = buf[..=magic_end].to_vec();
        patched.extend_from_slice(patched_header.as_bytes());
        patched.extend_from_slice(&buf[header_end..]);
        let err = read_weights(&mut patched.as_slice()).unwrap_err();
        assert!(matches!(err, NnError::UnsupportedVersion(9)));
    }

    #[test]
    fn rejects_truncated_blob() {
        let model = sample_model();
        let mut buf = Vec::new();
        write_weights(&model, &mut buf).unwrap();
        buf.truncate(buf.len() - 7);
        let err = read_weights(&mut buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn rejects_trailing_bytes() {
        let model = sample_model();
        let mut buf = Vec::new();
        write_weights(&model, &mut buf).unwrap();
        buf.extend_from_slice(&[0u8; 8]);
        let err = read_weights(&mut buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn rejects_wrong_magic() {
        let err = read_weights(&mut b"NOTWEIGHTS\n{}\nDATA\n".as_slice()).unwrap_err();
        assert!(matches!(err, NnError::Format(_)));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.nnw");
        let model = sample_model();
        save_weights(&model, &path).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(loaded, model);
    }
}
