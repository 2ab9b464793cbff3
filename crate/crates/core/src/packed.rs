//! Serde adapters that store numeric arrays as base64 of little-endian `f64`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode(text: &str) -> Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(text).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err(format!("packed array has {} bytes, not a multiple of 8", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// `Vec<f64>` as a single base64 string.
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        encode(values).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        decode(&String::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// Index arrays (`Vec<usize>`) packed through `f64`; exact below 2^53.
pub mod indices {
    use super::*;

    pub fn serialize<S: Serializer>(values: &[usize], s: S) -> Result<S::Ok, S::Error> {
        let floats: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        encode(&floats).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        decode(&String::deserialize(d)?)
            .map_err(D::Error::custom)?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
                    Ok(v as usize)
                } else {
                    Err(D::Error::custom(format!("{v} is not an index")))
                }
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    #[serde(with = "vec")]
    data: Vec<f64>,
}

/// Row-major `Vec<Vec<f64>>` as `{rows, cols, data}` with packed data.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let cols = m.first().map_or(0, Vec::len);
        MatrixWire {
            rows: m.len(),
            cols,
            data: m.iter().flatten().copied().collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let wire = MatrixWire::deserialize(d)?;
        if wire.rows * wire.cols != wire.data.len() {
            return Err(D::Error::custom("matrix shape does not match data length"));
        }
        if wire.cols == 0 {
            return Ok(vec![Vec::new(); wire.rows]);
        }
        Ok(wire.data.chunks_exact(wire.cols).map(<[f64]>::to_vec).collect())
    }
}

/// `Vec<Vec<Vec<f64>>>` (a list of matrices).
pub mod matrices {
    use super::*;

    #[derive(Serialize)]
    struct Ref<'a>(#[serde(with = "matrix")] &'a [Vec<f64>]);

    #[derive(Deserialize)]
    struct Owned(#[serde(with = "matrix")] Vec<Vec<f64>>);

    pub fn serialize<S: Serializer>(ms: &[Vec<Vec<f64>>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(ms.iter().map(|m| Ref(m)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Vec<f64>>>, D::Error> {
        Ok(Vec::<Owned>::deserialize(d)?.into_iter().map(|o| o.0).collect())
    }
}

/// `Vec<Vec<f64>>` of ragged rows (e.g. one bias vector per layer).
pub mod rows {
    use super::*;

    #[derive(Serialize)]
    struct Ref<'a>(#[serde(with = "vec")] &'a [f64]);

    #[derive(Deserialize)]
    struct Owned(#[serde(with = "vec")] Vec<f64>);

    pub fn serialize<S: Serializer>(rs: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(rs.iter().map(|r| Ref(r)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Owned>::deserialize(d)?.into_iter().map(|o| o.0).collect())
    }
}
