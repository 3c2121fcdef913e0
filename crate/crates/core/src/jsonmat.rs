//! Serde adapter: matrices as row-major nested JSON arrays.
//!
//! Apply with `#[serde(with = "crate::jsonmat")]` (or the `opt` submodule
//! for `Option<Mat>` fields). The on-disk form is `[[row0...], [row1...]]`.

use crate::linalg::Mat;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serializer};

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".to_string());
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Mat::from_row_slice(nrows, ncols, &flat))
}

pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_rows(m), s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
    let rows: Vec<Vec<f64>> = Deserialize::deserialize(d)?;
    from_rows(&rows).map_err(D::Error::custom)
}

pub mod opt {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&m.as_ref().map(to_rows), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        let rows: Option<Vec<Vec<f64>>> = Deserialize::deserialize(d)?;
        rows.map(|r| from_rows(&r).map_err(D::Error::custom)).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Holder {
        #[serde(with = "crate::jsonmat")]
        m: Mat,
    }

    #[test]
    fn nested_array_round_trip() {
        let h = Holder {
            m: Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        };
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(text, r#"{"m":[[1.0,2.0,3.0],[4.0,5.0,6.0]]}"#);
        let back: Holder = serde_json::from_str(&text).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn ragged_rows_rejected() {
        let r: Result<Holder, _> = serde_json::from_str(r#"{"m":[[1.0],[2.0,3.0]]}"#);
        assert!(r.is_err());
    }
}
