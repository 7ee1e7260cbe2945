//! Serializes an `Array2` as a JSON array of row arrays.

use ndarray::{Array2, ArrayView1};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<T, S>(m: &Array2<T>, s: S) -> Result<S::Ok, S::Error>
where
    T: Serialize,
    S: Serializer,
{
    s.collect_seq(m.outer_iter().map(Row))
}

struct Row<'a, T>(ArrayView1<'a, T>);

impl<T: Serialize> Serialize for Row<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter())
    }
}

pub fn deserialize<'de, T, D>(d: D) -> Result<Array2<T>, D::Error>
where
    T: Deserialize<'de> + Clone,
    D: Deserializer<'de>,
{
    let rows: Vec<Vec<T>> = Vec::deserialize(d)?;
    from_rows(rows, 0).map_err(D::Error::custom)
}

/// Builds a matrix from row vectors; `width_if_empty` is used when there are no rows.
pub fn from_rows<T: Clone>(rows: Vec<Vec<T>>, width_if_empty: usize) -> Result<Array2<T>, String> {
    let width = rows.first().map_or(width_if_empty, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err("ragged matrix rows".to_string());
    }
    let n = rows.len();
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, width), flat).map_err(|e| e.to_string())
}
