use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Named, ordered collection of parameter tensors.
///
/// Insertion order is the flattening order, so two sets built by the same
/// sequence of calls flatten identically.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Matrix)>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::config(format!("duplicate parameter name `{name}`")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn require(&self, name: &str) -> Result<&Matrix> {
        self.get(name)
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        let i = *self.index.get(name)?;
        Some(&mut self.entries[i].1)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Total number of scalar values.
    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_values());
        for (_, m) in &self.entries {
            out.extend_from_slice(m.data());
        }
        out
    }

    /// Rebuild a set with this set's names and shapes from flat values.
    pub fn unflatten(&self, values: &[f64]) -> Result<ParamSet> {
        if values.len() != self.num_values() {
            return Err(Error::domain(format!(
                "unflatten needs {} values, got {}",
                self.num_values(),
                values.len()
            )));
        }
        let mut out = ParamSet::new();
        let mut offset = 0;
        for (name, m) in &self.entries {
            let n = m.len();
            out.insert(name.clone(), Matrix::new(m.rows(), m.cols(), values[offset..offset + n].to_vec())?)?;
            offset += n;
        }
        Ok(out)
    }

    pub fn zeros_like(&self) -> ParamSet {
        let mut out = ParamSet::new();
        for (name, m) in &self.entries {
            out.insert(name.clone(), Matrix::zeros(m.rows(), m.cols()))
                .expect("names unique by construction");
        }
        out
    }

    /// Same names in the same order with equal shapes.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, ma), (b, mb))| a == b && ma.shape() == mb.shape())
    }

    pub fn check_layout(&self, other: &ParamSet, op: &'static str) -> Result<()> {
        if self.same_layout(other) {
            return Ok(());
        }
        for ((a, ma), (b, mb)) in self.entries.iter().zip(&other.entries) {
            if a != b || ma.shape() != mb.shape() {
                return Err(Error::shape(op, ma.shape(), mb.shape()));
            }
        }
        Err(Error::domain(format!(
            "{op}: parameter counts differ ({} vs {})",
            self.len(),
            other.len()
        )))
    }

    /// `self += scale * other`, entry by entry.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) -> Result<()> {
        self.check_layout(other, "add_scaled")?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.entries
            .iter()
            .map(|(name, m)| ParamRecord {
                name: name.clone(),
                shape: [m.rows(), m.cols()],
                values: m.data().to_vec(),
            })
            .collect()
    }

    pub fn from_records(records: Vec<ParamRecord>) -> Result<ParamSet> {
        let mut out = ParamSet::new();
        for r in records {
            out.insert(r.name, Matrix::new(r.shape[0], r.shape[1], r.values)?)?;
        }
        Ok(out)
    }
}

/// Serialized form of one parameter: name, shape and row-major values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamSet::new();
        p.insert("w", Matrix::zeros(1, 1)).unwrap();
        assert!(p.insert("w", Matrix::zeros(2, 1)).is_err());
    }

    proptest! {
        #[test]
        fn flatten_unflatten_identity(shapes in prop::collection::vec((1usize..4, 1usize..4), 1..6), seed in any::<u64>()) {
            let mut rng = crate::numerics::Rng::new(seed);
            let mut p = ParamSet::new();
            for (i, (r, c)) in shapes.iter().enumerate() {
                p.insert(format!("p{i}"), rng.uniform_matrix(*r, *c, -1.0, 1.0)).unwrap();
            }
            let back = p.unflatten(&p.flatten()).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
