//! k-nearest-neighbour classification over mixed nominal/numeric instances.
//!
//! Distance is Euclidean over per-attribute differences: numeric values are
//! scaled by the training range of their attribute, nominal values differ by
//! 0 or 1.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dataset::{Domain, TrainingSet, Value};

pub const DEFAULT_K: usize = 1;

#[derive(Debug, Error, PartialEq)]
pub enum KnnError {
    #[error("cannot fit on an empty training set")]
    Empty,
    #[error("k = {k} is outside 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("query has {found} values, model expects {expected}")]
    Arity { expected: usize, found: usize },
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    ts: TrainingSet,
    k: usize,
    /// Observed (min, max) of each numeric attribute; `None` for nominal ones.
    ranges: Vec<Option<(f64, f64)>>,
}

impl KnnModel {
    pub fn fit(ts: &TrainingSet, k: usize) -> Result<Self, KnnError> {
        if ts.is_empty() {
            return Err(KnnError::Empty);
        }
        if k == 0 || k > ts.len() {
            return Err(KnnError::BadK { k, n: ts.len() });
        }
        let ranges = ts
            .attributes
            .iter()
            .enumerate()
            .map(|(a, spec)| match spec.domain {
                Domain::Nominal(_) => None,
                Domain::Numeric { .. } => Some(ts.numeric_column(a).iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)),
                )),
            })
            .collect();
        Ok(KnnModel {
            ts: ts.clone(),
            k,
            ranges,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.ts
    }

    pub fn distance(&self, a: &[Value], b: &[Value]) -> f64 {
        let mut sum = 0.0;
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            let d = match (x, y, self.ranges.get(i).copied().flatten()) {
                (Value::Numeric(x), Value::Numeric(y), Some((lo, hi))) => {
                    if hi > lo {
                        (x - y).abs() / (hi - lo)
                    } else {
                        0.0
                    }
                }
                _ => {
                    if x == y {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            sum += d * d;
        }
        sum.sqrt()
    }

    /// Majority label of the k nearest training instances. Equal distances
    /// keep training order; a tied vote goes to the label with the nearest
    /// member, then to the smaller label.
    pub fn classify(&self, query: &[Value]) -> Result<String, KnnError> {
        if query.len() != self.ts.attributes.len() {
            return Err(KnnError::Arity {
                expected: self.ts.attributes.len(),
                found: query.len(),
            });
        }
        let mut scored: Vec<(f64, usize)> = self
            .ts
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (self.distance(query, &inst.values), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // label -> (votes, nearest distance)
        let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for &(d, i) in &scored[..self.k] {
            let e = votes
                .entry(self.ts.instances[i].label.as_str())
                .or_insert((0, d));
            e.0 += 1;
        }
        let (label, _) = votes
            .into_iter()
            .min_by(|(la, (va, da)), (lb, (vb, db))| {
                vb.cmp(va).then(da.total_cmp(db)).then(la.cmp(lb))
            })
            .expect("k >= 1");
        Ok(label.to_owned())
    }
}

pub fn distance(a: &[Value], b: &[Value], model: &KnnModel) -> f64 {
    model.distance(a, b)
}

pub fn classify_knn(model: &KnnModel, query: &[Value]) -> Result<String, KnnError> {
    model.classify(query)
}
