//! Numeric attribute discretization.
//!
//! A cut list `c_0 < c_1 < ...` sends a value to the number of cuts strictly
//! below it, so a value equal to a cut lands in the left interval. Bins are
//! coded `b0`, `b1`, ... in increasing order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AttributeSpec, Domain, Instance, TrainingSet, Value};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum DiscretizeError {
    #[error("no cut points for numeric attribute `{0}`")]
    MissingAttribute(String),
    #[error("attribute `{0}` is not numeric")]
    NotNumeric(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeCuts {
    pub attribute: String,
    pub cuts: Vec<f64>,
}

/// Cut points per numeric attribute, in schema order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMap {
    pub attributes: Vec<AttributeCuts>,
}

impl DiscretizationMap {
    pub fn cuts(&self, attribute: &str) -> Option<&[f64]> {
        self.attributes
            .iter()
            .find(|a| a.attribute == attribute)
            .map(|a| a.cuts.as_slice())
    }

    pub fn insert(&mut self, attribute: impl Into<String>, cuts: Vec<f64>) {
        let attribute = attribute.into();
        debug_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        match self.attributes.iter_mut().find(|a| a.attribute == attribute) {
            Some(entry) => entry.cuts = cuts,
            None => self.attributes.push(AttributeCuts { attribute, cuts }),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

/// Number of cuts strictly below `v`.
pub fn bin_index(cuts: &[f64], v: f64) -> usize {
    cuts.partition_point(|&c| c < v)
}

pub fn bin_code(index: usize) -> String {
    format!("b{index}")
}

fn numeric_attributes(ts: &TrainingSet) -> impl Iterator<Item = (usize, &AttributeSpec)> {
    ts.attributes
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a.domain, Domain::Numeric { .. }))
}

/// Equal-width cuts over the observed range of one column.
pub fn equal_width_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if bins <= 1 || values.is_empty() || min >= max {
        return Vec::new();
    }
    let width = (max - min) / bins as f64;
    let mut cuts: Vec<f64> = (1..bins).map(|k| min + k as f64 * width).collect();
    cuts.dedup_by(|b, a| b <= a);
    cuts
}

/// Equal-width binning of every numeric attribute.
pub fn discretize_unsupervised(ts: &TrainingSet, bins: usize) -> DiscretizationMap {
    let mut map = DiscretizationMap::default();
    for (a, spec) in numeric_attributes(ts) {
        let xs: Vec<f64> = ts.numeric_column(a).into_iter().map(|(x, _)| x).collect();
        map.insert(spec.name.clone(), equal_width_cuts(&xs, bins));
    }
    map
}

/// Entropy/MDL binning of every numeric attribute.
pub fn discretize_supervised(ts: &TrainingSet) -> DiscretizationMap {
    let mut map = DiscretizationMap::default();
    for (a, spec) in numeric_attributes(ts) {
        let column = ts.numeric_column(a);
        let values: Vec<f64> = column.iter().map(|(x, _)| *x).collect();
        let labels: Vec<&str> = column.iter().map(|(_, l)| *l).collect();
        map.insert(spec.name.clone(), supervised_cuts(&values, &labels));
    }
    map
}

fn entropy_of(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn distinct_classes(counts: &[usize]) -> usize {
    counts.iter().filter(|&&c| c > 0).count()
}

/// Run of equal values with its class counts.
struct Group {
    value: f64,
    counts: Vec<usize>,
}

impl Group {
    fn pure_class(&self) -> Option<usize> {
        let mut it = self.counts.iter().enumerate().filter(|(_, &c)| c > 0);
        match (it.next(), it.next()) {
            (Some((k, _)), None) => Some(k),
            _ => None,
        }
    }
}

/// Whether a cut between two adjacent value groups can be a boundary point:
/// their class multisets differ and they are not both pure in one class.
fn is_boundary(left: &Group, right: &Group) -> bool {
    if left.counts == right.counts {
        return false;
    }
    !matches!((left.pure_class(), right.pure_class()), (Some(a), Some(b)) if a == b)
}

/// Recursive minimum-entropy cuts with the minimum-description-length
/// acceptance test. `values` and `labels` are parallel.
pub fn supervised_cuts(values: &[f64], labels: &[&str]) -> Vec<f64> {
    assert_eq!(values.len(), labels.len());
    let mut classes: Vec<&str> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rows: Vec<(f64, usize)> = values
        .iter()
        .zip(labels)
        .map(|(&v, l)| (v, classes.binary_search(l).unwrap()))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut groups: Vec<Group> = Vec::new();
    for (v, k) in rows {
        match groups.last_mut() {
            Some(g) if g.value == v => g.counts[k] += 1,
            _ => {
                let mut counts = vec![0; classes.len()];
                counts[k] = 1;
                groups.push(Group { value: v, counts });
            }
        }
    }
    let mut cuts = Vec::new();
    split_groups(&groups, classes.len(), &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn split_groups(groups: &[Group], n_classes: usize, cuts: &mut Vec<f64>) {
    if groups.len() < 2 {
        return;
    }
    let mut total = vec![0usize; n_classes];
    for g in groups {
        for (t, c) in total.iter_mut().zip(&g.counts) {
            *t += c;
        }
    }
    let n: usize = total.iter().sum();
    let parent = entropy_of(&total, n);

    let mut left = vec![0usize; n_classes];
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for i in 1..groups.len() {
        for (l, c) in left.iter_mut().zip(&groups[i - 1].counts) {
            *l += c;
        }
        if !is_boundary(&groups[i - 1], &groups[i]) {
            continue;
        }
        let nl: usize = left.iter().sum();
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let weighted = (nl as f64 * entropy_of(&left, nl)
            + (n - nl) as f64 * entropy_of(&right, n - nl))
            / n as f64;
        if best.as_ref().is_none_or(|(_, e, _)| weighted < *e) {
            best = Some((i, weighted, left.clone()));
        }
    }
    let Some((i, weighted, left)) = best else {
        return;
    };
    let nl: usize = left.iter().sum();
    let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
    let gain = parent - weighted;
    let k = distinct_classes(&total) as f64;
    let k1 = distinct_classes(&left) as f64;
    let k2 = distinct_classes(&right) as f64;
    let delta = (3f64.powf(k) - 2.0).log2()
        - (k * parent - k1 * entropy_of(&left, nl) - k2 * entropy_of(&right, n - nl));
    let threshold = ((n as f64 - 1.0).log2() + delta) / n as f64;
    if gain <= threshold {
        return;
    }
    cuts.push((groups[i - 1].value + groups[i].value) / 2.0);
    split_groups(&groups[..i], n_classes, cuts);
    split_groups(&groups[i..], n_classes, cuts);
}

/// How numeric attributes are binned before induction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscretizeMode {
    Supervised,
    Unsupervised { bins: usize },
}

impl DiscretizeMode {
    pub fn fit(&self, ts: &TrainingSet) -> DiscretizationMap {
        match *self {
            DiscretizeMode::Supervised => discretize_supervised(ts),
            DiscretizeMode::Unsupervised { bins } => discretize_unsupervised(ts, bins),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiscretizeMode::Supervised => "supervised",
            DiscretizeMode::Unsupervised { .. } => "unsupervised",
        }
    }
}

fn binned_spec(name: &str, cuts: &[f64]) -> AttributeSpec {
    AttributeSpec::nominal(name, (0..=cuts.len()).map(bin_code).collect())
}

/// Schema after discretization: numeric attributes become bin-coded nominals.
pub fn binned_schema(
    map: &DiscretizationMap,
    attributes: &[AttributeSpec],
) -> Result<Vec<AttributeSpec>, DiscretizeError> {
    attributes
        .iter()
        .map(|a| match a.domain {
            Domain::Numeric { .. } => map
                .cuts(&a.name)
                .map(|c| binned_spec(&a.name, c))
                .ok_or_else(|| DiscretizeError::MissingAttribute(a.name.clone())),
            Domain::Nominal(_) => Ok(a.clone()),
        })
        .collect()
}

/// Bins the numeric values of one instance laid out per `attributes`.
pub fn apply_to_instance(
    map: &DiscretizationMap,
    attributes: &[AttributeSpec],
    instance: &Instance,
) -> Result<Instance, DiscretizeError> {
    let values = attributes
        .iter()
        .zip(&instance.values)
        .map(|(a, v)| match v {
            Value::Numeric(x) => map
                .cuts(&a.name)
                .map(|c| Value::Nominal(bin_code(bin_index(c, *x))))
                .ok_or_else(|| DiscretizeError::MissingAttribute(a.name.clone())),
            Value::Nominal(_) => Ok(v.clone()),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Instance {
        values,
        label: instance.label.clone(),
    })
}

/// Replaces every numeric attribute with its bin codes.
pub fn apply_map(map: &DiscretizationMap, ts: &TrainingSet) -> Result<TrainingSet, DiscretizeError> {
    let attributes = binned_schema(map, &ts.attributes)?;
    let instances = ts
        .instances
        .iter()
        .map(|i| apply_to_instance(map, &ts.attributes, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainingSet {
        attributes,
        classes: ts.classes.clone(),
        instances,
    })
}
