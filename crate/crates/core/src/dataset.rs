//! Training sets: instances described by nominal and numeric attributes plus a
//! class label.
//!
//! The CSV form carries kinds in its header (`name:kind`) and keeps the class
//! in the last column, which must be `class:nominal`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CLASS_COLUMN: &str = "class";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Nominal,
    Numeric,
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeKind::Nominal => "nominal",
            AttributeKind::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Values in first-seen order.
    Nominal(Vec<String>),
    Numeric { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub domain: Domain,
}

impl AttributeSpec {
    pub fn nominal(name: impl Into<String>, values: Vec<String>) -> Self {
        AttributeSpec {
            name: name.into(),
            domain: Domain::Nominal(values),
        }
    }

    pub fn kind(&self) -> AttributeKind {
        match self.domain {
            Domain::Nominal(_) => AttributeKind::Nominal,
            Domain::Numeric { .. } => AttributeKind::Numeric,
        }
    }

    pub fn nominal_values(&self) -> Option<&[String]> {
        match &self.domain {
            Domain::Nominal(v) => Some(v),
            Domain::Numeric { .. } => None,
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (&self.domain, value) {
            (Domain::Nominal(vals), Value::Nominal(v)) => vals.contains(v),
            (Domain::Numeric { .. }, Value::Numeric(x)) => x.is_finite(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Nominal(String),
    Numeric(f64),
}

impl Value {
    pub fn as_nominal(&self) -> Option<&str> {
        match self {
            Value::Nominal(s) => Some(s),
            Value::Numeric(_) => None,
        }
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            Value::Numeric(x) => Some(*x),
            Value::Nominal(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nominal(s) => f.write_str(s),
            // `{}` on f64 prints the shortest string that parses back exactly.
            Value::Numeric(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub values: Vec<Value>,
    pub label: String,
}

impl Instance {
    pub fn new(values: Vec<Value>, label: impl Into<String>) -> Self {
        Instance {
            values,
            label: label.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("empty dataset")]
    Empty,
    #[error("bad header column `{column}`: {reason}")]
    Header { column: String, reason: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: missing value in column `{column}`")]
    Missing { line: u64, column: String },
    #[error("line {line}: cannot parse `{token}` as a number in column `{column}`")]
    NotNumeric {
        line: u64,
        column: String,
        token: String,
    },
    #[error("instance {index}: {reason}")]
    Schema { index: usize, reason: String },
    #[error("csv: {0}")]
    Csv(String),
}

/// A labeled set of instances over a fixed attribute schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub attributes: Vec<AttributeSpec>,
    /// Class labels, sorted.
    pub classes: Vec<String>,
    pub instances: Vec<Instance>,
}

impl TrainingSet {
    /// Builds a set from raw rows, inferring nominal domains, numeric ranges and
    /// the class list.
    pub fn from_rows(
        columns: Vec<(String, AttributeKind)>,
        instances: Vec<Instance>,
    ) -> Result<Self, DataError> {
        if instances.is_empty() {
            return Err(DataError::Empty);
        }
        let mut attributes = Vec::with_capacity(columns.len());
        for (a, (name, kind)) in columns.into_iter().enumerate() {
            if attributes.iter().any(|s: &AttributeSpec| s.name == name) || name == CLASS_COLUMN {
                return Err(DataError::Header {
                    column: name,
                    reason: "duplicate or reserved name".into(),
                });
            }
            let domain = match kind {
                AttributeKind::Nominal => {
                    let mut vals: Vec<String> = Vec::new();
                    for inst in &instances {
                        if let Some(Value::Nominal(v)) = inst.values.get(a) {
                            if !vals.contains(v) {
                                vals.push(v.clone());
                            }
                        }
                    }
                    Domain::Nominal(vals)
                }
                AttributeKind::Numeric => {
                    let xs = instances
                        .iter()
                        .filter_map(|i| i.values.get(a).and_then(Value::as_numeric));
                    let (min, max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    });
                    Domain::Numeric { min, max }
                }
            };
            attributes.push(AttributeSpec { name, domain });
        }
        let mut classes: Vec<String> = instances.iter().map(|i| i.label.clone()).collect();
        classes.sort();
        classes.dedup();
        let ts = TrainingSet {
            attributes,
            classes,
            instances,
        };
        ts.check()?;
        Ok(ts)
    }

    /// Verifies every instance against the schema.
    pub fn check(&self) -> Result<(), DataError> {
        for (index, inst) in self.instances.iter().enumerate() {
            if inst.values.len() != self.attributes.len() {
                return Err(DataError::Schema {
                    index,
                    reason: format!(
                        "{} values for {} attributes",
                        inst.values.len(),
                        self.attributes.len()
                    ),
                });
            }
            for (spec, v) in self.attributes.iter().zip(&inst.values) {
                if !spec.contains(v) {
                    return Err(DataError::Schema {
                        index,
                        reason: format!("value `{v}` outside domain of `{}`", spec.name),
                    });
                }
            }
            if self.classes.binary_search(&inst.label).is_err() {
                return Err(DataError::Schema {
                    index,
                    reason: format!("unknown class `{}`", inst.label),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    /// Instances at `indices`, sharing this set's schema and class list.
    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            attributes: self.attributes.clone(),
            classes: self.classes.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
        }
    }

    /// Values of a numeric attribute with their labels.
    pub fn numeric_column(&self, attr: usize) -> Vec<(f64, &str)> {
        self.instances
            .iter()
            .filter_map(|i| i.values[attr].as_numeric().map(|x| (x, i.label.as_str())))
            .collect()
    }

    pub fn class_distribution(&self) -> BTreeMap<String, usize> {
        class_distribution(self)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self
            .attributes
            .iter()
            .map(|a| format!("{}:{}", a.name, a.kind()))
            .collect();
        header.push(format!("{CLASS_COLUMN}:nominal"));
        w.write_record(&header).expect("in-memory write");
        for inst in &self.instances {
            let mut row: Vec<String> = inst.values.iter().map(ToString::to_string).collect();
            row.push(inst.label.clone());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Attribute specs and class distribution as plain text.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "instances: {}", self.len());
        let _ = writeln!(out, "attributes: {}", self.attributes.len());
        for a in &self.attributes {
            match &a.domain {
                Domain::Nominal(v) => {
                    let _ = writeln!(out, "  {} nominal {{{}}}", a.name, v.join(", "));
                }
                Domain::Numeric { min, max } => {
                    let _ = writeln!(out, "  {} numeric [{min}, {max}]", a.name);
                }
            }
        }
        let _ = writeln!(out, "classes: {}", self.classes.len());
        for (c, n) in self.class_distribution() {
            let _ = writeln!(out, "  {c}: {n}");
        }
        out
    }
}

/// Instance count per class label.
pub fn class_distribution(ts: &TrainingSet) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for inst in &ts.instances {
        *out.entry(inst.label.clone()).or_insert(0) += 1;
    }
    out
}

fn parse_header(header: &csv::StringRecord) -> Result<Vec<(String, AttributeKind)>, DataError> {
    let mut cols = Vec::new();
    for field in header.iter() {
        let (name, kind) = field.split_once(':').ok_or_else(|| DataError::Header {
            column: field.to_owned(),
            reason: "expected `name:kind`".into(),
        })?;
        let kind = match kind.trim() {
            "nominal" => AttributeKind::Nominal,
            "numeric" => AttributeKind::Numeric,
            other => {
                return Err(DataError::Header {
                    column: field.to_owned(),
                    reason: format!("unknown kind `{other}`"),
                })
            }
        };
        cols.push((name.trim().to_owned(), kind));
    }
    Ok(cols)
}

/// Column names and kinds in file order.
pub type Columns = Vec<(String, AttributeKind)>;

/// Reads rows of a `name:kind` CSV. With `labeled`, the last column must be
/// `class:nominal`; without it, a trailing class column is still accepted and
/// dropped labels become empty strings.
fn read_rows(
    text: &str,
    labeled: bool,
) -> Result<(Columns, Vec<Instance>), DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    let mut cols = parse_header(&header)?;
    let has_class = matches!(cols.last(), Some((n, AttributeKind::Nominal)) if n == CLASS_COLUMN);
    if labeled && !has_class {
        return Err(DataError::Header {
            column: header.iter().next_back().unwrap_or_default().to_owned(),
            reason: format!("last column must be `{CLASS_COLUMN}:nominal`"),
        });
    }
    if has_class {
        cols.pop();
    }
    let width = cols.len() + usize::from(has_class);
    let mut instances = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(DataError::Ragged {
                line,
                expected: width,
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(cols.len());
        for ((name, kind), token) in cols.iter().zip(record.iter()) {
            if token.is_empty() {
                return Err(DataError::Missing {
                    line,
                    column: name.clone(),
                });
            }
            values.push(match kind {
                AttributeKind::Nominal => Value::Nominal(token.to_owned()),
                AttributeKind::Numeric => match token.parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Numeric(x),
                    _ => {
                        return Err(DataError::NotNumeric {
                            line,
                            column: name.clone(),
                            token: token.to_owned(),
                        })
                    }
                },
            });
        }
        let label = if has_class {
            let token = record.get(cols.len()).unwrap_or_default();
            if token.is_empty() {
                return Err(DataError::Missing {
                    line,
                    column: CLASS_COLUMN.into(),
                });
            }
            token.to_owned()
        } else {
            String::new()
        };
        instances.push(Instance { values, label });
    }
    if instances.is_empty() {
        return Err(DataError::Empty);
    }
    Ok((cols, instances))
}

/// Parses a labeled training set.
pub fn load_csv(text: &str) -> Result<TrainingSet, DataError> {
    let (cols, instances) = read_rows(text, true)?;
    TrainingSet::from_rows(cols, instances)
}

/// Cases to classify: the class column is optional. Returns the column
/// schema, the instances (empty labels when unlabeled) and whether labels
/// were present.
pub fn load_cases_csv(
    text: &str,
) -> Result<(Columns, Vec<Instance>, bool), DataError> {
    let (cols, instances) = read_rows(text, false)?;
    let labeled = instances.iter().all(|i| !i.label.is_empty());
    Ok((cols, instances, labeled))
}

/// The eleven-row Blocksworld extract: problem, CPU time, plan steps, plan.
pub const SAMPLE_CSV: &str = "\
problem:nominal,time:numeric,steps:numeric,class:nominal
blocks-4,0.032237,6,P1
blocks-7,0.281196,6,P5
blocks-6,0.147917,10,P2
blocks-5,0.092918,12,P3
blocks-4,0.032703,6,P1
blocks-6,0.154913,12,P3
blocks-5,0.086448,10,P4
blocks-6,0.218894,6,P1
blocks-4,0.041694,10,P2
blocks-7,0.782671,10,P4
blocks-5,0.116359,6,P5
";

pub fn sample() -> TrainingSet {
    load_csv(SAMPLE_CSV).expect("embedded table parses")
}
