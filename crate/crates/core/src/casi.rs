//! Boolean cellular inference over a compiled induction graph.
//!
//! The knowledge base has two layers. CELFACT holds one cell per fact with
//! the bits EF (established), IF (internal: 0 for node facts, 1 for
//! attribute/class facts) and SF. CELRULE holds one cell per rule with ER
//! (eligible), IR (active) and SR. Two incidence matrices tie them together:
//! `R_E(i,j)` when fact i is a premise of rule j, `R_S(i,j)` when it is the
//! conclusion.
//!
//! One generation applies the fact transition then the rule transition:
//!
//! ```text
//! δ_fact: SF ← EF,  ER ← ER ∨ eligible(EF)
//! δ_rule: EF ← EF ∨ (R_S · ER),  SR ← ¬ER
//! ```
//!
//! `eligible(EF)_j` holds when every premise of rule j is established. The
//! disjunctive reading (`R_Eᵀ · EF`, any premise suffices) is available as
//! [`PremiseSemantics::AnyPremise`] for inspection only: it fires every edge
//! rule of a node from the node fact alone.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitMatrix, BitVec};
use crate::dataset::{AttributeSpec, Instance, Value};
use crate::discretize::{self, DiscretizationMap};
use crate::tree::{ClassificationRule, Fact, InductionGraph, NodeKind};

#[derive(Debug, Error, PartialEq)]
pub enum CasiError {
    #[error("fact `{0}` is not in the knowledge base")]
    UnknownFact(String),
    #[error("no class established: the case reaches an unseen attribute value")]
    UnknownValue,
    #[error("several classes established: {0:?}")]
    Integrity(Vec<String>),
    #[error("no fixed point after {0} generations")]
    NoConvergence(usize),
    #[error("instance has {found} values, knowledge base expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("malformed knowledge base: {0}")]
    Malformed(String),
    #[error(transparent)]
    Discretize(#[from] discretize::DiscretizeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PremiseSemantics {
    /// A rule is eligible when all of its premises are established.
    #[default]
    AllPremises,
    /// Literal boolean product: any established premise makes a rule eligible.
    AnyPremise,
}

/// Snapshot `G = (EF, IF, SF, ER, IR, SR)` of the automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub ef: BitVec,
    pub if_: BitVec,
    pub sf: BitVec,
    pub er: BitVec,
    pub ir: BitVec,
    pub sr: BitVec,
    pub generation: usize,
}

impl Configuration {
    /// Equal in all six layers, ignoring the generation counter.
    pub fn same_cells(&self, other: &Configuration) -> bool {
        self.ef == other.ef
            && self.if_ == other.if_
            && self.sf == other.sf
            && self.er == other.er
            && self.ir == other.ir
            && self.sr == other.sr
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NodeInfo {
    depth: usize,
    majority: String,
}

/// Fact and rule layers with their incidence matrices. Immutable once
/// compiled; every inference owns its configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct CellularKnowledgeBase {
    facts: Vec<Fact>,
    internal: BitVec,
    rules: Vec<ClassificationRule>,
    r_e: BitMatrix,
    r_s: BitMatrix,
    index: HashMap<Fact, usize>,
    nodes: Vec<NodeInfo>,
    attributes: Vec<AttributeSpec>,
    discretization: DiscretizationMap,
}

/// Full run of the automaton from `G_0` to its fixed point `G_q`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub configurations: Vec<Configuration>,
}

impl Trace {
    pub fn initial(&self) -> &Configuration {
        &self.configurations[0]
    }

    pub fn fixed_point(&self) -> &Configuration {
        self.configurations.last().expect("trace is never empty")
    }

    /// Number of Δ applications from `G_0` to the fixed point.
    pub fn steps(&self) -> usize {
        self.configurations.len() - 1
    }

    /// Δ applications that established at least one new fact.
    pub fn productive_steps(&self) -> usize {
        self.configurations
            .windows(2)
            .filter(|w| w[0].ef != w[1].ef)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasiClassification {
    pub class: String,
    /// Node facts established at the fixed point, by node id.
    pub nodes: Vec<usize>,
    pub steps: usize,
}

impl CellularKnowledgeBase {
    /// Compiles the rules of a tree. Facts are ordered nodes first (by id),
    /// then attribute tests (schema order, then value order), then classes
    /// (label order).
    pub fn compile(tree: &InductionGraph) -> Self {
        let rules = tree.extract_rules();
        let mut facts: Vec<Fact> = (0..tree.node_count()).map(Fact::Node).collect();

        let mut tests: Vec<(usize, usize, Fact)> = Vec::new();
        for node in &tree.nodes {
            if let NodeKind::Split {
                attribute,
                children,
            } = &node.kind
            {
                let domain = tree.attributes[*attribute].nominal_values().unwrap_or_default();
                for (value, _) in children {
                    let pos = domain.iter().position(|d| d == value).unwrap_or(usize::MAX);
                    let fact = Fact::Attr {
                        attribute: tree.attributes[*attribute].name.clone(),
                        value: value.clone(),
                    };
                    if !tests.iter().any(|(_, _, f)| *f == fact) {
                        tests.push((*attribute, pos, fact));
                    }
                }
            }
        }
        tests.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then_with(|| a.2.cmp(&b.2)));
        facts.extend(tests.into_iter().map(|(_, _, f)| f));

        let mut classes: Vec<&String> = tree
            .nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| &tree.classes[n.majority])
            .collect();
        classes.sort();
        classes.dedup();
        facts.extend(classes.into_iter().map(|c| Fact::Class(c.clone())));

        let index: HashMap<Fact, usize> =
            facts.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        let internal = BitVec::from_indices(
            facts.len(),
            facts
                .iter()
                .enumerate()
                .filter(|(_, f)| !matches!(f, Fact::Node(_)))
                .map(|(i, _)| i),
        );
        let mut r_e = BitMatrix::zeros(facts.len(), rules.len());
        let mut r_s = BitMatrix::zeros(facts.len(), rules.len());
        for (j, rule) in rules.iter().enumerate() {
            for p in &rule.premises {
                r_e.set(index[p], j, true);
            }
            r_s.set(index[&rule.conclusion], j, true);
        }

        let mut depth = vec![0; tree.node_count()];
        for node in &tree.nodes {
            if let NodeKind::Split { children, .. } = &node.kind {
                for &(_, c) in children {
                    depth[c] = depth[node.id] + 1;
                }
            }
        }
        let nodes = tree
            .nodes
            .iter()
            .map(|n| NodeInfo {
                depth: depth[n.id],
                majority: tree.classes[n.majority].clone(),
            })
            .collect();

        CellularKnowledgeBase {
            facts,
            internal,
            rules,
            r_e,
            r_s,
            index,
            nodes,
            attributes: tree.attributes.clone(),
            discretization: tree.discretization.clone(),
        }
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn rules(&self) -> &[ClassificationRule] {
        &self.rules
    }

    /// `R_E`, facts × rules.
    pub fn premise_matrix(&self) -> &BitMatrix {
        &self.r_e
    }

    /// `R_S`, facts × rules.
    pub fn conclusion_matrix(&self) -> &BitMatrix {
        &self.r_s
    }

    pub fn fact_index(&self, fact: &Fact) -> Option<usize> {
        self.index.get(fact).copied()
    }

    /// The IF layer.
    pub fn internal(&self) -> &BitVec {
        &self.internal
    }

    /// `G_0`: EF set on `initial`, IF from compilation, IR all ones, the rest zero.
    pub fn initial_configuration(&self, initial: &[Fact]) -> Result<Configuration, CasiError> {
        let mut ef = BitVec::zeros(self.facts.len());
        for f in initial {
            let i = self
                .fact_index(f)
                .ok_or_else(|| CasiError::UnknownFact(f.to_string()))?;
            ef.set(i, true);
        }
        let l = self.facts.len();
        let r = self.rules.len();
        Ok(Configuration {
            ef,
            if_: self.internal.clone(),
            sf: BitVec::zeros(l),
            er: BitVec::zeros(r),
            ir: BitVec::ones(r),
            sr: BitVec::zeros(r),
            generation: 0,
        })
    }

    /// Assessment, selection and filtering.
    pub fn delta_fact(&self, g: &Configuration, semantics: PremiseSemantics) -> Configuration {
        let eligible = match semantics {
            PremiseSemantics::AllPremises => self.r_e.columns_within(&g.ef),
            PremiseSemantics::AnyPremise => self.r_e.transpose_mul_vec(&g.ef),
        };
        let mut er = g.er.clone();
        er.or_assign(&eligible);
        Configuration {
            sf: g.ef.clone(),
            er,
            ..g.clone()
        }
    }

    /// Execution.
    pub fn delta_rule(&self, g: &Configuration) -> Configuration {
        let mut ef = g.ef.clone();
        ef.or_assign(&self.r_s.mul_vec(&g.er));
        Configuration {
            ef,
            sr: g.er.not(),
            ..g.clone()
        }
    }

    /// Global transition `Δ = δ_rule ∘ δ_fact`.
    pub fn step(&self, g: &Configuration, semantics: PremiseSemantics) -> Configuration {
        let mut next = self.delta_rule(&self.delta_fact(g, semantics));
        next.generation = g.generation + 1;
        next
    }

    /// Iterates Δ from the initial facts until a configuration repeats.
    pub fn infer(&self, initial: &[Fact]) -> Result<Trace, CasiError> {
        self.infer_with(initial, PremiseSemantics::AllPremises)
    }

    pub fn infer_with(
        &self,
        initial: &[Fact],
        semantics: PremiseSemantics,
    ) -> Result<Trace, CasiError> {
        let mut configurations = vec![self.initial_configuration(initial)?];
        // r+2 applications cover r+1 productive generations plus the one that
        // confirms the fixed point.
        let cap = self.rules.len() + 2;
        for _ in 0..cap {
            let current = configurations.last().unwrap();
            let next = self.step(current, semantics);
            if next.same_cells(current) {
                return Ok(Trace { configurations });
            }
            configurations.push(next);
        }
        Err(CasiError::NoConvergence(cap))
    }

    /// Classifies a binned instance aligned with the compiled schema. With
    /// `fallback`, a case that stops at an unseen value takes the majority
    /// class of the deepest node it reached.
    pub fn classify(
        &self,
        values: &[Value],
        fallback: bool,
    ) -> Result<CasiClassification, CasiError> {
        if values.len() != self.attributes.len() {
            return Err(CasiError::Arity {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        let mut initial = vec![Fact::Node(0)];
        for (attr, v) in self.attributes.iter().zip(values) {
            let fact = Fact::Attr {
                attribute: attr.name.clone(),
                value: v.to_string(),
            };
            // Values no rule tests simply never fire anything.
            if self.index.contains_key(&fact) {
                initial.push(fact);
            }
        }
        let trace = self.infer(&initial)?;
        let ef = &trace.fixed_point().ef;
        let mut nodes = Vec::new();
        let mut classes = Vec::new();
        for i in ef.iter_ones() {
            match &self.facts[i] {
                Fact::Node(id) => nodes.push(*id),
                Fact::Class(c) => classes.push(c.clone()),
                Fact::Attr { .. } => {}
            }
        }
        let class = match classes.len() {
            1 => classes.pop().unwrap(),
            0 if fallback => {
                let deepest = nodes
                    .iter()
                    .max_by_key(|&&n| self.nodes[n].depth)
                    .expect("root fact is always established");
                self.nodes[*deepest].majority.clone()
            }
            0 => return Err(CasiError::UnknownValue),
            _ => return Err(CasiError::Integrity(classes)),
        };
        Ok(CasiClassification {
            class,
            nodes,
            steps: trace.steps(),
        })
    }

    /// Bins a raw instance with the compiled cut map, then classifies.
    pub fn classify_raw(
        &self,
        instance: &Instance,
        fallback: bool,
    ) -> Result<CasiClassification, CasiError> {
        if instance.values.len() != self.attributes.len() {
            return Err(CasiError::Arity {
                expected: self.attributes.len(),
                found: instance.values.len(),
            });
        }
        let binned =
            discretize::apply_to_instance(&self.discretization, &self.attributes, instance)?;
        self.classify(&binned.values, fallback)
    }

    /// CELFACT, CELRULE and the two incidence matrices as text tables.
    pub fn render(&self, g: &Configuration) -> String {
        let bit = |b: bool| if b { '1' } else { '0' };
        let labels: Vec<String> = self.facts.iter().map(ToString::to_string).collect();
        let width = labels.iter().map(String::len).max().unwrap_or(4).max(4);
        let mut out = String::new();
        let _ = writeln!(out, "CELFACT (generation {})", g.generation);
        let _ = writeln!(out, "{:width$}  EF IF SF", "Fact");
        for (i, label) in labels.iter().enumerate() {
            let _ = writeln!(
                out,
                "{label:width$}  {}  {}  {}",
                bit(g.ef.get(i)),
                bit(g.if_.get(i)),
                bit(g.sf.get(i))
            );
        }
        let _ = writeln!(out, "\nCELRULE");
        let _ = writeln!(out, "{:6}  ER IR SR  rule", "Rule");
        for (j, rule) in self.rules.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:6}  {}  {}  {}   {rule}",
                format!("R{}", j + 1),
                bit(g.er.get(j)),
                bit(g.ir.get(j)),
                bit(g.sr.get(j))
            );
        }
        for (name, m) in [("R_E", &self.r_e), ("R_S", &self.r_s)] {
            let _ = writeln!(out, "\n{name}");
            let header: String = (1..=self.rules.len()).map(|j| format!("{:>4}", format!("R{j}"))).collect();
            let _ = writeln!(out, "{:width$} {header}", "");
            for (i, label) in labels.iter().enumerate() {
                let row: String = (0..self.rules.len())
                    .map(|j| format!("{:>4}", bit(m.get(i, j))))
                    .collect();
                let _ = writeln!(out, "{label:width$} {row}");
            }
        }
        out
    }
}

// ---- knowledge-base file ----

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FactRecord {
    Node(usize),
    Attr { attribute: String, value: String },
    Class(String),
}

impl From<&Fact> for FactRecord {
    fn from(f: &Fact) -> Self {
        match f {
            Fact::Node(id) => FactRecord::Node(*id),
            Fact::Attr { attribute, value } => FactRecord::Attr {
                attribute: attribute.clone(),
                value: value.clone(),
            },
            Fact::Class(c) => FactRecord::Class(c.clone()),
        }
    }
}

impl From<FactRecord> for Fact {
    fn from(f: FactRecord) -> Self {
        match f {
            FactRecord::Node(id) => Fact::Node(id),
            FactRecord::Attr { attribute, value } => Fact::Attr { attribute, value },
            FactRecord::Class(c) => Fact::Class(c),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FactRow {
    label: String,
    fact: FactRecord,
    #[serde(rename = "if")]
    internal: u8,
}

#[derive(Serialize, Deserialize)]
struct RuleRow {
    premises: Vec<usize>,
    conclusion: usize,
}

#[derive(Serialize, Deserialize)]
struct NodeRow {
    depth: usize,
    majority: String,
}

#[derive(Serialize, Deserialize)]
struct KbFile {
    facts: Vec<FactRow>,
    rules: Vec<RuleRow>,
    /// One bitstring per fact, one character per rule.
    r_e: Vec<String>,
    r_s: Vec<String>,
    nodes: Vec<NodeRow>,
    attributes: Vec<AttributeSpec>,
    discretization: DiscretizationMap,
}

impl CellularKnowledgeBase {
    pub fn to_json(&self) -> String {
        let file = KbFile {
            facts: self
                .facts
                .iter()
                .enumerate()
                .map(|(i, f)| FactRow {
                    label: f.to_string(),
                    fact: f.into(),
                    internal: u8::from(self.internal.get(i)),
                })
                .collect(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleRow {
                    premises: r.premises.iter().map(|p| self.index[p]).collect(),
                    conclusion: self.index[&r.conclusion],
                })
                .collect(),
            r_e: (0..self.facts.len()).map(|i| self.r_e.row_string(i)).collect(),
            r_s: (0..self.facts.len()).map(|i| self.r_s.row_string(i)).collect(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRow {
                    depth: n.depth,
                    majority: n.majority.clone(),
                })
                .collect(),
            attributes: self.attributes.clone(),
            discretization: self.discretization.clone(),
        };
        serde_json::to_string_pretty(&file).expect("knowledge base serializes")
    }

    /// Loads a knowledge-base file; the matrices must agree with the rule table.
    pub fn from_json(text: &str) -> Result<Self, CasiError> {
        let bad = |m: String| CasiError::Malformed(m);
        let file: KbFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let facts: Vec<Fact> = file.facts.iter().map(|r| Fact::from(clone_record(&r.fact))).collect();
        let l = facts.len();
        let index: HashMap<Fact, usize> =
            facts.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        if index.len() != l {
            return Err(bad("duplicate fact".into()));
        }
        let internal = BitVec::from_indices(
            l,
            file.facts.iter().enumerate().filter(|(_, r)| r.internal == 1).map(|(i, _)| i),
        );
        let fact_at = |i: usize| facts.get(i).cloned().ok_or_else(|| bad(format!("fact {i} out of range")));
        let rules = file
            .rules
            .iter()
            .map(|r| {
                Ok(ClassificationRule {
                    premises: r.premises.iter().map(|&i| fact_at(i)).collect::<Result<_, _>>()?,
                    conclusion: fact_at(r.conclusion)?,
                })
            })
            .collect::<Result<Vec<_>, CasiError>>()?;
        let parse = |rows: &[String]| -> Result<BitMatrix, CasiError> {
            if rows.len() != l {
                return Err(bad("matrix row count differs from fact count".into()));
            }
            let mut m = BitMatrix::zeros(l, rules.len());
            for (i, row) in rows.iter().enumerate() {
                if row.len() != rules.len() {
                    return Err(bad(format!("matrix row {i} has wrong width")));
                }
                for (j, ch) in row.chars().enumerate() {
                    match ch {
                        '1' => m.set(i, j, true),
                        '0' => {}
                        _ => return Err(bad(format!("bad bit `{ch}`"))),
                    }
                }
            }
            Ok(m)
        };
        let r_e = parse(&file.r_e)?;
        let r_s = parse(&file.r_s)?;
        for (j, rule) in rules.iter().enumerate() {
            let want_e = BitVec::from_indices(l, rule.premises.iter().map(|p| index[p]));
            let want_s = BitVec::from_indices(l, [index[&rule.conclusion]]);
            if r_e.column(j) != &want_e || r_s.column(j) != &want_s {
                return Err(bad(format!("matrix column {j} disagrees with rule table")));
            }
        }
        Ok(CellularKnowledgeBase {
            facts,
            internal,
            rules,
            r_e,
            r_s,
            index,
            nodes: file
                .nodes
                .into_iter()
                .map(|n| NodeInfo {
                    depth: n.depth,
                    majority: n.majority,
                })
                .collect(),
            attributes: file.attributes,
            discretization: file.discretization,
        })
    }
}

fn clone_record(r: &FactRecord) -> FactRecord {
    match r {
        FactRecord::Node(id) => FactRecord::Node(*id),
        FactRecord::Attr { attribute, value } => FactRecord::Attr {
            attribute: attribute.clone(),
            value: value.clone(),
        },
        FactRecord::Class(c) => FactRecord::Class(c.clone()),
    }
}
