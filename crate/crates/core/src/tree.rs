//! Induction graphs: decision trees over nominal attributes.
//!
//! Nodes are numbered breadth-first (`s0` is the root). A split node has one
//! child per attribute value that reached it during growth; every node keeps
//! the class counts it was grown from, and its majority class.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AttributeSpec, Domain, Instance, TrainingSet, Value};
use crate::discretize::{self, DiscretizationMap, DiscretizeMode};
use crate::eval::stratified_assignment;

const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("class distribution is empty")]
    EmptyDistribution,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("attribute `{0}` is numeric; discretize before growing")]
    NumericAttribute(String),
    #[error("value `{value}` of `{attribute}` was never seen at node s{node}")]
    UnknownValue {
        node: usize,
        attribute: String,
        value: String,
    },
    #[error("instance has {found} values, tree expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error(transparent)]
    Discretize(#[from] discretize::DiscretizeError),
}

/// `-sum p log2 p` over the nonzero counts.
pub fn entropy(counts: &[usize]) -> Result<f64, TreeError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(TreeError::EmptyDistribution);
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

fn entropy_or_zero(counts: &[usize]) -> f64 {
    entropy(counts).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Gain normalized by split information (J48-like).
    GainRatio,
    /// Plain information gain (REPTree-like).
    InfoGain,
}

struct Partition {
    /// (value, rows) in domain order; only values that occur.
    branches: Vec<(String, Vec<usize>)>,
}

fn class_counts(ts: &TrainingSet, rows: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; ts.classes.len()];
    for &r in rows {
        let k = ts.class_index(&ts.instances[r].label).expect("label in class list");
        counts[k] += 1;
    }
    counts
}

fn partition(ts: &TrainingSet, rows: &[usize], attr: usize) -> Partition {
    let domain = ts.attributes[attr].nominal_values().unwrap_or_default();
    let mut by_value: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut extra: Vec<(String, Vec<usize>)> = Vec::new();
    for &r in rows {
        let v = ts.instances[r].values[attr].as_nominal().unwrap_or_default();
        match domain.iter().position(|d| d == v) {
            Some(pos) => by_value.entry(pos).or_default().push(r),
            None => match extra.iter_mut().find(|(x, _)| x == v) {
                Some((_, rs)) => rs.push(r),
                None => extra.push((v.to_owned(), vec![r])),
            },
        }
    }
    let mut branches: Vec<(String, Vec<usize>)> = by_value
        .into_iter()
        .map(|(pos, rs)| (domain[pos].clone(), rs))
        .collect();
    branches.extend(extra);
    Partition { branches }
}

struct SplitScore {
    gain: f64,
    ratio: f64,
}

fn score(ts: &TrainingSet, rows: &[usize], part: &Partition) -> SplitScore {
    let parent = entropy_or_zero(&class_counts(ts, rows));
    let n = rows.len() as f64;
    let mut remainder = 0.0;
    let mut sizes = Vec::with_capacity(part.branches.len());
    for (_, rs) in &part.branches {
        remainder += rs.len() as f64 / n * entropy_or_zero(&class_counts(ts, rs));
        sizes.push(rs.len());
    }
    let gain = parent - remainder;
    let split_info = entropy_or_zero(&sizes);
    let ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
    SplitScore { gain, ratio }
}

/// Information gain of splitting the whole set on a nominal attribute.
pub fn information_gain(ts: &TrainingSet, attr: usize) -> f64 {
    let rows: Vec<usize> = (0..ts.len()).collect();
    score(ts, &rows, &partition(ts, &rows, attr)).gain
}

/// Gain divided by split information; zero when the split information is zero.
pub fn gain_ratio(ts: &TrainingSet, attr: usize) -> f64 {
    let rows: Vec<usize> = (0..ts.len()).collect();
    score(ts, &rows, &partition(ts, &rows, attr)).ratio
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf,
    Split {
        attribute: usize,
        /// (value, child id) in value order.
        children: Vec<(String, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: usize,
    pub kind: NodeKind,
    /// Per class, aligned with the tree's class list.
    pub counts: Vec<usize>,
    /// Index of the majority class; lowest label wins ties.
    pub majority: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

fn majority_of(counts: &[usize]) -> usize {
    // max_by_key keeps the last maximum, so scan by hand for the first.
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// A tree given as a nested value, numbered breadth-first by
/// [`InductionGraph::from_subtree`].
#[derive(Debug, Clone, PartialEq)]
pub enum Subtree {
    Leaf {
        counts: Vec<usize>,
    },
    Split {
        attribute: usize,
        counts: Vec<usize>,
        children: Vec<(String, Subtree)>,
    },
}

/// One element of the fact base: a tree node, an attribute test, or a class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fact {
    Node(usize),
    Attr { attribute: String, value: String },
    Class(String),
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Node(id) => write!(f, "s{id}"),
            Fact::Attr { attribute, value } => write!(f, "{attribute}={value}"),
            Fact::Class(c) => write!(f, "Y={c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationRule {
    pub premises: Vec<Fact>,
    pub conclusion: Fact,
}

impl fmt::Display for ClassificationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let premises: Vec<String> = self.premises.iter().map(ToString::to_string).collect();
        write!(f, "IF {} THEN {}", premises.join(" AND "), self.conclusion)
    }
}

/// Outcome of routing an instance through the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeClassification {
    pub class: String,
    /// Visited node ids from the root.
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InductionGraph {
    /// Nominal schema the splits test.
    pub attributes: Vec<AttributeSpec>,
    pub classes: Vec<String>,
    /// Indexed by node id.
    pub nodes: Vec<TreeNode>,
    /// Cuts used to bin numeric inputs before classification.
    pub discretization: DiscretizationMap,
}

impl InductionGraph {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn class_of(&self, node: usize) -> &str {
        &self.classes[self.nodes[node].majority]
    }

    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for node in &self.nodes {
            if let NodeKind::Split { children, .. } = &node.kind {
                for &(_, c) in children {
                    depth[c] = depth[node.id] + 1;
                }
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Numbers a nested tree breadth-first and checks it.
    pub fn from_subtree(
        attributes: Vec<AttributeSpec>,
        classes: Vec<String>,
        root: Subtree,
    ) -> Result<Self, TreeError> {
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut queue = VecDeque::from([root]);
        let mut next_id = 1;
        while let Some(sub) = queue.pop_front() {
            let id = nodes.len();
            let node = match sub {
                Subtree::Leaf { counts } => TreeNode {
                    id,
                    majority: majority_of(&counts),
                    counts,
                    kind: NodeKind::Leaf,
                },
                Subtree::Split {
                    attribute,
                    counts,
                    children,
                } => {
                    let mut ids = Vec::with_capacity(children.len());
                    for (value, child) in children {
                        ids.push((value, next_id));
                        next_id += 1;
                        queue.push_back(child);
                    }
                    TreeNode {
                        id,
                        majority: majority_of(&counts),
                        counts,
                        kind: NodeKind::Split {
                            attribute,
                            children: ids,
                        },
                    }
                }
            };
            nodes.push(node);
        }
        let tree = InductionGraph {
            attributes,
            classes,
            nodes,
            discretization: DiscretizationMap::default(),
        };
        tree.check()?;
        Ok(tree)
    }

    /// Structural invariants: breadth-first ids, every node reached exactly
    /// once, no attribute tested twice on a path, counts aligned with classes.
    pub fn check(&self) -> Result<(), TreeError> {
        let bad = |m: String| Err(TreeError::Malformed(m));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut parent_attrs: Vec<Option<Vec<usize>>> = vec![None; self.nodes.len()];
        parent_attrs[0] = Some(Vec::new());
        let mut expected_next = 1;
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node at index {i} has id s{}", node.id));
            }
            if node.counts.len() != self.classes.len() {
                return bad(format!("s{i} counts do not match class list"));
            }
            if node.majority >= self.classes.len() {
                return bad(format!("s{i} majority out of range"));
            }
            let Some(used) = parent_attrs[i].clone() else {
                return bad(format!("s{i} is unreachable"));
            };
            if let NodeKind::Split {
                attribute,
                children,
            } = &node.kind
            {
                if *attribute >= self.attributes.len() {
                    return bad(format!("s{i} splits on unknown attribute"));
                }
                if used.contains(attribute) {
                    return bad(format!("s{i} retests an attribute on its path"));
                }
                if children.is_empty() {
                    return bad(format!("s{i} has no children"));
                }
                let mut values: Vec<&String> = children.iter().map(|(v, _)| v).collect();
                values.sort();
                values.dedup();
                if values.len() != children.len() {
                    return bad(format!("s{i} repeats a branch value"));
                }
                for &(_, c) in children {
                    if c != expected_next || c >= self.nodes.len() {
                        return bad(format!("s{i} child s{c} breaks breadth-first numbering"));
                    }
                    expected_next += 1;
                    let mut u = used.clone();
                    u.push(*attribute);
                    parent_attrs[c] = Some(u);
                }
            }
        }
        if expected_next != self.nodes.len() {
            return bad("dangling nodes".into());
        }
        Ok(())
    }

    /// Routes an instance (already binned, aligned with `attributes`).
    /// With `fallback`, an unseen value stops at the current node and returns
    /// its majority class.
    pub fn classify(
        &self,
        values: &[Value],
        fallback: bool,
    ) -> Result<TreeClassification, TreeError> {
        if values.len() != self.attributes.len() {
            return Err(TreeError::Arity {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        let mut path = vec![0];
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            let NodeKind::Split {
                attribute,
                children,
            } = &node.kind
            else {
                break;
            };
            let v = values[*attribute].to_string();
            match children.iter().find(|(value, _)| *value == v) {
                Some(&(_, child)) => {
                    at = child;
                    path.push(child);
                }
                None if fallback => break,
                None => {
                    return Err(TreeError::UnknownValue {
                        node: at,
                        attribute: self.attributes[*attribute].name.clone(),
                        value: v,
                    })
                }
            }
        }
        Ok(TreeClassification {
            class: self.class_of(at).to_owned(),
            path,
        })
    }

    /// Bins numeric values with the tree's cut map, then classifies.
    pub fn classify_raw(
        &self,
        instance: &Instance,
        fallback: bool,
    ) -> Result<TreeClassification, TreeError> {
        let binned = self.bin(instance)?;
        self.classify(&binned.values, fallback)
    }

    /// Applies the discretization map to an instance laid out like the tree's
    /// schema; numeric values of attributes without cuts are rejected.
    pub fn bin(&self, instance: &Instance) -> Result<Instance, TreeError> {
        if instance.values.len() != self.attributes.len() {
            return Err(TreeError::Arity {
                expected: self.attributes.len(),
                found: instance.values.len(),
            });
        }
        Ok(discretize::apply_to_instance(
            &self.discretization,
            &self.attributes,
            instance,
        )?)
    }

    /// One rule per edge (`s_parent ∧ attr=value → s_child`) and one per leaf
    /// (`s_leaf → Y=class`), in node id order.
    pub fn extract_rules(&self) -> Vec<ClassificationRule> {
        let mut rules = Vec::with_capacity(self.nodes.len() * 2);
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Split {
                    attribute,
                    children,
                } => {
                    for (value, child) in children {
                        rules.push(ClassificationRule {
                            premises: vec![
                                Fact::Node(node.id),
                                Fact::Attr {
                                    attribute: self.attributes[*attribute].name.clone(),
                                    value: value.clone(),
                                },
                            ],
                            conclusion: Fact::Node(*child),
                        });
                    }
                }
                NodeKind::Leaf => rules.push(ClassificationRule {
                    premises: vec![Fact::Node(node.id)],
                    conclusion: Fact::Class(self.classes[node.majority].clone()),
                }),
            }
        }
        rules
    }

    /// Renumbers the nodes reachable from the root breadth-first.
    fn compact(self) -> InductionGraph {
        let mut nodes = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        let mut next_id = 1;
        while let Some(old) = queue.pop_front() {
            let mut node = self.nodes[old].clone();
            node.id = nodes.len();
            if let NodeKind::Split { children, .. } = &mut node.kind {
                for (_, c) in children.iter_mut() {
                    queue.push_back(*c);
                    *c = next_id;
                    next_id += 1;
                }
            }
            nodes.push(node);
        }
        InductionGraph { nodes, ..self }
    }

    /// Indented text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_node(0, 0, &mut out);
        out
    }

    fn render_node(&self, id: usize, indent: usize, out: &mut String) {
        let node = &self.nodes[id];
        match &node.kind {
            NodeKind::Leaf => {
                out.push_str(&format!(
                    "{:indent$}s{id}: {} {:?}\n",
                    "",
                    self.classes[node.majority],
                    node.counts
                ));
            }
            NodeKind::Split {
                attribute,
                children,
            } => {
                out.push_str(&format!(
                    "{:indent$}s{id}: split on {}\n",
                    "",
                    self.attributes[*attribute].name
                ));
                for (value, child) in children {
                    out.push_str(&format!("{:w$}= {value}\n", "", w = indent + 2));
                    self.render_node(*child, indent + 4, out);
                }
            }
        }
    }
}

/// Growth settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    pub criterion: SplitCriterion,
    /// Splits that would give any branch fewer instances are not considered.
    pub min_leaf: usize,
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams {
            criterion: SplitCriterion::GainRatio,
            min_leaf: 2,
        }
    }
}

/// Grows a tree on an all-nominal training set.
pub fn grow(ts: &TrainingSet, params: GrowParams) -> Result<InductionGraph, TreeError> {
    if ts.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    if let Some(a) = ts
        .attributes
        .iter()
        .find(|a| matches!(a.domain, Domain::Numeric { .. }))
    {
        return Err(TreeError::NumericAttribute(a.name.clone()));
    }
    let min_leaf = params.min_leaf.max(1);
    let mut nodes: Vec<TreeNode> = Vec::new();
    let all: Vec<usize> = (0..ts.len()).collect();
    let mut queue: VecDeque<(Vec<usize>, Vec<bool>)> =
        VecDeque::from([(all, vec![false; ts.attributes.len()])]);
    while let Some((rows, used)) = queue.pop_front() {
        let id = nodes.len();
        let counts = class_counts(ts, &rows);
        let majority = majority_of(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let mut best: Option<(usize, f64, Partition)> = None;
        if !pure {
            for attr in (0..ts.attributes.len()).filter(|&a| !used[a]) {
                let part = partition(ts, &rows, attr);
                if part.branches.len() < 2
                    || part.branches.iter().any(|(_, rs)| rs.len() < min_leaf)
                {
                    continue;
                }
                let s = score(ts, &rows, &part);
                if s.gain <= GAIN_EPS {
                    continue;
                }
                let value = match params.criterion {
                    SplitCriterion::GainRatio => s.ratio,
                    SplitCriterion::InfoGain => s.gain,
                };
                if best.as_ref().is_none_or(|(_, b, _)| value > b + GAIN_EPS) {
                    best = Some((attr, value, part));
                }
            }
        }
        let kind = match best {
            None => NodeKind::Leaf,
            Some((attribute, _, part)) => {
                let first_child = id + 1 + queue.len();
                let mut child_used = used.clone();
                child_used[attribute] = true;
                let mut children = Vec::with_capacity(part.branches.len());
                for (k, (value, rs)) in part.branches.into_iter().enumerate() {
                    children.push((value, first_child + k));
                    queue.push_back((rs, child_used.clone()));
                }
                NodeKind::Split {
                    attribute,
                    children,
                }
            }
        };
        nodes.push(TreeNode {
            id,
            kind,
            counts,
            majority,
        });
    }
    let tree = InductionGraph {
        attributes: ts.attributes.clone(),
        classes: ts.classes.clone(),
        nodes,
        discretization: DiscretizationMap::default(),
    };
    debug_assert!(tree.check().is_ok());
    Ok(tree)
}

/// Reduced-error pruning: bottom-up, a subtree becomes a leaf of its majority
/// class whenever that does not raise the error on `prune_set`. Nodes no
/// pruning instance reaches are kept as they are.
pub fn rep_prune(tree: &InductionGraph, prune_set: &TrainingSet) -> InductionGraph {
    let mut pruned = tree.clone();
    let rows: Vec<&Instance> = prune_set.instances.iter().collect();
    prune_node(&mut pruned, 0, &rows);
    pruned.compact()
}

/// Returns the errors of the (possibly pruned) subtree on `rows`.
fn prune_node(tree: &mut InductionGraph, id: usize, rows: &[&Instance]) -> usize {
    let majority = tree.classes[tree.nodes[id].majority].clone();
    let leaf_errors = rows.iter().filter(|r| r.label != majority).count();
    let NodeKind::Split {
        attribute,
        children,
    } = tree.nodes[id].kind.clone()
    else {
        return leaf_errors;
    };
    let mut subtree_errors = 0;
    let mut routed = 0;
    for (value, child) in &children {
        let reaching: Vec<&Instance> = rows
            .iter()
            .copied()
            .filter(|r| r.values[attribute].to_string() == *value)
            .collect();
        routed += reaching.len();
        subtree_errors += prune_node(tree, *child, &reaching);
    }
    // Instances with a value no branch knows are misrouted by the subtree.
    subtree_errors += rows.len() - routed;
    if !rows.is_empty() && leaf_errors <= subtree_errors {
        tree.nodes[id].kind = NodeKind::Leaf;
        leaf_errors
    } else {
        subtree_errors
    }
}

/// Tree-learning method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMethod {
    /// Gain-ratio growth, no pruning.
    J48,
    /// Information-gain growth on two thirds, reduced-error pruning on the rest.
    RepTree,
}

impl TreeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            TreeMethod::J48 => "j48",
            TreeMethod::RepTree => "reptree",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub method: TreeMethod,
    pub min_leaf: usize,
    /// `None` requires an all-nominal training set.
    pub discretize: Option<DiscretizeMode>,
    /// Seeds the grow/prune split of [`TreeMethod::RepTree`].
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(method: TreeMethod) -> Self {
        TrainConfig {
            method,
            min_leaf: 2,
            discretize: Some(DiscretizeMode::Supervised),
            seed: 1,
        }
    }
}

pub const PRUNE_FOLDS: usize = 3;

/// Discretizes (fitting cuts on `ts` only), grows and optionally prunes.
pub fn train(ts: &TrainingSet, config: &TrainConfig) -> Result<InductionGraph, TreeError> {
    if ts.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    let map = config
        .discretize
        .map(|m| m.fit(ts))
        .unwrap_or_default();
    let nominal = discretize::apply_map(&map, ts)?;
    let mut tree = match config.method {
        TreeMethod::J48 => grow(
            &nominal,
            GrowParams {
                criterion: SplitCriterion::GainRatio,
                min_leaf: config.min_leaf,
            },
        )?,
        TreeMethod::RepTree => {
            let params = GrowParams {
                criterion: SplitCriterion::InfoGain,
                min_leaf: config.min_leaf,
            };
            if nominal.len() < PRUNE_FOLDS {
                grow(&nominal, params)?
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let fold = stratified_assignment(&nominal, PRUNE_FOLDS, &mut rng);
                let (prune, grow_rows): (Vec<usize>, Vec<usize>) =
                    (0..nominal.len()).partition(|&i| fold[i] == 0);
                let tree = grow(&nominal.subset(&grow_rows), params)?;
                rep_prune(&tree, &nominal.subset(&prune))
            }
        }
    };
    tree.discretization = map;
    Ok(tree)
}

// ---- model file ----

#[derive(Serialize, Deserialize)]
struct ChildRecord {
    value: String,
    node: String,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<ChildRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf_class: Option<String>,
    majority: String,
    counts: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    classes: Vec<String>,
    attributes: Vec<AttributeSpec>,
    discretization: DiscretizationMap,
    nodes: Vec<NodeRecord>,
}

fn parse_node_id(s: &str) -> Result<usize, TreeError> {
    s.strip_prefix('s')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| TreeError::Malformed(format!("bad node id `{s}`")))
}

impl InductionGraph {
    pub fn to_json(&self) -> String {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let counts = self
                    .classes
                    .iter()
                    .cloned()
                    .zip(n.counts.iter().copied())
                    .collect();
                let majority = self.classes[n.majority].clone();
                match &n.kind {
                    NodeKind::Leaf => NodeRecord {
                        id: format!("s{}", n.id),
                        split: None,
                        children: None,
                        leaf_class: Some(majority.clone()),
                        majority,
                        counts,
                    },
                    NodeKind::Split {
                        attribute,
                        children,
                    } => NodeRecord {
                        id: format!("s{}", n.id),
                        split: Some(self.attributes[*attribute].name.clone()),
                        children: Some(
                            children
                                .iter()
                                .map(|(v, c)| ChildRecord {
                                    value: v.clone(),
                                    node: format!("s{c}"),
                                })
                                .collect(),
                        ),
                        leaf_class: None,
                        majority,
                        counts,
                    },
                }
            })
            .collect();
        let file = ModelFile {
            classes: self.classes.clone(),
            attributes: self.attributes.clone(),
            discretization: self.discretization.clone(),
            nodes,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| TreeError::Malformed(e.to_string()))?;
        let class_idx = |c: &str| {
            file.classes
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| TreeError::Malformed(format!("unknown class `{c}`")))
        };
        let mut nodes = Vec::with_capacity(file.nodes.len());
        for rec in &file.nodes {
            let id = parse_node_id(&rec.id)?;
            let mut counts = vec![0; file.classes.len()];
            for (c, n) in &rec.counts {
                counts[class_idx(c)?] = *n;
            }
            let majority = class_idx(rec.leaf_class.as_deref().unwrap_or(&rec.majority))?;
            let kind = match (&rec.split, &rec.children) {
                (Some(attr), Some(children)) => NodeKind::Split {
                    attribute: file
                        .attributes
                        .iter()
                        .position(|a| &a.name == attr)
                        .ok_or_else(|| TreeError::Malformed(format!("unknown attribute `{attr}`")))?,
                    children: children
                        .iter()
                        .map(|c| Ok((c.value.clone(), parse_node_id(&c.node)?)))
                        .collect::<Result<_, TreeError>>()?,
                },
                (None, None) => NodeKind::Leaf,
                _ => return Err(TreeError::Malformed(format!("{}: split without children", rec.id))),
            };
            nodes.push(TreeNode {
                id,
                kind,
                counts,
                majority,
            });
        }
        let tree = InductionGraph {
            attributes: file.attributes,
            classes: file.classes,
            nodes,
            discretization: file.discretization,
        };
        tree.check()?;
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv, sample, AttributeKind};

    fn sample_nominal_steps() -> TrainingSet {
        let text = crate::dataset::SAMPLE_CSV.replace("steps:numeric", "steps:nominal");
        let ts = load_csv(&text).unwrap();
        // Keep problem and steps only.
        let attributes = vec![ts.attributes[0].clone(), ts.attributes[2].clone()];
        let instances = ts
            .instances
            .iter()
            .map(|i| Instance::new(vec![i.values[0].clone(), i.values[2].clone()], i.label.clone()))
            .collect();
        TrainingSet {
            attributes,
            classes: ts.classes,
            instances,
        }
    }

    fn stump() -> InductionGraph {
        InductionGraph::from_subtree(
            vec![AttributeSpec::nominal("X", vec!["a".into(), "b".into()])],
            vec!["c1".into(), "c2".into()],
            Subtree::Split {
                attribute: 0,
                counts: vec![1, 1],
                children: vec![
                    ("a".into(), Subtree::Leaf { counts: vec![1, 0] }),
                    ("b".into(), Subtree::Leaf { counts: vec![0, 1] }),
                ],
            },
        )
        .unwrap()
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(&[3, 2, 2, 2, 2]).unwrap() - 2.2999).abs() < 1e-4);
        assert_eq!(entropy(&[5]).unwrap(), 0.0);
        assert!((entropy(&[1, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(entropy(&[0, 0]), Err(TreeError::EmptyDistribution));
    }

    #[test]
    fn sample_gains_prefer_steps() {
        let ts = sample_nominal_steps();
        let g_problem = information_gain(&ts, 0);
        let g_steps = information_gain(&ts, 1);
        assert!((g_steps - 1.4949).abs() < 1e-3, "{g_steps}");
        assert!((g_problem - 1.0031).abs() < 1e-3, "{g_problem}");
    }

    #[test]
    fn constant_attribute_has_zero_gain() {
        let ts = load_csv("k:nominal,x:nominal,class:nominal\nz,a,P\nz,b,Q\nz,c,P\n").unwrap();
        assert_eq!(information_gain(&ts, 0), 0.0);
        assert_eq!(gain_ratio(&ts, 0), 0.0);
    }

    #[test]
    fn row_id_gain_equals_parent_entropy() {
        let ts = load_csv("id:nominal,class:nominal\n1,P\n2,Q\n3,P\n4,R\n").unwrap();
        let parent = entropy(&[2, 1, 1]).unwrap();
        assert!((information_gain(&ts, 0) - parent).abs() < 1e-12);
    }

    #[test]
    fn sample_root_splits_on_steps() {
        let ts = sample_nominal_steps();
        let tree = grow(
            &ts,
            GrowParams {
                criterion: SplitCriterion::InfoGain,
                min_leaf: 1,
            },
        )
        .unwrap();
        let NodeKind::Split {
            attribute,
            children,
        } = &tree.root().kind
        else {
            panic!("root is a leaf");
        };
        assert_eq!(tree.attributes[*attribute].name, "steps");
        assert_eq!(children.len(), 3);
        let (_, twelve) = children.iter().find(|(v, _)| v == "12").unwrap();
        let leaf = &tree.nodes[*twelve];
        assert!(leaf.is_leaf());
        assert_eq!(tree.class_of(leaf.id), "P3");
        assert_eq!(leaf.counts.iter().sum::<usize>(), 2);
        assert_eq!(leaf.counts[tree.classes.iter().position(|c| c == "P3").unwrap()], 2);
    }

    #[test]
    fn one_class_grows_single_leaf() {
        let ts = load_csv("x:nominal,class:nominal\na,c\nb,c\n").unwrap();
        let tree = grow(&ts, GrowParams::default()).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.extract_rules().len(), 1);
    }

    #[test]
    fn two_instances_one_split() {
        let ts = load_csv("x:nominal,class:nominal\na,c1\nb,c2\n").unwrap();
        let tree = grow(
            &ts,
            GrowParams {
                criterion: SplitCriterion::GainRatio,
                min_leaf: 1,
            },
        )
        .unwrap();
        assert_eq!(tree, {
            let mut s = stump();
            s.attributes = ts.attributes.clone();
            s
        });
    }

    #[test]
    fn numeric_attribute_is_rejected() {
        assert_eq!(
            grow(&sample(), GrowParams::default()).unwrap_err(),
            TreeError::NumericAttribute("time".into())
        );
    }

    #[test]
    fn ties_go_to_the_first_attribute() {
        let ts = load_csv("p:nominal,q:nominal,class:nominal\na,a,X\nb,b,Y\n").unwrap();
        for criterion in [SplitCriterion::GainRatio, SplitCriterion::InfoGain] {
            let tree = grow(&ts, GrowParams { criterion, min_leaf: 1 }).unwrap();
            assert!(matches!(tree.root().kind, NodeKind::Split { attribute: 0, .. }));
        }
    }

    #[test]
    fn min_leaf_blocks_small_branches() {
        let ts = load_csv("x:nominal,class:nominal\na,c1\nb,c2\n").unwrap();
        let tree = grow(&ts, GrowParams::default()).unwrap();
        assert_eq!(tree.node_count(), 1);
    }

    #[test]
    fn stump_rules() {
        let rules = stump().extract_rules();
        let shown: Vec<String> = rules.iter().map(ToString::to_string).collect();
        assert_eq!(
            shown,
            [
                "IF s0 AND X=a THEN s1",
                "IF s0 AND X=b THEN s2",
                "IF s1 THEN Y=c1",
                "IF s2 THEN Y=c2"
            ]
        );
    }

    #[test]
    fn classify_unknown_value() {
        let tree = stump();
        let v = [Value::Nominal("z".into())];
        assert!(matches!(
            tree.classify(&v, false),
            Err(TreeError::UnknownValue { node: 0, .. })
        ));
        let fallback = tree.classify(&v, true).unwrap();
        assert_eq!(fallback.path, vec![0]);
        assert_eq!(fallback.class, "c1");
    }

    #[test]
    fn classify_returns_path() {
        let out = stump().classify(&[Value::Nominal("b".into())], false).unwrap();
        assert_eq!(out.class, "c2");
        assert_eq!(out.path, vec![0, 2]);
    }

    #[test]
    fn prune_collapses_useless_subtree() {
        let tree = stump();
        // Every prune instance is misclassified by the leaves.
        let prune = TrainingSet {
            attributes: tree.attributes.clone(),
            classes: tree.classes.clone(),
            instances: vec![
                Instance::new(vec![Value::Nominal("a".into())], "c2"),
                Instance::new(vec![Value::Nominal("b".into())], "c1"),
            ],
        };
        let pruned = rep_prune(&tree, &prune);
        assert_eq!(pruned.node_count(), 1);
        assert_eq!(pruned.class_of(0), "c1");
    }

    #[test]
    fn prune_with_empty_set_keeps_tree() {
        let tree = stump();
        let empty = TrainingSet {
            attributes: tree.attributes.clone(),
            classes: tree.classes.clone(),
            instances: vec![],
        };
        assert_eq!(rep_prune(&tree, &empty), tree);
    }

    #[test]
    fn prune_keeps_helpful_subtree() {
        let tree = stump();
        let prune = TrainingSet {
            attributes: tree.attributes.clone(),
            classes: tree.classes.clone(),
            instances: vec![
                Instance::new(vec![Value::Nominal("a".into())], "c1"),
                Instance::new(vec![Value::Nominal("b".into())], "c2"),
            ],
        };
        assert_eq!(rep_prune(&tree, &prune), tree);
    }

    #[test]
    fn model_json_round_trip() {
        let ts = sample();
        let mut cfg = TrainConfig::new(TreeMethod::J48);
        cfg.min_leaf = 1;
        let tree = train(&ts, &cfg).unwrap();
        let back = InductionGraph::from_json(&tree.to_json()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn train_reptree_is_deterministic() {
        let ts = sample();
        let cfg = TrainConfig::new(TreeMethod::RepTree);
        assert_eq!(train(&ts, &cfg).unwrap(), train(&ts, &cfg).unwrap());
    }

    #[test]
    fn malformed_numbering_is_rejected() {
        let mut tree = stump();
        if let NodeKind::Split { children, .. } = &mut tree.nodes[0].kind {
            children.swap(0, 1);
            children[0].0 = "b".into();
            children[1].0 = "a".into();
        }
        assert!(tree.check().is_err());
        assert_eq!(tree.attributes[0].kind(), AttributeKind::Nominal);
    }
}
