//! Plan extraction from AND/OR project graphs.
//!
//! Solutions are found by chaining backward from the exit task: every task
//! pulled into a solution commits to one of its precondition groups, whose
//! members are pulled in turn, until only the entry task is left without
//! predecessors. Each solution is then laid out as a step sequence.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::project::ProjectGraph;

pub const DEFAULT_MAX_PLANS: usize = 10_000;

/// An ordered sequence of steps, labeled `P1`, `P2`, ...
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub id: String,
    pub steps: Vec<String>,
}

impl Plan {
    pub fn new(id: impl Into<String>, steps: Vec<String>) -> Self {
        Plan {
            id: id.into(),
            steps,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("solution contains a precedence cycle through `{0}`")]
    Cycle(String),
    #[error("task `{0}` is not part of the project")]
    UnknownTask(String),
    #[error("task `{task}` has no precondition group {group}")]
    NoSuchGroup { task: String, group: usize },
    #[error("plan is empty")]
    Empty,
    #[error("step `{0}` appears more than once")]
    DuplicateStep(String),
    #[error("plan must start with entry `{expected}`")]
    BadStart { expected: String },
    #[error("plan must end with exit `{expected}`")]
    BadEnd { expected: String },
    #[error("step `{0}` runs before any of its precondition groups is complete")]
    Unsupported(String),
}

/// A task subset together with the precondition group each member committed to
/// (`None` for tasks without preconditions).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Solution {
    pub choices: BTreeMap<String, Option<usize>>,
}

impl Solution {
    /// Commits each listed task to the first of its groups lying inside the set.
    pub fn from_tasks<'a>(
        graph: &ProjectGraph,
        tasks: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, PlanError> {
        let set: BTreeSet<&str> = tasks.into_iter().collect();
        let mut choices = BTreeMap::new();
        for &id in &set {
            let task = graph
                .task(id)
                .ok_or_else(|| PlanError::UnknownTask(id.to_owned()))?;
            let choice = if task.is_root() {
                None
            } else {
                let idx = task
                    .pre
                    .iter()
                    .position(|g| g.iter().all(|r| set.contains(r.as_str())))
                    .ok_or_else(|| PlanError::Unsupported(id.to_owned()))?;
                Some(idx)
            };
            choices.insert(id.to_owned(), choice);
        }
        Ok(Solution { choices })
    }

    pub fn tasks(&self) -> impl Iterator<Item = &str> {
        self.choices.keys().map(String::as_str)
    }
}

/// Topological order of a solution. Tasks become ready in waves; each wave is
/// emitted in lexicographic order before the next wave is computed.
pub fn linearize(solution: &Solution, graph: &ProjectGraph) -> Result<Vec<String>, PlanError> {
    let mut preds: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, choice) in &solution.choices {
        let task = graph
            .task(id)
            .ok_or_else(|| PlanError::UnknownTask(id.clone()))?;
        let group = match choice {
            None => Vec::new(),
            Some(g) => task
                .pre
                .get(*g)
                .ok_or(PlanError::NoSuchGroup {
                    task: id.clone(),
                    group: *g,
                })?
                .iter()
                .map(String::as_str)
                .collect(),
        };
        for p in &group {
            if !solution.choices.contains_key(*p) {
                return Err(PlanError::Unsupported(id.clone()));
            }
        }
        preds.insert(id.as_str(), group);
    }

    let mut placed: HashSet<&str> = HashSet::new();
    let mut order = Vec::with_capacity(preds.len());
    while order.len() < preds.len() {
        // BTreeMap iteration keeps each wave sorted.
        let wave: Vec<&str> = preds
            .iter()
            .filter(|(id, ps)| !placed.contains(*id) && ps.iter().all(|p| placed.contains(p)))
            .map(|(id, _)| *id)
            .collect();
        if wave.is_empty() {
            let stuck = preds.keys().find(|id| !placed.contains(*id)).unwrap();
            return Err(PlanError::Cycle((*stuck).to_owned()));
        }
        for id in wave {
            placed.insert(id);
            order.push(id.to_owned());
        }
    }
    Ok(order)
}

/// Result of an enumeration run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSet {
    pub plans: Vec<Plan>,
    /// More than `max_plans` distinct plans exist; `plans` holds the first
    /// `max_plans` of those found, sorted.
    pub truncated: bool,
}

struct Search<'g> {
    graph: &'g ProjectGraph,
    found: BTreeSet<Vec<String>>,
    limit: usize,
    stop: bool,
}

impl<'g> Search<'g> {
    fn run(&mut self, choices: &mut BTreeMap<String, Option<usize>>, open: &mut BTreeSet<String>) {
        if self.stop {
            return;
        }
        let Some(task_id) = open.pop_first() else {
            let solution = Solution {
                choices: choices.clone(),
            };
            // Cycles can only come from graphs that skipped validation.
            if let Ok(seq) = linearize(&solution, self.graph) {
                self.found.insert(seq);
                if self.found.len() >= self.limit {
                    self.stop = true;
                }
            }
            return;
        };
        let graph = self.graph;
        let Some(task) = graph.task(&task_id) else {
            open.insert(task_id);
            return;
        };
        if task.is_root() {
            if task.id == graph.entry() {
                choices.insert(task_id.clone(), None);
                self.run(choices, open);
                choices.remove(&task_id);
            }
            open.insert(task_id);
            return;
        }
        for (gi, group) in task.pre.iter().enumerate() {
            if group.is_empty() || group.iter().any(|r| graph.task(r).is_none()) {
                continue;
            }
            let added: Vec<String> = group
                .iter()
                .filter(|r| !choices.contains_key(*r) && *r != &task_id && !open.contains(*r))
                .cloned()
                .collect();
            // A group naming the task itself can never be satisfied.
            if group.iter().any(|r| r == &task_id) {
                continue;
            }
            choices.insert(task_id.clone(), Some(gi));
            open.extend(added.iter().cloned());
            self.run(choices, open);
            for a in &added {
                open.remove(a);
            }
            choices.remove(&task_id);
            if self.stop {
                break;
            }
        }
        open.insert(task_id);
    }
}

fn search(graph: &ProjectGraph, limit: usize) -> BTreeSet<Vec<String>> {
    let mut s = Search {
        graph,
        found: BTreeSet::new(),
        limit,
        stop: false,
    };
    let mut open = BTreeSet::from([graph.exit().to_owned()]);
    s.run(&mut BTreeMap::new(), &mut open);
    s.found
}

fn label(seqs: impl IntoIterator<Item = Vec<String>>) -> Vec<Plan> {
    seqs.into_iter()
        .enumerate()
        .map(|(i, steps)| Plan::new(format!("P{}", i + 1), steps))
        .collect()
}

/// Every distinct solution plan, sorted by step sequence and labeled in that
/// order. Stops once more than `max_plans` plans are known.
pub fn enumerate_plans(graph: &ProjectGraph, max_plans: usize) -> PlanSet {
    let max_plans = max_plans.max(1);
    let mut found = search(graph, max_plans + 1);
    let truncated = found.len() > max_plans;
    while found.len() > max_plans {
        found.pop_last();
    }
    PlanSet {
        plans: label(found),
        truncated,
    }
}

/// The first solution reached by the backward search.
pub fn first_plan(graph: &ProjectGraph) -> Option<Plan> {
    label(search(graph, 1)).pop()
}

/// Replays a plan against the graph: entry first, exit last, no repeats, and
/// each step preceded by a complete precondition group.
pub fn check_plan(plan: &Plan, graph: &ProjectGraph) -> Result<(), PlanError> {
    let (first, last) = match (plan.steps.first(), plan.steps.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(PlanError::Empty),
    };
    if first != graph.entry() {
        return Err(PlanError::BadStart {
            expected: graph.entry().to_owned(),
        });
    }
    if last != graph.exit() {
        return Err(PlanError::BadEnd {
            expected: graph.exit().to_owned(),
        });
    }
    let mut done: HashSet<&str> = HashSet::new();
    for step in &plan.steps {
        let task = graph
            .task(step)
            .ok_or_else(|| PlanError::UnknownTask(step.clone()))?;
        if done.contains(step.as_str()) {
            return Err(PlanError::DuplicateStep(step.clone()));
        }
        let supported = task.is_root()
            || task
                .pre
                .iter()
                .any(|g| g.iter().all(|r| done.contains(r.as_str())));
        if !supported {
            return Err(PlanError::Unsupported(step.clone()));
        }
        done.insert(step.as_str());
    }
    Ok(())
}
