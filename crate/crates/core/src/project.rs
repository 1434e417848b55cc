//! Project descriptions and their AND/OR task graphs.
//!
//! A task's preconditions are kept in disjunctive normal form: the outer list
//! holds alternatives (OR), each inner list is a group of tasks that must all
//! precede it (AND). A task with no groups is a root of the graph.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    #[serde(default)]
    pub desc: String,
    #[serde(default)]
    pub resource: Option<String>,
    /// Alternatives of conjunction groups.
    #[serde(default)]
    pub pre: Vec<Vec<String>>,
}

impl Task {
    pub fn new(id: impl Into<String>, pre: Vec<Vec<&str>>) -> Self {
        Task {
            id: id.into(),
            desc: String::new(),
            resource: None,
            pre: pre
                .into_iter()
                .map(|group| group.into_iter().map(str::to_owned).collect())
                .collect(),
        }
    }

    pub fn is_root(&self) -> bool {
        self.pre.is_empty()
    }
}

/// Rule broken by a project graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyId,
    DuplicateId(String),
    UnknownReference { task: String, reference: String },
    EmptyGroup { task: String },
    MissingEntry(String),
    MissingExit(String),
    EntryHasPreconditions(String),
    Cycle(String),
    ExitUnreachable,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "task with empty id"),
            Violation::DuplicateId(id) => write!(f, "duplicate task id `{id}`"),
            Violation::UnknownReference { task, reference } => {
                write!(f, "task `{task}` references unknown task `{reference}`")
            }
            Violation::EmptyGroup { task } => {
                write!(f, "task `{task}` has an empty precondition group")
            }
            Violation::MissingEntry(_) => write!(f, "entry task not found"),
            Violation::MissingExit(_) => write!(f, "exit task not found"),
            Violation::EntryHasPreconditions(id) => {
                write!(f, "entry task `{id}` has preconditions")
            }
            Violation::Cycle(id) => write!(f, "task `{id}` lies on a precondition cycle"),
            Violation::ExitUnreachable => write!(f, "exit is not reachable from entry"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid project: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Serialize, Deserialize)]
struct ProjectFile {
    entry: String,
    exit: String,
    tasks: Vec<Task>,
}

/// AND/OR task graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectGraph {
    tasks: Vec<Task>,
    index: HashMap<String, usize>,
    entry: String,
    exit: String,
}

impl ProjectGraph {
    /// Builds a graph without checking any invariant. Use [`ProjectGraph::validate`]
    /// or go through [`parse_project`] for a checked graph.
    pub fn from_parts(tasks: Vec<Task>, entry: impl Into<String>, exit: impl Into<String>) -> Self {
        let mut index = HashMap::new();
        for (i, task) in tasks.iter().enumerate() {
            index.entry(task.id.clone()).or_insert(i);
        }
        ProjectGraph {
            tasks,
            index,
            entry: entry.into(),
            exit: exit.into(),
        }
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn exit(&self) -> &str {
        &self.exit
    }

    /// Tasks in declaration order.
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.index.get(id).map(|&i| &self.tasks[i])
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Lists every broken invariant; empty when the graph is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for task in &self.tasks {
            if task.id.is_empty() {
                out.push(Violation::EmptyId);
            } else if !seen.insert(task.id.as_str()) {
                out.push(Violation::DuplicateId(task.id.clone()));
            }
        }
        for task in &self.tasks {
            for group in &task.pre {
                if group.is_empty() {
                    out.push(Violation::EmptyGroup {
                        task: task.id.clone(),
                    });
                }
                for reference in group {
                    if !self.index.contains_key(reference) {
                        out.push(Violation::UnknownReference {
                            task: task.id.clone(),
                            reference: reference.clone(),
                        });
                    }
                }
            }
        }
        match self.task(&self.entry) {
            None => out.push(Violation::MissingEntry(self.entry.clone())),
            Some(t) if !t.is_root() => {
                out.push(Violation::EntryHasPreconditions(self.entry.clone()))
            }
            Some(_) => {}
        }
        if self.task(&self.exit).is_none() {
            out.push(Violation::MissingExit(self.exit.clone()));
        }
        let cyclic = self.cyclic_tasks();
        out.extend(cyclic.iter().map(|id| Violation::Cycle(id.clone())));
        if self.task(&self.entry).is_some()
            && self.task(&self.exit).is_some()
            && !self.exit_reachable()
        {
            out.push(Violation::ExitUnreachable);
        }
        out
    }

    /// Ids of tasks that can reach themselves through predecessor links,
    /// in declaration order.
    fn cyclic_tasks(&self) -> Vec<String> {
        let preds: Vec<Vec<usize>> = self
            .tasks
            .iter()
            .map(|t| {
                let mut p: Vec<usize> = t
                    .pre
                    .iter()
                    .flatten()
                    .filter_map(|r| self.index.get(r).copied())
                    .collect();
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        let mut cyclic = Vec::new();
        for start in 0..self.tasks.len() {
            let mut stack = preds[start].clone();
            let mut visited = vec![false; self.tasks.len()];
            while let Some(node) = stack.pop() {
                if node == start {
                    cyclic.push(self.tasks[start].id.clone());
                    break;
                }
                if std::mem::replace(&mut visited[node], true) {
                    continue;
                }
                stack.extend(preds[node].iter().copied());
            }
        }
        cyclic
    }

    /// Forward fixpoint: a task is achievable once every member of one of its
    /// groups is achievable, starting from the entry alone.
    fn exit_reachable(&self) -> bool {
        let mut done: HashSet<&str> = HashSet::new();
        done.insert(self.entry.as_str());
        loop {
            let mut changed = false;
            for task in &self.tasks {
                if done.contains(task.id.as_str()) || task.is_root() {
                    continue;
                }
                if task
                    .pre
                    .iter()
                    .any(|g| !g.is_empty() && g.iter().all(|r| done.contains(r.as_str())))
                {
                    done.insert(task.id.as_str());
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        done.contains(self.exit.as_str())
    }

    pub fn to_json(&self) -> String {
        let file = ProjectFile {
            entry: self.entry.clone(),
            exit: self.exit.clone(),
            tasks: self.tasks.clone(),
        };
        serde_json::to_string_pretty(&file).expect("project graph serializes")
    }
}

/// Parses and validates a JSON project file.
pub fn parse_project(text: &str) -> Result<ProjectGraph, ProjectError> {
    let file: ProjectFile = serde_json::from_str(text).map_err(|e| ProjectError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let graph = ProjectGraph::from_parts(file.tasks, file.entry, file.exit);
    let violations = graph.validate();
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(ProjectError::Invalid(violations))
    }
}

/// The fire-fighting project: two police units and two fire units, with the
/// police reaching L1 either directly or through L2.
pub fn fire_project() -> ProjectGraph {
    let mut tasks = vec![
        Task::new("Begin", vec![]),
        Task::new("PU1", vec![vec!["Begin"]]),
        Task::new("PU2", vec![vec!["Begin"]]),
        Task::new("PU(L0,L1)", vec![vec!["PU1"], vec!["PU2"]]),
        Task::new("PU(L0,L2)", vec![vec!["PU1"], vec!["PU2"]]),
        Task::new("PU(L2,L1)", vec![vec!["PU(L0,L2)"]]),
        Task::new("police", vec![vec!["PU(L0,L1)"], vec!["PU(L2,L1)"]]),
        Task::new("FU1", vec![vec!["Begin"]]),
        Task::new("FU2", vec![vec!["Begin"]]),
        Task::new("FU(L0,L1)", vec![vec!["FU1"], vec!["FU2"]]),
        Task::new("fireman", vec![vec!["FU(L0,L1)"]]),
        Task::new("extinguish_fire", vec![vec!["police", "fireman"]]),
    ];
    let info = [
        ("Begin", "Start project", None),
        ("PU1", "Police unit 1", Some("Police")),
        ("PU2", "Police unit 2", Some("Police")),
        ("PU(L0,L1)", "PU moves from L0 to L1", Some("Police")),
        ("PU(L0,L2)", "PU moves from L0 to L2", Some("Police")),
        ("PU(L2,L1)", "PU moves from L2 to L1", Some("Police")),
        ("police", "Need a police unit", Some("Police")),
        ("FU1", "Fireman unit 1", Some("Fireman")),
        ("FU2", "Fireman unit 2", Some("Fireman")),
        ("FU(L0,L1)", "FU moves from L0 to L1", Some("Fireman")),
        ("fireman", "Need a fireman unit", Some("Fireman")),
        ("extinguish_fire", "End project", None),
    ];
    for (task, (id, desc, resource)) in tasks.iter_mut().zip(info) {
        debug_assert_eq!(task.id, id);
        task.desc = desc.to_owned();
        task.resource = resource.map(str::to_owned);
    }
    ProjectGraph::from_parts(tasks, "Begin", "extinguish_fire")
}
