//! STRIPS Blocksworld: states, the four actions, plan checking, a
//! breadth-first solver and corpus generation.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AttributeKind, Instance, TrainingSet, Value};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BwError {
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("{action} is not applicable: {precondition} does not hold")]
    Inapplicable { action: String, precondition: String },
    #[error("cannot parse action `{0}`")]
    BadAction(String),
    #[error("cannot parse atom `{0}`")]
    BadAtom(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("search budget of {0} expanded states exhausted")]
    BudgetExhausted(usize),
    #[error("goal is unsatisfiable: {0}")]
    Unsolvable(String),
    #[error("bad problem file: {0}")]
    Problem(String),
    #[error("corpus needs nonempty sizes and per_size >= 1")]
    BadCorpusRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Pos {
    Table,
    Held,
    On(u8),
}

/// A Blocksworld state over a fixed, ordered list of block names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockState {
    blocks: Vec<String>,
    pos: Vec<Pos>,
}

impl BlockState {
    /// Every block on the table, arm empty.
    pub fn all_on_table<S: Into<String>>(blocks: impl IntoIterator<Item = S>) -> Self {
        let blocks: Vec<String> = blocks.into_iter().map(Into::into).collect();
        let pos = vec![Pos::Table; blocks.len()];
        BlockState { blocks, pos }
    }

    /// Builds a state from `on` pairs (x on y) and an optional held block;
    /// every other block is on the table.
    pub fn from_atoms(
        blocks: &[String],
        on: &[(String, String)],
        holding: Option<&str>,
    ) -> Result<Self, BwError> {
        let mut s = BlockState {
            blocks: blocks.to_vec(),
            pos: vec![Pos::Table; blocks.len()],
        };
        if blocks.len() > u8::MAX as usize {
            return Err(BwError::InvalidState("too many blocks".into()));
        }
        for (x, y) in on {
            let (xi, yi) = (s.index(x)?, s.index(y)?);
            if s.pos[xi] != Pos::Table {
                return Err(BwError::InvalidState(format!("{x} placed twice")));
            }
            s.pos[xi] = Pos::On(yi as u8);
        }
        if let Some(h) = holding {
            let hi = s.index(h)?;
            if s.pos[hi] != Pos::Table {
                return Err(BwError::InvalidState(format!("{h} held and placed")));
            }
            s.pos[hi] = Pos::Held;
        }
        s.check()?;
        Ok(s)
    }

    fn index(&self, name: &str) -> Result<usize, BwError> {
        self.blocks
            .iter()
            .position(|b| b == name)
            .ok_or_else(|| BwError::UnknownBlock(name.to_owned()))
    }

    /// One position per block, no block under two others, nothing on a held
    /// block, no cycles.
    pub fn check(&self) -> Result<(), BwError> {
        let n = self.blocks.len();
        let mut names = self.blocks.clone();
        names.sort();
        names.dedup();
        if names.len() != n {
            return Err(BwError::InvalidState("duplicate block name".into()));
        }
        let mut above = vec![0; n];
        let mut held = 0;
        for p in &self.pos {
            match p {
                Pos::On(y) => {
                    let y = *y as usize;
                    if y >= n {
                        return Err(BwError::InvalidState("support out of range".into()));
                    }
                    if self.pos[y] == Pos::Held {
                        return Err(BwError::InvalidState("block on a held block".into()));
                    }
                    above[y] += 1;
                }
                Pos::Held => held += 1,
                Pos::Table => {}
            }
        }
        if held > 1 {
            return Err(BwError::InvalidState("two blocks held".into()));
        }
        if let Some(y) = above.iter().position(|&c| c > 1) {
            return Err(BwError::InvalidState(format!("two blocks on {}", self.blocks[y])));
        }
        for start in 0..n {
            let mut at = start;
            for _ in 0..=n {
                match self.pos[at] {
                    Pos::On(y) => at = y as usize,
                    _ => break,
                }
                if at == start {
                    return Err(BwError::InvalidState("cyclic tower".into()));
                }
            }
        }
        Ok(())
    }

    pub fn blocks(&self) -> &[String] {
        &self.blocks
    }

    /// Block that `x` sits on.
    pub fn on(&self, x: &str) -> Option<&str> {
        match self.pos[self.index(x).ok()?] {
            Pos::On(y) => Some(&self.blocks[y as usize]),
            _ => None,
        }
    }

    pub fn on_table(&self, x: &str) -> bool {
        self.index(x).is_ok_and(|i| self.pos[i] == Pos::Table)
    }

    pub fn clear(&self, x: &str) -> bool {
        self.index(x).is_ok_and(|i| self.is_clear(i))
    }

    fn is_clear(&self, i: usize) -> bool {
        self.pos[i] != Pos::Held && !self.pos.contains(&Pos::On(i as u8))
    }

    pub fn holding(&self) -> Option<&str> {
        self.pos
            .iter()
            .position(|p| *p == Pos::Held)
            .map(|i| self.blocks[i].as_str())
    }

    pub fn arm_empty(&self) -> bool {
        !self.pos.contains(&Pos::Held)
    }

    /// `on` and `on-table` atoms that hold, in block order.
    pub fn atoms(&self) -> Vec<Atom> {
        self.pos
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p {
                Pos::Table => Some(Atom::OnTable(self.blocks[i].clone())),
                Pos::On(y) => Some(Atom::On(self.blocks[i].clone(), self.blocks[*y as usize].clone())),
                Pos::Held => None,
            })
            .collect()
    }

    pub fn satisfies(&self, atom: &Atom) -> bool {
        match atom {
            Atom::On(x, y) => self.on(x) == Some(y.as_str()),
            Atom::OnTable(x) => self.on_table(x),
        }
    }

    pub fn satisfies_all(&self, goal: &[Atom]) -> bool {
        goal.iter().all(|a| self.satisfies(a))
    }
}

/// Goal and state atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    On(String, String),
    OnTable(String),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::On(x, y) => write!(f, "on({x},{y})"),
            Atom::OnTable(x) => write!(f, "on-table({x})"),
        }
    }
}

impl FromStr for Atom {
    type Err = BwError;

    fn from_str(s: &str) -> Result<Self, BwError> {
        let bad = || BwError::BadAtom(s.to_owned());
        let t = s.trim();
        let (head, rest) = t.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(str::trim)
            .collect();
        match (head.trim(), args.as_slice()) {
            ("on", [x, y]) if !x.is_empty() && !y.is_empty() => Ok(Atom::On((*x).into(), (*y).into())),
            ("on-table" | "ontable", [x]) if !x.is_empty() => Ok(Atom::OnTable((*x).into())),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Atom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Declared in lexicographic order of the action names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionName {
    PickUp,
    PutDown,
    Stack,
    Unstack,
}

impl ActionName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionName::PickUp => "pick-up",
            ActionName::PutDown => "put-down",
            ActionName::Stack => "stack",
            ActionName::Unstack => "unstack",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            ActionName::PickUp | ActionName::PutDown => 1,
            ActionName::Stack | ActionName::Unstack => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub name: ActionName,
    pub args: Vec<String>,
}

impl Action {
    pub fn pick_up(x: &str) -> Self {
        Action { name: ActionName::PickUp, args: vec![x.into()] }
    }

    pub fn put_down(x: &str) -> Self {
        Action { name: ActionName::PutDown, args: vec![x.into()] }
    }

    pub fn stack(x: &str, y: &str) -> Self {
        Action { name: ActionName::Stack, args: vec![x.into(), y.into()] }
    }

    pub fn unstack(x: &str, y: &str) -> Self {
        Action { name: ActionName::Unstack, args: vec![x.into(), y.into()] }
    }

    /// The action that undoes this one.
    pub fn inverse(&self) -> Action {
        let name = match self.name {
            ActionName::PickUp => ActionName::PutDown,
            ActionName::PutDown => ActionName::PickUp,
            ActionName::Stack => ActionName::Unstack,
            ActionName::Unstack => ActionName::Stack,
        };
        Action { name, args: self.args.clone() }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name.as_str())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Action {
    type Err = BwError;

    /// Accepts `(stack b a)` or `stack b a`, case-insensitively.
    fn from_str(s: &str) -> Result<Self, BwError> {
        let bad = || BwError::BadAction(s.to_owned());
        let t = s.trim();
        let t = t.strip_prefix('(').map_or(t, |r| r.strip_suffix(')').unwrap_or(r));
        let mut words = t.split_whitespace();
        let name = match words.next().ok_or_else(bad)?.to_ascii_lowercase().as_str() {
            "pick-up" | "pickup" => ActionName::PickUp,
            "put-down" | "putdown" => ActionName::PutDown,
            "stack" => ActionName::Stack,
            "unstack" => ActionName::Unstack,
            _ => return Err(bad()),
        };
        let args: Vec<String> = words.map(str::to_owned).collect();
        if args.len() != name.arity() {
            return Err(bad());
        }
        Ok(Action { name, args })
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn inapplicable(action: &Action, precondition: String) -> BwError {
    BwError::Inapplicable {
        action: action.to_string(),
        precondition,
    }
}

/// Successor state under the classical STRIPS effects.
pub fn apply(state: &BlockState, action: &Action) -> Result<BlockState, BwError> {
    if action.args.len() != action.name.arity() {
        return Err(BwError::BadAction(action.to_string()));
    }
    let x = state.index(&action.args[0])?;
    let xn = &action.args[0];
    let mut next = state.clone();
    match action.name {
        ActionName::PickUp => {
            if state.pos[x] != Pos::Table {
                return Err(inapplicable(action, format!("on-table({xn})")));
            }
            if !state.is_clear(x) {
                return Err(inapplicable(action, format!("clear({xn})")));
            }
            if !state.arm_empty() {
                return Err(inapplicable(action, "arm-empty".into()));
            }
            next.pos[x] = Pos::Held;
        }
        ActionName::PutDown => {
            if state.pos[x] != Pos::Held {
                return Err(inapplicable(action, format!("holding({xn})")));
            }
            next.pos[x] = Pos::Table;
        }
        ActionName::Stack => {
            let y = state.index(&action.args[1])?;
            let yn = &action.args[1];
            if state.pos[x] != Pos::Held {
                return Err(inapplicable(action, format!("holding({xn})")));
            }
            if x == y || !state.is_clear(y) {
                return Err(inapplicable(action, format!("clear({yn})")));
            }
            next.pos[x] = Pos::On(y as u8);
        }
        ActionName::Unstack => {
            let y = state.index(&action.args[1])?;
            let yn = &action.args[1];
            if state.pos[x] != Pos::On(y as u8) {
                return Err(inapplicable(action, format!("on({xn},{yn})")));
            }
            if !state.is_clear(x) {
                return Err(inapplicable(action, format!("clear({xn})")));
            }
            if !state.arm_empty() {
                return Err(inapplicable(action, "arm-empty".into()));
            }
            next.pos[x] = Pos::Held;
        }
    }
    Ok(next)
}

/// Outcome of replaying a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanCheck {
    pub valid: bool,
    /// Why the plan fails, when it does.
    pub failure: Option<String>,
}

pub fn validate_plan(initial: &BlockState, plan: &[Action], goal: &[Atom]) -> PlanCheck {
    let mut state = initial.clone();
    for (i, action) in plan.iter().enumerate() {
        match apply(&state, action) {
            Ok(s) => state = s,
            Err(e) => {
                return PlanCheck {
                    valid: false,
                    failure: Some(format!("step {}: {e}", i + 1)),
                }
            }
        }
    }
    let missing: Vec<String> = goal
        .iter()
        .filter(|a| !state.satisfies(a))
        .map(ToString::to_string)
        .collect();
    if missing.is_empty() {
        PlanCheck { valid: true, failure: None }
    } else {
        PlanCheck {
            valid: false,
            failure: Some(format!("goal atoms not reached: {}", missing.join(", "))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveMetrics {
    /// CPU time of the search in seconds.
    pub cpu_time: f64,
    pub steps: usize,
    pub expanded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub plan: Vec<Action>,
    pub metrics: SolveMetrics,
}

fn check_goal(state: &BlockState, goal: &[Atom]) -> Result<(), BwError> {
    let n = state.blocks.len();
    let mut support: Vec<Option<Pos>> = vec![None; n];
    let mut above = vec![false; n];
    for atom in goal {
        let (x, p) = match atom {
            Atom::On(x, y) => {
                let (xi, yi) = (state.index(x)?, state.index(y)?);
                if xi == yi {
                    return Err(BwError::Unsolvable(format!("{atom}")));
                }
                if std::mem::replace(&mut above[yi], true) && support[xi] != Some(Pos::On(yi as u8)) {
                    return Err(BwError::Unsolvable(format!("two blocks on {y}")));
                }
                (xi, Pos::On(yi as u8))
            }
            Atom::OnTable(x) => (state.index(x)?, Pos::Table),
        };
        match support[x] {
            Some(q) if q != p => return Err(BwError::Unsolvable(format!("{} placed twice", state.blocks[x]))),
            _ => support[x] = Some(p),
        }
    }
    for start in 0..n {
        let mut at = start;
        for _ in 0..=n {
            match support[at] {
                Some(Pos::On(y)) => at = y as usize,
                _ => break,
            }
            if at == start {
                return Err(BwError::Unsolvable("cyclic goal".into()));
            }
        }
    }
    Ok(())
}

#[cfg(unix)]
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: clock_gettime only writes into the provided timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Breadth-first search for a shortest plan. Successors are expanded in
/// lexicographic action order, so the plan returned is the lexicographically
/// smallest among the shortest ones.
///
/// Blocks that start clear on the table and that the goal never mentions are
/// left out of the search: a shortest plan never touches them.
pub fn solve(initial: &BlockState, goal: &[Atom], budget: usize) -> Result<Solved, BwError> {
    #[cfg(unix)]
    let t0 = thread_cpu_seconds();
    #[cfg(not(unix))]
    let t0 = std::time::Instant::now();

    initial.check()?;
    check_goal(initial, goal)?;
    let (plan, expanded) = bfs(initial, goal, budget)?;

    #[cfg(unix)]
    let cpu_time = thread_cpu_seconds() - t0;
    #[cfg(not(unix))]
    let cpu_time = t0.elapsed().as_secs_f64();

    Ok(Solved {
        metrics: SolveMetrics {
            cpu_time,
            steps: plan.len(),
            expanded,
        },
        plan,
    })
}

fn bfs(initial: &BlockState, goal: &[Atom], budget: usize) -> Result<(Vec<Action>, usize), BwError> {
    let mentioned = |i: usize| {
        let name = &initial.blocks[i];
        goal.iter().any(|a| match a {
            Atom::On(x, y) => x == name || y == name,
            Atom::OnTable(x) => x == name,
        })
    };
    // Search over the relevant blocks only, kept in name order.
    let mut keep: Vec<usize> = (0..initial.blocks.len())
        .filter(|&i| !(initial.pos[i] == Pos::Table && initial.is_clear(i) && !mentioned(i)))
        .collect();
    keep.sort_by(|&a, &b| initial.blocks[a].cmp(&initial.blocks[b]));
    let mut remap = vec![u8::MAX; initial.blocks.len()];
    for (k, &i) in keep.iter().enumerate() {
        remap[i] = k as u8;
    }
    let names: Vec<String> = keep.iter().map(|&i| initial.blocks[i].clone()).collect();
    let start: Vec<Pos> = keep
        .iter()
        .map(|&i| match initial.pos[i] {
            Pos::On(y) => Pos::On(remap[y as usize]),
            p => p,
        })
        .collect();
    let goal_idx: Vec<(usize, Pos)> = goal
        .iter()
        .map(|a| match a {
            Atom::On(x, y) => {
                let xi = names.iter().position(|n| n == x).unwrap();
                let yi = names.iter().position(|n| n == y).unwrap();
                (xi, Pos::On(yi as u8))
            }
            Atom::OnTable(x) => (names.iter().position(|n| n == x).unwrap(), Pos::Table),
        })
        .collect();
    let done = |s: &[Pos]| goal_idx.iter().all(|&(x, p)| s[x] == p);

    let mut parent: HashMap<Vec<Pos>, Option<(Vec<Pos>, Action)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let mut expanded = 0;
    let mut found = None;
    while let Some(s) = queue.pop_front() {
        if done(&s) {
            found = Some(s);
            break;
        }
        if expanded >= budget {
            return Err(BwError::BudgetExhausted(budget));
        }
        expanded += 1;
        for (action, next) in successors(&s, &names) {
            if !parent.contains_key(&next) {
                parent.insert(next.clone(), Some((s.clone(), action)));
                queue.push_back(next);
            }
        }
    }
    let Some(mut at) = found else {
        return Err(BwError::Unsolvable("goal unreachable".into()));
    };
    let mut plan = Vec::new();
    while let Some(Some((prev, action))) = parent.get(&at) {
        plan.push(action.clone());
        at = prev.clone();
    }
    plan.reverse();
    Ok((plan, expanded))
}

/// Applicable actions in lexicographic order of (name, arguments).
fn successors(s: &[Pos], names: &[String]) -> Vec<(Action, Vec<Pos>)> {
    let n = s.len();
    let clear = |i: usize| s[i] != Pos::Held && !s.contains(&Pos::On(i as u8));
    let held = s.iter().position(|p| *p == Pos::Held);
    let mut out = Vec::new();
    let with = |i: usize, p: Pos| {
        let mut t = s.to_vec();
        t[i] = p;
        t
    };
    match held {
        None => {
            for x in (0..n).filter(|&x| s[x] == Pos::Table && clear(x)) {
                out.push((Action::pick_up(&names[x]), with(x, Pos::Held)));
            }
            for x in (0..n).filter(|&x| clear(x)) {
                if let Pos::On(y) = s[x] {
                    out.push((Action::unstack(&names[x], &names[y as usize]), with(x, Pos::Held)));
                }
            }
        }
        Some(x) => {
            out.push((Action::put_down(&names[x]), with(x, Pos::Table)));
            for y in (0..n).filter(|&y| y != x && clear(y)) {
                out.push((Action::stack(&names[x], &names[y]), with(x, Pos::On(y as u8))));
            }
        }
    }
    out
}

// ---- problem files ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    /// `[x, y]`: x sits on y. Unlisted blocks are on the table.
    #[serde(default)]
    pub on: Vec<(String, String)>,
    #[serde(default)]
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub blocks: Vec<String>,
    pub initial: InitialSpec,
    pub goal: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub initial: BlockState,
    pub goal: Vec<Atom>,
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self, BwError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| BwError::Problem(e.to_string()))?;
        let initial = BlockState::from_atoms(&file.blocks, &file.initial.on, file.initial.holding.as_deref())?;
        for atom in &file.goal {
            let names: Vec<&String> = match atom {
                Atom::On(x, y) => vec![x, y],
                Atom::OnTable(x) => vec![x],
            };
            for n in names {
                initial.index(n)?;
            }
        }
        Ok(Problem { initial, goal: file.goal })
    }

    pub fn to_json(&self) -> String {
        let on = self
            .initial
            .pos
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p {
                Pos::On(y) => Some((self.initial.blocks[i].clone(), self.initial.blocks[*y as usize].clone())),
                _ => None,
            })
            .collect();
        let file = ProblemFile {
            blocks: self.initial.blocks.clone(),
            initial: InitialSpec {
                on,
                holding: self.initial.holding().map(str::to_owned),
            },
            goal: self.goal.clone(),
        };
        serde_json::to_string_pretty(&file).expect("problem serializes")
    }
}

// ---- corpus ----

/// Blocks that take part in every scenario; larger problems add idle blocks
/// on the table.
pub const ACTIVE_BLOCKS: usize = 4;
/// Distinct scenarios a corpus draws from.
pub const POOL_SIZE: usize = 12;

pub fn block_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < 26 {
                char::from(b'a' + i as u8).to_string()
            } else {
                format!("b{i}")
            }
        })
        .collect()
}

/// The four-block tower problem: all on the table, goal d on c on b on a.
pub fn tower_problem() -> Problem {
    let names = block_names(4);
    Problem {
        initial: BlockState::all_on_table(names),
        goal: vec![
            Atom::On("d".into(), "c".into()),
            Atom::On("c".into(), "b".into()),
            Atom::On("b".into(), "a".into()),
        ],
    }
}

/// Random towers over `names`: returns (x, y) pairs for x on y.
fn random_towers(names: &[String], rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let mut order: Vec<&String> = names.iter().collect();
    order.shuffle(rng);
    let mut on = Vec::new();
    for w in order.windows(2) {
        // Continue the current tower or start a new one.
        if rng.gen_bool(0.5) {
            on.push((w[1].clone(), w[0].clone()));
        }
    }
    on
}

fn draw_scenario(rng: &mut ChaCha8Rng) -> (Vec<(String, String)>, Vec<Atom>) {
    let names = block_names(ACTIVE_BLOCKS);
    loop {
        let initial = random_towers(&names, rng);
        let goal: Vec<Atom> = random_towers(&names, rng)
            .into_iter()
            .map(|(x, y)| Atom::On(x, y))
            .collect();
        let state = BlockState::from_atoms(&names, &initial, None).expect("towers are valid");
        if !goal.is_empty() && !state.satisfies_all(&goal) {
            return (initial, goal);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub problem: Problem,
    pub size: usize,
    pub label: String,
    pub metrics: SolveMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    /// Distinct plans by label, in label order.
    pub plans: Vec<(String, Vec<Action>)>,
}

impl Corpus {
    pub fn plan(&self, label: &str) -> Option<&[Action]> {
        self.plans
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| p.as_slice())
    }

    /// problem (nominal), time (numeric), steps (numeric), class.
    pub fn training_set(&self) -> TrainingSet {
        let instances = self
            .entries
            .iter()
            .map(|e| {
                Instance::new(
                    vec![
                        Value::Nominal(format!("blocks-{}", e.size)),
                        Value::Numeric(e.metrics.cpu_time),
                        Value::Numeric(e.metrics.steps as f64),
                    ],
                    e.label.clone(),
                )
            })
            .collect();
        TrainingSet::from_rows(
            vec![
                ("problem".into(), AttributeKind::Nominal),
                ("time".into(), AttributeKind::Numeric),
                ("steps".into(), AttributeKind::Numeric),
            ],
            instances,
        )
        .expect("corpus rows match schema")
    }
}

/// Draws `per_size` problems for each size from a seeded pool of scenarios
/// over the first four blocks (the tower problem is always in the pool) and
/// solves each one. Identical plans share a label, numbered in first-seen
/// order.
pub fn generate_corpus(sizes: &[usize], per_size: usize, seed: u64) -> Result<Corpus, BwError> {
    if sizes.is_empty() || per_size == 0 || sizes.iter().any(|&n| n < ACTIVE_BLOCKS) {
        return Err(BwError::BadCorpusRequest);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tower = tower_problem();
    let mut pool = vec![(
        Vec::new(),
        tower.goal.clone(),
    )];
    while pool.len() < POOL_SIZE {
        let s = draw_scenario(&mut rng);
        if !pool.contains(&s) {
            pool.push(s);
        }
    }
    // Earlier scenarios are drawn more often.
    let weights: Vec<usize> = (0..POOL_SIZE).map(|i| POOL_SIZE - i).collect();
    let total: usize = weights.iter().sum();

    let mut draws = Vec::with_capacity(sizes.len() * per_size);
    for &size in sizes {
        for _ in 0..per_size {
            let mut r = rng.gen_range(0..total);
            let idx = weights
                .iter()
                .position(|&w| {
                    if r < w {
                        true
                    } else {
                        r -= w;
                        false
                    }
                })
                .expect("r < total");
            let (on, goal) = &pool[idx];
            let initial = BlockState::from_atoms(&block_names(size), on, None)?;
            draws.push((size, Problem { initial, goal: goal.clone() }));
        }
    }

    let solved: Vec<Result<Solved, BwError>> = draws
        .par_iter()
        .map(|(_, p)| solve(&p.initial, &p.goal, DEFAULT_BUDGET))
        .collect();

    let mut plans: Vec<(String, Vec<Action>)> = Vec::new();
    let mut entries = Vec::with_capacity(draws.len());
    for ((size, problem), result) in draws.into_iter().zip(solved) {
        let solved = result?;
        let label = match plans.iter().find(|(_, p)| *p == solved.plan) {
            Some((l, _)) => l.clone(),
            None => {
                let l = format!("P{}", plans.len() + 1);
                plans.push((l.clone(), solved.plan));
                l
            }
        };
        entries.push(CorpusEntry {
            problem,
            size,
            label,
            metrics: solved.metrics,
        });
    }
    Ok(Corpus { entries, plans })
}
