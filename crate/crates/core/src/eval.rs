//! Stratified k-fold cross-validation.
//!
//! Folds are dealt per class: each class's instances are shuffled, then dealt
//! round-robin, the fold pointer carrying over from one class to the next.
//! Within a fold the discretization map and the classifier are fitted on the
//! training part only, unless global discretization is requested.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::casi::CellularKnowledgeBase;
use crate::dataset::TrainingSet;
use crate::discretize::{self, DiscretizationMap, DiscretizeMode, DEFAULT_BINS};
use crate::knn::{KnnError, KnnModel, DEFAULT_K};
use crate::tree::{self, TrainConfig, TreeError, TreeMethod};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("{instances} instances cannot fill {folds} folds")]
    TooFewInstances { instances: usize, folds: usize },
    #[error("fold {fold}: {source}")]
    Tree { fold: usize, source: TreeError },
    #[error("fold {fold}: {source}")]
    Knn { fold: usize, source: KnnError },
    #[error("fold {fold}: {source}")]
    Discretize {
        fold: usize,
        source: discretize::DiscretizeError,
    },
}

/// Fold id per instance index, dealt from a seeded RNG.
pub fn stratified_assignment(ts: &TrainingSet, folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ts.classes.len()];
    for (i, inst) in ts.instances.iter().enumerate() {
        let k = ts.class_index(&inst.label).expect("label in class list");
        by_class[k].push(i);
    }
    let mut fold = vec![0; ts.len()];
    let mut next = 0;
    for mut members in by_class {
        members.shuffle(rng);
        for i in members {
            fold[i] = next;
            next = (next + 1) % folds;
        }
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignment: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn make_folds(ts: &TrainingSet, folds: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if folds < 2 {
        return Err(EvalError::TooFewFolds(folds));
    }
    if ts.len() < folds {
        return Err(EvalError::TooFewInstances {
            instances: ts.len(),
            folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(FoldPlan {
        assignment: stratified_assignment(ts, folds, &mut rng),
        folds,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    J48,
    RepTree,
    Knn { k: usize },
    /// Predicts the training part's majority class (lowest label on ties).
    Majority,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::J48 => "j48",
            Method::RepTree => "reptree",
            Method::Knn { .. } => "knn",
            Method::Majority => "majority",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "j48" => Some(Method::J48),
            "reptree" => Some(Method::RepTree),
            "knn" => Some(Method::Knn { k: DEFAULT_K }),
            "majority" => Some(Method::Majority),
            _ => None,
        }
    }
}

/// `supervised`, `unsupervised` or `raw` (no discretization).
pub fn parse_mode(s: &str, bins: usize) -> Option<Option<DiscretizeMode>> {
    match s {
        "supervised" => Some(Some(DiscretizeMode::Supervised)),
        "unsupervised" => Some(Some(DiscretizeMode::Unsupervised { bins })),
        "raw" => Some(None),
        _ => None,
    }
}

/// How tree models classify held-out instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Tree,
    Casi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub folds: usize,
    pub seed: u64,
    pub min_leaf: usize,
    /// Fit one discretization map on the whole set instead of per fold.
    pub global_discretize: bool,
    pub engine: Engine,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            folds: DEFAULT_FOLDS,
            seed: 1,
            min_leaf: 2,
            global_discretize: false,
            engine: Engine::Tree,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub correct: usize,
    pub incorrect: usize,
    /// Held-out instances the model could not classify.
    pub errors: usize,
    /// (actual, predicted) per held-out instance, in row order.
    pub predictions: Vec<(usize, Option<String>)>,
}

impl FoldOutcome {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect + self.errors
    }

    pub fn rate(&self) -> f64 {
        rate(self.correct, self.total())
    }
}

fn rate(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// One method under one discretization mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    /// `None` when attributes are used as given.
    pub mode: Option<DiscretizeMode>,
    pub folds: Vec<FoldOutcome>,
    /// Counts indexed `[actual][predicted]` over the class list; unclassified
    /// instances are in the last column.
    pub confusion: Vec<Vec<usize>>,
}

impl MethodResult {
    pub fn correct(&self) -> usize {
        self.folds.iter().map(|f| f.correct).sum()
    }

    pub fn incorrect(&self) -> usize {
        self.folds.iter().map(|f| f.incorrect).sum()
    }

    pub fn errors(&self) -> usize {
        self.folds.iter().map(|f| f.errors).sum()
    }

    pub fn total(&self) -> usize {
        self.folds.iter().map(FoldOutcome::total).sum()
    }

    /// Success rate in percent.
    pub fn rate(&self) -> f64 {
        rate(self.correct(), self.total())
    }

    pub fn fold_rates(&self) -> Vec<f64> {
        self.folds.iter().map(FoldOutcome::rate).collect()
    }
}

/// Observes each discretization fit: fold id (`None` for a global fit) and
/// the row indices it was given.
pub type FitObserver<'a> = &'a (dyn Fn(Option<usize>, &[usize]) + Sync);

fn no_observer(_: Option<usize>, _: &[usize]) {}

pub fn cross_validate(
    ts: &TrainingSet,
    method: Method,
    mode: impl Into<Option<DiscretizeMode>>,
    opts: &EvalOptions,
) -> Result<MethodResult, EvalError> {
    let plan = make_folds(ts, opts.folds, opts.seed)?;
    cross_validate_on(ts, &plan, method, mode.into(), opts, &no_observer)
}

/// Runs one method over a given fold plan.
pub fn cross_validate_on(
    ts: &TrainingSet,
    plan: &FoldPlan,
    method: Method,
    mode: Option<DiscretizeMode>,
    opts: &EvalOptions,
    observer: FitObserver<'_>,
) -> Result<MethodResult, EvalError> {
    let global = match mode {
        Some(m) if opts.global_discretize => {
            let all: Vec<usize> = (0..ts.len()).collect();
            observer(None, &all);
            Some(m.fit(ts))
        }
        _ => None,
    };
    let run = |fold: usize| run_fold(ts, plan, fold, method, mode, global.as_ref(), opts, observer);
    let folds: Vec<FoldOutcome> = if opts.parallel {
        (0..plan.folds)
            .into_par_iter()
            .map(run)
            .collect::<Result<_, _>>()?
    } else {
        (0..plan.folds).map(run).collect::<Result<_, _>>()?
    };

    let n = ts.classes.len();
    let mut confusion = vec![vec![0; n + 1]; n];
    for f in &folds {
        for (actual, predicted) in &f.predictions {
            let col = predicted
                .as_deref()
                .and_then(|p| ts.class_index(p))
                .unwrap_or(n);
            confusion[*actual][col] += 1;
        }
    }
    Ok(MethodResult {
        method,
        mode,
        folds,
        confusion,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    ts: &TrainingSet,
    plan: &FoldPlan,
    fold: usize,
    method: Method,
    mode: Option<DiscretizeMode>,
    global: Option<&DiscretizationMap>,
    opts: &EvalOptions,
    observer: FitObserver<'_>,
) -> Result<FoldOutcome, EvalError> {
    let train_rows = plan.train_rows(fold);
    let test_rows = plan.test_rows(fold);
    let raw_train = ts.subset(&train_rows);
    let raw_test = ts.subset(&test_rows);

    let fitted;
    let map = match (global, mode) {
        (Some(m), _) => Some(m),
        (None, Some(mode)) => {
            observer(Some(fold), &train_rows);
            fitted = mode.fit(&raw_train);
            Some(&fitted)
        }
        (None, None) => None,
    };
    let disc = |source| EvalError::Discretize { fold, source };
    let (train, test) = match map {
        Some(map) => (
            discretize::apply_map(map, &raw_train).map_err(disc)?,
            discretize::apply_map(map, &raw_test).map_err(disc)?,
        ),
        None => (raw_train, raw_test),
    };

    let predictions: Vec<Option<String>> = match method {
        Method::J48 | Method::RepTree => {
            let config = TrainConfig {
                method: if method == Method::J48 {
                    TreeMethod::J48
                } else {
                    TreeMethod::RepTree
                },
                min_leaf: opts.min_leaf,
                discretize: None,
                seed: opts.seed,
            };
            let model = tree::train(&train, &config).map_err(|source| EvalError::Tree { fold, source })?;
            match opts.engine {
                Engine::Tree => test
                    .instances
                    .iter()
                    .map(|i| model.classify(&i.values, false).ok().map(|c| c.class))
                    .collect(),
                Engine::Casi => {
                    let kb = CellularKnowledgeBase::compile(&model);
                    test.instances
                        .iter()
                        .map(|i| kb.classify(&i.values, false).ok().map(|c| c.class))
                        .collect()
                }
            }
        }
        Method::Knn { k } => {
            let model = KnnModel::fit(&train, k.min(train.len()))
                .map_err(|source| EvalError::Knn { fold, source })?;
            test.instances
                .iter()
                .map(|i| model.classify(&i.values).ok())
                .collect()
        }
        Method::Majority => {
            let counts = train.class_distribution();
            // BTreeMap iterates labels in order, so the first maximum is the
            // lowest label.
            let best = counts
                .iter()
                .fold(None::<(&String, usize)>, |acc, (c, &n)| match acc {
                    Some((_, m)) if m >= n => acc,
                    _ => Some((c, n)),
                })
                .map(|(c, _)| c.clone());
            vec![best; test.len()]
        }
    };

    let mut outcome = FoldOutcome {
        fold,
        correct: 0,
        incorrect: 0,
        errors: 0,
        predictions: Vec::with_capacity(test.len()),
    };
    for (inst, predicted) in test.instances.iter().zip(predictions) {
        match &predicted {
            Some(p) if *p == inst.label => outcome.correct += 1,
            Some(_) => outcome.incorrect += 1,
            None => outcome.errors += 1,
        }
        let actual = ts.class_index(&inst.label).expect("label in class list");
        outcome.predictions.push((actual, predicted));
    }
    Ok(outcome)
}

/// Results of a method × mode grid, in run order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub results: Vec<MethodResult>,
}

impl EvalReport {
    fn rows(&self) -> (Vec<&'static str>, Vec<&'static str>, BTreeMap<(&'static str, &'static str), f64>) {
        let mut methods = Vec::new();
        let mut modes = Vec::new();
        let mut cells = BTreeMap::new();
        for r in &self.results {
            let m = r.method.name();
            let d = mode_name(&r.mode);
            if !methods.contains(&m) {
                methods.push(m);
            }
            if !modes.contains(&d) {
                modes.push(d);
            }
            cells.insert((m, d), r.rate());
        }
        (methods, modes, cells)
    }

    pub fn get(&self, method: &str, mode: &str) -> Option<&MethodResult> {
        self.results
            .iter()
            .find(|r| r.method.name() == method && mode_name(&r.mode) == mode)
    }

    /// Methods as rows, modes as columns, rates with two decimals.
    pub fn to_text(&self) -> String {
        let (methods, modes, cells) = self.rows();
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "method");
        for d in &modes {
            let _ = write!(out, " {d:>13}");
        }
        out.push('\n');
        for m in &methods {
            let _ = write!(out, "{m:<10}");
            for d in &modes {
                match cells.get(&(*m, *d)) {
                    Some(r) => {
                        let _ = write!(out, " {:>13}", format!("{r:.2}"));
                    }
                    None => {
                        let _ = write!(out, " {:>13}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let (methods, modes, cells) = self.rows();
        let mut out = String::from("method");
        for d in &modes {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for m in &methods {
            out.push_str(m);
            for d in &modes {
                out.push(',');
                if let Some(r) = cells.get(&(*m, *d)) {
                    let _ = write!(out, "{r:.2}");
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn mode_name(mode: &Option<DiscretizeMode>) -> &'static str {
    mode.as_ref().map_or("raw", DiscretizeMode::name)
}

/// Every method under every mode, all on the same folds.
pub fn run_grid(
    ts: &TrainingSet,
    methods: &[Method],
    modes: &[Option<DiscretizeMode>],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let plan = make_folds(ts, opts.folds, opts.seed)?;
    let mut results = Vec::with_capacity(methods.len() * modes.len());
    for &method in methods {
        for &mode in modes {
            results.push(cross_validate_on(ts, &plan, method, mode, opts, &no_observer)?);
        }
    }
    Ok(EvalReport { results })
}

pub fn default_modes() -> Vec<Option<DiscretizeMode>> {
    vec![
        Some(DiscretizeMode::Supervised),
        Some(DiscretizeMode::Unsupervised { bins: DEFAULT_BINS }),
    ]
}
