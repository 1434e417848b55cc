//! `plancell`: plan enumeration, corpus generation, discretization, tree
//! training, cellular classification and cross-validation from the shell.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use plancell::blocksworld::{self, generate_corpus, solve, BwError, Problem};
use plancell::casi::{CasiError, CellularKnowledgeBase};
use plancell::dataset::{load_cases_csv, load_csv, AttributeKind, Instance, TrainingSet};
use plancell::discretize::{self, DiscretizeMode, DEFAULT_BINS};
use plancell::eval::{self, Engine, EvalError, EvalOptions, Method};
use plancell::knn::KnnModel;
use plancell::plans::{enumerate_plans, first_plan, DEFAULT_MAX_PLANS};
use plancell::project::parse_project;
use plancell::tree::{self, InductionGraph, TrainConfig, TreeError, TreeMethod};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MODEL: u8 = 4;
const EXIT_LIMIT: u8 = 5;

/// Error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, error: anyhow!(msg.into()) }
    }
}

trait Classify<T> {
    fn or_fail(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_fail(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

type Outcome = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "plancell", version, about = "Plan selection by induction graphs and Boolean cellular inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the solution plans of a project file as JSON lines.
    Plans {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_PLANS, value_parser = positive)]
        max_plans: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop at the first solution found by the backward search.
        #[arg(long)]
        first: bool,
    },
    /// Generate a Blocksworld training set.
    BwGen {
        /// Block counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "4,5,6,7")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        per_size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the distinct plans as JSON lines.
        #[arg(long)]
        plans: Option<PathBuf>,
    },
    /// Solve one Blocksworld problem file.
    BwSolve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = blocksworld::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Print attribute specs and class distribution of a dataset.
    DatasetInfo { file: PathBuf },
    /// Bin numeric attributes and write the binned dataset and cut map.
    Discretize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_BINS, value_parser = positive)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Train an induction graph.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::J48)]
        mode: MethodArg,
        #[arg(long, default_value_t = 2, value_parser = positive)]
        min_leaf: usize,
        #[arg(long, value_enum, default_value_t = DiscretizeArg::Supervised)]
        discretize: DiscretizeArg,
        #[arg(long, default_value_t = DEFAULT_BINS, value_parser = positive)]
        bins: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the compiled cellular knowledge base.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Print the tree to standard output.
        #[arg(long)]
        show: bool,
    },
    /// Classify cases with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        /// Classify by cellular inference instead of walking the tree.
        #[arg(long)]
        casi: bool,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Answer the majority class of the deepest node reached when a value
        /// was never seen in training.
        #[arg(long)]
        fallback_majority: bool,
    },
    /// Print the cellular layers and incidence matrices of a model.
    CasiDump {
        #[arg(long)]
        model: PathBuf,
        /// Print the knowledge-base JSON instead of the tables.
        #[arg(long)]
        json: bool,
    },
    /// k-nearest-neighbour classification or cross-validation.
    Knn {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = positive)]
        k: usize,
        /// `cvN` for N-fold cross-validation.
        #[arg(long)]
        eval: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Discretize before measuring distances.
        #[arg(long, value_enum, default_value_t = DiscretizeArg::None)]
        discretize: DiscretizeArg,
        #[arg(long, default_value_t = DEFAULT_BINS, value_parser = positive)]
        bins: usize,
        /// Cases to classify against the whole training set.
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate a grid of methods and discretization modes.
    Eval(EvalArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "j48,reptree,knn")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "supervised,unsupervised")]
    modes: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = eval::DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = positive)]
    bins: usize,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    min_leaf: usize,
    /// Fit one discretization map on the whole dataset.
    #[arg(long)]
    global_discretize: bool,
    #[arg(long, value_enum, default_value_t = EngineArg::Tree)]
    engine: EngineArg,
    /// Add the majority-class baseline row.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Supervised,
    Unsupervised,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DiscretizeArg {
    Supervised,
    Unsupervised,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    J48,
    Reptree,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Tree,
    Casi,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn mode_of(arg: DiscretizeArg, bins: usize) -> Option<DiscretizeMode> {
    match arg {
        DiscretizeArg::Supervised => Some(DiscretizeMode::Supervised),
        DiscretizeArg::Unsupervised => Some(DiscretizeMode::Unsupervised { bins }),
        DiscretizeArg::None => None,
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .or_fail(EXIT_DATA)
}

fn read_dataset(path: &Path) -> Result<TrainingSet, Failure> {
    load_csv(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .or_fail(EXIT_DATA)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, content: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let write = || -> anyhow::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(content.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path)?;
        Ok(())
    };
    write()
        .with_context(|| format!("cannot write {}", path.display()))
        .or_fail(1)
}

/// Writes to `path`, or to standard output without one.
fn emit(path: Option<&Path>, content: &str) -> Outcome {
    match path {
        Some(p) => write_atomic(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn tree_code(e: &TreeError) -> u8 {
    match e {
        TreeError::Malformed(_) => EXIT_MODEL,
        _ => EXIT_DATA,
    }
}

fn eval_code(e: &EvalError) -> u8 {
    match e {
        EvalError::TooFewFolds(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn cmd_plans(project: &Path, max_plans: usize, out: Option<&Path>, first: bool) -> Outcome {
    let graph = parse_project(&read(project)?)
        .with_context(|| format!("{}", project.display()))
        .or_fail(EXIT_DATA)?;
    let (plans, truncated) = if first {
        (first_plan(&graph).into_iter().collect(), false)
    } else {
        let set = enumerate_plans(&graph, max_plans);
        (set.plans, set.truncated)
    };
    let mut text = String::new();
    for p in &plans {
        let _ = writeln!(text, "{}", serde_json::to_string(p).expect("plan serializes"));
    }
    emit(out, &text)?;
    if plans.is_empty() {
        eprintln!("no plan reaches the exit task");
    }
    if truncated {
        return Err(Failure {
            code: EXIT_LIMIT,
            error: anyhow!("more than {max_plans} plans exist; output holds the first {max_plans}"),
        });
    }
    Ok(())
}

fn cmd_bw_gen(sizes: &[usize], per_size: usize, seed: u64, out: Option<&Path>, plans: Option<&Path>) -> Outcome {
    let corpus = generate_corpus(sizes, per_size, seed).map_err(|e| match e {
        BwError::BadCorpusRequest => Failure::usage(format!("{e} (and every size >= {})", blocksworld::ACTIVE_BLOCKS)),
        BwError::BudgetExhausted(_) => Failure { code: EXIT_LIMIT, error: e.into() },
        _ => Failure { code: EXIT_DATA, error: e.into() },
    })?;
    emit(out, &corpus.training_set().to_csv())?;
    if let Some(path) = plans {
        let mut text = String::new();
        for (label, steps) in &corpus.plans {
            let line = serde_json::json!({ "id": label, "steps": steps });
            let _ = writeln!(text, "{line}");
        }
        write_atomic(path, &text)?;
    }
    eprintln!("{} instances, {} distinct plans", corpus.entries.len(), corpus.plans.len());
    Ok(())
}

fn cmd_bw_solve(problem: &Path, budget: usize) -> Outcome {
    let p = Problem::from_json(&read(problem)?).or_fail(EXIT_DATA)?;
    let solved = solve(&p.initial, &p.goal, budget).map_err(|e| match e {
        BwError::BudgetExhausted(_) => Failure { code: EXIT_LIMIT, error: e.into() },
        _ => Failure { code: EXIT_DATA, error: e.into() },
    })?;
    for a in &solved.plan {
        println!("{a}");
    }
    eprintln!(
        "steps {} expanded {} cpu {:.6}s",
        solved.metrics.steps, solved.metrics.expanded, solved.metrics.cpu_time
    );
    Ok(())
}

fn cmd_discretize(input: &Path, mode: ModeArg, bins: usize, out: Option<&Path>, map_out: Option<&Path>) -> Outcome {
    let ts = read_dataset(input)?;
    let mode = match mode {
        ModeArg::Supervised => DiscretizeMode::Supervised,
        ModeArg::Unsupervised => DiscretizeMode::Unsupervised { bins },
    };
    let map = mode.fit(&ts);
    let binned = discretize::apply_map(&map, &ts).or_fail(EXIT_DATA)?;
    emit(out, &binned.to_csv())?;
    if let Some(path) = map_out {
        write_atomic(path, &serde_json::to_string_pretty(&map).expect("map serializes"))?;
    }
    for a in &map.attributes {
        eprintln!("{}: {} cuts", a.attribute, a.cuts.len());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    input: &Path,
    method: MethodArg,
    min_leaf: usize,
    disc: DiscretizeArg,
    bins: usize,
    seed: u64,
    out: &Path,
    kb: Option<&Path>,
    show: bool,
) -> Outcome {
    let ts = read_dataset(input)?;
    let config = TrainConfig {
        method: match method {
            MethodArg::J48 => TreeMethod::J48,
            MethodArg::Reptree => TreeMethod::RepTree,
        },
        min_leaf,
        discretize: mode_of(disc, bins),
        seed,
    };
    let model = tree::train(&ts, &config).map_err(|e| Failure { code: tree_code(&e), error: e.into() })?;
    write_atomic(out, &model.to_json())?;
    if let Some(path) = kb {
        write_atomic(path, &CellularKnowledgeBase::compile(&model).to_json())?;
    }
    if show {
        print!("{}", model.render());
    }
    eprintln!(
        "{} nodes, {} leaves, depth {}",
        model.node_count(),
        model.leaf_count(),
        model.depth()
    );
    Ok(())
}

fn read_model(path: &Path) -> Result<InductionGraph, Failure> {
    InductionGraph::from_json(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .or_fail(EXIT_MODEL)
}

/// Reorders case columns to the model's attribute order.
fn align_cases(
    model_attrs: &[String],
    cols: &[(String, AttributeKind)],
    cases: &[Instance],
) -> Result<Vec<Instance>, Failure> {
    let positions: Vec<usize> = model_attrs
        .iter()
        .map(|name| {
            cols.iter()
                .position(|(c, _)| c == name)
                .ok_or_else(|| Failure { code: EXIT_DATA, error: anyhow!("cases lack attribute `{name}`") })
        })
        .collect::<Result<_, _>>()?;
    Ok(cases
        .iter()
        .map(|c| Instance::new(positions.iter().map(|&p| c.values[p].clone()).collect(), c.label.clone()))
        .collect())
}

struct Prediction {
    class: Option<String>,
    status: String,
}

fn predictions_csv(rows: &[Instance], preds: &[Prediction], labeled: bool) -> String {
    let mut out = String::from(if labeled { "row,predicted,actual,status\n" } else { "row,predicted,status\n" });
    for (i, (inst, p)) in rows.iter().zip(preds).enumerate() {
        let class = p.class.as_deref().unwrap_or("");
        if labeled {
            let _ = writeln!(out, "{},{class},{},{}", i + 1, inst.label, p.status);
        } else {
            let _ = writeln!(out, "{},{class},{}", i + 1, p.status);
        }
    }
    out
}

fn report_accuracy(rows: &[Instance], preds: &[Prediction]) {
    let correct = rows
        .iter()
        .zip(preds)
        .filter(|(r, p)| p.class.as_deref() == Some(r.label.as_str()))
        .count();
    eprintln!(
        "{correct}/{} correct ({:.2}%)",
        rows.len(),
        100.0 * correct as f64 / rows.len() as f64
    );
}

fn cmd_classify(model: &Path, casi: bool, input: &Path, out: Option<&Path>, fallback: bool) -> Outcome {
    let model = read_model(model)?;
    let (cols, cases, labeled) = load_cases_csv(&read(input)?).or_fail(EXIT_DATA)?;
    let names: Vec<String> = model.attributes.iter().map(|a| a.name.clone()).collect();
    let rows = align_cases(&names, &cols, &cases)?;
    let kb = casi.then(|| CellularKnowledgeBase::compile(&model));
    let mut preds = Vec::with_capacity(rows.len());
    for row in &rows {
        let result = match &kb {
            Some(kb) => kb.classify_raw(row, fallback).map(|c| c.class).map_err(|e| match e {
                CasiError::UnknownValue => "unknown-value".to_owned(),
                CasiError::Integrity(_) => "integrity".to_owned(),
                other => other.to_string(),
            }),
            None => model.classify_raw(row, fallback).map(|c| c.class).map_err(|e| match e {
                TreeError::UnknownValue { .. } => "unknown-value".to_owned(),
                other => other.to_string(),
            }),
        };
        preds.push(match result {
            Ok(class) => Prediction { class: Some(class), status: "ok".into() },
            Err(status) => Prediction { class: None, status },
        });
    }
    emit(out, &predictions_csv(&rows, &preds, labeled))?;
    if labeled {
        report_accuracy(&rows, &preds);
    }
    Ok(())
}

fn cmd_casi_dump(model: &Path, json: bool) -> Outcome {
    let model = read_model(model)?;
    let kb = CellularKnowledgeBase::compile(&model);
    if json {
        println!("{}", kb.to_json());
    } else {
        let g0 = kb.initial_configuration(&[]).expect("no initial facts");
        print!("{}", kb.render(&g0));
    }
    Ok(())
}

fn parse_folds(spec: &str) -> Result<usize, Failure> {
    spec.strip_prefix("cv")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Failure::usage(format!("--eval expects cvN, got `{spec}`")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_knn(
    input: &Path,
    k: usize,
    eval_spec: Option<&str>,
    seed: u64,
    disc: DiscretizeArg,
    bins: usize,
    cases: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let ts = read_dataset(input)?;
    let mode = mode_of(disc, bins);
    match (eval_spec, cases) {
        (Some(spec), None) => {
            let opts = EvalOptions { folds: parse_folds(spec)?, seed, ..EvalOptions::default() };
            let result = eval::cross_validate(&ts, Method::Knn { k }, mode, &opts)
                .map_err(|e| Failure { code: eval_code(&e), error: e.into() })?;
            let report = eval::EvalReport { results: vec![result] };
            print!("{}", report.to_text());
            if let Some(p) = out {
                write_atomic(p, &report.to_csv())?;
            }
            Ok(())
        }
        (None, Some(cases)) => {
            let map = mode.map(|m| m.fit(&ts)).unwrap_or_default();
            let train = discretize::apply_map(&map, &ts).or_fail(EXIT_DATA)?;
            let model = KnnModel::fit(&train, k).or_fail(EXIT_USAGE)?;
            let (cols, raw, labeled) = load_cases_csv(&read(cases)?).or_fail(EXIT_DATA)?;
            let names: Vec<String> = ts.attributes.iter().map(|a| a.name.clone()).collect();
            let rows = align_cases(&names, &cols, &raw)?;
            let mut preds = Vec::with_capacity(rows.len());
            for row in &rows {
                let binned = discretize::apply_to_instance(&map, &ts.attributes, row).or_fail(EXIT_DATA)?;
                let class = model.classify(&binned.values).or_fail(EXIT_DATA)?;
                preds.push(Prediction { class: Some(class), status: "ok".into() });
            }
            emit(out, &predictions_csv(&rows, &preds, labeled))?;
            if labeled {
                report_accuracy(&rows, &preds);
            }
            Ok(())
        }
        _ => Err(Failure::usage("knn needs exactly one of --eval cvN or --cases FILE")),
    }
}

fn cmd_eval(args: &EvalArgs) -> Outcome {
    let ts = read_dataset(&args.input)?;
    let mut methods = Vec::new();
    for m in &args.methods {
        match Method::parse(m.trim()) {
            Some(Method::Knn { .. }) => methods.push(Method::Knn { k: args.k }),
            Some(method) => methods.push(method),
            None => return Err(Failure::usage(format!("unknown method `{m}` (j48, reptree, knn, majority)"))),
        }
    }
    if args.baseline && !methods.contains(&Method::Majority) {
        methods.push(Method::Majority);
    }
    let modes = args
        .modes
        .iter()
        .map(|m| {
            eval::parse_mode(m.trim(), args.bins)
                .ok_or_else(|| Failure::usage(format!("unknown mode `{m}` (supervised, unsupervised, raw)")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let opts = EvalOptions {
        folds: args.folds,
        seed: args.seed,
        min_leaf: args.min_leaf,
        global_discretize: args.global_discretize,
        engine: match args.engine {
            EngineArg::Tree => Engine::Tree,
            EngineArg::Casi => Engine::Casi,
        },
        parallel: true,
    };
    let report = eval::run_grid(&ts, &methods, &modes, &opts)
        .map_err(|e| Failure { code: eval_code(&e), error: e.into() })?;
    print!("{}", report.to_text());
    if let Some(p) = &args.out {
        write_atomic(p, &report.to_csv())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Plans { project, max_plans, out, first } => cmd_plans(&project, max_plans, out.as_deref(), first),
        Command::BwGen { sizes, per_size, seed, out, plans } => {
            cmd_bw_gen(&sizes, per_size, seed, out.as_deref(), plans.as_deref())
        }
        Command::BwSolve { problem, budget } => cmd_bw_solve(&problem, budget),
        Command::DatasetInfo { file } => {
            print!("{}", read_dataset(&file)?.describe());
            Ok(())
        }
        Command::Discretize { input, mode, bins, out, map } => {
            cmd_discretize(&input, mode, bins, out.as_deref(), map.as_deref())
        }
        Command::Train { input, mode, min_leaf, discretize, bins, seed, out, kb, show } => {
            cmd_train(&input, mode, min_leaf, discretize, bins, seed, &out, kb.as_deref(), show)
        }
        Command::Classify { model, casi, input, out, fallback_majority } => {
            cmd_classify(&model, casi, &input, out.as_deref(), fallback_majority)
        }
        Command::CasiDump { model, json } => cmd_casi_dump(&model, json),
        Command::Knn { input, k, eval, seed, discretize, bins, cases, out } => cmd_knn(
            &input,
            k,
            eval.as_deref(),
            seed,
            discretize,
            bins,
            cases.as_deref(),
            out.as_deref(),
        ),
        Command::Eval(args) => cmd_eval(&args),
    }
}

/// Error chain joined by `: `, skipping causes the outer message already shows.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}
