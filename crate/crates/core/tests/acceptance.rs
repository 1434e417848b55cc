//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use plancell::blocksworld::{generate_corpus, solve, tower_problem, validate_plan, Action, DEFAULT_BUDGET};
use plancell::casi::{CasiError, CellularKnowledgeBase};
use plancell::dataset::sample;
use plancell::discretize::{apply_map, discretize_supervised, equal_width_cuts, supervised_cuts};
use plancell::eval::{
    cross_validate, make_folds, run_grid, EvalOptions, Method,
};
use plancell::discretize::DiscretizeMode;
use plancell::plans::enumerate_plans;
use plancell::project::fire_project;
use plancell::tree::{entropy, grow, information_gain, GrowParams, NodeKind, SplitCriterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

fn casi_tree_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (trees, per_tree) = (250, 50);
    let mut cases = 0;
    for t in 0..trees {
        let tree = common::random_tree(&mut rng);
        let kb = CellularKnowledgeBase::compile(&tree);
        for _ in 0..per_tree {
            let case = common::random_case(&mut rng, &tree);
            cases += 1;
            match (tree.classify(&case, false), kb.classify(&case, false)) {
                (Ok(a), Ok(b)) => {
                    ensure(a.class == b.class, || format!("tree {t}: class {} vs {}", a.class, b.class))?;
                    ensure(a.path == b.nodes, || format!("tree {t}: path {:?} vs nodes {:?}", a.path, b.nodes))?;
                }
                (Err(_), Err(CasiError::UnknownValue)) => {}
                (a, b) => return Err(format!("tree {t}: tree {a:?} vs casi {b:?}")),
            }
            let a = tree.classify(&case, true).map_err(|e| e.to_string())?;
            let b = kb.classify(&case, true).map_err(|e| e.to_string())?;
            ensure(a.class == b.class, || format!("tree {t}: fallback {} vs {}", a.class, b.class))?;
        }
    }
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!("{trees} trees x {per_tree} cases = {cases} agree, {t:.2?}"))
}

fn entropy_root_split() -> Check {
    let ts = common::sample_problem_steps();
    let h = entropy(&[3, 2, 2, 2, 2]).unwrap();
    ensure((h - 2.2999).abs() < 1e-4, || format!("entropy {h}"))?;
    let g_problem = information_gain(&ts, 0);
    let g_steps = information_gain(&ts, 1);
    ensure((g_steps - 1.4949).abs() < 1e-3, || format!("gain(steps) {g_steps}"))?;
    ensure((g_problem - 1.0031).abs() < 1e-3, || format!("gain(problem) {g_problem}"))?;
    ensure(g_steps > g_problem, || "steps does not beat problem".into())?;
    let tree = grow(&ts, GrowParams { criterion: SplitCriterion::InfoGain, min_leaf: 1 }).unwrap();
    let NodeKind::Split { attribute, children } = &tree.root().kind else {
        return Err("root is a leaf".into());
    };
    ensure(tree.attributes[*attribute].name == "steps", || "root does not split on steps".into())?;
    ensure(children.len() == 3, || format!("{} branches", children.len()))?;
    let (_, twelve) = children.iter().find(|(v, _)| v == "12").ok_or("no steps=12 branch")?;
    let leaf = &tree.nodes[*twelve];
    let p3 = tree.classes.iter().position(|c| c == "P3").unwrap();
    ensure(
        leaf.is_leaf() && leaf.counts.iter().sum::<usize>() == leaf.counts[p3],
        || "steps=12 is not a pure P3 leaf".into(),
    )?;
    Ok(format!("H={h:.4} gain(steps)={g_steps:.4} gain(problem)={g_problem:.4}, root=steps, s{twelve}=P3"))
}

fn training_accuracy() -> Check {
    let raw = sample();
    let map = discretize_supervised(&raw);
    let nominal = apply_map(&map, &raw).map_err(|e| e.to_string())?;
    let mut tree = grow(&nominal, GrowParams { criterion: SplitCriterion::InfoGain, min_leaf: 1 })
        .map_err(|e| e.to_string())?;
    tree.discretization = map;
    let mut correct = 0;
    for inst in &raw.instances {
        let out = tree
            .classify_raw(&plancell::dataset::Instance::new(inst.values.clone(), ""), false)
            .map_err(|e| e.to_string())?;
        if out.class == inst.label {
            correct += 1;
        }
    }
    ensure(correct == raw.len(), || format!("{correct}/{} correct", raw.len()))?;
    Ok(format!("{correct}/{} training instances", raw.len()))
}

fn fire_plans() -> Check {
    let start = Instant::now();
    let graph = fire_project();
    let set = enumerate_plans(&graph, 10_000);
    let t = within(Duration::from_secs(1), start)?;
    ensure(set.plans.len() == 8 && !set.truncated, || format!("{} plans", set.plans.len()))?;
    let enumerated: BTreeSet<Vec<String>> = set
        .plans
        .iter()
        .map(|p| {
            let mut s = p.steps.clone();
            s.sort();
            s
        })
        .collect();
    let oracle: BTreeSet<Vec<String>> = common::minimal_solution_sets(&graph).into_iter().collect();
    ensure(enumerated == oracle, || format!("enumerated {enumerated:?} vs oracle {oracle:?}"))?;
    Ok(format!("8 plans over {} tasks, equal to subset oracle, {t:.2?}", graph.len()))
}

fn blocksworld_validity() -> Check {
    let tower = tower_problem();
    let p1: Vec<Action> = ["pick-up b", "stack b a", "pick-up c", "stack c b", "pick-up d", "stack d c"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let check = validate_plan(&tower.initial, &p1, &tower.goal);
    ensure(check.valid, || format!("P1 invalid: {:?}", check.failure))?;
    let solved = solve(&tower.initial, &tower.goal, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    ensure(solved.metrics.steps == 6, || format!("solver found {} steps", solved.metrics.steps))?;

    let corpus = generate_corpus(&[4, 5, 6, 7], 60, 7).map_err(|e| e.to_string())?;
    let mut valid = 0;
    for e in &corpus.entries {
        let plan = corpus.plan(&e.label).ok_or("missing plan")?;
        if validate_plan(&e.problem.initial, plan, &e.problem.goal).valid && plan.len() == e.metrics.steps {
            valid += 1;
        }
    }
    ensure(corpus.entries.len() >= 200, || "corpus too small".into())?;
    ensure(valid == corpus.entries.len(), || format!("{valid}/{} valid", corpus.entries.len()))?;
    Ok(format!("P1 valid, 6 steps; {valid}/{} corpus plans valid", corpus.entries.len()))
}

fn discretization_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 500;
    for trial in 0..trials {
        let n = rng.gen_range(2..=30);
        let n_classes = rng.gen_range(1..=3);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0..12) as f64).collect();
        let names = ["A", "B", "C"];
        let labels: Vec<&str> = (0..n).map(|_| names[rng.gen_range(0..n_classes)]).collect();
        let cuts = supervised_cuts(&values, &labels);
        let mids = common::all_midpoints(&values);
        for &c in &cuts {
            let lo = values.iter().copied().filter(|&v| v < c).fold(f64::NEG_INFINITY, f64::max);
            let hi = values.iter().copied().filter(|&v| v > c).fold(f64::INFINITY, f64::min);
            ensure(mids.contains(&c), || format!("trial {trial}: cut {c} is not a midpoint"))?;
            ensure(
                common::labels_at(&values, &labels, lo) != common::labels_at(&values, &labels, hi),
                || format!("trial {trial}: cut {c} separates identical class groups"),
            )?;
        }
        if !cuts.is_empty() {
            let best = mids
                .iter()
                .map(|&m| common::split_entropy(&values, &labels, m))
                .fold(f64::INFINITY, f64::min);
            ensure(
                cuts.iter().any(|&c| (common::split_entropy(&values, &labels, c) - best).abs() < 1e-12),
                || format!("trial {trial}: no cut reaches the brute-force minimum {best}"),
            )?;
        }
    }
    let simple = supervised_cuts(&[1.0, 2.0, 9.0, 10.0], &["A", "A", "B", "B"]);
    ensure(simple == [5.5], || format!("[1,2,9,10] cuts {simple:?}"))?;
    let ts = sample();
    let times: Vec<f64> = ts.numeric_column(1).iter().map(|(x, _)| *x).collect();
    let cuts = equal_width_cuts(&times, 10);
    ensure(cuts.len() == 9, || format!("{} cuts", cuts.len()))?;
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mut prev = min;
    for c in &cuts {
        ensure(((c - prev) - 0.0750434).abs() < 1e-6, || format!("step {}", c - prev))?;
        prev = *c;
    }
    Ok(format!("{trials} random sets agree with midpoint oracle; [1,2,9,10] -> 5.5; 9 cuts step 0.0750434"))
}

fn cross_validation_integrity() -> Check {
    let opts = EvalOptions::default();
    let ts = sample();
    let dummy = cross_validate(&ts, Method::Majority, DiscretizeMode::Supervised, &opts)
        .map_err(|e| e.to_string())?;
    ensure((dummy.rate() - 27.27).abs() < 0.01, || format!("dummy {:.4}", dummy.rate()))?;

    let corpus = generate_corpus(&[4, 5, 6, 7], 30, 3).map_err(|e| e.to_string())?.training_set();
    for data in [&ts, &corpus] {
        let plan = make_folds(data, 10, opts.seed).map_err(|e| e.to_string())?;
        let mut tested = vec![0; data.len()];
        for f in 0..plan.folds {
            for r in plan.test_rows(f) {
                tested[r] += 1;
            }
        }
        ensure(tested.iter().all(|&c| c == 1), || "an instance is not tested exactly once".into())?;
        let r = cross_validate(data, Method::J48, DiscretizeMode::Supervised, &opts).map_err(|e| e.to_string())?;
        ensure(r.total() == data.len(), || format!("{} outcomes for {} instances", r.total(), data.len()))?;
    }
    let methods = [Method::J48, Method::RepTree, Method::Knn { k: 1 }, Method::Majority];
    let modes = plancell::eval::default_modes();
    let a = run_grid(&corpus, &methods, &modes, &opts).map_err(|e| e.to_string())?;
    let b = run_grid(&corpus, &methods, &modes, &opts).map_err(|e| e.to_string())?;
    ensure(a == b && a.to_csv() == b.to_csv(), || "reports differ under one seed".into())?;
    Ok(format!("each instance tested once; dummy {:.2}%; reports reproducible", dummy.rate()))
}

fn blocksworld_grid() -> Check {
    let start = Instant::now();
    let corpus = generate_corpus(&[4, 5, 6, 7], 60, 2024).map_err(|e| e.to_string())?;
    let ts = corpus.training_set();
    let opts = EvalOptions::default();
    let methods = [Method::J48, Method::RepTree, Method::Knn { k: 1 }, Method::Majority];
    let modes = plancell::eval::default_modes();
    let report = run_grid(&ts, &methods, &modes, &opts).map_err(|e| e.to_string())?;
    let t = within(Duration::from_secs(30), start)?;
    let mut summary = Vec::new();
    for mode in ["supervised", "unsupervised"] {
        let base = report.get("majority", mode).unwrap().rate();
        for m in ["j48", "reptree"] {
            let r = report.get(m, mode).unwrap().rate();
            ensure(r >= base, || format!("{m}/{mode} {r:.2} below majority {base:.2}"))?;
        }
        summary.push(format!(
            "{mode}: j48 {:.2} reptree {:.2} knn {:.2} majority {base:.2}",
            report.get("j48", mode).unwrap().rate(),
            report.get("reptree", mode).unwrap().rate(),
            report.get("knn", mode).unwrap().rate(),
        ));
    }
    Ok(format!("{} instances, {} plans; {}; {t:.2?}", ts.len(), ts.classes.len(), summary.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("AC1 CASI-tree oracle equivalence", casi_tree_equivalence),
        ("AC2 entropy and root split", entropy_root_split),
        ("AC3 training-accuracy identity", training_accuracy),
        ("AC4 fire-project plan count", fire_plans),
        ("AC5 Blocksworld plan validity", blocksworld_validity),
        ("AC6 discretization properties", discretization_properties),
        ("AC7 cross-validation integrity", cross_validation_integrity),
        ("AC8 Blocksworld method grid", blocksworld_grid),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
