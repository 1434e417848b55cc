mod common;

use plancell::blocksworld::{apply, block_names, Action, BlockState};
use plancell::casi::CellularKnowledgeBase;
use plancell::dataset::load_csv;
use plancell::discretize::{bin_index, equal_width_cuts, supervised_cuts};
use plancell::eval::{cross_validate, make_folds, EvalOptions, Method};
use plancell::discretize::DiscretizeMode;
use plancell::knn::KnnModel;
use plancell::plans::enumerate_plans;
use plancell::project::{parse_project, ProjectGraph, Task};
use plancell::tree::Fact;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bit-by-bit transition, written from the layer definitions.
fn scalar_step(kb: &CellularKnowledgeBase, ef: &[bool], er: &[bool]) -> (Vec<bool>, Vec<bool>, Vec<bool>, Vec<bool>) {
    let (l, r) = (kb.facts().len(), kb.rules().len());
    let re = kb.premise_matrix();
    let rs = kb.conclusion_matrix();
    let sf = ef.to_vec();
    let mut er2 = er.to_vec();
    for j in 0..r {
        if (0..l).all(|i| !re.get(i, j) || ef[i]) {
            er2[j] = true;
        }
    }
    let mut ef2 = ef.to_vec();
    for i in 0..l {
        if (0..r).any(|j| rs.get(i, j) && er2[j]) {
            ef2[i] = true;
        }
    }
    let sr = er2.iter().map(|b| !b).collect();
    (ef2, sf, er2, sr)
}

fn bits(v: &plancell::bits::BitVec) -> Vec<bool> {
    (0..v.len()).map(|i| v.get(i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn casi_trace_matches_scalar_loop(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = common::random_tree(&mut rng);
        let kb = CellularKnowledgeBase::compile(&tree);
        let case = common::random_case(&mut rng, &tree);
        let mut initial = vec![Fact::Node(0)];
        for (a, v) in tree.attributes.iter().zip(&case) {
            let f = Fact::Attr { attribute: a.name.clone(), value: v.to_string() };
            if kb.fact_index(&f).is_some() {
                initial.push(f);
            }
        }
        let trace = kb.infer(&initial).unwrap();
        let g0 = trace.initial();
        let (mut ef, mut er) = (bits(&g0.ef), bits(&g0.er));
        for g in &trace.configurations[1..] {
            let (ef2, sf, er2, sr) = scalar_step(&kb, &ef, &er);
            prop_assert_eq!(&bits(&g.ef), &ef2);
            prop_assert_eq!(&bits(&g.sf), &sf);
            prop_assert_eq!(&bits(&g.er), &er2);
            prop_assert_eq!(&bits(&g.sr), &sr);
            prop_assert_eq!(&g.if_, kb.internal());
            ef = ef2;
            er = er2;
        }
        // One more step changes nothing.
        let (ef2, _, er2, _) = scalar_step(&kb, &ef, &er);
        prop_assert_eq!(ef2, ef);
        prop_assert_eq!(er2, er);
        prop_assert!(trace.steps() <= kb.rules().len() + 2);
    }

    #[test]
    fn kb_json_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = CellularKnowledgeBase::compile(&common::random_tree(&mut rng));
        prop_assert_eq!(CellularKnowledgeBase::from_json(&kb.to_json()).unwrap(), kb);
    }

    #[test]
    fn bins_are_monotone(values in prop::collection::vec(-50.0f64..50.0, 2..40), bins in 2usize..12, a in -60.0f64..60.0, b in -60.0f64..60.0) {
        let cuts = equal_width_cuts(&values, bins);
        prop_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bin_index(&cuts, lo) <= bin_index(&cuts, hi));
    }

    #[test]
    fn supervised_cuts_lie_between_values(pairs in prop::collection::vec((0u8..15, 0u8..3), 1..30)) {
        let values: Vec<f64> = pairs.iter().map(|(v, _)| *v as f64).collect();
        let names = ["A", "B", "C"];
        let labels: Vec<&str> = pairs.iter().map(|(_, c)| names[*c as usize]).collect();
        let cuts = supervised_cuts(&values, &labels);
        let mids = common::all_midpoints(&values);
        prop_assert!(cuts.iter().all(|c| mids.contains(c)));
        prop_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn plans_match_subset_oracle(seed in any::<u64>()) {
        let graph = random_project(seed);
        prop_assume!(graph.validate().is_empty());
        let mut found: Vec<Vec<String>> = enumerate_plans(&graph, 10_000)
            .plans
            .iter()
            .map(|p| { let mut s = p.steps.clone(); s.sort(); s })
            .collect();
        found.sort();
        found.dedup();
        prop_assert_eq!(found, common::grounded_solution_sets(&graph));
    }

    #[test]
    fn plans_include_every_minimal_solution(seed in any::<u64>()) {
        let graph = random_project(seed);
        prop_assume!(graph.validate().is_empty());
        let found: Vec<Vec<String>> = enumerate_plans(&graph, 10_000)
            .plans
            .iter()
            .map(|p| { let mut s = p.steps.clone(); s.sort(); s })
            .collect();
        for set in common::minimal_solution_sets(&graph) {
            prop_assert!(found.contains(&set), "missing {:?}", set);
        }
    }

    #[test]
    fn project_json_round_trips(seed in any::<u64>()) {
        let graph = random_project(seed);
        let back = parse_project(&graph.to_json());
        if graph.validate().is_empty() {
            prop_assert_eq!(back.unwrap(), graph);
        } else {
            prop_assert!(back.is_err());
        }
    }

    #[test]
    fn knn_distance_is_a_symmetric_premetric(rows in prop::collection::vec((0u8..3, -5.0f64..5.0), 2..12), i in 0usize..12, j in 0usize..12) {
        let text: String = std::iter::once("n:nominal,x:numeric,class:nominal\n".to_owned())
            .chain(rows.iter().enumerate().map(|(k, (n, x))| format!("v{n},{x},c{k}\n")))
            .collect();
        let ts = load_csv(&text).unwrap();
        let m = KnnModel::fit(&ts, 1).unwrap();
        let (a, b) = (&ts.instances[i % ts.len()].values, &ts.instances[j % ts.len()].values);
        let d = m.distance(a, b);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, m.distance(b, a));
        prop_assert_eq!(d == 0.0, a == b);
    }

    #[test]
    fn knn_1_recalls_distinct_training_rows(xs in prop::collection::btree_set(-1000i32..1000, 2..20)) {
        let text: String = std::iter::once("x:numeric,class:nominal\n".to_owned())
            .chain(xs.iter().enumerate().map(|(k, x)| format!("{x},c{}\n", k % 3)))
            .collect();
        let ts = load_csv(&text).unwrap();
        let m = KnnModel::fit(&ts, 1).unwrap();
        for inst in &ts.instances {
            prop_assert_eq!(m.classify(&inst.values).unwrap(), inst.label.clone());
        }
    }

    #[test]
    fn apply_keeps_invariants_and_inverts(seed in any::<u64>(), n in 1usize..6, moves in prop::collection::vec(any::<u16>(), 1..30)) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = block_names(n);
        let mut state = BlockState::all_on_table(names.clone());
        for m in moves {
            let mut actions = Vec::new();
            for x in &names {
                actions.push(Action::pick_up(x));
                actions.push(Action::put_down(x));
                for y in &names {
                    actions.push(Action::stack(x, y));
                    actions.push(Action::unstack(x, y));
                }
            }
            actions.shuffle(&mut rng);
            let Some((action, next)) = actions
                .iter()
                .cycle()
                .skip(m as usize % actions.len())
                .take(actions.len())
                .find_map(|a| apply(&state, a).ok().map(|s| (a.clone(), s)))
            else {
                break;
            };
            prop_assert!(next.check().is_ok());
            prop_assert_eq!(next.arm_empty(), next.holding().is_none());
            for x in &names {
                let placed = [next.on(x).is_some(), next.on_table(x), next.holding() == Some(x.as_str())];
                prop_assert_eq!(placed.iter().filter(|b| **b).count(), 1);
            }
            prop_assert_eq!(apply(&next, &action.inverse()).unwrap(), state.clone());
            state = next;
        }
    }

    #[test]
    fn every_instance_is_tested_once(rows in prop::collection::vec((0u8..4, 0u8..3), 10..40), seed in any::<u64>()) {
        let text: String = std::iter::once("x:nominal,class:nominal\n".to_owned())
            .chain(rows.iter().map(|(x, c)| format!("a{x},k{c}\n")))
            .collect();
        let ts = load_csv(&text).unwrap();
        let plan = make_folds(&ts, 10, seed).unwrap();
        prop_assert_eq!(plan.fold_sizes().iter().sum::<usize>(), ts.len());
        let opts = EvalOptions { seed, ..EvalOptions::default() };
        let a = cross_validate(&ts, Method::J48, DiscretizeMode::Supervised, &opts).unwrap();
        prop_assert_eq!(a.total(), ts.len());
        let b = cross_validate(&ts, Method::J48, DiscretizeMode::Supervised, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}

/// Random acyclic project: tasks point only at earlier tasks.
fn random_project(seed: u64) -> ProjectGraph {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let ids: Vec<String> = (0..n).map(|i| format!("T{i}")).collect();
    let mut tasks = vec![Task::new(ids[0].clone(), vec![])];
    for i in 1..n {
        let groups = rng.gen_range(1..=3);
        let pre: Vec<Vec<&str>> = (0..groups)
            .map(|_| {
                let size = rng.gen_range(1..=2.min(i));
                let mut g: Vec<&str> = (0..size).map(|_| ids[rng.gen_range(0..i)].as_str()).collect();
                g.sort();
                g.dedup();
                g
            })
            .collect();
        tasks.push(Task::new(ids[i].clone(), pre));
    }
    ProjectGraph::from_parts(tasks, ids[0].clone(), ids[n - 1].clone())
}

