#![allow(dead_code)]

use plancell::dataset::{load_csv, AttributeSpec, Instance, TrainingSet, Value, SAMPLE_CSV};
use plancell::project::ProjectGraph;
use plancell::tree::{InductionGraph, Subtree};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random tree over up to 6 attributes of up to 5 values and up to 8 classes.
pub fn random_tree(rng: &mut ChaCha8Rng) -> InductionGraph {
    let n_attr = rng.gen_range(1..=6);
    let attributes: Vec<AttributeSpec> = (0..n_attr)
        .map(|a| {
            let n = rng.gen_range(2..=5);
            AttributeSpec::nominal(format!("X{}", a + 1), (0..n).map(|v| format!("v{v}")).collect())
        })
        .collect();
    let n_classes = rng.gen_range(1..=8);
    let classes: Vec<String> = (0..n_classes).map(|c| format!("C{c}")).collect();
    let mut used = vec![false; n_attr];
    let root = random_subtree(rng, &attributes, n_classes, &mut used, 0);
    InductionGraph::from_subtree(attributes, classes, root).expect("generated tree is well formed")
}

fn random_counts(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
    let k = rng.gen_range(0..n);
    counts[k] += 1;
    counts
}

fn random_subtree(
    rng: &mut ChaCha8Rng,
    attributes: &[AttributeSpec],
    n_classes: usize,
    used: &mut [bool],
    depth: usize,
) -> Subtree {
    let free: Vec<usize> = (0..attributes.len()).filter(|&a| !used[a]).collect();
    let counts = random_counts(rng, n_classes);
    if free.is_empty() || !rng.gen_bool(0.75 / (1.0 + depth as f64 * 0.35)) {
        return Subtree::Leaf { counts };
    }
    let attribute = *free.choose(rng).unwrap();
    let domain = attributes[attribute].nominal_values().unwrap();
    let mut values: Vec<&String> = domain.iter().filter(|_| rng.gen_bool(0.7)).collect();
    if values.is_empty() {
        values.push(domain.choose(rng).unwrap());
    }
    used[attribute] = true;
    let children = values
        .into_iter()
        .map(|v| (v.clone(), random_subtree(rng, attributes, n_classes, used, depth + 1)))
        .collect();
    used[attribute] = false;
    Subtree::Split {
        attribute,
        counts,
        children,
    }
}

/// One in-domain value per attribute.
pub fn random_case(rng: &mut ChaCha8Rng, tree: &InductionGraph) -> Vec<Value> {
    tree.attributes
        .iter()
        .map(|a| Value::Nominal(a.nominal_values().unwrap().choose(rng).unwrap().clone()))
        .collect()
}

/// The eleven rows with `problem` and `steps` only, steps read as nominal.
pub fn sample_problem_steps() -> TrainingSet {
    let text = SAMPLE_CSV.replace("steps:numeric", "steps:nominal");
    let ts = load_csv(&text).unwrap();
    TrainingSet {
        attributes: vec![ts.attributes[0].clone(), ts.attributes[2].clone()],
        classes: ts.classes,
        instances: ts
            .instances
            .iter()
            .map(|i| Instance::new(vec![i.values[0].clone(), i.values[2].clone()], i.label.clone()))
            .collect(),
    }
}

/// Minimal task sets closed under preconditions, by exhaustive subset scan:
/// a set qualifies when it holds the exit and the entry, every non-entry
/// member has some precondition group inside the set, and no proper subset
/// qualifies.
pub fn minimal_solution_sets(graph: &ProjectGraph) -> Vec<Vec<String>> {
    let tasks = graph.tasks();
    let n = tasks.len();
    assert!(n <= 20, "oracle is exponential");
    let idx = |id: &str| tasks.iter().position(|t| t.id == id).unwrap();
    let entry = idx(graph.entry());
    let exit = idx(graph.exit());
    let groups: Vec<Vec<u32>> = tasks
        .iter()
        .map(|t| {
            t.pre
                .iter()
                .map(|g| g.iter().fold(0u32, |m, r| m | 1 << idx(r)))
                .collect()
        })
        .collect();
    let closed = |s: u32| {
        s & (1 << exit) != 0
            && s & (1 << entry) != 0
            && (0..n).filter(|&t| s & (1 << t) != 0).all(|t| {
                t == entry || groups[t].iter().any(|&g| g != 0 && g & s == g)
            })
    };
    let all: Vec<u32> = (0..1u32 << n).filter(|&s| closed(s)).collect();
    let minimal: Vec<u32> = all
        .iter()
        .copied()
        .filter(|&s| !all.iter().any(|&o| o != s && o & s == o))
        .collect();
    let mut out: Vec<Vec<String>> = minimal
        .into_iter()
        .map(|s| {
            let mut ids: Vec<String> = (0..n)
                .filter(|&t| s & (1 << t) != 0)
                .map(|t| tasks[t].id.clone())
                .collect();
            ids.sort();
            ids
        })
        .collect();
    out.sort();
    out
}

/// Weighted class entropy of splitting at `cut` (left takes values <= cut).
pub fn split_entropy(values: &[f64], labels: &[&str], cut: f64) -> f64 {
    let side = |left: bool| -> (usize, f64) {
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        for (v, l) in values.iter().zip(labels) {
            if (*v <= cut) == left {
                *counts.entry(l).or_default() += 1;
            }
        }
        let n: usize = counts.values().sum();
        let h = counts
            .values()
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.log2()
            })
            .sum::<f64>();
        (n, h)
    };
    let (nl, hl) = side(true);
    let (nr, hr) = side(false);
    (nl as f64 * hl + nr as f64 * hr) / (nl + nr) as f64
}

/// Every midpoint between adjacent distinct values.
pub fn all_midpoints(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
}

/// Class multiset of the instances whose value equals `x`.
pub fn labels_at<'a>(values: &[f64], labels: &[&'a str], x: f64) -> Vec<&'a str> {
    let mut out: Vec<&str> = values
        .iter()
        .zip(labels)
        .filter(|(v, _)| **v == x)
        .map(|(_, l)| *l)
        .collect();
    out.sort();
    out
}

/// Task sets for which some choice of one precondition group per non-entry
/// member stays inside the set and reaches every member backward from the
/// exit. Exhaustive over subsets and choices.
pub fn grounded_solution_sets(graph: &ProjectGraph) -> Vec<Vec<String>> {
    let tasks = graph.tasks();
    let n = tasks.len();
    assert!(n <= 12, "oracle is exponential");
    let idx = |id: &str| tasks.iter().position(|t| t.id == id).unwrap();
    let entry = idx(graph.entry());
    let exit = idx(graph.exit());
    let groups: Vec<Vec<u32>> = tasks
        .iter()
        .map(|t| {
            t.pre
                .iter()
                .map(|g| g.iter().fold(0u32, |m, r| m | 1 << idx(r)))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for s in 0..1u32 << n {
        if s & (1 << exit) == 0 || s & (1 << entry) == 0 {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&t| s & (1 << t) != 0 && t != entry).collect();
        let options: Vec<Vec<u32>> = members
            .iter()
            .map(|&t| groups[t].iter().copied().filter(|&g| g != 0 && g & s == g).collect())
            .collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let mut pick = vec![0usize; members.len()];
        let found = loop {
            let mut reached = 1u32 << exit;
            let mut frontier = vec![exit];
            while let Some(t) = frontier.pop() {
                if let Some(k) = members.iter().position(|&m| m == t) {
                    let g = options[k][pick[k]];
                    for u in 0..n {
                        if g & (1 << u) != 0 && reached & (1 << u) == 0 {
                            reached |= 1 << u;
                            frontier.push(u);
                        }
                    }
                }
            }
            if reached == s {
                break true;
            }
            // Next choice combination.
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < options[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                break false;
            }
        };
        if found {
            let mut ids: Vec<String> = (0..n)
                .filter(|&t| s & (1 << t) != 0)
                .map(|t| tasks[t].id.clone())
                .collect();
            ids.sort();
            out.push(ids);
        }
    }
    out.sort();
    out
}
