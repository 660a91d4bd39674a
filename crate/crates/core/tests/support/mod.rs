//! Generators and independent oracles shared by the property tests and the
//! acceptance run.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nnasp_core::dataset::{feature_name, Dataset, Instance};
use nnasp_core::extraction::{extract, Extraction, ExtractionConfig};
use nnasp_core::network::{train, Activation, LayerSpec, Mlp, Optimizer, TrainConfig};
use nnasp_core::program::{AnswerSet, Atom, HiddenAtom, OutputAtom, Real};
use nnasp_core::tree::{CmpOp, TreeParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_activation(rng: &mut impl Rng, smooth_only: bool) -> Activation {
    let pool: &[Activation] = if smooth_only {
        &[Activation::Tanh, Activation::Sigmoid, Activation::Identity]
    } else {
        &Activation::ALL
    };
    *pool.choose(rng).unwrap()
}

/// Small model with random shape, activations and weights in (-2, 2).
pub fn random_model(rng: &mut impl Rng, smooth_only: bool) -> Mlp {
    let input_dim = rng.gen_range(1..=4);
    let hidden = rng.gen_range(1..=3);
    let mut widths: Vec<usize> = (0..hidden).map(|_| rng.gen_range(1..=5)).collect();
    widths.push(rng.gen_range(1..=3));
    let mut prev = input_dim;
    let layers = widths
        .iter()
        .map(|&w| {
            let weights = (0..w)
                .map(|_| (0..prev).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let biases = (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prev = w;
            LayerSpec::new(weights, biases, random_activation(rng, smooth_only)).unwrap()
        })
        .collect();
    Mlp::new(input_dim, layers).unwrap()
}

/// Forward pass written as plain nested loops over `weight(node, input)`.
pub fn scalar_forward(model: &Mlp, x: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut prev = x.to_vec();
    for layer in model.layers() {
        let mut a = Vec::new();
        for i in 0..layer.width() {
            let mut z = layer.biases()[i];
            for (j, &p) in prev.iter().enumerate() {
                z += layer.weight(i, j) * p;
            }
            let v = match layer.activation() {
                Activation::Tanh => z.tanh(),
                Activation::Relu => {
                    if z > 0.0 {
                        z
                    } else {
                        0.0
                    }
                }
                Activation::Elu => {
                    if z > 0.0 {
                        z
                    } else {
                        z.exp() - 1.0
                    }
                }
                Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                Activation::Identity => z,
            };
            a.push(v);
        }
        out.push(a.clone());
        prev = a;
    }
    out
}

fn half_loss(model: &Mlp, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            let out = scalar_forward(model, x).pop().unwrap();
            0.5 * out.iter().zip(y).map(|(o, t)| (t - o).powi(2)).sum::<f64>()
        })
        .sum()
}

fn pre_activations(model: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut zs = Vec::new();
    let mut prev = x.to_vec();
    for layer in model.layers() {
        let mut a = Vec::new();
        for i in 0..layer.width() {
            let z = layer.biases()[i]
                + prev.iter().enumerate().map(|(j, p)| layer.weight(i, j) * p).sum::<f64>();
            zs.push(z);
            a.push(layer.activation().apply(z));
        }
        prev = a;
    }
    zs
}

/// Largest relative disagreement between analytic and central-difference
/// gradients over every parameter, or `None` when some pre-activation sits
/// within `1e-3` of a relu/elu kink.
pub fn gradient_check(model: &Mlp, xs: &[Vec<f64>], ys: &[Vec<f64>], step: f64) -> Option<f64> {
    let kinked = model.layers().iter().any(|l| matches!(l.activation(), Activation::Relu | Activation::Elu));
    if kinked && xs.iter().any(|x| pre_activations(model, x).iter().any(|z| z.abs() <= 1e-3)) {
        return None;
    }
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (_, grads) = model.loss_and_gradient(&refs, ys).unwrap();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / scale);
    };
    for l in 0..model.layers().len() {
        for p in 0..model.layers()[l].weights().len() {
            let mut plus = model.clone();
            plus.layers_mut()[l].weights_mut()[p] += step;
            let mut minus = model.clone();
            minus.layers_mut()[l].weights_mut()[p] -= step;
            let numeric = (half_loss(&plus, xs, ys) - half_loss(&minus, xs, ys)) / (2.0 * step);
            compare(grads.weights[l][p], numeric);
        }
        for p in 0..model.layers()[l].biases().len() {
            let mut plus = model.clone();
            plus.layers_mut()[l].biases_mut()[p] += step;
            let mut minus = model.clone();
            minus.layers_mut()[l].biases_mut()[p] -= step;
            let numeric = (half_loss(&plus, xs, ys) - half_loss(&minus, xs, ys)) / (2.0 * step);
            compare(grads.biases[l][p], numeric);
        }
    }
    Some(worst)
}

fn entropy_nats(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Exhaustive root split search: every (attribute, observed value) pair
/// leaving at least `min_leaf` rows on each side, filtered by the mean-gain
/// guard, maximizing gain ratio; ties go to the earlier attribute, then the
/// smaller threshold. Entropies use natural logarithms; the ratio does not
/// depend on the base.
pub fn brute_force_split(
    rows: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    min_leaf: usize,
) -> Option<(usize, f64)> {
    if labels.iter().collect::<std::collections::BTreeSet<_>>().len() <= 1 {
        return None;
    }
    let width = rows[0].len();
    let mut scored: Vec<(usize, f64, f64, f64)> = Vec::new();
    for a in 0..width {
        let mut values: Vec<f64> = rows.iter().map(|r| r[a]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &v in &values {
            let mut left = vec![0; classes];
            let mut right = vec![0; classes];
            for (r, &y) in rows.iter().zip(labels) {
                if r[a] <= v {
                    left[y] += 1;
                } else {
                    right[y] += 1;
                }
            }
            let (nl, nr): (usize, usize) = (left.iter().sum(), right.iter().sum());
            if nl < min_leaf.max(1) || nr < min_leaf.max(1) {
                continue;
            }
            let n = (nl + nr) as f64;
            let parent: Vec<usize> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
            let gain = entropy_nats(&parent) - nl as f64 / n * entropy_nats(&left) - nr as f64 / n * entropy_nats(&right);
            let split = entropy_nats(&[nl, nr]);
            let ratio = if split > 0.0 { gain / split } else { 0.0 };
            scored.push((a, v, gain, ratio));
        }
    }
    if scored.is_empty() {
        return None;
    }
    let mean = scored.iter().map(|s| s.2).sum::<f64>() / scored.len() as f64;
    let eps = 1e-9;
    let mut best: Option<(usize, f64, f64)> = None;
    for &(a, v, gain, ratio) in &scored {
        if gain < mean - eps {
            continue;
        }
        if best.is_none_or(|(_, _, r)| ratio > r + eps) {
            best = Some((a, v, ratio));
        }
    }
    best.map(|(a, v, _)| (a, v))
}

/// Most appropriate class written directly from the ordering: class `l`
/// beats `l'` with more output atoms, or as many and a strictly higher
/// confidence; remaining ties go to the smaller class id.
pub fn ordering_oracle(answer: &AnswerSet, fallback: usize) -> (usize, bool) {
    let outputs: Vec<&OutputAtom> = answer.outputs().collect();
    if outputs.is_empty() {
        return (fallback, true);
    }
    let classes: Vec<usize> = {
        let mut c: Vec<usize> = outputs.iter().map(|o| o.class).collect();
        c.sort();
        c.dedup();
        c
    };
    let count = |l: usize| outputs.iter().filter(|o| o.class == l).count();
    let conf = |l: usize| {
        outputs
            .iter()
            .filter(|o| o.class == l)
            .map(|o| o.confidence.0)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let beats = |l: usize, m: usize| count(l) > count(m) || (count(l) == count(m) && conf(l) > conf(m));
    let maximal: Vec<usize> = classes
        .iter()
        .copied()
        .filter(|&l| !classes.iter().any(|&m| m != l && beats(m, l)))
        .collect();
    (maximal[0], false)
}

/// Answer set with a handful of output and hidden atoms.
pub fn random_answer_set(rng: &mut impl Rng) -> AnswerSet {
    let mut atoms = Vec::new();
    for _ in 0..rng.gen_range(0..8) {
        let conf = [0.25, 0.5, 0.75, 1.0][rng.gen_range(0..4)];
        atoms.push(Atom::Output(OutputAtom {
            class: rng.gen_range(0..3),
            rule_index: rng.gen_range(0..6),
            confidence: Real(conf),
        }));
    }
    for _ in 0..rng.gen_range(0..3) {
        atoms.push(Atom::Hidden(HiddenAtom::new(1, rng.gen_range(0..3), CmpOp::Leq, rng.gen_range(-5..5))));
    }
    atoms.into_iter().collect()
}

/// Small dataset whose label depends on the first feature, with label noise.
pub fn random_dataset(rng: &mut impl Rng, n: usize, d: usize) -> Dataset {
    let instances = (0..n)
        .map(|_| {
            let f: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let label = usize::from((f[0] > 0.5) ^ rng.gen_bool(0.2));
            Instance::new(f, label)
        })
        .collect();
    Dataset::new((0..d).map(feature_name).collect(), "y", 2, instances).unwrap()
}

/// Extraction from a small random network, briefly trained on a random
/// dataset. Returns the extraction and the dataset.
pub fn random_extraction(rng: &mut impl Rng) -> (Extraction, Dataset) {
    let d = rng.gen_range(1..=3);
    let n = rng.gen_range(8..=30);
    let ds = random_dataset(rng, n, d);
    let hidden = rng.gen_range(1..=3);
    let mut arch: Vec<(usize, Activation)> = (0..hidden)
        .map(|_| (rng.gen_range(1..=4), random_activation(rng, false)))
        .collect();
    arch.push((1, Activation::Sigmoid));
    let model = Mlp::init(&arch, d, rng.gen()).unwrap();
    let config = TrainConfig {
        epochs: rng.gen_range(0..=20),
        batch_size: rng.gen_range(1..=n.min(8)),
        learning_rate: 0.1,
        seed: rng.gen(),
        optimizer: Optimizer::Sgd,
    };
    let model = train(&model, &ds, &config).unwrap().model;
    let extraction_config = ExtractionConfig {
        tree: TreeParams {
            min_leaf: rng.gen_range(1..=3),
            max_depth: rng.gen_range(1..=6),
        },
        scale_digits: 6,
    };
    (extract(&model, &ds, &extraction_config).unwrap(), ds)
}

/// Distinct hidden head atoms against registered conditions.
pub fn size_bound_holds(ex: &Extraction) -> bool {
    ex.stats.distinct_hidden_heads <= ex.stats.total_registered()
        && ex
            .stats
            .registered_per_level
            .iter()
            .zip(&ex.stats.tree_conditions_per_level)
            .all(|(r, t)| r <= t)
}

/// Per-class counts and best confidences, for readable failure messages.
pub fn describe(answer: &AnswerSet) -> BTreeMap<usize, (usize, f64)> {
    let mut m: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for o in answer.outputs() {
        let e = m.entry(o.class).or_insert((0, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.max(o.confidence.0);
    }
    m
}
