//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's scoring or selection code.

#![allow(dead_code)]

use std::collections::HashMap;

/// All bitstrings of length `l`, as bit vectors.
pub fn all_strings(l: usize) -> Vec<Vec<bool>> {
    (0..1u32 << l)
        .map(|x| (0..l).map(|i| x >> i & 1 == 1).collect())
        .collect()
}

pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Probability of drawing `y` when each bit of `base` flips independently
/// with probability `rates[i]`.
pub fn flip_prob(base: &[bool], y: &[bool], rates: &[f64]) -> f64 {
    base.iter()
        .zip(y)
        .zip(rates)
        .map(|((b, y), p)| if b == y { 1.0 - p } else { *p })
        .product()
}

/// Distribution of the Hamming score `1 - d/L` of one unconditioned draw,
/// as (score, probability) pairs sorted by score, by full enumeration.
pub fn score_distribution(target: &[bool], prior: &[bool], tau: f64) -> Vec<(f64, f64)> {
    let l = target.len();
    let mut mass = vec![0.0; l + 1];
    for y in all_strings(l) {
        let p = flip_prob(prior, &y, &vec![tau; l]);
        mass[l - hamming(&y, target)] += p;
    }
    mass.iter()
        .enumerate()
        .map(|(matches, p)| (matches as f64 / l as f64, *p))
        .collect()
}

/// E[max of n i.i.d. draws] from a discrete distribution sorted by value.
pub fn expected_max(dist: &[(f64, f64)], n: u32) -> f64 {
    let mut below = 0.0;
    let mut e = 0.0;
    for &(v, p) in dist {
        let upto = below + p;
        e += v * (upto.powi(n as i32) - below.powi(n as i32));
        below = upto;
    }
    e
}

/// Majority vote by counting: the most frequent key among the first `k`,
/// ties to the key seen first; returns that key's first candidate's flag.
pub fn majority_correct(task: &[(u8, bool)], k: usize) -> bool {
    let mut counts: HashMap<u8, usize> = HashMap::new();
    let mut order = Vec::new();
    for (key, _) in &task[..k] {
        let c = counts.entry(*key).or_insert(0);
        if *c == 0 {
            order.push(*key);
        }
        *c += 1;
    }
    let max = counts.values().copied().max().unwrap();
    let winner = order.into_iter().find(|key| counts[key] == max).unwrap();
    task[..k].iter().find(|(key, _)| *key == winner).unwrap().1
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
