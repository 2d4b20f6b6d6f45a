use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::explain::game::{full_coalition, Coalition, ValueFunction, MAX_PLAYERS};

/// Player limit for exact enumeration (2^F evaluations).
pub const EXACT_MAX_PLAYERS: usize = 20;
pub const DEFAULT_COALITIONS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Exact,
    Kernel { n_coalitions: usize, seed: u64 },
}

/// Shapley values of one game together with its endpoint values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// Value of the empty coalition.
    pub base_value: f64,
    /// Value of the full coalition.
    pub prediction: f64,
    pub phi: Vec<f64>,
    pub estimator: Estimator,
    /// Distinct coalitions evaluated, endpoints included.
    pub evaluations: usize,
}

/// Binomial coefficient as f64 (exact while it stays below 2^53).
pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// Exact Shapley values by enumerating all `2^F` coalitions.
pub fn exact_shapley<G: ValueFunction>(game: &G) -> Result<ShapleyValues> {
    let n = game.n_players();
    if n > EXACT_MAX_PLAYERS {
        return Err(Error::TooManyFeatures(n, EXACT_MAX_PLAYERS));
    }
    let all: Vec<Coalition> = (0..1u64 << n).collect();
    let v = game.values(&all)?;
    // |S|!(F-|S|-1)!/F! = 1 / (F * C(F-1, |S|)).
    let w: Vec<f64> = (0..n).map(|s| 1.0 / (n as f64 * binom(n - 1, s))).collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        for s in 0..1u64 << n {
            if s & bit == 0 {
                acc += w[s.count_ones() as usize] * (v[(s | bit) as usize] - v[s as usize]);
            }
        }
        *p = acc;
    }
    Ok(ShapleyValues {
        base_value: v[0],
        prediction: v[full_coalition(n) as usize],
        phi,
        estimator: Estimator::Exact,
        evaluations: all.len(),
    })
}

/// Coalitions and regression weights chosen by the kernel estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionSample {
    pub coalitions: Vec<Coalition>,
    pub weights: Vec<f64>,
    /// Subset sizes (and their complements) enumerated completely.
    pub complete_sizes: usize,
}

/// Unnormalized Shapley kernel weight of one coalition of size `s`.
pub fn shapley_kernel(n: usize, s: usize) -> f64 {
    (n - 1) as f64 / (binom(n, s) * s as f64 * (n - s) as f64)
}

fn push_size(n: usize, s: usize, weight: f64, with_complement: bool, out: &mut CoalitionSample) {
    let full = full_coalition(n);
    // Gosper's hack walks every mask with `s` bits set in increasing order.
    let mut c: u64 = (1u64 << s) - 1;
    while c <= full {
        out.coalitions.push(c);
        out.weights.push(weight);
        if with_complement {
            out.coalitions.push(full ^ c);
            out.weights.push(weight);
        }
        let lowest = c & c.wrapping_neg();
        let ripple = c + lowest;
        c = (((ripple ^ c) >> 2) / lowest) | ripple;
    }
}

/// Picks interior coalitions for a budget of `budget` evaluations: subset
/// sizes whose kernel mass warrants it are enumerated completely (smallest
/// and largest sizes first), the rest is sampled by kernel mass with
/// complements paired and repeats merged into weights.
pub fn sample_coalitions(n: usize, budget: usize, seed: u64) -> CoalitionSample {
    let mut out = CoalitionSample { coalitions: Vec::new(), weights: Vec::new(), complete_sizes: 0 };
    if n < 2 {
        return out;
    }
    let total_interior = if n >= 63 { f64::INFINITY } else { ((1u64 << n) - 2) as f64 };
    if budget as f64 >= total_interior {
        for s in 1..n {
            push_size(n, s, shapley_kernel(n, s), false, &mut out);
        }
        out.complete_sizes = n / 2;
        return out;
    }
    let n_sizes = n / 2; // ceil((n - 1) / 2)
    let n_paired = (n - 1) / 2;
    let mut mass: Vec<f64> = (1..=n_sizes)
        .map(|s| {
            let m = (n - 1) as f64 / (s * (n - s)) as f64;
            if s <= n_paired {
                2.0 * m
            } else {
                m
            }
        })
        .collect();
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    let mut remaining = mass.clone();
    let mut left = budget as f64;
    let mut complete = 0;
    for s in 1..=n_sizes {
        let paired = s <= n_paired;
        let count = binom(n, s) * if paired { 2.0 } else { 1.0 };
        let share = remaining[s - 1];
        if left * share / count < 1.0 - 1e-8 {
            break;
        }
        complete += 1;
        left -= count;
        if share < 1.0 {
            let rest = 1.0 - share;
            remaining.iter_mut().for_each(|r| *r /= rest);
        }
        let mut w = mass[s - 1] / binom(n, s);
        if paired {
            w /= 2.0;
        }
        push_size(n, s, w, paired, &mut out);
    }
    out.complete_sizes = complete;
    let rest_mass: f64 = mass[complete..].iter().sum();
    let mut left = left.max(0.0) as usize;
    if complete < n_sizes && left > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = (complete + 1..=n_sizes).collect();
        let dist = WeightedIndex::new(&mass[complete..]).expect("positive kernel mass");
        let mut slot: HashMap<Coalition, usize> = HashMap::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut sampled: Vec<Coalition> = Vec::new();
        let mut attempts = 0usize;
        let max_attempts = 20 * budget + 1000;
        while left > 0 && attempts < max_attempts {
            attempts += 1;
            let s = sizes[dist.sample(&mut rng)];
            let mut c: Coalition = 0;
            for i in index::sample(&mut rng, n, s) {
                c |= 1 << i;
            }
            let paired = s <= n_paired;
            let members: &[Coalition] = if paired { &[c, full_coalition(n) ^ c] } else { &[c] };
            for &m in members {
                match slot.get(&m) {
                    Some(&k) => counts[k] += 1.0,
                    None if left > 0 => {
                        slot.insert(m, sampled.len());
                        sampled.push(m);
                        counts.push(1.0);
                        left -= 1;
                    }
                    None => {}
                }
            }
            // Keeps the generator state independent of map iteration order.
            let _ = rng.random::<u8>();
        }
        let total: f64 = counts.iter().sum();
        for (c, k) in sampled.into_iter().zip(counts) {
            out.coalitions.push(c);
            out.weights.push(rest_mass * k / total);
        }
    }
    out
}

/// Kernel SHAP: weighted least squares over sampled coalitions with the
/// efficiency constraint `sum(phi) = v(N) - v(empty)` imposed exactly.
pub fn kernel_shap<G: ValueFunction>(game: &G, n_coalitions: usize, seed: u64) -> Result<ShapleyValues> {
    let n = game.n_players();
    if n > MAX_PLAYERS {
        return Err(Error::TooManyFeatures(n, MAX_PLAYERS));
    }
    if n_coalitions < n + 2 {
        return Err(Error::Invalid(format!("kernel SHAP needs at least {} coalitions for {n} features", n + 2)));
    }
    let estimator = Estimator::Kernel { n_coalitions, seed };
    let ends = game.values(&[0, full_coalition(n)])?;
    let (base_value, prediction) = (ends[0], ends[1]);
    let delta = prediction - base_value;
    if n <= 1 {
        return Ok(ShapleyValues { base_value, prediction, phi: vec![delta; n], estimator, evaluations: 2 });
    }
    let sample = sample_coalitions(n, n_coalitions - 2, seed);
    let values = game.values(&sample.coalitions)?;
    // Eliminate the last player: phi_last = delta - sum(others).
    let k = n - 1;
    let last = 1u64 << k;
    let mut xtwx = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut xtwy = nalgebra::DVector::<f64>::zeros(k);
    let mut z = vec![0.0; k];
    for ((&c, &w), &v) in sample.coalitions.iter().zip(&sample.weights).zip(&values) {
        let zl = if c & last != 0 { 1.0 } else { 0.0 };
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = (if c >> j & 1 == 1 { 1.0 } else { 0.0 }) - zl;
        }
        let y = v - base_value - zl * delta;
        for a in 0..k {
            if z[a] == 0.0 {
                continue;
            }
            xtwy[a] += w * z[a] * y;
            for b in 0..k {
                xtwx[(a, b)] += w * z[a] * z[b];
            }
        }
    }
    let rank = xtwx.clone().svd(false, false).rank(1e-12 * xtwx.norm().max(f64::MIN_POSITIVE));
    if rank < k {
        return Err(Error::Singular(format!(
            "kernel regression has rank {rank} of {k} with {} distinct coalitions; increase n_coalitions",
            sample.coalitions.len()
        )));
    }
    let sol = xtwx
        .lu()
        .solve(&xtwy)
        .ok_or_else(|| Error::Singular("kernel regression system is singular".into()))?;
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    let rest: f64 = phi.iter().sum();
    phi.push(delta - rest);
    Ok(ShapleyValues { base_value, prediction, phi, estimator, evaluations: sample.coalitions.len() + 2 })
}
