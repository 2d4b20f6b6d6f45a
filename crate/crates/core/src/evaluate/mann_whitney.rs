use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Exact enumeration is used while `n_a * n_b` stays at or below this.
pub const EXACT_MAX_PRODUCT: usize = 200;
/// ... or while the pooled sample is at most this large.
pub const EXACT_MAX_TOTAL: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs with `a > b` plus half the ties.
    pub u: f64,
    pub p: f64,
    pub method: PValueMethod,
}

/// Midranks of the pooled values, doubled so they are integers.
/// Returns `(doubled ranks, tie group sizes)`.
pub(crate) fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&x, &y| pooled[x].total_cmp(&pooled[y]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 average to (i+j+2)/2.
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("Mann-Whitney needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in Mann-Whitney sample".into()));
    }
    Ok(())
}

/// Two-sided Mann-Whitney U test with midrank ties.
///
/// The two-sided p-value is `P(|U - n_a n_b / 2| >= |u - n_a n_b / 2|)` under
/// random assignment of the observed pooled values, computed exactly for
/// small samples and by the tie-corrected normal approximation with
/// continuity correction otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (na, nb) = (a.len(), b.len());
    if na * nb <= EXACT_MAX_PRODUCT || na + nb <= EXACT_MAX_TOTAL {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// Twice `U` of `a`, an integer.
fn twice_u(ranks: &[u64], na: usize) -> i64 {
    let r: u64 = ranks[..na].iter().sum();
    r as i64 - (na * (na + 1)) as i64
}

/// Exact null distribution by dynamic programming over subsets of the
/// pooled doubled ranks.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = doubled_midranks(&pooled);
    let obs = twice_u(&ranks, na);
    let max_sum: usize = ranks.iter().map(|&r| r as usize).sum();
    // ways[k][s]: subsets of size k with doubled-rank sum s.
    let mut ways = vec![vec![0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    let mut reach = 0usize;
    for &r in &ranks {
        let r = r as usize;
        reach += r;
        for k in (1..=na).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let (src, dst) = (&lower[k - 1], &mut upper[0]);
            for s in (r..=reach).rev() {
                dst[s] += src[s - r];
            }
        }
    }
    let centre = (na * nb) as i64;
    let offset = (na * (na + 1)) as i64;
    let dev_obs = (obs - centre).abs();
    let (mut hit, mut total) = (0.0, 0.0);
    for (s, &w) in ways[na].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        total += w;
        if (s as i64 - offset - centre).abs() >= dev_obs {
            hit += w;
        }
    }
    Ok(MannWhitney { u: obs as f64 / 2.0, p: (hit / total).min(1.0), method: PValueMethod::Exact })
}

pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    check(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let u = twice_u(&ranks, a.len()) as f64 / 2.0;
    let n = na + nb;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term);
    let mu = na * nb / 2.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::standard();
        (2.0 * std.sf(z)).min(1.0)
    };
    Ok(MannWhitney { u, p, method: PValueMethod::Normal })
}
