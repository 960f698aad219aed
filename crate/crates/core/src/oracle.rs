//! Brute-force references. Nothing here shares code paths with the
//! water-filling solver or the rounding schemes it is used to check.

use crate::error::{Error, Result};
use crate::fractional::FractionalOpening;
use crate::metric::{connection_cost, CenterSet, ClientRound, MetricSpace, NormOrder};

/// Largest number of k-subsets the static enumeration will visit.
pub const MAX_SUBSETS: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic k-subsets of `0..n`.
pub struct Subsets {
    n: usize,
    cur: Option<Vec<usize>>,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        let cur = (k <= n).then(|| (0..k).collect());
        Self { n, cur }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for t in (i + 1)..k {
                    next[t] = next[t - 1] + 1;
                }
                self.cur = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Best static placement in hindsight: exhaustive search over all
/// k-subsets (k clamped to n), ties to the lexicographically first subset.
pub fn best_static_centers(
    space: &MetricSpace,
    rounds: &[ClientRound],
    k: usize,
    p: NormOrder,
) -> Result<(CenterSet, f64)> {
    let n = space.n();
    let k = k.min(n);
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let count = binomial(n, k);
    if count > MAX_SUBSETS {
        return Err(Error::OracleGuard(format!(
            "C({n}, {k}) = {count} subsets exceeds {MAX_SUBSETS}; use a smaller instance"
        )));
    }
    let mut best: Option<(CenterSet, f64)> = None;
    for subset in Subsets::new(n, k) {
        let f = CenterSet::new(subset);
        let mut total = 0.0;
        for r in rounds {
            total += connection_cost(space, r, &f, p)?;
        }
        if best.as_ref().is_none_or(|(_, c)| total < *c) {
            best = Some((f, total));
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Exact fractional cost by vertex enumeration of each client's transport
/// polytope `{x : sum x = 1, 0 <= x_i <= y_i}`. A vertex has every
/// coordinate but at most one at a bound, so it suffices to choose the set
/// at capacity and the single free coordinate.
pub fn lp_cost_bruteforce(
    space: &MetricSpace,
    y: &FractionalOpening,
    round: &ClientRound,
    p: NormOrder,
) -> Result<f64> {
    let n = space.n();
    if n > 6 || round.len() > 4 {
        return Err(Error::OracleGuard(format!(
            "vertex enumeration limited to n <= 6 and |R| <= 4, got n = {n}, |R| = {}",
            round.len()
        )));
    }
    round.check(space)?;
    let yv = y.values();
    let mut betas = Vec::with_capacity(round.len());
    for j in round.iter() {
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let full: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| yv[i]).sum();
            let full_cost: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| yv[i] * space.dist(i, j))
                .sum();
            let left = 1.0 - full;
            if left.abs() <= 1e-12 {
                best = best.min(full_cost);
                continue;
            }
            for free in (0..n).filter(|i| mask >> i & 1 == 0) {
                if left > 0.0 && left <= yv[free] {
                    best = best.min(full_cost + left * space.dist(free, j));
                }
            }
        }
        if !best.is_finite() {
            return Err(Error::InsufficientMass { mass: y.mass() });
        }
        betas.push(best);
    }
    Ok(p.norm(&betas))
}

/// Monte Carlo estimate of `E[C_{{j}}(F)]` over `samples` seeded draws of a
/// rounding scheme. Returns `(mean, standard error)`.
pub fn monte_carlo_ratio<F>(
    rounder: F,
    space: &MetricSpace,
    y: &FractionalOpening,
    j: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&MetricSpace, &FractionalOpening, u64) -> Result<CenterSet>,
{
    if samples < 1000 {
        return Err(Error::OracleGuard(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    space.check_index(j)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for s in 0..samples as u64 {
        let f = rounder(space, y, seed.wrapping_add(s))?;
        let c = space.distance_to_set(j, &f);
        sum += c;
        sum_sq += c * c;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok((mean, (var / m).sqrt()))
}
