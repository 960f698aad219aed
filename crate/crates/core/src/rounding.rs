//! Fractional openings to integral center sets.
//!
//! [`round_deterministic`] keeps a point whenever it is farther than
//! `6k beta_i` from every point kept before it, scanning in ascending
//! `beta`. The result serves every client within `6k` times its fractional
//! distance and never exceeds `k` centers.
//!
//! [`round_randomized`] opens exactly `k` points. It caps the opening at 1,
//! groups points into bundles around well-separated low-`beta` centers and
//! runs systematic sampling over the bundle-ordered masses, so each point
//! opens with probability equal to its (capped) mass and every contiguous
//! bundle of mass at least one always opens a member.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fractional::{fractional_radii, FractionalOpening};
use crate::metric::{CenterSet, MetricSpace};

/// Separation factor of the randomized scheme's bundle centers.
pub const BUNDLE_SEPARATION: f64 = 4.0;

/// Points in ascending `beta`, ties by index.
fn beta_order(beta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| beta[a].total_cmp(&beta[b]).then(a.cmp(&b)));
    order
}

/// Greedy filter: admit `i` when `min_{c in kept} d(i, c) > factor * beta_i`.
fn separated_greedy(space: &MetricSpace, beta: &[f64], factor: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in beta_order(beta) {
        let row = space.row(i);
        let nearest = kept.iter().map(|&c| row[c]).fold(f64::INFINITY, f64::min);
        if nearest > factor * beta[i] {
            kept.push(i);
        }
    }
    kept
}

/// Deterministic `6k` rounding. Returns at most `k` centers.
pub fn round_deterministic(space: &MetricSpace, y: &FractionalOpening) -> Result<CenterSet> {
    let beta = fractional_radii(space, y)?;
    let factor = 6.0 * y.k() as f64;
    Ok(CenterSet::new(separated_greedy(space, &beta, factor)))
}

/// Caps every entry at 1 and moves the excess to the nearest points that
/// still have room, preserving total mass.
pub fn cap_at_one(space: &MetricSpace, y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    for i in 0..out.len() {
        if out[i] <= 1.0 {
            continue;
        }
        let mut excess = out[i] - 1.0;
        out[i] = 1.0;
        for &j in space.neighbors(i) {
            if excess <= 0.0 {
                break;
            }
            let room = 1.0 - out[j];
            if room > 0.0 {
                let moved = room.min(excess);
                out[j] += moved;
                excess -= moved;
            }
        }
    }
    out
}

/// Bundle layout of the randomized scheme: points with positive mass listed
/// bundle by bundle, each bundle led by its center and followed by its
/// members in ascending distance from the center.
#[derive(Debug, Clone)]
pub struct BundleLayout {
    pub centers: Vec<usize>,
    /// `(point, mass)` in sampling order.
    pub items: Vec<(usize, f64)>,
    /// Half-open ranges of `items` belonging to each bundle.
    pub spans: Vec<(usize, usize)>,
}

pub fn bundle_layout(space: &MetricSpace, y: &FractionalOpening) -> Result<BundleLayout> {
    let capped = FractionalOpening::from_raw(cap_at_one(space, y.values()), y.k());
    let beta = fractional_radii(space, &capped)?;
    let centers = separated_greedy(space, &beta, BUNDLE_SEPARATION);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for (i, &m) in capped.values().iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        let row = space.row(i);
        let mut best = 0;
        for (b, &c) in centers.iter().enumerate() {
            if row[c] < row[centers[best]] || (row[c] == row[centers[best]] && c < centers[best]) {
                best = b;
            }
        }
        members[best].push(i);
    }

    let mut items = Vec::new();
    let mut spans = Vec::with_capacity(centers.len());
    for (b, &c) in centers.iter().enumerate() {
        let row = space.row(c);
        let list = &mut members[b];
        list.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let start = items.len();
        items.extend(list.iter().map(|&i| (i, capped.values()[i])));
        spans.push((start, items.len()));
    }
    Ok(BundleLayout {
        centers,
        items,
        spans,
    })
}

/// Systematic (Madow) sampling: selects the items covering the positions
/// `u, u + 1, ..., u + k - 1` on the cumulative mass line. With every mass at
/// most 1 and total mass `k`, exactly `k` distinct items are chosen.
pub fn systematic_sample(masses: &[f64], k: usize, offset: f64) -> Vec<usize> {
    let total: f64 = masses.iter().sum();
    let scale = if total > 0.0 { k as f64 / total } else { 0.0 };
    let mut chosen = Vec::with_capacity(k);
    let mut cum = 0.0;
    let mut idx = 0;
    for m in 0..k {
        let pos = offset + m as f64;
        while idx < masses.len() && cum + masses[idx] * scale <= pos {
            cum += masses[idx] * scale;
            idx += 1;
        }
        if idx >= masses.len() {
            break;
        }
        chosen.push(idx);
        // positions are a unit apart and no item is wider than one unit, so
        // the next position lies strictly beyond this item
        cum += masses[idx] * scale;
        idx += 1;
    }
    if chosen.len() < k {
        // rounding left the tail short; take the heaviest unused items
        let mut rest: Vec<usize> = (0..masses.len()).filter(|i| !chosen.contains(i)).collect();
        rest.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then(a.cmp(&b)));
        chosen.extend(rest.into_iter().take(k - chosen.len()));
    }
    chosen
}

/// Randomized rounding with exactly `k` centers, driven by `rng`.
pub fn round_randomized_with<R: Rng + ?Sized>(
    space: &MetricSpace,
    y: &FractionalOpening,
    rng: &mut R,
) -> Result<CenterSet> {
    let layout = bundle_layout(space, y)?;
    let masses: Vec<f64> = layout.items.iter().map(|&(_, m)| m).collect();
    let offset: f64 = rng.random();
    let picked = systematic_sample(&masses, y.k(), offset);
    Ok(CenterSet::new(
        picked.into_iter().map(|i| layout.items[i].0).collect(),
    ))
}

/// Randomized rounding seeded with a portable ChaCha8 stream.
pub fn round_randomized(space: &MetricSpace, y: &FractionalOpening, seed: u64) -> Result<CenterSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    round_randomized_with(space, y, &mut rng)
}
