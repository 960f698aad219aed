//! Finite metric spaces, client rounds, center sets and the p-norm
//! connection cost every other module is measured in.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const COORD_REL_TOL: f64 = 1e-9;

/// A finite metric space stored as a dense distance matrix.
///
/// Each point also carries its neighbors pre-sorted by ascending distance
/// (ties by index), which is the order every water-filling pass consumes.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    n: usize,
    dist: Vec<f64>,
    coords: Option<Vec<[f64; 2]>>,
    diameter: f64,
    order: Vec<usize>,
}

impl MetricSpace {
    /// Builds a space from an explicit matrix. The matrix must be square,
    /// symmetric, nonnegative and zero on the diagonal.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty point set".into()));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::InvalidMetric(format!("d[{i}][{i}] is not zero")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidMetric(format!("d[{i}][{j}] = {d}")));
                }
                if d != dist[j * n + i] {
                    return Err(Error::InvalidMetric(format!(
                        "asymmetric entry at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::assemble(n, dist, None))
    }

    /// Euclidean space over the given planar points.
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty point set".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMetric("non-finite coordinate".into()));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclid(points[i], points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self::assemble(n, dist, Some(points)))
    }

    /// Square lattice `{-hw, -hw + step, ..., hw}^2`, indexed row-major with
    /// the x coordinate varying fastest.
    ///
    /// `2 * half_width / step` must be integral (within 1e-9).
    pub fn grid(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) || !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidMetric(format!(
                "grid needs positive half width and step, got ({half_width}, {step})"
            )));
        }
        let cells = 2.0 * half_width / step;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidMetric(format!(
                "step {step} does not divide the side length {}",
                2.0 * half_width
            )));
        }
        let per_axis = rounded as usize + 1;
        let axis: Vec<f64> = (0..per_axis)
            .map(|i| -half_width + i as f64 * step)
            .collect();
        let mut points = Vec::with_capacity(per_axis * per_axis);
        for &y in &axis {
            for &x in &axis {
                points.push([x, y]);
            }
        }
        Self::from_points(points)
    }

    /// Uniform metric: every pair of distinct points at distance 1.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMetric(format!(
                "uniform metric needs at least 2 points, got {n}"
            )));
        }
        let mut dist = vec![1.0; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        Ok(Self::assemble(n, dist, None))
    }

    fn assemble(n: usize, dist: Vec<f64>, coords: Option<Vec<[f64; 2]>>) -> Self {
        let diameter = dist.iter().copied().fold(0.0, f64::max);
        let mut order = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = &dist[i * n..(i + 1) * n];
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            order.extend(idx);
        }
        Self {
            n,
            dist,
            coords,
            diameter,
            order,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    /// All points sorted by ascending distance from `i`, ties by index.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.order[i * self.n..(i + 1) * self.n]
    }

    /// Nearest point to a planar location, ties to the smaller index.
    /// `None` for spaces without coordinates.
    pub fn snap(&self, at: [f64; 2]) -> Option<usize> {
        let coords = self.coords.as_ref()?;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &c) in coords.iter().enumerate() {
            let d = (c[0] - at[0]).powi(2) + (c[1] - at[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Some(best)
    }

    /// Distance from `j` to the closest member of `centers`.
    pub fn distance_to_set(&self, j: usize, centers: &CenterSet) -> f64 {
        let row = self.row(j);
        centers
            .iter()
            .map(|c| row[c])
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the stored matrix against the coordinates (when present) and
    /// the structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n;
        let mut max = 0.0f64;
        for i in 0..n {
            if self.dist(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("d[{i}][{i}] is not zero")));
            }
            for j in 0..n {
                let d = self.dist(i, j);
                if d < 0.0 || d != self.dist(j, i) {
                    return Err(Error::InvalidMetric(format!("bad entry at ({i}, {j})")));
                }
                if let Some(c) = &self.coords {
                    let e = euclid(c[i], c[j]);
                    if (e - d).abs() > COORD_REL_TOL * e.max(1e-300) && e != d {
                        return Err(Error::InvalidMetric(format!(
                            "d[{i}][{j}] = {d} disagrees with coordinates ({e})"
                        )));
                    }
                }
                max = max.max(d);
            }
        }
        if max != self.diameter {
            return Err(Error::InvalidMetric("stale diameter".into()));
        }
        Ok(())
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n {
            Ok(())
        } else {
            Err(Error::PointOutOfRange { index, n: self.n })
        }
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Order of the norm aggregating per-client distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(NormOrder::Finite(p))
        } else if p == f64::INFINITY {
            Ok(NormOrder::Infinity)
        } else {
            Err(Error::InvalidNorm(p))
        }
    }

    /// `(sum v^p)^(1/p)`, or the max for `p = inf`. Entries are assumed
    /// nonnegative. The sum is taken relative to the largest entry so large
    /// exponents do not underflow.
    pub fn norm(&self, values: &[f64]) -> f64 {
        let max = values.iter().copied().fold(0.0, f64::max);
        match *self {
            NormOrder::Infinity => max,
            _ if max == 0.0 => 0.0,
            NormOrder::Finite(p) if p == 1.0 => values.iter().sum(),
            NormOrder::Finite(p) => {
                let s: f64 = values.iter().map(|&v| (v / max).powf(p)).sum();
                max * s.powf(1.0 / p)
            }
        }
    }

    /// Norm of the dual space: `q = p / (p - 1)`.
    pub fn dual_norm(&self, values: &[f64]) -> f64 {
        match *self {
            NormOrder::Infinity => values.iter().map(|v| v.abs()).sum(),
            NormOrder::Finite(p) if p == 1.0 => {
                values.iter().map(|v| v.abs()).fold(0.0, f64::max)
            }
            NormOrder::Finite(p) => {
                let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
                NormOrder::Finite(p / (p - 1.0)).norm(&abs)
            }
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(NormOrder::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse norm order {s:?}")))?;
                NormOrder::finite(p)
            }
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormOrder::Finite(p) => s.serialize_f64(*p),
            NormOrder::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => NormOrder::finite(p).map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Client positions of one round. A multiset: repeated indices each count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientRound(pub Vec<usize>);

impl ClientRound {
    pub fn new(members: Vec<usize>) -> Self {
        ClientRound(members)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn check(&self, space: &MetricSpace) -> Result<()> {
        self.0.iter().try_for_each(|&j| space.check_index(j))
    }
}

impl From<Vec<usize>> for ClientRound {
    fn from(v: Vec<usize>) -> Self {
        ClientRound(v)
    }
}

/// Integral placement: distinct point indices kept in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CenterSet(Vec<usize>);

impl CenterSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        CenterSet(members)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn check(&self, space: &MetricSpace, k: usize) -> Result<()> {
        self.0.iter().try_for_each(|&i| space.check_index(i))?;
        if self.0.len() > k {
            return Err(Error::TooManyCenters {
                got: self.0.len(),
                k,
            });
        }
        Ok(())
    }
}

impl FromIterator<usize> for CenterSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        CenterSet::new(iter.into_iter().collect())
    }
}

/// `C_R(F) = (sum_{j in R} d(j, F)^p)^(1/p)`; zero for an empty round.
pub fn connection_cost(
    space: &MetricSpace,
    round: &ClientRound,
    centers: &CenterSet,
    p: NormOrder,
) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptyCenterSet);
    }
    centers.iter().try_for_each(|i| space.check_index(i))?;
    round.check(space)?;
    let d: Vec<f64> = round
        .iter()
        .map(|j| space.distance_to_set(j, centers))
        .collect();
    Ok(p.norm(&d))
}
