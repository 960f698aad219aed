//! Fractional connection cost, its combinatorial dual certificate, and the
//! subgradients the learner consumes.
//!
//! For a fractional opening `y` and a client at `j`, the primal program
//! routes one unit of demand to points in ascending distance order, never
//! taking more than `y_i` from a point. Clients do not share capacity, so
//! each client's optimal assignment is independent of the others and the
//! cost is the p-norm of the per-client fractional distances `beta_j`.
//!
//! The dual certificate prices each client by `lambda_j` (a dual-norm unit
//! vector aligned with `beta`) and charges `k_ij` for every point closer
//! than the client's fill radius `D_j`. Its value matches the primal value
//! exactly, and `g_i = -sum_j k_ij` is a subgradient of the cost in `y`.

use crate::error::{Error, Result};
use crate::metric::{CenterSet, ClientRound, MetricSpace, NormOrder};

/// Absolute slack for inequalities and relative tolerance for equalities.
pub const TOL: f64 = 1e-9;

/// A point of the scaled simplex: nonnegative masses summing to `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalOpening {
    y: Vec<f64>,
    k: usize,
}

impl FractionalOpening {
    pub fn new(y: Vec<f64>, k: usize) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidOpening("empty vector".into()));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidOpening(format!("y[{i}] = {v}")));
        }
        let mass: f64 = y.iter().sum();
        if (mass - k as f64).abs() > TOL * (k as f64).max(1.0) {
            return Err(Error::InvalidOpening(format!(
                "mass {mass} differs from budget {k}"
            )));
        }
        Ok(Self { y, k })
    }

    /// `k / n` everywhere.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k > n {
            return Err(Error::InvalidOpening(format!("cannot spread {k} over {n} points")));
        }
        Ok(Self {
            y: vec![k as f64 / n as f64; n],
            k,
        })
    }

    /// Integral opening with unit mass on each (distinct) member.
    pub fn indicator(n: usize, centers: &CenterSet) -> Result<Self> {
        let mut y = vec![0.0; n];
        for i in centers.iter() {
            if i >= n {
                return Err(Error::PointOutOfRange { index: i, n });
            }
            y[i] = 1.0;
        }
        Ok(Self {
            y,
            k: centers.len(),
        })
    }

    pub(crate) fn from_raw(y: Vec<f64>, k: usize) -> Self {
        Self { y, k }
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn mass(&self) -> f64 {
        self.y.iter().sum()
    }

    /// Support of an integral opening, `None` if some entry is fractional.
    pub fn integral_support(&self) -> Option<CenterSet> {
        let mut out = Vec::new();
        for (i, &v) in self.y.iter().enumerate() {
            if v == 1.0 {
                out.push(i);
            } else if v != 0.0 {
                return None;
            }
        }
        Some(CenterSet::new(out))
    }
}

/// Optimal assignment of one client's unit demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientFill {
    pub client: usize,
    /// `(i, x_ij)` with `x_ij > 0`, in ascending distance order.
    pub support: Vec<(usize, f64)>,
    /// `beta_j = sum_i d_ij x_ij`.
    pub beta: f64,
    /// `D_j`, the farthest distance carrying positive mass.
    pub radius: f64,
}

fn check_space(space: &MetricSpace, y: &FractionalOpening) -> Result<()> {
    if y.n() != space.n() {
        return Err(Error::InvalidOpening(format!(
            "opening has {} entries, space has {} points",
            y.n(),
            space.n()
        )));
    }
    if y.k() < 1 {
        return Err(Error::InsufficientMass { mass: y.mass() });
    }
    Ok(())
}

pub(crate) fn fill_client(space: &MetricSpace, y: &[f64], j: usize) -> ClientFill {
    let row = space.row(j);
    let mut rem = 1.0;
    let mut support = Vec::new();
    let mut beta = 0.0;
    let mut radius = 0.0;
    for &i in space.neighbors(j) {
        if rem <= 0.0 {
            break;
        }
        let cap = y[i];
        if cap <= 0.0 {
            continue;
        }
        let x = cap.min(rem);
        rem -= x;
        support.push((i, x));
        beta += row[i] * x;
        radius = row[i];
    }
    ClientFill {
        client: j,
        support,
        beta,
        radius,
    }
}

/// Greedy water-filling for every client of `round`, in round order.
pub fn water_fill(
    space: &MetricSpace,
    y: &FractionalOpening,
    round: &ClientRound,
) -> Result<Vec<ClientFill>> {
    check_space(space, y)?;
    round.check(space)?;
    Ok(round
        .iter()
        .map(|j| fill_client(space, y.values(), j))
        .collect())
}

/// `beta_i` for every point of the space treated as a client.
pub fn fractional_radii(space: &MetricSpace, y: &FractionalOpening) -> Result<Vec<f64>> {
    check_space(space, y)?;
    Ok((0..space.n())
        .map(|j| fill_client(space, y.values(), j).beta)
        .collect())
}

/// Fractional connection cost `FC_R(y)`.
pub fn fractional_cost(
    space: &MetricSpace,
    y: &FractionalOpening,
    round: &ClientRound,
    p: NormOrder,
) -> Result<f64> {
    let betas: Vec<f64> = water_fill(space, y, round)?
        .into_iter()
        .map(|f| f.beta)
        .collect();
    Ok(p.norm(&betas))
}

/// Primal solution together with a dual solution of equal value.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// Number of points, the length of every `x` and `kmat` row.
    pub n: usize,
    pub clients: Vec<usize>,
    /// `x[j][i]`, one row per client.
    pub x: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub a: Vec<f64>,
    /// `kmat[j][i]`, one row per client.
    pub kmat: Vec<Vec<f64>>,
    pub radius: Vec<f64>,
    pub support: Vec<Vec<usize>>,
    pub objective: f64,
}

impl DualCertificate {
    /// `sum_j A_j - sum_{i,j} k_ij y_i`.
    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        let a: f64 = self.a.iter().sum();
        let ky: f64 = self
            .kmat
            .iter()
            .map(|row| row.iter().zip(y).map(|(k, y)| k * y).sum::<f64>())
            .sum();
        a - ky
    }

    pub fn max_abs_k(&self) -> f64 {
        self.kmat
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Every certificate invariant, as a list of human-readable violations.
    pub fn violations(
        &self,
        space: &MetricSpace,
        y: &FractionalOpening,
        p: NormOrder,
    ) -> Vec<String> {
        let mut out = Vec::new();
        let yv = y.values();
        let d_max = space.diameter();
        for (r, &j) in self.clients.iter().enumerate() {
            let row = &self.x[r];
            let mass: f64 = row.iter().sum();
            if (mass - 1.0).abs() > TOL {
                out.push(format!("client {r}: assignment mass {mass}"));
            }
            let beta: f64 = row.iter().enumerate().map(|(i, x)| space.dist(i, j) * x).sum();
            if (beta - self.beta[r]).abs() > TOL * beta.max(1.0) {
                out.push(format!("client {r}: beta {} vs {beta}", self.beta[r]));
            }
            for i in 0..space.n() {
                let x = row[i];
                let k = self.kmat[r][i];
                if x < 0.0 || x > yv[i] {
                    out.push(format!("x[{r}][{i}] = {x} outside [0, {}]", yv[i]));
                }
                if k < 0.0 {
                    out.push(format!("k[{r}][{i}] = {k} negative"));
                }
                if k.abs() > d_max + TOL {
                    out.push(format!("|k[{r}][{i}]| = {k} exceeds diameter {d_max}"));
                }
                let lhs = space.dist(i, j) * self.lambda[r] + k;
                if lhs < self.a[r] - TOL {
                    out.push(format!(
                        "dual constraint ({i}, {r}): {lhs} < A = {}",
                        self.a[r]
                    ));
                }
            }
        }
        let dn = p.dual_norm(&self.lambda);
        if dn > 1.0 + TOL {
            out.push(format!("dual norm of lambda {dn} exceeds 1"));
        }
        let primal = p.norm(&self.beta);
        let dual = self.dual_objective(yv);
        if !close(primal, dual) {
            out.push(format!("primal {primal} != dual {dual}"));
        }
        if !close(primal, self.objective) {
            out.push(format!("objective {} != primal {primal}", self.objective));
        }
        out
    }
}

/// Relative equality at [`TOL`], absolute near zero.
pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

/// Water-fills every client, then prices the solution with dual weights
/// `lambda_j = (beta_j / ||beta||_p)^(p-1)` (the smallest-index argmax
/// indicator for `p = inf`), `A_j = lambda_j D_j` and
/// `k_ij = lambda_j (x_ij / y_i)(D_j - d_ij)`.
///
/// Points with no capacity (`y_i = 0`) inside the fill radius get
/// `k_ij = lambda_j (D_j - d_ij)`; they cost nothing in the dual objective
/// and keep its constraints satisfied.
pub fn dual_certificate(
    space: &MetricSpace,
    y: &FractionalOpening,
    round: &ClientRound,
    p: NormOrder,
) -> Result<DualCertificate> {
    let fills = water_fill(space, y, round)?;
    let n = space.n();
    let m = fills.len();
    let yv = y.values();

    let beta: Vec<f64> = fills.iter().map(|f| f.beta).collect();
    let radius: Vec<f64> = fills.iter().map(|f| f.radius).collect();
    let mut x = vec![vec![0.0; n]; m];
    let mut support = Vec::with_capacity(m);
    for (r, fill) in fills.iter().enumerate() {
        for &(i, xi) in &fill.support {
            x[r][i] = xi;
        }
        support.push(fill.support.iter().map(|&(i, _)| i).collect());
    }
    let clients: Vec<usize> = round.iter().collect();

    let norm = p.norm(&beta);
    if norm == 0.0 {
        return Ok(DualCertificate {
            n,
            clients,
            x,
            beta,
            lambda: vec![0.0; m],
            a: vec![0.0; m],
            kmat: vec![vec![0.0; n]; m],
            radius,
            support,
            objective: 0.0,
        });
    }

    let lambda: Vec<f64> = match p {
        NormOrder::Finite(p) => beta.iter().map(|&b| (b / norm).powf(p - 1.0)).collect(),
        NormOrder::Infinity => {
            // first index attaining the max
            let arg = beta
                .iter()
                .enumerate()
                .fold(0, |best, (r, &b)| if b > beta[best] { r } else { best });
            (0..m).map(|r| if r == arg { 1.0 } else { 0.0 }).collect()
        }
    };

    let a: Vec<f64> = lambda.iter().zip(&radius).map(|(l, d)| l * d).collect();
    let mut kmat = vec![vec![0.0; n]; m];
    for (r, &j) in clients.iter().enumerate() {
        let row = space.row(j);
        let (lam, dj) = (lambda[r], radius[r]);
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let slack = dj - row[i];
            if slack <= 0.0 {
                continue;
            }
            kmat[r][i] = if x[r][i] > 0.0 {
                lam * (x[r][i] / yv[i]) * slack
            } else {
                lam * slack
            };
        }
    }

    Ok(DualCertificate {
        n,
        clients,
        x,
        beta,
        lambda,
        a,
        kmat,
        radius,
        support,
        objective: norm,
    })
}

/// `g_i = -sum_j k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientVector(pub Vec<f64>);

impl SubgradientVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `g . (y' - y)`.
    pub fn dot_diff(&self, to: &[f64], from: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(to.iter().zip(from))
            .map(|(g, (a, b))| g * (a - b))
            .sum()
    }
}

pub fn subgradient(cert: &DualCertificate) -> SubgradientVector {
    let mut g = vec![0.0; cert.n];
    for row in &cert.kmat {
        for (gi, k) in g.iter_mut().zip(row) {
            *gi -= k;
        }
    }
    SubgradientVector(g)
}
