//! Exponentiated-gradient learner over the scaled simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{dual_certificate, subgradient, FractionalOpening, SubgradientVector};
use crate::metric::{ClientRound, MetricSpace, NormOrder};

/// Entries are floored here before renormalizing so the multiplicative
/// update can always revive a point.
pub const MASS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub n: usize,
    pub k: usize,
    pub horizon: usize,
    pub max_clients: usize,
    pub diameter: f64,
    #[serde(default)]
    pub step: Option<f64>,
    /// Restart with a doubled horizon whenever the current one runs out.
    #[serde(default)]
    pub doubling: bool,
}

impl LearnerConfig {
    pub fn new(space: &MetricSpace, k: usize, horizon: usize, max_clients: usize) -> Self {
        Self {
            n: space.n(),
            k,
            horizon,
            max_clients,
            diameter: space.diameter(),
            step: None,
            doubling: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.k < 1 || self.k > self.n {
            return bad(format!("need 1 <= k <= n, got k = {}, n = {}", self.k, self.n));
        }
        if self.max_clients < 1 {
            return bad("client cap must be at least 1".into());
        }
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return bad(format!("diameter must be positive, got {}", self.diameter));
        }
        if let Some(eps) = self.step {
            if !(eps >= 0.0 && eps.is_finite()) {
                return bad(format!("step size must be nonnegative, got {eps}"));
            }
        }
        Ok(())
    }

    /// `sqrt(ln n) / (D r sqrt(T))` for the given horizon.
    pub fn default_step(&self, horizon: usize) -> f64 {
        (self.n as f64).ln().sqrt()
            / (self.diameter * self.max_clients as f64 * (horizon as f64).sqrt())
    }
}

/// `y' = k (y . exp(-eps g)) / sum_i y_i exp(-eps g_i)`.
pub fn exponentiated_update(y: &[f64], g: &[f64], eps: f64, k: usize) -> Vec<f64> {
    // shift exponents by their max; the shift cancels in the ratio
    let shift = g.iter().map(|&gi| -eps * gi).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = y
        .iter()
        .zip(g)
        .map(|(&yi, &gi)| (yi * (-eps * gi - shift).exp()).max(MASS_FLOOR))
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|wi| k as f64 * wi / total).collect()
}

#[derive(Debug, Clone)]
pub struct FractionalLearner {
    cfg: LearnerConfig,
    y: FractionalOpening,
    t: usize,
    epoch_start: usize,
    epoch_len: usize,
    step: f64,
    cumulative: f64,
}

/// What one update observed.
#[derive(Debug, Clone)]
pub struct FractionalStep {
    /// `FC_{R_t}(y_t)`, charged before the update.
    pub cost: f64,
    pub gradient: SubgradientVector,
}

impl FractionalLearner {
    pub fn new(cfg: LearnerConfig) -> Result<Self> {
        cfg.validate()?;
        let y = FractionalOpening::uniform(cfg.n, cfg.k)?;
        let step = cfg.step.unwrap_or_else(|| cfg.default_step(cfg.horizon));
        Ok(Self {
            epoch_len: cfg.horizon,
            y,
            t: 1,
            epoch_start: 1,
            step,
            cumulative: 0.0,
            cfg,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn opening(&self) -> &FractionalOpening {
        &self.y
    }

    /// Index of the upcoming round, starting at 1.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative
    }

    /// Charges `FC_{R_t}(y_t)` and moves `y` against the certificate's
    /// subgradient.
    pub fn step(
        &mut self,
        space: &MetricSpace,
        round: &ClientRound,
        p: NormOrder,
    ) -> Result<FractionalStep> {
        if round.len() > self.cfg.max_clients {
            return Err(Error::ClientCapExceeded {
                got: round.len(),
                cap: self.cfg.max_clients,
            });
        }
        if space.n() != self.cfg.n {
            return Err(Error::InvalidConfig(format!(
                "learner built for {} points, space has {}",
                self.cfg.n,
                space.n()
            )));
        }
        if self.cfg.doubling && self.t >= self.epoch_start + self.epoch_len {
            self.epoch_start = self.t;
            self.epoch_len *= 2;
            self.y = FractionalOpening::uniform(self.cfg.n, self.cfg.k)?;
            self.step = self
                .cfg
                .step
                .unwrap_or_else(|| self.cfg.default_step(self.epoch_len));
        }

        let cert = dual_certificate(space, &self.y, round, p)?;
        let g = subgradient(&cert);
        let next = exponentiated_update(self.y.values(), g.values(), self.step, self.cfg.k);
        self.y = FractionalOpening::from_raw(next, self.cfg.k);
        self.t += 1;
        self.cumulative += cert.objective;
        Ok(FractionalStep {
            cost: cert.objective,
            gradient: g,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> MetricSpace {
        MetricSpace::uniform(2).unwrap()
    }

    #[test]
    fn uniform_initialisation() {
        let space = MetricSpace::from_points((0..4).map(|i| [i as f64, 0.0]).collect()).unwrap();
        let l = FractionalLearner::new(LearnerConfig::new(&space, 2, 10, 1)).unwrap();
        assert_eq!(l.opening().values(), &[0.5; 4]);
        assert_eq!(l.round(), 1);

        let grid = MetricSpace::grid(1.0, 0.1).unwrap();
        let l = FractionalLearner::new(LearnerConfig::new(&grid, 8, 10, 20)).unwrap();
        assert!(l.opening().values().iter().all(|&v| v == 8.0 / 441.0));

        let l = FractionalLearner::new(LearnerConfig::new(&two_points(), 1, 10, 1)).unwrap();
        assert_eq!(l.opening().values(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_oversized_budget() {
        let cfg = LearnerConfig::new(&two_points(), 3, 10, 1);
        assert!(matches!(
            FractionalLearner::new(cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn update_formula() {
        let y = exponentiated_update(&[0.5, 0.5], &[1.0, 0.0], 2f64.ln(), 1);
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((y[1] - 2.0 / 3.0).abs() < 1e-15);

        let y0 = [0.2, 1.3, 0.5];
        let y = exponentiated_update(&y0, &[0.0; 3], 0.7, 2);
        for (a, b) in y.iter().zip(&y0) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn update_keeps_mass_and_floor() {
        let y = exponentiated_update(&[1.0, 1.0, 1.0], &[0.0, 1e6, -1e6], 1.0, 3);
        assert!((y.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(y.iter().all(|&v| v >= 0.0));
        assert!(y[1] > 0.0);
    }

    #[test]
    fn default_step_size() {
        let space = two_points();
        let cfg = LearnerConfig::new(&space, 1, 100, 4);
        let l = FractionalLearner::new(cfg).unwrap();
        let expect = 2f64.ln().sqrt() / (1.0 * 4.0 * 10.0);
        assert!((l.step_size() - expect).abs() < 1e-15);
    }

    #[test]
    fn converges_to_static_optimum_on_two_points() {
        let space = two_points();
        let t = 10_000;
        let mut l = FractionalLearner::new(LearnerConfig::new(&space, 1, t, 1)).unwrap();
        let r = ClientRound::new(vec![0]);
        for _ in 0..t {
            l.step(&space, &r, NormOrder::Finite(2.0)).unwrap();
        }
        let (best, _) =
            crate::oracle::best_static_centers(&space, &vec![r.clone(); t], 1, NormOrder::Finite(2.0))
                .unwrap();
        assert_eq!(best.as_slice(), &[0]);
        assert!(l.opening().values()[0] > 0.95);
    }

    #[test]
    fn cap_enforced() {
        let space = two_points();
        let mut l = FractionalLearner::new(LearnerConfig::new(&space, 1, 10, 1)).unwrap();
        let err = l.step(&space, &ClientRound::new(vec![0, 1]), NormOrder::Infinity);
        assert!(matches!(err, Err(Error::ClientCapExceeded { got: 2, cap: 1 })));
    }

    #[test]
    fn doubling_restarts_epochs() {
        let space = two_points();
        let mut cfg = LearnerConfig::new(&space, 1, 4, 1);
        cfg.doubling = true;
        let mut l = FractionalLearner::new(cfg).unwrap();
        let first = l.step_size();
        let r = ClientRound::new(vec![0]);
        for _ in 0..4 {
            l.step(&space, &r, NormOrder::Infinity).unwrap();
        }
        assert!(l.opening().values()[0] > 0.5);
        l.step(&space, &r, NormOrder::Infinity).unwrap();
        assert!((l.step_size() - first / 2f64.sqrt()).abs() < 1e-15);
    }
}
