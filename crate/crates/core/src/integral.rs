//! Online learners that place integral centers: the fractional learner
//! followed by deterministic or randomized rounding, and a Hedge combiner
//! that mixes the two.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learner::{FractionalLearner, LearnerConfig};
use crate::metric::{connection_cost, CenterSet, ClientRound, MetricSpace, NormOrder};
use crate::rounding::{round_deterministic, round_randomized};

/// SplitMix64 finalizer; turns `(seed, round, stream)` into a per-round seed.
pub fn derive_seed(seed: u64, round: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(round.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundingMode {
    Deterministic,
    Randomized,
}

/// One played round.
#[derive(Debug, Clone)]
pub struct Placement {
    pub centers: CenterSet,
    pub cost: f64,
    /// Fractional cost of the underlying opening on the same round.
    pub fractional_cost: f64,
}

#[derive(Debug, Clone)]
pub struct IntegralLearner {
    frac: FractionalLearner,
    mode: RoundingMode,
    seed: u64,
    last: Option<CenterSet>,
    cumulative: f64,
}

impl IntegralLearner {
    pub fn deterministic(cfg: LearnerConfig) -> Result<Self> {
        Self::new(cfg, RoundingMode::Deterministic, 0)
    }

    pub fn randomized(cfg: LearnerConfig, seed: u64) -> Result<Self> {
        Self::new(cfg, RoundingMode::Randomized, seed)
    }

    pub fn new(cfg: LearnerConfig, mode: RoundingMode, seed: u64) -> Result<Self> {
        Ok(Self {
            frac: FractionalLearner::new(cfg)?,
            mode,
            seed,
            last: None,
            cumulative: 0.0,
        })
    }

    pub fn fractional(&self) -> &FractionalLearner {
        &self.frac
    }

    pub fn mode(&self) -> RoundingMode {
        self.mode
    }

    pub fn last_placement(&self) -> Option<&CenterSet> {
        self.last.as_ref()
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative
    }

    /// The centers this learner commits to for the upcoming round. Depends
    /// only on the rounds seen so far (and the seed).
    pub fn placement(&self, space: &MetricSpace) -> Result<CenterSet> {
        let y = self.frac.opening();
        match self.mode {
            RoundingMode::Deterministic => round_deterministic(space, y),
            RoundingMode::Randomized => {
                round_randomized(space, y, derive_seed(self.seed, self.frac.round() as u64, 0))
            }
        }
    }

    /// Commits to a placement, observes `round`, pays for it and advances
    /// the fractional learner.
    pub fn step(
        &mut self,
        space: &MetricSpace,
        round: &ClientRound,
        p: NormOrder,
    ) -> Result<Placement> {
        let centers = self.placement(space)?;
        let cost = connection_cost(space, round, &centers, p)?;
        let frac = self.frac.step(space, round, p)?;
        self.cumulative += cost;
        self.last = Some(centers.clone());
        Ok(Placement {
            centers,
            cost,
            fractional_cost: frac.cost,
        })
    }
}

/// Hedge over a fixed set of experts with losses in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Hedge {
    losses: Vec<f64>,
    eta: f64,
}

impl Hedge {
    pub fn new(experts: usize, eta: f64) -> Self {
        Self {
            losses: vec![0.0; experts],
            eta,
        }
    }

    /// `exp(-eta L_e)`, normalized.
    pub fn probabilities(&self) -> Vec<f64> {
        let min = self.losses.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = self
            .losses
            .iter()
            .map(|l| (-self.eta * (l - min)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    pub fn update(&mut self, losses: &[f64]) {
        for (acc, l) in self.losses.iter_mut().zip(losses) {
            *acc += l;
        }
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let probs = self.probabilities();
        let mut acc = 0.0;
        for (e, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return e;
            }
        }
        probs.len() - 1
    }
}

/// Outcome of one combiner round.
#[derive(Debug, Clone)]
pub struct CombinedPlacement {
    pub played: RoundingMode,
    pub centers: CenterSet,
    pub cost: f64,
    pub fractional_cost: f64,
    /// Costs the deterministic and randomized experts would have paid.
    pub expert_costs: [f64; 2],
}

/// Follows the deterministic or the randomized rounding each round, chosen
/// by Hedge on their full-information costs scaled by `D r`. Both experts
/// round the same fractional opening.
#[derive(Debug, Clone)]
pub struct Combiner {
    frac: FractionalLearner,
    hedge: Hedge,
    seed: u64,
    expert_costs: [f64; 2],
    cumulative: f64,
}

impl Combiner {
    pub fn new(cfg: LearnerConfig, seed: u64) -> Result<Self> {
        let eta = (2f64.ln() / cfg.horizon as f64).sqrt();
        Ok(Self {
            frac: FractionalLearner::new(cfg)?,
            hedge: Hedge::new(2, eta),
            seed,
            expert_costs: [0.0; 2],
            cumulative: 0.0,
        })
    }

    pub fn fractional(&self) -> &FractionalLearner {
        &self.frac
    }

    pub fn hedge(&self) -> &Hedge {
        &self.hedge
    }

    pub fn expert_costs(&self) -> [f64; 2] {
        self.expert_costs
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative
    }

    /// Both experts' committed placements and the expert that will be
    /// played, for the upcoming round.
    pub fn placements(&self, space: &MetricSpace) -> Result<([CenterSet; 2], usize)> {
        let t = self.frac.round() as u64;
        let y = self.frac.opening();
        let det = round_deterministic(space, y)?;
        let rand = round_randomized(space, y, derive_seed(self.seed, t, 0))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, t, 1));
        let pick = self.hedge.sample(&mut rng);
        Ok(([det, rand], pick))
    }

    pub fn step(
        &mut self,
        space: &MetricSpace,
        round: &ClientRound,
        p: NormOrder,
    ) -> Result<CombinedPlacement> {
        let ([det, rand], pick) = self.placements(space)?;
        let costs = [
            connection_cost(space, round, &det, p)?,
            connection_cost(space, round, &rand, p)?,
        ];
        let cfg = self.frac.config();
        let scale = cfg.diameter * cfg.max_clients as f64;
        self.hedge.update(&[costs[0] / scale, costs[1] / scale]);
        let frac = self.frac.step(space, round, p)?;
        self.expert_costs[0] += costs[0];
        self.expert_costs[1] += costs[1];
        self.cumulative += costs[pick];
        let (played, centers) = if pick == 0 {
            (RoundingMode::Deterministic, det)
        } else {
            (RoundingMode::Randomized, rand)
        };
        Ok(CombinedPlacement {
            played,
            centers,
            cost: costs[pick],
            fractional_cost: frac.cost,
            expert_costs: costs,
        })
    }
}
