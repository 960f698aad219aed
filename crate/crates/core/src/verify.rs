//! Randomized property checks for every provable guarantee, sized so the
//! whole suite runs at desk scale. Each check returns the measured
//! quantities; [`run_suite`] turns them into pass/fail lines.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fractional::{dual_certificate, fractional_cost, subgradient, FractionalOpening, TOL};
use crate::harness::{run_experiment, LearnerKind, MetricSpec, RunConfig};
use crate::integral::IntegralLearner;
use crate::learner::{FractionalLearner, LearnerConfig};
use crate::metric::{connection_cost, CenterSet, ClientRound, MetricSpace, NormOrder};
use crate::oracle::{best_static_centers, monte_carlo_ratio};
use crate::rounding::{round_deterministic, round_randomized};
use crate::stream::{StreamKind, StreamSpec};

pub const NORMS: [NormOrder; 4] = [
    NormOrder::Finite(1.0),
    NormOrder::Finite(2.0),
    NormOrder::Finite(7.0),
    NormOrder::Infinity,
];

/// Random planar space: points in the unit square, sometimes snapped to a
/// coarse lattice (distance ties) or placed around a few clusters, and
/// sometimes the uniform metric instead.
pub fn random_space<R: Rng>(rng: &mut R, n: usize) -> MetricSpace {
    match rng.random_range(0..6) {
        0 if n >= 2 => MetricSpace::uniform(n).expect("n >= 2"),
        1 => {
            let pts = (0..n)
                .map(|_| {
                    [
                        rng.random_range(0..5) as f64 * 0.25,
                        rng.random_range(0..5) as f64 * 0.25,
                    ]
                })
                .collect::<Vec<_>>();
            // lattice snapping may repeat points; nudge repeats apart
            let pts = pts
                .iter()
                .enumerate()
                .map(|(i, p)| [p[0] + 1e-3 * i as f64, p[1]])
                .collect();
            MetricSpace::from_points(pts).expect("finite points")
        }
        2 => {
            let clusters = rng.random_range(1..=3);
            let centers: Vec<[f64; 2]> = (0..clusters)
                .map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0])
                .collect();
            let pts = (0..n)
                .map(|i| {
                    let c = centers[i % clusters];
                    [c[0] + 0.1 * rng.random::<f64>(), c[1] + 0.1 * rng.random::<f64>()]
                })
                .collect();
            MetricSpace::from_points(pts).expect("finite points")
        }
        _ => MetricSpace::from_points(
            (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect(),
        )
        .expect("finite points"),
    }
}

/// Random point of the scaled simplex: sparse exponential weights,
/// integral openings, or fully concentrated mass.
pub fn random_opening<R: Rng>(rng: &mut R, n: usize, k: usize) -> FractionalOpening {
    match rng.random_range(0..8) {
        0 => {
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.random_range(i..n);
                idx.swap(i, j);
            }
            FractionalOpening::indicator(n, &CenterSet::new(idx[..k].to_vec())).expect("k <= n")
        }
        1 => {
            let mut y = vec![0.0; n];
            y[rng.random_range(0..n)] = k as f64;
            FractionalOpening::new(y, k).expect("valid")
        }
        2 => FractionalOpening::uniform(n, k).expect("k <= n"),
        _ => {
            let sparsity = rng.random::<f64>() * 0.6;
            let mut w: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random::<f64>() < sparsity {
                        0.0
                    } else {
                        -rng.random::<f64>().max(1e-12).ln()
                    }
                })
                .collect();
            if w.iter().all(|&v| v == 0.0) {
                w[rng.random_range(0..n)] = 1.0;
            }
            let total: f64 = w.iter().sum();
            let y = w.into_iter().map(|v| v * k as f64 / total).collect();
            FractionalOpening::new(y, k).expect("normalized")
        }
    }
}

pub fn random_round<R: Rng>(rng: &mut R, n: usize, max_len: usize) -> ClientRound {
    let len = rng.random_range(0..=max_len);
    ClientRound::new((0..len).map(|_| rng.random_range(0..n)).collect())
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Default)]
pub struct DualityStats {
    pub instances: usize,
    pub max_rel_gap: f64,
    pub invariant_violations: usize,
    pub first_violation: Option<String>,
}

/// Primal and dual values of the combinatorial certificate on random
/// instances with `n <= 30`, `k <= 5`, `|R| <= 10`.
pub fn strong_duality(instances: usize, seed: u64) -> Result<DualityStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = DualityStats {
        instances,
        ..Default::default()
    };
    for _ in 0..instances {
        let n = rng.random_range(2..=30);
        let k = rng.random_range(1..=5.min(n));
        let space = random_space(&mut rng, n);
        let y = random_opening(&mut rng, n, k);
        let round = random_round(&mut rng, n, 10);
        let p = NORMS[rng.random_range(0..NORMS.len())];
        let cert = dual_certificate(&space, &y, &round, p)?;
        let primal = p.norm(&cert.beta);
        let dual = cert.dual_objective(y.values());
        stats.max_rel_gap = stats.max_rel_gap.max(rel_gap(primal, dual));
        let v = cert.violations(&space, &y, p);
        if !v.is_empty() {
            stats.invariant_violations += 1;
            stats.first_violation.get_or_insert_with(|| v.join("; "));
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default)]
pub struct SubgradientStats {
    pub tuples: usize,
    /// Smallest `FC(y') - FC(y) - g.(y' - y)` seen.
    pub min_slack: f64,
    /// Largest `|k_ij| / D` seen.
    pub max_k_over_diameter: f64,
}

pub fn subgradient_inequality(tuples: usize, seed: u64) -> Result<SubgradientStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SubgradientStats {
        tuples,
        min_slack: f64::INFINITY,
        max_k_over_diameter: 0.0,
    };
    for _ in 0..tuples {
        let n = rng.random_range(2..=30);
        let k = rng.random_range(1..=5.min(n));
        let space = random_space(&mut rng, n);
        let y = random_opening(&mut rng, n, k);
        let y2 = random_opening(&mut rng, n, k);
        let round = random_round(&mut rng, n, 10);
        let p = NORMS[rng.random_range(0..NORMS.len())];
        let cert = dual_certificate(&space, &y, &round, p)?;
        let g = subgradient(&cert);
        let fc2 = fractional_cost(&space, &y2, &round, p)?;
        let slack = fc2 - cert.objective - g.dot_diff(y2.values(), y.values());
        stats.min_slack = stats.min_slack.min(slack);
        stats.max_k_over_diameter = stats
            .max_k_over_diameter
            .max(cert.max_abs_k() / space.diameter());
    }
    Ok(stats)
}

/// All multisets of `0..n` with sizes `1..=max_len`.
pub fn small_rounds(n: usize, max_len: usize) -> Vec<ClientRound> {
    fn rec(n: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<ClientRound>) {
        if !cur.is_empty() {
            out.push(ClientRound::new(cur.clone()));
        }
        if left == 0 {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, max_len, &mut Vec::new(), &mut out);
    out
}

/// Openings the deterministic rounding finds hardest: all mass on one
/// point, spread evenly, or split across `k + 1` clusters.
pub fn adversarial_opening<R: Rng>(rng: &mut R, space: &MetricSpace, k: usize) -> FractionalOpening {
    let n = space.n();
    match rng.random_range(0..3) {
        0 => {
            let mut y = vec![0.0; n];
            y[rng.random_range(0..n)] = k as f64;
            FractionalOpening::new(y, k).expect("valid")
        }
        1 => FractionalOpening::uniform(n, k).expect("k <= n"),
        _ => {
            let groups = (k + 1).min(n);
            let mut y = vec![0.0; n];
            let per = k as f64 / groups as f64;
            for g in 0..groups {
                let members: Vec<usize> = (0..n).filter(|i| i % groups == g).collect();
                for &i in &members {
                    y[i] = per / members.len() as f64;
                }
            }
            FractionalOpening::new(y, k).expect("valid")
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DeterministicRoundingStats {
    pub openings: usize,
    pub rounds_checked: usize,
    /// Largest `|F_y| - k`.
    pub max_excess_centers: i64,
    /// Largest `C_R(F_y) - 6k FC_R(y)`.
    pub max_bound_excess: f64,
}

pub fn deterministic_rounding(openings: usize, seed: u64) -> Result<DeterministicRoundingStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = DeterministicRoundingStats {
        openings,
        max_excess_centers: i64::MIN,
        max_bound_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for s in 0..openings {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..=4.min(n));
        let space = random_space(&mut rng, n);
        let y = if s % 4 == 0 {
            adversarial_opening(&mut rng, &space, k)
        } else {
            random_opening(&mut rng, n, k)
        };
        let f = round_deterministic(&space, &y)?;
        stats.max_excess_centers = stats.max_excess_centers.max(f.len() as i64 - k as i64);
        let mut rounds = small_rounds(n, 3);
        rounds.push(ClientRound::new((0..n).collect()));
        for r in &rounds {
            for p in NORMS {
                let c = connection_cost(&space, r, &f, p)?;
                let fc = fractional_cost(&space, &y, r, p)?;
                stats.max_bound_excess = stats.max_bound_excess.max(c - 6.0 * k as f64 * fc);
                stats.rounds_checked += 1;
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default)]
pub struct RandomizedRoundingStats {
    pub fixtures: usize,
    pub draws: usize,
    pub cardinality_failures: usize,
    /// Largest `mean - 4 FC - 3 se` over all fixtures and clients.
    pub max_margin: f64,
    /// Largest observed `mean / FC` where `FC > 0`.
    pub max_ratio: f64,
}

pub fn randomized_rounding(fixtures: usize, draws: usize, seed: u64) -> Result<RandomizedRoundingStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let failures = std::cell::Cell::new(0usize);
    let mut stats = RandomizedRoundingStats {
        fixtures,
        draws,
        max_margin: f64::NEG_INFINITY,
        ..Default::default()
    };
    for fx in 0..fixtures {
        let n = rng.random_range(3..=10);
        let k = rng.random_range(1..=4.min(n - 1));
        let space = random_space(&mut rng, n);
        let y = random_opening(&mut rng, n, k);
        let base = seed ^ ((fx as u64) << 32);
        for j in 0..n {
            let rounder = |s: &MetricSpace, y: &FractionalOpening, seed: u64| {
                let f = round_randomized(s, y, seed)?;
                if f.len() != y.k() {
                    failures.set(failures.get() + 1);
                }
                Ok(f)
            };
            let (mean, se) = monte_carlo_ratio(rounder, &space, &y, j, draws, base)?;
            let fc = fractional_cost(&space, &y, &ClientRound::new(vec![j]), NormOrder::Finite(1.0))?;
            stats.max_margin = stats.max_margin.max(mean - 4.0 * fc - 3.0 * se);
            if fc > 0.0 {
                stats.max_ratio = stats.max_ratio.max(mean / fc);
            }
        }
    }
    stats.cardinality_failures = failures.get();
    Ok(stats)
}

/// Client streams for the small regret experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallStream {
    /// `r` independent uniform points per round.
    Random,
    /// `r` independent clients per round: one of two hot points with
    /// probability 0.9, otherwise uniform.
    HotPair,
    /// Oblivious: alternates between two fixed client groups in blocks of
    /// growing length.
    Switching,
    /// Adaptive: `r` clients on the points with the least fractional mass.
    LeastMass,
}

impl SmallStream {
    pub const ALL: [SmallStream; 4] = [
        SmallStream::Random,
        SmallStream::HotPair,
        SmallStream::Switching,
        SmallStream::LeastMass,
    ];

    /// Whether the no-regret check requires `gap / sqrt(T)` to be
    /// non-increasing. On the hot-pair stream the gap is a clean
    /// `c sqrt(T)` burn-in whose ratio approaches `c` from below, so only
    /// boundedness and the tail gap are required there.
    pub fn monotone_required(self) -> bool {
        self != SmallStream::HotPair
    }

    pub fn name(self) -> &'static str {
        match self {
            SmallStream::Random => "random",
            SmallStream::HotPair => "hot-pair",
            SmallStream::Switching => "switching",
            SmallStream::LeastMass => "least-mass",
        }
    }

    /// Clients of round `t` given the learner's current opening `y`.
    pub fn next_round<R: Rng>(self, rng: &mut R, t: usize, y: &[f64], r: usize) -> ClientRound {
        let n = y.len();
        match self {
            SmallStream::Random => ClientRound::new((0..r).map(|_| rng.random_range(0..n)).collect()),
            SmallStream::HotPair => ClientRound::new(
                (0..r)
                    .map(|_| {
                        if rng.random::<f64>() < 0.9 {
                            [0, n / 2][rng.random_range(0..2)]
                        } else {
                            rng.random_range(0..n)
                        }
                    })
                    .collect(),
            ),
            SmallStream::Switching => {
                // block b covers rounds [b^2, (b+1)^2)
                let block = (t as f64).sqrt() as usize;
                let half = n / 2;
                let group: Vec<usize> = if block % 2 == 0 {
                    (0..half).collect()
                } else {
                    (half..n).collect()
                };
                ClientRound::new((0..r).map(|c| group[(t + c) % group.len()]).collect())
            }
            SmallStream::LeastMass => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
                ClientRound::new((0..r).map(|c| idx[c % n]).collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoRegretRun {
    pub stream: SmallStream,
    pub horizon: usize,
    pub fractional_total: f64,
    pub static_total: f64,
    /// `sum FC(y_t) - sum C(F*)`.
    pub gap: f64,
    pub gap_over_sqrt_t: f64,
    /// Per-round gap over the last quarter of the run.
    pub tail_gap: f64,
}

/// Runs the fractional learner on a fixed small instance against `stream`.
pub fn fractional_regret_run(
    space: &MetricSpace,
    k: usize,
    r: usize,
    stream: SmallStream,
    horizon: usize,
    p: NormOrder,
    seed: u64,
) -> Result<NoRegretRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = FractionalLearner::new(LearnerConfig::new(space, k, horizon, r))?;
    let mut rounds = Vec::with_capacity(horizon);
    let mut costs = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let round = stream.next_round(&mut rng, t, learner.opening().values(), r);
        costs.push(learner.step(space, &round, p)?.cost);
        rounds.push(round);
    }
    let (best, static_total) = best_static_centers(space, &rounds, k, p)?;
    let fractional_total: f64 = costs.iter().sum();
    let tail_start = horizon - horizon / 4;
    let mut tail = 0.0;
    for t in tail_start..horizon {
        tail += costs[t] - connection_cost(space, &rounds[t], &best, p)?;
    }
    let gap = fractional_total - static_total;
    Ok(NoRegretRun {
        stream,
        horizon,
        fractional_total,
        static_total,
        gap,
        gap_over_sqrt_t: gap / (horizon as f64).sqrt(),
        tail_gap: tail / (horizon - tail_start) as f64,
    })
}

/// Six fixed points in the unit square used by the small regret checks.
pub fn six_point_space() -> MetricSpace {
    MetricSpace::from_points(vec![
        [0.05, 0.10],
        [0.20, 0.85],
        [0.50, 0.45],
        [0.90, 0.15],
        [0.75, 0.95],
        [0.35, 0.05],
    ])
    .expect("finite points")
}

pub const NO_REGRET_HORIZONS: [usize; 3] = [1_000, 4_000, 16_000];

pub fn fractional_no_regret(seed: u64) -> Result<Vec<NoRegretRun>> {
    let space = six_point_space();
    let mut out = Vec::new();
    for stream in SmallStream::ALL {
        for &t in &NO_REGRET_HORIZONS {
            out.push(fractional_regret_run(&space, 2, 3, stream, t, NormOrder::Finite(2.0), seed)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DetRegretRun {
    pub label: String,
    pub n: usize,
    pub k: usize,
    pub diameter: f64,
    pub horizon: usize,
    pub learner_total: f64,
    pub static_total: f64,
    /// `6k OPT + 10 k D n sqrt(ln n T)`.
    pub bound: f64,
}

/// Deterministic learner against small enumerable instances.
pub fn deterministic_regret(seed: u64) -> Result<Vec<DetRegretRun>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 4_000;
    let mut out = Vec::new();
    for case in 0..12 {
        let n = rng.random_range(3..=8);
        let k = rng.random_range(1..=3.min(n - 1));
        let space = random_space(&mut rng, n);
        let r = rng.random_range(1..=4);
        let stream = SmallStream::ALL[case % SmallStream::ALL.len()];
        let p = NORMS[case % 4];
        let mut learner = IntegralLearner::deterministic(LearnerConfig::new(&space, k, horizon, r))?;
        let mut rounds = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let round = stream.next_round(&mut rng, t, learner.fractional().opening().values(), r);
            learner.step(&space, &round, p)?;
            rounds.push(round);
        }
        let (_, static_total) = best_static_centers(&space, &rounds, k, p)?;
        let d = space.diameter();
        let bound = 6.0 * k as f64 * static_total
            + 10.0 * k as f64 * d * n as f64 * ((n as f64).ln() * horizon as f64).sqrt();
        out.push(DetRegretRun {
            label: format!("{} n={n} k={k} r={r} p={p}", stream.name()),
            n,
            k,
            diameter: d,
            horizon,
            learner_total: learner.cumulative_cost(),
            static_total,
            bound,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LowerBoundRun {
    pub k: usize,
    pub horizon: usize,
    pub learner_total: f64,
    pub static_total: f64,
    pub ratio: f64,
}

/// Deterministic learner against the empty-slot adversary on the uniform
/// metric with `k + 1` points.
pub fn lower_bound(k: usize, horizon: usize) -> Result<LowerBoundRun> {
    let cfg = RunConfig {
        metric: MetricSpec::Uniform { n: k + 1 },
        stream: StreamSpec::new(StreamKind::LowerBound, 1),
        learner: LearnerKind::Det,
        k,
        p: NormOrder::Infinity,
        horizon,
        seed: 0,
        max_clients: Some(1),
        step: None,
        doubling: false,
        static_opt: Some(true),
        out_dir: None,
        svg: false,
    };
    let (report, ledger) = run_experiment(&cfg)?;
    let opt = report.static_optimum.expect("forced");
    Ok(LowerBoundRun {
        k,
        horizon,
        learner_total: ledger.sum_integral(),
        static_total: opt.cost,
        ratio: ledger.sum_integral() / opt.cost,
    })
}

/// Config for the planar experiments: 21 x 21 grid on `[-1, 1]^2`, 20
/// clients per round, `p = inf`.
pub fn planar_config(kind: StreamKind, learner: LearnerKind, k: usize, horizon: usize, seed: u64) -> RunConfig {
    RunConfig {
        metric: MetricSpec::Grid {
            half_width: 1.0,
            step: 0.1,
        },
        stream: StreamSpec::new(kind, 20),
        learner,
        k,
        p: NormOrder::Infinity,
        horizon,
        seed,
        max_clients: None,
        step: None,
        doubling: false,
        static_opt: Some(false),
        out_dir: None,
        svg: false,
    }
}

#[derive(Debug, Clone)]
pub struct PlanarRun {
    pub label: String,
    pub k: usize,
    /// Running ratio over the final quartile.
    pub final_quartile: Vec<f64>,
    pub final_ratio: f64,
    /// Least-squares slope of the final-quartile ratio per round.
    pub quartile_slope: f64,
    pub final_centers: Vec<[f64; 2]>,
}

pub fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        num += dx * (y - my);
        den += dx * dx;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn planar_run(kind: StreamKind, k: usize, horizon: usize, seed: u64) -> Result<PlanarRun> {
    let cfg = planar_config(kind.clone(), LearnerKind::Det, k, horizon, seed);
    let (report, ledger) = run_experiment(&cfg)?;
    let start = horizon - horizon / 4;
    let final_quartile: Vec<f64> = ledger.ratio_history()[start..]
        .iter()
        .map(|r| r.unwrap_or(f64::NAN))
        .collect();
    Ok(PlanarRun {
        label: format!("{kind:?} k={k}"),
        k,
        quartile_slope: least_squares_slope(&final_quartile),
        final_ratio: report.final_ratio.unwrap_or(f64::NAN),
        final_quartile,
        final_centers: report.final_placement_coords.unwrap_or_default(),
    })
}

/// Runs a config twice and compares the CSV bytes.
pub fn replay_identical(cfg: &RunConfig) -> Result<bool> {
    let (_, a) = run_experiment(cfg)?;
    let (_, b) = run_experiment(cfg)?;
    Ok(a.to_csv() == b.to_csv())
}

/// One line of suite output.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

/// Scale of the property suite: `full` uses the acceptance sizes, `quick`
/// shrinks sample counts and horizons for a fast smoke run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

/// Runs every property check and reports one line per property.
pub fn run_suite(scale: Scale, seed: u64) -> Vec<CheckLine> {
    let full = scale == Scale::Full;
    let mut lines = Vec::new();
    let mut check = |name: &str, f: &mut dyn FnMut() -> Result<(bool, String)>| {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        lines.push(CheckLine {
            name: name.to_string(),
            passed,
            detail,
            elapsed: start.elapsed(),
        });
    };

    let count = if full { 10_000 } else { 1_000 };
    check("strong duality", &mut || {
        let s = strong_duality(count, seed)?;
        Ok((
            s.max_rel_gap <= TOL && s.invariant_violations == 0,
            format!(
                "{} instances, max relative gap {:.3e}, {} with violations{}",
                s.instances,
                s.max_rel_gap,
                s.invariant_violations,
                s.first_violation.map(|v| format!(" ({v})")).unwrap_or_default()
            ),
        ))
    });
    check("subgradient inequality", &mut || {
        let s = subgradient_inequality(count, seed)?;
        Ok((
            s.min_slack >= -TOL && s.max_k_over_diameter <= 1.0 + TOL,
            format!(
                "{} tuples, min slack {:.3e}, max |k|/D {:.6}",
                s.tuples, s.min_slack, s.max_k_over_diameter
            ),
        ))
    });
    check("deterministic rounding", &mut || {
        let s = deterministic_rounding(if full { 1_000 } else { 200 }, seed)?;
        Ok((
            s.max_excess_centers <= 0 && s.max_bound_excess <= TOL,
            format!(
                "{} openings, {} rounds, max |F|-k {}, max C - 6k FC {:.3e}",
                s.openings, s.rounds_checked, s.max_excess_centers, s.max_bound_excess
            ),
        ))
    });
    check("randomized rounding", &mut || {
        let s = randomized_rounding(if full { 50 } else { 10 }, if full { 10_000 } else { 1_000 }, seed)?;
        Ok((
            s.cardinality_failures == 0 && s.max_margin <= 0.0,
            format!(
                "{} fixtures x {} draws, {} cardinality failures, max mean - 4FC - 3se {:.4}, max mean/FC {:.3}",
                s.fixtures, s.draws, s.cardinality_failures, s.max_margin, s.max_ratio
            ),
        ))
    });
    check("fractional no-regret", &mut || {
        let runs = fractional_no_regret(seed)?;
        let d = six_point_space().diameter();
        // k D n sqrt(ln n) with k = 2, n = 6
        let bound = 2.0 * d * 6.0 * 6f64.ln().sqrt();
        let mut ok = true;
        let mut parts = Vec::new();
        for chunk in runs.chunks(NO_REGRET_HORIZONS.len()) {
            let ratios: Vec<f64> = chunk.iter().map(|r| r.gap_over_sqrt_t).collect();
            let monotone = ratios.windows(2).all(|w| w[1] <= w[0]) || !chunk[0].stream.monotone_required();
            let bounded = ratios.iter().all(|&v| v <= bound);
            let tail = chunk.last().expect("three horizons").tail_gap;
            ok &= monotone && bounded && tail <= 1e-2 * d * 3.0;
            parts.push(format!(
                "{}: gap/sqrtT {:?}, tail {:.2e}",
                chunk[0].stream.name(),
                ratios.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
                tail
            ));
        }
        Ok((ok, parts.join("; ")))
    });
    check("deterministic learner 6k bound", &mut || {
        let runs = deterministic_regret(seed)?;
        let worst = runs
            .iter()
            .map(|r| r.learner_total / r.bound)
            .fold(0.0, f64::max);
        Ok((
            runs.iter().all(|r| r.learner_total <= r.bound),
            format!("{} instances, max cost / bound {worst:.4}", runs.len()),
        ))
    });
    check("lower bound adversary", &mut || {
        let r = lower_bound(2, if full { 50_000 } else { 5_000 })?;
        Ok((
            r.ratio >= 2.9,
            format!(
                "T = {}, learner {}, static {}, ratio {:.4}",
                r.horizon, r.learner_total, r.static_total, r.ratio
            ),
        ))
    });
    let t = if full { 10_000 } else { 1_000 };
    let square: Result<Vec<PlanarRun>> = std::thread::scope(|s| {
        let handles: Vec<_> = [2, 3, 8]
            .map(|k| s.spawn(move || planar_run(StreamKind::UniformSquare, k, t, seed)))
            .into();
        handles.into_iter().map(|h| h.join().expect("planar run panicked")).collect()
    });
    check("uniform square ratio below 6k", &mut || {
        let runs = match &square {
            Ok(runs) => runs,
            Err(e) => return Ok((false, format!("error: {e}"))),
        };
        let mut ok = true;
        let mut parts = Vec::new();
        for run in runs {
            let max = run.final_quartile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ok &= max < 6.0 * run.k as f64;
            parts.push(format!("k={}: final {:.4}, quartile max {max:.4}", run.k, run.final_ratio));
        }
        Ok((ok, parts.join("; ")))
    });
    check("uniform square ratio decreasing over final quartile", &mut || {
        let runs = match &square {
            Ok(runs) => runs,
            Err(e) => return Ok((false, format!("error: {e}"))),
        };
        let parts: Vec<String> = runs
            .iter()
            .map(|r| format!("k={}: slope {:.2e}", r.k, r.quartile_slope))
            .collect();
        Ok((runs.iter().all(|r| r.quartile_slope < 0.0), parts.join("; ")))
    });
    check("moving disk centers", &mut || {
        let mut ok = true;
        let mut parts = Vec::new();
        for k in [1, 2, 4, 8] {
            let run = planar_run(StreamKind::MovingDisk, k, t, seed)?;
            let far = run
                .final_centers
                .iter()
                .map(|c| c[0].hypot(c[1]))
                .fold(0.0, f64::max);
            ok &= far <= 1.35;
            parts.push(format!("k={k}: {} centers, max radius {far:.3}", run.final_centers.len()));
        }
        Ok((ok, parts.join("; ")))
    });
    check("deterministic replay", &mut || {
        let mut ok = true;
        for learner in [LearnerKind::Det, LearnerKind::Rand, LearnerKind::Combiner] {
            let cfg = planar_config(StreamKind::GaussianMixture, learner, 3, if full { 2_000 } else { 300 }, seed);
            ok &= replay_identical(&cfg)?;
        }
        Ok((ok, "det, rand and combiner runs reproduce byte-identical CSV".into()))
    });
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_round_counts() {
        // multisets of size 1..=3 over 4 points: 4 + 10 + 20
        assert_eq!(small_rounds(4, 3).len(), 34);
        assert_eq!(small_rounds(1, 2).len(), 2);
    }

    #[test]
    fn slope_sign() {
        assert!(least_squares_slope(&[3.0, 2.0, 1.0]) < 0.0);
        assert_eq!(least_squares_slope(&[1.0, 1.0]), 0.0);
    }

    #[test]
    fn random_openings_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(2..=12);
            let k = rng.random_range(1..=n.min(4));
            let y = random_opening(&mut rng, n, k);
            assert!(FractionalOpening::new(y.values().to_vec(), k).is_ok());
        }
    }
}
