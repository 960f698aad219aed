//! End-to-end runs: build the space and stream from a config, drive a
//! learner, keep the regret ledger and write CSV / JSON / SVG outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integral::{Combiner, IntegralLearner, RoundingMode};
use crate::learner::{FractionalLearner, LearnerConfig};
use crate::metric::{CenterSet, ClientRound, MetricSpace, NormOrder};
use crate::oracle::{best_static_centers, binomial};
use crate::stream::{Stream, StreamSpec};

pub const CSV_HEADER: &str = "t,integral_cost,fractional_cost,avg_integral,avg_fractional,ratio";

/// Work budget (subsets x rounds x clients) under which the static
/// optimum is computed automatically.
pub const AUTO_STATIC_BUDGET: u128 = 200_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpec {
    Grid { half_width: f64, step: f64 },
    Uniform { n: usize },
    Points { points: Vec<[f64; 2]> },
    Matrix { dist: Vec<Vec<f64>> },
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricSpace> {
        match self {
            MetricSpec::Grid { half_width, step } => MetricSpace::grid(*half_width, *step),
            MetricSpec::Uniform { n } => MetricSpace::uniform(*n),
            MetricSpec::Points { points } => MetricSpace::from_points(points.clone()),
            MetricSpec::Matrix { dist } => MetricSpace::from_matrix(dist.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Det,
    Rand,
    Combiner,
    Frac,
}

impl LearnerKind {
    pub fn is_randomized(self) -> bool {
        matches!(self, LearnerKind::Rand | LearnerKind::Combiner)
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(LearnerKind::Det),
            "rand" => Ok(LearnerKind::Rand),
            "combiner" => Ok(LearnerKind::Combiner),
            "frac" => Ok(LearnerKind::Frac),
            _ => Err(Error::Config(format!(
                "unknown learner {s:?} (det, rand, combiner, frac)"
            ))),
        }
    }
}

fn default_p() -> NormOrder {
    NormOrder::Infinity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub stream: StreamSpec,
    pub learner: LearnerKind,
    pub k: usize,
    #[serde(default = "default_p")]
    pub p: NormOrder,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    /// Client cap `r`; defaults to the stream's round size.
    #[serde(default)]
    pub max_clients: Option<usize>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub doubling: bool,
    /// `None` computes the static optimum when it is cheap enough.
    #[serde(default)]
    pub static_opt: Option<bool>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.stream.clients_per_round > self.max_clients() {
            return Err(Error::Config(format!(
                "stream emits {} clients per round, cap is {}",
                self.stream.clients_per_round,
                self.max_clients()
            )));
        }
        Ok(())
    }

    pub fn max_clients(&self) -> usize {
        self.max_clients.unwrap_or_else(|| self.stream.max_clients()).max(1)
    }
}

/// One ledger row.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub integral_cost: f64,
    pub fractional_cost: f64,
    pub placement: CenterSet,
    pub clients: ClientRound,
}

/// Per-round costs with running sums. The ratio of time averages is only
/// defined once the fractional average is positive.
#[derive(Debug, Clone, Default)]
pub struct RegretLedger {
    records: Vec<RoundRecord>,
    sum_integral: f64,
    sum_fractional: f64,
    ratios: Vec<Option<f64>>,
}

impl RegretLedger {
    pub fn push(&mut self, record: RoundRecord) {
        self.sum_integral += record.integral_cost;
        self.sum_fractional += record.fractional_cost;
        self.records.push(record);
        self.ratios.push(self.ratio());
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sum_integral(&self) -> f64 {
        self.sum_integral
    }

    pub fn sum_fractional(&self) -> f64 {
        self.sum_fractional
    }

    pub fn avg_integral(&self) -> f64 {
        self.sum_integral / self.records.len().max(1) as f64
    }

    pub fn avg_fractional(&self) -> f64 {
        self.sum_fractional / self.records.len().max(1) as f64
    }

    pub fn ratio(&self) -> Option<f64> {
        let frac = self.avg_fractional();
        (frac > 0.0).then(|| self.avg_integral() / frac)
    }

    /// Running ratio after each round.
    pub fn ratio_history(&self) -> &[Option<f64>] {
        &self.ratios
    }

    pub fn rounds(&self) -> Vec<ClientRound> {
        self.records.iter().map(|r| r.clients.clone()).collect()
    }

    /// Recomputes the running sums from the records.
    pub fn check_sums(&self) -> Result<()> {
        let si: f64 = self.records.iter().map(|r| r.integral_cost).sum();
        let sf: f64 = self.records.iter().map(|r| r.fractional_cost).sum();
        if !crate::fractional::close(si, self.sum_integral)
            || !crate::fractional::close(sf, self.sum_fractional)
        {
            return Err(Error::Config("ledger sums disagree with its records".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        let (mut si, mut sf) = (0.0, 0.0);
        for r in &self.records {
            si += r.integral_cost;
            sf += r.fractional_cost;
            let (ai, af) = (si / r.t as f64, sf / r.t as f64);
            let ratio = if af > 0.0 { fmt12(ai / af) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t,
                fmt12(r.integral_cost),
                fmt12(r.fractional_cost),
                fmt12(ai),
                fmt12(af),
                ratio
            );
        }
        out
    }
}

/// Fixed-point decimal with 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (11 - mag).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

/// Parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: usize,
    pub integral_cost: f64,
    pub fractional_cost: f64,
    pub avg_integral: f64,
    pub avg_fractional: f64,
    pub ratio: Option<f64>,
}

/// Reads a ledger CSV and checks that the running columns agree with the
/// per-round columns (to the printed precision).
pub fn load_ledger_csv(text: &str) -> Result<Vec<CsvRow>> {
    let bad = |line: usize, msg: String| Error::Config(format!("ledger csv line {line}: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut rows = Vec::new();
    let (mut si, mut sf) = (0.0, 0.0);
    for (no, line) in lines.enumerate() {
        let no = no + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad(no, format!("{} columns", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(no, format!("bad number {s:?}")));
        let row = CsvRow {
            t: cols[0].parse().map_err(|_| bad(no, "bad round index".into()))?,
            integral_cost: num(cols[1])?,
            fractional_cost: num(cols[2])?,
            avg_integral: num(cols[3])?,
            avg_fractional: num(cols[4])?,
            ratio: if cols[5].is_empty() { None } else { Some(num(cols[5])?) },
        };
        if row.t != rows.len() + 1 {
            return Err(bad(no, format!("round {} out of sequence", row.t)));
        }
        si += row.integral_cost;
        sf += row.fractional_cost;
        let agree = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12);
        if !agree(si / row.t as f64, row.avg_integral) || !agree(sf / row.t as f64, row.avg_fractional)
        {
            return Err(bad(no, "running averages disagree with per-round costs".into()));
        }
        match row.ratio {
            Some(r) if !agree(r, row.avg_integral / row.avg_fractional) => {
                return Err(bad(no, "ratio disagrees with averages".into()));
            }
            None if row.avg_fractional > 0.0 => {
                return Err(bad(no, "missing ratio".into()));
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticOptimum {
    pub centers: Vec<usize>,
    pub cost: f64,
    /// Learner cumulative cost over the static optimum's.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub learner: LearnerKind,
    pub k: usize,
    pub p: NormOrder,
    pub horizon: usize,
    pub seed: u64,
    pub n: usize,
    pub diameter: f64,
    pub step_size: f64,
    pub final_placement: Vec<usize>,
    pub final_placement_coords: Option<Vec<[f64; 2]>>,
    pub cumulative_integral: f64,
    pub cumulative_fractional: f64,
    pub final_ratio: Option<f64>,
    pub static_optimum: Option<StaticOptimum>,
    /// Deterministic and randomized expert totals (combiner runs only).
    pub expert_costs: Option<[f64; 2]>,
    pub wall_time_secs: f64,
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub svg_path: Option<PathBuf>,
}

enum Driver {
    Frac(FractionalLearner),
    Integral(IntegralLearner),
    Combiner(Combiner),
}

/// Runs a configured experiment and returns the report with its ledger.
/// Outputs are written when `out_dir` is set.
pub fn run_experiment(cfg: &RunConfig) -> Result<(RunReport, RegretLedger)> {
    cfg.validate()?;
    let start = Instant::now();
    let space = cfg.metric.build()?;
    let mut lcfg = LearnerConfig::new(&space, cfg.k, cfg.horizon, cfg.max_clients());
    lcfg.step = cfg.step;
    lcfg.doubling = cfg.doubling;
    let mut driver = match cfg.learner {
        LearnerKind::Frac => Driver::Frac(FractionalLearner::new(lcfg)?),
        LearnerKind::Det => Driver::Integral(IntegralLearner::deterministic(lcfg)?),
        LearnerKind::Rand => Driver::Integral(IntegralLearner::new(
            lcfg,
            RoundingMode::Randomized,
            cfg.seed,
        )?),
        LearnerKind::Combiner => Driver::Combiner(Combiner::new(lcfg, cfg.seed)?),
    };
    let mut stream = Stream::new(cfg.stream.clone(), &space, cfg.horizon, cfg.seed)?;
    let mut ledger = RegretLedger::default();

    for t in 1..=cfg.horizon {
        let record = match &mut driver {
            Driver::Frac(l) => {
                let clients = stream.next_round(&space, t, None)?;
                let step = l.step(&space, &clients, cfg.p)?;
                RoundRecord {
                    t,
                    integral_cost: step.cost,
                    fractional_cost: step.cost,
                    placement: CenterSet::default(),
                    clients,
                }
            }
            Driver::Integral(l) => {
                let committed = l.placement(&space)?;
                let clients = stream.next_round(&space, t, Some(&committed))?;
                let out = l.step(&space, &clients, cfg.p)?;
                RoundRecord {
                    t,
                    integral_cost: out.cost,
                    fractional_cost: out.fractional_cost,
                    placement: out.centers,
                    clients,
                }
            }
            Driver::Combiner(c) => {
                let ([det, rand], pick) = c.placements(&space)?;
                let committed = if pick == 0 { det } else { rand };
                let clients = stream.next_round(&space, t, Some(&committed))?;
                let out = c.step(&space, &clients, cfg.p)?;
                RoundRecord {
                    t,
                    integral_cost: out.cost,
                    fractional_cost: out.fractional_cost,
                    placement: out.centers,
                    clients,
                }
            }
        };
        ledger.push(record);
    }
    ledger.check_sums()?;

    let static_optimum = match cfg.static_opt {
        Some(false) => None,
        forced => {
            let k = cfg.k.min(space.n());
            let work = binomial(space.n(), k)
                .saturating_mul(cfg.horizon as u128)
                .saturating_mul(cfg.max_clients() as u128);
            if forced == Some(true) || work <= AUTO_STATIC_BUDGET {
                let (centers, cost) = best_static_centers(&space, &ledger.rounds(), k, cfg.p)?;
                Some(StaticOptimum {
                    centers: centers.as_slice().to_vec(),
                    cost,
                    ratio: ledger.sum_integral() / cost,
                })
            } else {
                None
            }
        }
    };

    let (step_size, expert_costs) = match &driver {
        Driver::Frac(l) => (l.step_size(), None),
        Driver::Integral(l) => (l.fractional().step_size(), None),
        Driver::Combiner(c) => (c.fractional().step_size(), Some(c.expert_costs())),
    };
    let final_placement = ledger
        .records()
        .last()
        .map(|r| r.placement.as_slice().to_vec())
        .unwrap_or_default();
    let final_placement_coords = space
        .coords()
        .map(|c| final_placement.iter().map(|&i| c[i]).collect());

    let mut report = RunReport {
        learner: cfg.learner,
        k: cfg.k,
        p: cfg.p,
        horizon: cfg.horizon,
        seed: cfg.seed,
        n: space.n(),
        diameter: space.diameter(),
        step_size,
        final_placement,
        final_placement_coords,
        cumulative_integral: ledger.sum_integral(),
        cumulative_fractional: ledger.sum_fractional(),
        final_ratio: ledger.ratio(),
        static_optimum,
        expert_costs,
        wall_time_secs: 0.0,
        csv_path: None,
        summary_path: None,
        svg_path: None,
    };

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("ledger.csv");
        std::fs::write(&csv, ledger.to_csv()).map_err(|e| Error::io(&csv, e))?;
        report.csv_path = Some(csv);
        if cfg.svg {
            let svg = dir.join("centers.svg");
            std::fs::write(&svg, render_svg(&space, &ledger)).map_err(|e| Error::io(&svg, e))?;
            report.svg_path = Some(svg);
        }
        report.summary_path = Some(dir.join("summary.json"));
    }
    report.wall_time_secs = start.elapsed().as_secs_f64();
    if let Some(path) = &report.summary_path {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok((report, ledger))
}

/// Runs independent configs on separate threads; results keep input order.
pub fn run_batch(configs: &[RunConfig]) -> Vec<Result<(RunReport, RegretLedger)>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run_experiment(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    })
}

/// Scatter of the space, the clients of the last tenth of the run (area
/// proportional to visits) and the final centers.
pub fn render_svg(space: &MetricSpace, ledger: &RegretLedger) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 20.0;
    let pos: Vec<[f64; 2]> = match space.coords() {
        Some(c) => c.to_vec(),
        None => (0..space.n())
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / space.n() as f64;
                [a.cos(), a.sin()]
            })
            .collect(),
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pos {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let map = |p: [f64; 2]| {
        (
            PAD + (p[0] - lo[0]) / span * (SIZE - 2.0 * PAD),
            SIZE - PAD - (p[1] - lo[1]) / span * (SIZE - 2.0 * PAD),
        )
    };

    let mut visits = vec![0usize; space.n()];
    let tail = ledger.len() / 10;
    for r in &ledger.records()[ledger.len() - tail.max(1).min(ledger.len())..] {
        for j in r.clients.iter() {
            visits[j] += 1;
        }
    }
    let max_visits = visits.iter().copied().max().unwrap_or(0).max(1) as f64;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for &p in &pos {
        let (x, y) = map(p);
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="1" fill="#ccc"/>"##);
    }
    for (i, &v) in visits.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let (x, y) = map(pos[i]);
        let r = 1.0 + 5.0 * (v as f64 / max_visits).sqrt();
        let _ = writeln!(
            out,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="#4a7bd0" fill-opacity="0.5"/>"##
        );
    }
    if let Some(last) = ledger.records().last() {
        for c in last.placement.iter() {
            let (x, y) = map(pos[c]);
            let _ = writeln!(
                out,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="#d03030" stroke="black"/>"##
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::StreamKind;

    fn small_config(learner: LearnerKind) -> RunConfig {
        RunConfig {
            metric: MetricSpec::Grid {
                half_width: 1.0,
                step: 0.5,
            },
            stream: StreamSpec::new(StreamKind::UniformSquare, 5),
            learner,
            k: 2,
            p: NormOrder::Infinity,
            horizon: 200,
            seed: 3,
            max_clients: None,
            step: None,
            doubling: false,
            static_opt: None,
            out_dir: None,
            svg: false,
        }
    }

    #[test]
    fn fmt12_significant_digits() {
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(1.0), "1.00000000000");
        assert_eq!(fmt12(123.456), "123.456000000");
        assert_eq!(fmt12(0.000123456789012345), "0.000123456789012");
        assert_eq!(fmt12(2.5e13), "25000000000000");
    }

    #[test]
    fn ledger_ratio_waits_for_positive_fractional() {
        let mut l = RegretLedger::default();
        l.push(RoundRecord {
            t: 1,
            integral_cost: 0.0,
            fractional_cost: 0.0,
            placement: CenterSet::new(vec![0]),
            clients: ClientRound::default(),
        });
        assert_eq!(l.ratio(), None);
        l.push(RoundRecord {
            t: 2,
            integral_cost: 3.0,
            fractional_cost: 1.0,
            placement: CenterSet::new(vec![0]),
            clients: ClientRound::default(),
        });
        assert_eq!(l.ratio(), Some(3.0));
        let rows = load_ledger_csv(&l.to_csv()).unwrap();
        assert_eq!(rows[0].ratio, None);
        assert_eq!(rows[1].ratio, Some(3.0));
    }

    #[test]
    fn csv_tampering_detected() {
        let (_, ledger) = run_experiment(&small_config(LearnerKind::Det)).unwrap();
        let csv = ledger.to_csv();
        assert_eq!(load_ledger_csv(&csv).unwrap().len(), 200);
        let mut lines: Vec<String> = csv.lines().map(String::from).collect();
        let mut cols: Vec<String> = lines[5].split(',').map(String::from).collect();
        cols[1] = "99".into();
        lines[5] = cols.join(",");
        assert!(load_ledger_csv(&lines.join("\n")).is_err());
    }

    #[test]
    fn every_learner_runs() {
        for kind in [
            LearnerKind::Det,
            LearnerKind::Rand,
            LearnerKind::Combiner,
            LearnerKind::Frac,
        ] {
            let (report, ledger) = run_experiment(&small_config(kind)).unwrap();
            assert_eq!(ledger.len(), 200);
            assert!(report.static_optimum.is_some());
            if kind == LearnerKind::Det {
                assert!(report.final_placement.len() <= 2);
            }
            if matches!(kind, LearnerKind::Rand | LearnerKind::Combiner) {
                assert_eq!(report.final_placement.len(), 2);
            }
        }
    }

    #[test]
    fn config_json_roundtrip_and_defaults() {
        let text = r#"{
            "metric": {"kind": "uniform", "n": 3},
            "stream": {"kind": "lower-bound", "clients_per_round": 1},
            "learner": "det",
            "k": 2,
            "horizon": 10
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.p, NormOrder::Infinity);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.max_clients(), 1);
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert!(RunConfig::from_json(r#"{"learner": "det"}"#).is_err());
    }

    #[test]
    fn writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(LearnerKind::Det);
        cfg.out_dir = Some(dir.path().to_path_buf());
        cfg.svg = true;
        let (report, _) = run_experiment(&cfg).unwrap();
        let csv = std::fs::read_to_string(report.csv_path.unwrap()).unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        let svg = std::fs::read_to_string(report.svg_path.unwrap()).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("#d03030"));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(report.summary_path.unwrap()).unwrap())
                .unwrap();
        assert_eq!(summary["k"], 2);
    }

    #[test]
    fn batch_keeps_order() {
        let mut a = small_config(LearnerKind::Det);
        a.horizon = 20;
        let mut b = a.clone();
        b.k = 1;
        let out = run_batch(&[a, b]);
        assert_eq!(out[0].as_ref().unwrap().0.k, 2);
        assert_eq!(out[1].as_ref().unwrap().0.k, 1);
    }
}
