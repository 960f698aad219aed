//! Client streams: the planar distributions used in the experiments, the
//! placement-reactive lower-bound adversary and file replay.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, ClientRound, MetricSpace};

pub const DISK_RADIUS: f64 = 0.3;
pub const ELLIPSE_AXES: (f64, f64) = (1.2, 0.6);
pub const MIXTURE_MEANS: [[f64; 2]; 2] = [[-0.7, 0.7], [0.7, -0.7]];
pub const MIXTURE_VARIANCE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamKind {
    /// Uniform on `[-1, 1]^2`.
    UniformSquare,
    /// Uniform on a disk of radius 0.3 whose center runs once around the
    /// unit circle over the horizon.
    MovingDisk,
    /// Each client orbits the ellipse `(x / 1.2)^2 + (y / 0.6)^2 = 1` with
    /// its own frequency and phase.
    EllipseMovers,
    /// Three quarters of the clients around `(-0.7, 0.7)`, the rest around
    /// `(0.7, -0.7)`, covariance `0.3 I`, clamped to the square.
    GaussianMixture,
    /// One client at the smallest index the learner left empty.
    LowerBound,
    /// Rounds read from a file.
    ReplayFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    #[serde(flatten)]
    pub kind: StreamKind,
    #[serde(default = "default_clients")]
    pub clients_per_round: usize,
}

fn default_clients() -> usize {
    20
}

impl StreamSpec {
    pub fn new(kind: StreamKind, clients_per_round: usize) -> Self {
        Self {
            kind,
            clients_per_round,
        }
    }

    pub fn needs_coordinates(&self) -> bool {
        matches!(
            self.kind,
            StreamKind::UniformSquare
                | StreamKind::MovingDisk
                | StreamKind::EllipseMovers
                | StreamKind::GaussianMixture
        )
    }

    /// Largest round this stream can emit.
    pub fn max_clients(&self) -> usize {
        match self.kind {
            StreamKind::LowerBound => 1,
            _ => self.clients_per_round,
        }
    }
}

/// Seed-deterministic client generator, stepped one round at a time.
#[derive(Debug)]
pub struct Stream {
    spec: StreamSpec,
    horizon: usize,
    rng: ChaCha8Rng,
    movers: Vec<(f64, f64)>,
    replay: Vec<ClientRound>,
    last_points: Vec<[f64; 2]>,
}

impl Stream {
    pub fn new(spec: StreamSpec, space: &MetricSpace, horizon: usize, seed: u64) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::InvalidStream("horizon must be at least 1".into()));
        }
        if spec.needs_coordinates() && space.coords().is_none() {
            return Err(Error::InvalidStream(
                "planar streams need a metric space with coordinates".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let movers = match spec.kind {
            StreamKind::EllipseMovers => (0..spec.clients_per_round)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect(),
            _ => Vec::new(),
        };
        let replay = match &spec.kind {
            StreamKind::ReplayFile { path } => {
                let rounds = read_replay(path)?;
                for (t, r) in rounds.iter().enumerate() {
                    r.check(space).map_err(|e| Error::Parse {
                        path: path.clone(),
                        line: t + 1,
                        msg: e.to_string(),
                    })?;
                }
                rounds
            }
            _ => Vec::new(),
        };
        Ok(Self {
            spec,
            horizon,
            rng,
            movers,
            replay,
            last_points: Vec::new(),
        })
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }

    /// Raw planar positions of the last generated round, before snapping.
    pub fn last_points(&self) -> &[[f64; 2]] {
        &self.last_points
    }

    /// Rounds available from a replay file.
    pub fn replay_len(&self) -> Option<usize> {
        matches!(self.spec.kind, StreamKind::ReplayFile { .. }).then_some(self.replay.len())
    }

    /// Clients for round `t` (1-based). `placement` is the learner's
    /// committed set and is required by the lower-bound adversary.
    pub fn next_round(
        &mut self,
        space: &MetricSpace,
        t: usize,
        placement: Option<&CenterSet>,
    ) -> Result<ClientRound> {
        if t < 1 || t > self.horizon {
            return Err(Error::InvalidStream(format!(
                "round {t} outside 1..={}",
                self.horizon
            )));
        }
        let m = self.spec.clients_per_round;
        let points: Vec<[f64; 2]> = match &self.spec.kind {
            StreamKind::UniformSquare => (0..m)
                .map(|_| {
                    [
                        self.rng.random_range(-1.0..=1.0),
                        self.rng.random_range(-1.0..=1.0),
                    ]
                })
                .collect(),
            StreamKind::MovingDisk => {
                let c = disk_center(t, self.horizon);
                (0..m)
                    .map(|_| {
                        let r = DISK_RADIUS * self.rng.random::<f64>().sqrt();
                        let a = 2.0 * PI * self.rng.random::<f64>();
                        clamp_square([c[0] + r * a.cos(), c[1] + r * a.sin()])
                    })
                    .collect()
            }
            StreamKind::EllipseMovers => self
                .movers
                .iter()
                .map(|&(f, theta)| ellipse_position(f, theta, t))
                .collect(),
            StreamKind::GaussianMixture => {
                let sd = MIXTURE_VARIANCE.sqrt();
                let normal = Normal::new(0.0, sd).expect("positive deviation");
                let first = (m * 3).div_ceil(4);
                (0..m)
                    .map(|c| {
                        let mu = MIXTURE_MEANS[usize::from(c >= first)];
                        clamp_square([
                            mu[0] + normal.sample(&mut self.rng),
                            mu[1] + normal.sample(&mut self.rng),
                        ])
                    })
                    .collect()
            }
            StreamKind::LowerBound => {
                let placement = placement.ok_or_else(|| {
                    Error::InvalidStream("lower-bound adversary needs the learner placement".into())
                })?;
                let empty = (0..space.n()).find(|&i| !placement.contains(i)).ok_or_else(|| {
                    Error::InvalidStream("placement covers every point; no empty slot".into())
                })?;
                self.last_points.clear();
                return Ok(ClientRound::new(vec![empty]));
            }
            StreamKind::ReplayFile { path } => {
                self.last_points.clear();
                return self.replay.get(t - 1).cloned().ok_or_else(|| {
                    Error::InvalidStream(format!(
                        "{} holds {} rounds, round {t} requested",
                        path.display(),
                        self.replay.len()
                    ))
                });
            }
        };
        let members = points
            .iter()
            .map(|&pt| space.snap(pt).expect("checked coordinates"))
            .collect();
        self.last_points = points;
        Ok(ClientRound::new(members))
    }
}

/// `(sin(2 pi t / T), cos(2 pi t / T))`.
pub fn disk_center(t: usize, horizon: usize) -> [f64; 2] {
    let a = 2.0 * PI * t as f64 / horizon as f64;
    [a.sin(), a.cos()]
}

pub fn ellipse_position(freq: f64, phase: f64, t: usize) -> [f64; 2] {
    let a = 2.0 * PI * freq * t as f64 + phase;
    [ELLIPSE_AXES.0 * a.cos(), ELLIPSE_AXES.1 * a.sin()]
}

fn clamp_square(p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(-1.0, 1.0), p[1].clamp(-1.0, 1.0)]
}

/// Parses the replay format: one round per line as whitespace-separated
/// point indices. `#` starts a comment; a line that is blank before any
/// comment is an empty round, a comment-only line is skipped.
pub fn parse_replay(text: &str, path: &Path) -> Result<Vec<ClientRound>> {
    let mut rounds = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let (body, commented) = match line.find('#') {
            Some(at) => (&line[..at], true),
            None => (line, false),
        };
        if commented && body.trim().is_empty() {
            continue;
        }
        let members = body
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: no + 1,
                    msg: format!("not a point index: {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rounds.push(ClientRound::new(members));
    }
    Ok(rounds)
}

pub fn read_replay(path: &Path) -> Result<Vec<ClientRound>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_replay(&text, path)
}

/// Writes rounds in the replay format.
pub fn format_replay(rounds: &[ClientRound]) -> String {
    let mut out = String::new();
    for r in rounds {
        let line: Vec<String> = r.iter().map(|i| i.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
