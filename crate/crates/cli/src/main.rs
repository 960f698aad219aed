use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dynclust::harness::{run_batch, run_experiment, LearnerKind, RunConfig, RunReport};
use dynclust::verify::{run_suite, Scale};
use dynclust::NormOrder;

/// Online k-clustering experiments and property checks.
#[derive(Parser)]
#[command(name = "dynclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several configs concurrently; each writes to its own directory.
    Batch {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Root directory; each run writes to `<root>/<config stem>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides every config's seed; otherwise each keeps its own.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the property suite and print one line per property.
    Verify {
        /// Smaller samples and horizons.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Overrides {
    /// Required for the rand and combiner learners.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    learner: Option<LearnerKind>,
    /// Norm order: a number >= 1 or `inf`.
    #[arg(long)]
    p: Option<NormOrder>,
    #[arg(long)]
    svg: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(l) = self.learner {
            cfg.learner = l;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        cfg.svg |= self.svg;
        match self.seed {
            Some(s) => cfg.seed = s,
            None if cfg.learner.is_randomized() => {
                bail!("--seed is required for the {:?} learner", cfg.learner)
            }
            None => {}
        }
        Ok(())
    }
}

fn print_report(label: &str, report: &RunReport) {
    let ratio = report
        .final_ratio
        .map(|r| format!("{r:.6}"))
        .unwrap_or_else(|| "undefined".into());
    println!(
        "{label}: learner {:?}, k {}, p {}, T {}, seed {}",
        report.learner, report.k, report.p, report.horizon, report.seed
    );
    println!(
        "  cumulative integral {:.6}, fractional {:.6}, ratio {ratio}",
        report.cumulative_integral, report.cumulative_fractional
    );
    println!("  final placement {:?}", report.final_placement);
    if let Some(opt) = &report.static_optimum {
        println!(
            "  static optimum {:?} cost {:.6} (learner / static {:.6})",
            opt.centers, opt.cost, opt.ratio
        );
    }
    for path in [&report.csv_path, &report.summary_path, &report.svg_path]
        .into_iter()
        .flatten()
    {
        println!("  wrote {}", path.display());
    }
    println!("  wall time {:.3}s", report.wall_time_secs);
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, overrides } => {
            let mut cfg = RunConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            let (report, _) = run_experiment(&cfg)
                .with_context(|| format!("running {}", config.display()))?;
            print_report(&stem(&config), &report);
            Ok(ExitCode::SUCCESS)
        }
        Command::Batch { configs, out, seed } => {
            let mut cfgs = Vec::with_capacity(configs.len());
            for path in &configs {
                let mut cfg = RunConfig::load(path)?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                if let Some(root) = &out {
                    cfg.out_dir = Some(root.join(stem(path)));
                }
                cfgs.push(cfg);
            }
            let mut failed = false;
            for (path, result) in configs.iter().zip(run_batch(&cfgs)) {
                match result {
                    Ok((report, _)) => print_report(&stem(path), &report),
                    Err(e) => {
                        failed = true;
                        eprintln!("{}: error: {e}", path.display());
                    }
                }
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Verify { quick, seed } => {
            let scale = if quick { Scale::Quick } else { Scale::Full };
            let lines = run_suite(scale, seed);
            for l in &lines {
                println!(
                    "{} {} ({:.2}s): {}",
                    if l.passed { "PASS" } else { "FAIL" },
                    l.name,
                    l.elapsed.as_secs_f64(),
                    l.detail
                );
            }
            let failed = lines.iter().filter(|l| !l.passed).count();
            println!("{} passed, {failed} failed", lines.len() - failed);
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
