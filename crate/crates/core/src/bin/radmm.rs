use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use radmm::experiment::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "radmm", version, about = "Relaxed ADMM consensus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean error trajectories over the parameter grid
    Run(Common),
    /// Spectral rate analysis only
    Rate(Common),
    /// Stability boundaries in the (rho, alpha) plane
    Scan(Common),
    /// Empirical rates against the predicted mean-square rate
    Compare(Common),
    /// Trajectories for quartic costs
    Quartic(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; missing fields take the subcommand's defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out/<subcommand>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed of the per-trial generators
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per grid point
    #[arg(long)]
    trials: Option<usize>,
    /// Iterations per trial
    #[arg(long)]
    iters: Option<usize>,
}

impl Common {
    fn config(&self, name: &str) -> radmm::Result<ExperimentConfig> {
        let preset = experiment::preset(name).expect("every subcommand has a preset");
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file_over(path, &preset)?,
            None => preset,
        };
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if cfg.out.is_none() {
            cfg.out = Some(PathBuf::from("out").join(name));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> radmm::Result<String> {
    Ok(match &cli.command {
        Command::Run(c) => {
            let out = experiment::run_trajectories(&c.config("run")?)?;
            let diverged: usize = out.summary.curves.iter().map(|c| c.diverged).sum();
            let rates: Vec<String> = out
                .summary
                .curves
                .iter()
                .map(|c| match c.fit {
                    Some(f) => format!(
                        "alpha={} p_lambda={}: {:.6}",
                        c.alpha, c.p_lambda, f.gamma_hat
                    ),
                    None => format!("alpha={} p_lambda={}: no fit window", c.alpha, c.p_lambda),
                })
                .collect();
            format!(
                "{} curves, {diverged} diverged trials\n{}",
                rates.len(),
                rates.join("\n")
            )
        }
        Command::Rate(c) => {
            let entries = experiment::rate_reports(&c.config("rate")?)?;
            let worst = entries
                .iter()
                .map(|e| e.report.bar_gamma_m)
                .fold(0.0, f64::max);
            let passed = entries.iter().filter(|e| e.report.spectrum_pass).count();
            format!(
                "{} grid points, largest mean-square rate {worst:.6}, spectral checks passed on {passed}",
                entries.len()
            )
        }
        Command::Scan(c) => {
            let s = experiment::stability_scan(&c.config("scan")?)?;
            let lines: Vec<String> = s
                .boundary
                .iter()
                .map(|b| {
                    format!(
                        "p_lambda={} rho={}: max stable alpha {}",
                        b.p_lambda,
                        b.rho,
                        b.max_stable_alpha.map_or("none".into(), |a| a.to_string())
                    )
                })
                .collect();
            lines.join("\n")
        }
        Command::Compare(c) => {
            let s = experiment::compare_rates(&c.config("compare")?)?;
            match s.rel_diff {
                Some(st) => format!(
                    "relative difference over {} points: max {:.3e}, min {:.3e}, mean {:.3e} +- {:.3e} ({} unfitted)",
                    st.count, st.max, st.min, st.mean, st.std, s.unfitted
                ),
                None => format!("no grid point could be fitted ({} points)", s.unfitted),
            }
        }
        Command::Quartic(c) => {
            let (s, _) = experiment::run_quartic(&c.config("quartic")?)?;
            let lines: Vec<String> = s
                .curves
                .iter()
                .map(|c| match (c.fit, c.tail) {
                    (Some(f), _) => {
                        format!("q={}: rate {:.6} (r2 {:.4})", c.q, f.gamma_hat, f.r_squared)
                    }
                    (None, Some(f)) => format!("q={}: rate {:.6} after burn-in", c.q, f.gamma_hat),
                    (None, None) => format!("q={}: no fit window", c.q),
                })
                .collect();
            lines.join("\n")
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            eprintln!("done in {:.1}s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
