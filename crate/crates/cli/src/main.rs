use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rhs_slam::config::{Mode, RunConfig};
use rhs_slam::pipeline;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "rhs-slam", version, about = "Holographic-surface radar SLAM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pattern bank maintenance.
    Bank {
        #[command(subcommand)]
        action: BankAction,
    },
    /// Simulate one SLAM run and write its artifacts.
    Run(Common),
    /// Run every mode (or the one given) over a range of seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Element-count and grid-step sweep from the config's sweep section.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides the number of seeds per sweep point.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Recompute metrics from a finished run directory.
    Metrics {
        /// Run directory holding trajectory.csv and map.csv (defaults to --out).
        dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
enum BankAction {
    /// Optimize the holographic patterns and store them in the bank cache.
    Build(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
}

impl Common {
    fn load(&self) -> rhs_slam::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn execute(command: Command) -> rhs_slam::Result<()> {
    match command {
        Command::Bank {
            action: BankAction::Build(common),
        } => {
            let cfg = common.load()?;
            let (bank, rebuilt) = pipeline::load_or_build_bank(&cfg)?;
            let min_delta = bank.slots.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min);
            print(&json!({
                "key": bank.geometry_hash,
                "path": pipeline::bank_path(&cfg.bank_dir(), &bank.geometry_hash),
                "slots": bank.slot_count,
                "rebuilt": rebuilt,
                "min_delta": min_delta,
            }));
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let r = pipeline::run_slam(&cfg)?;
            print(&json!({
                "out": cfg.output_dir,
                "mode": r.mode,
                "seed": r.seed,
                "trajectory_rmse": r.trajectory_rmse,
                "landmark_rmse": r.landmark_rmse,
                "pointcloud_rmse": r.pointcloud_rmse,
                "obstacles_found": r.obstacles_found,
                "obstacles": r.obstacles,
            }));
        }
        Command::Compare { common, seeds } => {
            let cfg = common.load()?;
            let modes: Vec<Mode> = match common.mode {
                Some(m) => vec![m],
                None => Mode::ALL.to_vec(),
            };
            let report = pipeline::run_comparison(&cfg, &modes, &pipeline::seed_list(cfg.seed, seeds), true)?;
            let rows: Vec<_> = report
                .modes
                .iter()
                .map(|m| json!({"mode": m.mode, "mean_trajectory_rmse": m.mean_trajectory_rmse, "mean_pointcloud_rmse": m.mean_pointcloud_rmse}))
                .collect();
            print(&json!({ "out": cfg.output_dir.join("comparison.json"), "modes": rows }));
        }
        Command::Sweep { common, seeds } => {
            let mut cfg = common.load()?;
            if let Some(n) = seeds {
                cfg.sweep.seeds = n;
            }
            let report = pipeline::run_sweep(&cfg, true)?;
            let rows: Vec<_> = report
                .points
                .iter()
                .map(|p| json!({"elements": p.elements, "step_deg": p.step_deg, "mean_pointcloud_rmse": p.mean_pointcloud_rmse, "mean_trajectory_rmse": p.mean_trajectory_rmse}))
                .collect();
            print(&json!({ "out": cfg.output_dir.join("sweep.json"), "points": rows }));
        }
        Command::Metrics { dir, common } => {
            let cfg = common.load()?;
            let dir = dir.unwrap_or_else(|| cfg.output_dir.clone());
            let m = pipeline::metrics_from_dir(&dir, &cfg)?;
            print(&serde_json::to_value(&m)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.render().to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
