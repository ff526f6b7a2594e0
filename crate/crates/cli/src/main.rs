//! Command-line driver for disordered-stack cavity-QED ensembles.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when a run fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use andersonqed::ensemble::{
    calibrate_aeff_in, export_figure, run_ensemble, xi_calibrate_config, xi_spread, ConfigSnapshot, Figure,
    Overrides, RunOptions, Workers,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "andersonqed",
    version,
    about = "Anderson-localized cavity QED ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replaces `ensemble.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, a positive integer or "auto".
    #[arg(long, env = "ANDERSONQED_WORKERS")]
    workers: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the ensemble and export every table.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue an interrupted run from its checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Transmission-only localization-length calibration.
    XiCalibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Fix a_eff from a finished run so its smallest mode volume hits the target.
    CalibrateAeff {
        #[command(flatten)]
        common: Common,
    },
    /// Rewrite one table (or all) of a finished run.
    Export {
        #[command(flatten)]
        common: Common,
        /// ldos-map, v-hist, q-hist, sc-prob or all.
        #[arg(long, default_value = "all")]
        figure: String,
    },
    /// Parse and validate a configuration without running anything.
    ValidateConfig {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> andersonqed::Result<ConfigSnapshot> {
    let workers = common.workers.as_deref().map(Workers::parse).transpose()?;
    ConfigSnapshot::load(&common.config)?.with_overrides(&Overrides {
        master_seed: common.seed,
        workers,
        a_eff: None,
    })
}

fn execute(command: Command) -> andersonqed::Result<()> {
    match command {
        Command::Run { common, resume } => {
            let snapshot = load(&common)?;
            let opts = RunOptions {
                resume,
                ..RunOptions::default()
            };
            let manifest = run_ensemble(&snapshot, &opts)?;
            let out = &snapshot.config().output_dir;
            println!(
                "{} realizations ({} failed), manifest in {}",
                manifest.completed,
                manifest.failed(),
                Path::new(out)
                    .join(andersonqed::ensemble::MANIFEST_FILE)
                    .display()
            );
            if let Some(stats) = &manifest.statistics {
                for l in &stats.per_loss {
                    let p = &l.strong_coupling;
                    let label = l
                        .loss_length_m
                        .map_or("lossless".to_string(), |m| format!("l = {:.3} mm", m * 1e3));
                    println!(
                        "{label}: p = {:.4} [{:.4}, {:.4}] over {} realizations",
                        p.p, p.ci_lo, p.ci_hi, p.n
                    );
                }
            }
        }
        Command::XiCalibrate { common } => {
            let snapshot = load(&common)?;
            let rows = xi_calibrate_config(snapshot.config())?;
            for r in &rows {
                match (r.xi, r.xi_dn2) {
                    (Some(xi), Some(c)) => println!(
                        "delta_n = {:.3}: xi = {:.3} um, xi*dn^2 = {:.3} um",
                        r.delta_n,
                        xi * 1e6,
                        c * 1e6
                    ),
                    _ => println!("delta_n = {:.3}: no decay", r.delta_n),
                }
            }
            if let Some(s) = xi_spread(&rows) {
                println!("xi*dn^2 max/min = {s:.3}");
            }
        }
        Command::CalibrateAeff { common } => {
            let snapshot = load(&common)?;
            let cal = calibrate_aeff_in(Path::new(&snapshot.config().output_dir))?;
            println!(
                "a_eff = {:.6e} m^2 ({:.6} um^2) from {} modes",
                cal.a_eff_m2,
                cal.a_eff_m2 * 1e12,
                cal.modes
            );
        }
        Command::Export { common, figure } => {
            let snapshot = load(&common)?;
            let figures: Vec<Figure> = if figure == "all" {
                Figure::ALL.to_vec()
            } else {
                vec![figure.parse()?]
            };
            let dir = Path::new(&snapshot.config().output_dir);
            for f in figures {
                for p in export_figure(dir, f)? {
                    println!("{}", p.display());
                }
            }
        }
        Command::ValidateConfig { common } => {
            let snapshot = load(&common)?;
            let cfg = snapshot.config();
            if let Some(w) = cfg.ensemble.disorder.localization_warning() {
                log::warn!("{w}");
            }
            println!("configuration is valid");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
