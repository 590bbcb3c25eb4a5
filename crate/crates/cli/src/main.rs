//! `platoon` — simulate delay-aware V2I platoons, map stability regions and
//! plan the radio side.
//!
//! Exit codes: 0 when the run completed and every configured verdict came
//! back stable/feasible, 2 when it completed with an unstable or infeasible
//! verdict, 1 on execution errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use platoon_core::scenario::{self, Config};
use platoon_core::stability::{
    self, plant_stability_check, string_stability_exact, string_stability_sufficient,
    FrequencySweepConfig,
};
use platoon_core::types::{derive_lambda_eta, ControlGains, LambdaEta};

#[derive(Parser)]
#[command(name = "platoon", version, about)]
struct Cli {
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Reserved; the dynamics are deterministic and no randomness is used.
    #[arg(long, global = true, hide = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation scenario from a config file.
    Simulate(RunArgs),
    /// Plant-stability region and membership tests.
    #[command(subcommand)]
    Stability(StabilityCommand),
    /// String-stability tests.
    #[command(subcommand)]
    String(StringCommand),
    /// Radio planning.
    #[command(subcommand)]
    Radio(RadioCommand),
    /// Run a parameter sweep from a config file.
    Sweep(RunArgs),
    /// Operate on the shipped scenario corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the integration step (seconds).
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum StabilityCommand {
    /// Export the region boundary curve as CSV `w,lambda,eta`.
    Region {
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Test a (lambda, eta) pair for plant stability.
    Check {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        tau: f64,
    },
}

#[derive(Subcommand)]
enum StringCommand {
    /// Test a gain tuple for string stability (sufficient + exact sweep).
    Check {
        #[arg(long)]
        k_v: f64,
        #[arg(long)]
        k_vo: f64,
        #[arg(long)]
        k_x: f64,
        #[arg(long)]
        k_xo: f64,
        #[arg(long)]
        headway: f64,
        #[arg(long)]
        tau: f64,
        /// Also export |H(jw)| over the sweep as CSV `w,magnitude`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RadioCommand {
    /// Evaluate the planner grid from a config file into a CSV report.
    Plan(RunArgs),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Run one corpus scenario by id (fig3a..fig8b, table1).
    Run {
        id: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List available corpus ids.
    List,
}

/// Verdict-aware exit status.
enum Outcome {
    Stable,
    Unstable,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2 for usage errors; 2 is reserved for
            // "ran but unstable", so usage problems map to 1.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        std::env::set_var("RAYON_NUM_THREADS", jobs.to_string());
    }
    match run(cli.command) {
        Ok(Outcome::Stable) => ExitCode::SUCCESS,
        Ok(Outcome::Unstable) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(args) => {
            let config = load(&args)?;
            if !matches!(config, Config::Simulate { .. }) {
                bail!("{} is not a simulation config", args.config.display());
            }
            let id = stem(&args.config);
            run_config(&id, &config, &args.out)
        }
        Command::Sweep(args) => {
            let config = load(&args)?;
            if !matches!(config, Config::Sweep { .. }) {
                bail!("{} is not a sweep config", args.config.display());
            }
            let id = stem(&args.config);
            run_config(&id, &config, &args.out)
        }
        Command::Radio(RadioCommand::Plan(args)) => {
            let config = load(&args)?;
            if !matches!(config, Config::Radio { .. }) {
                bail!("{} is not a radio planner config", args.config.display());
            }
            let id = stem(&args.config);
            run_config(&id, &config, &args.out)
        }
        Command::Stability(StabilityCommand::Region { tau, points, out }) => {
            let boundary = stability::plant_region_boundary(tau, points)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("region_tau{tau}.csv"));
            let mut file = std::fs::File::create(&path)?;
            stability::write_region_csv(&boundary, &mut file)?;
            println!(
                "region boundary for tau={tau}: {} points, corner eta = {}",
                boundary.len(),
                stability::corner_eta(tau)
            );
            println!("wrote {}", path.display());
            Ok(Outcome::Stable)
        }
        Command::Stability(StabilityCommand::Check { lambda, eta, tau }) => {
            let le = LambdaEta::new(lambda, eta)?;
            let v = plant_stability_check(&le, tau)?;
            match v.witness {
                Some(lambda_star) => println!(
                    "plant {}: lambda = {lambda}, critical lambda* = {lambda_star}, margin = {}",
                    if v.stable { "STABLE" } else { "UNSTABLE" },
                    v.margin
                ),
                None => println!(
                    "plant UNSTABLE: eta = {eta} at or beyond the corner point {}",
                    stability::corner_eta(tau)
                ),
            }
            Ok(if v.stable { Outcome::Stable } else { Outcome::Unstable })
        }
        Command::String(StringCommand::Check { k_v, k_vo, k_x, k_xo, headway, tau, out }) => {
            let gains = ControlGains::new(k_v, k_vo, k_x, k_xo)?;
            let le = derive_lambda_eta(&gains, headway)?;
            let sufficient = string_stability_sufficient(&gains, headway, tau)?;
            let sweep = FrequencySweepConfig::default_for(&gains, headway);
            let exact = string_stability_exact(&gains, headway, tau, &sweep)?;
            println!(
                "gains -> lambda = {}, eta = {} (k_v k_vo = {}, 1/(2 tau) = {})",
                le.lambda,
                le.eta,
                k_v * k_vo,
                0.5 / tau
            );
            println!(
                "sufficient condition: {} (margin {})",
                if sufficient.stable { "holds" } else { "fails" },
                sufficient.margin
            );
            match exact.witness {
                None => println!("exact sweep: STABLE (min Xi = {})", exact.margin),
                Some(w) => println!("exact sweep: UNSTABLE, |H(jw)| >= 1 at w = {w} rad/s"),
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let mut rows = Vec::new();
                let n = ((sweep.w_max - sweep.w_min) / sweep.step) as usize;
                for k in 0..=n {
                    let w = sweep.w_min + k as f64 * sweep.step;
                    if let Ok(mag) = stability::transfer_magnitude(w, &gains, headway, tau) {
                        rows.push((w, mag));
                    }
                }
                let path = dir.join("transfer_magnitude.csv");
                let mut file = std::fs::File::create(&path)?;
                stability::write_sweep_csv(&rows, &mut file)?;
                println!("wrote {}", path.display());
            }
            Ok(if exact.stable { Outcome::Stable } else { Outcome::Unstable })
        }
        Command::Corpus(CorpusCommand::Run { id, out }) => {
            let config = scenario::corpus_config(&id)?;
            run_config(&id, &config, &out)
        }
        Command::Corpus(CorpusCommand::List) => {
            for id in scenario::corpus_ids() {
                println!("{id}");
            }
            Ok(Outcome::Stable)
        }
    }
}

fn load(args: &RunArgs) -> Result<Config> {
    let mut config = scenario::load_config(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(dt) = args.dt {
        match &mut config {
            Config::Simulate { scenario, .. } => scenario.dt = dt,
            Config::Sweep { sweep, .. } => sweep.base.dt = dt,
            Config::Radio { .. } => bail!("--dt does not apply to radio planning"),
        }
    }
    Ok(config)
}

fn stem(path: &std::path::Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn run_config(id: &str, config: &Config, out: &std::path::Path) -> Result<Outcome> {
    let output = scenario::run_scenario(id, config, out)?;
    let v = &output.manifest.verdicts;
    if let Some(plant) = v.plant {
        println!("plant: {} (margin {})", label(plant.stable), plant.margin);
    }
    if let Some(s) = v.string_exact {
        match s.witness {
            None => println!("string: {} (min Xi {})", label(s.stable), s.margin),
            Some(w) => println!("string: {} (witness w = {w} rad/s)", label(s.stable)),
        }
    }
    if let Some(t) = v.settling_time_s {
        println!("settling time ({} m): {t} s", scenario::SETTLING_TOL);
    } else if v.plant.is_some() {
        println!("settling time ({} m): not reached", scenario::SETTLING_TOL);
    }
    if !v.peak_spacing_errors_m.is_empty() {
        println!("peak spacing errors (m): {:?}", v.peak_spacing_errors_m);
    }
    for row in &output.planner_rows {
        println!(
            "fc = {} GHz, f_handover = {:.4}/s: d_th = {:.1} m, v_max = {:.2} m/s, \
             T_stay = {:.1} s, ISLD_max = {:.1} m",
            row.carrier_freq_hz / 1e9,
            row.handover_freq_hz,
            row.d_th,
            row.v_max,
            row.stay_time,
            row.isld_max
        );
    }
    for path in &output.manifest.outputs {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", out.join(format!("{id}_manifest.json")).display());
    Ok(if v.all_feasible { Outcome::Stable } else { Outcome::Unstable })
}

fn label(stable: bool) -> &'static str {
    if stable {
        "STABLE"
    } else {
        "UNSTABLE"
    }
}
