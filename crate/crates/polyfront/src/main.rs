//! Command line interface for the front-tracking simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 safeguard abort,
//! 4 invariant violation.

use clap::{Parser, Subcommand};
use polyfront::entropy::{self, Entropy, Rect};
use polyfront::harness::{self, csv, RunConfig};
use polyfront::{Error, GridSystem, State, ValueGrid};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "polyfront", version, about = "Front tracking for two-phase polymer flooding with discontinuous permeability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifact set.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Approximation parameter (must be positive).
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured eps ladder and write the convergence table.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a single Riemann problem and print the wave fan as CSV.
    Riemann {
        /// Left state as `s,c,k`.
        #[arg(long)]
        left: String,
        /// Right state as `s,c,k`.
        #[arg(long)]
        right: String,
        #[arg(long)]
        eps: f64,
    },
    /// Re-audit a stored run: verify its outputs, then print the entropy
    /// report for one entropy and rectangle.
    Audit {
        /// Directory written by `simulate`.
        #[arg(long)]
        run: PathBuf,
        /// Entropy id: square, quartic, expm1 or identity.
        #[arg(long)]
        entropy: String,
        /// Rectangle `t1,t2,xl,xr`.
        #[arg(long)]
        rect: String,
    },
    /// First-order finite-volume cross-check; prints the grid as CSV.
    Fv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cells: usize,
        #[arg(long)]
        cfl: f64,
    },
}

fn parse_state(text: &str) -> Result<State, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("state '{text}' is not s,c,k")));
    }
    let mut vals = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad number '{p}': {e}")))?;
    }
    State::new(vals[0], vals[1], vals[2])
}

fn parse_rect(text: &str) -> Result<Rect, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!("rect '{text}' is not t1,t2,xl,xr")));
    }
    let mut vals = [0.0f64; 4];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad number '{p}': {e}")))?;
    }
    Ok(Rect {
        t0: vals[0],
        t1: vals[1],
        x0: vals[2],
        x1: vals[3],
    })
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, eps, out } => {
            let cfg = load_config(&config)?;
            if !(eps > 0.0) {
                return Err(Error::Config(format!("eps={eps} must be positive")));
            }
            let output = harness::run_simulation(&cfg, eps)?;
            harness::write_run_outputs(&out, &cfg, &output)?;
            println!(
                "simulated to t={} with {} events, {} grid extensions, {} fronts; wrote {}",
                output.sim.time(),
                output.sim.counters.events,
                output.sim.counters.extensions,
                output.sim.counters.fronts_created,
                out.display()
            );
            Ok(())
        }
        Command::Convergence { config, out } => {
            let cfg = load_config(&config)?;
            let table = harness::convergence_study(&cfg)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("convergence.csv"), table.csv())?;
            std::fs::write(out.join("timings.csv"), table.timings_csv())?;
            print!("{}", table.csv());
            Ok(())
        }
        Command::Riemann { left, right, eps } => {
            let l = parse_state(&left)?;
            let r = parse_state(&right)?;
            if !(eps > 0.0) {
                return Err(Error::Config(format!("eps={eps} must be positive")));
            }
            let model = polyfront::FluxModel::corey();
            let mut c_values = vec![l.c];
            if r.c != l.c {
                c_values.push(r.c);
            }
            let mut k_values = vec![l.k];
            if r.k != l.k {
                k_values.push(r.k);
            }
            let (band_r, j_r) = (k_values.len() - 1, c_values.len() - 1);
            let grid = ValueGrid::build(&[l, r], c_values, k_values, eps, &model)?;
            let mut gs = GridSystem::new(grid, model);
            let (fan, _) = gs.solve_global(l, r, 0, band_r, 0, j_r)?;
            print!("{}", csv::fan_csv(&fan));
            Ok(())
        }
        Command::Audit { run, entropy, rect } => {
            let eta = Entropy::from_id(&entropy)?;
            let rect = parse_rect(&rect)?;
            let meta_text = std::fs::read_to_string(run.join("run.json"))
                .map_err(|e| Error::Config(format!("cannot read run.json: {e}")))?;
            let meta: serde_json::Value = serde_json::from_str(&meta_text)
                .map_err(|e| Error::Config(format!("bad run.json: {e}")))?;
            let eps = meta["eps"]
                .as_f64()
                .ok_or_else(|| Error::Config("run.json missing eps".into()))?;
            let cfg = RunConfig::from_json(&meta["config"].to_string())?;
            let output = harness::run_simulation(&cfg, eps)?;
            // Self-check: the deterministic replay must reproduce the
            // stored front table byte for byte.
            let stored = std::fs::read_to_string(run.join("fronts.csv"))
                .map_err(|e| Error::Config(format!("cannot read fronts.csv: {e}")))?;
            let replayed = csv::fronts_csv(&output.sim);
            if stored != replayed {
                return Err(Error::InvariantViolation(
                    "stored fronts.csv does not match the deterministic replay".into(),
                ));
            }
            let report = entropy::audit(&output.sim, &eta)?;
            let mu = entropy::positive_part_measure(&output.sim, &eta, rect)?;
            print!(
                "{}",
                csv::entropy_csv(&output.sim, &[report.clone()], &[(rect, vec![mu])])
            );
            eprintln!(
                "audit ok: {} fronts, max S production {:.3e}, mu+ = {:.6e}, budget constant {:.3}",
                report.records.len(),
                report.max_s_production,
                mu,
                report.budget_constant
            );
            Ok(())
        }
        Command::Fv { config, cells, cfl } => {
            let cfg = load_config(&config)?;
            let model = cfg.model()?;
            let fv = harness::run_reference_fv(&cfg, &model, cells, cfl, cfg.time_horizon)?;
            print!("{}", csv::fv_csv(&fv));
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
