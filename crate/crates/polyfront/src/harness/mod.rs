//! Orchestration: configuration, full runs with entropy reports, the
//! convergence study across approximation parameters, and the
//! finite-volume cross-check.

pub mod config;
pub mod csv;
pub mod fv;
pub mod l1;

pub use config::{FluxSpec, InitialSpec, ProfileSpec, RunConfig};
pub use fv::{run_reference_fv, FvSolution};

use crate::entropy::{self, EntropyReport, Rect, ResidualFlux, TestBump};
use crate::flux::FluxModel;
use crate::par;
use crate::tracker::{discretize_initial, init_simulation, Simulation, DEFAULT_MAX_EVENTS};
use crate::{Error, Result};
use std::time::Instant;

/// Effective event cap: `POLYFRONT_MAX_EVENTS` env var, then the config,
/// then the default.
pub fn effective_max_events(cfg: &RunConfig) -> u64 {
    if let Ok(v) = std::env::var("POLYFRONT_MAX_EVENTS") {
        if let Ok(n) = v.parse::<u64>() {
            return n;
        }
    }
    cfg.max_events.unwrap_or(DEFAULT_MAX_EVENTS)
}

/// A completed run: the simulation history plus entropy reports for the
/// configured battery.
pub struct RunOutput {
    pub eps: f64,
    pub sim: Simulation,
    pub reports: Vec<EntropyReport>,
    pub wall_ms: u64,
}

impl RunOutput {
    /// The default audit rectangle `[0.05 T, T] x [-W, W]`.
    pub fn default_rect(&self, cfg: &RunConfig) -> Rect {
        Rect {
            t0: 0.05 * cfg.time_horizon,
            t1: cfg.time_horizon,
            x0: -cfg.window,
            x1: cfg.window,
        }
    }

    /// Per-entropy positive-part totals over `rect`.
    pub fn mu_plus_over(&self, rect: Rect) -> Vec<f64> {
        self.reports
            .iter()
            .map(|rep| entropy::mu_plus_from_records(&self.sim, &rep.records, rect))
            .collect()
    }
}

/// Runs one simulation to the configured horizon and audits it.
pub fn run_simulation(cfg: &RunConfig, eps: f64) -> Result<RunOutput> {
    let model = cfg.model()?;
    run_simulation_with_model(cfg, eps, &model)
}

/// As [`run_simulation`] but reusing an existing model (its sampled norm
/// estimates are cached per instance).
pub fn run_simulation_with_model(
    cfg: &RunConfig,
    eps: f64,
    model: &FluxModel,
) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let (s, c, k) = cfg.profiles()?;
    let data = discretize_initial(&s, &c, &k, eps)?;
    let mut sim = init_simulation(data, model, effective_max_events(cfg))?;
    sim.advance_to(cfg.time_horizon)?;
    let mut reports = Vec::new();
    for eta in cfg.entropy_battery()? {
        reports.push(entropy::audit(&sim, &eta)?);
    }
    Ok(RunOutput {
        eps,
        sim,
        reports,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// One row of the convergence table.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// Saturation L1 distance (space-time) to the previous, coarser run.
    pub l1_prev: Option<f64>,
    /// Weak residuals against the exact flux, max over the test battery.
    pub r1: f64,
    pub r2: f64,
    /// Positive-part measure over the default rectangle (first entropy).
    pub mu_plus: f64,
    pub events: u64,
    pub wall_ms: u64,
    pub aborted: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Deterministic CSV (wall time lives in `timings_csv`).
    pub fn csv(&self) -> String {
        let mut out = String::from("eps,l1_prev,r1,r2,mu_plus,events,aborted\n");
        for r in &self.rows {
            let l1 = r.l1_prev.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.eps, l1, r.r1, r.r2, r.mu_plus, r.events, r.aborted
            ));
        }
        out
    }

    /// Wall-clock timings, kept out of the deterministic table.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("eps,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.eps, r.wall_ms));
        }
        out
    }
}

/// The weak-residual test battery for a config window.
pub fn residual_battery(cfg: &RunConfig) -> Vec<TestBump> {
    let t = cfg.time_horizon;
    let w = cfg.window;
    vec![
        TestBump {
            t0: 0.05 * t,
            t1: 0.95 * t,
            x0: -0.9 * w,
            x1: 0.9 * w,
        },
        TestBump {
            t0: 0.25 * t,
            t1: 0.75 * t,
            x0: -0.4 * w,
            x1: 0.6 * w,
        },
    ]
}

/// Runs the configured eps ladder (in parallel), computes consecutive
/// space-time L1 distances, weak residuals and positive-part totals.
/// Safeguard-aborted runs flag their row and leave gaps in the distances.
pub fn convergence_study(cfg: &RunConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if cfg.eps_list.len() < 3 {
        return Err(Error::Config(
            "convergence study needs at least 3 eps values".into(),
        ));
    }
    let model = cfg.model()?;
    // Warm the cached norm estimates before forking.
    let _ = model.c2_sup();
    let runs: Vec<Result<RunOutput>> = par::map_indexed(cfg.eps_list.len(), |i| {
        run_simulation_with_model(cfg, cfg.eps_list[i], &model)
    });
    let phis = residual_battery(cfg);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut outputs: Vec<Option<RunOutput>> = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(out) => {
                let mut r1 = 0.0f64;
                let mut r2 = 0.0f64;
                for phi in &phis {
                    let (a, b) = entropy::weak_residual(&out.sim, phi, ResidualFlux::Exact)?;
                    r1 = r1.max(a);
                    r2 = r2.max(b);
                }
                let rect = out.default_rect(cfg);
                let mu = out.mu_plus_over(rect).first().copied().unwrap_or(0.0);
                rows.push(ConvergenceRow {
                    eps: out.eps,
                    l1_prev: None,
                    r1,
                    r2,
                    mu_plus: mu,
                    events: out.sim.counters.events,
                    wall_ms: out.wall_ms,
                    aborted: false,
                });
                outputs.push(Some(out));
            }
            Err(Error::SafeguardAbort(n)) => {
                rows.push(ConvergenceRow {
                    eps: cfg.eps_list[i],
                    l1_prev: None,
                    r1: f64::NAN,
                    r2: f64::NAN,
                    mu_plus: f64::NAN,
                    events: n,
                    wall_ms: 0,
                    aborted: true,
                });
                outputs.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    for i in 1..outputs.len() {
        if let (Some(prev), Some(cur)) = (&outputs[i - 1], &outputs[i]) {
            let d = l1::l1_spacetime(
                &prev.sim,
                &cur.sim,
                0.0,
                cfg.time_horizon,
                -cfg.window,
                cfg.window,
            )?;
            rows[i].l1_prev = Some(d);
        }
    }
    Ok(ConvergenceTable { rows })
}

/// Writes the full artifact set for one run into `dir`.
pub fn write_run_outputs(dir: &std::path::Path, cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let run_meta = serde_json::json!({
        "eps": out.eps,
        "config": serde_json::from_str::<serde_json::Value>(&cfg.to_json()).unwrap(),
    });
    std::fs::write(
        dir.join("run.json"),
        serde_json::to_string_pretty(&run_meta).unwrap(),
    )?;
    std::fs::write(dir.join("grid.csv"), out.sim.grid_system().grid.dump_csv())?;
    let times = if cfg.output_times.is_empty() {
        vec![cfg.time_horizon]
    } else {
        cfg.output_times.clone()
    };
    std::fs::write(
        dir.join("snapshots.csv"),
        csv::snapshots_csv(&out.sim, &times, -cfg.window, cfg.window)?,
    )?;
    std::fs::write(dir.join("fronts.csv"), csv::fronts_csv(&out.sim))?;
    let rect = out.default_rect(cfg);
    let mus = out.mu_plus_over(rect);
    std::fs::write(
        dir.join("entropy.csv"),
        csv::entropy_csv(&out.sim, &out.reports, &[(rect, mus)]),
    )?;
    Ok(())
}

/// The five canned scenarios used by the diagnostics: Riemann data
/// exercising each wave family plus one multi-jump mix.
pub fn reference_scenarios() -> Vec<(&'static str, RunConfig)> {
    let base = |s: ProfileSpec, c: ProfileSpec, k: ProfileSpec| RunConfig {
        flux: FluxSpec::default(),
        initial: InitialSpec { s, c, k },
        eps_list: vec![0.1, 0.05, 0.025, 0.0125],
        time_horizon: 2.0,
        window: 5.0,
        output_times: vec![0.5, 1.0, 2.0],
        entropies: vec!["square".into(), "quartic".into(), "expm1".into()],
        seed: 0,
        max_events: None,
    };
    let pw = |breakpoints: Vec<f64>, values: Vec<f64>| ProfileSpec::Piecewise {
        breakpoints,
        values,
    };
    let cn = |value: f64| ProfileSpec::Constant { value };
    vec![
        (
            "s-riemann",
            base(pw(vec![0.0], vec![0.9, 0.1]), cn(0.4), cn(0.8)),
        ),
        (
            "c-riemann",
            base(
                pw(vec![0.0], vec![0.3, 0.55]),
                pw(vec![0.0], vec![0.0, 0.5]),
                cn(1.0),
            ),
        ),
        (
            "k-riemann",
            base(
                pw(vec![0.0], vec![0.7, 0.25]),
                cn(0.2),
                pw(vec![0.0], vec![1.0, 0.5]),
            ),
        ),
        (
            "full-riemann",
            base(
                pw(vec![0.0], vec![0.8, 0.2]),
                pw(vec![0.0], vec![0.1, 0.9]),
                pw(vec![0.0], vec![1.0, 0.4]),
            ),
        ),
        (
            "mixed",
            base(
                pw(vec![-2.0, -0.5], vec![0.85, 0.3, 0.6]),
                pw(vec![-1.5, 0.5], vec![0.15, 0.65, 0.35]),
                pw(vec![0.2], vec![1.0, 0.55]),
            ),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_and_write_artifacts() {
        let (_, cfg) = &reference_scenarios()[1];
        let out = run_simulation(cfg, 0.1).unwrap();
        assert!(out.sim.time() == cfg.time_horizon);
        assert_eq!(out.reports.len(), 3);
        let dir = std::env::temp_dir().join("polyfront-harness-test");
        let _ = std::fs::remove_dir_all(&dir);
        write_run_outputs(&dir, cfg, &out).unwrap();
        for f in [
            "run.json",
            "grid.csv",
            "snapshots.csv",
            "fronts.csv",
            "entropy.csv",
        ] {
            assert!(dir.join(f).exists(), "{f} missing");
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn constant_scenario_is_trivial() {
        let cfg = RunConfig {
            flux: FluxSpec::default(),
            initial: InitialSpec {
                s: ProfileSpec::Constant { value: 0.5 },
                c: ProfileSpec::Constant { value: 0.5 },
                k: ProfileSpec::Constant { value: 0.5 },
            },
            eps_list: vec![0.1],
            time_horizon: 1.0,
            window: 5.0,
            output_times: vec![],
            entropies: vec!["square".into()],
            seed: 0,
            max_events: None,
        };
        let out = run_simulation(&cfg, 0.1).unwrap();
        assert_eq!(out.sim.live_front_count(), 0);
        let phi = TestBump {
            t0: 0.1,
            t1: 0.9,
            x0: -1.0,
            x1: 1.0,
        };
        let (r1, r2) = entropy::weak_residual(&out.sim, &phi, ResidualFlux::Exact).unwrap();
        assert_eq!(r1, 0.0);
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn study_requires_three_eps() {
        let (_, mut cfg) = reference_scenarios()[0].clone();
        cfg.eps_list = vec![0.1, 0.05];
        assert!(matches!(convergence_study(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn riemann_data_are_self_similar() {
        // Single-point Riemann data produce no interactions: every front is
        // born at t = 0 and survives to the horizon. (The full-riemann
        // scenario is excluded: its polymer jump is nudged off the
        // permeability jump, so its fans interact once shortly after zero.)
        for idx in [0usize, 2] {
            let (name, cfg) = &reference_scenarios()[idx];
            let out = run_simulation(cfg, 0.1).unwrap();
            assert_eq!(out.sim.counters.events, 0, "{name}");
            for seg in out.sim.segments() {
                assert_eq!(seg.t0, 0.0, "{name}");
                assert_eq!(seg.t1, f64::INFINITY, "{name}");
            }
        }
    }
}
