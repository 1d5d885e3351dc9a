//! First-order finite-volume cross-check solver.
//!
//! Every wave family of the system has nonnegative speed and both `f` and
//! `c f` are continuous across the stationary permeability contact, so the
//! interface flux of the exact global Riemann solver reduces to the upwind
//! value `(f(U_i), c_i f(U_i))`. The scheme is conservative by telescoping.

use crate::flux::FluxModel;
use crate::harness::config::RunConfig;
use crate::par;
use crate::tracker::Profile;
use crate::{Error, Result};

/// Cell-averaged finite-volume state at a fixed time.
#[derive(Clone, Debug)]
pub struct FvSolution {
    pub xl: f64,
    pub xr: f64,
    pub s: Vec<f64>,
    /// Conserved polymer mass `c s`.
    pub q: Vec<f64>,
    /// Working polymer fraction (derived from `q/s`).
    pub c: Vec<f64>,
    pub k: Vec<f64>,
    pub t: f64,
    pub steps: u64,
}

impl FvSolution {
    pub fn cells(&self) -> usize {
        self.s.len()
    }

    pub fn dx(&self) -> f64 {
        (self.xr - self.xl) / self.cells() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.xl + (i as f64 + 0.5) * self.dx()
    }
}

fn cell_average(p: &Profile, a: f64, b: f64) -> f64 {
    match p {
        Profile::Piecewise {
            breakpoints,
            values,
        } => {
            let mut total = 0.0;
            let mut x = a;
            let mut i = breakpoints.partition_point(|&bp| bp <= a);
            while x < b {
                let next = if i < breakpoints.len() {
                    breakpoints[i].min(b)
                } else {
                    b
                };
                total += values[i] * (next - x);
                x = next;
                i += 1;
            }
            total / (b - a)
        }
        Profile::Analytic(_) => {
            // 5-point Gauss-Legendre.
            const XS: [f64; 5] = [
                -0.906179845938664,
                -0.5384693101056831,
                0.0,
                0.5384693101056831,
                0.906179845938664,
            ];
            const WS: [f64; 5] = [
                0.23692688505618908,
                0.47862867049936647,
                0.5688888888888889,
                0.47862867049936647,
                0.23692688505618908,
            ];
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut acc = 0.0;
            for (x, w) in XS.iter().zip(WS) {
                acc += w * eval_profile(p, mid + half * x);
            }
            0.5 * acc
        }
    }
}

fn eval_profile(p: &Profile, x: f64) -> f64 {
    match p {
        Profile::Piecewise {
            breakpoints,
            values,
        } => values[breakpoints.partition_point(|&b| b <= x)],
        Profile::Analytic(f) => f(x),
    }
}

/// Runs the upwind scheme to `t_end` on `cells` uniform cells over the
/// config window, with the stated CFL number in `(0, 0.5]`.
pub fn run_reference_fv(
    cfg: &RunConfig,
    model: &FluxModel,
    cells: usize,
    cfl: f64,
    t_end: f64,
) -> Result<FvSolution> {
    if cells < 10 {
        return Err(Error::Config(format!("cells={cells} below minimum of 10")));
    }
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(Error::Config(format!("cfl={cfl} outside (0, 0.5]")));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Config(format!("t_end={t_end} must be nonnegative")));
    }
    let (sp, cp, kp) = cfg.profiles()?;
    let (xl, xr) = (-cfg.window, cfg.window);
    let dx = (xr - xl) / cells as f64;
    let mut s: Vec<f64> = Vec::with_capacity(cells);
    let mut c: Vec<f64> = Vec::with_capacity(cells);
    let mut k: Vec<f64> = Vec::with_capacity(cells);
    for i in 0..cells {
        let a = xl + i as f64 * dx;
        let b = a + dx;
        s.push(cell_average(&sp, a, b));
        c.push(cell_average(&cp, a, b));
        k.push(cell_average(&kp, a, b));
    }
    let mut q: Vec<f64> = s.iter().zip(&c).map(|(s, c)| s * c).collect();

    let max_speed = model.sup_speed().max(1e-6);
    let dt_cfl = cfl * dx / max_speed;
    let steps = (t_end / dt_cfl).ceil().max(1.0) as u64;
    let dt = t_end / steps as f64;
    let lambda = dt / dx;

    for _ in 0..steps {
        let flux: Vec<f64> =
            par::map_indexed(cells, |i| model.f(s[i].clamp(0.0, 1.0), c[i], k[i]));
        // Upwind: the interface flux at i-1/2 is the flux of cell i-1; the
        // left boundary copies cell 0 (zero net flux into the first cell).
        let mut prev_f = flux[0];
        let mut prev_cf = c[0] * flux[0];
        for i in 0..cells {
            let fi = flux[i];
            let cfi = c[i] * fi;
            s[i] -= lambda * (fi - prev_f);
            q[i] -= lambda * (cfi - prev_cf);
            prev_f = fi;
            prev_cf = cfi;
        }
        for i in 0..cells {
            if s[i] > 1e-12 {
                c[i] = (q[i] / s[i]).clamp(0.0, 1.0);
            }
        }
    }
    Ok(FvSolution {
        xl,
        xr,
        s,
        q,
        c,
        k,
        t: t_end,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{FluxSpec, InitialSpec, ProfileSpec};

    fn cfg(s: ProfileSpec, c: ProfileSpec, k: ProfileSpec) -> RunConfig {
        RunConfig {
            flux: FluxSpec::default(),
            initial: InitialSpec { s, c, k },
            eps_list: vec![0.1],
            time_horizon: 1.0,
            window: 5.0,
            output_times: vec![],
            entropies: vec!["square".into()],
            seed: 0,
            max_events: None,
        }
    }

    #[test]
    fn constant_datum_stays_constant() {
        let cfg = cfg(
            ProfileSpec::Constant { value: 0.5 },
            ProfileSpec::Constant { value: 0.3 },
            ProfileSpec::Constant { value: 0.7 },
        );
        let model = cfg.model().unwrap();
        let fv = run_reference_fv(&cfg, &model, 50, 0.45, 0.5).unwrap();
        for (i, &v) in fv.s.iter().enumerate() {
            assert!((v - 0.5).abs() < 1e-14, "cell {i}: {v}");
        }
    }

    #[test]
    fn cfl_and_cell_validation() {
        let cfg = cfg(
            ProfileSpec::Constant { value: 0.5 },
            ProfileSpec::Constant { value: 0.5 },
            ProfileSpec::Constant { value: 0.5 },
        );
        let model = cfg.model().unwrap();
        assert!(run_reference_fv(&cfg, &model, 5, 0.45, 1.0).is_err());
        assert!(run_reference_fv(&cfg, &model, 100, 0.6, 1.0).is_err());
        assert!(run_reference_fv(&cfg, &model, 100, 0.0, 1.0).is_err());
    }

    #[test]
    fn conservation_up_to_boundary_fluxes() {
        let cfg = cfg(
            ProfileSpec::Piecewise {
                breakpoints: vec![0.0],
                values: vec![0.9, 0.1],
            },
            ProfileSpec::Piecewise {
                breakpoints: vec![-1.0],
                values: vec![0.2, 0.8],
            },
            ProfileSpec::Constant { value: 0.8 },
        );
        let model = cfg.model().unwrap();
        let coarse = run_reference_fv(&cfg, &model, 200, 0.45, 0.0).unwrap();
        let total0: f64 = coarse.s.iter().sum::<f64>() * coarse.dx();
        let one = run_reference_fv(&cfg, &model, 200, 0.45, 1.0).unwrap();
        let total1: f64 = one.s.iter().sum::<f64>() * one.dx();
        // Left boundary feeds f(U_0) = f(0.9, ...) per unit time; right
        // boundary drains f(U_last). Verify the budget coarsely: totals
        // change by at most the in/out flux bound.
        let bound = 1.0 * 1.0 + 1e-9;
        assert!((total1 - total0).abs() <= bound, "drift {}", total1 - total0);

        // Exact per-step telescoping: one explicit step by hand.
        let dx = one.dx();
        let max_speed = model.sup_speed();
        let dt = 0.45 * dx / max_speed;
        let lambda = dt / dx;
        let s = coarse.s.clone();
        let flux: Vec<f64> = (0..coarse.cells())
            .map(|i| model.f(s[i].clamp(0.0, 1.0), coarse.c[i], coarse.k[i]))
            .collect();
        let mut s1 = s.clone();
        let mut prev = flux[0];
        for i in 0..s1.len() {
            s1[i] -= lambda * (flux[i] - prev);
            prev = flux[i];
        }
        let drift: f64 =
            s1.iter().sum::<f64>() - s.iter().sum::<f64>() + lambda * (flux[s.len() - 1] - flux[0]);
        assert!(drift.abs() < 1e-12, "telescoping drift {drift}");
    }

    #[test]
    fn k_jump_steady_state_flux_continuous() {
        // With constant s feeding from the left and a k jump, the flux must
        // become continuous across the jump cell at steady state.
        let cfg = cfg(
            ProfileSpec::Constant { value: 0.6 },
            ProfileSpec::Constant { value: 0.2 },
            ProfileSpec::Piecewise {
                breakpoints: vec![0.0],
                values: vec![1.0, 0.5],
            },
        );
        let model = cfg.model().unwrap();
        let fv = run_reference_fv(&cfg, &model, 400, 0.45, 6.0).unwrap();
        let mid = fv.cells() / 2;
        let f_left = model.f(fv.s[mid - 2], fv.c[mid - 2], fv.k[mid - 2]);
        let f_right = model.f(fv.s[mid + 2], fv.c[mid + 2], fv.k[mid + 2]);
        assert!(
            (f_left - f_right).abs() < 1e-6,
            "flux jump {} at steady state",
            f_left - f_right
        );
    }
}
