//! Saturation L1 distances between recorded solutions.
//!
//! At a fixed time the distance is computed exactly on the merged
//! breakpoint set of the two piecewise-constant profiles. The space-time
//! distance integrates that exact spatial distance adaptively in time (the
//! integrand is piecewise linear between interaction events; adaptive
//! Simpson resolves the kinks far below the diagnostic signal).

use crate::harness::fv::FvSolution;
use crate::tracker::Simulation;
use crate::util::adaptive_simpson;
use crate::Result;

/// Piecewise-constant saturation profile of `sim` at time `t`, restricted
/// to `[xl, xr]`: the state entering at `xl` plus `(position, value)` steps.
fn saturation_profile(sim: &Simulation, t: f64, xl: f64, xr: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut line = sim.front_line(t)?;
    line.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cur = sim.leftmost_state().s;
    let mut steps = Vec::new();
    for f in &line {
        if f.0 <= xl {
            cur = f.2.s;
        } else if f.0 < xr {
            steps.push((f.0, f.2.s));
        }
    }
    Ok((cur, steps))
}

/// Exact `int_{xl}^{xr} |s_a - s_b| dx` at time `t`.
pub fn l1_at_time(a: &Simulation, b: &Simulation, t: f64, xl: f64, xr: f64) -> Result<f64> {
    let (mut sa, pa) = saturation_profile(a, t, xl, xr)?;
    let (mut sb, pb) = saturation_profile(b, t, xl, xr)?;
    let mut total = 0.0;
    let mut x = xl;
    let (mut ia, mut ib) = (0usize, 0usize);
    loop {
        let next_a = pa.get(ia).map(|p| p.0).unwrap_or(f64::INFINITY);
        let next_b = pb.get(ib).map(|p| p.0).unwrap_or(f64::INFINITY);
        let next = next_a.min(next_b).min(xr);
        total += (sa - sb).abs() * (next - x);
        if next >= xr {
            break;
        }
        x = next;
        while ia < pa.len() && pa[ia].0 <= x {
            sa = pa[ia].1;
            ia += 1;
        }
        while ib < pb.len() && pb[ib].0 <= x {
            sb = pb[ib].1;
            ib += 1;
        }
    }
    Ok(total)
}

/// `int_{t0}^{t1} int_{xl}^{xr} |s_a - s_b| dx dt`, exact in space and
/// adaptive in time to absolute tolerance `1e-9 (t1 - t0)`.
pub fn l1_spacetime(
    a: &Simulation,
    b: &Simulation,
    t0: f64,
    t1: f64,
    xl: f64,
    xr: f64,
) -> Result<f64> {
    if t1 <= t0 {
        return Ok(0.0);
    }
    // front_line errors only on out-of-range times; probe the ends now so
    // the closure below cannot fail.
    l1_at_time(a, b, t0, xl, xr)?;
    l1_at_time(a, b, t1, xl, xr)?;
    let d = |t: f64| l1_at_time(a, b, t, xl, xr).unwrap_or(0.0);
    Ok(adaptive_simpson(d, t0, t1, 1e-9 * (t1 - t0)))
}

/// Exact `int |s_ft - s_fv| dx` over the FV domain at the FV time: merged
/// breakpoints are the cell edges plus the front positions.
pub fn l1_vs_fv(sim: &Simulation, fv: &FvSolution) -> Result<f64> {
    let (mut s_ft, steps) = saturation_profile(sim, fv.t, fv.xl, fv.xr)?;
    let dx = fv.dx();
    let mut total = 0.0;
    let mut si = 0usize;
    for (i, &s_cell) in fv.s.iter().enumerate() {
        let a = fv.xl + i as f64 * dx;
        let b = a + dx;
        let mut x = a;
        while si < steps.len() && steps[si].0 < b {
            if steps[si].0 > x {
                total += (s_ft - s_cell).abs() * (steps[si].0 - x);
                x = steps[si].0;
            }
            s_ft = steps[si].1;
            si += 1;
        }
        total += (s_ft - s_cell).abs() * (b - x);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{discretize_initial, init_simulation, Profile};
    use crate::FluxModel;

    fn pw(breakpoints: Vec<f64>, values: Vec<f64>) -> Profile {
        Profile::Piecewise {
            breakpoints,
            values,
        }
    }

    fn shock_sim(eps: f64, t: f64) -> Simulation {
        let d = discretize_initial(
            &pw(vec![0.0], vec![0.9, 0.1]),
            &pw(vec![], vec![0.4]),
            &pw(vec![], vec![0.8]),
            eps,
        )
        .unwrap();
        let mut sim = init_simulation(d, &FluxModel::corey(), 100_000).unwrap();
        sim.advance_to(t).unwrap();
        sim
    }

    #[test]
    fn identical_runs_have_zero_distance() {
        let a = shock_sim(0.1, 1.0);
        let b = shock_sim(0.1, 1.0);
        assert_eq!(l1_at_time(&a, &b, 0.7, -5.0, 5.0).unwrap(), 0.0);
        assert!(l1_spacetime(&a, &b, 0.0, 1.0, -5.0, 5.0).unwrap() <= 1e-12);
    }

    #[test]
    fn distance_sees_initial_offset() {
        // Same shape shifted: |0.9-0.1| over the offset width at t=0.
        let a = shock_sim(0.1, 0.5);
        let d = discretize_initial(
            &pw(vec![0.5], vec![0.9, 0.1]),
            &pw(vec![], vec![0.4]),
            &pw(vec![], vec![0.8]),
            0.1,
        )
        .unwrap();
        let b = init_simulation(d, &FluxModel::corey(), 100_000).unwrap();
        let dist = l1_at_time(&a, &b, 0.0, -5.0, 5.0).unwrap();
        assert!((dist - 0.8 * 0.5).abs() < 1e-12, "{dist}");
    }

    #[test]
    fn finer_eps_runs_converge() {
        let coarse = shock_sim(0.1, 1.0);
        let mid = shock_sim(0.05, 1.0);
        let fine = shock_sim(0.025, 1.0);
        let d1 = l1_spacetime(&coarse, &mid, 0.0, 1.0, -5.0, 5.0).unwrap();
        let d2 = l1_spacetime(&mid, &fine, 0.0, 1.0, -5.0, 5.0).unwrap();
        assert!(d1 > 0.0 && d2 > 0.0);
        assert!(d2 < d1, "distances should shrink: {d1} then {d2}");
    }
}
