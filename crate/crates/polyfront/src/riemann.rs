//! The three elementary Riemann solvers.
//!
//! Saturation jumps inside a region are resolved by the entropic solution
//! for the region's piecewise-linear flux, which is the lower convex (or
//! upper concave) envelope of its kink points. Polymer-fraction jumps are
//! resolved by the minimum jump condition: two monotone envelopes of the
//! unimodal curves `g(., c_L, k)` and `g(., c_R, k)` intersect at a unique
//! level `gamma`, which is both the common `g`-value and the speed of the
//! polymer wave. Permeability jumps are stationary and conserve `f` and `c`.

use crate::flux::{FluxModel, State};
use crate::grid::{RegionFlux, STATE_SNAP};
use crate::util::bisect_root;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontKind {
    /// Saturation wave (genuinely nonlinear family).
    S,
    /// Polymer-fraction contact wave.
    C,
    /// Stationary permeability contact wave.
    K,
}

impl FrontKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrontKind::S => "S",
            FrontKind::C => "C",
            FrontKind::K => "K",
        }
    }
}

/// A moving discontinuity.
#[derive(Clone, Copy, Debug)]
pub struct Front {
    pub kind: FrontKind,
    pub position: f64,
    pub speed: f64,
    pub left: State,
    pub right: State,
}

impl Front {
    /// Kind-specific continuity invariants: `f` and `c` across K fronts,
    /// `g` and `k` across C fronts, `c` and `k` across S fronts.
    pub fn validate(&self, model: &FluxModel, tol: f64) -> Result<()> {
        let err = |msg: String| Err(Error::InvariantViolation(msg));
        match self.kind {
            FrontKind::K => {
                if self.speed != 0.0 {
                    return err(format!("K front with speed {}", self.speed));
                }
                if self.left.c != self.right.c {
                    return err("c jumps across a K front".into());
                }
                let fl = model.f(self.left.s, self.left.c, self.left.k);
                let fr = model.f(self.right.s, self.right.c, self.right.k);
                if (fl - fr).abs() > tol {
                    return err(format!("f jumps across a K front by {}", fl - fr));
                }
            }
            FrontKind::C => {
                if self.left.k != self.right.k {
                    return err("k jumps across a C front".into());
                }
                if self.speed < -tol {
                    return err(format!("C front with negative speed {}", self.speed));
                }
                let gl = model.g(self.left.s, self.left.c, self.left.k);
                let gr = model.g(self.right.s, self.right.c, self.right.k);
                if (gl - gr).abs() > tol {
                    return err(format!("g jumps across a C front by {}", gl - gr));
                }
            }
            FrontKind::S => {
                if self.left.c != self.right.c || self.left.k != self.right.k {
                    return err("c or k jumps across an S front".into());
                }
                if self.left.s == 0.0 || self.right.s == 0.0 {
                    if self.speed < -tol {
                        return err(format!("S front with negative speed {}", self.speed));
                    }
                } else if self.speed <= 0.0 {
                    return err(format!("S front with nonpositive speed {}", self.speed));
                }
                let df = model.f(self.right.s, self.right.c, self.right.k)
                    - model.f(self.left.s, self.left.c, self.left.k);
                let rh = df - self.speed * (self.right.s - self.left.s);
                if rh.abs() > tol {
                    return err(format!("S front violates Rankine-Hugoniot by {rh}"));
                }
            }
        }
        Ok(())
    }
}

/// An ordered fan of fronts with non-decreasing speeds.
#[derive(Clone, Debug, Default)]
pub struct WaveFan {
    pub fronts: Vec<Front>,
}

impl WaveFan {
    pub fn is_empty(&self) -> bool {
        self.fronts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.fronts.len()
    }

    /// Adjacent fronts must share the intermediate state and speeds must be
    /// sorted.
    pub fn validate_chain(&self, left: State, right: State) -> Result<()> {
        let err = |msg: String| Err(Error::InvariantViolation(msg));
        let mut prev = left;
        let mut prev_speed = f64::NEG_INFINITY;
        for f in &self.fronts {
            if (f.left.s - prev.s).abs() > STATE_SNAP
                || f.left.c != prev.c && prev.s > 0.0 && f.left.s > 0.0 && f.kind != FrontKind::C
            {
                // c may only change across the C front itself.
            }
            if (f.left.s - prev.s).abs() > STATE_SNAP {
                return err(format!(
                    "fan not chained: left s {} vs previous {}",
                    f.left.s, prev.s
                ));
            }
            if f.speed < prev_speed - 1e-12 {
                return err(format!(
                    "fan speeds unsorted: {} after {}",
                    f.speed, prev_speed
                ));
            }
            prev_speed = f.speed;
            prev = f.right;
        }
        if (prev.s - right.s).abs() > STATE_SNAP {
            return err(format!(
                "fan not chained at right end: {} vs {}",
                prev.s, right.s
            ));
        }
        Ok(())
    }
}

/// Entropic solution of the scalar Riemann problem for a piecewise-linear
/// flux: the chords of the lower convex envelope for `s_l < s_r`, of the
/// upper concave envelope for `s_l > s_r`. Both states must be kinks.
pub fn solve_scalar_pl(flux: &RegionFlux, s_l: f64, s_r: f64) -> Result<WaveFan> {
    let il = flux.index_of(s_l)?;
    let ir = flux.index_of(s_r)?;
    Ok(WaveFan {
        fronts: scalar_fronts(flux, il, ir),
    })
}

fn state_at(flux: &RegionFlux, idx: usize) -> State {
    State {
        s: flux.kinks[idx],
        c: flux.curve.gamma,
        k: flux.curve.kappa,
    }
}

/// Envelope fronts between kink indices, increasing speeds left to right.
pub(crate) fn scalar_fronts(flux: &RegionFlux, il: usize, ir: usize) -> Vec<Front> {
    if il == ir {
        return Vec::new();
    }
    let xs = &flux.kinks;
    let ys = &flux.values;
    let (lo, hi, lower) = if il < ir { (il, ir, true) } else { (ir, il, false) };
    // Monotone-chain hull over [lo, hi]; `lower` picks the envelope side.
    let mut hull: Vec<usize> = Vec::with_capacity(hi - lo + 1);
    for m in lo..=hi {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b when slope(a,b) >= slope(b,m) for the lower hull,
            // slope(a,b) <= slope(b,m) for the upper hull.
            let lhs = (ys[b] - ys[a]) * (xs[m] - xs[b]);
            let rhs = (ys[m] - ys[b]) * (xs[b] - xs[a]);
            let pop = if lower { lhs >= rhs } else { lhs <= rhs };
            if pop {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(m);
    }
    let mut fronts = Vec::with_capacity(hull.len() - 1);
    if lower {
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            fronts.push(Front {
                kind: FrontKind::S,
                position: 0.0,
                speed: (ys[b] - ys[a]) / (xs[b] - xs[a]),
                left: state_at(flux, a),
                right: state_at(flux, b),
            });
        }
    } else {
        // Concave case: traverse from the high-saturation end; slopes of a
        // concave hull decrease in sigma, so this yields increasing speeds.
        for w in hull.windows(2).rev() {
            let (a, b) = (w[0], w[1]);
            fronts.push(Front {
                kind: FrontKind::S,
                position: 0.0,
                speed: (ys[b] - ys[a]) / (xs[b] - xs[a]),
                left: state_at(flux, b),
                right: state_at(flux, a),
            });
        }
    }
    fronts
}

/// Smallest Oleinik margin of the chord from kink `il` to kink `ir` over
/// the kinks strictly between them; entropic fronts have margin
/// `>= -1e-12`.
pub fn oleinik_margin(flux: &RegionFlux, il: usize, ir: usize) -> f64 {
    let (lo, hi) = if il < ir { (il, ir) } else { (ir, il) };
    if hi - lo < 2 {
        return 0.0;
    }
    let sgn = if il < ir { 1.0 } else { -1.0 };
    let x0 = flux.kinks[il];
    let y0 = flux.values[il];
    let v = (flux.values[ir] - y0) / (flux.kinks[ir] - x0);
    let mut margin = f64::INFINITY;
    for m in lo + 1..hi {
        let chord = y0 + v * (flux.kinks[m] - x0);
        margin = margin.min(sgn * (flux.values[m] - chord));
    }
    margin
}

/// Non-increasing envelope `G_L` of `g(., c_L, k)` anchored at `s_L`:
/// the running maximum to the left of the anchor and the running minimum to
/// its right, evaluated in closed form from the unimodal branch structure.
pub struct EnvelopeLeft {
    model: FluxModel,
    pub cap: f64,
    sigma_max: f64,
    g_max: f64,
    gamma: f64,
    kappa: f64,
}

impl EnvelopeLeft {
    pub fn eval(&self, sigma: f64) -> f64 {
        let e = if sigma <= self.sigma_max {
            self.g_max
        } else {
            self.model.g(sigma, self.gamma, self.kappa)
        };
        self.cap.min(e)
    }
}

/// Non-decreasing envelope `G_R` of `g(., c_R, k)` anchored at `s_R`.
pub struct EnvelopeRight {
    model: FluxModel,
    pub cap: f64,
    sigma_max: f64,
    g_max: f64,
    gamma: f64,
    kappa: f64,
}

impl EnvelopeRight {
    pub fn eval(&self, sigma: f64) -> f64 {
        let a = if sigma <= self.sigma_max {
            self.model.g(sigma, self.gamma, self.kappa)
        } else {
            self.g_max
        };
        self.cap.min(a)
    }
}

pub fn build_gl(s_l: f64, c_l: f64, k: f64, model: &FluxModel) -> EnvelopeLeft {
    let curve = model.curve(c_l, k);
    let cap = if s_l <= curve.sigma_max {
        model.g(s_l, c_l, k)
    } else {
        curve.g_max
    };
    EnvelopeLeft {
        model: model.clone(),
        cap,
        sigma_max: curve.sigma_max,
        g_max: curve.g_max,
        gamma: c_l,
        kappa: k,
    }
}

pub fn build_gr(s_r: f64, c_r: f64, k: f64, model: &FluxModel) -> EnvelopeRight {
    let curve = model.curve(c_r, k);
    let cap = if s_r <= curve.sigma_max {
        curve.g_max
    } else {
        model.g(s_r, c_r, k)
    };
    EnvelopeRight {
        model: model.clone(),
        cap,
        sigma_max: curve.sigma_max,
        g_max: curve.g_max,
        gamma: c_r,
        kappa: k,
    }
}

/// Solution of a polymer-fraction Riemann problem by the minimum jump
/// condition.
#[derive(Clone, Debug)]
pub struct CWaveSolution {
    /// Left state of the C front.
    pub s_minus: f64,
    /// Right state of the C front.
    pub s_plus: f64,
    /// The common level `g(s_minus, c_L, k) = g(s_plus, c_R, k)`.
    pub gamma: f64,
    /// Speed of the C front; equals `gamma`.
    pub lambda_c: f64,
    /// Saturation fan between `s_L` and `s_minus` (flux of the left region).
    pub left_fan: WaveFan,
    /// Saturation fan between `s_plus` and `s_R` (flux of the right region).
    pub right_fan: WaveFan,
    /// False only for the degenerate `c_L = c_R` problem.
    pub has_c_front: bool,
}

/// Minimum-jump solver. `flux_l` must be the region flux for `(c_l, k)` and
/// `flux_r` for `(c_r, k)`; `s_l`, `s_r` must be kinks of their regions.
#[allow(clippy::too_many_arguments)]
pub fn solve_c_minjump(
    s_l: f64,
    c_l: f64,
    s_r: f64,
    c_r: f64,
    k: f64,
    flux_l: &RegionFlux,
    flux_r: &RegionFlux,
    model: &FluxModel,
) -> Result<CWaveSolution> {
    let il = flux_l.index_of(s_l)?;
    let ir = flux_r.index_of(s_r)?;
    let s_l = flux_l.kinks[il];
    let s_r = flux_r.kinks[ir];

    if c_l.to_bits() == c_r.to_bits() {
        let fan = WaveFan {
            fronts: scalar_fronts(flux_l, il, ir),
        };
        let gamma = model.g(s_r, c_r, k);
        return Ok(CWaveSolution {
            s_minus: s_r,
            s_plus: s_r,
            gamma,
            lambda_c: gamma,
            left_fan: fan,
            right_fan: WaveFan::default(),
            has_c_front: false,
        });
    }

    let curve_l = flux_l.curve;
    let curve_r = flux_r.curve;
    debug_assert_eq!(curve_l.gamma.to_bits(), c_l.to_bits());
    debug_assert_eq!(curve_r.gamma.to_bits(), c_r.to_bits());

    let cap_l = if s_l <= curve_l.sigma_max {
        model.g(s_l, c_l, k)
    } else {
        curve_l.g_max
    };
    let cap_r = if s_r <= curve_r.sigma_max {
        curve_r.g_max
    } else {
        model.g(s_r, c_r, k)
    };
    // The envelopes may also cross where the decreasing branch of g_L meets
    // the increasing branch of g_R; that happens at most once, on the
    // interval between the two maximum points.
    let mut gamma = cap_l.min(cap_r);
    if curve_l.sigma_max < curve_r.sigma_max {
        let d = |s: f64| model.g(s, c_l, k) - model.g(s, c_r, k);
        let d0 = d(curve_l.sigma_max);
        let d1 = d(curve_r.sigma_max);
        if d0 != 0.0 && d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
            let root = bisect_root(d, curve_l.sigma_max, curve_r.sigma_max);
            let gx = 0.5 * (model.g(root, c_l, k) + model.g(root, c_r, k));
            if gx < gamma {
                gamma = gx;
            }
        }
    }

    // Projections of s_l and s_r onto the preimage intervals of gamma.
    let im = if gamma == cap_l {
        if s_l <= curve_l.sigma_max {
            il
        } else {
            flux_l.peak_idx
        }
    } else {
        flux_l.kink_by_level_dec(gamma)
    };
    let ip = if gamma == cap_r {
        if s_r > curve_r.sigma_max {
            ir
        } else {
            flux_r.peak_idx
        }
    } else {
        flux_r.kink_by_level_inc(gamma)
    };
    let s_minus = flux_l.kinks[im];
    let s_plus = flux_r.kinks[ip];
    for (side, g, kink) in [
        ("left", flux_l.g_at(im), s_minus),
        ("right", flux_r.g_at(ip), s_plus),
    ] {
        if (g - gamma).abs() > STATE_SNAP {
            return Err(Error::InvariantViolation(format!(
                "minimum-jump {side} projection {kink} misses level {gamma} by {}",
                (g - gamma).abs()
            )));
        }
    }

    let left_fan = WaveFan {
        fronts: scalar_fronts(flux_l, il, im),
    };
    let right_fan = WaveFan {
        fronts: scalar_fronts(flux_r, ip, ir),
    };
    for f in &left_fan.fronts {
        if f.speed > gamma + STATE_SNAP {
            return Err(Error::InvariantViolation(format!(
                "left fan speed {} exceeds lambda_c {gamma}",
                f.speed
            )));
        }
    }
    for f in &right_fan.fronts {
        if f.speed < gamma - STATE_SNAP {
            return Err(Error::InvariantViolation(format!(
                "right fan speed {} below lambda_c {gamma}",
                f.speed
            )));
        }
    }
    Ok(CWaveSolution {
        s_minus,
        s_plus,
        gamma,
        lambda_c: gamma,
        left_fan,
        right_fan,
        has_c_front: true,
    })
}

/// Rankine-Hugoniot residuals of the C front for both conservation laws.
pub fn c_front_rh_residuals(
    sol: &CWaveSolution,
    c_l: f64,
    c_r: f64,
    k: f64,
    model: &FluxModel,
) -> (f64, f64) {
    let fl = model.f(sol.s_minus, c_l, k);
    let fr = model.f(sol.s_plus, c_r, k);
    let r1 = fr - fl - sol.lambda_c * (sol.s_plus - sol.s_minus);
    let r2 = c_r * fr - c_l * fl - sol.lambda_c * (c_r * sol.s_plus - c_l * sol.s_minus);
    (r1.abs(), r2.abs())
}

/// Verifies the two-case entropy condition of the C front by sampling `g`
/// on the stated subintervals; returns false if no admissible split point
/// exists.
pub fn c_wave_entropy_ok(
    sol: &CWaveSolution,
    c_l: f64,
    c_r: f64,
    k: f64,
    model: &FluxModel,
    samples: usize,
) -> bool {
    let lam = sol.lambda_c;
    let tol = 1e-9;
    let (a, b) = (sol.s_minus.min(sol.s_plus), sol.s_minus.max(sol.s_plus));
    if b - a <= 0.0 {
        return true;
    }
    let at = |i: usize| a + (b - a) * i as f64 / samples as f64;
    if sol.s_minus < sol.s_plus {
        // g_L >= lambda on [s-, s*], g_R >= lambda on [s*, s+].
        let mut hi = 0usize;
        while hi < samples && model.g(at(hi + 1), c_l, k) >= lam - tol {
            hi += 1;
        }
        let mut lo = samples;
        while lo > 0 && model.g(at(lo - 1), c_r, k) >= lam - tol {
            lo -= 1;
        }
        lo <= hi
    } else {
        // g_R <= lambda on [s+, s*], g_L <= lambda on [s*, s-].
        let mut hi = 0usize;
        while hi < samples && model.g(at(hi + 1), c_r, k) <= lam + tol {
            hi += 1;
        }
        let mut lo = samples;
        while lo > 0 && model.g(at(lo - 1), c_l, k) <= lam + tol {
            lo -= 1;
        }
        lo <= hi
    }
}

/// Right state of the stationary permeability wave: the unique `s_m` with
/// `f(s_m, c_l, k_r) = f(s_l, c_l, k_l)`.
pub fn solve_k(s_l: f64, c_l: f64, k_l: f64, k_r: f64, model: &FluxModel) -> f64 {
    if k_l.to_bits() == k_r.to_bits() {
        return s_l;
    }
    let target = model.f(s_l, c_l, k_l);
    model.invert_f(target, c_l, k_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::Curve;
    use crate::grid::ValueGrid;
    use crate::GridSystem;
    use proptest::prelude::*;

    fn model() -> FluxModel {
        FluxModel::corey()
    }

    /// Hand-built region flux over explicit kinks (tests only).
    fn toy_flux(kinks: Vec<f64>, values: Vec<f64>) -> RegionFlux {
        let slopes = kinks
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        let n = kinks.len();
        RegionFlux {
            band: 0,
            c_index: 0,
            curve: Curve {
                gamma: 0.5,
                kappa: 0.5,
                sigma_max: kinks[n / 2],
                g_max: 1.0,
            },
            kinks,
            values,
            slopes,
            peak_idx: n / 2,
            cutoff: 0,
            visible_count: 0,
        }
    }

    #[test]
    fn scalar_solver_worked_example() {
        let flux = toy_flux(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.1, 0.5, 0.9, 1.0],
        );
        let fan = solve_scalar_pl(&flux, 0.0, 1.0).unwrap();
        assert_eq!(fan.len(), 2);
        assert!((fan.fronts[0].speed - 0.4).abs() < 1e-12);
        assert!((fan.fronts[0].right.s - 0.25).abs() < 1e-15);
        assert!((fan.fronts[1].speed - 1.2).abs() < 1e-12);
        // Reversed data: concave envelope, mirror speeds.
        let fan = solve_scalar_pl(&flux, 1.0, 0.0).unwrap();
        assert_eq!(fan.len(), 2);
        assert!((fan.fronts[0].speed - 0.4).abs() < 1e-12);
        assert!((fan.fronts[0].left.s - 1.0).abs() < 1e-15);
        assert!((fan.fronts[0].right.s - 0.75).abs() < 1e-15);
        assert!((fan.fronts[1].speed - 1.2).abs() < 1e-12);
        // No jump, no fan.
        assert!(solve_scalar_pl(&flux, 0.5, 0.5).unwrap().is_empty());
        // Off-grid state rejected.
        assert!(solve_scalar_pl(&flux, 0.3, 1.0).is_err());
    }

    /// Independent envelope oracle: repeatedly pick the extreme-slope chord.
    fn hull_oracle(flux: &RegionFlux, il: usize, ir: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        if il == ir {
            return out;
        }
        let lower = il < ir;
        let (mut cur, end) = (il, ir);
        loop {
            if cur == end {
                break;
            }
            let range: Vec<usize> = if lower {
                (cur + 1..=end).collect()
            } else {
                (end..cur).rev().collect()
            };
            let mut best = range[0];
            let mut best_slope = f64::NAN;
            for m in range {
                let slope = (flux.values[m] - flux.values[cur]) / (flux.kinks[m] - flux.kinks[cur]);
                // Lower hull going right wants the minimal slope; the
                // concave case going left wants the minimal slope as well
                // (mirrored), with ties broken by the farthest point.
                if best_slope.is_nan()
                    || slope < best_slope - 1e-15
                    || (slope - best_slope).abs() <= 1e-15
                {
                    if best_slope.is_nan() || slope < best_slope - 1e-15 {
                        best_slope = slope;
                        best = m;
                    } else if (lower && m > best) || (!lower && m < best) {
                        best = m;
                    }
                }
            }
            out.push((cur, best, best_slope));
            cur = best;
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn hull_matches_bruteforce_oracle(
            raw in proptest::collection::vec(0.0f64..1.0, 1..48),
            endpoints in (0usize..50, 0usize..50)
        ) {
            let mut kinks: Vec<f64> = raw.clone();
            kinks.push(0.0);
            kinks.push(1.0);
            kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            kinks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            let n = kinks.len();
            prop_assume!(n >= 2);
            let mut values: Vec<f64> = kinks.iter().map(|&s| s * s).collect();
            // Perturb into a generic monotone profile.
            for (i, v) in values.iter_mut().enumerate() {
                *v += (i as f64 * 0.37).sin().abs() * 1e-3 * i as f64;
            }
            let flux = toy_flux(kinks, values);
            let il = endpoints.0 % n;
            let ir = endpoints.1 % n;
            let fan = scalar_fronts(&flux, il, ir);
            let oracle = hull_oracle(&flux, il, ir);
            prop_assert_eq!(fan.len(), oracle.len());
            for (f, (a, b, slope)) in fan.iter().zip(&oracle) {
                prop_assert!((f.speed - slope).abs() <= 1e-12);
                prop_assert_eq!(f.left.s.to_bits(), flux.kinks[*a].to_bits());
                prop_assert_eq!(f.right.s.to_bits(), flux.kinks[*b].to_bits());
            }
            // Speeds sorted and Oleinik margins nonnegative.
            for w in fan.windows(2) {
                prop_assert!(w[1].speed >= w[0].speed - 1e-13);
            }
            for f in &fan {
                let ia = flux.index_of(f.left.s).unwrap();
                let ib = flux.index_of(f.right.s).unwrap();
                prop_assert!(oleinik_margin(&flux, ia, ib) >= -1e-12);
            }
        }
    }

    #[test]
    fn envelopes_match_dense_running_extrema() {
        let m = model();
        let n = 8192;
        for (s_anchor, c, k) in [(0.3, 0.0, 1.0), (0.85, 0.5, 0.5), (0.0, 0.9, 0.2)] {
            let gl = build_gl(s_anchor, c, k, &m);
            let gr = build_gr(s_anchor, c, k, &m);
            assert!((gl.eval(s_anchor) - m.g(s_anchor, c, k)).abs() < 1e-12);
            assert!((gr.eval(s_anchor) - m.g(s_anchor, c, k)).abs() < 1e-12);
            // Dense running max/min oracle.
            let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let ia = grid.partition_point(|&x| x < s_anchor);
            let mut gl_oracle = vec![0.0; grid.len()];
            let mut run = f64::NEG_INFINITY;
            for i in (0..=ia.min(n)).rev() {
                run = run.max(m.g(grid[i], c, k));
                gl_oracle[i] = run;
            }
            let mut run = f64::INFINITY;
            for i in ia..=n {
                run = run.min(m.g(grid[i], c, k));
                gl_oracle[i] = run.min(m.g(s_anchor, c, k).max(gl_oracle[ia.min(n)]));
            }
            // Compare away from the anchor cell (the oracle's resolution).
            let mut prev_l = f64::INFINITY;
            let mut prev_r = f64::NEG_INFINITY;
            for i in 0..=n {
                let s = grid[i];
                let el = gl.eval(s);
                let er = gr.eval(s);
                assert!(el <= prev_l + 1e-12, "G_L not non-increasing at {s}");
                assert!(er >= prev_r - 1e-12, "G_R not non-decreasing at {s}");
                prev_l = el;
                prev_r = er;
                assert!(
                    (el - gl_oracle[i]).abs() < 2e-3,
                    "G_L {el} vs oracle {} at {s}",
                    gl_oracle[i]
                );
            }
        }
    }

    fn two_c_system(s_left: f64, c_left: f64, s_right: f64, c_right: f64, k: f64) -> GridSystem {
        let m = model();
        let cells = [
            State {
                s: s_left,
                c: c_left,
                k,
            },
            State {
                s: s_right,
                c: c_right,
                k,
            },
        ];
        let grid = ValueGrid::build(&cells, vec![c_left, c_right], vec![k], 0.1, &m).unwrap();
        GridSystem::new(grid, m)
    }

    #[test]
    fn minjump_worked_example() {
        let mut gs = two_c_system(0.3, 0.0, 0.3, 0.5, 1.0);
        let m = gs.model().clone();
        let fl = gs.region(0, 0).unwrap();
        let fr = gs.region(0, 1).unwrap();
        let sol = solve_c_minjump(0.3, 0.0, 0.3, 0.5, 1.0, &fl, &fr, &m).unwrap();
        assert!((sol.gamma - 0.54608).abs() < 1e-4, "gamma {}", sol.gamma);
        assert!((sol.s_plus - 0.31175).abs() < 1e-4, "s_plus {}", sol.s_plus);
        assert_eq!(sol.s_minus, 0.3);
        assert!(sol.left_fan.is_empty());
        let (r1, r2) = c_front_rh_residuals(&sol, 0.0, 0.5, 1.0, &m);
        assert!(r1 <= 1e-10 && r2 <= 1e-10, "RH residuals {r1} {r2}");
        assert!(gs.grid.contains_level(sol.gamma, 1e-10));
        assert!(c_wave_entropy_ok(&sol, 0.0, 0.5, 1.0, &m, 1000));
    }

    #[test]
    fn minjump_trivial_cases() {
        let mut gs = two_c_system(0.4, 0.2, 0.4, 0.8, 1.0);
        let m = gs.model().clone();
        let fl = gs.region(0, 0).unwrap();
        // c_L = c_R: single scalar fan, no C front.
        let sol = solve_c_minjump(0.4, 0.2, 0.4, 0.2, 1.0, &fl, &fl, &m).unwrap();
        assert!(!sol.has_c_front);
        assert!(sol.left_fan.is_empty() && sol.right_fan.is_empty());
        // s = 0 on the left forces the zero-speed polymer wave.
        let fr = gs.region(0, 1).unwrap();
        let i0 = fl.index_of(0.0).unwrap();
        assert_eq!(fl.kinks[i0], 0.0);
        let sol = solve_c_minjump(0.0, 0.2, 0.4, 0.8, 1.0, &fl, &fr, &m).unwrap();
        assert_eq!(sol.lambda_c, 0.0);
        assert_eq!(sol.s_minus, 0.0);
        assert_eq!(sol.s_plus, 0.0);
        assert!(sol.left_fan.is_empty());
        assert!(!sol.right_fan.is_empty());
        for f in &sol.right_fan.fronts {
            assert!(f.speed >= 0.0);
        }
    }

    #[test]
    fn minjump_degenerate_equals_scalar() {
        // The general construction with identical curves must reproduce the
        // plain scalar fan.
        let mut gs = two_c_system(0.75, 0.3, 0.65, 0.7, 1.0);
        let m = gs.model().clone();
        let fl = gs.region(0, 0).unwrap();
        let fr = gs.region(0, 1).unwrap();
        // c = 0.3 and c = 0.7 give identical mobility, hence identical g.
        let sol = solve_c_minjump(0.75, 0.3, 0.65, 0.7, 1.0, &fl, &fr, &m).unwrap();
        let direct = solve_scalar_pl(&fl, 0.75, 0.65).unwrap();
        let combined: Vec<&Front> = sol
            .left_fan
            .fronts
            .iter()
            .chain(sol.right_fan.fronts.iter())
            .collect();
        // The C front carries no saturation jump here.
        assert!((sol.s_minus - sol.s_plus).abs() <= 1e-12);
        assert_eq!(combined.len(), direct.len());
        for (a, b) in combined.iter().zip(&direct.fronts) {
            assert!((a.speed - b.speed).abs() < 1e-12);
            assert!((a.left.s - b.left.s).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_k_examples() {
        let m = model();
        // Equal permeability: identity, bit-exact.
        assert_eq!(solve_k(0.37, 0.2, 0.8, 0.8, &m), 0.37);
        // Endpoint saturations are fixed points.
        assert_eq!(solve_k(0.0, 0.3, 0.2, 0.9, &m), 0.0);
        assert_eq!(solve_k(1.0, 0.3, 0.2, 0.9, &m), 1.0);
        // Worked value: a_l = 1 (kappa = 0), a_r = 0.9375 (kappa = 1, c = 0).
        let sm = solve_k(0.5, 0.0, 0.0, 1.0, &m);
        assert!((sm - 0.49193).abs() < 1e-5, "{sm}");
        let res = (m.f(sm, 0.0, 1.0) - m.f(0.5, 0.0, 0.0)).abs();
        assert!(res <= 1e-12, "f residual {res}");
    }

    #[test]
    fn global_solver_composes() {
        let m = model();
        let left = State {
            s: 0.8,
            c: 0.1,
            k: 1.0,
        };
        let right = State {
            s: 0.2,
            c: 0.9,
            k: 0.4,
        };
        let grid = ValueGrid::build(
            &[left, right],
            vec![left.c, right.c],
            vec![left.k, right.k],
            0.1,
            &m,
        )
        .unwrap();
        let mut gs = GridSystem::new(grid, m.clone());
        let (fan, _) = gs.solve_global(left, right, 0, 1, 0, 1).unwrap();
        // K front first at speed zero, then a C front, speeds sorted.
        assert_eq!(fan.fronts[0].kind, FrontKind::K);
        assert_eq!(fan.fronts[0].speed, 0.0);
        assert_eq!(
            fan.fronts.iter().filter(|f| f.kind == FrontKind::C).count(),
            1
        );
        let mut prev = f64::NEG_INFINITY;
        for f in &fan.fronts {
            assert!(f.speed >= prev - 1e-12);
            prev = f.speed;
            f.validate(&m, 1e-10).unwrap();
        }
        fan.validate_chain(left, right).unwrap();
        // Identical states: empty fan.
        let (fan, _) = gs.solve_global(left, left, 0, 0, 0, 0).unwrap();
        assert!(fan.is_empty());
        // Pure saturation jump: S fronts only.
        let l2 = State {
            s: 0.9,
            c: 0.1,
            k: 1.0,
        };
        let il = gs.region(0, 0).unwrap().index_of(0.9);
        assert!(il.is_err() || il.is_ok()); // 0.9 may or may not be a kink
        let (s_snapped, _) = gs.register_state(0, 0, 0.9).unwrap();
        let l2 = State { s: s_snapped, ..l2 };
        let (fan, _) = gs
            .solve_global(
                l2,
                State {
                    s: left.s,
                    c: left.c,
                    k: left.k,
                },
                0,
                0,
                0,
                0,
            )
            .unwrap();
        assert!(fan.fronts.iter().all(|f| f.kind == FrontKind::S));
    }
}
