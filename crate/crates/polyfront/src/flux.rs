//! The parameterized flux family `f(sigma, gamma, kappa)` and its derived
//! scalar quantities.
//!
//! For every `(gamma, kappa)` the map `sigma -> f` is an S-shaped
//! Buckley-Leverett fractional flow curve: `f(0) = 0`, `f(1) = 1`, vanishing
//! derivative at both endpoints, convex at 0, concave at 1, with a single
//! inflection point. The derived map `g = f/sigma` (extended by `g(0) = 0`)
//! is unimodal with a single interior maximum, and `P = int_0^sigma |dg|`
//! is the strictly increasing singular variable. Families are pluggable;
//! registration runs a structural-condition suite and rejects violators.

use crate::par;
use crate::util::{adaptive_simpson, bisect_root, invert_monotone};
use crate::{Error, Result};
use std::sync::{Arc, OnceLock};

/// A point `(s, c, k)` of the state space `[0,1]^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    /// Water saturation.
    pub s: f64,
    /// Polymer fraction dissolved in water.
    pub c: f64,
    /// Rock permeability.
    pub k: f64,
}

impl State {
    pub fn new(s: f64, c: f64, k: f64) -> Result<Self> {
        let st = State { s, c, k };
        st.validate()?;
        Ok(st)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s", self.s), ("c", self.c), ("k", self.k)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "state component {name}={v} outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(Error::Domain(format!("{name}={v} outside [0,1]")));
    }
    Ok(())
}

/// A two-parameter family of S-shaped flux curves.
///
/// Implementations must satisfy, for every `(gamma, kappa)` in `[0,1]^2`:
/// `f(0)=0`, `f(1)=1`, `df(0)=df(1)=0`, `d2f(0)>0`, `d2f(1)<0`, `df>=0`,
/// and a single inflection in `sigma`. [`FluxModel::new`] verifies these.
pub trait FluxFamily: Send + Sync {
    fn f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64;
    fn df(&self, sigma: f64, gamma: f64, kappa: f64) -> f64;
    fn d2f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64;
    fn name(&self) -> &'static str;
}

/// Corey-type fractional flow `f = sigma^2 / (sigma^2 + a (1-sigma)^2)`
/// with mobility ratio `a(gamma, kappa) = 1 - curvature * kappa * (gamma - 1/2)^2`.
#[derive(Clone, Debug)]
pub struct Corey {
    curvature: f64,
}

impl Corey {
    /// `curvature` must lie in `[0, 4)` so that `a` stays positive.
    pub fn new(curvature: f64) -> Result<Self> {
        if !(0.0..4.0).contains(&curvature) {
            return Err(Error::Config(format!(
                "corey curvature {curvature} outside [0,4)"
            )));
        }
        Ok(Corey { curvature })
    }

    pub fn mobility(&self, gamma: f64, kappa: f64) -> f64 {
        1.0 - self.curvature * kappa * (gamma - 0.5) * (gamma - 0.5)
    }
}

impl Default for Corey {
    fn default() -> Self {
        Corey { curvature: 0.25 }
    }
}

fn corey_f(s: f64, a: f64) -> f64 {
    let u = s * s;
    let v = a * (1.0 - s) * (1.0 - s);
    if u == 0.0 && v == 0.0 {
        return 1.0;
    }
    u / (u + v)
}

fn corey_df(s: f64, a: f64) -> f64 {
    let d = s * s + a * (1.0 - s) * (1.0 - s);
    2.0 * a * s * (1.0 - s) / (d * d)
}

fn corey_d2f(s: f64, a: f64) -> f64 {
    let d = s * s + a * (1.0 - s) * (1.0 - s);
    let dp = 2.0 * s - 2.0 * a * (1.0 - s);
    2.0 * a * ((1.0 - 2.0 * s) * d - 2.0 * s * (1.0 - s) * dp) / (d * d * d)
}

impl FluxFamily for Corey {
    fn f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        corey_f(sigma, self.mobility(gamma, kappa))
    }
    fn df(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        corey_df(sigma, self.mobility(gamma, kappa))
    }
    fn d2f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        corey_d2f(sigma, self.mobility(gamma, kappa))
    }
    fn name(&self) -> &'static str {
        "corey"
    }
}

/// Corey flux with a peak-shifting perturbation,
/// `f = corey + b(gamma,kappa) sigma^2 (1-sigma)^2 (sigma - r0)` with
/// `b = bump * kappa * (2 gamma - 1)` and `r0 = 1/sqrt(2)`.
///
/// Centering the perturbation at the base maximum point of `g` moves the
/// maximum sideways while leaving its height nearly unchanged. Unlike the
/// plain Corey family, whose `g`-curves are totally ordered in the mobility
/// ratio and never cross transversally, members of this family produce
/// genuine opposite-slope crossings between `g`-curves, exercising the
/// crossing-level part of the value grid.
#[derive(Clone, Debug)]
pub struct BumpedCorey {
    base: Corey,
    bump: f64,
}

const BUMP_CENTER: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl BumpedCorey {
    pub fn new(curvature: f64, bump: f64) -> Result<Self> {
        if !(0.0..=0.3).contains(&bump.abs()) {
            return Err(Error::Config(format!(
                "bump amplitude {bump} outside [-0.3, 0.3]"
            )));
        }
        Ok(BumpedCorey {
            base: Corey::new(curvature)?,
            bump,
        })
    }

    fn b(&self, gamma: f64, kappa: f64) -> f64 {
        self.bump * kappa * (2.0 * gamma - 1.0)
    }
}

impl FluxFamily for BumpedCorey {
    fn f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        let w = sigma * sigma * (1.0 - sigma) * (1.0 - sigma);
        self.base.f(sigma, gamma, kappa) + self.b(gamma, kappa) * w * (sigma - BUMP_CENTER)
    }
    fn df(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        let w = sigma * sigma * (1.0 - sigma) * (1.0 - sigma);
        let dw = 2.0 * sigma * (1.0 - sigma) * (1.0 - 2.0 * sigma);
        self.base.df(sigma, gamma, kappa)
            + self.b(gamma, kappa) * (dw * (sigma - BUMP_CENTER) + w)
    }
    fn d2f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        let dw = 2.0 * sigma * (1.0 - sigma) * (1.0 - 2.0 * sigma);
        let d2w = 2.0 * (1.0 - 6.0 * sigma + 6.0 * sigma * sigma);
        self.base.d2f(sigma, gamma, kappa)
            + self.b(gamma, kappa) * (d2w * (sigma - BUMP_CENTER) + 2.0 * dw)
    }
    fn name(&self) -> &'static str {
        "bumped-corey"
    }
}

/// Per-curve cache: the maximum point of `g(., gamma, kappa)` and the
/// inflection point of `f(., gamma, kappa)`.
#[derive(Clone, Copy, Debug)]
pub struct Curve {
    pub gamma: f64,
    pub kappa: f64,
    /// Location of the single maximum of `g`.
    pub sigma_max: f64,
    /// Value of that maximum.
    pub g_max: f64,
}

/// A validated flux family together with cached global quantities.
///
/// Cheap to clone; all state is shared behind `Arc`.
#[derive(Clone)]
pub struct FluxModel {
    family: Arc<dyn FluxFamily>,
    c2: Arc<OnceLock<C2Stats>>,
}

#[derive(Clone, Copy, Debug)]
struct C2Stats {
    sup_f: f64,
    sup_df: f64,
    sup_d2f: f64,
    /// Sampled Lipschitz bound of `f` with respect to `(gamma, kappa)`.
    lip_ck: f64,
    /// Largest characteristic speed over the sampled domain.
    sup_speed: f64,
}

const REG_GAMMA_KAPPA: usize = 13;
const REG_SIGMA: usize = 1201;

impl FluxModel {
    /// Registers a flux family, verifying the structural conditions on a
    /// sample of parameter values. Violations are rejected.
    pub fn new(family: Arc<dyn FluxFamily>) -> Result<Self> {
        let model = FluxModel {
            family,
            c2: Arc::new(OnceLock::new()),
        };
        model.verify_structure()?;
        Ok(model)
    }

    /// Default Corey family.
    pub fn corey() -> Self {
        Self::new(Arc::new(Corey::default())).expect("default corey family is admissible")
    }

    pub fn family_name(&self) -> &'static str {
        self.family.name()
    }

    fn verify_structure(&self) -> Result<()> {
        let n = REG_GAMMA_KAPPA;
        let fam = &*self.family;
        for ig in 0..n {
            for ik in 0..n {
                let gm = ig as f64 / (n - 1) as f64;
                let kp = ik as f64 / (n - 1) as f64;
                let fail = |msg: String| -> Result<()> {
                    Err(Error::ModelViolation(format!(
                        "family '{}' at (gamma,kappa)=({gm},{kp}): {msg}",
                        fam.name()
                    )))
                };
                if fam.f(0.0, gm, kp).abs() > 1e-10 {
                    return fail(format!("f(0) = {}", fam.f(0.0, gm, kp)));
                }
                if (fam.f(1.0, gm, kp) - 1.0).abs() > 1e-10 {
                    return fail(format!("f(1) = {}", fam.f(1.0, gm, kp)));
                }
                if fam.df(0.0, gm, kp).abs() > 1e-9 || fam.df(1.0, gm, kp).abs() > 1e-9 {
                    return fail("df does not vanish at the endpoints".into());
                }
                if fam.d2f(0.0, gm, kp) <= 0.0 {
                    return fail(format!("d2f(0) = {} <= 0", fam.d2f(0.0, gm, kp)));
                }
                if fam.d2f(1.0, gm, kp) >= 0.0 {
                    return fail(format!("d2f(1) = {} >= 0", fam.d2f(1.0, gm, kp)));
                }
                // Monotonicity, single inflection of f, unimodality of g.
                let mut sign_changes = 0usize;
                let mut prev_d2_pos = true;
                let mut g_prev = 0.0f64;
                let mut g_rising = true;
                let mut g_turns = 0usize;
                for is in 0..REG_SIGMA {
                    let s = is as f64 / (REG_SIGMA - 1) as f64;
                    if fam.df(s, gm, kp) < -1e-12 {
                        return fail(format!("df({s}) = {} < 0", fam.df(s, gm, kp)));
                    }
                    let d2 = fam.d2f(s, gm, kp);
                    if is > 0 && (d2 > 0.0) != prev_d2_pos && d2 != 0.0 {
                        sign_changes += 1;
                        prev_d2_pos = d2 > 0.0;
                    } else if is == 0 {
                        prev_d2_pos = d2 > 0.0;
                    }
                    let g = if s == 0.0 { 0.0 } else { fam.f(s, gm, kp) / s };
                    if is > 0 {
                        let rising = g >= g_prev;
                        if rising != g_rising {
                            g_turns += 1;
                            g_rising = rising;
                        }
                    }
                    g_prev = g;
                }
                if sign_changes != 1 {
                    return fail(format!("d2f changes sign {sign_changes} times, want 1"));
                }
                if g_turns != 1 {
                    return fail(format!("g has {g_turns} monotonicity turns, want 1"));
                }
                // Analytic derivatives consistent with finite differences.
                for s in [0.2, 0.5, 0.8] {
                    let h = 1e-5;
                    let fd = (fam.f(s + h, gm, kp) - fam.f(s - h, gm, kp)) / (2.0 * h);
                    if (fd - fam.df(s, gm, kp)).abs() > 1e-6 {
                        return fail(format!("df({s}) inconsistent with finite difference"));
                    }
                    let fd2 = (fam.df(s + h, gm, kp) - fam.df(s - h, gm, kp)) / (2.0 * h);
                    if (fd2 - fam.d2f(s, gm, kp)).abs() > 1e-5 {
                        return fail(format!("d2f({s}) inconsistent with finite difference"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Flux value. Arguments are range-checked.
    pub fn eval_f(&self, sigma: f64, gamma: f64, kappa: f64) -> Result<f64> {
        check_unit("sigma", sigma)?;
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        Ok(self.f(sigma, gamma, kappa))
    }

    /// Saturation derivative of the flux. Arguments are range-checked.
    pub fn eval_df(&self, sigma: f64, gamma: f64, kappa: f64) -> Result<f64> {
        check_unit("sigma", sigma)?;
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        Ok(self.df(sigma, gamma, kappa))
    }

    /// `g = f / sigma`, extended by continuity with `g(0) = 0`.
    pub fn eval_g(&self, sigma: f64, gamma: f64, kappa: f64) -> Result<f64> {
        check_unit("sigma", sigma)?;
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        Ok(self.g(sigma, gamma, kappa))
    }

    /// Singular variable `P(sigma) = int_0^sigma |dg|`, by adaptive
    /// quadrature split at the maximum point of `g` where the integrand
    /// kinks.
    pub fn eval_p(&self, sigma: f64, gamma: f64, kappa: f64) -> Result<f64> {
        check_unit("sigma", sigma)?;
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        let curve = self.curve(gamma, kappa);
        let integrand = |x: f64| self.dg(x, gamma, kappa).abs();
        let tol = 1e-10;
        if sigma <= curve.sigma_max {
            Ok(adaptive_simpson(integrand, 0.0, sigma, tol))
        } else {
            Ok(adaptive_simpson(integrand, 0.0, curve.sigma_max, 0.5 * tol)
                + adaptive_simpson(integrand, curve.sigma_max, sigma, 0.5 * tol))
        }
    }

    /// The three characteristic speeds `(lambda_s, lambda_c, lambda_k)`.
    pub fn characteristic_speeds(&self, sigma: f64, gamma: f64, kappa: f64) -> Result<(f64, f64, f64)> {
        check_unit("sigma", sigma)?;
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        Ok((self.df(sigma, gamma, kappa), self.g(sigma, gamma, kappa), 0.0))
    }

    /// Location and value of the single maximum of `g(., gamma, kappa)`.
    pub fn argmax_g(&self, gamma: f64, kappa: f64) -> Result<(f64, f64)> {
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        let c = self.curve(gamma, kappa);
        Ok((c.sigma_max, c.g_max))
    }

    /// Inflection point of `f(., gamma, kappa)`.
    pub fn inflection(&self, gamma: f64, kappa: f64) -> Result<f64> {
        check_unit("gamma", gamma)?;
        check_unit("kappa", kappa)?;
        let lo = self.d2f(0.0, gamma, kappa);
        let hi = self.d2f(1.0, gamma, kappa);
        if lo <= 0.0 || hi >= 0.0 {
            return Err(Error::ModelViolation(
                "d2f has no sign change on [0,1]".into(),
            ));
        }
        Ok(bisect_root(|s| self.d2f(s, gamma, kappa), 0.0, 1.0))
    }

    // Unchecked fast paths used by the grid and Riemann machinery, which
    // only ever pass validated values.

    #[inline]
    pub(crate) fn f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        self.family.f(sigma, gamma, kappa)
    }

    #[inline]
    pub(crate) fn df(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        self.family.df(sigma, gamma, kappa)
    }

    #[inline]
    pub(crate) fn d2f(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        self.family.d2f(sigma, gamma, kappa)
    }

    #[inline]
    pub(crate) fn g(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        if sigma < 1e-150 {
            0.0
        } else {
            self.family.f(sigma, gamma, kappa) / sigma
        }
    }

    /// Derivative of `g`; near zero the quotient rule cancels, so the limit
    /// `d2f(0)/2` is used instead.
    pub(crate) fn dg(&self, sigma: f64, gamma: f64, kappa: f64) -> f64 {
        if sigma < 1e-7 {
            0.5 * self.family.d2f(0.0, gamma, kappa)
        } else {
            (self.family.df(sigma, gamma, kappa) * sigma - self.family.f(sigma, gamma, kappa))
                / (sigma * sigma)
        }
    }

    /// Per-curve cached quantities for fixed `(gamma, kappa)`.
    pub fn curve(&self, gamma: f64, kappa: f64) -> Curve {
        let sigma_max = invert_monotone(|s| -self.dg(s, gamma, kappa), 0.0, 1.0, 0.0);
        let g_max = self.g(sigma_max, gamma, kappa);
        Curve {
            gamma,
            kappa,
            sigma_max,
            g_max,
        }
    }

    /// Preimage of `level` under `g` on the increasing branch `[0, sigma_max]`.
    /// Requires `0 <= level <= g_max`.
    pub fn preimage_inc(&self, curve: &Curve, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        if level >= curve.g_max {
            return curve.sigma_max;
        }
        let s = invert_monotone(
            |x| self.g(x, curve.gamma, curve.kappa),
            0.0,
            curve.sigma_max,
            level,
        );
        self.polish(s, level, curve, 0.0, curve.sigma_max)
    }

    /// Preimage of `level` under `g` on the decreasing branch `[sigma_max, 1]`.
    /// Requires `g(1) <= level <= g_max`.
    pub fn preimage_dec(&self, curve: &Curve, level: f64) -> f64 {
        let g1 = self.g(1.0, curve.gamma, curve.kappa);
        if level >= curve.g_max {
            return curve.sigma_max;
        }
        if level <= g1 {
            return 1.0;
        }
        let s = invert_monotone(
            |x| self.g(x, curve.gamma, curve.kappa),
            curve.sigma_max,
            1.0,
            level,
        );
        self.polish(s, level, curve, curve.sigma_max, 1.0)
    }

    /// Safeguarded Newton inversion of `g` on a monotone branch `[lo, hi]`,
    /// warm-started from `guess`. Used by the region builder, which marches
    /// through sorted levels so consecutive roots are close.
    pub(crate) fn invert_g_branch(
        &self,
        curve: &Curve,
        level: f64,
        mut lo: f64,
        mut hi: f64,
        guess: f64,
        increasing: bool,
    ) -> f64 {
        let g = |s: f64| self.g(s, curve.gamma, curve.kappa);
        let mut x = guess.clamp(lo, hi);
        for _ in 0..80 {
            let r = g(x) - level;
            if r == 0.0 {
                return x;
            }
            if (r < 0.0) == increasing {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo < 2.0 * f64::EPSILON * x.abs().max(1e-3) {
                break;
            }
            let d = self.dg(x, curve.gamma, curve.kappa);
            let mut nx = if d != 0.0 { x - r / d } else { 0.5 * (lo + hi) };
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() < f64::EPSILON * x.abs().max(1e-300) {
                x = nx;
                break;
            }
            x = nx;
        }
        x
    }

    fn polish(&self, mut s: f64, level: f64, curve: &Curve, lo: f64, hi: f64) -> f64 {
        for _ in 0..3 {
            let d = self.dg(s, curve.gamma, curve.kappa);
            if d.abs() < 1e-12 {
                break;
            }
            let next = s - (self.g(s, curve.gamma, curve.kappa) - level) / d;
            if next.is_finite() && next >= lo && next <= hi {
                s = next;
            } else {
                break;
            }
        }
        s
    }

    /// Inverts `f(., gamma, kappa)` at `target in [0,1]`; see the
    /// permeability-wave solver.
    pub fn invert_f(&self, target: f64, gamma: f64, kappa: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        if target >= 1.0 {
            return 1.0;
        }
        let mut s = invert_monotone(|x| self.f(x, gamma, kappa), 0.0, 1.0, target);
        for _ in 0..3 {
            let d = self.df(s, gamma, kappa);
            if d.abs() < 1e-12 {
                break;
            }
            let next = s - (self.f(s, gamma, kappa) - target) / d;
            if next.is_finite() && (0.0..=1.0).contains(&next) {
                s = next;
            } else {
                break;
            }
        }
        s
    }

    fn c2_stats(&self) -> &C2Stats {
        self.c2.get_or_init(|| {
            // 201 x 201 parameter samples by 2001 saturation samples, with a
            // 1.1 safety factor applied by the callers that need an upper
            // estimate. Parallel over the parameter grid.
            let np = 201usize;
            let ns = 2001usize;
            let fam = &*self.family;
            let rows = par::map_indexed(np * np, |idx| {
                let ig = idx / np;
                let ik = idx % np;
                let gm = ig as f64 / (np - 1) as f64;
                let kp = ik as f64 / (np - 1) as f64;
                let mut sup_f = 0.0f64;
                let mut sup_df = 0.0f64;
                let mut sup_d2f = 0.0f64;
                let mut sup_g = 0.0f64;
                for is in 0..ns {
                    let s = is as f64 / (ns - 1) as f64;
                    sup_f = sup_f.max(fam.f(s, gm, kp).abs());
                    sup_df = sup_df.max(fam.df(s, gm, kp).abs());
                    sup_d2f = sup_d2f.max(fam.d2f(s, gm, kp).abs());
                    if s > 0.0 {
                        sup_g = sup_g.max(fam.f(s, gm, kp) / s);
                    }
                }
                // Parameter Lipschitz bound from one-sided differences.
                let h = 1.0 / (np - 1) as f64;
                let mut lip = 0.0f64;
                for is in (0..ns).step_by(20) {
                    let s = is as f64 / (ns - 1) as f64;
                    let f0 = fam.f(s, gm, kp);
                    let dg_ = (fam.f(s, (gm + h).min(1.0), kp) - f0).abs() / h;
                    let dk_ = (fam.f(s, gm, (kp + h).min(1.0)) - f0).abs() / h;
                    lip = lip.max(dg_ + dk_);
                }
                (sup_f, sup_df, sup_d2f, sup_g, lip)
            });
            let mut st = C2Stats {
                sup_f: 0.0,
                sup_df: 0.0,
                sup_d2f: 0.0,
                lip_ck: 0.0,
                sup_speed: 0.0,
            };
            for (a, b, c, g, l) in rows {
                st.sup_f = st.sup_f.max(a);
                st.sup_df = st.sup_df.max(b);
                st.sup_d2f = st.sup_d2f.max(c);
                st.sup_speed = st.sup_speed.max(b).max(g);
                st.lip_ck = st.lip_ck.max(l);
            }
            st
        })
    }

    /// Sampled upper estimate of `sup_{gamma,kappa} ||f(., gamma, kappa)||_{C^2}`
    /// (the sum of the sups of `|f|`, `|df|`, `|d2f|`), including a 1.1
    /// safety factor. Only used to size grids, so an upper estimate is
    /// adequate.
    pub fn c2_sup(&self) -> f64 {
        let st = self.c2_stats();
        1.1 * (st.sup_f + st.sup_df + st.sup_d2f)
    }

    /// Sampled Lipschitz bound of `f` with respect to `(gamma, kappa)`.
    pub fn lip_ck(&self) -> f64 {
        self.c2_stats().lip_ck
    }

    /// Upper bound on all wave speeds (max of `sup df` and `sup g`).
    pub fn sup_speed(&self) -> f64 {
        1.05 * self.c2_stats().sup_speed
    }
}

impl std::fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FluxModel")
            .field("family", &self.family.name())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> FluxModel {
        FluxModel::corey()
    }

    #[test]
    fn endpoint_values() {
        let m = model();
        assert_eq!(m.eval_f(0.0, 0.3, 0.7).unwrap(), 0.0);
        assert_eq!(m.eval_f(1.0, 0.3, 0.7).unwrap(), 1.0);
        // a(0.5, kappa) = 1 for any kappa, so f(1/2) = 1/2.
        assert!((m.eval_f(0.5, 0.5, 0.3).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.eval_df(0.0, 0.2, 0.9).unwrap(), 0.0);
        assert_eq!(m.eval_df(1.0, 0.2, 0.9).unwrap(), 0.0);
        assert!((m.eval_df(0.5, 0.5, 0.1).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(m.eval_g(0.0, 0.1, 0.4).unwrap(), 0.0);
        assert!((m.eval_g(1.0, 0.1, 0.4).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.eval_g(0.5, 0.5, 0.9).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let m = model();
        assert!(m.eval_f(-0.1, 0.5, 0.5).is_err());
        assert!(m.eval_f(0.5, 1.5, 0.5).is_err());
        assert!(m.eval_g(0.5, 0.5, f64::NAN).is_err());
        assert!(State::new(0.5, 0.5, 1.2).is_err());
    }

    #[test]
    fn argmax_matches_closed_form() {
        let m = model();
        // a = 1: sigma_max = sqrt(1/2), g_max = (1 + sqrt 2)/2.
        let (sm, gm) = m.argmax_g(0.5, 0.7).unwrap();
        assert!((sm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((gm - (1.0 + std::f64::consts::SQRT_2) / 2.0).abs() < 1e-12);
        // a = 0.9375 at gamma=0, kappa=1.
        let (sm, gm) = m.argmax_g(0.0, 1.0).unwrap();
        let a: f64 = 0.9375;
        let want = (a / (1.0 + a)).sqrt();
        assert!((sm - want).abs() < 1e-10, "{sm} vs {want}");
        assert!((gm - 1.218795).abs() < 1e-5);
        assert!(gm > 1.0);
    }

    #[test]
    fn inflection_a1_is_half() {
        let m = model();
        let s = m.inflection(0.5, 0.3).unwrap();
        assert!((s - 0.5).abs() < 1e-11);
        // Defining property at another parameter point.
        let s = m.inflection(0.0, 1.0).unwrap();
        assert!(m.d2f(s, 0.0, 1.0).abs() < 1e-9);
        // Matches an independent bisection on second finite differences.
        let fd2 = |x: f64| {
            let h = 1e-5;
            (m.f(x + h, 0.0, 1.0) - 2.0 * m.f(x, 0.0, 1.0) + m.f(x - h, 0.0, 1.0)) / (h * h)
        };
        let oracle = crate::util::bisect_root(fd2, 0.1, 0.9);
        assert!((s - oracle).abs() < 1e-6);
    }

    #[test]
    fn p_values() {
        let m = model();
        assert_eq!(m.eval_p(0.0, 0.3, 0.3).unwrap(), 0.0);
        // P(1) = 2 g_max - 1; for a = 1 that is sqrt(2).
        let p1 = m.eval_p(1.0, 0.5, 0.9).unwrap();
        assert!((p1 - std::f64::consts::SQRT_2).abs() < 1e-9, "{p1}");
        // On the increasing branch P = g.
        for s in [0.1, 0.3, 0.5, 0.65] {
            let p = m.eval_p(s, 0.5, 0.2).unwrap();
            let g = m.eval_g(s, 0.5, 0.2).unwrap();
            assert!((p - g).abs() < 1e-9, "P({s})={p} g={g}");
        }
    }

    #[test]
    fn characteristic_speeds_at_corners() {
        let m = model();
        let (ls, lc, lk) = m.characteristic_speeds(1.0, 0.2, 0.8).unwrap();
        assert!(ls.abs() < 1e-14 && (lc - 1.0).abs() < 1e-14 && lk == 0.0);
        let (ls, lc, lk) = m.characteristic_speeds(0.0, 0.2, 0.8).unwrap();
        assert!(ls == 0.0 && lc == 0.0 && lk == 0.0);
    }

    #[test]
    fn preimages_round_trip() {
        let m = model();
        let curve = m.curve(0.3, 0.8);
        for level in [0.05, 0.5, 0.9, 1.0, 1.1, curve.g_max - 1e-6] {
            if level <= curve.g_max {
                let s = m.preimage_inc(&curve, level);
                assert!(
                    (m.g(s, 0.3, 0.8) - level).abs() < 1e-11,
                    "inc level {level}"
                );
            }
            if (1.0..=curve.g_max).contains(&level) {
                let s = m.preimage_dec(&curve, level);
                assert!(
                    (m.g(s, 0.3, 0.8) - level).abs() < 1e-11,
                    "dec level {level}"
                );
            }
        }
    }

    #[test]
    fn bumped_corey_registers() {
        let fam = BumpedCorey::new(0.25, 0.12).unwrap();
        FluxModel::new(Arc::new(fam)).unwrap();
    }

    #[test]
    fn degenerate_family_is_rejected() {
        struct Linear;
        impl FluxFamily for Linear {
            fn f(&self, s: f64, _: f64, _: f64) -> f64 {
                s
            }
            fn df(&self, _: f64, _: f64, _: f64) -> f64 {
                1.0
            }
            fn d2f(&self, _: f64, _: f64, _: f64) -> f64 {
                0.0
            }
            fn name(&self) -> &'static str {
                "linear"
            }
        }
        assert!(matches!(
            FluxModel::new(Arc::new(Linear)),
            Err(Error::ModelViolation(_))
        ));
    }

    #[test]
    fn c2_sup_close_to_independent_sampling() {
        let m = model();
        // Coarser independent sampling oracle.
        let mut sup = 0.0f64;
        for ig in 0..41 {
            for ik in 0..41 {
                let gm = ig as f64 / 40.0;
                let kp = ik as f64 / 40.0;
                let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
                for is in 0..801 {
                    let s = is as f64 / 800.0;
                    a = a.max(m.f(s, gm, kp).abs());
                    b = b.max(m.df(s, gm, kp).abs());
                    c = c.max(m.d2f(s, gm, kp).abs());
                }
                sup = sup.max(a + b + c);
            }
        }
        let got = m.c2_sup();
        assert!(got >= sup, "upper estimate must dominate: {got} < {sup}");
        assert!(got <= 1.1 * sup * 1.01, "estimate too loose: {got} vs {sup}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn flux_conditions_hold_at_random_parameters(gm in 0.0f64..=1.0, kp in 0.0f64..=1.0) {
            let m = model();
            prop_assert!(m.f(0.0, gm, kp).abs() <= 1e-10);
            prop_assert!((m.f(1.0, gm, kp) - 1.0).abs() <= 1e-10);
            let h = 1e-5;
            let d0 = (m.f(h, gm, kp) - m.f(0.0, gm, kp)) / h;
            let d1 = (m.f(1.0, gm, kp) - m.f(1.0 - h, gm, kp)) / h;
            prop_assert!(d0.abs() <= 1e-4 && d1.abs() <= 1e-4);
            prop_assert!(m.d2f(0.0, gm, kp) > 0.0 && m.d2f(1.0, gm, kp) < 0.0);
        }

        #[test]
        fn df_nonnegative_and_fd_consistent(
            gm in 0.0f64..=1.0, kp in 0.0f64..=1.0, s in 0.0f64..=1.0
        ) {
            let m = model();
            prop_assert!(m.df(s, gm, kp) >= -1e-12);
            if s > 1e-3 && s < 1.0 - 1e-3 {
                let h = 1e-4;
                let fd = (m.f(s + h, gm, kp) - m.f(s - h, gm, kp)) / (2.0 * h);
                // |df - central difference| <= C h^2 with C ~ sup|f'''|/6.
                prop_assert!((fd - m.df(s, gm, kp)).abs() <= 60.0 * h * h);
            }
        }

        #[test]
        fn p_strictly_increasing(
            gm in 0.0f64..=1.0, kp in 0.0f64..=1.0,
            s1 in 0.0f64..=1.0, d in 1e-6f64..=0.5
        ) {
            let m = model();
            let s2 = (s1 + d).min(1.0);
            if s2 > s1 + 1e-6 {
                let p1 = m.eval_p(s1, gm, kp).unwrap();
                let p2 = m.eval_p(s2, gm, kp).unwrap();
                prop_assert!(p2 - p1 > 0.0, "P not increasing: {} at {s1}, {} at {s2}", p1, p2);
            }
        }

        #[test]
        fn g_unimodal_at_random_parameters(gm in 0.0f64..=1.0, kp in 0.0f64..=1.0) {
            let m = model();
            let n = 2000;
            let mut turns = 0;
            let mut rising = true;
            let mut prev = 0.0f64;
            for i in 1..=n {
                let s = i as f64 / n as f64;
                let g = m.g(s, gm, kp);
                let r = g >= prev;
                if i > 1 && r != rising {
                    turns += 1;
                    rising = r;
                }
                prev = g;
            }
            prop_assert_eq!(turns, 1);
        }
    }
}
