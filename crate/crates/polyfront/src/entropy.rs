//! Entropy fluxes, per-front entropy production, positive-part measures and
//! the Jensen defect diagnostic.
//!
//! For a scalar entropy `eta` with `eta(0) = 0` the entropy flux relative to
//! a piecewise-linear region flux is `q(s) = int_0^s eta'(x) F'(x) dx`,
//! exact per linear piece. A front produces `dq - xdot * deta` per unit
//! time, with `q` taken from the region flux in force on each side.
//! Saturation fronts are entropic for their region flux, so convex
//! entropies make their production nonpositive; polymer and permeability
//! fronts may produce, but only within a budget proportional to
//! `eps/(N+M)` plus the jump size.

use crate::flux::{FluxModel, State};
use crate::grid::RegionFlux;
use crate::riemann::{Front, FrontKind};
use crate::tracker::{Segment, Simulation};
use crate::util::adaptive_simpson;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// A smooth scalar entropy with `eta(0) = 0`.
#[derive(Clone)]
pub struct Entropy {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sup_d1: f64,
    sup_d2: f64,
    convex: bool,
}

impl Entropy {
    pub fn square() -> Self {
        Entropy {
            name: "square".into(),
            f: Arc::new(|s| s * s),
            d1: Arc::new(|s| 2.0 * s),
            d2: Arc::new(|_| 2.0),
            sup_d1: 2.0,
            sup_d2: 2.0,
            convex: true,
        }
    }

    pub fn quartic() -> Self {
        Entropy {
            name: "quartic".into(),
            f: Arc::new(|s| s * s * s * s),
            d1: Arc::new(|s| 4.0 * s * s * s),
            d2: Arc::new(|s| 12.0 * s * s),
            sup_d1: 4.0,
            sup_d2: 12.0,
            convex: true,
        }
    }

    pub fn expm1() -> Self {
        Entropy {
            name: "expm1".into(),
            f: Arc::new(|s| s.exp_m1()),
            d1: Arc::new(|s| s.exp()),
            d2: Arc::new(|s| s.exp()),
            sup_d1: std::f64::consts::E,
            sup_d2: std::f64::consts::E,
            convex: true,
        }
    }

    pub fn identity() -> Self {
        Entropy {
            name: "identity".into(),
            f: Arc::new(|s| s),
            d1: Arc::new(|_| 1.0),
            d2: Arc::new(|_| 0.0),
            sup_d1: 1.0,
            sup_d2: 0.0,
            convex: true,
        }
    }

    /// `a + h * b`; entropy fluxes and productions are linear in the
    /// entropy, which this constructor lets tests exercise directly.
    pub fn linear_combination(a: &Entropy, h: f64, b: &Entropy) -> Self {
        let (fa, fb) = (a.f.clone(), b.f.clone());
        let (da, db) = (a.d1.clone(), b.d1.clone());
        let (sa, sb) = (a.d2.clone(), b.d2.clone());
        Entropy {
            name: format!("{}+{}*{}", a.name, h, b.name),
            f: Arc::new(move |s| fa(s) + h * fb(s)),
            d1: Arc::new(move |s| da(s) + h * db(s)),
            d2: Arc::new(move |s| sa(s) + h * sb(s)),
            sup_d1: a.sup_d1 + h.abs() * b.sup_d1,
            sup_d2: a.sup_d2 + h.abs() * b.sup_d2,
            convex: a.convex && b.convex && h >= 0.0,
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "square" => Ok(Self::square()),
            "quartic" => Ok(Self::quartic()),
            "expm1" => Ok(Self::expm1()),
            "identity" => Ok(Self::identity()),
            other => Err(Error::Config(format!(
                "unknown entropy '{other}' (square, quartic, expm1, identity)"
            ))),
        }
    }

    /// The default audit battery.
    pub fn battery() -> Vec<Entropy> {
        vec![Self::square(), Self::quartic(), Self::expm1()]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn deriv(&self, s: f64) -> f64 {
        (self.d1)(s)
    }

    pub fn convex(&self) -> bool {
        self.convex
    }
}

/// Entropy flux `q(sigma) = int_0^sigma eta'(x) F'(x) dx` for a
/// piecewise-linear flux: the slope of each full segment times the entropy
/// increment, plus the partial last segment. Exact up to rounding.
pub fn entropy_flux_pl(eta: &Entropy, flux: &RegionFlux, sigma: f64) -> f64 {
    let mut q = 0.0;
    for m in 0..flux.slopes.len() {
        let a = flux.kinks[m];
        let b = flux.kinks[m + 1];
        if sigma <= a {
            break;
        }
        let hi = sigma.min(b);
        q += flux.slopes[m] * (eta.eval(hi) - eta.eval(a));
    }
    q
}

/// Entropy flux at every kink of the region flux (prefix sums).
pub fn entropy_flux_prefix(eta: &Entropy, flux: &RegionFlux) -> Vec<f64> {
    let mut out = Vec::with_capacity(flux.kinks.len());
    let mut q = 0.0;
    out.push(0.0);
    for m in 0..flux.slopes.len() {
        q += flux.slopes[m] * (eta.eval(flux.kinks[m + 1]) - eta.eval(flux.kinks[m]));
        out.push(q);
    }
    out
}

/// Production of a single front given the region fluxes on its two sides.
pub fn front_production(
    front: &Front,
    eta: &Entropy,
    flux_left: &RegionFlux,
    flux_right: &RegionFlux,
) -> f64 {
    let ql = entropy_flux_pl(eta, flux_left, front.left.s);
    let qr = entropy_flux_pl(eta, flux_right, front.right.s);
    let d_eta = eta.eval(front.right.s) - eta.eval(front.left.s);
    qr - ql - front.speed * d_eta
}

/// The audit's concrete budget constant:
/// `4 (1 + sup|eta'| + sup|eta''|) (1 + Lip_{c,k} f + sup|f|)`.
pub fn budget_constant(eta: &Entropy, model: &FluxModel) -> f64 {
    4.0 * (1.0 + eta.sup_d1 + eta.sup_d2) * (1.0 + model.lip_ck() + 1.0)
}

/// One audited front segment.
#[derive(Clone, Copy, Debug)]
pub struct FrontRecord {
    pub seg_index: usize,
    pub kind: FrontKind,
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub speed: f64,
    pub d_eta: f64,
    pub d_q: f64,
    /// `dq - xdot * deta`.
    pub production: f64,
    /// Admissible production for this front kind.
    pub budget: f64,
    /// `production^+ / (eps/(N+M) + |jump|)` for C and K fronts.
    pub implied_c: f64,
}

/// Entropy audit of a full simulation history.
#[derive(Clone, Debug)]
pub struct EntropyReport {
    pub entropy: String,
    pub records: Vec<FrontRecord>,
    pub budget_constant: f64,
    /// `eps / (N + M)`.
    pub eps_term: f64,
    pub max_s_production: f64,
    pub max_implied_c: f64,
    pub within_budget: bool,
}

/// Per-region flux and entropy-flux prefix, refined forward as the audit
/// walks the (chronologically recorded) segments.
struct RegionCache<'a> {
    sim: &'a Simulation,
    cache: HashMap<(usize, usize), (RegionFlux, Vec<f64>)>,
}

impl<'a> RegionCache<'a> {
    fn new(sim: &'a Simulation) -> Self {
        RegionCache {
            sim,
            cache: HashMap::new(),
        }
    }

    fn q_at(&mut self, eta: &Entropy, band: usize, j: usize, cutoff: usize, s: f64) -> Result<f64> {
        let key = (band, j);
        let stale = match self.cache.get(&key) {
            None => true,
            Some((flux, _)) => flux.cutoff > cutoff,
        };
        if stale {
            let flux = self.sim.region_at(band, j, cutoff)?;
            let prefix = entropy_flux_prefix(eta, &flux);
            self.cache.insert(key, (flux, prefix));
        } else {
            let entries = self.sim.grid_system().grid.entries();
            let model = self.sim.model();
            let (flux, prefix) = self.cache.get_mut(&key).unwrap();
            for i in flux.cutoff..cutoff {
                for pos in flux.refine_with(&entries[i], i + 1, model).into_iter().flatten() {
                    // Exact prefix update: the new kink adds one entry and
                    // shifts everything after it by a constant.
                    let ql = prefix[pos - 1]
                        + flux.slopes[pos - 1]
                            * (eta.eval(flux.kinks[pos]) - eta.eval(flux.kinks[pos - 1]));
                    let q_next = ql
                        + flux.slopes[pos]
                            * (eta.eval(flux.kinks[pos + 1]) - eta.eval(flux.kinks[pos]));
                    let delta = q_next - prefix[pos];
                    prefix.insert(pos, ql);
                    for v in prefix[pos + 1..].iter_mut() {
                        *v += delta;
                    }
                }
            }
        }
        let (flux, prefix) = &self.cache[&key];
        let idx = flux.index_of(s)?;
        Ok(prefix[idx])
    }
}

/// Audits every recorded segment against the stated per-kind bounds.
pub fn audit(sim: &Simulation, eta: &Entropy) -> Result<EntropyReport> {
    let model = sim.model();
    let cb = budget_constant(eta, model);
    let nm = (sim.data.k_jumps.len() + sim.data.c_jumps.len()).max(1);
    let eps_term = sim.data.eps / nm as f64;
    let mut cache = RegionCache::new(sim);
    let mut records = Vec::with_capacity(sim.segments().len());
    let mut max_s = f64::NEG_INFINITY;
    let mut max_c = 0.0f64;
    let mut ok = true;
    for (i, seg) in sim.segments().iter().enumerate() {
        let ql = cache.q_at(eta, seg.band_l, seg.j_l, seg.cutoff, seg.left.s)?;
        let qr = cache.q_at(eta, seg.band_r, seg.j_r, seg.cutoff, seg.right.s)?;
        let d_eta = eta.eval(seg.right.s) - eta.eval(seg.left.s);
        let d_q = qr - ql;
        let production = d_q - seg.speed * d_eta;
        let (budget, implied_c) = match seg.kind {
            FrontKind::S => (1e-12, 0.0),
            FrontKind::C => {
                let denom = eps_term + (seg.right.c - seg.left.c).abs();
                (cb * denom, production.max(0.0) / denom)
            }
            FrontKind::K => {
                let denom = eps_term + (seg.right.k - seg.left.k).abs();
                (cb * denom, production.max(0.0) / denom)
            }
        };
        if seg.kind == FrontKind::S {
            max_s = max_s.max(production);
        } else {
            max_c = max_c.max(implied_c);
        }
        if production > budget {
            ok = false;
        }
        records.push(FrontRecord {
            seg_index: i,
            kind: seg.kind,
            t0: seg.t0,
            t1: seg.t1,
            x0: seg.x0,
            speed: seg.speed,
            d_eta,
            d_q,
            production,
            budget,
            implied_c,
        });
    }
    Ok(EntropyReport {
        entropy: eta.name.clone(),
        records,
        budget_constant: cb,
        eps_term,
        max_s_production: if max_s == f64::NEG_INFINITY {
            0.0
        } else {
            max_s
        },
        max_implied_c: max_c,
        within_budget: ok,
    })
}

/// A space-time rectangle `[t0, t1] x [x0, x1]`.
#[derive(Clone, Copy, Debug)]
pub struct Rect {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

/// Total positive part of the entropy-production measure over `rect`: the
/// sum over fronts of `production^+` times the time their path spends in
/// the rectangle. Exact for the piecewise-constant solution.
pub fn positive_part_measure(sim: &Simulation, eta: &Entropy, rect: Rect) -> Result<f64> {
    if rect.t1 < rect.t0 || rect.x1 < rect.x0 {
        return Err(Error::Domain(format!("degenerate rectangle {rect:?}")));
    }
    if rect.t0 < 0.0 || rect.t1 > sim.time() {
        return Err(Error::History(format!(
            "rectangle [{}, {}] outside recorded time range [0, {}]",
            rect.t0,
            rect.t1,
            sim.time()
        )));
    }
    let report = audit(sim, eta)?;
    Ok(mu_plus_from_records(sim, &report.records, rect))
}

/// Positive-part total from precomputed records.
pub fn mu_plus_from_records(sim: &Simulation, records: &[FrontRecord], rect: Rect) -> f64 {
    let mut total = 0.0;
    for rec in records {
        if rec.production <= 0.0 {
            continue;
        }
        let seg_t1 = rec.t1.min(sim.time());
        let mut lo = rec.t0.max(rect.t0);
        let mut hi = seg_t1.min(rect.t1);
        if hi <= lo {
            continue;
        }
        if rec.speed != 0.0 {
            let t_at = |x: f64| rec.t0 + (x - rec.x0) / rec.speed;
            let (ta, tb) = (t_at(rect.x0), t_at(rect.x1));
            let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            lo = lo.max(ta);
            hi = hi.min(tb);
        } else if rec.x0 < rect.x0 || rec.x0 > rect.x1 {
            continue;
        }
        if hi > lo {
            total += rec.production * (hi - lo);
        }
    }
    total
}

/// Jensen defect
/// `I(v, w) = (v - w) int_w^v (df)^2 - (f(v) - f(w))^2`
/// for the frozen flux `f(., c, k)`; zero iff `v = w`, positive otherwise.
pub fn jensen_defect(model: &FluxModel, c: f64, k: f64, v: f64, w: f64) -> Result<f64> {
    for (name, x) in [("v", v), ("w", w)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("{name}={x} outside [0,1]")));
        }
    }
    if v == w {
        return Ok(0.0);
    }
    let d2 = |s: f64| {
        let d = model.df(s, c, k);
        d * d
    };
    let integral = adaptive_simpson(d2, w, v, 1e-10);
    let df = model.f(v, c, k) - model.f(w, c, k);
    Ok((v - w) * integral - df * df)
}

/// A smooth compactly supported test function
/// `phi(t, x) = bump((t-t0)/(t1-t0)) * bump((x-x0)/(x1-x0))`
/// with `bump(u) = (4 u (1-u))^3` on `[0,1]`.
#[derive(Clone, Copy, Debug)]
pub struct TestBump {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let w = 4.0 * u * (1.0 - u);
        w * w * w
    }
}

impl TestBump {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        bump((t - self.t0) / (self.t1 - self.t0)) * bump((x - self.x0) / (self.x1 - self.x0))
    }
}

/// Which flux the weak residual is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualFlux {
    /// The exact flux `f`.
    Exact,
    /// The region-wise piecewise-linear flux in force on each side.
    Approximate,
}

/// Weak residuals `(r1, r2)` of the recorded solution against the test
/// function `phi`. For a piecewise-constant solution the space-time
/// integrals reduce to line integrals of the Rankine-Hugoniot defects along
/// the fronts (the initial-data term cancels exactly), so the state part is
/// exact and only the `phi` factor is integrated numerically.
pub fn weak_residual(sim: &Simulation, phi: &TestBump, mode: ResidualFlux) -> Result<(f64, f64)> {
    if phi.t0 < 0.0 || phi.t1 > sim.time() {
        return Err(Error::History(format!(
            "phi support [{}, {}] outside simulated time range [0, {}]",
            phi.t0,
            phi.t1,
            sim.time()
        )));
    }
    let model = sim.model();
    let mut cache: HashMap<(usize, usize, usize), RegionFlux> = HashMap::new();
    let mut flux_of = |seg: &Segment, side: usize, st: &State| -> Result<f64> {
        match mode {
            ResidualFlux::Exact => Ok(model.f(st.s, st.c, st.k)),
            ResidualFlux::Approximate => {
                let (band, j) = if side == 0 {
                    (seg.band_l, seg.j_l)
                } else {
                    (seg.band_r, seg.j_r)
                };
                let key = (band, j, seg.cutoff);
                if !cache.contains_key(&key) {
                    cache.insert(key, sim.region_at(band, j, seg.cutoff)?);
                }
                Ok(cache[&key].eval_f_pl(st.s))
            }
        }
    };
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let seg_tol = 1e-8 / (1 + sim.segments().len()) as f64;
    for seg in sim.segments() {
        let t_lo = seg.t0.max(phi.t0);
        let t_hi = seg.t1.min(sim.time()).min(phi.t1);
        if t_hi <= t_lo {
            continue;
        }
        let fl = flux_of(seg, 0, &seg.left)?;
        let fr = flux_of(seg, 1, &seg.right)?;
        let defect1 = seg.speed * (seg.right.s - seg.left.s) - (fr - fl);
        let defect2 = seg.speed * (seg.right.c * seg.right.s - seg.left.c * seg.left.s)
            - (seg.right.c * fr - seg.left.c * fl);
        if defect1 == 0.0 && defect2 == 0.0 {
            continue;
        }
        let weight = adaptive_simpson(|t| phi.eval(t, seg.position(t)), t_lo, t_hi, seg_tol);
        r1 += defect1 * weight;
        r2 += defect2 * weight;
    }
    Ok((r1.abs(), r2.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::Curve;
    use crate::tracker::{discretize_initial, init_simulation, Profile};
    use crate::FluxModel;

    fn model() -> FluxModel {
        FluxModel::corey()
    }

    fn pw(breakpoints: Vec<f64>, values: Vec<f64>) -> Profile {
        Profile::Piecewise {
            breakpoints,
            values,
        }
    }

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
    fn entropy_flux_identities() {
        let flux = toy_flux(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.1, 0.5, 0.9, 1.0],
        );
        // eta = identity reproduces the flux itself.
        let id = Entropy::identity();
        for s in [0.0, 0.1, 0.25, 0.6, 1.0] {
            let q = entropy_flux_pl(&id, &flux, s);
            assert!((q - flux.eval_f_pl(s)).abs() < 1e-14, "q({s})");
        }
        // Single unit-slope segment: q = eta.
        let lin = toy_flux(vec![0.0, 1.0], vec![0.0, 1.0]);
        let sq = Entropy::square();
        for s in [0.0, 0.3, 0.7, 1.0] {
            assert!((entropy_flux_pl(&sq, &lin, s) - s * s).abs() < 1e-15);
        }
        assert_eq!(entropy_flux_pl(&sq, &flux, 0.0), 0.0);
        // Prefix agrees with direct evaluation at the kinks.
        let prefix = entropy_flux_prefix(&sq, &flux);
        for (i, &k) in flux.kinks.iter().enumerate() {
            assert!((prefix[i] - entropy_flux_pl(&sq, &flux, k)).abs() < 1e-14);
        }
    }

    fn run_sim(s: Profile, c: Profile, k: Profile, eps: f64, t: f64) -> Simulation {
        let d = discretize_initial(&s, &c, &k, eps).unwrap();
        let mut sim = init_simulation(d, &model(), 1_000_000).unwrap();
        sim.advance_to(t).unwrap();
        sim
    }

    #[test]
    fn s_front_productions_nonpositive() {
        let sim = run_sim(
            pw(vec![-0.5, 0.3], vec![0.9, 0.15, 0.55]),
            pw(vec![0.0], vec![0.2, 0.8]),
            pw(vec![1.0], vec![1.0, 0.4]),
            0.1,
            2.0,
        );
        for eta in Entropy::battery() {
            let rep = audit(&sim, &eta).unwrap();
            assert!(
                rep.max_s_production <= 1e-12,
                "{}: max S production {}",
                eta.name(),
                rep.max_s_production
            );
            assert!(rep.within_budget, "{} exceeded budget", eta.name());
        }
    }

    #[test]
    fn production_linear_in_entropy() {
        let sim = run_sim(
            pw(vec![0.0], vec![0.85, 0.2]),
            pw(vec![0.5], vec![0.1, 0.9]),
            pw(vec![], vec![0.6]),
            0.1,
            1.5,
        );
        let a = Entropy::square();
        let b = Entropy::quartic();
        let h = 2.5;
        let combo = Entropy::linear_combination(&a, h, &b);
        let ra = audit(&sim, &a).unwrap();
        let rb = audit(&sim, &b).unwrap();
        let rc = audit(&sim, &combo).unwrap();
        for ((x, y), z) in ra.records.iter().zip(&rb.records).zip(&rc.records) {
            let want = x.production + h * y.production;
            assert!(
                (z.production - want).abs() <= 1e-12,
                "linearity violated: {} vs {}",
                z.production,
                want
            );
        }
    }

    #[test]
    fn mu_plus_cases() {
        // Scalar-only run: no positive productions beyond rounding.
        let sim = run_sim(
            pw(vec![0.0], vec![0.9, 0.1]),
            pw(vec![], vec![0.4]),
            pw(vec![], vec![0.8]),
            0.1,
            2.0,
        );
        let eta = Entropy::square();
        let mu = positive_part_measure(
            &sim,
            &eta,
            Rect {
                t0: 0.1,
                t1: 2.0,
                x0: -5.0,
                x1: 5.0,
            },
        )
        .unwrap();
        assert!(mu <= 1e-8, "mu+ {mu}");
        let mu0 = positive_part_measure(
            &sim,
            &eta,
            Rect {
                t0: 1.0,
                t1: 1.0,
                x0: -5.0,
                x1: 5.0,
            },
        )
        .unwrap();
        assert_eq!(mu0, 0.0);
        assert!(positive_part_measure(
            &sim,
            &eta,
            Rect {
                t0: 0.0,
                t1: 3.0,
                x0: -1.0,
                x1: 1.0
            }
        )
        .is_err());
    }

    #[test]
    fn mu_plus_bounded_by_theorem_budget() {
        let sim = run_sim(
            pw(vec![-0.5, 0.3], vec![0.9, 0.15, 0.55]),
            pw(vec![0.0], vec![0.2, 0.8]),
            pw(vec![1.0], vec![1.0, 0.4]),
            0.05,
            2.0,
        );
        let eta = Entropy::square();
        let mu = positive_part_measure(
            &sim,
            &eta,
            Rect {
                t0: 0.1,
                t1: 2.0,
                x0: -5.0,
                x1: 5.0,
            },
        )
        .unwrap();
        let tv_c = sim.data.total_variation(|s| s.c);
        let tv_k = sim.data.total_variation(|s| s.k);
        let cap = budget_constant(&eta, sim.model()) * 2.0 * (1.0 + tv_c + tv_k);
        assert!(mu <= cap, "mu+ {mu} above theorem cap {cap}");
    }

    #[test]
    fn jensen_defect_properties() {
        let m = model();
        assert_eq!(jensen_defect(&m, 0.3, 0.7, 0.5, 0.5).unwrap(), 0.0);
        // Worked value for a = 1: int (f')^2 - 1, against a midpoint-rule
        // oracle.
        let i10 = jensen_defect(&m, 0.5, 0.9, 1.0, 0.0).unwrap();
        let oracle = {
            let n = 200_000;
            let mut acc = 0.0;
            for i in 0..n {
                let s = (i as f64 + 0.5) / n as f64;
                let d = m.df(s, 0.5, 0.9);
                acc += d * d / n as f64;
            }
            acc - 1.0
        };
        assert!((i10 - oracle).abs() < 1e-7, "{i10} vs {oracle}");
        assert!(i10 > 0.0);
        for (i, (v, w)) in [(0.2, 0.8), (0.9, 0.1), (0.45, 0.5), (0.0, 1.0)]
            .iter()
            .enumerate()
        {
            let a = jensen_defect(&m, 0.3, 0.6, *v, *w).unwrap();
            let b = jensen_defect(&m, 0.3, 0.6, *w, *v).unwrap();
            assert!(a > 0.0, "case {i}: I = {a}");
            assert!((a - b).abs() <= 1e-10, "symmetry {a} vs {b}");
        }
        assert!(jensen_defect(&m, 0.3, 0.6, 1.2, 0.0).is_err());
    }

    #[test]
    fn weak_residual_cases() {
        let sim = run_sim(
            pw(vec![0.0], vec![0.9, 0.2]),
            pw(vec![0.5], vec![0.1, 0.9]),
            pw(vec![-1.0], vec![1.0, 0.5]),
            0.1,
            2.0,
        );
        let phi = TestBump {
            t0: 0.2,
            t1: 1.8,
            x0: -2.0,
            x1: 3.0,
        };
        let (r1, r2) = weak_residual(&sim, &phi, ResidualFlux::Approximate).unwrap();
        assert!(r1 <= 1e-8 && r2 <= 1e-8, "approximate residuals {r1} {r2}");
        let (e1, e2) = weak_residual(&sim, &phi, ResidualFlux::Exact).unwrap();
        let cap = 100.0 * sim.data.eps;
        assert!(e1 <= cap && e2 <= cap, "exact residuals {e1} {e2}");
        assert!(weak_residual(
            &sim,
            &TestBump {
                t0: 0.5,
                t1: 3.0,
                x0: -1.0,
                x1: 1.0
            },
            ResidualFlux::Exact
        )
        .is_err());
        // phi vanishing on the window gives exactly zero.
        let (z1, z2) = weak_residual(
            &sim,
            &TestBump {
                t0: 1.0,
                t1: 1.0 + 1e-12,
                x0: 0.0,
                x1: 1e-12,
            },
            ResidualFlux::Exact,
        )
        .unwrap();
        assert!(z1 <= 1e-20 && z2 <= 1e-20);
    }

    #[test]
    fn weak_residual_matches_coarse_tensor_quadrature() {
        // Independent check of the line-integral reduction: a coarse tensor
        // quadrature of s phi_t + f phi_x must agree that the residual is
        // tiny (phi vanishes at t = 0, killing the initial term).
        let sim = run_sim(
            pw(vec![0.0], vec![0.8, 0.3]),
            pw(vec![], vec![0.5]),
            pw(vec![], vec![0.5]),
            0.1,
            1.0,
        );
        let m = model();
        let phi = TestBump {
            t0: 0.1,
            t1: 0.9,
            x0: -1.0,
            x1: 2.0,
        };
        let h = 1e-5;
        let n = 500;
        let mut acc = 0.0;
        let xs: Vec<f64> = (0..n)
            .map(|ix| phi.x0 + (phi.x1 - phi.x0) * (ix as f64 + 0.5) / n as f64)
            .collect();
        for it in 0..n {
            let t = phi.t0 + (phi.t1 - phi.t0) * (it as f64 + 0.5) / n as f64;
            let states = sim.sample_solution(t, &xs).unwrap();
            for (ix, st) in states.iter().enumerate() {
                let x = xs[ix];
                let phit = (phi.eval(t + h, x) - phi.eval(t - h, x)) / (2.0 * h);
                let phix = (phi.eval(t, x + h) - phi.eval(t, x - h)) / (2.0 * h);
                acc += (st.s * phit + m.f(st.s, st.c, st.k) * phix) * (phi.t1 - phi.t0)
                    * (phi.x1 - phi.x0)
                    / (n * n) as f64;
            }
        }
        let (r1, _) = weak_residual(&sim, &phi, ResidualFlux::Exact).unwrap();
        assert!(r1 <= 1e-9, "line-integral residual {r1}");
        assert!(acc.abs() <= 2e-2, "tensor quadrature residual {acc}");
    }
}
