//! Initial-data discretization and the event-driven front interaction loop.
//!
//! Between events the approximate solution is exactly piecewise constant;
//! fronts move at constant speed and the only state changes happen when
//! fronts meet. Every interaction is resolved by the composed Riemann
//! solver with the flux of the region that contains it. Values appearing on
//! the right of a permeability front extend the value grid for the bands to
//! its right; affected regions are refreshed and any saturation front whose
//! chord loses the envelope property against the refined flux is split in
//! place.
//!
//! History is stored as front segments (birth to death), which supports
//! exact piecewise-constant sampling at any recorded time and exact
//! space-time integrals.

use crate::flux::{FluxModel, State};
use crate::grid::{GridSystem, ValueGrid};
use crate::riemann::{scalar_fronts, Front, FrontKind};
use crate::{Error, Result};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

/// Default cap on processed interaction events per run.
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

/// An initial profile for one of the three unknowns.
#[derive(Clone)]
pub enum Profile {
    /// Piecewise constant: `values.len() == breakpoints.len() + 1`.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Pointwise-evaluable profile with values in [0,1].
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Profile {
    pub fn constant(v: f64) -> Self {
        Profile::Piecewise {
            breakpoints: vec![],
            values: vec![v],
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Profile::Piecewise {
            breakpoints,
            values,
        } = self
        {
            if values.len() != breakpoints.len() + 1 {
                return Err(Error::Config(format!(
                    "{name}: need one more value than breakpoints"
                )));
            }
            if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "{name}: breakpoints must be strictly increasing"
                )));
            }
            for &v in values {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::Domain(format!("{name}: value {v} outside [0,1]")));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Piecewise {
                breakpoints,
                values,
            } => {
                let i = breakpoints.partition_point(|&b| b <= x);
                values[i]
            }
            Profile::Analytic(f) => f(x),
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            Profile::Piecewise { breakpoints, .. } => breakpoints,
            Profile::Analytic(_) => &[],
        }
    }
}

/// Piecewise-constant approximate initial data.
#[derive(Clone, Debug)]
pub struct DiscretizedData {
    /// Strictly increasing cell boundaries; `values` has one more element.
    pub breakpoints: Vec<f64>,
    pub values: Vec<State>,
    /// Permeability jump locations.
    pub k_jumps: Vec<f64>,
    /// Polymer-fraction jump locations (disjoint from `k_jumps`).
    pub c_jumps: Vec<f64>,
    pub eps: f64,
}

impl DiscretizedData {
    pub fn state_at(&self, x: f64) -> State {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        self.values[i]
    }

    /// Exact total variation of one component of the discretized data.
    pub fn total_variation(&self, pick: impl Fn(&State) -> f64) -> f64 {
        self.values
            .windows(2)
            .map(|w| (pick(&w[1]) - pick(&w[0])).abs())
            .sum()
    }
}

fn sample_analytic(p: &Profile, lo: f64, hi: f64, eps: f64) -> (Vec<f64>, Vec<f64>) {
    // Midpoint sampling on uniform cells, refined until both the sup probe
    // and the L1 probe are inside the budget.
    let mut h = eps.min((hi - lo) / 8.0);
    for _ in 0..12 {
        let n = ((hi - lo) / h).ceil() as usize;
        let mut brk = Vec::with_capacity(n + 1);
        let mut vals = Vec::with_capacity(n + 2);
        let mut max_err = 0.0f64;
        let mut l1_err = 0.0f64;
        vals.push(p.eval(lo - 1.0));
        for i in 0..n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
            let mid = p.eval(0.5 * (a + b));
            brk.push(a);
            vals.push(mid);
            for q in 0..4 {
                let x = a + (b - a) * (q as f64 + 0.5) / 4.0;
                let d = (p.eval(x) - mid).abs();
                max_err = max_err.max(d);
                l1_err += d * (b - a) / 4.0;
            }
        }
        brk.push(hi);
        vals.push(p.eval(hi + 1.0));
        if max_err < eps && l1_err <= 0.5 * eps {
            return (brk, vals);
        }
        h *= 0.5;
    }
    let n = ((hi - lo) / h).ceil() as usize;
    let brk: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let mut vals = vec![p.eval(lo - 1.0)];
    for i in 0..n {
        vals.push(p.eval(lo + (hi - lo) * (i as f64 + 0.5) / n as f64));
    }
    vals.push(p.eval(hi + 1.0));
    (brk, vals)
}

/// Builds piecewise-constant approximate initial data: piecewise-constant
/// inputs are reproduced exactly, analytic ones are midpoint-sampled to the
/// stated tolerances, and polymer jumps falling onto permeability jumps are
/// nudged left so the two jump sets stay disjoint.
pub fn discretize_initial(
    s: &Profile,
    c: &Profile,
    k: &Profile,
    eps: f64,
) -> Result<DiscretizedData> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Config(format!("eps={eps} must be positive")));
    }
    s.validate("s")?;
    c.validate("c")?;
    k.validate("k")?;

    let mut span: Vec<f64> = Vec::new();
    for p in [s, c, k] {
        span.extend_from_slice(p.breakpoints());
    }
    let half = (1.0 / eps).max(span.iter().fold(1.0f64, |a, &b| a.max(b.abs())) + 1.0);
    let (lo, hi) = (-half, half);

    let mut profiles: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(3);
    for p in [s, c, k] {
        match p {
            Profile::Piecewise {
                breakpoints,
                values,
            } => profiles.push((breakpoints.clone(), values.clone())),
            Profile::Analytic(_) => profiles.push(sample_analytic(p, lo, hi, eps)),
        }
    }
    // No polymer jump may coincide with a permeability jump.
    let width = (hi - lo).max(1.0);
    let delta = 1e-9 * width;
    let kb = profiles[2].0.clone();
    for cb in profiles[1].0.iter_mut() {
        if kb.iter().any(|&x| (x - *cb).abs() < delta) {
            *cb -= delta;
        }
    }

    let mut breakpoints: Vec<f64> = profiles
        .iter()
        .flat_map(|(b, _)| b.iter().copied())
        .collect();
    breakpoints.sort_by(|a, b| a.total_cmp(b));
    breakpoints.dedup();

    let eval = |idx: usize, x: f64| -> f64 {
        let (b, v) = &profiles[idx];
        v[b.partition_point(|&p| p <= x)]
    };
    let mut values: Vec<State> = Vec::with_capacity(breakpoints.len() + 1);
    for i in 0..=breakpoints.len() {
        let x = if breakpoints.is_empty() {
            0.0
        } else if i == 0 {
            breakpoints[0] - 1.0
        } else if i == breakpoints.len() {
            breakpoints[i - 1] + 1.0
        } else {
            0.5 * (breakpoints[i - 1] + breakpoints[i])
        };
        values.push(State::new(eval(0, x), eval(1, x), eval(2, x))?);
    }
    // Coalesce trivial boundaries.
    let mut cb: Vec<f64> = Vec::new();
    let mut cv: Vec<State> = vec![values[0]];
    for (i, &b) in breakpoints.iter().enumerate() {
        let prev = *cv.last().unwrap();
        let next = values[i + 1];
        if prev != next {
            cb.push(b);
            cv.push(next);
        }
    }
    let mut k_jumps = Vec::new();
    let mut c_jumps = Vec::new();
    for (i, &b) in cb.iter().enumerate() {
        if cv[i].k != cv[i + 1].k {
            k_jumps.push(b);
            if cv[i].c != cv[i + 1].c {
                return Err(Error::Config(format!("c and k jump at the same point x={b}")));
            }
        } else if cv[i].c != cv[i + 1].c {
            c_jumps.push(b);
        }
    }
    Ok(DiscretizedData {
        breakpoints: cb,
        values: cv,
        k_jumps,
        c_jumps,
        eps,
    })
}

/// One front over the span of its life between two events.
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub id: u64,
    pub ordinal: u64,
    pub kind: FrontKind,
    pub t0: f64,
    /// `f64::INFINITY` while the front is alive.
    pub t1: f64,
    pub x0: f64,
    pub speed: f64,
    pub left: State,
    pub right: State,
    /// Region indices on each side (equal pairs for S fronts).
    pub band_l: usize,
    pub j_l: usize,
    pub band_r: usize,
    pub j_r: usize,
    /// Grid cutoff identifying the region fluxes in force.
    pub cutoff: usize,
}

impl Segment {
    pub fn position(&self, t: f64) -> f64 {
        if self.speed == 0.0 {
            self.x0
        } else {
            self.x0 + self.speed * (t - self.t0)
        }
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.t0 <= t && t < self.t1
    }
}

#[derive(Clone, Copy, Debug)]
struct LiveFront {
    id: u64,
    kind: FrontKind,
    x_ref: f64,
    t_ref: f64,
    speed: f64,
    left: State,
    right: State,
    band_l: usize,
    j_l: usize,
    band_r: usize,
    j_r: usize,
    seg: usize,
}

impl LiveFront {
    fn position(&self, t: f64) -> f64 {
        if self.speed == 0.0 {
            self.x_ref
        } else {
            self.x_ref + self.speed * (t - self.t_ref)
        }
    }

    fn span_contains(&self, sigma: f64) -> bool {
        let (a, b) = if self.left.s <= self.right.s {
            (self.left.s, self.right.s)
        } else {
            (self.right.s, self.left.s)
        };
        sigma > a && sigma < b
    }
}

const NIL: usize = usize::MAX;

/// Slot of the doubly-linked live-front list. Slots are stable, so
/// predicted events can reference them directly; `gen` invalidates events
/// that outlive their front.
#[derive(Clone, Copy, Debug)]
struct Slot {
    front: LiveFront,
    prev: usize,
    next: usize,
    gen: u32,
    alive: bool,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    x: f64,
    a: usize,
    gen_a: u32,
    b: usize,
    gen_b: u32,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.x.total_cmp(&other.x))
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Counters exposed for diagnostics and reports.
#[derive(Clone, Copy, Debug, Default)]
pub struct Counters {
    pub events: u64,
    pub extensions: u64,
    pub splits: u64,
    pub fronts_created: u64,
}

/// A running front-tracking simulation with its full recorded history.
pub struct Simulation {
    pub data: DiscretizedData,
    gs: GridSystem,
    model: FluxModel,
    time: f64,
    slots: Vec<Slot>,
    free: Vec<usize>,
    head: usize,
    live: usize,
    queue: BinaryHeap<Reverse<Event>>,
    history: Vec<Segment>,
    leftmost: State,
    next_id: u64,
    next_ordinal: u64,
    max_events: u64,
    /// Per-curve cache for the extension refresh (curves are immutable).
    curve_cache: HashMap<(u64, u64), crate::flux::Curve>,
    pub counters: Counters,
}

/// Builds the grids, solves every initial Riemann problem left to right and
/// fills the collision queue.
pub fn init_simulation(
    data: DiscretizedData,
    model: &FluxModel,
    max_events: u64,
) -> Result<Simulation> {
    let mut c_values = vec![data.values[0].c];
    let mut k_values = vec![data.values[0].k];
    for w in data.values.windows(2) {
        if w[1].k != w[0].k {
            k_values.push(w[1].k);
        } else if w[1].c != w[0].c {
            c_values.push(w[1].c);
        }
    }
    debug_assert_eq!(k_values.len(), data.k_jumps.len() + 1);
    debug_assert_eq!(c_values.len(), data.c_jumps.len() + 1);

    let grid = ValueGrid::build(&data.values, c_values, k_values, data.eps, model)?;
    let gs = GridSystem::new(grid, model.clone());
    let leftmost = data.values[0];
    let mut sim = Simulation {
        data,
        gs,
        model: model.clone(),
        time: 0.0,
        slots: Vec::new(),
        free: Vec::new(),
        head: NIL,
        live: 0,
        queue: BinaryHeap::new(),
        history: Vec::new(),
        leftmost,
        next_id: 0,
        next_ordinal: 0,
        max_events,
        curve_cache: HashMap::new(),
        counters: Counters::default(),
    };
    sim.seed_initial_fronts()?;
    let mut cur = sim.head;
    while cur != NIL {
        let next = sim.slots[cur].next;
        if next != NIL {
            sim.predict(cur, next);
        }
        cur = next;
    }
    Ok(sim)
}

impl Simulation {
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn grid_system(&self) -> &GridSystem {
        &self.gs
    }

    pub fn segments(&self) -> &[Segment] {
        &self.history
    }

    pub fn live_front_count(&self) -> usize {
        self.live
    }

    fn live_slots(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.live);
        let mut cur = self.head;
        while cur != NIL {
            out.push(cur);
            cur = self.slots[cur].next;
        }
        out
    }

    /// Ids of the live C fronts, left to right.
    pub fn c_front_ids(&self) -> Vec<u64> {
        self.live_slots()
            .into_iter()
            .filter(|&i| self.slots[i].front.kind == FrontKind::C)
            .map(|i| self.slots[i].front.id)
            .collect()
    }

    /// Positions of the stationary K fronts.
    pub fn k_front_positions(&self) -> Vec<f64> {
        self.live_slots()
            .into_iter()
            .filter(|&i| self.slots[i].front.kind == FrontKind::K)
            .map(|i| self.slots[i].front.x_ref)
            .collect()
    }

    fn alloc_slot(&mut self, front: LiveFront) -> usize {
        if let Some(i) = self.free.pop() {
            let gen = self.slots[i].gen;
            self.slots[i] = Slot {
                front,
                prev: NIL,
                next: NIL,
                gen,
                alive: true,
            };
            i
        } else {
            self.slots.push(Slot {
                front,
                prev: NIL,
                next: NIL,
                gen: 0,
                alive: true,
            });
            self.slots.len() - 1
        }
    }

    fn free_slot(&mut self, i: usize) {
        let (prev, next) = (self.slots[i].prev, self.slots[i].next);
        if prev != NIL {
            self.slots[prev].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.slots[next].prev = prev;
        }
        self.slots[i].alive = false;
        self.slots[i].gen = self.slots[i].gen.wrapping_add(1);
        self.free.push(i);
        self.live -= 1;
    }

    /// Links `chain` (already allocated, in left-to-right order) between
    /// `prev` and `next` (either may be NIL).
    fn link_chain(&mut self, prev: usize, chain: &[usize], next: usize) {
        let mut last = prev;
        for &i in chain {
            self.slots[i].prev = last;
            if last != NIL {
                self.slots[last].next = i;
            } else {
                self.head = i;
            }
            last = i;
        }
        if last != NIL {
            self.slots[last].next = next;
        } else if prev == NIL {
            self.head = next;
        }
        if next != NIL {
            self.slots[next].prev = last;
        }
        self.live += chain.len();
    }

    fn seed_initial_fronts(&mut self) -> Result<()> {
        let breakpoints = self.data.breakpoints.clone();
        let values = self.data.values.clone();
        let mut band = 0usize;
        let mut j = 0usize;
        let mut tail = NIL;
        for (i, &x) in breakpoints.iter().enumerate() {
            let left = values[i];
            let right = values[i + 1];
            let (band_l, j_l) = (band, j);
            if left.k != right.k {
                band += 1;
            } else if left.c != right.c {
                j += 1;
            }
            let (band_r, j_r) = (band, j);
            let (fan, extended) = self.gs.solve_global(left, right, band_l, band_r, j_l, j_r)?;
            if let Some(level) = extended {
                self.counters.extensions += 1;
                self.refresh_after_extension(band_r, level, 0.0, &[])?;
            }
            let mut walk_band = band_l;
            let mut walk_j = j_l;
            for f in fan.fronts {
                let (bl, jl) = (walk_band, walk_j);
                match f.kind {
                    FrontKind::K => walk_band += 1,
                    FrontKind::C => walk_j += 1,
                    FrontKind::S => {}
                }
                let live = self.spawn(f, x, 0.0, bl, jl, walk_band, walk_j);
                let slot = self.alloc_slot(live);
                self.link_chain(tail, &[slot], NIL);
                tail = slot;
            }
            debug_assert_eq!(walk_band, band_r);
            debug_assert_eq!(walk_j, j_r);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn spawn(
        &mut self,
        f: Front,
        x: f64,
        t: f64,
        band_l: usize,
        j_l: usize,
        band_r: usize,
        j_r: usize,
    ) -> LiveFront {
        let id = self.next_id;
        self.next_id += 1;
        self.counters.fronts_created += 1;
        let seg = self.open_segment(
            id, f.kind, t, x, f.speed, f.left, f.right, band_l, j_l, band_r, j_r,
        );
        LiveFront {
            id,
            kind: f.kind,
            x_ref: x,
            t_ref: t,
            speed: f.speed,
            left: f.left,
            right: f.right,
            band_l,
            j_l,
            band_r,
            j_r,
            seg,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn open_segment(
        &mut self,
        id: u64,
        kind: FrontKind,
        t0: f64,
        x0: f64,
        speed: f64,
        left: State,
        right: State,
        band_l: usize,
        j_l: usize,
        band_r: usize,
        j_r: usize,
    ) -> usize {
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        self.history.push(Segment {
            id,
            ordinal,
            kind,
            t0,
            t1: f64::INFINITY,
            x0,
            speed,
            left,
            right,
            band_l,
            j_l,
            band_r,
            j_r,
            cutoff: self.gs.grid.epoch(),
        });
        self.history.len() - 1
    }

    fn close_segment(&mut self, seg: usize, t: f64) {
        self.history[seg].t1 = t;
    }

    fn predict(&mut self, sa: usize, sb: usize) {
        let a = &self.slots[sa].front;
        let b = &self.slots[sb].front;
        let dv = a.speed - b.speed;
        if dv <= 0.0 {
            return;
        }
        let t = self.time;
        let gap = (b.position(t) - a.position(t)).max(0.0);
        let dt = gap / dv;
        if !dt.is_finite() {
            return;
        }
        self.queue.push(Reverse(Event {
            time: t + dt,
            x: a.position(t) + a.speed * dt,
            a: sa,
            gen_a: self.slots[sa].gen,
            b: sb,
            gen_b: self.slots[sb].gen,
        }));
    }

    /// Advances the simulation, processing every interaction up to `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        if t_end < self.time {
            return Err(Error::History(format!(
                "cannot advance backwards to {t_end} from {}",
                self.time
            )));
        }
        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            if ev.time > t_end {
                break;
            }
            self.queue.pop();
            let sa = ev.a;
            let sb = ev.b;
            if sa >= self.slots.len()
                || sb >= self.slots.len()
                || !self.slots[sa].alive
                || !self.slots[sb].alive
                || self.slots[sa].gen != ev.gen_a
                || self.slots[sb].gen != ev.gen_b
                || self.slots[sa].next != sb
            {
                continue;
            }
            if self.counters.events >= self.max_events {
                return Err(Error::SafeguardAbort(self.max_events));
            }
            self.counters.events += 1;
            self.process_event(ev)?;
        }
        self.time = t_end;
        Ok(())
    }

    fn process_event(&mut self, ev: Event) -> Result<()> {
        let t = ev.time.max(self.time);
        self.time = t;
        let tol_x = 1e-11 * (1.0 + ev.x.abs());
        let xa = self.slots[ev.a].front.position(t);
        let xb = self.slots[ev.b].front.position(t);
        if (xa - xb).abs() > 1e-9 * (1.0 + ev.x.abs()) {
            // Numerical near-miss; re-predict from current kinematics.
            self.predict(ev.a, ev.b);
            return Ok(());
        }
        // Gather every adjacent front sitting at the collision point.
        let anchor_x = xa;
        let mut g0 = ev.a;
        loop {
            let p = self.slots[g0].prev;
            if p != NIL && (self.slots[p].front.position(t) - anchor_x).abs() <= tol_x {
                g0 = p;
            } else {
                break;
            }
        }
        let mut g1 = ev.b;
        loop {
            let n = self.slots[g1].next;
            if n != NIL && (self.slots[n].front.position(t) - anchor_x).abs() <= tol_x {
                g1 = n;
            } else {
                break;
            }
        }
        let mut group_slots = Vec::new();
        let mut cur = g0;
        loop {
            group_slots.push(cur);
            if cur == g1 {
                break;
            }
            cur = self.slots[cur].next;
        }
        let group: Vec<LiveFront> = group_slots.iter().map(|&i| self.slots[i].front).collect();
        let n_c = group.iter().filter(|f| f.kind == FrontKind::C).count();
        let n_k = group.iter().filter(|f| f.kind == FrontKind::K).count();
        if n_c > 1 || n_k > 1 {
            return Err(Error::InvariantViolation(format!(
                "{n_c} C fronts and {n_k} K fronts meeting at t={t}, x={anchor_x}"
            )));
        }
        let left = group[0].left;
        let right = group[group.len() - 1].right;
        let band_l = group[0].band_l;
        let j_l = group[0].j_l;
        let band_r = group[group.len() - 1].band_r;
        let j_r = group[group.len() - 1].j_r;
        // The K front position is exact; emitted fronts anchor there.
        let anchor = group
            .iter()
            .find(|f| f.kind == FrontKind::K)
            .map(|f| f.x_ref)
            .unwrap_or(anchor_x);

        let (fan, extended) = self.gs.solve_global(left, right, band_l, band_r, j_l, j_r)?;
        if let Some(level) = extended {
            self.counters.extensions += 1;
            self.refresh_after_extension(band_r, level, t, &group_slots)?;
        }
        let prev = self.slots[g0].prev;
        let next = self.slots[g1].next;
        for (&slot, f) in group_slots.iter().zip(&group) {
            self.close_segment(f.seg, t);
            self.free_slot(slot);
        }
        let old_c = group.iter().find(|f| f.kind == FrontKind::C).copied();
        let old_k = group.iter().find(|f| f.kind == FrontKind::K).copied();

        let mut walk_band = band_l;
        let mut walk_j = j_l;
        let mut chain: Vec<usize> = Vec::with_capacity(fan.fronts.len());
        for f in fan.fronts {
            let (bl, jl) = (walk_band, walk_j);
            match f.kind {
                FrontKind::K => walk_band += 1,
                FrontKind::C => walk_j += 1,
                FrontKind::S => {}
            }
            let reuse = match f.kind {
                FrontKind::K => old_k,
                FrontKind::C => old_c,
                FrontKind::S => None,
            };
            let live = if let Some(old) = reuse {
                let x = if f.kind == FrontKind::K { old.x_ref } else { anchor };
                let seg = self.open_segment(
                    old.id, f.kind, t, x, f.speed, f.left, f.right, bl, jl, walk_band, walk_j,
                );
                LiveFront {
                    id: old.id,
                    kind: f.kind,
                    x_ref: x,
                    t_ref: t,
                    speed: f.speed,
                    left: f.left,
                    right: f.right,
                    band_l: bl,
                    j_l: jl,
                    band_r: walk_band,
                    j_r: walk_j,
                    seg,
                }
            } else {
                self.spawn(f, anchor, t, bl, jl, walk_band, walk_j)
            };
            let slot = self.alloc_slot(live);
            chain.push(slot);
        }
        debug_assert_eq!(walk_band, band_r);
        debug_assert_eq!(walk_j, j_r);

        self.link_chain(prev, &chain, next);
        if let (Some(&first), true) = (chain.first(), prev != NIL) {
            self.predict(prev, first);
        }
        if let (Some(&last), true) = (chain.last(), next != NIL) {
            self.predict(last, next);
        }
        if chain.is_empty() && prev != NIL && next != NIL {
            self.predict(prev, next);
        }
        Ok(())
    }

    /// After a grid extension at `band` with the added level `level`, the
    /// regions in bands `>= band` refine. Only fronts actually affected
    /// need attention: C and K fronts there reopen their segments (their
    /// entropy flux difference spans `[0, s]` on each side and is sensitive
    /// to any refinement), while a saturation front matters only when a new
    /// kink lands strictly inside its span, in which case its chord is
    /// re-solved against the refined flux and split if no longer an
    /// envelope chord.
    fn refresh_after_extension(
        &mut self,
        band: usize,
        level: f64,
        t: f64,
        exclude: &[usize],
    ) -> Result<()> {
        let cur_cutoff = self.gs.grid.epoch();
        let mut new_kinks: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
        for slot in self.live_slots() {
            if exclude.contains(&slot) {
                continue;
            }
            let f = self.slots[slot].front;
            if f.band_r < band || self.history[f.seg].cutoff == cur_cutoff {
                continue;
            }
            match f.kind {
                FrontKind::C | FrontKind::K => {
                    self.reopen_segment(slot, t);
                }
                FrontKind::S => {
                    let key = (f.band_l, f.j_l);
                    if !new_kinks.contains_key(&key) {
                        let c = self.gs.grid.c_values[f.j_l];
                        let k = self.gs.grid.k_values[f.band_l];
                        let curve = *self
                            .curve_cache
                            .entry((c.to_bits(), k.to_bits()))
                            .or_insert_with(|| self.model.curve(c, k));
                        new_kinks.insert(key, crate::grid::preimages(&self.model, &curve, level));
                    }
                    let hits = new_kinks[&key].iter().any(|&s| f.span_contains(s));
                    if !hits {
                        continue;
                    }
                    let flux = self.gs.region(f.band_l, f.j_l)?;
                    let il = flux.index_of(f.left.s)?;
                    let ir = flux.index_of(f.right.s)?;
                    let parts = scalar_fronts(&flux, il, ir);
                    if parts.len() > 1 {
                        self.counters.splits += 1;
                        let x = f.position(t);
                        self.close_segment(f.seg, t);
                        let prev = self.slots[slot].prev;
                        let next = self.slots[slot].next;
                        self.free_slot(slot);
                        let mut chain = Vec::with_capacity(parts.len());
                        for p in parts {
                            let live = self.spawn(p, x, t, f.band_l, f.j_l, f.band_r, f.j_r);
                            chain.push(self.alloc_slot(live));
                        }
                        self.link_chain(prev, &chain, next);
                        if prev != NIL {
                            self.predict(prev, chain[0]);
                        }
                        if next != NIL {
                            self.predict(*chain.last().unwrap(), next);
                        }
                    } else {
                        self.reopen_segment(slot, t);
                    }
                }
            }
        }
        Ok(())
    }

    /// Closes the slot's segment and opens an identical one at the current
    /// grid cutoff (the front itself is untouched; events stay valid).
    fn reopen_segment(&mut self, slot: usize, t: f64) {
        let f = self.slots[slot].front;
        self.close_segment(f.seg, t);
        let x = f.position(t);
        let seg = self.open_segment(
            f.id, f.kind, t, x, f.speed, f.left, f.right, f.band_l, f.j_l, f.band_r, f.j_r,
        );
        let lf = &mut self.slots[slot].front;
        lf.seg = seg;
        lf.x_ref = x;
        lf.t_ref = t;
    }

    /// Region flux as it stood at a recorded cutoff; used by auditors.
    pub fn region_at(
        &self,
        band: usize,
        j: usize,
        cutoff: usize,
    ) -> Result<crate::grid::RegionFlux> {
        self.gs.region_at_cutoff(band, j, cutoff)
    }

    /// The discontinuities alive at time `t` as
    /// `(position, ordinal, right state, left state, kind)`, unsorted.
    #[allow(clippy::type_complexity)]
    pub fn front_line(&self, t: f64) -> Result<Vec<(f64, u64, State, State, FrontKind)>> {
        if t < 0.0 || t > self.time {
            return Err(Error::History(format!(
                "time {t} outside recorded range [0, {}]",
                self.time
            )));
        }
        Ok(self
            .history
            .iter()
            .filter(|s| s.alive_at(t))
            .map(|s| (s.position(t), s.ordinal, s.right, s.left, s.kind))
            .collect())
    }

    /// Exact piecewise-constant readout at time `t`; right limits at front
    /// positions. `xs` must be sorted.
    pub fn sample_solution(&self, t: f64, xs: &[f64]) -> Result<Vec<State>> {
        let mut line = self.front_line(t)?;
        line.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::with_capacity(xs.len());
        let mut cur = self.leftmost;
        let mut fi = 0;
        for &x in xs {
            while fi < line.len() && line[fi].0 <= x {
                cur = line[fi].2;
                fi += 1;
            }
            out.push(cur);
        }
        Ok(out)
    }

    /// Exact integral of a state component over `[a, b]` at time `t`.
    pub fn integrate(&self, t: f64, a: f64, b: f64, pick: impl Fn(&State) -> f64) -> Result<f64> {
        let mut line = self.front_line(t)?;
        line.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut total = 0.0;
        let mut cur = self.leftmost;
        let mut x = a;
        for f in &line {
            if f.0 <= a {
                cur = f.2;
                continue;
            }
            if f.0 >= b {
                break;
            }
            total += pick(&cur) * (f.0 - x);
            cur = f.2;
            x = f.0;
        }
        total += pick(&cur) * (b - x);
        Ok(total)
    }

    /// Leftmost constant state (unchanged for all time).
    pub fn leftmost_state(&self) -> State {
        self.leftmost
    }

    /// Runs the per-front invariant battery on the live fronts.
    pub fn validate_live_fronts(&self, tol: f64) -> Result<()> {
        let t = self.time;
        let slots = self.live_slots();
        for &i in &slots {
            let f = &self.slots[i].front;
            let front = Front {
                kind: f.kind,
                position: f.position(t),
                speed: f.speed,
                left: f.left,
                right: f.right,
            };
            front.validate(&self.model, tol)?;
            f.left.validate()?;
            f.right.validate()?;
        }
        for w in slots.windows(2) {
            let a = self.slots[w[0]].front.position(t);
            let b = self.slots[w[1]].front.position(t);
            if a > b + 1e-9 {
                return Err(Error::InvariantViolation(format!(
                    "front order broken at t={t}: {a} > {b}"
                )));
            }
        }
        Ok(())
    }

    /// Every saturation front's side states must be kinks of the region
    /// flux containing it.
    pub fn validate_states_on_grids(&mut self) -> Result<()> {
        let fronts: Vec<LiveFront> = self.live_slots().iter().map(|&i| self.slots[i].front).collect();
        for f in &fronts {
            if f.kind == FrontKind::S {
                let flux = self.gs.region(f.band_l, f.j_l)?;
                flux.index_of(f.left.s)?;
                flux.index_of(f.right.s)?;
            }
        }
        Ok(())
    }
}
