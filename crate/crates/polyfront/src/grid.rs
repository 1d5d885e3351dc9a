//! Finite value grids for `g = f/s` and the piecewise-linear region fluxes
//! built from their preimages.
//!
//! The grid is a finite, sorted set of `g`-levels assembled from four
//! sources: the initial cell values, a uniform mesh fine enough that every
//! region grid is finer than `1/L`, the maxima of all `g`-curves, and the
//! transversal crossings of curve pairs. Each permeability band `i` sees the
//! levels discovered at bands `<= i`; values appearing at a permeability
//! front extend the grid for the bands to its right only, since no wave
//! travels left.

use crate::flux::{Curve, FluxModel, State};
use crate::par;
use crate::riemann::{self, WaveFan};
use crate::util::{bisect_root, find_sorted};
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// Tolerance for deduplicating `g`-levels at the initial build.
pub const LEVEL_SNAP: f64 = 1e-10;
/// Tolerance for deduplicating saturation kinks inside one region grid.
pub const SIGMA_DEDUP: f64 = 3e-11;
/// A solver-emitted state farther than this from every kink is a bug.
pub const STATE_SNAP: f64 = 1e-9;

/// Number of scan points per curve pair when hunting crossings.
const CROSSING_SCAN: usize = 4096;

/// `L = ceil(sup_C2 / eps) * max(N + M, 1)`, the resolution constant sizing
/// the uniform part of the grid.
pub fn l_from_sup(eps: f64, n: usize, m: usize, sup_c2: f64) -> usize {
    let base = (sup_c2 / eps).ceil() as usize;
    base * (n + m).max(1)
}

/// [`l_from_sup`] with the model's sampled C2 estimate.
pub fn build_l(eps: f64, n: usize, m: usize, model: &FluxModel) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps={eps} must be positive")));
    }
    Ok(l_from_sup(eps, n, m, model.c2_sup()))
}

/// Where a level came from; kept for diagnostics and the CSV dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Initial,
    Mesh,
    Maxima,
    Crossing,
    Extension,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Initial => "initial",
            Provenance::Mesh => "mesh",
            Provenance::Maxima => "maxima",
            Provenance::Crossing => "crossing",
            Provenance::Extension => "extension",
        }
    }
}

/// One `g`-level. `witnesses` are exact saturations known to map onto the
/// level under specific curves, recorded as `(c_bits, k_bits, sigma)`; they
/// seed region grids so that solver-emitted states reproduce bit-for-bit.
#[derive(Clone, Debug)]
pub struct LevelEntry {
    pub value: f64,
    /// Band from which this level is visible (0 = initial data).
    pub band: usize,
    pub provenance: Provenance,
    pub witnesses: Vec<(u64, u64, f64)>,
}

/// The sorted finite set of admissible `g`-levels.
#[derive(Clone, Debug)]
pub struct ValueGrid {
    /// Chronological, append-only.
    entries: Vec<LevelEntry>,
    /// Indices into `entries`, sorted by level value.
    order: Vec<u32>,
    /// Number of entries from the initial build; later entries are
    /// extensions discovered at permeability fronts.
    initial_len: usize,
    pub l_const: usize,
    /// Number of permeability jumps.
    pub n_k: usize,
    /// Number of polymer-fraction jumps.
    pub m_c: usize,
    /// Polymer fraction per c-interval, length `m_c + 1`.
    pub c_values: Vec<f64>,
    /// Permeability per band, length `n_k + 1`.
    pub k_values: Vec<f64>,
}

impl ValueGrid {
    /// Builds the initial grid from piecewise-constant data.
    ///
    /// `cells` are the constant states left-to-right; `c_values`/`k_values`
    /// the per-interval palettes.
    pub fn build(
        cells: &[State],
        c_values: Vec<f64>,
        k_values: Vec<f64>,
        eps: f64,
        model: &FluxModel,
    ) -> Result<Self> {
        let n = k_values.len() - 1;
        let m = c_values.len() - 1;
        let l_const = build_l(eps, n, m, model)?;

        // Distinct curves (c, k) over the full palette product.
        let mut curves: Vec<(f64, f64)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for &c in &c_values {
            for &k in &k_values {
                if seen.insert((c.to_bits(), k.to_bits())) {
                    curves.push((c, k));
                }
            }
        }

        let mut raw: Vec<LevelEntry> = Vec::new();
        // Initial cell values.
        for st in cells {
            raw.push(LevelEntry {
                value: model.g(st.s, st.c, st.k),
                band: 0,
                provenance: Provenance::Initial,
                witnesses: vec![(st.c.to_bits(), st.k.to_bits(), st.s)],
            });
        }
        // Uniform mesh and curve maxima, in parallel over curves.
        let per_curve = par::map_indexed(curves.len(), |ci| {
            let (c, k) = curves[ci];
            let curve = model.curve(c, k);
            let mut out = Vec::with_capacity(l_const + 2);
            for l in 0..=l_const {
                let s = l as f64 / l_const as f64;
                out.push(LevelEntry {
                    value: model.g(s, c, k),
                    band: 0,
                    provenance: Provenance::Mesh,
                    witnesses: vec![(c.to_bits(), k.to_bits(), s)],
                });
            }
            out.push(LevelEntry {
                value: curve.g_max,
                band: 0,
                provenance: Provenance::Maxima,
                witnesses: vec![(c.to_bits(), k.to_bits(), curve.sigma_max)],
            });
            out
        });
        raw.extend(per_curve.into_iter().flatten());
        // Transversal crossings of curve pairs.
        let mut pairs = Vec::new();
        for a in 0..curves.len() {
            for b in a + 1..curves.len() {
                pairs.push((curves[a], curves[b]));
            }
        }
        let crossing_rows = par::map_indexed(pairs.len(), |pi| {
            let ((ca, ka), (cb, kb)) = pairs[pi];
            crossing_levels(model, ca, ka, cb, kb)
        });
        raw.extend(crossing_rows.into_iter().flatten());

        let entries = dedup_levels(raw);
        let mut order: Vec<u32> = (0..entries.len() as u32).collect();
        order.sort_by(|&a, &b| {
            entries[a as usize]
                .value
                .total_cmp(&entries[b as usize].value)
        });
        let initial_len = entries.len();
        Ok(ValueGrid {
            entries,
            order,
            initial_len,
            l_const,
            n_k: n,
            m_c: m,
            c_values,
            k_values,
        })
    }

    pub fn epoch(&self) -> usize {
        self.entries.len()
    }

    /// Entry count of the initial build (extensions follow it).
    pub fn initial_len(&self) -> usize {
        self.initial_len
    }

    pub fn entries(&self) -> &[LevelEntry] {
        &self.entries
    }

    /// Distance from `level` to the nearest grid value.
    pub fn distance_to_nearest(&self, level: f64) -> f64 {
        let mut best = f64::INFINITY;
        let idx = self
            .order
            .partition_point(|&i| self.entries[i as usize].value < level);
        for cand in [idx.wrapping_sub(1), idx] {
            if cand < self.order.len() {
                best = best.min((self.entries[self.order[cand] as usize].value - level).abs());
            }
        }
        best
    }

    pub fn contains_level(&self, level: f64, tol: f64) -> bool {
        self.distance_to_nearest(level) <= tol
    }

    /// Appends a level discovered at a permeability front. Returns its index.
    pub fn push_extension(&mut self, value: f64, band: usize, witness: (f64, f64, f64)) -> usize {
        let entry = LevelEntry {
            value,
            band,
            provenance: Provenance::Extension,
            witnesses: vec![(witness.0.to_bits(), witness.1.to_bits(), witness.2)],
        };
        let idx = self.entries.len();
        self.entries.push(entry);
        let pos = self
            .order
            .partition_point(|&i| self.entries[i as usize].value < value);
        self.order.insert(pos, idx as u32);
        idx
    }

    /// CSV dump of the level set (value, band, provenance).
    pub fn dump_csv(&self) -> String {
        let mut s = String::from("value,band,provenance\n");
        for &i in &self.order {
            let e = &self.entries[i as usize];
            s.push_str(&format!("{},{},{}\n", e.value, e.band, e.provenance.as_str()));
        }
        s
    }
}

fn dedup_levels(mut raw: Vec<LevelEntry>) -> Vec<LevelEntry> {
    raw.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<LevelEntry> = Vec::with_capacity(raw.len());
    for e in raw {
        match out.last_mut() {
            Some(last) if (e.value - last.value).abs() <= LEVEL_SNAP => {
                for w in e.witnesses {
                    if !last.witnesses.contains(&w) {
                        last.witnesses.push(w);
                    }
                }
            }
            _ => out.push(e),
        }
    }
    out
}

/// Levels at which `g(., ca, ka)` and `g(., cb, kb)` cross with strictly
/// opposite slopes: a 4096-point scan for sign changes of the difference,
/// bisection refinement, then a central-difference slope filter (h = 1e-6,
/// magnitudes above 1e-8).
pub fn crossing_levels(
    model: &FluxModel,
    ca: f64,
    ka: f64,
    cb: f64,
    kb: f64,
) -> Vec<LevelEntry> {
    let n = CROSSING_SCAN;
    let d = |s: f64| model.g(s, ca, ka) - model.g(s, cb, kb);
    let mut out = Vec::new();
    let mut prev = d(0.0);
    for i in 1..=n {
        let s = i as f64 / n as f64;
        let cur = d(s);
        if prev != 0.0 && cur != 0.0 && (prev < 0.0) != (cur < 0.0) {
            let lo = (i - 1) as f64 / n as f64;
            let root = bisect_root(d, lo, s);
            let h = 1e-6;
            let r0 = (root - h).max(0.0);
            let r1 = (root + h).min(1.0);
            let slope_a = (model.g(r1, ca, ka) - model.g(r0, ca, ka)) / (r1 - r0);
            let slope_b = (model.g(r1, cb, kb) - model.g(r0, cb, kb)) / (r1 - r0);
            if slope_a * slope_b < 0.0 && slope_a.abs() > 1e-8 && slope_b.abs() > 1e-8 {
                let value = 0.5 * (model.g(root, ca, ka) + model.g(root, cb, kb));
                out.push(LevelEntry {
                    value,
                    band: 0,
                    provenance: Provenance::Crossing,
                    witnesses: vec![
                        (ca.to_bits(), ka.to_bits(), root),
                        (cb.to_bits(), kb.to_bits(), root),
                    ],
                });
            }
        }
        if cur != 0.0 {
            prev = cur;
        }
    }
    out
}

/// All preimages of `level` under `g(., curve)`: empty above the maximum,
/// the collapsed maximum point at the maximum, one increasing-branch root
/// below `g(1)`, and a root on each branch in between.
pub fn preimages(model: &FluxModel, curve: &Curve, level: f64) -> Vec<f64> {
    if level < 0.0 || level > curve.g_max {
        return Vec::new();
    }
    if level == 0.0 {
        return vec![0.0];
    }
    if level == curve.g_max {
        return vec![curve.sigma_max];
    }
    let g1 = model.g(1.0, curve.gamma, curve.kappa);
    let mut out = vec![model.preimage_inc(curve, level)];
    if level >= g1 {
        out.push(model.preimage_dec(curve, level));
    }
    out
}

/// Piecewise-linear interpolation of `f(., c_j, k_i)` over the saturation
/// grid of a region.
#[derive(Clone, Debug)]
pub struct RegionFlux {
    pub band: usize,
    pub c_index: usize,
    pub curve: Curve,
    /// Sorted kink saturations, first 0 and last 1.
    pub kinks: Vec<f64>,
    /// Exact flux values at the kinks.
    pub values: Vec<f64>,
    /// Chord slopes between consecutive kinks.
    pub slopes: Vec<f64>,
    /// Index of the maximum point of `g` within `kinks`.
    pub peak_idx: usize,
    /// Grid epoch this region was built against.
    pub cutoff: usize,
    /// Number of grid entries visible to this band at build time.
    pub visible_count: usize,
}

impl RegionFlux {
    /// Canonical construction: a full build over the initial level set
    /// followed by incremental refinement with every visible extension up
    /// to `cutoff`. The live tracker and the auditors both use this, so a
    /// region rebuilt later is kink-for-kink identical to the one the
    /// solvers used.
    pub fn build_at(
        grid: &ValueGrid,
        band: usize,
        c_index: usize,
        cutoff: usize,
        model: &FluxModel,
    ) -> Result<Self> {
        let base_cut = cutoff.min(grid.initial_len());
        let mut flux = Self::build_full(grid, band, c_index, base_cut, model)?;
        for (i, e) in grid.entries().iter().enumerate().take(cutoff).skip(base_cut) {
            flux.refine_with(e, i + 1, model);
        }
        Ok(flux)
    }

    /// One-shot build from the levels visible to `band` among
    /// `grid.entries()[..cutoff]`.
    fn build_full(
        grid: &ValueGrid,
        band: usize,
        c_index: usize,
        cutoff: usize,
        model: &FluxModel,
    ) -> Result<Self> {
        let c = grid.c_values[c_index];
        let k = grid.k_values[band];
        let curve = model.curve(c, k);
        let cb = c.to_bits();
        let kb = k.to_bits();

        // (sigma, priority). Seeds carry priority so dedup keeps them exact.
        let l_const = grid.l_const;
        let mut pts: Vec<(f64, bool)> = Vec::with_capacity(2 * cutoff + l_const + 4);
        for l in 0..=l_const {
            pts.push((l as f64 / l_const as f64, true));
        }
        pts.push((curve.sigma_max, true));
        let visible: Vec<&LevelEntry> = grid.entries[..cutoff]
            .iter()
            .filter(|e| e.band <= band)
            .collect();
        for e in &visible {
            for w in &e.witnesses {
                if w.0 == cb && w.1 == kb {
                    pts.push((w.2, true));
                }
            }
        }
        let g1 = model.g(1.0, c, k);
        // March through the levels in ascending order so every inversion is
        // warm-started from the previous root: increasing-branch roots grow
        // with the level, decreasing-branch roots shrink toward the peak.
        let mut order: Vec<usize> = (0..visible.len()).collect();
        order.sort_by(|&a, &b| visible[a].value.total_cmp(&visible[b].value));
        let mut prev_inc = 0.0f64;
        let mut prev_dec = 1.0f64;
        for &vi in &order {
            let e = visible[vi];
            let level = e.value;
            if level <= 0.0 || level >= curve.g_max {
                continue;
            }
            let wit_sigma = e
                .witnesses
                .iter()
                .find(|w| w.0 == cb && w.1 == kb)
                .map(|w| w.2);
            match wit_sigma {
                Some(s) if s <= curve.sigma_max => prev_inc = prev_inc.max(s),
                _ => {
                    let s = model.invert_g_branch(
                        &curve,
                        level,
                        prev_inc,
                        curve.sigma_max,
                        prev_inc,
                        true,
                    );
                    pts.push((s, false));
                    prev_inc = s;
                }
            }
            if level >= g1 {
                match wit_sigma {
                    Some(s) if s >= curve.sigma_max => prev_dec = prev_dec.min(s),
                    _ => {
                        let s = model.invert_g_branch(
                            &curve,
                            level,
                            curve.sigma_max,
                            prev_dec,
                            prev_dec,
                            false,
                        );
                        pts.push((s, false));
                        prev_dec = s;
                    }
                }
            }
        }
        pts.push((0.0, true));
        pts.push((1.0, true));

        // Sort and dedup, preferring seed points inside each cluster.
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut kinks: Vec<f64> = Vec::with_capacity(pts.len());
        let mut cluster_start = 0.0f64;
        let mut cluster_has_seed = false;
        for (s, seed) in pts {
            match kinks.last() {
                Some(_) if s - cluster_start <= SIGMA_DEDUP => {
                    if seed && !cluster_has_seed {
                        *kinks.last_mut().unwrap() = s;
                        cluster_has_seed = true;
                    }
                }
                _ => {
                    kinks.push(s);
                    cluster_start = s;
                    cluster_has_seed = seed;
                }
            }
        }
        debug_assert!(kinks[0] == 0.0 && *kinks.last().unwrap() == 1.0);

        let values: Vec<f64> = kinks.iter().map(|&s| model.f(s, c, k)).collect();
        let slopes: Vec<f64> = kinks
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        let peak_idx = find_sorted(&kinks, curve.sigma_max, SIGMA_DEDUP)
            .ok_or_else(|| Error::InvariantViolation("peak point missing from region grid".into()))?;
        Ok(RegionFlux {
            band,
            c_index,
            curve,
            kinks,
            values,
            slopes,
            peak_idx,
            cutoff,
            visible_count: visible.len(),
        })
    }

    /// Refines this region in place with one later grid entry: inserts the
    /// (at most two) preimages of the new level unless the entry is not
    /// visible to the band or the points collapse onto existing kinks.
    /// Returns the insertion positions so prefix caches can update exactly.
    pub fn refine_with(
        &mut self,
        e: &LevelEntry,
        new_cutoff: usize,
        model: &FluxModel,
    ) -> [Option<usize>; 2] {
        self.cutoff = new_cutoff;
        if e.band > self.band {
            return [None, None];
        }
        self.visible_count += 1;
        let level = e.value;
        if level <= 0.0 || level >= self.curve.g_max {
            return [None, None];
        }
        let cb = self.curve.gamma.to_bits();
        let kb = self.curve.kappa.to_bits();
        let wit = e
            .witnesses
            .iter()
            .find(|w| w.0 == cb && w.1 == kb)
            .map(|w| w.2);
        let s_inc = match wit {
            Some(s) if s <= self.curve.sigma_max => s,
            _ => model.preimage_inc(&self.curve, level),
        };
        let first = self.insert_kink(s_inc, model);
        let second = if level >= model.g(1.0, self.curve.gamma, self.curve.kappa) {
            let s_dec = match wit {
                Some(s) if s >= self.curve.sigma_max => s,
                _ => model.preimage_dec(&self.curve, level),
            };
            self.insert_kink(s_dec, model)
        } else {
            None
        };
        [first, second]
    }

    fn insert_kink(&mut self, s: f64, model: &FluxModel) -> Option<usize> {
        if find_sorted(&self.kinks, s, SIGMA_DEDUP).is_some() {
            return None;
        }
        let pos = self.kinks.partition_point(|&x| x < s);
        debug_assert!(pos > 0 && pos < self.kinks.len());
        self.kinks.insert(pos, s);
        self.values
            .insert(pos, model.f(s, self.curve.gamma, self.curve.kappa));
        let left = (self.values[pos] - self.values[pos - 1]) / (self.kinks[pos] - self.kinks[pos - 1]);
        let right =
            (self.values[pos + 1] - self.values[pos]) / (self.kinks[pos + 1] - self.kinks[pos]);
        self.slopes[pos - 1] = left;
        self.slopes.insert(pos, right);
        if pos <= self.peak_idx {
            self.peak_idx += 1;
        }
        Some(pos)
    }

    pub fn len(&self) -> usize {
        self.kinks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinks.is_empty()
    }

    /// Index of the kink equal to `s` (within [`STATE_SNAP`]).
    pub fn index_of(&self, s: f64) -> Result<usize> {
        find_sorted(&self.kinks, s, STATE_SNAP).ok_or_else(|| {
            Error::InvariantViolation(format!(
                "state s={s} not on the saturation grid of region ({}, {})",
                self.band, self.c_index
            ))
        })
    }

    /// `g` at a kink.
    #[inline]
    pub fn g_at(&self, idx: usize) -> f64 {
        if self.kinks[idx] == 0.0 {
            0.0
        } else {
            self.values[idx] / self.kinks[idx]
        }
    }

    /// Kink on the increasing branch whose `g`-value is closest to `level`.
    pub fn kink_by_level_inc(&self, level: f64) -> usize {
        let lo = 0usize;
        let hi = self.peak_idx;
        let mut a = lo;
        let mut b = hi;
        while b - a > 1 {
            let mid = (a + b) / 2;
            if self.g_at(mid) < level {
                a = mid;
            } else {
                b = mid;
            }
        }
        if (self.g_at(a) - level).abs() <= (self.g_at(b) - level).abs() {
            a
        } else {
            b
        }
    }

    /// Kink on the decreasing branch whose `g`-value is closest to `level`.
    pub fn kink_by_level_dec(&self, level: f64) -> usize {
        let lo = self.peak_idx;
        let hi = self.kinks.len() - 1;
        let mut a = lo;
        let mut b = hi;
        while b - a > 1 {
            let mid = (a + b) / 2;
            if self.g_at(mid) > level {
                a = mid;
            } else {
                b = mid;
            }
        }
        if (self.g_at(a) - level).abs() <= (self.g_at(b) - level).abs() {
            a
        } else {
            b
        }
    }

    /// Piecewise-linear flux value.
    pub fn eval_f_pl(&self, s: f64) -> f64 {
        let i = self
            .kinks
            .partition_point(|&x| x < s)
            .clamp(1, self.kinks.len() - 1);
        self.values[i - 1] + self.slopes[i - 1] * (s - self.kinks[i - 1])
    }

    /// Piecewise-linear flux slope at `s` (left slope at kinks).
    pub fn eval_df_pl(&self, s: f64) -> f64 {
        let i = self
            .kinks
            .partition_point(|&x| x < s)
            .clamp(1, self.kinks.len() - 1);
        self.slopes[i - 1]
    }

    /// Largest gap between consecutive kinks.
    pub fn mesh_width(&self) -> f64 {
        self.kinks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// A value grid plus the lazily built and cached region fluxes, and the
/// solver composition that needs both.
pub struct GridSystem {
    pub grid: ValueGrid,
    model: FluxModel,
    cache: HashMap<(usize, usize), Arc<RegionFlux>>,
    /// Per-band count of visible entries, for O(1) staleness checks.
    visible: Vec<usize>,
}

impl GridSystem {
    pub fn new(grid: ValueGrid, model: FluxModel) -> Self {
        let bands = grid.k_values.len();
        let mut visible = vec![0usize; bands];
        for e in grid.entries() {
            for (b, v) in visible.iter_mut().enumerate() {
                if e.band <= b {
                    *v += 1;
                }
            }
        }
        GridSystem {
            grid,
            model,
            cache: HashMap::new(),
            visible,
        }
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    /// The region flux for band `i`, c-interval `j`; refined in place when
    /// the grid has grown since the cached copy was made.
    pub fn region(&mut self, band: usize, c_index: usize) -> Result<Arc<RegionFlux>> {
        let key = (band, c_index);
        let want = self.visible[band];
        if let Some(r) = self.cache.get_mut(&key) {
            if r.visible_count == want {
                return Ok(r.clone());
            }
            // Usually nothing else holds the Arc between events, so this
            // refines in place without copying the arrays.
            let flux = Arc::make_mut(r);
            let epoch = self.grid.epoch();
            for i in flux.cutoff..epoch {
                let e = &self.grid.entries()[i];
                flux.refine_with(e, i + 1, &self.model);
            }
            debug_assert_eq!(flux.visible_count, want);
            return Ok(r.clone());
        }
        let built = Arc::new(RegionFlux::build_at(
            &self.grid,
            band,
            c_index,
            self.grid.epoch(),
            &self.model,
        )?);
        self.cache.insert(key, built.clone());
        Ok(built)
    }

    /// Rebuild a region exactly as it stood at `cutoff`; used by auditors.
    pub fn region_at_cutoff(&self, band: usize, c_index: usize, cutoff: usize) -> Result<RegionFlux> {
        RegionFlux::build_at(&self.grid, band, c_index, cutoff, &self.model)
    }

    /// Registers a solver-emitted saturation at a permeability front:
    /// either snaps it onto an existing kink of region `(band, c_index)` or
    /// extends the grid with its `g`-value. Returns the state to use and
    /// the newly added level, if any.
    pub fn register_state(
        &mut self,
        band: usize,
        c_index: usize,
        sigma: f64,
    ) -> Result<(f64, Option<f64>)> {
        let flux = self.region(band, c_index)?;
        if let Some(idx) = find_sorted(&flux.kinks, sigma, SIGMA_DEDUP) {
            return Ok((flux.kinks[idx], None));
        }
        let c = self.grid.c_values[c_index];
        let k = self.grid.k_values[band];
        let level = self.model.g(sigma, c, k);
        self.grid.push_extension(level, band, (c, k, sigma));
        for (b, v) in self.visible.iter_mut().enumerate() {
            if band <= b {
                *v += 1;
            }
        }
        Ok((sigma, Some(level)))
    }

    /// The composed Riemann solver between `left` and `right` where the two
    /// sides live in bands `band_l`/`band_r` and c-intervals `j_l`/`j_r`.
    /// Returns the wave fan and the level added to the grid, if any.
    pub fn solve_global(
        &mut self,
        left: State,
        right: State,
        band_l: usize,
        band_r: usize,
        j_l: usize,
        j_r: usize,
    ) -> Result<(WaveFan, Option<f64>)> {
        left.validate()?;
        right.validate()?;
        let mut fronts = Vec::new();
        let mut extended = None;
        let mid = if band_l != band_r {
            let k_l = self.grid.k_values[band_l];
            let k_r = self.grid.k_values[band_r];
            let target = self.model.f(left.s, left.c, k_l);
            let sm_raw = self.model.invert_f(target, left.c, k_r);
            let (sm, grew) = self.register_state(band_r, j_l, sm_raw)?;
            extended = grew;
            let mid = State {
                s: sm,
                c: left.c,
                k: k_r,
            };
            fronts.push(riemann::Front {
                kind: riemann::FrontKind::K,
                position: 0.0,
                speed: 0.0,
                left,
                right: mid,
            });
            mid
        } else {
            left
        };

        if mid.c.to_bits() == right.c.to_bits() {
            debug_assert_eq!(j_l, j_r, "equal c values in distinct c-intervals");
            let flux = self.region(band_r, j_r)?;
            let fan = riemann::solve_scalar_pl(&flux, mid.s, right.s)?;
            fronts.extend(fan.fronts);
        } else {
            let flux_l = self.region(band_r, j_l)?;
            let flux_r = self.region(band_r, j_r)?;
            let sol = riemann::solve_c_minjump(
                mid.s, mid.c, right.s, right.c, mid.k, &flux_l, &flux_r, &self.model,
            )?;
            fronts.extend(sol.left_fan.fronts);
            fronts.push(riemann::Front {
                kind: riemann::FrontKind::C,
                position: 0.0,
                speed: sol.lambda_c,
                left: State {
                    s: sol.s_minus,
                    c: mid.c,
                    k: mid.k,
                },
                right: State {
                    s: sol.s_plus,
                    c: right.c,
                    k: mid.k,
                },
            });
            fronts.extend(sol.right_fan.fronts);
        }
        Ok((WaveFan { fronts }, extended))
    }
}
