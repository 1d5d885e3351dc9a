//! Plot-ready CSV output. Floats are written with the shortest
//! round-trip formatting, so identical runs produce byte-identical files.

use crate::entropy::{EntropyReport, Rect};
use crate::harness::fv::FvSolution;
use crate::riemann::WaveFan;
use crate::tracker::Simulation;
use crate::Result;
use std::fmt::Write as _;

/// Piecewise-constant snapshots `(t, x, s, c, k)` at the requested times:
/// one row at the left window edge, then one per front position inside the
/// window carrying the right limit.
pub fn snapshots_csv(sim: &Simulation, times: &[f64], xl: f64, xr: f64) -> Result<String> {
    let mut out = String::from("t,x,s,c,k\n");
    for &t in times {
        let mut line = sim.front_line(t)?;
        line.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut cur = sim.leftmost_state();
        for f in &line {
            if f.0 <= xl {
                cur = f.2;
            }
        }
        let _ = writeln!(out, "{t},{xl},{},{},{}", cur.s, cur.c, cur.k);
        for f in &line {
            if f.0 > xl && f.0 <= xr {
                let _ = writeln!(out, "{t},{},{},{},{}", f.0, f.2.s, f.2.c, f.2.k);
            }
        }
    }
    Ok(out)
}

/// One row per recorded front segment.
pub fn fronts_csv(sim: &Simulation) -> String {
    let mut out = String::from("t,kind,position,speed,sL,cL,kL,sR,cR,kR\n");
    for seg in sim.segments() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            seg.t0,
            seg.kind.as_str(),
            seg.x0,
            seg.speed,
            seg.left.s,
            seg.left.c,
            seg.left.k,
            seg.right.s,
            seg.right.c,
            seg.right.k
        );
    }
    out
}

/// Per-front production rows for each entropy, plus one summary row per
/// audited rectangle.
pub fn entropy_csv(
    sim: &Simulation,
    reports: &[EntropyReport],
    rects: &[(Rect, Vec<f64>)],
) -> String {
    let mut out =
        String::from("entropy,row,t0,t1,x0,x1,kind,speed,production,budget,mu_plus\n");
    for rep in reports {
        for rec in &rep.records {
            let t1 = rec.t1.min(sim.time());
            let _ = writeln!(
                out,
                "{},front,{},{},{},,{},{},{},{},",
                rep.entropy,
                rec.t0,
                t1,
                rec.x0,
                rec.kind.as_str(),
                rec.speed,
                rec.production,
                rec.budget
            );
        }
    }
    for (rect, mus) in rects {
        for (rep, mu) in reports.iter().zip(mus) {
            let _ = writeln!(
                out,
                "{},rectangle,{},{},{},{},,,,,{}",
                rep.entropy, rect.t0, rect.t1, rect.x0, rect.x1, mu
            );
        }
    }
    out
}

/// A wave fan as CSV (the `riemann` subcommand output).
pub fn fan_csv(fan: &WaveFan) -> String {
    let mut out = String::from("kind,speed,sL,cL,kL,sR,cR,kR\n");
    for f in &fan.fronts {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.kind.as_str(),
            f.speed,
            f.left.s,
            f.left.c,
            f.left.k,
            f.right.s,
            f.right.c,
            f.right.k
        );
    }
    out
}

/// Gridded finite-volume output `(t, x, s, c, k)`.
pub fn fv_csv(fv: &FvSolution) -> String {
    let mut out = String::from("t,x,s,c,k\n");
    for i in 0..fv.cells() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fv.t,
            fv.center(i),
            fv.s[i],
            fv.c[i],
            fv.k[i]
        );
    }
    out
}
