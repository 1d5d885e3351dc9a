//! Small numeric helpers shared across modules.

/// Bisection for `f(x) = target` on `[lo, hi]` where `f` is monotone
/// (either direction). The bracket must satisfy the sign condition; the
/// result is refined until the interval width is below `4 eps max(1,|x|)`.
pub fn invert_monotone<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, target: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    let fa = f(a) - target;
    let fb = f(b) - target;
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(
        fa * fb <= 0.0,
        "invert_monotone: endpoints do not bracket the target"
    );
    let increasing = fa < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid) - target;
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == increasing {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Root of `f` on `[lo, hi]` assuming exactly one sign change.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    invert_monotone(f, lo, hi, 0.0)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` with absolute tolerance
/// `tol`. `f` should be smooth on the interval; kinks must be split by the
/// caller.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Binary search for `x` in a sorted slice with absolute tolerance `tol`.
/// Returns the index of a matching element, preferring the closest one.
pub fn find_sorted(xs: &[f64], x: f64, tol: f64) -> Option<usize> {
    if xs.is_empty() {
        return None;
    }
    let idx = xs.partition_point(|&v| v < x);
    let mut best: Option<usize> = None;
    for cand in [idx.wrapping_sub(1), idx] {
        if cand < xs.len() {
            let d = (xs[cand] - x).abs();
            if d <= tol && best.map_or(true, |b| d < (xs[b] - x).abs()) {
                best = Some(cand);
            }
        }
    }
    best
}
