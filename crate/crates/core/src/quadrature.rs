//! Adaptive Simpson quadrature in one dimension, its tensor-product
//! extension to cubes, and a splitting variant for integrands with an
//! integrable singularity at the left endpoint.

const MAX_DEPTH: u32 = 48;

/// `∫_a^b f` to relative tolerance `rel_tol` (absolute floor `1e-300`).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Composite pass sets the scale for the absolute tolerance and breaks up
    // integrands whose support is a small part of [a, b].
    const PIECES: usize = 32;
    let width = (b - a) / PIECES as f64;
    let mut coarse = Vec::with_capacity(PIECES);
    let mut scale = 0.0;
    for p in 0..PIECES {
        let lo = a + p as f64 * width;
        let hi = if p + 1 == PIECES { b } else { lo + width };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        scale += ((hi - lo) / 6.0 * (flo.abs() + 4.0 * fmid.abs() + fhi.abs())).abs();
        coarse.push((lo, hi, flo, fmid, fhi, whole));
    }
    let tol = (rel_tol * scale).max(1e-300) / PIECES as f64;
    coarse
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| {
            refine(&f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
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
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫_{[lo,hi]^d} f` by nesting [`simpson`] once per axis.
///
/// Cost grows like the per-axis evaluation count to the power `d`; meant for
/// `d ≤ 3`.
pub fn simpson_cube<F: Fn(&[f64]) -> f64>(f: F, d: usize, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let mut point = vec![0.0; d];
    nested(&f, &mut point, 0, lo, hi, rel_tol)
}

fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    point: &mut [f64],
    axis: usize,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> f64 {
    if axis == point.len() {
        return f(point);
    }
    // The closure needs its own copy of the prefix since `simpson` borrows it
    // immutably while recursing.
    let prefix = point.to_vec();
    simpson(
        |u| {
            let mut p = prefix.clone();
            p[axis] = u;
            nested(f, &mut p, axis + 1, lo, hi, rel_tol)
        },
        lo,
        hi,
        rel_tol,
    )
}

/// `∫_0^b f` for `f` possibly unbounded (but integrable) at 0.
///
/// Integrates over dyadic pieces `[b/2^{k+1}, b/2^k]` until a piece
/// contributes less than `rel_tol` of the running total.
pub fn simpson_left_singular<F: Fn(f64) -> f64>(f: F, b: f64, rel_tol: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..1000 {
        let lo = 0.5 * hi;
        let piece = simpson(&f, lo, hi, rel_tol);
        total += piece;
        if piece.abs() <= rel_tol * total.abs() * 1e-2 || hi < 1e-300 {
            break;
        }
        hi = lo;
    }
    total
}
