//! The fixed-design kernel estimator and its weight algebra.
//!
//! For observations `Y_i` on `Λ_n`, bandwidth `h` and kernel `K`,
//!
//! ```text
//! a_i(x) = K((x − i/n) / h)
//! g_n(x) = Σ_i Y_i a_i(x) / Σ_i a_i(x)
//! ```
//!
//! No boundary correction is applied; points closer than `h` to the edge of
//! `[0,1]^d` are flagged instead.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lattice::Lattice;
use crate::par;

/// How the bandwidth shrinks with `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    Fixed(f64),
    /// `h_n = c · n^{−γ}`.
    PowerLaw { c: f64, gamma: f64 },
}

impl BandwidthRule {
    pub fn fixed(h: f64) -> Result<Self> {
        if h > 0.0 && h.is_finite() {
            Ok(BandwidthRule::Fixed(h))
        } else {
            Err(Error::param(format!("bandwidth must be > 0, got {h}")))
        }
    }

    /// Power law usable for inference in dimension `d`: requires
    /// `0 < γ < 1/(d+1)` so that `n h_n^{d+1} → ∞`.
    pub fn power_law(c: f64, gamma: f64, d: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param(format!("bandwidth constant must be > 0, got {c}")));
        }
        let limit = 1.0 / (d as f64 + 1.0);
        if !(gamma > 0.0 && gamma < limit) {
            return Err(Error::param(format!(
                "bandwidth exponent gamma={gamma} must lie in (0, 1/(d+1)) = (0, {limit:.6}) \
                 so that n*h^(d+1) -> infinity"
            )));
        }
        Ok(BandwidthRule::PowerLaw { c, gamma })
    }

    /// `h_n = n^{−1/4}`.
    pub fn default_rule() -> Self {
        BandwidthRule::PowerLaw { c: 1.0, gamma: 0.25 }
    }

    pub fn bandwidth(&self, n: usize) -> f64 {
        match *self {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::PowerLaw { c, gamma } => c * (n as f64).powf(-gamma),
        }
    }
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::Fixed(h) => write!(f, "fixed(h={h})"),
            BandwidthRule::PowerLaw { c, gamma } => write!(f, "power-law(c={c}, gamma={gamma})"),
        }
    }
}

/// True when `x` is closer than `h` to the boundary of `[0,1]^d`.
pub fn near_boundary(x: &[f64], h: f64) -> bool {
    x.iter().any(|&c| c < h || 1.0 - c < h)
}

/// `g_n` evaluated at a list of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
    weight_sums: Vec<f64>,
    bandwidth: f64,
    lattice: Lattice,
    /// Set when the queries are exactly the design points, in order.
    on_grid: bool,
}

impl Estimate {
    pub(crate) fn from_parts(
        lattice: Lattice,
        bandwidth: f64,
        points: Vec<f64>,
        values: Vec<f64>,
        weight_sums: Vec<f64>,
        on_grid: bool,
    ) -> Self {
        Estimate {
            dim: lattice.d(),
            points,
            values,
            weight_sums,
            bandwidth,
            lattice,
            on_grid,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight_sums(&self) -> &[f64] {
        &self.weight_sums
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn is_grid(&self) -> bool {
        self.on_grid
    }

    pub fn boundary_flags(&self) -> Vec<bool> {
        self.points().map(|x| near_boundary(x, self.bandwidth)).collect()
    }

    /// Same queries, values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        Ok(Estimate {
            values,
            ..self.clone()
        })
    }

    pub fn same_queries(&self, other: &Estimate) -> bool {
        self.dim == other.dim && self.points == other.points
    }

    /// CSV with header `x_1,…,x_d,value,weight_sum,boundary_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for ax in 1..=self.dim {
            out.push_str(&format!("x_{ax},"));
        }
        out.push_str("value,weight_sum,boundary_flag\n");
        for (j, x) in self.points().enumerate() {
            for c in x {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!(
                "{},{},{}\n",
                self.values[j],
                self.weight_sums[j],
                u8::from(near_boundary(x, self.bandwidth))
            ));
        }
        out
    }
}

fn check_common(lat: &Lattice, k: &Kernel, h: f64) -> Result<()> {
    if k.dim() != lat.d() {
        return Err(Error::DimensionMismatch {
            expected: lat.d(),
            got: k.dim(),
        });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param(format!("bandwidth must be > 0, got {h}")));
    }
    Ok(())
}

/// Nonzero `a_i(x)` as `(linear index, weight)` pairs in lexicographic order.
/// An empty result is returned as-is; callers decide whether that is an error.
fn sparse_weights(lat: &Lattice, k: &Kernel, h: f64, x: &[f64]) -> Vec<(usize, f64)> {
    let (n, d) = (lat.n(), lat.d());
    let nf = n as f64;
    let mut lo = vec![0usize; d];
    let mut hi = vec![0usize; d];
    for ax in 0..d {
        // one index of slack on each side; the kernel zeroes anything outside
        let a = ((x[ax] - h) * nf).floor() - 1.0;
        let b = ((x[ax] + h) * nf).ceil() + 1.0;
        lo[ax] = a.max(1.0).min(nf + 1.0) as usize;
        hi[ax] = b.min(nf).max(0.0) as usize;
        if lo[ax] > hi[ax] {
            return Vec::new();
        }
    }
    let mut out = Vec::new();
    let mut idx = lo.clone();
    let mut u = vec![0.0; d];
    loop {
        for ax in 0..d {
            u[ax] = (x[ax] - idx[ax] as f64 / nf) / h;
        }
        let w = k.value(&u);
        if w > 0.0 {
            let lin = idx.iter().fold(0, |acc, &c| acc * n + (c - 1));
            out.push((lin, w));
        }
        // odometer, last axis fastest
        let mut ax = d;
        loop {
            if ax == 0 {
                return out;
            }
            ax -= 1;
            if idx[ax] < hi[ax] {
                idx[ax] += 1;
                break;
            }
            idx[ax] = lo[ax];
        }
    }
}

/// The weights `a_i(x)`, returned sparsely.
pub fn kernel_weights(lat: &Lattice, k: &Kernel, h: f64, x: &[f64]) -> Result<Vec<(usize, f64)>> {
    check_common(lat, k, h)?;
    if x.len() != lat.d() {
        return Err(Error::DimensionMismatch {
            expected: lat.d(),
            got: x.len(),
        });
    }
    let w = sparse_weights(lat, k, h, x);
    if w.is_empty() {
        return Err(Error::ZeroWeight {
            index: 0,
            point: x.to_vec(),
        });
    }
    Ok(w)
}

fn check_observations(y: &[f64], lat: &Lattice) -> Result<()> {
    if y.len() != lat.len() {
        return Err(Error::LengthMismatch {
            expected: lat.len(),
            got: y.len(),
        });
    }
    Ok(())
}

/// `g_n` at arbitrary query points in `[0,1]^d`.
pub fn estimate(
    y: &[f64],
    lat: &Lattice,
    k: &Kernel,
    h: f64,
    queries: &[Vec<f64>],
) -> Result<Estimate> {
    check_common(lat, k, h)?;
    check_observations(y, lat)?;
    let d = lat.d();
    for q in queries {
        if q.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: q.len(),
            });
        }
    }
    let fits = par::map_range(queries.len(), |j| {
        let w = sparse_weights(lat, k, h, &queries[j]);
        let den: f64 = w.iter().map(|&(_, a)| a).sum();
        let num: f64 = w.iter().map(|&(i, a)| a * y[i]).sum();
        (num, den)
    });
    let mut values = Vec::with_capacity(queries.len());
    let mut sums = Vec::with_capacity(queries.len());
    for (j, (num, den)) in fits.into_iter().enumerate() {
        if den <= 0.0 {
            return Err(Error::ZeroWeight {
                index: j,
                point: queries[j].clone(),
            });
        }
        values.push(num / den);
        sums.push(den);
    }
    let points = queries.iter().flatten().copied().collect();
    Ok(Estimate::from_parts(*lat, h, points, values, sums, false))
}

/// Dense stencil `w(o) = K(o / (nh))` for offsets `o ∈ [−r, r]^d`.
struct Stencil {
    radius: usize,
    side: usize,
    weights: Vec<f64>,
}

impl Stencil {
    fn new(lat: &Lattice, k: &Kernel, h: f64) -> Self {
        let d = lat.d();
        let nf = lat.n() as f64;
        let radius = ((h * nf).ceil() as usize + 1).min(lat.n());
        let side = 2 * radius + 1;
        let mut weights = vec![0.0; side.pow(d as u32)];
        let mut u = vec![0.0; d];
        for (lin, w) in weights.iter_mut().enumerate() {
            let mut rem = lin;
            for c in u.iter_mut().rev() {
                let o = (rem % side) as f64 - radius as f64;
                *c = o / nf / h;
                rem /= side;
            }
            *w = k.value(&u);
        }
        Stencil {
            radius,
            side,
            weights,
        }
    }
}

/// `g_n` at every design point, by correlating `Y` with a fixed stencil.
///
/// Agrees with [`estimate`] at the design points up to rounding.
pub fn estimate_grid(y: &[f64], lat: &Lattice, k: &Kernel, h: f64) -> Result<Estimate> {
    check_common(lat, k, h)?;
    check_observations(y, lat)?;
    let (n, d) = (lat.n(), lat.d());
    let st = Stencil::new(lat, k, h);
    let r = st.radius as isize;
    let mut fits = vec![(0.0, 0.0); lat.len()];
    par::for_each_chunk_mut(&mut fits, n, |row, chunk| {
        let mut j = vec![0usize; d];
        lat.coords_of(row * n, &mut j);
        let mut lo = vec![0isize; d];
        let mut hi = vec![0isize; d];
        let mut idx = vec![0isize; d];
        for (col, out) in chunk.iter_mut().enumerate() {
            j[d - 1] = col + 1;
            // i = j − o must stay in [1, n]
            for ax in 0..d {
                let jc = j[ax] as isize;
                lo[ax] = (-r).max(jc - n as isize);
                hi[ax] = r.min(jc - 1);
            }
            let (mut num, mut den) = (0.0, 0.0);
            idx[..d - 1].copy_from_slice(&lo[..d - 1]);
            loop {
                let mut s_base = 0usize;
                let mut y_base = 0usize;
                for ax in 0..d - 1 {
                    s_base = s_base * st.side + (idx[ax] + r) as usize;
                    y_base = y_base * n + (j[ax] as isize - idx[ax] - 1) as usize;
                }
                let jl = j[d - 1] as isize;
                for o in lo[d - 1]..=hi[d - 1] {
                    let w = st.weights[s_base * st.side + (o + r) as usize];
                    if w != 0.0 {
                        num += w * y[y_base * n + (jl - o - 1) as usize];
                        den += w;
                    }
                }
                let mut ax = d - 1;
                let mut done = true;
                while ax > 0 {
                    ax -= 1;
                    if idx[ax] < hi[ax] {
                        idx[ax] += 1;
                        done = false;
                        break;
                    }
                    idx[ax] = lo[ax];
                }
                if done {
                    break;
                }
            }
            *out = (num, den);
        }
    });
    let mut values = Vec::with_capacity(lat.len());
    let mut sums = Vec::with_capacity(lat.len());
    for (k_lin, (num, den)) in fits.into_iter().enumerate() {
        if den <= 0.0 {
            return Err(Error::ZeroWeight {
                index: k_lin,
                point: lat.design_point_linear(k_lin),
            });
        }
        values.push(num / den);
        sums.push(den);
    }
    let points = (0..lat.len()).flat_map(|k| lat.design_point_linear(k)).collect();
    Ok(Estimate::from_parts(*lat, h, points, values, sums, true))
}

/// Normalized weight sums whose limits are `δ_xy σ²` and `∫K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannDiagnostic {
    /// `(nh)^{−d} Σ a_i(x) a_i(y)`.
    pub cross: f64,
    /// `(nh)^{−d} Σ a_i(x)`.
    pub mass: f64,
    /// Either point is closer than `h` to the boundary, where the limits fail.
    pub boundary: bool,
}

pub fn riemann_diagnostic(
    lat: &Lattice,
    k: &Kernel,
    h: f64,
    x: &[f64],
    y: &[f64],
) -> Result<RiemannDiagnostic> {
    check_common(lat, k, h)?;
    for p in [x, y] {
        if p.len() != lat.d() {
            return Err(Error::DimensionMismatch {
                expected: lat.d(),
                got: p.len(),
            });
        }
    }
    let wx = sparse_weights(lat, k, h, x);
    let wy = sparse_weights(lat, k, h, y);
    let scale = (lat.n() as f64 * h).powi(lat.d() as i32);
    let mass = wx.iter().map(|&(_, a)| a).sum::<f64>() / scale;
    let cross = merge_dot(&wx, &wy) / scale;
    Ok(RiemannDiagnostic {
        cross,
        mass,
        boundary: near_boundary(x, h) || near_boundary(y, h),
    })
}

/// Dot product of two sparse vectors sorted by index.
fn merge_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut p, mut q) = (0, 0);
    let mut acc = 0.0;
    while p < a.len() && q < b.len() {
        match a[p].0.cmp(&b[q].0) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                acc += a[p].1 * b[q].1;
                p += 1;
                q += 1;
            }
        }
    }
    acc
}

/// Coefficients of the two-point linear combination
/// `(nh)^{d/2}/σ · [λ₁(g_n(x) − Eg_n(x)) + λ₂(g_n(y) − Eg_n(y))] = Σ_i s̃_i ε_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SCoefficients {
    /// `(linear index, s̃_i)` over the union of both supports.
    pub coefficients: Vec<(usize, f64)>,
    pub sum_squares: f64,
    /// `sup_i |s̃_i| · (nh)^{d/2}`.
    pub sup_scaled: f64,
    /// `Σ_i |s̃_i| · (nh)^{−d/2}`.
    pub l1_scaled: f64,
}

/// `s̃_i = (λ₁ v_n(x) b_i(x) + λ₂ v_n(y) b_i(y)) / σ` with
/// `b_i = a_i / (Σ a_j²)^{1/2}` and
/// `v_n = ((nh)^d / Σ a_i)^{1/2} (Σ a_i² / Σ a_i)^{1/2}`.
///
/// `σ` is taken from the unit-mass rescaling of `k`.
pub fn s_coefficients(
    lat: &Lattice,
    k: &Kernel,
    h: f64,
    x: &[f64],
    y: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<SCoefficients> {
    check_common(lat, k, h)?;
    if ((lambda1 * lambda1 + lambda2 * lambda2) - 1.0).abs() > 1e-12 {
        return Err(Error::param("lambda1² + lambda2² must equal 1"));
    }
    if x == y {
        return Err(Error::param("s coefficients need distinct points x != y"));
    }
    let d = lat.d();
    let nh_d = (lat.n() as f64 * h).powi(d as i32);
    let sigma = k.effective_sigma2().sqrt();
    let part = |p: &[f64]| -> Result<Vec<(usize, f64)>> {
        let a = kernel_weights(lat, k, h, p)?;
        let sum: f64 = a.iter().map(|&(_, w)| w).sum();
        let sum_sq: f64 = a.iter().map(|&(_, w)| w * w).sum();
        let v = (nh_d / sum).sqrt() * (sum_sq / sum).sqrt();
        Ok(a.into_iter().map(|(i, w)| (i, v * w / sum_sq.sqrt())).collect())
    };
    let bx = part(x)?;
    let by = part(y)?;
    let mut coefficients = Vec::with_capacity(bx.len() + by.len());
    let (mut p, mut q) = (0, 0);
    while p < bx.len() || q < by.len() {
        let take_x = q >= by.len() || (p < bx.len() && bx[p].0 <= by[q].0);
        let take_y = p >= bx.len() || (q < by.len() && by[q].0 <= bx[p].0);
        let idx = if take_x { bx[p].0 } else { by[q].0 };
        let mut s = 0.0;
        if take_x {
            s += lambda1 * bx[p].1;
            p += 1;
        }
        if take_y {
            s += lambda2 * by[q].1;
            q += 1;
        }
        coefficients.push((idx, s / sigma));
    }
    let sum_squares = coefficients.iter().map(|&(_, s)| s * s).sum();
    let sup = coefficients.iter().fold(0.0f64, |m, &(_, s)| m.max(s.abs()));
    let l1: f64 = coefficients.iter().map(|&(_, s)| s.abs()).sum();
    Ok(SCoefficients {
        coefficients,
        sum_squares,
        sup_scaled: sup * nh_d.sqrt(),
        l1_scaled: l1 / nh_d.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasRow {
    pub n: usize,
    pub h: f64,
    pub sup_error: f64,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasStudy {
    pub rows: Vec<BiasRow>,
    /// Least-squares slope of `ln sup_error` against `ln h`.
    pub slope: Option<f64>,
}

impl fmt::Display for BiasStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n,h,sup_error,queries")?;
        for r in &self.rows {
            writeln!(f, "{},{},{:e},{}", r.n, r.h, r.sup_error, r.queries)?;
        }
        match self.slope {
            Some(s) => write!(f, "# log-log slope vs h: {s:.4}"),
            None => write!(f, "# log-log slope vs h: undefined"),
        }
    }
}

/// Interior query grid: `per_axis` points per axis spread over `[h, 1−h]`.
pub fn interior_queries(d: usize, h: f64, per_axis: usize) -> Vec<Vec<f64>> {
    if per_axis == 0 || h >= 0.5 {
        return Vec::new();
    }
    let axis: Vec<f64> = if per_axis == 1 {
        vec![0.5]
    } else {
        (0..per_axis)
            .map(|k| h + (1.0 - 2.0 * h) * k as f64 / (per_axis - 1) as f64)
            .collect()
    };
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut k| {
            let mut p = vec![0.0; d];
            for c in p.iter_mut().rev() {
                *c = axis[k % per_axis];
                k /= per_axis;
            }
            p
        })
        .collect()
}

/// `sup_x |E g_n(x) − g(x)|` over interior queries for each `(n, h)`.
///
/// `E g_n` is exact: the estimator is linear in `Y`, so it equals the fit
/// of the noiseless values `g(i/n)`.
pub fn bias_study<G>(
    g: G,
    k: &Kernel,
    configs: &[(usize, f64)],
    per_axis: usize,
) -> Result<BiasStudy>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let d = k.dim();
    let mut rows = Vec::with_capacity(configs.len());
    for &(n, h) in configs {
        let lat = Lattice::new(n, d)?;
        let truth: Vec<f64> = par::map_range(lat.len(), |i| g(&lat.design_point_linear(i)));
        let queries = interior_queries(d, h, per_axis);
        if queries.is_empty() {
            return Err(Error::param(format!("no interior queries for h={h}")));
        }
        let est = estimate(&truth, &lat, k, h, &queries)?;
        let sup_error = queries
            .iter()
            .zip(est.values())
            .map(|(x, v)| (v - g(x)).abs())
            .fold(0.0, f64::max);
        rows.push(BiasRow {
            n,
            h,
            sup_error,
            queries: queries.len(),
        });
    }
    let slope = loglog_slope(
        &rows
            .iter()
            .filter(|r| r.sup_error > 1e-13)
            .map(|r| (r.h.ln(), r.sup_error.ln()))
            .collect::<Vec<_>>(),
    );
    Ok(BiasStudy { rows, slope })
}

/// [`bias_study`] along a bandwidth rule.
pub fn bias_study_rule<G>(
    g: G,
    k: &Kernel,
    rule: BandwidthRule,
    n_list: &[usize],
    per_axis: usize,
) -> Result<BiasStudy>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let configs: Vec<_> = n_list.iter().map(|&n| (n, rule.bandwidth(n))).collect();
    bias_study(g, k, &configs, per_axis)
}

fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
