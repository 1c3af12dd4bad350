//! Stationary random fields on `Λ_n` with known covariance.
//!
//! Four generators cover the dependence classes the estimator is meant for:
//!
//! * `IidGaussian`: independent `N(0, sd²)` values.
//! * `ExpGaussianSpectral`: Gaussian field with covariance
//!   `C(k) = cst · exp(−|k|/a)` (Euclidean `|k|`), simulated by the spectral
//!   method `ε_k = √cst · √(2/M) Σ_m cos(⟨ω_m, k⟩ + φ_m)` with `ω_m` drawn from
//!   the spectral measure of the covariance and `φ_m ~ U[0, 2π)`.
//! * `MaField`: finite moving average `ε_i = Σ_j θ_j ξ_{i−j}` of i.i.d.
//!   standard normals.
//! * `MdField`: martingale-difference field
//!   `ε_i = ξ_i (1 + β ξ_{i−e₁}²)^{1/2} / (1 + β)^{1/2}`, uncorrelated but
//!   dependent, with unit variance.
//!
//! All generators are ergodic, so `η = Σ_k C(k)` is a constant available
//! from [`theoretical_eta`].

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::par;
use crate::rng::{labels, SeedPath};

pub const DEFAULT_COMPONENTS: usize = 4096;

/// Rows of the spectral phasor matrix handled per work item.
const SPECTRAL_ROW_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    IidGaussian {
        sd: f64,
    },
    ExpGaussianSpectral {
        cst: f64,
        range: f64,
        components: usize,
    },
    /// `(offset j, θ_j)` pairs; driving noise has unit variance.
    MaField {
        stencil: Vec<(Vec<isize>, f64)>,
    },
    MdField {
        beta: f64,
    },
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::IidGaussian { .. } => "iid-gaussian",
            FieldKind::ExpGaussianSpectral { .. } => "exp-gaussian-spectral",
            FieldKind::MaField { .. } => "ma-field",
            FieldKind::MdField { .. } => "md-field",
        }
    }
}

/// A generator description plus its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub seed: u64,
}

impl FieldSpec {
    pub fn iid(sd: f64, seed: u64) -> Self {
        FieldSpec {
            kind: FieldKind::IidGaussian { sd },
            seed,
        }
    }

    pub fn exp_spectral(cst: f64, range: f64, components: usize, seed: u64) -> Self {
        FieldSpec {
            kind: FieldKind::ExpGaussianSpectral {
                cst,
                range,
                components,
            },
            seed,
        }
    }

    pub fn ma(stencil: Vec<(Vec<isize>, f64)>, seed: u64) -> Self {
        FieldSpec {
            kind: FieldKind::MaField { stencil },
            seed,
        }
    }

    /// Causal moving average along the first axis: `ε_i = Σ_k θ_k ξ_{i − k e₁}`.
    pub fn ma_first_axis(thetas: &[f64], d: usize, seed: u64) -> Self {
        let stencil = thetas
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let mut off = vec![0isize; d];
                off[0] = k as isize;
                (off, t)
            })
            .collect();
        FieldSpec::ma(stencil, seed)
    }

    pub fn md(beta: f64, seed: u64) -> Self {
        FieldSpec {
            kind: FieldKind::MdField { beta },
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        FieldSpec {
            kind: self.kind.clone(),
            seed,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match &self.kind {
            FieldKind::IidGaussian { sd } => positive("sd", *sd),
            FieldKind::ExpGaussianSpectral {
                cst,
                range,
                components,
            } => {
                positive("cst", *cst)?;
                positive("range", *range)?;
                if *components == 0 {
                    return Err(Error::param("spectral component count must be >= 1"));
                }
                if !(1..=3).contains(&d) {
                    return Err(Error::Unsupported(format!(
                        "exponential spectral field implemented for d in 1..=3, got d={d}"
                    )));
                }
                Ok(())
            }
            FieldKind::MaField { stencil } => {
                if stencil.is_empty() {
                    return Err(Error::param("moving-average stencil is empty"));
                }
                for (off, theta) in stencil {
                    if off.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: off.len(),
                        });
                    }
                    if !theta.is_finite() {
                        return Err(Error::param("stencil weights must be finite"));
                    }
                }
                Ok(())
            }
            FieldKind::MdField { beta } => {
                if beta.is_finite() && *beta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::param(format!("beta must be >= 0, got {beta}")))
                }
            }
        }
    }

    /// Analytic covariance `C(k) = E(ε_0 ε_k)`.
    pub fn covariance(&self, lag: &[isize]) -> f64 {
        match &self.kind {
            FieldKind::IidGaussian { sd } => {
                if lag.iter().all(|&l| l == 0) {
                    sd * sd
                } else {
                    0.0
                }
            }
            FieldKind::ExpGaussianSpectral { cst, range, .. } => {
                let r = lag.iter().map(|&l| (l * l) as f64).sum::<f64>().sqrt();
                cst * (-r / range).exp()
            }
            FieldKind::MaField { stencil } => {
                // C(k) = Σ_j θ_j θ_{j+k}
                let mut acc = 0.0;
                for (j, tj) in stencil {
                    for (m, tm) in stencil {
                        if m.iter().zip(j).zip(lag).all(|((m, j), l)| m - j == *l) {
                            acc += tj * tm;
                        }
                    }
                }
                acc
            }
            FieldKind::MdField { .. } => {
                if lag.iter().all(|&l| l == 0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FieldKind::IidGaussian { sd } => write!(f, "iid-gaussian(sd={sd})")?,
            FieldKind::ExpGaussianSpectral {
                cst,
                range,
                components,
            } => write!(f, "exp-gaussian-spectral(cst={cst}, a={range}, M={components})")?,
            FieldKind::MaField { stencil } => {
                write!(f, "ma-field(")?;
                for (k, (off, t)) in stencil.iter().enumerate() {
                    if k > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{off:?}:{t}")?;
                }
                write!(f, ")")?;
            }
            FieldKind::MdField { beta } => write!(f, "md-field(beta={beta})")?,
        }
        write!(f, " seed={}", self.seed)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be > 0, got {v}")))
    }
}

/// Real values on a lattice, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    lattice: Lattice,
    values: Vec<f64>,
    spec: Option<FieldSpec>,
}

impl Field {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::LengthMismatch {
                expected: lattice.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("field values must be finite"));
        }
        Ok(Field {
            lattice,
            values,
            spec: None,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Generator that produced this field, if it was simulated.
    pub fn spec(&self) -> Option<&FieldSpec> {
        self.spec.as_ref()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            lattice: self.lattice,
            values: self.values.iter().map(|v| c * v).collect(),
            spec: None,
        }
    }

    /// Mean of `ε_i ε_{i+lag}` over all in-lattice pairs.
    pub fn empirical_covariance(&self, lag: &[isize]) -> Result<f64> {
        empirical_covariance(self, lag)
    }

    const MAGIC: [u8; 4] = *b"FLD1";

    /// Binary layout: `b"FLD1"`, `d` as u32 LE, `n` as u64 LE, then `n^d`
    /// f64 LE values in lexicographic order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = [0u8; 16];
        header[..4].copy_from_slice(&Self::MAGIC);
        header[4..8].copy_from_slice(&(self.lattice.d() as u32).to_le_bytes());
        header[8..].copy_from_slice(&(self.lattice.n() as u64).to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.values.len());
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("field file shorter than its 16-byte header".into()))?;
        if header[..4] != Self::MAGIC {
            return Err(Error::Format("bad field magic".into()));
        }
        let d = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let n = usize::try_from(u64::from_le_bytes(header[8..].try_into().unwrap()))
            .map_err(|_| Error::Format("field side length overflows".into()))?;
        let lattice = Lattice::new(n, d)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != lattice.len() * 8 {
            return Err(Error::Format(format!(
                "field payload has {} bytes, expected {}",
                bytes.len(),
                lattice.len() * 8
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Field::new(lattice, values)
    }

    /// CSV with header `i_1,…,i_d,value`.
    pub fn to_csv(&self) -> String {
        let d = self.lattice.d();
        let mut out = String::new();
        for ax in 1..=d {
            out.push_str(&format!("i_{ax},"));
        }
        out.push_str("value\n");
        for (i, v) in self.lattice.indices().zip(&self.values) {
            for c in i.coords() {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
        let d = header.split(',').count().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| {
            Error::Format(format!("CSV header '{header}' needs index columns and a value"))
        })?;
        let rows: Vec<&str> = lines.collect();
        let n = (rows.len() as f64).powf(1.0 / d as f64).round() as usize;
        let lattice = Lattice::new(n.max(1), d)?;
        if lattice.len() != rows.len() {
            return Err(Error::Format(format!("{} rows do not form a cubic lattice", rows.len())));
        }
        let mut values = vec![f64::NAN; lattice.len()];
        for row in rows {
            let cells: Vec<&str> = row.split(',').map(str::trim).collect();
            if cells.len() != d + 1 {
                return Err(Error::Format(format!("bad CSV row '{row}'")));
            }
            let coords = cells[..d]
                .iter()
                .map(|c| c.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("bad index in '{row}': {e}")))?;
            let k = lattice.linearize(&coords.into())?;
            values[k] = cells[d]
                .parse()
                .map_err(|e| Error::Format(format!("bad value in '{row}': {e}")))?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Format("CSV does not cover every lattice point".into()));
        }
        Field::new(lattice, values)
    }
}

/// Mean of `ε_i ε_{i+lag}` over pairs with both indices in the lattice.
pub fn empirical_covariance(f: &Field, lag: &[isize]) -> Result<f64> {
    let lat = f.lattice();
    if lag.len() != lat.d() {
        return Err(Error::DimensionMismatch {
            expected: lat.d(),
            got: lag.len(),
        });
    }
    if lag.iter().any(|l| l.unsigned_abs() >= lat.n()) {
        return Err(Error::IndexOutOfRange(format!(
            "lag {lag:?} must satisfy |lag| < n={}",
            lat.n()
        )));
    }
    let (sum, count) = lag_products(lat, f.values(), lag);
    Ok(sum / count as f64)
}

/// `(Σ_i v_i v_{i+lag}, #pairs)` over `i, i+lag ∈ Λ_n`, summed in
/// lexicographic order of `i`. Requires `|lag_ℓ| < n`.
pub(crate) fn lag_products(lat: &Lattice, v: &[f64], lag: &[isize]) -> (f64, usize) {
    let (n, d) = (lat.n() as isize, lat.d());
    // valid i_ℓ range (1-based): max(1, 1−k) ..= min(n, n−k)
    let lo: Vec<isize> = lag.iter().map(|&k| 1.max(1 - k)).collect();
    let hi: Vec<isize> = lag.iter().map(|&k| n.min(n - k)).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return (0.0, 0);
    }
    let shift = lag.iter().fold(0isize, |acc, &k| acc * n + k);
    let mut idx = lo.clone();
    let mut sum = 0.0;
    let mut count = 0usize;
    loop {
        let base = idx[..d - 1].iter().fold(0isize, |acc, &c| acc * n + (c - 1)) * n;
        for c in lo[d - 1]..=hi[d - 1] {
            let i = (base + c - 1) as usize;
            sum += v[i] * v[(i as isize + shift) as usize];
        }
        count += (hi[d - 1] - lo[d - 1] + 1) as usize;
        let mut ax = d - 1;
        loop {
            if ax == 0 {
                return (sum, count);
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

/// Standard normals on the box `∏ [lo_ℓ, lo_ℓ + side_ℓ)`, lexicographic.
/// Each line along the last axis comes from its own keystream.
fn gaussian_box(path: SeedPath, sides: &[usize]) -> Vec<f64> {
    let total: usize = sides.iter().product();
    let line = *sides.last().unwrap();
    let mut out = vec![0.0; total];
    par::for_each_chunk_mut(&mut out, line, |row, chunk| {
        let mut rng = path.stream(row as u64);
        for v in chunk {
            *v = rng.sample(StandardNormal);
        }
    });
    out
}

/// Draws a field from `spec` on `lat`; identical inputs give identical bits.
pub fn simulate(spec: &FieldSpec, lat: &Lattice) -> Result<Field> {
    let d = lat.d();
    spec.validate(d)?;
    let root = SeedPath::root(spec.seed);
    let values = match &spec.kind {
        FieldKind::IidGaussian { sd } => {
            let mut v = gaussian_box(root.child(labels::NOISE), &vec![lat.n(); d]);
            v.iter_mut().for_each(|x| *x *= sd);
            v
        }
        FieldKind::MaField { stencil } => simulate_ma(root, lat, stencil),
        FieldKind::MdField { beta } => simulate_md(root, lat, *beta),
        FieldKind::ExpGaussianSpectral {
            cst,
            range,
            components,
        } => simulate_spectral(root, lat, *cst, *range, *components),
    };
    let mut field = Field::new(*lat, values)?;
    field.spec = Some(spec.clone());
    Ok(field)
}

fn simulate_ma(root: SeedPath, lat: &Lattice, stencil: &[(Vec<isize>, f64)]) -> Vec<f64> {
    let (n, d) = (lat.n(), lat.d());
    // ξ is needed on i − j for i ∈ Λ_n, j ∈ J.
    let lo: Vec<isize> = (0..d)
        .map(|ax| 1 - stencil.iter().map(|(o, _)| o[ax]).max().unwrap())
        .collect();
    let hi: Vec<isize> = (0..d)
        .map(|ax| n as isize - stencil.iter().map(|(o, _)| o[ax]).min().unwrap())
        .collect();
    let sides: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
    let xi = gaussian_box(root.child(labels::NOISE), &sides);
    // Linear offset of ξ_{i−j} relative to the box position of i.
    let offsets: Vec<(isize, f64)> = stencil
        .iter()
        .map(|(off, t)| {
            let mut lin = 0isize;
            for (ax, &o) in off.iter().enumerate() {
                lin = lin * sides[ax] as isize - o;
            }
            (lin, *t)
        })
        .collect();
    let mut out = vec![0.0; lat.len()];
    par::for_each_chunk_mut(&mut out, n, |row, chunk| {
        let mut coords = vec![0usize; d];
        lat.coords_of(row * n, &mut coords);
        let mut base = 0isize;
        for ax in 0..d {
            base = base * sides[ax] as isize + (coords[ax] as isize - lo[ax]);
        }
        for (k, v) in chunk.iter_mut().enumerate() {
            let pos = base + k as isize;
            *v = offsets
                .iter()
                .map(|&(o, t)| t * xi[(pos + o) as usize])
                .sum();
        }
    });
    out
}

fn simulate_md(root: SeedPath, lat: &Lattice, beta: f64) -> Vec<f64> {
    let (n, d) = (lat.n(), lat.d());
    let mut sides = vec![n; d];
    sides[0] = n + 1;
    // Box starts at i_1 = 0 so that ξ_{i−e₁} exists for i_1 = 1.
    let xi = gaussian_box(root.child(labels::NOISE), &sides);
    let stride = n.pow(d as u32 - 1);
    let norm = (1.0 + beta).sqrt();
    (0..lat.len())
        .map(|k| {
            let here = xi[k + stride];
            let prev = xi[k];
            here * (1.0 + beta * prev * prev).sqrt() / norm
        })
        .collect()
}

/// Radius of a frequency drawn from the isotropic spectral density of
/// `exp(−|h|/a)` in dimension `d`, given `u ~ U[0,1)`.
fn spectral_radius(d: usize, range: f64, u: f64) -> f64 {
    match d {
        // Cauchy: density ∝ (1 + a²ω²)^{-1}
        1 => (PI * (u - 0.5)).tan() / range,
        // radial CDF 1 − (1 + t²)^{-1/2}, t = a r
        2 => {
            let s = 1.0 - u;
            ((1.0 / (s * s)) - 1.0).max(0.0).sqrt() / range
        }
        // radial CDF (2/π)(atan t − t/(1 + t²))
        3 => {
            let cdf = |t: f64| 2.0 / PI * (t.atan() - t / (1.0 + t * t));
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while cdf(hi) < u {
                hi *= 2.0;
                if hi > 1e300 {
                    break;
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            0.5 * (lo + hi) / range
        }
        _ => unreachable!("validated"),
    }
}

fn simulate_spectral(root: SeedPath, lat: &Lattice, cst: f64, range: f64, m: usize) -> Vec<f64> {
    let (n, d) = (lat.n(), lat.d());
    let mut rng = root.child(labels::SPECTRAL).stream(0);
    let mut omega = vec![0.0; m * d];
    let mut phase = vec![0.0; m];
    for c in 0..m {
        let r = spectral_radius(d, range, rng.random::<f64>());
        let w = &mut omega[c * d..(c + 1) * d];
        match d {
            1 => w[0] = r,
            _ => {
                let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                for (wi, x) in w.iter_mut().zip(&dir) {
                    *wi = r * x / len;
                }
            }
        }
        phase[c] = 2.0 * PI * rng.random::<f64>();
    }

    // ε(k) = amp · Re Σ_c e^{iφ_c} ∏_ℓ e^{i ω_{c,ℓ} k_ℓ}: the last axis is
    // split off so the sum becomes a real matrix product per row block.
    let amp = cst.sqrt() * (2.0 / m as f64).sqrt();
    let mut last_re = Array2::<f64>::zeros((m, n));
    let mut last_im = Array2::<f64>::zeros((m, n));
    for c in 0..m {
        let w = omega[c * d + d - 1];
        for k in 0..n {
            let (s, co) = (w * (k + 1) as f64).sin_cos();
            last_re[[c, k]] = co;
            last_im[[c, k]] = s;
        }
    }
    let rows = lat.len() / n;
    let mut out = vec![0.0; lat.len()];
    par::for_each_chunk_mut(&mut out, SPECTRAL_ROW_CHUNK * n, |chunk_idx, chunk| {
        let first = chunk_idx * SPECTRAL_ROW_CHUNK;
        let count = chunk.len() / n;
        let mut pre_re = Array2::<f64>::zeros((count, m));
        let mut pre_im = Array2::<f64>::zeros((count, m));
        let mut coords = vec![0usize; d];
        for r in 0..count {
            lat.coords_of((first + r) * n, &mut coords);
            for c in 0..m {
                let mut theta = phase[c];
                for ax in 0..d - 1 {
                    theta += omega[c * d + ax] * coords[ax] as f64;
                }
                let (s, co) = theta.sin_cos();
                pre_re[[r, c]] = co;
                pre_im[[r, c]] = s;
            }
        }
        let re = pre_re.dot(&last_re) - pre_im.dot(&last_im);
        for (dst, src) in chunk.iter_mut().zip(re.iter()) {
            *dst = amp * src;
        }
    });
    debug_assert_eq!(rows * n, out.len());
    out
}

/// `Σ_{|k|_∞ ≤ truncation} C(k)`, exact for the finite-range generators.
pub fn theoretical_eta(spec: &FieldSpec, d: usize, truncation: usize) -> Result<f64> {
    spec.validate(d)?;
    if truncation == 0 {
        return Err(Error::param("truncation must be >= 1"));
    }
    match &spec.kind {
        FieldKind::IidGaussian { sd } => Ok(sd * sd),
        FieldKind::MdField { .. } => Ok(1.0),
        FieldKind::MaField { stencil } => {
            let diameter = stencil
                .iter()
                .flat_map(|(a, _)| {
                    stencil.iter().map(move |(b, _)| {
                        a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
                    })
                })
                .max()
                .unwrap_or(0);
            if truncation < diameter {
                return Err(Error::param(format!(
                    "truncation {truncation} is below the stencil diameter {diameter}"
                )));
            }
            let s: f64 = stencil.iter().map(|(_, t)| t).sum();
            Ok(s * s)
        }
        FieldKind::ExpGaussianSpectral { .. } => {
            let side = 2 * truncation + 1;
            let t = truncation as isize;
            let mut lag = vec![0isize; d];
            let mut acc = 0.0;
            for mut k in 0..side.pow(d as u32) {
                for l in lag.iter_mut().rev() {
                    *l = (k % side) as isize - t;
                    k /= side;
                }
                acc += spec.covariance(&lag);
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(n: usize, d: usize) -> Lattice {
        Lattice::new(n, d).unwrap()
    }

    #[test]
    fn iid_is_deterministic() {
        let l = lat(32, 2);
        let a = simulate(&FieldSpec::iid(1.0, 11), &l).unwrap();
        let b = simulate(&FieldSpec::iid(1.0, 11), &l).unwrap();
        assert_eq!(a.to_binary(), b.to_binary());
        let c = simulate(&FieldSpec::iid(1.0, 12), &l).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn identity_stencil_equals_driving_noise() {
        let l = lat(40, 2);
        let iid = simulate(&FieldSpec::iid(1.0, 5), &l).unwrap();
        let ma = simulate(&FieldSpec::ma(vec![(vec![0, 0], 1.0)], 5), &l).unwrap();
        assert_eq!(iid.values(), ma.values());
    }

    #[test]
    fn ma_matches_direct_convolution() {
        // Rebuild ξ independently and convolve by brute force.
        let l = lat(6, 2);
        let stencil = vec![(vec![0, 0], 1.0), (vec![1, 0], 0.5), (vec![-1, 2], -0.25)];
        let f = simulate(&FieldSpec::ma(stencil.clone(), 9), &l).unwrap();
        let lo = [1 - 1isize, 1 - 2isize];
        let sides = [6 + 1 + 1, 6 + 2];
        let xi = gaussian_box(SeedPath::root(9).child(labels::NOISE), &sides);
        for (k, i) in l.indices().enumerate() {
            let c = i.coords();
            let mut want = 0.0;
            for (off, t) in &stencil {
                let p0 = (c[0] as isize - off[0] - lo[0]) as usize;
                let p1 = (c[1] as isize - off[1] - lo[1]) as usize;
                want += t * xi[p0 * sides[1] + p1];
            }
            assert!((f.values()[k] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn theoretical_eta_examples() {
        let ma = FieldSpec::ma_first_axis(&[1.0, 0.5], 1, 0);
        // brute force: C(0) + 2 C(1)
        let brute = ma.covariance(&[0]) + 2.0 * ma.covariance(&[1]);
        assert_eq!(ma.covariance(&[0]), 1.25);
        assert_eq!(ma.covariance(&[1]), 0.5);
        assert_eq!(ma.covariance(&[-1]), 0.5);
        assert_eq!(brute, 2.25);
        assert_eq!(theoretical_eta(&ma, 1, 4).unwrap(), 2.25);
        assert_eq!(theoretical_eta(&FieldSpec::iid(1.0, 0), 2, 1).unwrap(), 1.0);
        assert_eq!(theoretical_eta(&FieldSpec::md(1.0, 0), 2, 1).unwrap(), 1.0);
        let wide = FieldSpec::ma_first_axis(&[1.0, 0.0, 0.0, 2.0], 1, 0);
        assert!(theoretical_eta(&wide, 1, 2).is_err());
        // lattice sum 200·Σ_{|k|∞≤50} e^{−|k|₂}, computed independently before the build
        const EXP_ETA_TRUNC_50: f64 = 1_301.448_337_227_680_7;
        let exp = FieldSpec::exp_spectral(200.0, 1.0, 4096, 0);
        let eta = theoretical_eta(&exp, 2, 50).unwrap();
        assert!((eta - EXP_ETA_TRUNC_50).abs() < 1e-9 * EXP_ETA_TRUNC_50, "{eta}");
    }

    #[test]
    fn empirical_covariance_examples() {
        let l = lat(12, 2);
        let ones = Field::new(l, vec![1.0; l.len()]).unwrap();
        assert_eq!(ones.empirical_covariance(&[3, -2]).unwrap(), 1.0);
        let zeros = Field::new(l, vec![0.0; l.len()]).unwrap();
        assert_eq!(zeros.empirical_covariance(&[1, 0]).unwrap(), 0.0);
        assert!(ones.empirical_covariance(&[12, 0]).is_err());
        assert!(ones.empirical_covariance(&[1]).is_err());
    }

    #[test]
    fn ma_lag_one_covariance() {
        let n = 100_000;
        let f = simulate(&FieldSpec::ma_first_axis(&[1.0, 0.5], 1, 3), &lat(n, 1)).unwrap();
        let c1 = f.empirical_covariance(&[1]).unwrap();
        // Var(ε_i ε_{i+1}) = C(0)² + C(1)² + C(2)C(0)... bounded by 2 here; SE ≈ sqrt(2/n)·(1 + 2ρ) slack
        let v = f.values();
        let prods: Vec<f64> = v.windows(2).map(|w| w[0] * w[1]).collect();
        let mean = prods.iter().sum::<f64>() / prods.len() as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / prods.len() as f64;
        // products are 2-dependent: long-run variance ≤ 5·var
        let se = (5.0 * var / prods.len() as f64).sqrt();
        assert!((c1 - 0.5).abs() < 3.0 * se, "c1={c1} se={se}");
    }

    #[test]
    fn md_field_is_conditionally_centered() {
        let n = 400;
        let l = lat(n, 2);
        let f = simulate(&FieldSpec::md(1.0, 21), &l).unwrap();
        let v = f.values();
        // bins on the predecessor value along the first axis
        let edges = [-f64::INFINITY, -1.0, 0.0, 1.0, f64::INFINITY];
        for b in 0..4 {
            let mut xs = Vec::new();
            for k in n..l.len() {
                let prev = v[k - n];
                if prev >= edges[b] && prev < edges[b + 1] {
                    xs.push(v[k]);
                }
            }
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
            let se = (var / xs.len() as f64).sqrt();
            assert!(m.abs() < 4.0 * se, "bin {b}: mean {m}, se {se}");
        }
        let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() < 0.03, "{var}");
        assert!(f.empirical_covariance(&[1, 0]).unwrap().abs() < 0.02);
    }

    #[test]
    fn spectral_covariance_matches_exponential() {
        let l = lat(128, 2);
        let mut lags = [0.0f64; 3];
        let seeds = 20;
        for s in 0..seeds {
            let f = simulate(&FieldSpec::exp_spectral(200.0, 1.0, 4096, s), &l).unwrap();
            for (k, lag) in lags.iter_mut().enumerate() {
                *lag += f.empirical_covariance(&[k as isize, 0]).unwrap() / seeds as f64;
            }
        }
        for (k, lag) in lags.iter().enumerate() {
            let want = 200.0 * (-(k as f64)).exp();
            assert!((lag - want).abs() < 0.1 * want, "lag {k}: {lag} vs {want}");
        }
    }

    #[test]
    fn spectral_radius_laws() {
        // 1-d: Cauchy median 0 and quartiles ±1/a
        assert!(spectral_radius(1, 2.0, 0.5).abs() < 1e-15);
        assert!((spectral_radius(1, 2.0, 0.75) - 0.5).abs() < 1e-12);
        // 2-d: CDF 1 − (1+t²)^{-1/2} at t = √3 is 1/2
        assert!((spectral_radius(2, 1.0, 0.5) - 3f64.sqrt()).abs() < 1e-12);
        // 3-d: bisection inverts the closed-form CDF
        let t = spectral_radius(3, 1.0, 0.3);
        let cdf = 2.0 / PI * (t.atan() - t / (1.0 + t * t));
        assert!((cdf - 0.3).abs() < 1e-12);
    }

    #[test]
    fn spectral_1d_and_3d_have_unit_correlation_scale() {
        for d in [1usize, 3] {
            let n = if d == 1 { 4096 } else { 24 };
            let l = lat(n, d);
            let mut c0 = 0.0;
            let mut c1 = 0.0;
            let reps = 10;
            for s in 0..reps {
                let f = simulate(&FieldSpec::exp_spectral(1.0, 2.0, 2048, s), &l).unwrap();
                let mut lag = vec![0isize; d];
                c0 += f.empirical_covariance(&lag).unwrap() / reps as f64;
                lag[d - 1] = 1;
                c1 += f.empirical_covariance(&lag).unwrap() / reps as f64;
            }
            assert!((c0 - 1.0).abs() < 0.1, "d={d} c0={c0}");
            assert!((c1 - (-0.5f64).exp()).abs() < 0.1, "d={d} c1={c1}");
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let l = lat(5, 2);
        let f = simulate(&FieldSpec::iid(2.0, 1), &l).unwrap();
        let bytes = f.to_binary();
        assert_eq!(bytes.len(), 16 + 25 * 8);
        assert_eq!(&bytes[..4], b"FLD1");
        let back = Field::read_binary(&bytes[..]).unwrap();
        assert_eq!(back.values(), f.values());
        let csv = Field::from_csv(&f.to_csv()).unwrap();
        assert_eq!(csv.values(), f.values());
        assert!(Field::read_binary(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Field::read_binary(&bad[..]).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let l = lat(4, 2);
        assert!(simulate(&FieldSpec::iid(0.0, 1), &l).is_err());
        assert!(simulate(&FieldSpec::exp_spectral(1.0, -1.0, 10, 1), &l).is_err());
        assert!(simulate(&FieldSpec::exp_spectral(1.0, 1.0, 0, 1), &l).is_err());
        assert!(simulate(&FieldSpec::exp_spectral(1.0, 1.0, 8, 1), &lat(3, 4)).is_err());
        assert!(simulate(&FieldSpec::md(-1.0, 1), &l).is_err());
        assert!(simulate(&FieldSpec::ma(vec![(vec![0], 1.0)], 1), &l).is_err());
    }
}
