//! Kernels supported on `[-1,1]^d` and their moments.
//!
//! The estimator is a ratio, so any positive multiple of a kernel gives the
//! same fit. The variance constant is not scale free: inference uses
//! [`Kernel::effective_sigma2`], the `L²` moment of the unit-mass rescaling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature;

const QUAD_TOL: f64 = 1e-8;

/// Norm used by radial kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    Euclidean,
    Max,
}

impl Norm {
    pub fn of(&self, u: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => u.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Max => u.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Surface measure of the sphere of radius `r` in this norm, `d ≥ 1`.
    fn shell(&self, d: usize, r: f64) -> f64 {
        let df = d as f64;
        match self {
            Norm::Euclidean => {
                let unit_ball = std::f64::consts::PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0);
                df * unit_ball * r.powi(d as i32 - 1)
            }
            Norm::Max => df * 2f64.powi(d as i32) * r.powi(d as i32 - 1),
        }
    }

    /// Largest `ℓ¹` norm of the gradient of `|u|` (dual to the max norm).
    fn gradient_l1(&self, d: usize) -> f64 {
        match self {
            Norm::Euclidean => (d as f64).sqrt(),
            Norm::Max => 1.0,
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Norm::Euclidean),
            "max" => Ok(Norm::Max),
            other => Err(Error::param(format!("unknown norm '{other}' (euclidean|max)"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::Euclidean => "euclidean",
            Norm::Max => "max",
        })
    }
}

/// Tabulated kernel on a tensor grid, interpolated multilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TableKernel {
    /// Builds a table from scattered `(node, value)` rows that must form a
    /// complete tensor grid.
    pub fn from_rows(d: usize, rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("table kernel needs d >= 1"));
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); d];
        for (node, value) in rows {
            if node.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: node.len(),
                });
            }
            if !value.is_finite() || *value < 0.0 {
                return Err(Error::param(format!("table value {value} must be finite and >= 0")));
            }
            for (axis, &c) in axes.iter_mut().zip(node) {
                if !c.is_finite() {
                    return Err(Error::param("table node coordinates must be finite"));
                }
                axis.push(c);
            }
        }
        for axis in &mut axes {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            if axis.len() < 2 {
                return Err(Error::param("table kernel needs at least two nodes per axis"));
            }
        }
        let count: usize = axes.iter().map(Vec::len).product();
        if count != rows.len() {
            return Err(Error::Format(format!(
                "table has {} rows but its axes span a {count}-node grid",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; count];
        for (node, value) in rows {
            let mut k = 0;
            for (axis, &c) in axes.iter().zip(node) {
                let pos = axis.partition_point(|&a| a < c);
                k = k * axis.len() + pos;
            }
            if !values[k].is_nan() {
                return Err(Error::Format(format!("duplicate table node {node:?}")));
            }
            values[k] = *value;
        }
        Ok(TableKernel { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let d = self.axes.len();
        let mut lower = [0usize; 8];
        let mut frac = [0f64; 8];
        debug_assert!(d <= 8);
        for (ax, (axis, &x)) in self.axes.iter().zip(u).enumerate() {
            if x < axis[0] || x > axis[axis.len() - 1] {
                return 0.0;
            }
            let j = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
            lower[ax] = j;
            frac[ax] = (x - axis[j]) / (axis[j + 1] - axis[j]);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut k = 0;
            for ax in 0..d {
                let up = (corner >> (d - 1 - ax)) & 1;
                w *= if up == 1 { frac[ax] } else { 1.0 - frac[ax] };
                k = k * self.axes[ax].len() + lower[ax] + up;
            }
            if w != 0.0 {
                acc += w * self.values[k];
            }
        }
        acc
    }

    /// Upper bound on the max-norm Lipschitz constant of the interpolant.
    fn lipschitz(&self) -> f64 {
        let d = self.axes.len();
        let cells: Vec<usize> = self.axes.iter().map(|a| a.len() - 1).collect();
        let total: usize = cells.iter().product();
        let mut best = 0.0f64;
        let mut idx = vec![0usize; d];
        for mut c in 0..total {
            for ax in (0..d).rev() {
                idx[ax] = c % cells[ax];
                c /= cells[ax];
            }
            let mut bound = 0.0;
            for ax in 0..d {
                let width = self.axes[ax][idx[ax] + 1] - self.axes[ax][idx[ax]];
                let mut slope = 0.0f64;
                for corner in 0..(1usize << d) {
                    if (corner >> (d - 1 - ax)) & 1 == 1 {
                        continue;
                    }
                    let (mut k0, mut k1) = (0, 0);
                    for (b, (axis, &i)) in self.axes.iter().zip(idx.iter()).enumerate() {
                        let up = (corner >> (d - 1 - b)) & 1;
                        let len = axis.len();
                        k0 = k0 * len + i + up;
                        k1 = k1 * len + i + if b == ax { 1 } else { up };
                    }
                    slope = slope.max((self.values[k1] - self.values[k0]).abs() / width);
                }
                bound += slope;
            }
            best = best.max(bound);
        }
        best
    }

    fn covers_cube(&self) -> bool {
        self.axes
            .iter()
            .all(|a| a[0] <= -1.0 && a[a.len() - 1] >= 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// Constant `2^{-d}` on `[-1,1]^d`.
    Box,
    /// `(3/8)(1 − |u|²)` on `|u| ≤ 1`, the constant taken verbatim for any `d`.
    EpanechnikovPaper,
    /// `c (1 − |u|²)` with `c` chosen so the mass is one.
    EpanechnikovNormalized,
    /// `c (1 − |u|)` with unit mass.
    Triangle,
    Table(TableKernel),
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Box => "box",
            KernelFamily::EpanechnikovPaper => "epanechnikov-paper",
            KernelFamily::EpanechnikovNormalized => "epanechnikov-normalized",
            KernelFamily::Triangle => "triangle",
            KernelFamily::Table(_) => "custom-table",
        }
    }
}

/// An immutable kernel with precomputed moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    d: usize,
    norm: Norm,
    /// Multiplier applied to the family's profile.
    scale: f64,
    mass: f64,
    sigma2: f64,
    lipschitz: f64,
    lower: f64,
    upper: f64,
}

fn radial_profile(family: &KernelFamily, r: f64) -> f64 {
    if r > 1.0 {
        return 0.0;
    }
    match family {
        KernelFamily::EpanechnikovPaper | KernelFamily::EpanechnikovNormalized => 1.0 - r * r,
        KernelFamily::Triangle => 1.0 - r,
        _ => unreachable!("not a radial family"),
    }
}

impl Kernel {
    pub fn new(family: KernelFamily, d: usize, norm: Norm) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("kernel dimension must be >= 1"));
        }
        let k = match family {
            KernelFamily::Box => {
                let v = 0.5f64.powi(d as i32);
                Kernel {
                    family,
                    d,
                    norm,
                    scale: v,
                    mass: 1.0,
                    sigma2: v,
                    lipschitz: 0.0,
                    lower: v,
                    upper: v,
                }
            }
            KernelFamily::Table(ref table) => {
                if table.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: table.dim(),
                    });
                }
                if d > 3 {
                    return Err(Error::Unsupported(
                        "table kernel moments are computed for d <= 3 only".into(),
                    ));
                }
                let t = table.clone();
                let mass = quadrature::simpson_cube(|u| t.value(u), d, -1.0, 1.0, QUAD_TOL);
                let sigma2 =
                    quadrature::simpson_cube(|u| t.value(u).powi(2), d, -1.0, 1.0, QUAD_TOL);
                let max = t.values.iter().cloned().fold(0.0, f64::max);
                let min = if t.covers_cube() {
                    t.values.iter().cloned().fold(f64::INFINITY, f64::min)
                } else {
                    0.0
                };
                Kernel {
                    lipschitz: t.lipschitz(),
                    family,
                    d,
                    norm,
                    scale: 1.0,
                    mass,
                    sigma2,
                    lower: min,
                    upper: max,
                }
            }
            ref radial => {
                let shell = |r: f64| norm.shell(d, r);
                let mass_raw =
                    quadrature::simpson(|r| radial_profile(radial, r) * shell(r), 0.0, 1.0, QUAD_TOL);
                let l2_raw = quadrature::simpson(
                    |r| radial_profile(radial, r).powi(2) * shell(r),
                    0.0,
                    1.0,
                    QUAD_TOL,
                );
                let scale = match radial {
                    KernelFamily::EpanechnikovPaper => 0.375,
                    _ => 1.0 / mass_raw,
                };
                let slope = match radial {
                    KernelFamily::Triangle => 1.0,
                    _ => 2.0,
                };
                Kernel {
                    lipschitz: scale * slope * norm.gradient_l1(d),
                    mass: scale * mass_raw,
                    sigma2: scale * scale * l2_raw,
                    lower: 0.0,
                    upper: scale,
                    family,
                    d,
                    norm,
                    scale,
                }
            }
        };
        if k.mass <= 0.0 {
            return Err(Error::param("kernel has zero mass"));
        }
        Ok(k)
    }

    pub fn epanechnikov_paper(d: usize) -> Self {
        Kernel::new(KernelFamily::EpanechnikovPaper, d, Norm::Euclidean)
            .expect("built-in kernel is valid")
    }

    pub fn boxcar(d: usize) -> Self {
        Kernel::new(KernelFamily::Box, d, Norm::Max).expect("built-in kernel is valid")
    }

    /// Parses a family name (`table:` kernels need [`Kernel::from_table_file`]).
    pub fn from_name(name: &str, d: usize, norm: Norm) -> Result<Self> {
        let family = match name {
            "box" => KernelFamily::Box,
            "epanechnikov-paper" => KernelFamily::EpanechnikovPaper,
            "epanechnikov-normalized" => KernelFamily::EpanechnikovNormalized,
            "triangle" => KernelFamily::Triangle,
            other => return Err(Error::param(format!("unknown kernel '{other}'"))),
        };
        Kernel::new(family, d, norm)
    }

    /// Parses a table kernel: a header line `d norm`, then rows
    /// `u_1 … u_d value` forming a full tensor grid. `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty kernel table".into()))?;
        let mut parts = header.split_whitespace();
        let d: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad table header '{header}'")))?;
        let norm: Norm = parts
            .next()
            .ok_or_else(|| Error::Format(format!("bad table header '{header}'")))?
            .parse()?;
        let mut rows = Vec::new();
        for line in lines {
            let nums = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("bad table row '{line}': {e}")))?;
            if nums.len() != d + 1 {
                return Err(Error::Format(format!(
                    "table row '{line}' has {} numbers, expected {}",
                    nums.len(),
                    d + 1
                )));
            }
            rows.push((nums[..d].to_vec(), nums[d]));
        }
        Kernel::new(KernelFamily::Table(TableKernel::from_rows(d, &rows)?), d, norm)
    }

    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        Kernel::parse_table(&std::fs::read_to_string(path)?)
    }

    /// Same kernel multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::param(format!("kernel scale {factor} must be positive")));
        }
        let mut k = self.clone();
        k.scale *= factor;
        k.mass *= factor;
        k.sigma2 *= factor * factor;
        k.lipschitz *= factor;
        k.lower *= factor;
        k.upper *= factor;
        Ok(k)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// `∫K`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `σ² = ∫K²`.
    pub fn l2_moment(&self) -> f64 {
        self.sigma2
    }

    /// `∫K² / (∫K)²`: the `L²` moment of `K / ∫K`.
    pub fn effective_sigma2(&self) -> f64 {
        self.sigma2 / (self.mass * self.mass)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `(inf, sup)` of `K` over `[-1,1]^d`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: u.len(),
            });
        }
        Ok(self.value(u))
    }

    /// [`Kernel::evaluate`] without the dimension check.
    #[inline]
    pub fn value(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.d);
        if u.iter().any(|x| x.abs() > 1.0 || x.is_nan()) {
            return 0.0;
        }
        match &self.family {
            KernelFamily::Box => self.scale,
            KernelFamily::Table(t) => self.scale * t.value(u),
            radial => self.scale * radial_profile(radial, self.norm.of(u)),
        }
    }

    /// Checks each clause of the standing kernel assumption on a grid of
    /// `grid_resolution` nodes per axis over `[-1,1]^d`.
    pub fn check_assumption_a1(&self, grid_resolution: usize) -> Result<A1Report> {
        if grid_resolution < 8 {
            return Err(Error::param("grid_resolution must be >= 8"));
        }
        let res = grid_resolution;
        let total = res
            .checked_pow(self.d as u32)
            .filter(|&t| t <= 1 << 26)
            .ok_or_else(|| Error::param("grid too large for this dimension"))?;
        let step = 2.0 / (res - 1) as f64;
        let node = |k: usize, out: &mut [f64]| {
            let mut k = k;
            for c in out.iter_mut().rev() {
                *c = -1.0 + (k % res) as f64 * step;
                k /= res;
            }
        };
        let mut u = vec![0.0; self.d];
        let mut neg = vec![0.0; self.d];
        let mut values = Vec::with_capacity(total);
        let mut symmetry: f64 = 0.0;
        for k in 0..total {
            node(k, &mut u);
            let v = self.value(&u);
            for (n, x) in neg.iter_mut().zip(&u) {
                *n = -x;
            }
            symmetry = symmetry.max((v - self.value(&neg)).abs());
            values.push(v);
        }
        let mut lipschitz: f64 = 0.0;
        let mut stride = 1;
        for _ in 0..self.d {
            for k in 0..total {
                if (k / stride) % res + 1 < res {
                    lipschitz = lipschitz.max((values[k + stride] - values[k]).abs() / step);
                }
            }
            stride *= res;
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(A1Report {
            kernel: self.family.name().to_string(),
            grid_resolution,
            mass: self.mass,
            unit_mass: (self.mass - 1.0).abs() <= 1e-6,
            symmetry_violation: symmetry,
            symmetric: symmetry <= 1e-12,
            nonnegative: min >= 0.0,
            lipschitz_estimate: lipschitz,
            lipschitz_bound: self.lipschitz,
            lipschitz_ok: lipschitz <= self.lipschitz * (1.0 + 1e-9) + 1e-12,
            min,
            max,
            lower_bound_positive: min > 0.0,
            upper_bound_finite: max.is_finite(),
        })
    }
}

/// Measured values for each clause of the kernel assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    pub kernel: String,
    pub grid_resolution: usize,
    pub mass: f64,
    pub unit_mass: bool,
    pub symmetry_violation: f64,
    pub symmetric: bool,
    pub nonnegative: bool,
    pub lipschitz_estimate: f64,
    pub lipschitz_bound: f64,
    pub lipschitz_ok: bool,
    /// Grid minimum on `[-1,1]^d`, the measured lower bound `c`.
    pub min: f64,
    /// Grid maximum, the measured upper bound `C`.
    pub max: f64,
    pub lower_bound_positive: bool,
    pub upper_bound_finite: bool,
}

impl A1Report {
    pub fn all_pass(&self) -> bool {
        self.unit_mass
            && self.symmetric
            && self.nonnegative
            && self.lipschitz_ok
            && self.lower_bound_positive
            && self.upper_bound_finite
    }
}

impl fmt::Display for A1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |ok: bool| if ok { "PASS" } else { "FAIL" };
        writeln!(f, "kernel {} (grid {} per axis)", self.kernel, self.grid_resolution)?;
        writeln!(f, "  unit mass        {}  mass = {:.10}", v(self.unit_mass), self.mass)?;
        writeln!(
            f,
            "  symmetric        {}  max |K(u) - K(-u)| = {:.3e}",
            v(self.symmetric),
            self.symmetry_violation
        )?;
        writeln!(f, "  non-negative     {}  min = {:.6}", v(self.nonnegative), self.min)?;
        writeln!(
            f,
            "  lipschitz        {}  finite-difference r = {:.6}, bound r = {:.6}",
            v(self.lipschitz_ok),
            self.lipschitz_estimate,
            self.lipschitz_bound
        )?;
        writeln!(
            f,
            "  lower bound c>0  {}  inf K = {:.6}{}",
            v(self.lower_bound_positive),
            self.min,
            if self.lower_bound_positive {
                ""
            } else {
                " (kernel vanishes inside [-1,1]^d)"
            }
        )?;
        write!(f, "  upper bound C    {}  sup K = {:.6}", v(self.upper_bound_finite), self.max)
    }
}
