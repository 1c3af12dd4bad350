//! Long-run variance estimation and numerical checks of the mixing
//! conditions under which the estimator is asymptotically normal.
//!
//! The plug-in estimator of `η = Σ_k Cov(ε_0, ε_k)` is
//!
//! ```text
//! η̂ = max(1, Σ_{(i,j) ∈ G_ρ} ε_i ε_j) / n^d,   G_ρ = {(i,j) ∈ Λ_n² : |i − j|_∞ ≤ ρ}
//! ```
//!
//! over ordered pairs, diagonal included. It is consistent when `ρ → ∞`
//! slowly enough; [`default_rho`] picks `⌊n^{1/4}⌋`.
//!
//! Two sufficient conditions for the projective criterion can be probed on
//! user-supplied mixing rates `α(r)`:
//!
//! * quantile form: `Σ_k ∫_0^{α(|k|)} Q²(u) du < ∞`, with `Q` the quantile
//!   function of `|ε_0|`;
//! * rate form, for `(2+δ)`-integrable noise: `Σ_m m^{d−1} α(m)^{δ/(2+δ)} < ∞`.
//!   It implies the quantile form, so it is the more restrictive of the two.
//!
//! A finite computation cannot decide convergence of a series. The checkers
//! compare the last two decades of shell contributions and report a verdict
//! together with the raw partial sums.

use std::fmt;

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::field_sim::{lag_products, Field};
use crate::par;
use crate::quadrature;
use crate::regression::Estimate;

/// `ε̂_i = Y_i − g_n(i/n)`.
pub fn residuals(y: &[f64], fitted: &Estimate) -> Result<Field> {
    if !fitted.is_grid() {
        return Err(Error::param("residuals need a fit at every design point"));
    }
    if y.len() != fitted.len() {
        return Err(Error::LengthMismatch {
            expected: fitted.len(),
            got: y.len(),
        });
    }
    let values = y.iter().zip(fitted.values()).map(|(a, b)| a - b).collect();
    Field::new(*fitted.lattice(), values)
}

/// `⌊n^{1/4}⌋ ∨ 1`; `ρ^{3d} n^{−d} → 0` for every `d`.
pub fn default_rho(n: usize) -> usize {
    let mut r = (n as f64).powf(0.25).floor() as usize;
    while r > 0 && r.pow(4) > n {
        r -= 1;
    }
    while (r + 1).checked_pow(4).is_some_and(|p| p <= n) {
        r += 1;
    }
    r.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    /// `max(1, raw_sum) / n^d`.
    pub value: f64,
    pub rho: usize,
    /// `|G_ρ|`, ordered pairs.
    pub pairs: u128,
    /// `Σ_{(i,j) ∈ G_ρ} ε_i ε_j` before clamping.
    pub raw_sum: f64,
}

/// Plug-in estimator of `η` from (true or estimated) noise.
pub fn estimate_eta(eps: &Field, rho: usize) -> Result<EtaEstimate> {
    let lat = eps.lattice();
    let (n, d) = (lat.n(), lat.d());
    if rho == 0 || rho >= n {
        return Err(Error::param(format!("rho must satisfy 1 <= rho < n={n}, got {rho}")));
    }
    let side = 2 * rho + 1;
    let count = side.pow(d as u32);
    let r = rho as isize;
    let per_lag = par::map_range(count, |mut k| {
        let mut lag = vec![0isize; d];
        for l in lag.iter_mut().rev() {
            *l = (k % side) as isize - r;
            k /= side;
        }
        lag_products(lat, eps.values(), &lag)
    });
    // fixed summation order over lags
    let raw_sum: f64 = per_lag.iter().map(|&(s, _)| s).sum();
    let pairs: u128 = per_lag.iter().map(|&(_, c)| c as u128).sum();
    Ok(EtaEstimate {
        value: raw_sum.max(1.0) / lat.len() as f64,
        rho,
        pairs,
        raw_sum,
    })
}

/// Quantile function `Q(u)` of `|ε_0|`: the inverse of `t ↦ P(|ε_0| > t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantile {
    Gaussian { sd: f64 },
    /// `|ε_0| = m` almost surely.
    Bounded { m: f64 },
    /// `ε_0 ~ U[−m, m]`.
    Uniform { m: f64 },
    /// Piecewise-linear through `(u, Q(u))` nodes sorted by `u`.
    Table(Vec<(f64, f64)>),
}

impl Quantile {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Quantile::Gaussian { sd } => {
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    sd * std::f64::consts::SQRT_2 * erfc_inv(u.min(1.0))
                }
            }
            Quantile::Bounded { m } => {
                if u < 1.0 {
                    *m
                } else {
                    0.0
                }
            }
            Quantile::Uniform { m } => m * (1.0 - u).max(0.0),
            Quantile::Table(nodes) => interpolate(nodes, u),
        }
    }

    /// `∫_0^α Q²(u) du`.
    pub fn integral_sq(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        quadrature::simpson_left_singular(|u| self.value(u).powi(2), alpha, 1e-8)
    }

    pub fn from_table(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::param("quantile table needs at least two rows"));
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 > w[0].1) {
            return Err(Error::param(
                "quantile table must have increasing u and nonincreasing Q(u)",
            ));
        }
        Ok(Quantile::Table(nodes))
    }
}

fn interpolate(nodes: &[(f64, f64)], u: f64) -> f64 {
    if u <= nodes[0].0 {
        return nodes[0].1;
    }
    let last = nodes[nodes.len() - 1];
    if u >= last.0 {
        return last.1;
    }
    let j = nodes.partition_point(|p| p.0 <= u);
    let (a, b) = (nodes[j - 1], nodes[j]);
    a.1 + (b.1 - a.1) * (u - a.0) / (b.0 - a.0)
}

/// Mixing rate `α(r)` as a function of the max-norm distance `r ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSequence {
    /// `scale · e^{−rate·r}`.
    Exponential { scale: f64, rate: f64 },
    /// `scale · r^{−q}` for `r ≥ 1`, and `scale` at `r = 0`.
    Power { scale: f64, q: f64 },
    /// `value` for `r < range`, zero from `range` on (finite-range dependence).
    FiniteRange { value: f64, range: usize },
    /// `α(r)` listed for `r = 0, 1, …`.
    Table(Vec<f64>),
}

impl AlphaSequence {
    pub fn value(&self, r: usize) -> Option<f64> {
        match self {
            AlphaSequence::Exponential { scale, rate } => Some(scale * (-rate * r as f64).exp()),
            AlphaSequence::Power { scale, q } => {
                Some(if r == 0 { *scale } else { scale * (r as f64).powf(-q) })
            }
            AlphaSequence::FiniteRange { value, range } => {
                Some(if r < *range { *value } else { 0.0 })
            }
            AlphaSequence::Table(v) => v.get(r).copied(),
        }
    }

    /// Builds a table from `(r, α)` rows; every radius `0..=max` must appear.
    pub fn from_rows(rows: &[(f64, f64)]) -> Result<Self> {
        let max = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let mut table = vec![f64::NAN; max as usize + 1];
        for &(r, a) in rows {
            if r < 0.0 || r.fract() != 0.0 {
                return Err(Error::param(format!("alpha radius {r} must be a nonnegative integer")));
            }
            table[r as usize] = a;
        }
        if table.iter().any(|a| a.is_nan()) {
            return Err(Error::param("alpha table skips a radius"));
        }
        Ok(AlphaSequence::Table(table))
    }

    fn values(&self, from: usize, max_radius: usize) -> Result<Vec<f64>> {
        let v = (from..=max_radius)
            .map(|r| {
                self.value(r)
                    .ok_or_else(|| Error::param(format!("alpha is not defined at radius {r}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if v.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::param("alpha values must be finite and >= 0"));
        }
        if v.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("alpha must be nonincreasing in the distance"));
        }
        Ok(v)
    }
}

/// Parses whitespace- or comma-separated two-column numeric text; `#`
/// starts a comment.
pub fn parse_two_column(text: &str) -> Result<Vec<(f64, f64)>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let nums: Vec<f64> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("bad row '{l}': {e}")))?;
            match nums[..] {
                [a, b] => Ok((a, b)),
                _ => Err(Error::Format(format!("row '{l}' must have two columns"))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub criterion: &'static str,
    /// `(radius, partial sum through that radius)`.
    pub partial_sums: Vec<(usize, f64)>,
    pub monotone: bool,
    /// Contribution of the last decade of radii over that of the previous one.
    pub decade_ratio: Option<f64>,
    /// Geometric extrapolation of the omitted tail; infinite when the
    /// decade contributions do not shrink.
    pub tail_bound: f64,
    pub verdict: Verdict,
}

impl ConditionReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().map_or(0.0, |p| p.1)
    }

    fn from_terms(criterion: &'static str, first_radius: usize, terms: &[f64]) -> Self {
        let mut partial_sums = Vec::with_capacity(terms.len());
        let mut acc = 0.0;
        for (k, t) in terms.iter().enumerate() {
            acc += t;
            partial_sums.push((first_radius + k, acc));
        }
        let monotone = partial_sums.windows(2).all(|w| w[1].1 >= w[0].1);
        let max_r = first_radius + terms.len() - 1;
        let decade = |lo: usize, hi: usize| -> f64 {
            terms
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let r = first_radius + k;
                    r > lo && r <= hi
                })
                .map(|(_, t)| t)
                .sum()
        };
        let last = decade(max_r / 10, max_r);
        let prev = decade(max_r / 100, max_r / 10);
        // α is nonincreasing, so a vanishing last term ends the series
        let (decade_ratio, verdict, tail_bound) = if terms[terms.len() - 1] == 0.0 {
            (Some(0.0), Verdict::Converges, 0.0)
        } else if max_r < 10 || prev == 0.0 {
            (None, Verdict::Inconclusive, f64::INFINITY)
        } else {
            let ratio = last / prev;
            let verdict = if ratio < 0.95 {
                Verdict::Converges
            } else if ratio >= 1.0 {
                Verdict::Diverges
            } else {
                Verdict::Inconclusive
            };
            let tail = if ratio < 1.0 {
                last * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            (Some(ratio), verdict, tail)
        };
        ConditionReport {
            criterion,
            partial_sums,
            monotone,
            decade_ratio,
            tail_bound,
            verdict,
        }
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# criterion: {}", self.criterion)?;
        writeln!(f, "radius,partial_sum")?;
        for (r, s) in &self.partial_sums {
            writeln!(f, "{r},{s:e}")?;
        }
        match self.decade_ratio {
            Some(q) => writeln!(f, "# last-decade ratio: {q:.6}")?,
            None => writeln!(f, "# last-decade ratio: n/a")?,
        }
        writeln!(f, "# monotone: {}", self.monotone)?;
        writeln!(f, "# extrapolated tail: {:e}", self.tail_bound)?;
        write!(
            f,
            "# verdict: {} (numerical heuristic, not a proof)",
            self.verdict
        )
    }
}

/// Number of `k ∈ Z^d` with `|k|_∞ = r`.
pub fn shell_count(d: usize, r: usize) -> f64 {
    if r == 0 {
        1.0
    } else {
        (2.0 * r as f64 + 1.0).powi(d as i32) - (2.0 * r as f64 - 1.0).powi(d as i32)
    }
}

/// Partial sums of `Σ_{|k| ≤ R} ∫_0^{α(|k|)} Q²(u) du`, grouped by max-norm
/// shells.
pub fn check_quantile_condition(
    alpha: &AlphaSequence,
    q: &Quantile,
    d: usize,
    max_radius: usize,
) -> Result<ConditionReport> {
    if d == 0 {
        return Err(Error::param("d must be >= 1"));
    }
    let a = alpha.values(0, max_radius)?;
    if a.iter().any(|&x| x > 0.25) {
        return Err(Error::param("strong mixing coefficients lie in [0, 1/4]"));
    }
    let terms = par::map_range(a.len(), |r| shell_count(d, r) * q.integral_sq(a[r]));
    Ok(ConditionReport::from_terms("quantile", 0, &terms))
}

/// Partial sums of `Σ_{m ≥ 1} m^{d−1} α(m)^{δ/(2+δ)}`.
pub fn check_mixing_rate_condition(
    alpha: &AlphaSequence,
    delta: f64,
    d: usize,
    max_radius: usize,
) -> Result<ConditionReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta must be > 0, got {delta}")));
    }
    if d == 0 || max_radius == 0 {
        return Err(Error::param("d and max_radius must be >= 1"));
    }
    let a = alpha.values(1, max_radius)?;
    let expo = delta / (2.0 + delta);
    let terms: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(k, &x)| ((k + 1) as f64).powi(d as i32 - 1) * x.powf(expo))
        .collect();
    Ok(ConditionReport::from_terms("mixing-rate", 1, &terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_sim::{simulate, theoretical_eta, FieldSpec};
    use crate::lattice::Lattice;
    use proptest::prelude::*;

    /// Pair enumeration over `Λ_n × Λ_n`.
    fn brute_eta_raw(f: &Field, rho: usize) -> (f64, u128) {
        let lat = f.lattice();
        let idx: Vec<_> = lat.indices().collect();
        let mut sum = 0.0;
        let mut pairs = 0u128;
        for (a, i) in idx.iter().enumerate() {
            for (b, j) in idx.iter().enumerate() {
                if i.max_distance(j) <= rho {
                    sum += f.values()[a] * f.values()[b];
                    pairs += 1;
                }
            }
        }
        (sum, pairs)
    }

    #[test]
    fn default_rho_examples() {
        assert_eq!(default_rho(16), 2);
        assert_eq!(default_rho(256), 4);
        assert_eq!(default_rho(10_000), 10);
        assert_eq!(default_rho(4096), 8);
        assert_eq!(default_rho(2), 1);
        assert_eq!(default_rho(80), 2);
        assert_eq!(default_rho(81), 3);
    }

    #[test]
    fn eta_examples() {
        let l = Lattice::new(10, 1).unwrap();
        let zero = Field::new(l, vec![0.0; 10]).unwrap();
        assert_eq!(estimate_eta(&zero, 3).unwrap().value, 0.1);
        let ones = Field::new(l, vec![1.0; 10]).unwrap();
        let e = estimate_eta(&ones, 1).unwrap();
        assert_eq!(e.raw_sum, 28.0);
        assert_eq!(e.pairs, 28);
        assert!((e.value - 2.8).abs() < 1e-15);
        assert!(estimate_eta(&ones, 10).is_err());
        assert!(estimate_eta(&ones, 0).is_err());
    }

    #[test]
    fn eta_matches_pair_enumeration() {
        for (n, d) in [(20usize, 1usize), (9, 2), (5, 3)] {
            let l = Lattice::new(n, d).unwrap();
            let f = simulate(&FieldSpec::iid(1.0, n as u64), &l).unwrap();
            for rho in 1..n.min(4) {
                let (sum, pairs) = brute_eta_raw(&f, rho);
                let e = estimate_eta(&f, rho).unwrap();
                assert_eq!(e.pairs, pairs);
                assert!((e.raw_sum - sum).abs() < 1e-9, "{} vs {sum}", e.raw_sum);
            }
        }
    }

    #[test]
    fn eta_iid_2d_monte_carlo() {
        let l = Lattice::new(256, 2).unwrap();
        let seeds = 20;
        let inside = (0..seeds)
            .filter(|&s| {
                let f = simulate(&FieldSpec::iid(1.0, 1000 + s), &l).unwrap();
                let e = estimate_eta(&f, 4).unwrap().value;
                (0.9..=1.1).contains(&e)
            })
            .count();
        assert!(inside as f64 >= 0.9 * seeds as f64, "{inside}/{seeds}");
    }

    #[test]
    fn eta_ma_relative_error() {
        let spec = FieldSpec::ma_first_axis(&[1.0, 0.5], 1, 0);
        let truth = theoretical_eta(&spec, 1, 4).unwrap();
        let l = Lattice::new(2048, 1).unwrap();
        let good = (0..100)
            .filter(|&s| {
                let f = simulate(&spec.with_seed(s), &l).unwrap();
                let e = estimate_eta(&f, default_rho(2048)).unwrap().value;
                ((e - truth) / truth).abs() <= 0.30
            })
            .count();
        // sd(η̂)/η ≈ √(2(2ρ+1)/n) ≈ 11% at n = 2048, ρ = 6
        assert!(good >= 90, "{good}/100");
    }

    #[test]
    fn residual_examples() {
        use crate::kernel::Kernel;
        use crate::regression::estimate_grid;
        let l = Lattice::new(12, 2).unwrap();
        let y = vec![4.0; l.len()];
        let fit = estimate_grid(&y, &l, &Kernel::epanechnikov_paper(2), 0.3).unwrap();
        let r = residuals(&y, &fit).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-12));
        let eps = simulate(&FieldSpec::iid(1.0, 3), &l).unwrap();
        let zero_fit = fit.with_values(vec![0.0; l.len()]).unwrap();
        assert_eq!(residuals(eps.values(), &zero_fit).unwrap().values(), eps.values());
        assert!(residuals(&y[1..], &fit).is_err());
    }

    #[test]
    fn residual_mean_linear_trend() {
        use crate::kernel::{Kernel, Norm};
        use crate::regression::estimate_grid;
        let n = 400;
        let l = Lattice::new(n, 1).unwrap();
        let k = Kernel::from_name("epanechnikov-normalized", 1, Norm::Euclidean).unwrap();
        let means: Vec<f64> = (0..40)
            .map(|s| {
                let eps = simulate(&FieldSpec::iid(1.0, s), &l).unwrap();
                let y: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / n as f64 + eps.values()[i]).collect();
                let fit = estimate_grid(&y, &l, &k, 0.1).unwrap();
                let r = residuals(&y, &fit).unwrap();
                // interior design points only
                let inner = &r.values()[40..n - 40];
                inner.iter().sum::<f64>() / inner.len() as f64
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
        assert!(m.abs() < 4.0 * sd / (means.len() as f64).sqrt(), "mean {m}, sd {sd}");
    }

    #[test]
    fn gaussian_quantile_integral_closed_form() {
        // ∫_0^α Q² = 2[tφ(t) + 1 − Φ(t)], t = Q(α)
        let q = Quantile::Gaussian { sd: 1.0 };
        for alpha in [0.25, 0.1, 1e-3, 1e-8] {
            let t = q.value(alpha);
            let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let want = 2.0 * (t * phi + 0.5 * alpha);
            let got = q.integral_sq(alpha);
            assert!((got - want).abs() < 1e-7 * want, "alpha {alpha}: {got} vs {want}");
        }
        assert!((q.value(0.05) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn quantile_condition_examples() {
        let bounded = Quantile::Bounded { m: 2.0 };
        let m_dep = AlphaSequence::FiniteRange { value: 0.25, range: 1 };
        let rep = check_quantile_condition(&m_dep, &bounded, 2, 50).unwrap();
        assert_eq!(rep.verdict, Verdict::Converges);
        assert!((rep.total() - 4.0 * 0.25).abs() < 1e-9);
        assert!(rep.partial_sums.iter().skip(1).all(|p| p.1 == rep.partial_sums[0].1));

        let expo = AlphaSequence::Exponential { scale: 0.25, rate: 1.0 };
        let rep = check_quantile_condition(&expo, &Quantile::Gaussian { sd: 1.0 }, 2, 200).unwrap();
        assert_eq!(rep.verdict, Verdict::Converges);
        assert!(rep.monotone);

        // α(r) = r^{−d}/4: shell terms ≈ 2d(2r)^{d−1}·M²·r^{−d}/4 ~ 1/r
        let power = AlphaSequence::Power { scale: 0.25, q: 2.0 };
        let rep = check_quantile_condition(&power, &bounded, 2, 1000).unwrap();
        assert_ne!(rep.verdict, Verdict::Converges);
        assert!(rep.tail_bound.is_infinite());

        let bad = AlphaSequence::Table(vec![0.1, 0.2]);
        assert!(check_quantile_condition(&bad, &bounded, 1, 1).is_err());
        let big = AlphaSequence::Exponential { scale: 1.0, rate: 1.0 };
        assert!(check_quantile_condition(&big, &bounded, 1, 10).is_err());
    }

    #[test]
    fn mixing_rate_examples() {
        let short = AlphaSequence::Table(vec![1.0, 0.5, 0.0, 0.0, 0.0]);
        let rep = check_mixing_rate_condition(&short, 1.0, 2, 4).unwrap();
        assert_eq!(rep.verdict, Verdict::Converges);
        assert!((rep.total() - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-12);

        // p-series oracle: m^{1 − q/2} summable iff q > 4
        for (q, converges) in [(5.0, true), (4.5, true), (3.5, false), (4.0, false)] {
            let a = AlphaSequence::Power { scale: 1.0, q };
            let rep = check_mixing_rate_condition(&a, 2.0, 2, 10_000).unwrap();
            assert_eq!(rep.verdict == Verdict::Converges, converges, "q={q}: {:?}", rep.decade_ratio);
        }
        let a = AlphaSequence::Exponential { scale: 1.0, rate: 1.0 };
        for d in 1..=3 {
            for delta in [0.5, 2.0] {
                let rep = check_mixing_rate_condition(&a, delta, d, 500).unwrap();
                assert_eq!(rep.verdict, Verdict::Converges);
            }
        }
        assert!(check_mixing_rate_condition(&a, 0.0, 2, 10).is_err());
    }

    #[test]
    fn two_column_tables() {
        let rows = parse_two_column("# r alpha\n0 0.25\n1, 0.1\n2 0.01\n").unwrap();
        let a = AlphaSequence::from_rows(&rows).unwrap();
        assert_eq!(a.value(1), Some(0.1));
        assert_eq!(a.value(3), None);
        assert!(check_mixing_rate_condition(&a, 1.0, 1, 3).is_err());
        let q = Quantile::from_table(vec![(0.0, 3.0), (0.5, 1.0), (1.0, 0.0)]).unwrap();
        assert!((q.value(0.25) - 2.0).abs() < 1e-15);
        assert!(Quantile::from_table(vec![(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(parse_two_column("1 2 3").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn eta_is_bilinear(seed in 0u64..1000, c in -5.0f64..5.0, rho in 1usize..4) {
            let l = Lattice::new(9, 2).unwrap();
            let f = simulate(&FieldSpec::iid(1.0, seed), &l).unwrap();
            let base = estimate_eta(&f, rho).unwrap().raw_sum;
            let scaled = estimate_eta(&f.scaled(c), rho).unwrap().raw_sum;
            prop_assert!((scaled - c * c * base).abs() <= 1e-9 * (1.0 + (c * c * base).abs()));
        }

        #[test]
        fn partial_sums_grow_with_radius(q in 0.5f64..6.0, r1 in 5usize..60, extra in 1usize..60) {
            let a = AlphaSequence::Power { scale: 0.25, q };
            let short = check_mixing_rate_condition(&a, 1.0, 2, r1).unwrap();
            let long = check_mixing_rate_condition(&a, 1.0, 2, r1 + extra).unwrap();
            prop_assert!(long.total() >= short.total());
            prop_assert!(long.monotone);
        }
    }
}
