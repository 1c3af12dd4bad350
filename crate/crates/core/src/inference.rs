//! Standardization, χ²(1) p-values and Monte Carlo checks of the limit law.
//!
//! At a query `x` the statistic is
//!
//! ```text
//! z(x) = (nh)^{d/2} (g_n(x) − m(x)) / √(σ² η̂)
//! ```
//!
//! with `m` a reference for `E g_n` and `σ²` the kernel's
//! [`effective_sigma2`](crate::kernel::Kernel::effective_sigma2). Under the
//! null `z` is approximately standard normal and `z²` is χ²(1).

use std::fmt;

use statrs::function::erf::erfc;

use crate::dependence::{self, EtaEstimate};
use crate::error::{Error, Result};
use crate::field_sim::{simulate, theoretical_eta, Field, FieldSpec};
use crate::imaging::GrayImage;
use crate::kernel::Kernel;
use crate::lattice::Lattice;
use crate::par;
use crate::regression::{estimate_grid, kernel_weights, near_boundary, BandwidthRule, Estimate};
use crate::rng::{labels, SeedPath};

/// `P(χ²₁ > z²) = erfc(|z|/√2)`.
pub fn chi_square_pvalue(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::param("p-value of NaN"));
    }
    Ok(erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `(nh)^{d/2}(g − m)/√(σ²η)`.
pub fn z_score(g: f64, m: f64, n: usize, d: usize, h: f64, sigma2: f64, eta: f64) -> f64 {
    (n as f64 * h).powf(d as f64 / 2.0) * (g - m) / (sigma2 * eta).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedStat {
    /// Position in the query list.
    pub index: usize,
    pub point: Vec<f64>,
    pub z: f64,
    /// `z²`.
    pub t: f64,
    pub p: f64,
    /// Within `h` of the edge of the unit cube.
    pub boundary: bool,
}

/// Standardizes `est` against `mean_ref` at every shared query.
pub fn standardize(
    est: &Estimate,
    mean_ref: &Estimate,
    sigma2: f64,
    eta: f64,
) -> Result<Vec<StandardizedStat>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::param(format!("sigma2 must be > 0, got {sigma2}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param(format!("eta must be > 0, got {eta}")));
    }
    if !est.same_queries(mean_ref) || est.lattice() != mean_ref.lattice() {
        return Err(Error::param("estimate and mean reference have different query sets"));
    }
    let (n, d, h) = (est.lattice().n(), est.lattice().d(), est.bandwidth());
    est.points()
        .zip(est.values().iter().zip(mean_ref.values()))
        .enumerate()
        .map(|(index, (x, (&g, &m)))| {
            let z = z_score(g, m, n, d, h, sigma2, eta);
            Ok(StandardizedStat {
                index,
                point: x.to_vec(),
                z,
                t: z * z,
                p: chi_square_pvalue(z)?,
                boundary: near_boundary(x, h),
            })
        })
        .collect()
}

/// Which fits enter the reference mean for a target fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanPolicy {
    /// Mean over the replicates only, the target excluded.
    #[default]
    LeaveOneOut,
    /// Mean over all fits, the target included.
    IncludeSelf,
}

impl MeanPolicy {
    /// `Var(g − m) / Var(g)` for `r` fits in the mean.
    pub fn inflation(self, r: usize) -> f64 {
        match self {
            MeanPolicy::LeaveOneOut => 1.0 + 1.0 / r as f64,
            MeanPolicy::IncludeSelf => 1.0 - 1.0 / r as f64,
        }
    }
}

impl fmt::Display for MeanPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanPolicy::LeaveOneOut => "leave-one-out",
            MeanPolicy::IncludeSelf => "include-self",
        })
    }
}

/// Pointwise mean of replicate fits and the variance inflation factor that
/// replacing `E g_n` by it introduces.
pub fn mean_reference(replicates: &[Estimate], policy: MeanPolicy) -> Result<(Estimate, f64)> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::param("mean reference needs replicates"))?;
    if replicates.len() < 2 {
        return Err(Error::param("mean reference needs at least two replicates"));
    }
    if replicates.iter().any(|r| !r.same_queries(first)) {
        return Err(Error::param("replicates have different query sets"));
    }
    let mut mean = vec![0.0; first.len()];
    for r in replicates {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v;
        }
    }
    let inv = 1.0 / replicates.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok((first.with_values(mean)?, policy.inflation(replicates.len())))
}

/// Where the `η` used for normalization comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EtaSource {
    /// `η̂` of the target observations minus the pointwise mean of the raw
    /// replicate observations; free of smoothing bias.
    #[default]
    ReplicateResiduals,
    /// `η̂` of the target observations minus the target fit.
    FitResiduals,
    Known(f64),
}

impl fmt::Display for EtaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaSource::ReplicateResiduals => f.write_str("replicate-residuals"),
            EtaSource::FitResiduals => f.write_str("fit-residuals"),
            EtaSource::Known(v) => write!(f, "known({v})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PValueConfig {
    pub kernel: Kernel,
    pub h: f64,
    /// `None` selects [`dependence::default_rho`].
    pub rho: Option<usize>,
    pub policy: MeanPolicy,
    /// Divide the mean-reference inflation out of the normalization.
    pub corrected: bool,
    pub eta_source: EtaSource,
    pub threshold: f64,
}

impl PValueConfig {
    pub fn new(kernel: Kernel, h: f64) -> Self {
        PValueConfig {
            kernel,
            h,
            rho: None,
            policy: MeanPolicy::LeaveOneOut,
            corrected: true,
            eta_source: EtaSource::ReplicateResiduals,
            threshold: 0.01,
        }
    }

    /// Include-self means, no inflation correction.
    pub fn paper_faithful(mut self) -> Self {
        self.policy = MeanPolicy::IncludeSelf;
        self.corrected = false;
        self
    }
}

/// Per-design-point statistics and summary counts.
#[derive(Debug, Clone)]
pub struct PValueMap {
    pub lattice: Lattice,
    pub stats: Vec<StandardizedStat>,
    pub threshold: f64,
    /// `η` used in the normalization, after any inflation correction.
    pub eta: f64,
    /// Raw estimator output, when `η` was estimated.
    pub eta_estimate: Option<EtaEstimate>,
    pub sigma2: f64,
    pub h: f64,
    /// Number of fits in the reference mean.
    pub replicates: usize,
    pub inflation: f64,
    pub corrected: bool,
    pub policy: MeanPolicy,
}

impl PValueMap {
    fn fraction(&self, keep: impl Fn(&StandardizedStat) -> bool) -> (usize, usize) {
        let sel: Vec<_> = self.stats.iter().filter(|s| keep(s)).collect();
        let above = sel.iter().filter(|s| s.p > self.threshold).count();
        (above, sel.len())
    }

    /// `(count with p > threshold, count)` over interior points.
    pub fn interior_counts(&self) -> (usize, usize) {
        self.fraction(|s| !s.boundary)
    }

    /// `(count with p > threshold, count)` over all points.
    pub fn all_counts(&self) -> (usize, usize) {
        self.fraction(|_| true)
    }

    /// `(count with p > threshold, count)` over boundary points.
    pub fn boundary_counts(&self) -> (usize, usize) {
        self.fraction(|s| s.boundary)
    }

    /// Fraction of interior points with `p > threshold`; `None` without
    /// interior points.
    pub fn fraction_interior(&self) -> Option<f64> {
        let (a, c) = self.interior_counts();
        (c > 0).then(|| a as f64 / c as f64)
    }

    pub fn fraction_all(&self) -> f64 {
        let (a, c) = self.all_counts();
        a as f64 / c as f64
    }

    /// CSV `i_1,…,i_d,z,p,boundary` with 1-based lattice indices.
    pub fn to_csv(&self) -> String {
        let d = self.lattice.d();
        let mut out = String::new();
        for ax in 1..=d {
            out.push_str(&format!("i_{ax},"));
        }
        out.push_str("z,p,boundary\n");
        let mut coords = vec![0usize; d];
        for s in &self.stats {
            self.lattice.coords_of(s.index, &mut coords);
            for c in &coords {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{:e},{:e},{}\n", s.z, s.p, u8::from(s.boundary)));
        }
        out
    }

    /// Gray levels `p·255`; requires `d = 2`.
    pub fn to_image(&self) -> Result<GrayImage> {
        if self.lattice.d() != 2 {
            return Err(Error::Unsupported(format!(
                "p-value image needs d = 2, lattice has d = {}",
                self.lattice.d()
            )));
        }
        let n = self.lattice.n();
        GrayImage::new(n, n, self.stats.iter().map(|s| s.p * 255.0).collect())
    }
}

/// Full pipeline on one target and its replicates, all observed on the
/// design grid of `lat`.
///
/// Under [`MeanPolicy::LeaveOneOut`] the mean is over `others`; under
/// [`MeanPolicy::IncludeSelf`] the target joins it.
pub fn pvalue_map(
    target: &[f64],
    others: &[Vec<f64>],
    lat: &Lattice,
    config: &PValueConfig,
) -> Result<PValueMap> {
    if !(config.threshold >= 0.0 && config.threshold <= 1.0) {
        return Err(Error::param(format!("threshold must lie in [0,1], got {}", config.threshold)));
    }
    for o in others {
        if o.len() != target.len() {
            return Err(Error::LengthMismatch {
                expected: target.len(),
                got: o.len(),
            });
        }
    }
    let (k, h) = (&config.kernel, config.h);
    let fit = estimate_grid(target, lat, k, h)?;
    let mut pool: Vec<&[f64]> = Vec::with_capacity(others.len() + 1);
    if config.policy == MeanPolicy::IncludeSelf {
        pool.push(target);
    }
    pool.extend(others.iter().map(Vec::as_slice));
    let fits = pool
        .iter()
        .map(|y| estimate_grid(y, lat, k, h))
        .collect::<Result<Vec<_>>>()?;
    let (mean, inflation) = mean_reference(&fits, config.policy)?;
    let rho = config.rho.unwrap_or_else(|| dependence::default_rho(lat.n()));
    let scale = if config.corrected { inflation } else { 1.0 };

    let (eta, eta_estimate) = match config.eta_source {
        EtaSource::Known(v) => (v, None),
        EtaSource::FitResiduals => {
            let e = dependence::estimate_eta(&dependence::residuals(target, &fit)?, rho)?;
            (e.value, Some(e))
        }
        EtaSource::ReplicateResiduals => {
            let inv = 1.0 / pool.len() as f64;
            let resid: Vec<f64> = (0..target.len())
                .map(|i| target[i] - inv * pool.iter().map(|y| y[i]).sum::<f64>())
                .collect();
            let e = dependence::estimate_eta(&Field::new(*lat, resid)?, rho)?;
            // the residual carries the reference mean's share of the variance
            (e.value / scale, Some(e))
        }
    };
    let sigma2 = k.effective_sigma2();
    let stats = standardize(&fit, &mean, sigma2, eta * scale)?;
    Ok(PValueMap {
        lattice: *lat,
        stats,
        threshold: config.threshold,
        eta,
        eta_estimate,
        sigma2,
        h,
        replicates: pool.len(),
        inflation,
        corrected: config.corrected,
        policy: config.policy,
    })
}

/// `η` used to normalize the Monte Carlo `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaChoice {
    /// Lattice sum of the generator's covariance.
    Theoretical,
    Fixed(f64),
    /// `η̂` of each replicate's true noise.
    TrueNoise { rho: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryReport {
    pub point: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub ks_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStudy {
    pub field: String,
    pub n: usize,
    pub d: usize,
    pub h: f64,
    pub reps: usize,
    pub sigma2: f64,
    /// Theoretical or fixed `η`, or the mean of per-replicate estimates.
    pub eta: f64,
    pub queries: Vec<QueryReport>,
    /// Row-major `k × k` sample correlation matrix of the `z` vectors.
    pub correlation: Vec<f64>,
    pub max_offdiag: f64,
    pub ks_critical: f64,
    /// `z[r][j]` for replicate `r` and query `j`.
    pub z: Vec<Vec<f64>>,
}

impl McStudy {
    pub fn ks_pass(&self) -> bool {
        self.queries.iter().all(|q| q.ks_distance < self.ks_critical)
    }
}

impl fmt::Display for McStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# field: {}", self.field)?;
        writeln!(
            f,
            "# n={} d={} h={} reps={} sigma2={} eta={}",
            self.n, self.d, self.h, self.reps, self.sigma2, self.eta
        )?;
        writeln!(f, "query,mean,variance,ks_distance,ks_critical_0.01")?;
        for q in &self.queries {
            let pt: Vec<String> = q.point.iter().map(|c| c.to_string()).collect();
            writeln!(
                f,
                "{},{:.6},{:.6},{:.6},{:.6}",
                pt.join(" "),
                q.mean,
                q.variance,
                q.ks_distance,
                self.ks_critical
            )?;
        }
        write!(f, "# max |offdiag corr| = {:.6}", self.max_offdiag)
    }
}

/// Kolmogorov–Smirnov distance between the sample and `N(0,1)`.
pub fn ks_distance(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = normal_cdf(x);
        acc.max((i + 1) as f64 / m - f).max(f - i as f64 / m)
    })
}

/// Asymptotic one-sample KS critical value with Stephens' finite-`m`
/// correction.
pub fn ks_critical(m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let r = (m as f64).sqrt();
    c / (r + 0.12 + 0.11 / r)
}

/// Simulates `reps` noise replicates, fits `Y = g + ε` at the queries and
/// standardizes against the exact `E g_n`.
#[allow(clippy::too_many_arguments)]
pub fn mc_normality_study<G>(
    spec: &FieldSpec,
    g: G,
    kernel: &Kernel,
    rule: BandwidthRule,
    n: usize,
    queries: &[Vec<f64>],
    reps: usize,
    eta: EtaChoice,
    seed: u64,
) -> Result<McStudy>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let d = kernel.dim();
    let lat = Lattice::new(n, d)?;
    spec.validate(d)?;
    let h = rule.bandwidth(n);
    if reps < 2 {
        return Err(Error::param("need at least two replicates"));
    }
    for (j, q) in queries.iter().enumerate() {
        if q.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: q.len(),
            });
        }
        if near_boundary(q, h) {
            return Err(Error::param(format!("query {j} lies within h={h} of the boundary")));
        }
        if queries[..j].contains(q) {
            return Err(Error::param(format!("query {j} is repeated")));
        }
    }
    let weights = queries
        .iter()
        .map(|q| {
            let w = kernel_weights(&lat, kernel, h, q)?;
            let s: f64 = w.iter().map(|p| p.1).sum();
            Ok(w.into_iter().map(|(i, a)| (i, a / s)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<f64> = par::map_range(lat.len(), |i| g(&lat.design_point_linear(i)));
    let mean: Vec<f64> = weights
        .iter()
        .map(|w| w.iter().map(|&(i, a)| a * truth[i]).sum())
        .collect();
    let sigma2 = kernel.effective_sigma2();
    let fixed_eta = match eta {
        EtaChoice::Theoretical => {
            let cap = [1000, 200, 40][(d - 1).min(2)];
            Some(theoretical_eta(spec, d, (n - 1).clamp(1, cap))?)
        }
        EtaChoice::Fixed(v) if v > 0.0 => Some(v),
        EtaChoice::Fixed(v) => return Err(Error::param(format!("eta must be > 0, got {v}"))),
        EtaChoice::TrueNoise { .. } => None,
    };
    let root = SeedPath::root(seed).child(labels::REPLICATE);
    let runs = par::map_range(reps, |r| -> Result<(Vec<f64>, f64)> {
        let eps = simulate(&spec.with_seed(root.child(r as u64).key()), &lat)?;
        let e = match (fixed_eta, eta) {
            (Some(v), _) => v,
            (None, EtaChoice::TrueNoise { rho }) => dependence::estimate_eta(&eps, rho)?.value,
            _ => unreachable!(),
        };
        let z = weights
            .iter()
            .zip(&mean)
            .map(|(w, &m)| {
                let gn: f64 = w.iter().map(|&(i, a)| a * (truth[i] + eps.values()[i])).sum();
                z_score(gn, m, n, d, h, sigma2, e)
            })
            .collect();
        Ok((z, e))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let eta_used = runs.iter().map(|r| r.1).sum::<f64>() / reps as f64;
    let z: Vec<Vec<f64>> = runs.into_iter().map(|r| r.0).collect();

    let k = queries.len();
    let rf = reps as f64;
    let col = |j: usize| -> Vec<f64> { z.iter().map(|row| row[j]).collect() };
    let means: Vec<f64> = (0..k).map(|j| col(j).iter().sum::<f64>() / rf).collect();
    let cov = |a: usize, b: usize| -> f64 {
        z.iter().map(|row| (row[a] - means[a]) * (row[b] - means[b])).sum::<f64>() / (rf - 1.0)
    };
    let vars: Vec<f64> = (0..k).map(|j| cov(j, j)).collect();
    let mut correlation = vec![0.0; k * k];
    let mut max_offdiag: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            let c = if a == b { 1.0 } else { cov(a, b) / (vars[a] * vars[b]).sqrt() };
            correlation[a * k + b] = c;
            if a != b {
                max_offdiag = max_offdiag.max(c.abs());
            }
        }
    }
    let reports = (0..k)
        .map(|j| QueryReport {
            point: queries[j].clone(),
            mean: means[j],
            variance: vars[j],
            ks_distance: ks_distance(&col(j)),
        })
        .collect();
    Ok(McStudy {
        field: spec.to_string(),
        n,
        d,
        h,
        reps,
        sigma2,
        eta: eta_used,
        queries: reports,
        correlation,
        max_offdiag,
        ks_critical: ks_critical(reps, 0.01),
        z,
    })
}
