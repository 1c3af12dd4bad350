//! `fieldreg` command-line front-end.

mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use fieldreg::dependence::{self, AlphaSequence, ConditionReport, Quantile};
use fieldreg::field_sim::{self, Field, FieldSpec, DEFAULT_COMPONENTS};
use fieldreg::imaging::{self, DenoiseConfig, GrayImage};
use fieldreg::inference::{self, EtaChoice, EtaSource};
use fieldreg::regression::{self, BandwidthRule};
use fieldreg::{Kernel, Lattice, Norm};

#[derive(Parser, Debug)]
#[command(name = "fieldreg", version, about = "Kernel regression on lattices with dependent noise")]
struct Cli {
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat `key = value` file with option defaults; command-line flags win
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a noise field on {1..n}^d and write it to disk
    SimulateField(SimulateArgs),
    /// Fit the kernel estimator to observations on the design grid
    Estimate(EstimateArgs),
    /// Estimate the long-run variance eta from a field or residuals
    Eta(EtaArgs),
    /// Check a summability condition on mixing coefficients
    CheckCondition(ConditionArgs),
    /// Monte Carlo check of the normal limit of the standardized estimator
    CltStudy(CltArgs),
    /// Interior sup-bias of the estimator against the bandwidth
    BiasStudy(BiasArgs),
    /// Noisy-image restoration with a p-value map
    Denoise(DenoiseArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FieldName {
    Iid,
    Exp,
    Ma,
    Md,
}

#[derive(Args, Debug)]
struct FieldOpts {
    /// Noise generator
    #[arg(long, value_enum, default_value = "iid")]
    field: FieldName,
    /// iid: standard deviation
    #[arg(long, default_value_t = 1.0)]
    sd: f64,
    /// exp: covariance at lag 0, C(k) = cst·exp(−|k|/range)
    #[arg(long, default_value_t = 1.0)]
    cst: f64,
    /// exp: correlation range, in lattice units
    #[arg(long, default_value_t = 1.0)]
    range: f64,
    /// exp: number of spectral components
    #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
    components: usize,
    /// ma: coefficients θ_0,θ_1,… along the first axis
    #[arg(long, default_value = "1,0.5")]
    theta: String,
    /// md: strength of the nonlinear dependence on the previous site
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

impl FieldOpts {
    fn spec(&self, d: usize, seed: u64) -> Result<FieldSpec, CliError> {
        let spec = match self.field {
            FieldName::Iid => FieldSpec::iid(self.sd, seed),
            FieldName::Exp => FieldSpec::exp_spectral(self.cst, self.range, self.components, seed),
            FieldName::Ma => FieldSpec::ma_first_axis(&parse_list(&self.theta, "theta")?, d, seed),
            FieldName::Md => FieldSpec::md(self.beta, seed),
        };
        spec.validate(d)?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct KernelOpts {
    /// Kernel family: box, epanechnikov-paper, epanechnikov-normalized, triangle
    #[arg(long, default_value = "epanechnikov-paper")]
    kernel: String,
    /// Norm of the radial kernels: euclidean or max
    #[arg(long, default_value = "euclidean")]
    norm: String,
    /// Tabulated kernel file (overrides --kernel and --norm)
    #[arg(long, value_name = "PATH")]
    kernel_table: Option<PathBuf>,
}

impl KernelOpts {
    fn kernel(&self, d: usize) -> Result<Kernel, CliError> {
        let k = match &self.kernel_table {
            Some(p) => Kernel::from_table_file(p)?,
            None => Kernel::from_name(&self.kernel, d, self.norm.parse::<Norm>()?)?,
        };
        if k.dim() != d {
            return Err(CliError::Usage(format!("kernel has d = {}, data has d = {d}", k.dim())));
        }
        Ok(k)
    }
}

#[derive(Args, Debug)]
struct BandwidthOpts {
    /// Fixed bandwidth, in units of the unit cube (overrides the power law)
    #[arg(long)]
    h: Option<f64>,
    /// Power-law bandwidth h = c·n^(−gamma): constant c
    #[arg(long, default_value_t = 1.0)]
    bandwidth_c: f64,
    /// Power-law bandwidth h = c·n^(−gamma): exponent, must be < 1/(d+1)
    #[arg(long, default_value_t = 0.25)]
    bandwidth_gamma: f64,
}

impl BandwidthOpts {
    fn rule(&self, d: usize) -> Result<BandwidthRule, CliError> {
        Ok(match self.h {
            Some(h) => BandwidthRule::fixed(h)?,
            None => BandwidthRule::power_law(self.bandwidth_c, self.bandwidth_gamma, d)?,
        })
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FieldFormat {
    Bin,
    Csv,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    field: FieldOpts,
    /// Lattice side length
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Lattice dimension
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Root seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format of the field file
    #[arg(long, value_enum, default_value = "bin")]
    format: FieldFormat,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Observations: field file (binary or CSV) or an 8-bit PGM image
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    bandwidth: BandwidthOpts,
    /// Query points, `;`-separated, coordinates `,`-separated (d = 1 also
    /// accepts a plain comma list) [default: every design point]
    #[arg(long)]
    queries: Option<String>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EtaArgs {
    /// Noise or observations: field file (binary or CSV) or an 8-bit PGM image
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Neighbourhood radius, in lattice steps [default: floor(n^(1/4))]
    #[arg(long)]
    rho: Option<usize>,
    /// Estimate from residuals of a kernel fit instead of the raw values
    #[arg(long)]
    residuals: bool,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    bandwidth: BandwidthOpts,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Criterion {
    Quantile,
    MixingRate,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlphaKind {
    Exp,
    Power,
    Finite,
    Table,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum QuantileKind {
    Gaussian,
    Bounded,
    Uniform,
    Table,
}

#[derive(Args, Debug)]
struct ConditionArgs {
    /// Sum to check: quantile (∫Q² form) or mixing-rate (moment form)
    #[arg(long, value_enum, default_value = "mixing-rate")]
    criterion: Criterion,
    /// Mixing-coefficient family
    #[arg(long, value_enum, default_value = "power")]
    alpha: AlphaKind,
    /// Multiplier of the mixing coefficients
    #[arg(long, default_value_t = 0.25)]
    alpha_scale: f64,
    /// exp: decay rate per lattice step
    #[arg(long, default_value_t = 1.0)]
    alpha_rate: f64,
    /// power: exponent q in r^(−q)
    #[arg(long, default_value_t = 5.0)]
    alpha_q: f64,
    /// finite: first distance with zero coefficient
    #[arg(long, default_value_t = 1)]
    alpha_range: usize,
    /// table: two-column file `r alpha(r)`
    #[arg(long, value_name = "PATH")]
    alpha_table: Option<PathBuf>,
    /// Distribution of |ε_0| for the quantile criterion
    #[arg(long, value_enum, default_value = "gaussian")]
    quantile: QuantileKind,
    /// gaussian: sd; bounded and uniform: bound m
    #[arg(long, default_value_t = 1.0)]
    quantile_param: f64,
    /// table: two-column file `u Q(u)`
    #[arg(long, value_name = "PATH")]
    quantile_table: Option<PathBuf>,
    /// Moment exponent δ > 0 of the mixing-rate criterion
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    /// Lattice dimension
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Largest distance summed, in lattice steps
    #[arg(long, default_value_t = 10_000)]
    max_radius: usize,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TrendName {
    Zero,
    Sin,
}

#[derive(Args, Debug)]
struct CltArgs {
    #[command(flatten)]
    field: FieldOpts,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    bandwidth: BandwidthOpts,
    /// Lattice side length
    #[arg(long, default_value_t = 4096)]
    n: usize,
    /// Lattice dimension
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Interior query points (see `estimate --queries`)
    #[arg(long, default_value = "0.3,0.7")]
    queries: String,
    /// Monte Carlo replicates
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Regression function: zero or sin (product of sin 2πx_l)
    #[arg(long, value_enum, default_value = "sin")]
    trend: TrendName,
    /// eta for the normalization: `theoretical`, `estimated`, or a number
    #[arg(long, default_value = "theoretical")]
    eta: String,
    /// Radius for `--eta estimated` [default: floor(n^(1/4))]
    #[arg(long)]
    rho: Option<usize>,
    /// Root seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BiasArgs {
    #[command(flatten)]
    kernel: KernelOpts,
    /// Lattice side length
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Lattice dimension
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Bandwidths, comma-separated
    #[arg(long, default_value = "0.2,0.1,0.05,0.025")]
    bandwidths: String,
    /// Interior queries per axis
    #[arg(long, default_value_t = 41)]
    per_axis: usize,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Demo {
    Sinusoid,
    Photo,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    /// Built-in image (ignored with --input)
    #[arg(long, value_enum, default_value = "sinusoid")]
    demo: Demo,
    /// Square 8-bit binary PGM to use instead of a demo image
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Side length of the sinusoid demo, in pixels
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Images in the reference mean
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    /// Noise covariance at lag 0, in squared gray levels
    #[arg(long, default_value_t = 200.0)]
    cst: f64,
    /// Noise correlation range, in pixels
    #[arg(long, default_value_t = 1.0)]
    range: f64,
    /// Spectral components of the noise simulation
    #[arg(long, default_value_t = DEFAULT_COMPONENTS)]
    components: usize,
    /// Root seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    bandwidth: BandwidthOpts,
    /// Radius of the eta estimator, in pixels [default: floor(n^(1/4))]
    #[arg(long)]
    rho: Option<usize>,
    /// Include the target in an uncorrected reference mean of --replicates images
    #[arg(long)]
    paper_faithful: bool,
    /// Clamp noisy observations to [0,255] before fitting
    #[arg(long)]
    clamp_observations: bool,
    /// p-value threshold of the summary counts
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    /// eta for the normalization: replicate-residuals, fit-residuals, or a number
    #[arg(long, default_value = "replicate-residuals")]
    eta_source: String,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(fieldreg::Error),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Lib(fieldreg::Error::Io(_)) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<fieldreg::Error> for CliError {
    fn from(e: fieldreg::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad {what} list '{s}': {e}")))
}

fn parse_queries(s: &str, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let pts: Vec<Vec<f64>> = if d == 1 && !s.contains(';') {
        parse_list(s, "query")?.into_iter().map(|x| vec![x]).collect()
    } else {
        s.split(';')
            .map(|p| parse_list(p, "query"))
            .collect::<Result<_, _>>()?
    };
    if let Some(p) = pts.iter().find(|p| p.len() != d) {
        return Err(CliError::Usage(format!("query {p:?} does not have {d} coordinates")));
    }
    Ok(pts)
}

fn read_observations(path: &Path) -> Result<Field, CliError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"FLD1") {
        Ok(Field::read_binary(bytes.as_slice())?)
    } else if bytes.starts_with(b"P5") {
        let img = imaging::read_pgm(&bytes)?;
        Ok(Field::new(img.lattice()?, img.values().to_vec())?)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::Usage(format!("{} is not a field, CSV or PGM file", path.display())))?;
        Ok(Field::from_csv(&text)?)
    }
}

/// Collects files and writes them, plus the manifest, once all compute is done.
struct Output {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn new(dir: &Path) -> Self {
        Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    fn write(self, manifest: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir)?;
        for (name, bytes) in &self.files {
            fs::write(self.dir.join(name), bytes)?;
        }
        fs::write(self.dir.join("manifest"), manifest)?;
        Ok(())
    }
}

fn trend(name: TrendName) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| match name {
        TrendName::Zero => 0.0,
        TrendName::Sin => x
            .iter()
            .map(|c| (2.0 * std::f64::consts::PI * c).sin())
            .product(),
    }
}

fn simulate_field(a: &SimulateArgs, manifest: &str) -> Result<(), CliError> {
    let lat = Lattice::new(a.n, a.d)?;
    let f = field_sim::simulate(&a.field.spec(a.d, a.seed)?, &lat)?;
    let mut out = Output::new(&a.out);
    match a.format {
        FieldFormat::Bin => out.add("field.bin", f.to_binary()),
        FieldFormat::Csv => out.add("field.csv", f.to_csv()),
    }
    out.write(manifest)?;
    println!("wrote {} values to {}", lat.len(), a.out.display());
    Ok(())
}

fn estimate(a: &EstimateArgs, manifest: &str) -> Result<(), CliError> {
    let y = read_observations(&a.input)?;
    let lat = *y.lattice();
    let rule = a.bandwidth.rule(lat.d())?;
    let k = a.kernel.kernel(lat.d())?;
    let h = rule.bandwidth(lat.n());
    let est = match &a.queries {
        Some(q) => regression::estimate(y.values(), &lat, &k, h, &parse_queries(q, lat.d())?)?,
        None => regression::estimate_grid(y.values(), &lat, &k, h)?,
    };
    let mut out = Output::new(&a.out);
    out.add("estimate.csv", est.to_csv());
    if est.is_grid() && lat.d() == 2 {
        let img = GrayImage::new(lat.n(), lat.n(), est.values().to_vec())?;
        out.add("estimate.pgm", img.to_pgm());
    }
    out.write(manifest)?;
    println!("h = {h}; {} queries written to {}", est.len(), a.out.display());
    Ok(())
}

fn eta(a: &EtaArgs, manifest: &str) -> Result<(), CliError> {
    let f = read_observations(&a.input)?;
    let lat = *f.lattice();
    let eps = if a.residuals {
        let k = a.kernel.kernel(lat.d())?;
        let h = a.bandwidth.rule(lat.d())?.bandwidth(lat.n());
        let fit = regression::estimate_grid(f.values(), &lat, &k, h)?;
        dependence::residuals(f.values(), &fit)?
    } else {
        f
    };
    let rho = a.rho.unwrap_or_else(|| dependence::default_rho(lat.n()));
    let e = dependence::estimate_eta(&eps, rho)?;
    let text = format!(
        "eta_hat,rho,pairs,raw_sum\n{},{},{},{}\n",
        e.value, e.rho, e.pairs, e.raw_sum
    );
    print!("{text}");
    if let Some(dir) = &a.out {
        let mut out = Output::new(dir);
        out.add("eta.csv", text);
        out.write(manifest)?;
    }
    Ok(())
}

fn check_condition(a: &ConditionArgs, manifest: &str) -> Result<(), CliError> {
    let read_table = |p: &Option<PathBuf>, what: &str| -> Result<Vec<(f64, f64)>, CliError> {
        let p = p
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("--{what}-table is required")))?;
        Ok(dependence::parse_two_column(&fs::read_to_string(p)?)?)
    };
    let alpha = match a.alpha {
        AlphaKind::Exp => AlphaSequence::Exponential {
            scale: a.alpha_scale,
            rate: a.alpha_rate,
        },
        AlphaKind::Power => AlphaSequence::Power {
            scale: a.alpha_scale,
            q: a.alpha_q,
        },
        AlphaKind::Finite => AlphaSequence::FiniteRange {
            value: a.alpha_scale,
            range: a.alpha_range,
        },
        AlphaKind::Table => AlphaSequence::from_rows(&read_table(&a.alpha_table, "alpha")?)?,
    };
    let report: ConditionReport = match a.criterion {
        Criterion::MixingRate => dependence::check_mixing_rate_condition(&alpha, a.delta, a.d, a.max_radius)?,
        Criterion::Quantile => {
            let m = a.quantile_param;
            let q = match a.quantile {
                QuantileKind::Gaussian => Quantile::Gaussian { sd: m },
                QuantileKind::Bounded => Quantile::Bounded { m },
                QuantileKind::Uniform => Quantile::Uniform { m },
                QuantileKind::Table => Quantile::from_table(read_table(&a.quantile_table, "quantile")?)?,
            };
            dependence::check_quantile_condition(&alpha, &q, a.d, a.max_radius)?
        }
    };
    let text = report.to_string();
    let lines: Vec<&str> = text.lines().collect();
    // keep stdout short: header, a few partial sums, the verdict block
    let tail = lines.iter().rposition(|l| !l.starts_with('#')).map_or(0, |i| i + 1);
    let head = 2 + 5.min(report.partial_sums.len());
    for l in lines.iter().take(head) {
        println!("{l}");
    }
    if tail > head {
        println!("...");
        println!("{}", lines[tail - 1]);
    }
    for l in &lines[tail..] {
        println!("{l}");
    }
    if let Some(dir) = &a.out {
        let mut out = Output::new(dir);
        out.add("condition.csv", text + "\n");
        out.write(manifest)?;
    }
    Ok(())
}

fn clt_study(a: &CltArgs, manifest: &str) -> Result<(), CliError> {
    let spec = a.field.spec(a.d, 0)?;
    let k = a.kernel.kernel(a.d)?;
    let rule = a.bandwidth.rule(a.d)?;
    let queries = parse_queries(&a.queries, a.d)?;
    let eta = match a.eta.as_str() {
        "theoretical" => EtaChoice::Theoretical,
        "estimated" => EtaChoice::TrueNoise {
            rho: a.rho.unwrap_or_else(|| dependence::default_rho(a.n)),
        },
        v => EtaChoice::Fixed(
            v.parse()
                .map_err(|_| CliError::Usage(format!("--eta expects theoretical, estimated or a number, got '{v}'")))?,
        ),
    };
    let study = inference::mc_normality_study(&spec, trend(a.trend), &k, rule, a.n, &queries, a.reps, eta, a.seed)?;
    let report = study.to_string();
    println!("{report}");
    println!(
        "# KS at alpha=0.01: {}",
        if study.ks_pass() { "pass" } else { "fail" }
    );
    if let Some(dir) = &a.out {
        let mut out = Output::new(dir);
        out.add("clt_report.csv", report + "\n");
        let mut z = (1..=queries.len()).map(|j| format!("z_{j}")).collect::<Vec<_>>().join(",");
        z.push('\n');
        for row in &study.z {
            z.push_str(&row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
            z.push('\n');
        }
        out.add("z.csv", z);
        out.write(manifest)?;
    }
    Ok(())
}

fn bias_study(a: &BiasArgs, manifest: &str) -> Result<(), CliError> {
    let k = a.kernel.kernel(a.d)?;
    let hs = parse_list(&a.bandwidths, "bandwidth")?;
    let configs: Vec<(usize, f64)> = hs.iter().map(|&h| (a.n, h)).collect();
    let study = regression::bias_study(trend(TrendName::Sin), &k, &configs, a.per_axis)?;
    let text = study.to_string();
    println!("{text}");
    if let Some(dir) = &a.out {
        let mut out = Output::new(dir);
        out.add("bias.csv", text + "\n");
        out.write(manifest)?;
    }
    Ok(())
}

fn denoise(a: &DenoiseArgs, manifest: &str) -> Result<(), CliError> {
    let original = match (&a.input, a.demo) {
        (Some(p), _) => GrayImage::read_pgm_file(p)?,
        (None, Demo::Sinusoid) => imaging::synth_sinusoid(a.n)?,
        (None, Demo::Photo) => imaging::bundled_photo(),
    };
    let lat = original.lattice()?;
    let eta_source = match a.eta_source.as_str() {
        "replicate-residuals" => EtaSource::ReplicateResiduals,
        "fit-residuals" => EtaSource::FitResiduals,
        v => EtaSource::Known(v.parse().map_err(|_| {
            CliError::Usage(format!(
                "--eta-source expects replicate-residuals, fit-residuals or a number, got '{v}'"
            ))
        })?),
    };
    let config = DenoiseConfig {
        noise: FieldSpec::exp_spectral(a.cst, a.range, a.components, 0),
        replicates: a.replicates,
        kernel: a.kernel.kernel(2)?,
        h: a.bandwidth.rule(2)?.bandwidth(lat.n()),
        rho: a.rho,
        paper_faithful: a.paper_faithful,
        clamp_observations: a.clamp_observations,
        threshold: a.threshold,
        eta_source,
        seed: a.seed,
    };
    let res = imaging::denoise_experiment(&original, &config)?;
    let mut out = Output::new(&a.out);
    out.add("original.pgm", res.original.to_pgm());
    out.add("noisy.pgm", res.noisy.to_pgm());
    out.add("restored_mean.pgm", res.restored_mean.to_pgm());
    out.add("pvalues.pgm", res.pvalue_image().to_pgm());
    out.add("pvalues.csv", res.pvalues.to_csv());
    let summary = res.summary_csv();
    out.add("summary.csv", summary.clone());
    out.write(manifest)?;
    print!("{summary}");
    Ok(())
}

fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let cmd = Cli::command();
    let args = match config::find_config(&args) {
        Some(path) => {
            let text = fs::read_to_string(&path)?;
            let entries = config::parse(&text).map_err(CliError::Usage)?;
            config::splice(&cmd, args, &entries).map_err(CliError::Usage)?
        }
        None => args,
    };
    let matches = cmd.clone().args_override_self(true).try_get_matches_from(args).unwrap_or_else(|e| e.exit());
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let (name, sub_m) = matches.subcommand().expect("subcommand is required");
    let manifest = config::canonical(name, cmd.find_subcommand(name).expect("parsed"), sub_m);

    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::SimulateField(a) => simulate_field(a, &manifest),
        Command::Estimate(a) => estimate(a, &manifest),
        Command::Eta(a) => eta(a, &manifest),
        Command::CheckCondition(a) => check_condition(a, &manifest),
        Command::CltStudy(a) => clt_study(a, &manifest),
        Command::BiasStudy(a) => bias_study(a, &manifest),
        Command::Denoise(a) => denoise(a, &manifest),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
