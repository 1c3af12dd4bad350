//! Gray-level images and the denoising experiment.
//!
//! Images are real-valued while in use; quantization to 8 bits happens only
//! when writing PGM. Pixel `(row, col)` is the design point `((row+1)/n,
//! (col+1)/n)`, so an `n × n` image and a field on `Λ_n` (`d = 2`) share
//! the same linear layout.

use crate::error::{Error, Result};
use crate::field_sim::{simulate, Field, FieldSpec};
use crate::inference::{pvalue_map, EtaSource, PValueConfig, PValueMap};
use crate::kernel::Kernel;
use crate::lattice::Lattice;
use crate::par;
use crate::regression::{estimate_grid, Estimate};
use crate::rng::{labels, SeedPath};

static CAMERA64: &[u8] = include_bytes!("../assets/camera64.pgm");

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: values.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// The `d = 2` lattice of a square image.
    pub fn lattice(&self) -> Result<Lattice> {
        if self.width != self.height {
            return Err(Error::param(format!(
                "image is {}x{}, a lattice needs a square image",
                self.width, self.height
            )));
        }
        Lattice::new(self.width, 2)
    }

    /// Exported byte of a working value: clamp to `[0,255]`, round half up.
    pub fn quantize(v: f64) -> u8 {
        (v.clamp(0.0, 255.0) + 0.5).floor() as u8
    }

    /// Binary PGM with header `P5\n<w> <h>\n255\n`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.values.iter().map(|&v| Self::quantize(v)));
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_pgm())?;
        Ok(())
    }

    pub fn read_pgm_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        read_pgm(&std::fs::read(path)?)
    }

    pub fn from_field(f: &Field) -> Result<Self> {
        let lat = f.lattice();
        if lat.d() != 2 {
            return Err(Error::Unsupported(format!("image needs d = 2, field has d = {}", lat.d())));
        }
        GrayImage::new(lat.n(), lat.n(), f.values().to_vec())
    }
}

/// Parses binary PGM (`P5`, maxval 255). Comments may appear in the header.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected binary PGM magic P5, found '{magic}'")));
    }
    let mut number = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM {what} '{t}'")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!("PGM maxval {maxval}; only 255 is supported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM with zero size".into()));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format("missing whitespace after PGM maxval".into()));
    }
    let data = &bytes[pos + 1..];
    let len = width * height;
    if data.len() < len {
        return Err(Error::Format(format!(
            "truncated PGM payload: {} of {len} bytes",
            data.len()
        )));
    }
    GrayImage::new(width, height, data[..len].iter().map(|&b| b as f64).collect())
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    img.to_pgm()
}

/// `127.5·(1 + sin 2πx₁ · sin 2πx₂)` at the design points of `Λ_n`.
pub fn synth_sinusoid(n: usize) -> Result<GrayImage> {
    if n < 2 {
        return Err(Error::param("sinusoid needs n >= 2"));
    }
    let lat = Lattice::new(n, 2)?;
    let tau = 2.0 * std::f64::consts::PI;
    let values = (0..lat.len())
        .map(|k| {
            let x = lat.design_point_linear(k);
            127.5 * (1.0 + (tau * x[0]).sin() * (tau * x[1]).sin())
        })
        .collect();
    GrayImage::new(n, n, values)
}

/// Pixelwise `img + ε`, unclamped.
pub fn add_noise(img: &GrayImage, f: &Field) -> Result<GrayImage> {
    let lat = f.lattice();
    if lat.d() != 2 || lat.n() != img.width || lat.n() != img.height {
        return Err(Error::param(format!(
            "noise on n={} d={} does not match a {}x{} image",
            lat.n(),
            lat.d(),
            img.width,
            img.height
        )));
    }
    let values = img.values.iter().zip(f.values()).map(|(a, b)| a + b).collect();
    GrayImage::new(img.width, img.height, values)
}

/// Bundled 64×64 8-bit test photograph (public domain).
pub fn bundled_photo() -> GrayImage {
    read_pgm(CAMERA64).expect("bundled photo is valid PGM")
}

#[derive(Debug, Clone)]
pub struct DenoiseConfig {
    /// Noise generator; its seed is replaced per image.
    pub noise: FieldSpec,
    /// Images in the reference mean.
    pub replicates: usize,
    pub kernel: Kernel,
    pub h: f64,
    pub rho: Option<usize>,
    /// Include-self means with no inflation correction.
    pub paper_faithful: bool,
    pub clamp_observations: bool,
    pub threshold: f64,
    pub eta_source: EtaSource,
    pub seed: u64,
}

impl DenoiseConfig {
    pub fn pvalue_config(&self) -> PValueConfig {
        let mut c = PValueConfig::new(self.kernel.clone(), self.h);
        c.rho = self.rho;
        c.threshold = self.threshold;
        c.eta_source = self.eta_source;
        if self.paper_faithful {
            c = c.paper_faithful();
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub original: GrayImage,
    /// The target realization.
    pub noisy: GrayImage,
    /// Pointwise mean of all restorations.
    pub restored_mean: GrayImage,
    /// Target restoration first, then the replicates.
    pub restorations: Vec<Estimate>,
    pub pvalues: PValueMap,
    pub rho: usize,
    pub seed: u64,
}

impl DenoiseOutput {
    pub fn pvalue_image(&self) -> GrayImage {
        self.pvalues.to_image().expect("denoising runs on d = 2")
    }

    /// Two-column `key,value` summary.
    pub fn summary_csv(&self) -> String {
        let p = &self.pvalues;
        let (ai, ci) = p.interior_counts();
        let (aa, ca) = p.all_counts();
        let (ab, cb) = p.boundary_counts();
        let frac = |a: usize, c: usize| {
            if c == 0 {
                "nan".to_string()
            } else {
                format!("{}", a as f64 / c as f64)
            }
        };
        let raw = p.eta_estimate.map_or("nan".to_string(), |e| e.value.to_string());
        let rows = [
            ("threshold", p.threshold.to_string()),
            ("fraction_interior_above", frac(ai, ci)),
            ("interior_above", ai.to_string()),
            ("interior_points", ci.to_string()),
            ("fraction_boundary_above", frac(ab, cb)),
            ("boundary_above", ab.to_string()),
            ("boundary_points", cb.to_string()),
            ("fraction_all_above", frac(aa, ca)),
            ("eta", p.eta.to_string()),
            ("eta_hat_raw", raw),
            ("rho", self.rho.to_string()),
            ("h", p.h.to_string()),
            ("sigma2", p.sigma2.to_string()),
            ("mean_policy", p.policy.to_string()),
            ("mean_size", p.replicates.to_string()),
            ("inflation", p.inflation.to_string()),
            ("corrected", p.corrected.to_string()),
            ("seed", self.seed.to_string()),
        ];
        let mut out = String::from("key,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

/// Noisy copies of `original`, their restorations, and the p-value map of
/// the target against the reference mean.
///
/// Leave-one-out simulates one target and `replicates` further images;
/// paper-faithful mode simulates `replicates` images in total and takes the
/// first as target.
pub fn denoise_experiment(original: &GrayImage, config: &DenoiseConfig) -> Result<DenoiseOutput> {
    let lat = original.lattice()?;
    config.noise.validate(2)?;
    if config.replicates < 2 {
        return Err(Error::param("denoising needs at least two replicates"));
    }
    let root = SeedPath::root(config.seed);
    let reps = root.child(labels::REPLICATE);
    let mut seeds = Vec::with_capacity(config.replicates + 1);
    if !config.paper_faithful {
        seeds.push(root.child(labels::TARGET).key());
    }
    seeds.extend((0..config.replicates as u64).map(|r| reps.child(r).key()));

    let observe = |s: u64| -> Result<Vec<f64>> {
        let eps = simulate(&config.noise.with_seed(s), &lat)?;
        let noisy = add_noise(original, &eps)?;
        let mut y = noisy.values;
        if config.clamp_observations {
            y.iter_mut().for_each(|v| *v = v.clamp(0.0, 255.0));
        }
        Ok(y)
    };
    let mut obs = par::map_range(seeds.len(), |j| observe(seeds[j]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let target = obs.remove(0);
    let pcfg = config.pvalue_config();
    let pvalues = pvalue_map(&target, &obs, &lat, &pcfg)?;

    let mut restorations = Vec::with_capacity(obs.len() + 1);
    restorations.push(estimate_grid(&target, &lat, &config.kernel, config.h)?);
    for y in &obs {
        restorations.push(estimate_grid(y, &lat, &config.kernel, config.h)?);
    }
    let inv = 1.0 / restorations.len() as f64;
    let mean: Vec<f64> = (0..lat.len())
        .map(|i| inv * restorations.iter().map(|e| e.values()[i]).sum::<f64>())
        .collect();
    let n = lat.n();
    Ok(DenoiseOutput {
        original: original.clone(),
        noisy: GrayImage::new(n, n, target)?,
        restored_mean: GrayImage::new(n, n, mean)?,
        restorations,
        pvalues,
        rho: pcfg.rho.unwrap_or_else(|| crate::dependence::default_rho(n)),
        seed: config.seed,
    })
}
