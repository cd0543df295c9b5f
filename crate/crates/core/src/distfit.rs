//! Maximum-likelihood fits of lognormal, inverse Gaussian and Burr XII
//! models to positive (linear-scale) samples, plus CDFs, samplers and the
//! Kolmogorov-Smirnov statistic used to pick a family.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("argument outside the distribution's domain: {0}")]
    DomainError(String),
    #[error("sample {index} is not positive: {value}")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
    #[error("simplex search did not converge from any start")]
    NoConvergence,
    #[error("no candidate family could be fitted")]
    NoFamilyFitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Lognormal,
    InverseGaussian,
    Burr,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Lognormal, Family::InverseGaussian, Family::Burr];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lognormal => "lognormal",
            Family::InverseGaussian => "inverse_gaussian",
            Family::Burr => "burr",
        }
    }

    pub fn fit(self, samples: &[f64]) -> Result<FitResult, FitError> {
        match self {
            Family::Lognormal => fit_lognormal(samples),
            Family::InverseGaussian => fit_inverse_gaussian(samples),
            Family::Burr => fit_burr(samples),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lognormal" => Ok(Family::Lognormal),
            "inverse_gaussian" | "ig" => Ok(Family::InverseGaussian),
            "burr" | "burr_xii" => Ok(Family::Burr),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

/// A fitted model and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    /// Log-mean and log-standard deviation.
    Lognormal { mu: f64, sigma: f64 },
    /// Mean and shape.
    InverseGaussian { mu: f64, lambda: f64 },
    /// Scale `alpha`, shapes `c` and `k`.
    Burr { alpha: f64, c: f64, k: f64 },
}

impl ModelKind {
    pub fn family(&self) -> Family {
        match self {
            ModelKind::Lognormal { .. } => Family::Lognormal,
            ModelKind::InverseGaussian { .. } => Family::InverseGaussian,
            ModelKind::Burr { .. } => Family::Burr,
        }
    }

    /// Parameters in declaration order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            ModelKind::Lognormal { mu, sigma } => vec![mu, sigma],
            ModelKind::InverseGaussian { mu, lambda } => vec![mu, lambda],
            ModelKind::Burr { alpha, c, k } => vec![alpha, c, k],
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            ModelKind::Lognormal { mu, sigma } => mu.is_finite() && ok(sigma),
            ModelKind::InverseGaussian { mu, lambda } => ok(mu) && ok(lambda),
            ModelKind::Burr { alpha, c, k } => ok(alpha) && ok(c) && ok(k),
        };
        if valid {
            Ok(())
        } else {
            Err(FitError::DomainError(format!("invalid parameters {self:?}")))
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64, FitError> {
        match *self {
            ModelKind::Lognormal { mu, sigma } => cdf_lognormal(x, mu, sigma),
            ModelKind::InverseGaussian { mu, lambda } => cdf_inverse_gaussian(x, mu, lambda),
            ModelKind::Burr { alpha, c, k } => cdf_burr(x, alpha, c, k),
        }
    }

    /// Log density at `x > 0`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let lx = x.ln();
        match *self {
            ModelKind::Lognormal { mu, sigma } => {
                let z = (lx - mu) / sigma;
                -lx - sigma.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
            }
            ModelKind::InverseGaussian { mu, lambda } => {
                0.5 * (lambda / (2.0 * PI)).ln() - 1.5 * lx - lambda * (x - mu).powi(2) / (2.0 * mu * mu * x)
            }
            ModelKind::Burr { alpha, c, k } => {
                let t = lx - alpha.ln();
                c.ln() + k.ln() - alpha.ln() + (c - 1.0) * t - (k + 1.0) * softplus(c * t)
            }
        }
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ModelKind::Lognormal { mu, sigma } => sample_lognormal(rng, mu, sigma),
            ModelKind::InverseGaussian { mu, lambda } => sample_inverse_gaussian(rng, mu, lambda),
            ModelKind::Burr { alpha, c, k } => sample_burr(rng, alpha, c, k),
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub log_likelihood: f64,
    pub ks_statistic: f64,
    pub n_samples: usize,
}

impl FitResult {
    fn new(model: ModelKind, samples: &[f64]) -> Result<Self, FitError> {
        model.validate()?;
        Ok(Self {
            model,
            log_likelihood: model.log_likelihood(samples),
            ks_statistic: ks_statistic(samples, |x| model.cdf(x).unwrap_or(f64::NAN)),
            n_samples: samples.len(),
        })
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `exp(t^2) * erfc(t)` for `t >= 0`.
fn erfcx(t: f64) -> f64 {
    if t < 25.0 {
        return (t * t).exp() * libm::erfc(t);
    }
    let s = 1.0 / (2.0 * t * t);
    (1.0 - s + 3.0 * s * s - 15.0 * s * s * s) / (t * PI.sqrt())
}

#[inline]
fn softplus(t: f64) -> f64 {
    if t > 35.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

fn check_x(x: f64) -> Result<(), FitError> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(FitError::DomainError(format!("x must be positive, got {x}")))
    }
}

pub fn cdf_lognormal(x: f64, mu: f64, sigma: f64) -> Result<f64, FitError> {
    check_x(x)?;
    ModelKind::Lognormal { mu, sigma }.validate()?;
    Ok(std_normal_cdf((x.ln() - mu) / sigma))
}

/// Standard inverse Gaussian CDF,
/// `Phi(sqrt(l/x)(x/m - 1)) + exp(2l/m) Phi(-sqrt(l/x)(x/m + 1))`.
///
/// A commonly printed variant reads `exp(2m/l)` and `sqrt(l x)(x m - 1)`;
/// that form is not a distribution function and is not used here.
pub fn cdf_inverse_gaussian(x: f64, mu: f64, lambda: f64) -> Result<f64, FitError> {
    check_x(x)?;
    ModelKind::InverseGaussian { mu, lambda }.validate()?;
    let r = (lambda / x).sqrt();
    let first = std_normal_cdf(r * (x / mu - 1.0));
    // exp(2l/m) Phi(-b) overflows as written; fold the exponentials together:
    // exp(2l/m - b^2/2) = exp(-l (x - m)^2 / (2 m^2 x)).
    let b = r * (x / mu + 1.0);
    let second = 0.5 * (-lambda * (x - mu).powi(2) / (2.0 * mu * mu * x)).exp() * erfcx(b / SQRT_2);
    Ok((first + second).clamp(0.0, 1.0))
}

pub fn cdf_burr(x: f64, alpha: f64, c: f64, k: f64) -> Result<f64, FitError> {
    check_x(x)?;
    ModelKind::Burr { alpha, c, k }.validate()?;
    if x.is_infinite() {
        return Ok(1.0);
    }
    let t = c * (x.ln() - alpha.ln());
    Ok(-(-k * softplus(t)).exp_m1())
}

pub fn sample_lognormal<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (mu + sigma * z).exp()
}

/// Michael-Schucany-Haas transform.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mu: f64, lambda: f64) -> f64 {
    let nu: f64 = rng.sample(StandardNormal);
    let y = nu * nu;
    let my = mu * y;
    let x = mu + mu * my / (2.0 * lambda) - mu / (2.0 * lambda) * (4.0 * lambda * my + my * my).sqrt();
    let u: f64 = rng.random();
    if u <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// Closed-form quantile at a uniform draw in (0, 1).
pub fn sample_burr<R: Rng + ?Sized>(rng: &mut R, alpha: f64, c: f64, k: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    alpha * ((-(-u).ln_1p() / k).exp_m1()).powf(1.0 / c)
}

/// `sup |F_n - F|` over the discontinuities of the empirical CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d.clamp(0.0, 1.0)
}

fn check_samples(samples: &[f64], need: usize) -> Result<(), FitError> {
    if samples.len() < need {
        return Err(FitError::TooFewSamples { need, got: samples.len() });
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(FitError::NonPositiveSample { index, value });
    }
    Ok(())
}

pub fn fit_lognormal(samples: &[f64]) -> Result<FitResult, FitError> {
    check_samples(samples, 2)?;
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n;
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n).sqrt();
    if !(sigma > 1e-12 * mu.abs().max(1.0)) {
        return Err(FitError::DegenerateFit("zero log-variance"));
    }
    FitResult::new(ModelKind::Lognormal { mu, sigma }, samples)
}

pub fn fit_inverse_gaussian(samples: &[f64]) -> Result<FitResult, FitError> {
    check_samples(samples, 2)?;
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let inv_sum: f64 = samples.iter().map(|x| 1.0 / x).sum();
    let s = inv_sum - n / mu;
    // Equal samples leave rounding noise in `s`.
    if !(s > 1e-12 * inv_sum) {
        return Err(FitError::DegenerateFit("zero reciprocal spread"));
    }
    FitResult::new(ModelKind::InverseGaussian { mu, lambda: n / s }, samples)
}

/// Knobs of the Burr simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurrFitOptions {
    pub seed: u64,
    pub starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Starts ending above this diameter count as unconverged.
    pub accept_diameter: f64,
}

impl Default for BurrFitOptions {
    fn default() -> Self {
        Self { seed: 0x5eed_b0bb, starts: 8, max_iterations: 2000, tolerance: 1e-8, accept_diameter: 1e-4 }
    }
}

pub fn fit_burr(samples: &[f64]) -> Result<FitResult, FitError> {
    fit_burr_with(samples, &BurrFitOptions::default())
}

/// Simplex search over `(ln alpha, ln c, ln k)` from jittered starts around a
/// log-logistic initializer (`k = 1`, `alpha` = median, `c` from the spread
/// of `ln x`).
pub fn fit_burr_with(samples: &[f64], options: &BurrFitOptions) -> Result<FitResult, FitError> {
    check_samples(samples, 10)?;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let sum_log: f64 = logs.iter().sum();
    let mean = sum_log / n;
    let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return Err(FitError::DegenerateFit("zero log-variance"));
    }
    let mut sorted = logs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let init = [median, (PI / (3f64.sqrt() * sd)).ln(), 0.0];

    let neg_ll = |theta: &[f64; 3]| -> f64 {
        let (la, c, k) = (theta[0], theta[1].exp(), theta[2].exp());
        if !(c.is_finite() && k.is_finite() && c > 0.0 && k > 0.0) {
            return f64::INFINITY;
        }
        let sp: f64 = logs.iter().map(|&l| softplus(c * (l - la))).sum();
        let ll = n * (theta[1] + theta[2] - la) + (c - 1.0) * (sum_log - n * la) - (k + 1.0) * sp;
        if ll.is_nan() {
            f64::INFINITY
        } else {
            -ll
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let jitter = Normal::new(0.0, 0.5).expect("valid normal");
    let mut best: Option<([f64; 3], f64)> = None;
    for s in 0..options.starts.max(1) {
        let mut start = init;
        if s > 0 {
            for v in &mut start {
                *v += jitter.sample(&mut rng);
            }
        }
        let out = nelder_mead(&neg_ll, start, 0.25, options.max_iterations, options.tolerance);
        if out.diameter > options.accept_diameter || !out.value.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, v)| out.value < v) {
            best = Some((out.point, out.value));
        }
    }
    let (theta, _) = best.ok_or(FitError::NoConvergence)?;
    let model = ModelKind::Burr { alpha: theta[0].exp(), c: theta[1].exp(), k: theta[2].exp() };
    FitResult::new(model, samples)
}

struct Simplex {
    point: [f64; 3],
    value: f64,
    diameter: f64,
}

fn diameter(vertices: &[[f64; 3]; 4]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let dist = (0..3).map(|k| (vertices[i][k] - vertices[j][k]).powi(2)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

fn nelder_mead(f: &impl Fn(&[f64; 3]) -> f64, start: [f64; 3], step: f64, max_iter: usize, tol: f64) -> Simplex {
    let mut v = [start; 4];
    for i in 0..3 {
        v[i + 1][i] += step;
    }
    let mut fv = v.map(|p| f(&p));
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = a[k] + t * (b[k] - a[k]);
        }
        out
    };
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        v = order.map(|i| v[i]);
        fv = order.map(|i| fv[i]);
        if diameter(&v) < tol {
            break;
        }
        let mut centroid = [0.0; 3];
        for p in &v[..3] {
            for k in 0..3 {
                centroid[k] += p[k] / 3.0;
            }
        }
        let worst = v[3];
        let reflected = lerp(&centroid, &worst, -1.0);
        let fr = f(&reflected);
        if fr < fv[0] {
            let expanded = lerp(&centroid, &worst, -2.0);
            let fe = f(&expanded);
            if fe < fr {
                (v[3], fv[3]) = (expanded, fe);
            } else {
                (v[3], fv[3]) = (reflected, fr);
            }
        } else if fr < fv[2] {
            (v[3], fv[3]) = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < fv[3] {
                let p = lerp(&centroid, &worst, -0.5);
                (p, f(&p))
            } else {
                let p = lerp(&centroid, &worst, 0.5);
                (p, f(&p))
            };
            if fc < fv[3].min(fr) {
                (v[3], fv[3]) = (contracted, fc);
            } else {
                for i in 1..4 {
                    v[i] = lerp(&v[0], &v[i], 0.5);
                    fv[i] = f(&v[i]);
                }
            }
        }
    }
    let best = (0..4).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).expect("four vertices");
    Simplex { point: v[best], value: fv[best], diameter: diameter(&v) }
}

/// Outcome of fitting several families.
#[derive(Debug, Clone, PartialEq)]
pub struct BestFit {
    pub best: FitResult,
    pub fits: Vec<FitResult>,
    pub skipped: Vec<(Family, FitError)>,
}

/// Lowest KS statistic wins; within 1e-6, the higher log-likelihood.
/// Families that fail to fit are skipped.
pub fn best_fit(samples: &[f64], candidates: &[Family]) -> Result<BestFit, FitError> {
    check_samples(samples, 10)?;
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for &family in candidates {
        match family.fit(samples) {
            Ok(fit) => fits.push(fit),
            Err(e) => skipped.push((family, e)),
        }
    }
    let mut best: Option<&FitResult> = None;
    for fit in &fits {
        best = match best {
            None => Some(fit),
            Some(b) => {
                let tie = (fit.ks_statistic - b.ks_statistic).abs() <= 1e-6;
                if (tie && fit.log_likelihood > b.log_likelihood) || (!tie && fit.ks_statistic < b.ks_statistic) {
                    Some(fit)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.cloned().ok_or(FitError::NoFamilyFitted)?;
    Ok(BestFit { best, fits, skipped })
}
