//! One-dimensional distributions on `[0, 1)`: the wrapped normal `Q_β`, the wavy
//! family `T_{h,β}`, its conditional variants `S` and `S'`, periodic `T^D_h`, and the
//! discrete cosine-squared `Z_k`, plus samplers, compression, sums mod 1, and
//! statistical distances.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};
use crate::numerics::{mod1, PrecisionContext};

/// Rejection loops give up after this many draws.
pub const MAX_REJECTIONS: u64 = 1_000_000;

/// Series truncation for `Q_β`-type sums: the dropped tail is below `2^-64`.
pub fn k_cut(beta: f64) -> i64 {
    (64.0 * LN_2 / PI * beta).sqrt().ceil() as i64 + 2
}

/// `Q_β(r) = Σ_{|k| ≤ kCut} β^{-1/2} exp(-(π/β)(r-k)^2)` for `r` reduced mod 1.
pub fn q_density(beta: f64, r: f64, kcut: i64) -> f64 {
    let r = mod1(r);
    let s = 1.0 / beta.sqrt();
    (-kcut..=kcut)
        .map(|k| (-(PI / beta) * (r - k as f64).powi(2)).exp())
        .sum::<f64>()
        * s
}

/// Normal variate with variance `beta / 2π`.
pub fn wrapped_normal_offset<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * (beta / (2.0 * PI)).sqrt()
}

/// Shape `D` of a periodic distribution `T^D_h(r) = D(rh mod 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeriodicShape {
    /// `D(r) = 2 cos^2(π r)`.
    CosSquared,
    /// `D(r) = 1`.
    Flat,
}

impl PeriodicShape {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Self::CosSquared => 2.0 * (PI * r).cos().powi(2),
            Self::Flat => 1.0,
        }
    }

    pub fn sup(self) -> f64 {
        match self {
            Self::CosSquared => 2.0,
            Self::Flat => 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Result<f64> {
        for _ in 0..MAX_REJECTIONS {
            let r: f64 = rng.random();
            if rng.random::<f64>() * self.sup() < self.eval(r) {
                return Ok(r);
            }
        }
        Err(Error::SamplerStall(MAX_REJECTIONS))
    }
}

/// Tagged description of a density on `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Uniform,
    Q {
        beta: f64,
    },
    T {
        h: f64,
        beta: f64,
    },
    /// `T_{h,β}(a + r/h̃)` renormalized; `h` integral.
    S {
        h_tilde: f64,
        h: f64,
        beta: f64,
        a: f64,
    },
    /// `Q_β(a·h + r mod 1)`; `h` integral.
    SPrime {
        h: f64,
        beta: f64,
        a: f64,
    },
    TD {
        h: f64,
        shape: PeriodicShape,
    },
    /// `Pr(z) ∝ cos^2(π k z / n)` on `{0, …, n-1}`, embedded as `z / n`.
    Zk {
        k: u64,
        n: u64,
    },
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if !(h >= 1.0 && h.is_finite()) {
        return domain(format!("h must be at least 1, got {h}"));
    }
    Ok(())
}

fn check_integral_h(h: f64) -> Result<()> {
    check_h(h)?;
    if h.fract() != 0.0 {
        return domain(format!("h must be an integer here, got {h}"));
    }
    Ok(())
}

fn check_unit(a: f64) -> Result<()> {
    if !(0.0..1.0).contains(&a) {
        return domain(format!("a must lie in [0,1), got {a}"));
    }
    Ok(())
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform => Ok(()),
            Self::Q { beta } => check_beta(beta),
            Self::T { h, beta } => {
                check_h(h)?;
                check_beta(beta)
            }
            Self::S {
                h_tilde,
                h,
                beta,
                a,
            } => {
                check_integral_h(h)?;
                check_h(h_tilde)?;
                check_beta(beta)?;
                check_unit(a)
            }
            Self::SPrime { h, beta, a } => {
                check_integral_h(h)?;
                check_beta(beta)?;
                check_unit(a)
            }
            Self::TD { h, .. } => check_h(h),
            Self::Zk { k, n } => {
                if n == 0 || k >= n {
                    return domain(format!("Zk needs 0 <= k < N, got k={k}, N={n}"));
                }
                Ok(())
            }
        }
    }

    /// Short tag used in reports.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Uniform => "U",
            Self::Q { .. } => "Q",
            Self::T { .. } => "T",
            Self::S { .. } => "S",
            Self::SPrime { .. } => "Sprime",
            Self::TD { .. } => "TD",
            Self::Zk { .. } => "Zk",
        }
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "U"),
            Self::Q { beta } => write!(f, "Q:{beta}"),
            Self::T { h, beta } => write!(f, "T:{h}:{beta}"),
            Self::S {
                h_tilde,
                h,
                beta,
                a,
            } => write!(f, "S:{h_tilde}:{h}:{beta}:{a}"),
            Self::SPrime { h, beta, a } => write!(f, "Sprime:{h}:{beta}:{a}"),
            Self::TD {
                h,
                shape: PeriodicShape::CosSquared,
            } => write!(f, "TD:{h}"),
            Self::TD {
                h,
                shape: PeriodicShape::Flat,
            } => write!(f, "TDflat:{h}"),
            Self::Zk { k, n } => write!(f, "Zk:{k}:{n}"),
        }
    }
}

/// Parses the compact grammar `U`, `Q:β`, `T:h:β`, `TD:h`, `Zk:k:N`
/// (also `S:h̃:h:β:a`, `Sprime:h:β:a`, `TDflat:h`).
impl FromStr for DensitySpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Parse(format!("bad distribution spec {s:?}"));
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(bad)?
                .parse::<f64>()
                .map_err(|_| bad())
        };
        let int = |i: usize| -> Result<u64> {
            parts
                .get(i)
                .ok_or_else(bad)?
                .parse::<u64>()
                .map_err(|_| bad())
        };
        let arity = |n: usize| if parts.len() == n { Ok(()) } else { Err(bad()) };
        let spec = match parts[0] {
            "U" => {
                arity(1)?;
                Self::Uniform
            }
            "Q" => {
                arity(2)?;
                Self::Q { beta: num(1)? }
            }
            "T" => {
                arity(3)?;
                Self::T {
                    h: num(1)?,
                    beta: num(2)?,
                }
            }
            "S" => {
                arity(5)?;
                Self::S {
                    h_tilde: num(1)?,
                    h: num(2)?,
                    beta: num(3)?,
                    a: num(4)?,
                }
            }
            "Sprime" => {
                arity(4)?;
                Self::SPrime {
                    h: num(1)?,
                    beta: num(2)?,
                    a: num(3)?,
                }
            }
            "TD" => {
                arity(2)?;
                Self::TD {
                    h: num(1)?,
                    shape: PeriodicShape::CosSquared,
                }
            }
            "TDflat" => {
                arity(2)?;
                Self::TD {
                    h: num(1)?,
                    shape: PeriodicShape::Flat,
                }
            }
            "Zk" => {
                arity(3)?;
                Self::Zk {
                    k: int(1)?,
                    n: int(2)?,
                }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Composite-midpoint rule for `∫_0^1 f`.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, points: usize) -> f64 {
    let w = 1.0 / points as f64;
    (0..points).map(|i| f((i as f64 + 0.5) * w)).sum::<f64>() * w
}

/// Something that draws values in `[0, 1)`.
pub trait Sampler {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64>;
}

impl<S: Sampler + ?Sized> Sampler for &S {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        (**self).sample(rng)
    }
}

impl<S: Sampler + ?Sized> Sampler for Box<S> {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        (**self).sample(rng)
    }
}

/// A validated [`DensitySpec`] with its normalization cached.
#[derive(Clone, Debug)]
pub struct Density {
    spec: DensitySpec,
    k_cut: i64,
    norm: f64,
    zk_cdf: Vec<f64>,
}

impl Density {
    pub fn new(spec: DensitySpec, ctx: &PrecisionContext) -> Result<Self> {
        spec.validate()?;
        let k_cut = match spec {
            DensitySpec::Q { beta }
            | DensitySpec::T { beta, .. }
            | DensitySpec::S { beta, .. }
            | DensitySpec::SPrime { beta, .. } => k_cut(beta),
            _ => 0,
        };
        let mut d = Self {
            spec,
            k_cut,
            norm: 1.0,
            zk_cdf: Vec::new(),
        };
        let needs_quadrature = match d.spec {
            DensitySpec::T { h, .. } | DensitySpec::TD { h, .. } => h.fract() != 0.0,
            DensitySpec::S { .. } => true,
            _ => false,
        };
        if needs_quadrature {
            d.norm = midpoint(|r| d.raw(r), ctx.quadrature_points);
        }
        if let DensitySpec::Zk { k, n } = d.spec {
            let mut acc = 0.0;
            d.zk_cdf = (0..n)
                .map(|z| {
                    acc += (PI * (k as f64) * (z as f64) / n as f64).cos().powi(2);
                    acc
                })
                .collect();
            d.norm = acc;
        }
        Ok(d)
    }

    /// Shorthand for [`Density::new`] with the default precision context.
    pub fn of(spec: DensitySpec) -> Result<Self> {
        Self::new(spec, &PrecisionContext::default())
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn k_cut(&self) -> i64 {
        self.k_cut
    }

    /// Normalizing constant applied to the raw formula.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    fn raw(&self, r: f64) -> f64 {
        match self.spec {
            DensitySpec::Uniform => 1.0,
            DensitySpec::Q { beta } => q_density(beta, r, self.k_cut),
            DensitySpec::T { h, beta } => q_density(beta, mod1(r * h), self.k_cut),
            DensitySpec::S {
                h_tilde,
                h,
                beta,
                a,
            } => q_density(beta, mod1((a + r / h_tilde) * h), self.k_cut),
            DensitySpec::SPrime { h, beta, a } => q_density(beta, mod1(a * h + r), self.k_cut),
            DensitySpec::TD { h, shape } => shape.eval(mod1(r * h)),
            DensitySpec::Zk { k, n } => {
                let z = ((r * n as f64).floor() as u64).min(n - 1);
                n as f64 * (PI * (k as f64) * (z as f64) / n as f64).cos().powi(2)
            }
        }
    }

    /// Density value at `r ∈ [0, 1)`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return domain(format!("density argument must lie in [0,1), got {r}"));
        }
        Ok(self.raw(r) / self.norm)
    }

    /// Probability of `z` for `Zk`.
    pub fn zk_probability(&self, z: u64) -> Option<f64> {
        let DensitySpec::Zk { k, n } = self.spec else {
            return None;
        };
        (z < n).then(|| (PI * (k as f64) * (z as f64) / n as f64).cos().powi(2) / self.norm)
    }

    /// Draws `z ∈ {0, …, N-1}` from `Zk` by inversion.
    pub fn sample_zk_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        if self.zk_cdf.is_empty() {
            return None;
        }
        let u = rng.random::<f64>() * self.norm;
        let idx = self.zk_cdf.partition_point(|&c| c <= u);
        Some((idx as u64).min(self.zk_cdf.len() as u64 - 1))
    }

    fn sample_t<R: Rng + ?Sized>(h: f64, beta: f64, rng: &mut R) -> Result<f64> {
        let hc = h.ceil() as u64;
        for _ in 0..MAX_REJECTIONS {
            let x = rng.random_range(0..hc) as f64;
            let y = mod1(wrapped_normal_offset(beta, rng));
            let r = (x + y) / h;
            if r < 1.0 {
                return Ok(r);
            }
        }
        Err(Error::SamplerStall(MAX_REJECTIONS))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self.spec {
            DensitySpec::Uniform => Ok(rng.random()),
            DensitySpec::Q { beta } => Ok(mod1(wrapped_normal_offset(beta, rng))),
            DensitySpec::T { h, beta } => Self::sample_t(h, beta, rng),
            DensitySpec::SPrime { h, beta, a } => {
                Ok(mod1(wrapped_normal_offset(beta, rng) - a * h))
            }
            DensitySpec::S { beta, .. } => {
                let bound = q_density(beta, 0.0, self.k_cut);
                for _ in 0..MAX_REJECTIONS {
                    let r: f64 = rng.random();
                    if rng.random::<f64>() * bound < self.raw(r) {
                        return Ok(r);
                    }
                }
                Err(Error::SamplerStall(MAX_REJECTIONS))
            }
            DensitySpec::TD { h, shape } => {
                for _ in 0..MAX_REJECTIONS {
                    let r: f64 = rng.random();
                    if rng.random::<f64>() * shape.sup() < shape.eval(mod1(r * h)) {
                        return Ok(r);
                    }
                }
                Err(Error::SamplerStall(MAX_REJECTIONS))
            }
            DensitySpec::Zk { n, .. } => {
                Ok(self.sample_zk_index(rng).unwrap_or(0) as f64 / n as f64)
            }
        }
    }

    /// `(r, density)` rows at `points` midpoints, header `r,density`, 12 decimals.
    pub fn to_csv(&self, points: usize) -> String {
        let mut out = String::from("r,density\n");
        for i in 0..points {
            let r = (i as f64 + 0.5) / points as f64;
            out.push_str(&format!("{:.12},{:.12}\n", r, self.raw(r) / self.norm));
        }
        out
    }
}

impl Sampler for Density {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        self.sample_with(rng)
    }
}

/// Compression `C_δ(X)`: density proportional to `X(δ r mod 1)`.
pub struct Compressed<S> {
    inner: S,
    delta: f64,
}

pub fn compress<S: Sampler>(inner: S, delta: f64) -> Result<Compressed<S>> {
    if !(delta >= 1.0 && delta.is_finite()) {
        return domain(format!(
            "compression factor must be at least 1, got {delta}"
        ));
    }
    Ok(Compressed { inner, delta })
}

impl<S: Sampler> Sampler for Compressed<S> {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        let hc = self.delta.ceil() as u64;
        for _ in 0..MAX_REJECTIONS {
            let x = rng.random_range(0..hc) as f64;
            let y = self.inner.sample(rng)?;
            let r = (x + y) / self.delta;
            if r < 1.0 {
                return Ok(r);
            }
        }
        Err(Error::SamplerStall(MAX_REJECTIONS))
    }
}

/// `(a + b) mod 1` for independent draws.
pub struct SumMod1<A, B> {
    a: A,
    b: B,
}

pub fn convolve_mod1<A: Sampler, B: Sampler>(a: A, b: B) -> SumMod1<A, B> {
    SumMod1 { a, b }
}

impl<A: Sampler, B: Sampler> Sampler for SumMod1<A, B> {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        let x = self.a.sample(rng)?;
        let y = self.b.sample(rng)?;
        Ok(mod1(x + y))
    }
}

/// Uniform on `{0, 1/h, …, (h-1)/h}` plus a normal of variance `β/(2π h²)`, mod 1.
pub struct LatticePlusNormal {
    h: u64,
    beta: f64,
}

impl LatticePlusNormal {
    pub fn new(h: u64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if h == 0 {
            return domain("h must be positive");
        }
        Ok(Self { h, beta })
    }
}

impl Sampler for LatticePlusNormal {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        let x = rng.random_range(0..self.h) as f64 / self.h as f64;
        let y = wrapped_normal_offset(self.beta, rng) / self.h as f64;
        Ok(mod1(x + y))
    }
}

/// Values drawn from a sampler under a recorded seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn draw<S: Sampler + ?Sized>(sampler: &S, count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..count)
            .map(|_| sampler.sample(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values, seed })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One decimal value per line; the decimal form round-trips exactly.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|v| format!("{v}\n")).collect()
    }

    pub fn from_text(text: &str, seed: u64) -> Result<Self> {
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                let v: f64 = l
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad sample {l:?}")))?;
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::Parse(format!("sample outside [0,1): {l}")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values, seed })
    }
}

/// Exact-integral estimate with a quadrature error estimate.
#[derive(Clone, Copy, Debug)]
pub struct DistanceEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

/// `½∫|A - B|` by composite midpoint at `points`; the error estimate is the change
/// from halving the point count.
pub fn statistical_distance_exact(a: &Density, b: &Density, points: usize) -> DistanceEstimate {
    let f = |r: f64| (a.raw(r) / a.norm - b.raw(r) / b.norm).abs();
    let fine = 0.5 * midpoint(f, points.max(2));
    let coarse = 0.5 * midpoint(f, (points / 2).max(1));
    DistanceEstimate {
        value: fine,
        error_estimate: (fine - coarse).abs(),
    }
}

/// Proportions of `values` falling in each of `bins` equal-width bins of `[0, 1)`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let n = values.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return domain(format!("need at least 2 bins, got {bins}"));
    }
    Ok(())
}

/// `½ Σ_bins |p̂_a - p̂_b|`; bias grows like `bins / √count`.
pub fn statistical_distance_estimate(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if a.is_empty() || b.is_empty() {
        return domain("empty sample batch");
    }
    let (ha, hb) = (histogram(a, bins), histogram(b, bins));
    Ok(0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// `½ Σ_cells |p̂_a - p̂_b|` over a `bins × bins` grid on `[0, 1)²`.
pub fn joint_distance_estimate(a: &[(f64, f64)], b: &[(f64, f64)], bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if a.is_empty() || b.is_empty() {
        return domain("empty sample batch");
    }
    let cell = |&(x, y): &(f64, f64)| {
        let i = ((x * bins as f64) as usize).min(bins - 1);
        let j = ((y * bins as f64) as usize).min(bins - 1);
        i * bins + j
    };
    let hist = |v: &[(f64, f64)]| {
        let mut h = vec![0.0; bins * bins];
        for p in v {
            h[cell(p)] += 1.0 / v.len() as f64;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    Ok(0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Mass of `density` in each of `bins` equal-width bins.
pub fn bin_masses(density: &Density, bins: usize, points_per_bin: usize) -> Vec<f64> {
    let w = 1.0 / bins as f64;
    (0..bins)
        .map(|i| {
            midpoint(
                |t| density.raw((i as f64 + t) * w) / density.norm,
                points_per_bin,
            ) * w
        })
        .collect()
}

/// `½ Σ_bins |p̂ - ∫_bin density|`.
pub fn distance_to_density(samples: &[f64], density: &Density, bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if samples.is_empty() {
        return domain("empty sample batch");
    }
    let h = histogram(samples, bins);
    let m = bin_masses(density, bins, 64);
    Ok(0.5 * h.iter().zip(&m).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Pearson χ² test of `counts` against equal expected counts; returns the p-value.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let k = counts.len();
    if k < 2 || total == 0 {
        return 1.0;
    }
    let e = total as f64 / k as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let chi = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    1.0 - chi.cdf(stat)
}

/// Counts of `values` in `bins` equal-width bins of `[0, 1)`.
pub fn bin_counts(values: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    counts
}

/// `Pr(|X - μ| > t)` for a normal with standard deviation `sigma`.
pub fn normal_two_sided_tail(sigma: f64, t: f64) -> f64 {
    erfc(t / (sigma * std::f64::consts::SQRT_2))
}

/// Upper bound `√(2/π)(σ/t) e^{-t²/2σ²}` on the two-sided normal tail.
pub fn normal_tail_bound(sigma: f64, t: f64) -> f64 {
    (2.0 / PI).sqrt() * (sigma / t) * (-(t * t) / (2.0 * sigma * sigma)).exp()
}

/// `Σ_k e^{-π(k r + x)²}`, summed until terms fall below `1e-300`.
pub fn theta_sum(r: f64, x: f64) -> f64 {
    let center = (-x / r).round() as i64;
    let term = |k: i64| (-PI * (k as f64 * r + x).powi(2)).exp();
    let mut total = term(center);
    for dir in [-1i64, 1] {
        let mut k = center + dir;
        loop {
            let t = term(k);
            total += t;
            if t < 1e-300 && (k as f64 * r + x).abs() > 1.0 {
                break;
            }
            k += dir;
        }
    }
    total
}

/// `Σ_k e^{-π(b k + a x)²}` as a function of `x`.
pub fn scaled_theta(b: f64, a: f64, x: f64) -> f64 {
    theta_sum(b, a * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch<S: Sampler>(s: &S, n: usize, seed: u64) -> Vec<f64> {
        SampleBatch::draw(s, n, seed).unwrap().values
    }

    #[test]
    fn q_at_zero_matches_theta_series() {
        let d = Density::of(DensitySpec::Q { beta: 1.0 }).unwrap();
        let oracle = 1.0 + 2.0 * (-PI).exp() + 2.0 * (-4.0 * PI).exp();
        assert!((d.eval(0.0).unwrap() - oracle).abs() < 1e-4);
        assert!((d.eval(0.0).unwrap() - 1.086_434_811).abs() < 1e-8);
    }

    #[test]
    fn t_with_unit_h_is_q() {
        let q = Density::of(DensitySpec::Q { beta: 0.3 }).unwrap();
        let t = Density::of(DensitySpec::T { h: 1.0, beta: 0.3 }).unwrap();
        for i in 0..100 {
            let r = i as f64 / 100.0;
            assert_eq!(q.eval(r).unwrap(), t.eval(r).unwrap());
        }
    }

    #[test]
    fn t4_has_peaks_at_quarters() {
        let t = Density::of(DensitySpec::T { h: 4.0, beta: 0.05 }).unwrap();
        let eps = 1e-3;
        for &p in &[0.25, 0.5, 0.75] {
            let v = t.eval(p).unwrap();
            assert!(v > t.eval(p - eps).unwrap() && v > t.eval(p + eps).unwrap());
        }
        assert!(t.eval(0.0).unwrap() > t.eval(eps).unwrap());
        assert!(t.eval(0.0).unwrap() > t.eval(1.0 - eps).unwrap());
    }

    #[test]
    fn every_variant_integrates_to_one() {
        let specs = [
            DensitySpec::Uniform,
            DensitySpec::Q { beta: 0.05 },
            DensitySpec::Q { beta: 3.0 },
            DensitySpec::T { h: 4.0, beta: 0.05 },
            DensitySpec::T { h: 7.3, beta: 0.02 },
            DensitySpec::T { h: 2.5, beta: 0.4 },
            DensitySpec::S {
                h_tilde: 64.05,
                h: 64.0,
                beta: 0.1,
                a: 0.3,
            },
            DensitySpec::SPrime {
                h: 64.0,
                beta: 0.1,
                a: 0.3,
            },
            DensitySpec::TD {
                h: 3.0,
                shape: PeriodicShape::CosSquared,
            },
            DensitySpec::TD {
                h: 3.4,
                shape: PeriodicShape::CosSquared,
            },
            DensitySpec::Zk { k: 5, n: 64 },
            DensitySpec::Zk { k: 0, n: 256 },
        ];
        for spec in specs {
            let d = Density::of(spec.clone()).unwrap();
            let total = midpoint(|r| d.eval(r).unwrap(), 1 << 14);
            assert!((total - 1.0).abs() < 1e-6, "{spec}: {total}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Density::of(DensitySpec::Q { beta: 0.0 }).is_err());
        assert!(Density::of(DensitySpec::T { h: 0.5, beta: 0.1 }).is_err());
        assert!(Density::of(DensitySpec::Zk { k: 4, n: 4 }).is_err());
        assert!(Density::of(DensitySpec::SPrime {
            h: 2.5,
            beta: 0.1,
            a: 0.0
        })
        .is_err());
        let q = Density::of(DensitySpec::Q { beta: 1.0 }).unwrap();
        assert!(q.eval(1.0).is_err());
        assert!(q.eval(-0.1).is_err());
        assert!(compress(q, 0.5).is_err());
    }

    #[test]
    fn spec_grammar_roundtrips() {
        for s in [
            "U",
            "Q:0.5",
            "T:4:0.05",
            "TD:3",
            "Zk:3:256",
            "S:65:64:0.1:0.25",
            "Sprime:64:0.1:0.25",
        ] {
            let spec: DensitySpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<DensitySpec>().unwrap(), spec);
        }
        for s in ["", "X", "Q", "T:4", "T:0.5:0.1", "Zk:9:4", "Q:abc", "U:1"] {
            assert!(s.parse::<DensitySpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn k_cut_drops_negligible_tail() {
        for &beta in &[0.001, 0.1, 1.0, 10.0] {
            let k = k_cut(beta) as f64;
            let first_dropped = (-(PI / beta) * (k + 1.0 - 1.0).powi(2)).exp();
            assert!(first_dropped < 2f64.powi(-64));
        }
    }

    #[test]
    fn uniform_sample_mean() {
        let u = Density::of(DensitySpec::Uniform).unwrap();
        let v = batch(&u, 100_000, 1);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn t_sampler_matches_density() {
        let t = Density::of(DensitySpec::T {
            h: 16.0,
            beta: 0.01,
        })
        .unwrap();
        let v = batch(&t, 100_000, 2);
        assert!(distance_to_density(&v, &t, 64).unwrap() < 0.02);
    }

    #[test]
    fn non_integer_t_sampler_matches_density() {
        let t = Density::of(DensitySpec::T { h: 5.5, beta: 0.05 }).unwrap();
        let v = batch(&t, 100_000, 3);
        assert!(distance_to_density(&v, &t, 64).unwrap() < 0.02);
    }

    #[test]
    fn z0_is_uniform_over_indices() {
        let z = Density::of(DensitySpec::Zk { k: 0, n: 256 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = vec![0u64; 256];
        for _ in 0..100_000 {
            counts[z.sample_zk_index(&mut rng).unwrap() as usize] += 1;
        }
        assert!(chi_square_uniform_p(&counts) > 0.01);
        assert!((z.zk_probability(17).unwrap() - 1.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn zk_sampler_matches_probabilities() {
        let z = Density::of(DensitySpec::Zk { k: 3, n: 32 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0f64; 32];
        let n = 200_000;
        for _ in 0..n {
            counts[z.sample_zk_index(&mut rng).unwrap() as usize] += 1.0;
        }
        let tv: f64 = (0..32)
            .map(|i| (counts[i] / n as f64 - z.zk_probability(i as u64).unwrap()).abs())
            .sum();
        assert!(0.5 * tv < 0.01);
    }

    #[test]
    fn td_and_s_samplers_match_density() {
        for spec in [
            DensitySpec::TD {
                h: 3.0,
                shape: PeriodicShape::CosSquared,
            },
            DensitySpec::S {
                h_tilde: 64.05,
                h: 64.0,
                beta: 0.1,
                a: 0.3,
            },
            DensitySpec::SPrime {
                h: 64.0,
                beta: 0.1,
                a: 0.3,
            },
        ] {
            let d = Density::of(spec.clone()).unwrap();
            let v = batch(&d, 100_000, 6);
            assert!(distance_to_density(&v, &d, 64).unwrap() < 0.02, "{spec}");
        }
    }

    #[test]
    fn compression_identity_and_uniform() {
        let t = Density::of(DensitySpec::T { h: 4.0, beta: 0.05 }).unwrap();
        let a = batch(&compress(&t, 1.0).unwrap(), 100_000, 7);
        assert!(distance_to_density(&a, &t, 32).unwrap() < 0.01);
        let u = Density::of(DensitySpec::Uniform).unwrap();
        let c = batch(&compress(&u, 2.0).unwrap(), 100_000, 9);
        assert!(distance_to_density(&c, &u, 32).unwrap() < 0.01);
    }

    #[test]
    fn compression_of_t_is_t() {
        let t4 = Density::of(DensitySpec::T { h: 4.0, beta: 0.05 }).unwrap();
        let t12 = Density::of(DensitySpec::T {
            h: 12.0,
            beta: 0.05,
        })
        .unwrap();
        let a = batch(&compress(&t4, 3.0).unwrap(), 100_000, 11);
        let b = batch(&t12, 100_000, 12);
        assert!(statistical_distance_estimate(&a, &b, 64).unwrap() < 0.02);
    }

    #[test]
    fn sums_mod_one() {
        let u = Density::of(DensitySpec::Uniform).unwrap();
        let t = Density::of(DensitySpec::T { h: 4.0, beta: 0.02 }).unwrap();
        let a = batch(&convolve_mod1(&u, &t), 100_000, 13);
        let b = batch(&u, 100_000, 14);
        assert!(statistical_distance_estimate(&a, &b, 32).unwrap() < 0.01);

        let q1 = Density::of(DensitySpec::Q { beta: 0.02 }).unwrap();
        let q2 = Density::of(DensitySpec::Q { beta: 0.03 }).unwrap();
        let q12 = Density::of(DensitySpec::Q { beta: 0.05 }).unwrap();
        let c = batch(&convolve_mod1(&q1, &q2), 100_000, 15);
        let d = batch(&q12, 100_000, 16);
        assert!(statistical_distance_estimate(&c, &d, 64).unwrap() < 0.02);
    }

    #[test]
    fn exact_distance_examples() {
        let t = Density::of(DensitySpec::T { h: 4.0, beta: 0.05 }).unwrap();
        let u = Density::of(DensitySpec::Uniform).unwrap();
        let q1 = Density::of(DensitySpec::Q { beta: 1.0 }).unwrap();
        assert_eq!(statistical_distance_exact(&t, &t, 1 << 12).value, 0.0);
        let d_ut = statistical_distance_exact(&u, &t, 1 << 16);
        assert!(d_ut.value > 0.3 && d_ut.value < 0.9);
        assert!(d_ut.error_estimate < 1e-6, "{}", d_ut.error_estimate);
        // Independent oracle: Δ(U, T_{4,0.05}) = Δ(U, Q_{0.05}) since x ↦ 4x mod 1 is
        // measure preserving; the latter is ½∫|1 - Q| over one period.
        let q05 = Density::of(DensitySpec::Q { beta: 0.05 }).unwrap();
        let d_uq = statistical_distance_exact(&u, &q05, 1 << 16);
        assert!((d_ut.value - d_uq.value).abs() < 1e-6);
        assert!((d_ut.value - 0.607_716_356).abs() < 1e-6, "{}", d_ut.value);
        let d_qu = statistical_distance_exact(&q1, &u, 1 << 16).value;
        assert!(d_qu > 0.0 && d_qu < 0.05);
        assert!((d_qu - 0.027_510_835).abs() < 1e-6, "{d_qu}");
    }

    #[test]
    fn estimate_examples() {
        let u = Density::of(DensitySpec::Uniform).unwrap();
        let a = batch(&u, 100_000, 17);
        assert_eq!(statistical_distance_estimate(&a, &a, 64).unwrap(), 0.0);
        let b = batch(&u, 100_000, 18);
        assert!(statistical_distance_estimate(&a, &b, 64).unwrap() < 0.02);
        let t = Density::of(DensitySpec::T { h: 4.0, beta: 0.02 }).unwrap();
        let c = batch(&t, 100_000, 19);
        let exact = statistical_distance_exact(&u, &t, 1 << 16).value;
        assert!((statistical_distance_estimate(&a, &c, 64).unwrap() - exact).abs() < 0.05);
        assert!(statistical_distance_estimate(&a, &[], 64).is_err());
        assert!(statistical_distance_estimate(&a, &b, 1).is_err());
    }

    #[test]
    fn lattice_plus_normal_is_t() {
        let alt = LatticePlusNormal::new(16, 0.01).unwrap();
        let t = Density::of(DensitySpec::T {
            h: 16.0,
            beta: 0.01,
        })
        .unwrap();
        let a = batch(&alt, 100_000, 20);
        let b = batch(&t, 100_000, 21);
        assert!(statistical_distance_estimate(&a, &b, 64).unwrap() < 0.02);
    }

    #[test]
    fn csv_dump_format() {
        let d = Density::of(DensitySpec::Q { beta: 0.5 }).unwrap();
        let csv = d.to_csv(4);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "r,density");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1].split(',').next().unwrap(), "0.125000000000");
        assert_eq!(
            lines[1]
                .split(',')
                .nth(1)
                .unwrap()
                .split('.')
                .nth(1)
                .unwrap()
                .len(),
            12
        );
    }

    #[test]
    fn sample_batch_text_roundtrip() {
        let t = Density::of(DensitySpec::T { h: 3.0, beta: 0.1 }).unwrap();
        let b = SampleBatch::draw(&t, 1000, 22).unwrap();
        assert_eq!(SampleBatch::from_text(&b.to_text(), 22).unwrap(), b);
        assert!(SampleBatch::from_text("0.5\n1.5\n", 0).is_err());
        assert!(SampleBatch::from_text("abc\n", 0).is_err());
    }

    #[test]
    fn seeded_batches_are_reproducible() {
        let t = Density::of(DensitySpec::T { h: 7.5, beta: 0.02 }).unwrap();
        assert_eq!(
            SampleBatch::draw(&t, 500, 9).unwrap(),
            SampleBatch::draw(&t, 500, 9).unwrap()
        );
    }

    #[test]
    fn sum_exp_bound_on_grid() {
        for i in 1..=40 {
            let r = i as f64 / 10.0;
            for j in 0..=10 {
                let x = j as f64 / 10.0;
                assert!(theta_sum(r, x) <= 1.0 + 1.0 / r, "r={r} x={x}");
            }
        }
    }

    #[test]
    fn normal_bound_derivative() {
        // For well-separated terms the maximum is 2π max|z|e^{-πz²} = √(2π/e).
        let step = 1e-6;
        let mut worst: f64 = 0.0;
        for b in [1.5, 2.0, 4.0] {
            for a in [1.0, 10.0] {
                for i in 0..=400 {
                    let x = i as f64 / 400.0;
                    let d = (scaled_theta(b, a, x + step) - scaled_theta(b, a, x - step))
                        / (2.0 * step);
                    worst = worst.max(d.abs() / a);
                }
            }
        }
        assert!(
            (worst - (2.0 * PI / std::f64::consts::E).sqrt()).abs() < 1e-3,
            "{worst}"
        );
    }

    #[test]
    fn joint_distance_is_subadditive() {
        let of = |spec| Density::of(spec).unwrap();
        let (x1, y1) = (
            of(DensitySpec::T { h: 2.0, beta: 0.3 }),
            of(DensitySpec::T { h: 2.0, beta: 0.4 }),
        );
        let (x2, y2) = (
            of(DensitySpec::Q { beta: 0.3 }),
            of(DensitySpec::Q { beta: 0.5 }),
        );
        let d1 = statistical_distance_exact(&x1, &y1, 4096).value;
        let d2 = statistical_distance_exact(&x2, &y2, 4096).value;
        let m = 512;
        let mut exact = 0.0;
        for i in 0..m {
            let u = (i as f64 + 0.5) / m as f64;
            let (p1, q1) = (x1.eval(u).unwrap(), y1.eval(u).unwrap());
            for j in 0..m {
                let v = (j as f64 + 0.5) / m as f64;
                exact += (p1 * x2.eval(v).unwrap() - q1 * y2.eval(v).unwrap()).abs();
            }
        }
        exact *= 0.5 / (m * m) as f64;
        assert!(exact <= d1 + d2 + 1e-9 && exact >= d1.max(d2) - 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let mut pairs = |p: &Density, q: &Density| -> Vec<(f64, f64)> {
            (0..n)
                .map(|_| {
                    (
                        p.sample_with(&mut rng).unwrap(),
                        q.sample_with(&mut rng).unwrap(),
                    )
                })
                .collect()
        };
        let (xs, ys) = (pairs(&x1, &x2), pairs(&y1, &y2));
        let est = joint_distance_estimate(&xs, &ys, 16).unwrap();
        assert!(est <= d1 + d2 + 0.02, "{est} vs {d1} + {d2}");
        assert!((est - exact).abs() < 0.02, "{est} vs {exact}");
    }

    #[test]
    fn tilde_h_close_to_h() {
        // Measured worst ratio Δβ/δ is 0.208; the recorded constant is 1/4.
        let (h, beta, delta) = (64.0, 0.1, 1e-3);
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            let a = i as f64 / 10.0;
            let s = Density::of(DensitySpec::S {
                h_tilde: h * (1.0 + delta),
                h,
                beta,
                a,
            })
            .unwrap();
            let sp = Density::of(DensitySpec::SPrime { h, beta, a }).unwrap();
            worst = worst.max(statistical_distance_exact(&s, &sp, 1 << 14).value);
        }
        assert!(worst <= 0.25 / beta * delta, "{worst}");
        assert!(worst > 0.0);
    }

    #[test]
    fn normals_dot_vector_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let sigma = 0.7;
        let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
        for b in [
            vec![0.6, 0.8],
            vec![1.0, 2.0, 2.0],
            vec![3.0, -1.0, 0.5, 2.0],
        ] {
            let n = 100_000;
            let var = (0..n)
                .map(|_| {
                    b.iter()
                        .map(|bi| bi * rand_distr::Distribution::sample(&normal, &mut rng))
                        .sum::<f64>()
                        .powi(2)
                })
                .sum::<f64>()
                / n as f64;
            let want = b.iter().map(|x| x * x).sum::<f64>() * sigma * sigma;
            assert!((var / want - 1.0).abs() < 0.05, "{b:?}: {var} vs {want}");
        }
    }

    #[test]
    fn tail_bound_examples() {
        assert!((normal_two_sided_tail(1.0, 1.0) - 0.3173).abs() < 1e-4);
        assert!((normal_tail_bound(1.0, 1.0) - 0.4839).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn samples_stay_in_unit_interval(h in 1.0f64..40.0, beta in 0.001f64..2.0, seed in any::<u64>()) {
            let t = Density::of(DensitySpec::T { h, beta }).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..64 {
                let r = t.sample_with(&mut rng).unwrap();
                prop_assert!((0.0..1.0).contains(&r));
            }
        }

        #[test]
        fn densities_are_nonnegative(h in 1.0f64..40.0, beta in 0.001f64..2.0, r in 0.0f64..1.0) {
            let t = Density::of(DensitySpec::T { h, beta }).unwrap();
            prop_assert!(t.eval(r).unwrap() >= 0.0);
        }
    }
}
