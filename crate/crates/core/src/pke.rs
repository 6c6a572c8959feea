//! Public-key encryption of single bits: the private key is a real `h` near an
//! integer, the public key is `m` samples of the wavy distribution `T_{h,β}`
//! scaled by `N`, and decryption asks whether `w h / N` is near an integer.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{
    bigint_from_hex, bigint_to_hex, pow2, random_below, DyadicReal, PrecisionContext,
};

/// Regeneration attempts when no `x_i` comes out odd.
pub const MAX_REGENERATIONS: usize = 64;

/// Parameter set for one instantiation.
#[derive(Clone, Debug, PartialEq)]
pub struct PkeParams {
    pub name: String,
    /// Security parameter; `N = 2^{c_N n²}` and `m = c_m n²` define the knobs.
    pub n: u32,
    pub modulus: BigInt,
    pub m: usize,
    pub gamma: f64,
}

impl PkeParams {
    /// `N = 2^{c_N n²}`, `m = c_m n²`.
    pub fn from_constants(name: &str, n: u32, c_n: f64, c_m: f64, gamma: f64) -> Result<Self> {
        let n2 = f64::from(n * n);
        let params = Self {
            name: name.into(),
            n,
            modulus: pow2((c_n * n2).round() as u64),
            m: (c_m * n2).round() as usize,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    /// `N = 2^32`, `m = 24`, `γ = 64`.
    pub fn desk_small() -> Self {
        Self::from_constants("desk-small", 4, 2.0, 1.5, 64.0).expect("valid profile")
    }

    /// `N = 2^64`, `m = 48`, `γ = 128`.
    pub fn desk() -> Self {
        Self::from_constants("desk", 8, 1.0, 0.75, 128.0).expect("valid profile")
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk-small" => Ok(Self::desk_small()),
            "desk" => Ok(Self::desk()),
            _ => Err(Error::Parameter(format!(
                "unknown profile {name:?} (expected desk-small or desk)"
            ))),
        }
    }

    pub fn c_n(&self) -> f64 {
        self.modulus.bits().saturating_sub(1) as f64 / f64::from(self.n * self.n)
    }

    pub fn c_m(&self) -> f64 {
        self.m as f64 / f64::from(self.n * self.n)
    }

    /// Everything except the decryption-error budget `γ²/m ≥ 64`.
    pub fn validate_structure(&self) -> Result<()> {
        if self.m < 8 {
            return Err(Error::Parameter(format!(
                "m must be at least 8, got {}",
                self.m
            )));
        }
        if self.modulus < pow2(16) {
            return Err(Error::Parameter("N must be at least 2^16".into()));
        }
        if BigInt::from(16 * self.m).pow(2) >= self.modulus {
            return Err(Error::Parameter("need 16 m < √N".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter("gamma must be positive".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if self.gamma * self.gamma / (self.m as f64) < 64.0 {
            return Err(Error::Parameter(format!(
                "γ²/m = {} is below 64",
                self.gamma * self.gamma / self.m as f64
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateKey {
    pub h: DyadicReal,
    pub modulus: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub modulus: BigInt,
    pub a: Vec<BigInt>,
    /// Zero-based index with `x_{i0}` odd.
    pub i0: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub w: BigInt,
}

/// Key-generation randomness, kept for tests.
#[derive(Clone, Debug)]
pub struct KeygenTranscript {
    pub beta: f64,
    pub x: Vec<BigInt>,
    pub y: Vec<DyadicReal>,
}

/// `⌈√N⌉`.
fn ceil_sqrt(n: &BigInt) -> BigInt {
    let s = n.sqrt();
    if &(&s * &s) == n {
        s
    } else {
        s + 1
    }
}

/// Uniform `h ∈ [√N, 2√N)` with `frc(h) < 1/(16m)`, at `2^-frac_bits` resolution.
pub fn sample_h<R: Rng + ?Sized>(
    params: &PkeParams,
    ctx: &PrecisionContext,
    rng: &mut R,
) -> Result<DyadicReal> {
    let n = &params.modulus;
    let lo = ceil_sqrt(n);
    let four_n: BigInt = n * 4;
    let hi = four_n.sqrt();
    let fb = i64::from(ctx.frac_bits);
    // Offsets k 2^-fb with |k| < 2^fb / (16 m).
    let kmax = (pow2(ctx.frac_bits.into()) - 1) / BigInt::from(16 * params.m);
    let span = &kmax * 2 + 1;
    loop {
        let int = &lo + random_below(&(&hi - &lo), rng)?;
        let k = random_below(&span, rng)? - &kmax;
        let h = &DyadicReal::from_bigint(int) + &DyadicReal::new(k, -fb);
        let h2 = (&h * &h).to_rational();
        if h2 >= num_rational::BigRational::from_integer(n.clone())
            && h2 < num_rational::BigRational::from_integer(n * 4)
        {
            return Ok(h);
        }
    }
}

pub fn keygen<R: Rng + ?Sized>(
    params: &PkeParams,
    ctx: &PrecisionContext,
    rng: &mut R,
) -> Result<(PrivateKey, PublicKey)> {
    let (sk, pk, _) = keygen_with_transcript(params, ctx, rng)?;
    Ok((sk, pk))
}

pub fn keygen_with_transcript<R: Rng + ?Sized>(
    params: &PkeParams,
    ctx: &PrecisionContext,
    rng: &mut R,
) -> Result<(PrivateKey, PublicKey, KeygenTranscript)> {
    params.validate_structure()?;
    let h = sample_h(params, ctx, rng)?;
    let g2 = params.gamma * params.gamma;
    let beta = rng.random_range(4.0 / g2..8.0 / g2);
    for _ in 0..MAX_REGENERATIONS {
        let (a, x, y) = sample_public_values(&params.modulus, &h, beta, params.m, rng)?;
        if let Some(i0) = x.iter().position(|xi| xi.is_odd()) {
            let sk = PrivateKey {
                h,
                modulus: params.modulus.clone(),
            };
            let pk = PublicKey {
                modulus: params.modulus.clone(),
                a,
                i0,
            };
            return Ok((sk, pk, KeygenTranscript { beta, x, y }));
        }
    }
    Err(Error::Parameter(format!(
        "no odd x_i after {MAX_REGENERATIONS} regenerations"
    )))
}

/// `Q_β` sample on the centred representative `[-1/2, 1/2]`, taken exactly
/// as a dyadic, so that `x` is the integer nearest to `x + y`.
fn sample_q_dyadic<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Result<DyadicReal> {
    let z: f64 = rng.sample(StandardNormal);
    let y = DyadicReal::from_f64(z * (beta / (2.0 * PI)).sqrt())?;
    Ok(&y - &DyadicReal::from_bigint(y.round_nearest()))
}

/// `m` draws of `z = (x + y)/h` from `T_{h,β}`, returned as `a = ⌊N z⌋` with
/// the `x`, `y` that produced them.
#[allow(clippy::type_complexity)]
pub fn sample_public_values<R: Rng + ?Sized>(
    modulus: &BigInt,
    h: &DyadicReal,
    beta: f64,
    m: usize,
    rng: &mut R,
) -> Result<(Vec<BigInt>, Vec<BigInt>, Vec<DyadicReal>)> {
    let hc = h.ceil();
    let n_dy = DyadicReal::from_bigint(modulus.clone());
    let (mut a, mut xs, mut ys) = (
        Vec::with_capacity(m),
        Vec::with_capacity(m),
        Vec::with_capacity(m),
    );
    for _ in 0..m {
        let mut tries = 0u64;
        loop {
            tries += 1;
            if tries > crate::distributions::MAX_REJECTIONS {
                return Err(Error::SamplerStall(tries));
            }
            let x = random_below(&hc, rng)?;
            let y = sample_q_dyadic(beta, rng)?;
            let xy = &DyadicReal::from_bigint(x.clone()) + &y;
            if xy.is_negative() || xy >= *h {
                continue;
            }
            a.push((&n_dy * &xy).div_floor(h)?);
            xs.push(x);
            ys.push(y);
            break;
        }
    }
    Ok((a, xs, ys))
}

impl PrivateKey {
    /// `(r, D)` with `w h / N = q + r/D`, `0 ≤ r < D`, all integers.
    fn phase_parts(&self, w: &BigInt) -> (BigInt, BigInt) {
        let e = self.h.exponent();
        let (num_shift, den_shift) = if e >= 0 {
            (e as u64, 0)
        } else {
            (0, (-e) as u64)
        };
        let num = (w * self.h.mantissa()) << num_shift;
        let den = &self.modulus << den_shift;
        (num.mod_floor(&den), den)
    }

    /// `frc(w / d)` as a float, for reporting.
    pub fn frc_over_d(&self, w: &BigInt) -> f64 {
        let (r, d) = self.phase_parts(w);
        let near = std::cmp::min(r.clone(), &d - &r);
        ratio_f64(&near, &d)
    }

    /// `0` iff `frc(w h / N) < 1/4`, decided exactly.
    pub fn decrypt(&self, c: &Ciphertext) -> u8 {
        let (r, d) = self.phase_parts(&c.w);
        let four_r: BigInt = &r * 4;
        if four_r < d || four_r > &d * 3 {
            0
        } else {
            1
        }
    }

    /// `d = N/h` rounded to the context's precision.
    pub fn d(&self, ctx: &PrecisionContext) -> Result<DyadicReal> {
        DyadicReal::from_bigint(self.modulus.clone()).div(&self.h, ctx.frac_bits)
    }

    /// The same rule evaluated through the rounded `d`.
    pub fn decrypt_via_d(&self, c: &Ciphertext, ctx: &PrecisionContext) -> Result<u8> {
        let d = self.d(ctx)?;
        let q = DyadicReal::from_bigint(c.w.clone()).div(&d, ctx.frac_bits)?;
        let quarter = DyadicReal::new(BigInt::one(), -2);
        Ok(if q.frc() < quarter { 0 } else { 1 })
    }
}

fn ratio_f64(a: &BigInt, b: &BigInt) -> f64 {
    let shift = b.bits().saturating_sub(60);
    let (a, b) = (a >> shift, b >> shift);
    a.to_f64().unwrap_or(f64::NAN) / b.to_f64().unwrap_or(f64::NAN)
}

/// Uniform subset of `[m]` as a membership mask.
pub fn random_subset<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<bool> {
    (0..m).map(|_| rng.random()).collect()
}

/// `Σ_{i∈S} a_i (+ ⌊a_{i0}/2⌋) mod N`.
pub fn encrypt_with_subset(pk: &PublicKey, bit: u8, subset: &[bool]) -> Result<Ciphertext> {
    if bit > 1 {
        return Err(Error::Domain(format!("bit must be 0 or 1, got {bit}")));
    }
    if subset.len() != pk.a.len() {
        return Err(Error::Domain("subset mask length differs from m".into()));
    }
    let mut w: BigInt =
        pk.a.iter()
            .zip(subset)
            .filter(|(_, &s)| s)
            .map(|(a, _)| a)
            .sum();
    if bit == 1 {
        w += &pk.a[pk.i0] >> 1;
    }
    Ok(Ciphertext {
        w: w.mod_floor(&pk.modulus),
    })
}

pub fn encrypt<R: Rng + ?Sized>(pk: &PublicKey, bit: u8, rng: &mut R) -> Result<Ciphertext> {
    let s = random_subset(pk.a.len(), rng);
    encrypt_with_subset(pk, bit, &s)
}

/// Wilson score interval at 95%.
pub fn wilson_interval(errors: u64, trials: u64) -> Option<(f64, f64)> {
    if trials == 0 {
        return None;
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    Some(((center - half).max(0.0), (center + half).min(1.0)))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorRateReport {
    pub keys: usize,
    pub trials: [u64; 2],
    pub errors: [u64; 2],
}

impl ErrorRateReport {
    pub fn total_trials(&self) -> u64 {
        self.trials[0] + self.trials[1]
    }

    pub fn total_errors(&self) -> u64 {
        self.errors[0] + self.errors[1]
    }

    pub fn rate(&self, bit: usize) -> Option<f64> {
        (self.trials[bit] > 0).then(|| self.errors[bit] as f64 / self.trials[bit] as f64)
    }

    pub fn aggregate_rate(&self) -> Option<f64> {
        (self.total_trials() > 0).then(|| self.total_errors() as f64 / self.total_trials() as f64)
    }

    pub fn interval(&self, bit: usize) -> Option<(f64, f64)> {
        wilson_interval(self.errors[bit], self.trials[bit])
    }

    pub fn aggregate_interval(&self) -> Option<(f64, f64)> {
        wilson_interval(self.total_errors(), self.total_trials())
    }

    /// CSV with one row per bit plus an aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bit,trials,errors,rate,ci_low,ci_high\n");
        let fmt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        let row = |label: &str, t: u64, e: u64, r: Option<f64>, ci: Option<(f64, f64)>| {
            format!(
                "{label},{t},{e},{},{},{}\n",
                fmt(r),
                fmt(ci.map(|c| c.0)),
                fmt(ci.map(|c| c.1))
            )
        };
        for b in 0..2 {
            out += &row(
                &b.to_string(),
                self.trials[b],
                self.errors[b],
                self.rate(b),
                self.interval(b),
            );
        }
        out += &row(
            "all",
            self.total_trials(),
            self.total_errors(),
            self.aggregate_rate(),
            self.aggregate_interval(),
        );
        out
    }
}

/// Fresh keys, random-bit roundtrips, per-bit error counts.
pub fn error_rate_experiment<R: Rng + ?Sized>(
    params: &PkeParams,
    keys: usize,
    encryptions_per_bit: usize,
    ctx: &PrecisionContext,
    rng: &mut R,
) -> Result<ErrorRateReport> {
    let mut rep = ErrorRateReport {
        keys,
        ..Default::default()
    };
    for _ in 0..keys {
        let (sk, pk) = keygen(params, ctx, rng)?;
        for bit in 0..2u8 {
            for _ in 0..encryptions_per_bit {
                let c = encrypt(&pk, bit, rng)?;
                rep.trials[bit as usize] += 1;
                if sk.decrypt(&c) != bit {
                    rep.errors[bit as usize] += 1;
                }
            }
        }
    }
    Ok(rep)
}

fn parse_kv<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing {key}= line")))?;
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Parse(format!("expected {key}=..., got {line:?}")))
}

fn content_lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn expect_header(line: Option<&str>, header: &str) -> Result<()> {
    if line != Some(header) {
        return Err(Error::Parse(format!("expected header {header:?}")));
    }
    Ok(())
}

impl fmt::Display for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pke-private v1")?;
        writeln!(f, "h={}", self.h)?;
        writeln!(f, "N={}", bigint_to_hex(&self.modulus))
    }
}

impl FromStr for PrivateKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = content_lines(s);
        expect_header(it.next(), "pke-private v1")?;
        let h: DyadicReal = parse_kv(it.next(), "h")?.parse()?;
        let modulus = bigint_from_hex(parse_kv(it.next(), "N")?)?;
        if !modulus.is_positive() || h.is_negative() || h.is_zero() {
            return Err(Error::Parse("N and h must be positive".into()));
        }
        Ok(Self { h, modulus })
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pke-public v1")?;
        writeln!(f, "N={}", bigint_to_hex(&self.modulus))?;
        writeln!(f, "m={}", self.a.len())?;
        writeln!(f, "i0={}", self.i0)?;
        for a in &self.a {
            writeln!(f, "a={}", bigint_to_hex(a))?;
        }
        Ok(())
    }
}

impl FromStr for PublicKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = content_lines(s);
        expect_header(it.next(), "pke-public v1")?;
        let modulus = bigint_from_hex(parse_kv(it.next(), "N")?)?;
        let m: usize = parse_kv(it.next(), "m")?
            .parse()
            .map_err(|_| Error::Parse("bad m".into()))?;
        let i0: usize = parse_kv(it.next(), "i0")?
            .parse()
            .map_err(|_| Error::Parse("bad i0".into()))?;
        let a = (0..m)
            .map(|_| bigint_from_hex(parse_kv(it.next(), "a")?))
            .collect::<Result<Vec<_>>>()?;
        if it.next().is_some() {
            return Err(Error::Parse("trailing data in public key".into()));
        }
        if i0 >= m || a.iter().any(|x| x.is_negative() || *x >= modulus) {
            return Err(Error::Parse("public key values out of range".into()));
        }
        Ok(Self { modulus, a, i0 })
    }
}

impl fmt::Display for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", bigint_to_hex(&self.w))
    }
}

impl FromStr for Ciphertext {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let w = bigint_from_hex(s.trim())?;
        if w.is_negative() {
            return Err(Error::Parse("ciphertext must be nonnegative".into()));
        }
        Ok(Self { w })
    }
}
