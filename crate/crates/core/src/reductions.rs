//! Reduction from the unique shortest vector problem to dSVP (routine 𝒞 and
//! procedure ℬ), the gap-oracle variant, the scaling construction of `M`, the
//! projection to `[0, 1)`, and the end-to-end pipeline driven by a
//! one-dimensional distinguisher.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::lattice::{
    dual_basis, lambda1, lll_reduce, norm_sq, q_to_f64, sample_dual_gaussian_f64, scale,
    shortest_vector_enum, Basis, Vector, Q,
};
use crate::numerics::DyadicReal;

/// The reference oracles enumerate, so they refuse above this dimension.
pub const MAX_ORACLE_DIM: usize = 8;

/// A dSVP_p query: does `p` divide coefficient `index` of `τ(L)` in `basis`?
#[derive(Clone, Copy, Debug)]
pub struct DsvpInstance<'a> {
    pub basis: &'a Basis,
    pub p: u64,
    pub index: usize,
    /// Estimate with `λ(L) < alpha ≤ 2λ(L)` when the promise holds.
    pub alpha: f64,
}

pub trait DsvpOracle {
    fn decide(&mut self, inst: &DsvpInstance<'_>) -> Result<bool>;
}

/// What the reference oracle does when `alpha` is outside `(λ, 2λ]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AlphaPolicy {
    /// Answer truthfully anyway.
    #[default]
    Ignore,
    /// Answer the opposite of the truth.
    Adversarial,
}

/// Enumeration-backed dSVP oracle.
#[derive(Clone, Debug, Default)]
pub struct ReferenceDsvpOracle {
    pub alpha_policy: AlphaPolicy,
    pub calls: u64,
}

impl ReferenceDsvpOracle {
    pub fn new(alpha_policy: AlphaPolicy) -> Self {
        Self {
            alpha_policy,
            calls: 0,
        }
    }
}

fn check_oracle_dim(b: &Basis) -> Result<()> {
    if b.dim() > MAX_ORACLE_DIM {
        return Err(Error::Refused(format!(
            "reference oracle limited to dimension {MAX_ORACLE_DIM}"
        )));
    }
    Ok(())
}

impl DsvpOracle for ReferenceDsvpOracle {
    fn decide(&mut self, inst: &DsvpInstance<'_>) -> Result<bool> {
        check_oracle_dim(inst.basis)?;
        self.calls += 1;
        let svp = shortest_vector_enum(inst.basis, 1.0)?;
        if svp.second_norm_sq.as_ref() == Some(&svp.norm_sq) {
            return Err(Error::PromiseViolation(
                "shortest vector is not unique".into(),
            ));
        }
        let a = &svp.coefficients[inst.index];
        let truth = (a % BigInt::from(inst.p)).is_zero();
        let in_promise = svp.length < inst.alpha && inst.alpha <= 2.0 * svp.length;
        Ok(match self.alpha_policy {
            AlphaPolicy::Adversarial if !in_promise => !truth,
            _ => truth,
        })
    }
}

/// Record of oracle calls and intermediate bases.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// Tab-separated `basis_hash  i  j  queried  answer` lines.
    pub lines: Vec<String>,
    pub bases: Vec<Basis>,
}

pub fn basis_hash(b: &Basis) -> u64 {
    let mut h = DefaultHasher::new();
    b.to_string().hash(&mut h);
    h.finish()
}

impl Trace {
    fn call(&mut self, b: &Basis, i: usize, j: usize, queried: usize, answer: bool) {
        let ans = if answer { "YES" } else { "NO" };
        self.lines.push(format!(
            "{:016x}\t{i}\t{j}\t{queried}\t{ans}",
            basis_hash(b)
        ));
    }

    pub fn to_tsv(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

struct Ctx<'a, 'b> {
    p: u64,
    alpha: f64,
    oracle: &'a mut dyn DsvpOracle,
    trace: Option<&'b mut Trace>,
}

impl Ctx<'_, '_> {
    fn ask(&mut self, b: &Basis, queried: usize, i: usize, j: usize) -> Result<bool> {
        let ans = self.oracle.decide(&DsvpInstance {
            basis: b,
            p: self.p,
            index: queried,
            alpha: self.alpha,
        })?;
        if let Some(t) = self.trace.as_deref_mut() {
            t.call(b, i, j, queried, ans);
        }
        Ok(ans)
    }

    fn record(&mut self, b: &Basis) {
        if let Some(t) = self.trace.as_deref_mut() {
            t.bases.push(b.clone());
        }
    }
}

fn scale_column(b: &Basis, i: usize, p: u64) -> Result<Basis> {
    b.with_column(i, scale(b.column(i), &Q::from_integer(BigInt::from(p))))
}

fn routine_c_inner(
    mut b: Basis,
    i: usize,
    j: usize,
    ctx: &mut Ctx<'_, '_>,
) -> Result<(Basis, bool)> {
    let n = b.dim();
    // Step 1: divide a_i by p while it stays divisible; 2n divisions force a_i = 0.
    let mut divisible = true;
    for _ in 0..2 * n {
        if !ctx.ask(&b, i, i, j)? {
            divisible = false;
            break;
        }
        b = scale_column(&b, i, ctx.p)?;
        ctx.record(&b);
    }
    if divisible {
        return Ok((b, false));
    }
    // Step 2: shift a_j into p Z via v_i += t v_j, then divide it by p.
    let half = (ctx.p as i64 - 1) / 2;
    let ts: Vec<i64> = std::iter::once(0)
        .chain((1..=half).flat_map(|t| [t, -t]))
        .collect();
    for _ in 0..2 * n {
        let mut found = None;
        for &t in &ts {
            let cand = if t == 0 {
                b.clone()
            } else {
                let shifted: Vector = b
                    .column(i)
                    .iter()
                    .zip(b.column(j))
                    .map(|(x, y)| x + y * Q::from_integer(BigInt::from(t)))
                    .collect();
                b.with_column(i, shifted)?
            };
            if ctx.ask(&cand, j, i, j)? {
                found = Some(cand);
                break;
            }
        }
        let cand = found.ok_or_else(|| {
            Error::Protocol(format!("no shift makes a_{j} divisible by {}", ctx.p))
        })?;
        b = scale_column(&cand, j, ctx.p)?;
        ctx.record(&b);
    }
    Ok((b, true))
}

/// Routine 𝒞. Bit `false` means `a_i = 0`; bit `true` means `a_i ≠ 0` and
/// `|a_j| ≤ |a_i| / 2` in the returned basis.
pub fn routine_c(
    basis: Basis,
    i: usize,
    j: usize,
    p: u64,
    alpha: f64,
    oracle: &mut dyn DsvpOracle,
    trace: Option<&mut Trace>,
) -> Result<(Basis, bool)> {
    if i == j || i >= basis.dim() || j >= basis.dim() {
        return domain("routine C needs distinct in-range indices");
    }
    routine_c_inner(
        basis,
        i,
        j,
        &mut Ctx {
            p,
            alpha,
            oracle,
            trace,
        },
    )
}

fn procedure_b_inner(basis: &Basis, ctx: &mut Ctx<'_, '_>) -> Result<Vector> {
    let n = basis.dim();
    let mut b = basis.clone();
    ctx.record(&b);
    let mut z: Vec<usize> = (0..n).collect();
    let cap = 8 * n * n;
    let mut calls = 0;
    while z.len() > 1 {
        let (mut i, mut j) = (z[0], z[1]);
        loop {
            calls += 1;
            if calls > cap {
                return Err(Error::Budget(format!(
                    "procedure B exceeded {cap} calls to routine C"
                )));
            }
            let (nb, bit) = routine_c_inner(b, i, j, ctx)?;
            b = nb;
            if !bit {
                z.retain(|&k| k != i);
                break;
            }
            std::mem::swap(&mut i, &mut j);
        }
    }
    Ok(b.column(z[0]).clone())
}

/// Procedure ℬ on an LLL-reduced basis. Returns `±τ(L)` when the oracle is
/// correct and `λ(L) < alpha ≤ 2λ(L)`; otherwise the caller must validate.
pub fn procedure_b(
    basis: &Basis,
    alpha: f64,
    p: u64,
    oracle: &mut dyn DsvpOracle,
    trace: Option<&mut Trace>,
) -> Result<Vector> {
    check_prime(p)?;
    procedure_b_inner(
        basis,
        &mut Ctx {
            p,
            alpha,
            oracle,
            trace,
        },
    )
}

/// Runs procedure ℬ for `α = 2^{j-n} ‖v_1‖`, `j = 1..=n+1`, and returns the
/// shortest candidate that is a nonzero lattice vector.
pub fn solve_usvp(
    basis: &Basis,
    p: u64,
    oracle: &mut dyn DsvpOracle,
    mut trace: Option<&mut Trace>,
) -> Result<Vector> {
    check_prime(p)?;
    let red = lll_reduce(basis)?;
    let n = red.dim();
    let v1 = q_to_f64(&norm_sq(red.column(0))).sqrt();
    let mut best: Option<(Q, Vector)> = None;
    let mut violation = None;
    for j in 1..=n + 1 {
        let alpha = v1 * 2f64.powi(j as i32 - n as i32);
        let mut ctx = Ctx {
            p,
            alpha,
            oracle: &mut *oracle,
            trace: trace.as_deref_mut(),
        };
        let v = match procedure_b_inner(&red, &mut ctx) {
            Ok(v) => v,
            Err(Error::Protocol(_) | Error::Budget(_)) => continue,
            // A wrong α can steer ℬ to sublattices that lose τ.
            Err(e @ Error::PromiseViolation(_)) => {
                violation = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        if v.iter().all(Zero::is_zero) || !basis.contains(&v) {
            continue;
        }
        let ns = norm_sq(&v);
        if best.as_ref().is_none_or(|(b, _)| ns < *b) {
            best = Some((ns, v));
        }
    }
    match (best, violation) {
        (Some((_, v)), _) => Ok(v),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::NotFound(
            "no candidate passed lattice validation".into(),
        )),
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn check_prime(p: u64) -> Result<()> {
    if p <= 2 || !is_prime(p) {
        return domain(format!("p must be an odd prime, got {p}"));
    }
    Ok(())
}

/// Smallest prime in `(g, 2g]`.
pub fn select_prime(g: f64) -> Result<u64> {
    if !(g >= 1.0 && g < 1e15) {
        return domain(format!("g out of range: {g}"));
    }
    let lo = g.floor() as u64 + 1;
    let hi = (2.0 * g).floor() as u64;
    (lo..=hi)
        .find(|&p| is_prime(p))
        .ok_or_else(|| Error::NotFound(format!("no prime in ({g}, {}]", 2.0 * g)))
}

/// Decides `λ(L) ≤ d` (YES) versus `λ(L) > gap · d` (NO).
pub trait GapOracle {
    fn decide(&mut self, basis: &Basis, d: f64, gap: f64) -> Result<bool>;
}

/// Exact threshold oracle: YES iff `λ(L) ≤ d`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceGapOracle;

impl GapOracle for ReferenceGapOracle {
    fn decide(&mut self, basis: &Basis, d: f64, _gap: f64) -> Result<bool> {
        check_oracle_dim(basis)?;
        Ok(lambda1(basis)? <= d)
    }
}

/// An interval `(lo, hi]` containing `λ(L)`, from scanning `d` downward by
/// `p^{1/8}` until the gap oracle says NO.
pub fn lambda_interval(basis: &Basis, p: u64, oracle: &mut dyn GapOracle) -> Result<(f64, f64)> {
    let red = lll_reduce(basis)?;
    let n = red.dim();
    let gap = (p as f64).sqrt();
    let r = (p as f64).powf(0.125);
    let mut d = q_to_f64(&norm_sq(red.column(0))).sqrt();
    if !oracle.decide(&red, d, gap)? {
        return Err(Error::PromiseViolation(
            "gap oracle rejected an upper bound on λ".into(),
        ));
    }
    // λ ≥ ‖v_1‖ / 2^n after LLL.
    let steps = (n as f64 * 2f64.ln() / r.ln()).ceil() as usize + 4;
    for _ in 0..steps {
        d /= r;
        if !oracle.decide(&red, d, gap)? {
            return Ok((d, gap * r * d));
        }
    }
    Err(Error::PromiseViolation(
        "gap oracle never answered NO".into(),
    ))
}

/// dSVP via a gap oracle: YES iff the intervals for `L` and
/// `L' = span(…, p·v_index, …)` intersect.
pub fn gap_reduction(
    basis: &Basis,
    index: usize,
    p: u64,
    oracle: &mut dyn GapOracle,
) -> Result<bool> {
    check_prime(p)?;
    if index >= basis.dim() {
        return domain("index out of range");
    }
    let l2 = scale_column(basis, index, p)?;
    let (a0, a1) = lambda_interval(basis, p, oracle)?;
    let (b0, b1) = lambda_interval(&l2, p, oracle)?;
    Ok(a0 < b1 && b0 < a1)
}

/// The lattice `M`: scale by `2√n/(α g)`, multiply column `index` by `p`, LLL.
pub fn build_m(basis: &Basis, alpha: f64, g: f64, p: u64, index: usize) -> Result<Basis> {
    let n = basis.dim();
    if !(g >= 4.0 * (n as f64).sqrt()) {
        return domain(format!("g must be at least 4√n, got {g}"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) || p == 0 || index >= n {
        return domain("alpha must be positive, p >= 1, index in range");
    }
    let s = Q::from_float(2.0 * (n as f64).sqrt() / (alpha * g))
        .ok_or_else(|| Error::Domain("bad scale".into()))?;
    let scaled = basis.scaled(&s)?;
    lll_reduce(&scale_column(&scaled, index, p)?)
}

fn log2_exact(k: &BigInt) -> Result<u64> {
    let bits = k.bits();
    if !k.is_positive() || bits < 2 || *k != BigInt::one() << (bits - 1) {
        return domain(format!("K must be a power of two at least 2, got {k}"));
    }
    Ok(bits - 1)
}

/// `⌊K a_1⌋/K + ⌊K a_2⌋/K² + … + a_n/K^n` for dual coordinates `a ∈ [0,1)^n`.
pub fn project_f(coords: &[f64], k: &BigInt) -> Result<DyadicReal> {
    let e = log2_exact(k)? as i64;
    if coords.is_empty() || coords.iter().any(|a| !(0.0..1.0).contains(a)) {
        return domain("dual coordinates must lie in [0,1)");
    }
    let n = coords.len();
    let mut r = DyadicReal::zero();
    for (i, &a) in coords.iter().enumerate() {
        let a = DyadicReal::from_f64(a)?;
        let shift = e * (i as i64 + 1);
        let term = if i + 1 < n {
            DyadicReal::from_bigint(a.shl(e).floor()).shl(-shift)
        } else {
            a.shl(-shift)
        };
        r = &r + &term;
    }
    Ok(r)
}

/// `w = v*_1 + K v*_2 + … + K^{n-1} v*_n`.
pub fn projection_w(dual: &Basis, k: &BigInt) -> Vector {
    let n = dual.dim();
    let mut w = vec![Q::zero(); n];
    let mut pow = BigInt::one();
    for c in dual.columns() {
        let f = Q::from_integer(pow.clone());
        for (o, x) in w.iter_mut().zip(c) {
            *o += x * &f;
        }
        pow *= k;
    }
    w
}

/// `⟨τ, w⟩ = Σ a_i K^{i-1}` for `τ = Σ a_i v_i`.
pub fn tau_w_inner(coefficients: &[BigInt], k: &BigInt) -> BigInt {
    coefficients
        .iter()
        .rev()
        .fold(BigInt::zero(), |acc, a| acc * k + a)
}

/// `r · t mod 1`, computed exactly.
pub fn phase(r: &DyadicReal, t: &BigInt) -> f64 {
    (r * &DyadicReal::from_bigint(t.clone())).fract().to_f64()
}

/// A bounded stream of samples from `[0, 1)`.
pub struct SampleStream<'a> {
    next: Box<dyn FnMut() -> Result<f64> + 'a>,
    drawn: usize,
    budget: usize,
}

impl<'a> SampleStream<'a> {
    pub fn new(budget: usize, next: impl FnMut() -> Result<f64> + 'a) -> Self {
        Self {
            next: Box::new(next),
            drawn: 0,
            budget,
        }
    }

    pub fn next_sample(&mut self) -> Result<f64> {
        if self.drawn >= self.budget {
            return Err(Error::StreamExhausted(self.drawn));
        }
        self.drawn += 1;
        (self.next)()
    }

    pub fn drawn(&self) -> usize {
        self.drawn
    }
}

/// Distinguishes uniform samples from wavy ones. `accept` means "wavy".
pub trait OneDimDistinguisher {
    fn sample_budget(&self) -> usize;
    /// Lets test distinguishers see the lattice the samples come from.
    fn observe_lattice(&mut self, _m: &Basis) -> Result<()> {
        Ok(())
    }
    fn accept(&mut self, stream: &mut SampleStream<'_>) -> Result<bool>;
}

/// Knows `M` and accepts iff `λ(M) < √n`.
#[derive(Clone, Debug, Default)]
pub struct ClairvoyantDistinguisher {
    verdict: Option<bool>,
}

impl OneDimDistinguisher for ClairvoyantDistinguisher {
    fn sample_budget(&self) -> usize {
        0
    }

    fn observe_lattice(&mut self, m: &Basis) -> Result<()> {
        self.verdict = Some(lambda1(m)? < (m.dim() as f64).sqrt());
        Ok(())
    }

    fn accept(&mut self, _stream: &mut SampleStream<'_>) -> Result<bool> {
        self.verdict
            .ok_or_else(|| Error::Protocol("clairvoyant distinguisher saw no lattice".into()))
    }
}

/// Accepts with probability 1/2, ignoring the samples.
pub struct CoinFlipDistinguisher {
    rng: ChaCha8Rng,
}

impl CoinFlipDistinguisher {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl OneDimDistinguisher for CoinFlipDistinguisher {
    fn sample_budget(&self) -> usize {
        0
    }

    fn accept(&mut self, _stream: &mut SampleStream<'_>) -> Result<bool> {
        Ok(self.rng.random())
    }
}

/// Parameters of the distinguisher-driven dSVP oracle.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub g: f64,
    /// Defaults to `2^{3n}` when `None`.
    pub k: Option<BigInt>,
    /// Defaults to `2n + 1` when `None`.
    pub majority_rounds: Option<usize>,
    pub seed: u64,
}

/// Samples of `f(D_{M*})` for a fixed `M`.
pub struct ProjectedSampler {
    cols: Vec<Vec<f64>>,
    dual: Vec<Vec<f64>>,
    k: BigInt,
}

impl ProjectedSampler {
    pub fn new(m: &Basis, k: &BigInt) -> Result<Self> {
        log2_exact(k)?;
        Ok(Self {
            cols: m.to_f64_columns(),
            dual: dual_basis(m)?.to_f64_columns(),
            k: k.clone(),
        })
    }

    pub fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DyadicReal> {
        let s = sample_dual_gaussian_f64(&self.cols, &self.dual, rng);
        project_f(&s.coords, &self.k)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sample_exact(rng)?.to_f64())
    }
}

pub fn default_k(n: usize) -> BigInt {
    BigInt::one() << (3 * n)
}

/// dSVP oracle composed of `build_m`, dual Gaussian sampling, `project_f`,
/// and a majority vote of the distinguisher.
pub struct PipelineOracle<'d> {
    pub config: PipelineConfig,
    pub distinguisher: &'d mut dyn OneDimDistinguisher,
    rng: ChaCha8Rng,
    pub calls: u64,
}

impl<'d> PipelineOracle<'d> {
    pub fn new(config: PipelineConfig, distinguisher: &'d mut dyn OneDimDistinguisher) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            config,
            distinguisher,
            rng,
            calls: 0,
        }
    }
}

impl DsvpOracle for PipelineOracle<'_> {
    fn decide(&mut self, inst: &DsvpInstance<'_>) -> Result<bool> {
        self.calls += 1;
        let n = inst.basis.dim();
        let m = build_m(inst.basis, inst.alpha, self.config.g, inst.p, inst.index)?;
        let k = self.config.k.clone().unwrap_or_else(|| default_k(n));
        let sampler = ProjectedSampler::new(&m, &k)?;
        self.distinguisher.observe_lattice(&m)?;
        let rounds = self.config.majority_rounds.unwrap_or(2 * n + 1);
        let budget = self.distinguisher.sample_budget();
        let mut yes = 0;
        for _ in 0..rounds {
            let rng = &mut self.rng;
            let sampler = &sampler;
            let mut stream = SampleStream::new(budget, move || sampler.sample(rng));
            if self.distinguisher.accept(&mut stream)? {
                yes += 1;
            }
        }
        Ok(2 * yes > rounds)
    }
}

/// uSVP through the full chain with `p` the smallest prime in `(g, 2g]`.
pub fn usvp_pipeline(
    basis: &Basis,
    config: PipelineConfig,
    distinguisher: &mut dyn OneDimDistinguisher,
    trace: Option<&mut Trace>,
) -> Result<Vector> {
    let p = select_prime(config.g)?;
    let mut oracle = PipelineOracle::new(config, distinguisher);
    solve_usvp(basis, p, &mut oracle, trace)
}

/// Checks that every traced basis spans a sublattice of `original` containing `tau`.
pub fn check_trace_invariant(original: &Basis, tau: &[Q], trace: &Trace) -> bool {
    trace
        .bases
        .iter()
        .all(|b| b.columns().iter().all(|c| original.contains(c)) && b.contains(tau))
}

/// Whether `p` divides `a`.
pub fn divides(p: u64, a: &BigInt) -> bool {
    a.is_multiple_of(&BigInt::from(p))
}
