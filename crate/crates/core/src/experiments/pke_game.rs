//! Distinguishing `U` from a wavy distribution with a PKE adversary: build a
//! public key from the unknown distribution and compare how the adversary
//! treats encryptions of 0 against uniform words.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng, RngCore};

use super::oracle::UnknownDistribution;
use crate::distributions::{wrapped_normal_offset, DensitySpec};
use crate::error::{Error, Result};
use crate::numerics::{frc, mod1, random_below, DyadicReal};
use crate::pke::{encrypt, PkeParams, PublicKey};

/// Hidden state of one game, visible only to clairvoyant adversaries.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSecrets {
    pub hidden: DensitySpec,
    pub h_tilde: f64,
    pub delta: f64,
    pub s: f64,
}

impl GameSecrets {
    /// `δh` for a wavy oracle, `δh̃` otherwise.
    pub fn period(&self) -> f64 {
        match self.hidden {
            DensitySpec::T { h, .. } => self.delta * h,
            _ => self.delta * self.h_tilde,
        }
    }
}

pub trait PkeAdversary {
    fn observe(&mut self, _secrets: &GameSecrets) {}
    fn accept(&mut self, pk: &PublicKey, w: &BigInt, rng: &mut dyn RngCore) -> Result<bool>;
}

/// Rejects every word.
#[derive(Clone, Copy, Debug, Default)]
pub struct RejectingAdversary;

impl PkeAdversary for RejectingAdversary {
    fn accept(&mut self, _pk: &PublicKey, _w: &BigInt, _rng: &mut dyn RngCore) -> Result<bool> {
        Ok(false)
    }
}

/// Knows the period of the planted key. Simulates encryptions of 0, bins their
/// phases `w·H/N mod 1`, and accepts words whose phase falls in a bin heavier
/// than uniform.
#[derive(Clone, Debug)]
pub struct ClairvoyantAdversary {
    pub simulations: usize,
    pub bins: usize,
    period: f64,
    accept_bins: Option<Vec<bool>>,
}

impl ClairvoyantAdversary {
    pub fn new(simulations: usize, bins: usize) -> Self {
        Self {
            simulations,
            bins,
            period: 0.0,
            accept_bins: None,
        }
    }

    fn phase(&self, pk: &PublicKey, w: &BigInt) -> f64 {
        let n = pk.modulus.to_f64().unwrap_or(f64::INFINITY);
        mod1(w.to_f64().unwrap_or(0.0) * (self.period / n))
    }

    fn bin(&self, phase: f64) -> usize {
        ((phase * self.bins as f64) as usize).min(self.bins - 1)
    }
}

impl Default for ClairvoyantAdversary {
    fn default() -> Self {
        Self::new(2000, 64)
    }
}

impl PkeAdversary for ClairvoyantAdversary {
    fn observe(&mut self, secrets: &GameSecrets) {
        self.period = secrets.period();
        self.accept_bins = None;
    }

    fn accept(&mut self, pk: &PublicKey, w: &BigInt, rng: &mut dyn RngCore) -> Result<bool> {
        if self.accept_bins.is_none() {
            let mut counts = vec![0usize; self.bins];
            for _ in 0..self.simulations {
                let c = encrypt(pk, 0, rng)?;
                counts[self.bin(self.phase(pk, &c.w))] += 1;
            }
            self.accept_bins = Some(
                counts
                    .iter()
                    .map(|&c| c * self.bins > self.simulations)
                    .collect(),
            );
        }
        let bins = self.accept_bins.as_ref().expect("built above");
        Ok(bins[self.bin(self.phase(pk, w))])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PkeGameConfig {
    /// Words per estimate of `p_0` and of `p_u`.
    pub estimate_samples: usize,
    /// Accept when `|p̂_0 − p̂_u|` exceeds this (the `1/(4n^c)` of the proof).
    pub gap_threshold: f64,
    /// Feed the adversary `w + ⌊a_{i0}/2⌋` so it compares encryptions of 1.
    pub shift_to_one: bool,
}

impl Default for PkeGameConfig {
    fn default() -> Self {
        Self {
            estimate_samples: 400,
            gap_threshold: 0.15,
            shift_to_one: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PkeGameOutcome {
    pub accept: bool,
    pub p0: f64,
    pub pu: f64,
    pub secrets: GameSecrets,
}

impl PkeGameOutcome {
    pub fn gap(&self) -> f64 {
        (self.p0 - self.pu).abs()
    }
}

/// `{1, 2, 4, …, √N}`.
pub fn h_tilde_choices(modulus: &BigInt) -> Vec<f64> {
    let top = (modulus.bits().saturating_sub(1) / 2) as i32;
    (0..=top).map(|e| 2f64.powi(e)).collect()
}

fn sqrt_n(params: &PkeParams) -> f64 {
    params.modulus.to_f64().unwrap_or(f64::INFINITY).sqrt()
}

/// One sample of `C_δ(R + Q_{δ²s/N} mod 1)`.
fn sample_r_prime(
    oracle: &mut UnknownDistribution,
    delta: f64,
    q_beta: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let dc = delta.ceil() as u64;
    loop {
        let x = rng.random_range(0..dc) as f64;
        let r = oracle.draw(rng)?;
        let y = if q_beta > 0.0 {
            mod1(r + wrapped_normal_offset(q_beta, rng))
        } else {
            r
        };
        let z = (x + y) / delta;
        if z < 1.0 {
            return Ok(z);
        }
    }
}

/// `⌊N r⌋` for `r ∈ [0, 1)`, exact in the bits of `r`.
fn scale_to_modulus(r: f64, modulus: &BigInt) -> Result<BigInt> {
    let v = (&DyadicReal::from_f64(r)? * &DyadicReal::from_bigint(modulus.clone())).floor();
    Ok(v.mod_floor(modulus))
}

pub fn pke_security_game(
    adversary: &mut dyn PkeAdversary,
    oracle: &mut UnknownDistribution,
    params: &PkeParams,
    config: &PkeGameConfig,
    rng: &mut dyn RngCore,
) -> Result<PkeGameOutcome> {
    params.validate_structure()?;
    let choices = h_tilde_choices(&params.modulus);
    let h_tilde = choices[rng.random_range(0..choices.len())];
    let sn = sqrt_n(params);
    let delta = rng.random_range(sn / h_tilde..4.0 * sn / h_tilde);
    let s = rng.random_range(0.0..7.0 / (params.gamma * params.gamma));
    let nf = params.modulus.to_f64().unwrap_or(f64::INFINITY);
    let q_beta = delta * delta * s / nf;

    let a = (0..params.m)
        .map(|_| scale_to_modulus(sample_r_prime(oracle, delta, q_beta, rng)?, &params.modulus))
        .collect::<Result<Vec<_>>>()?;
    let i0 = rng.random_range(0..params.m);
    let pk = PublicKey {
        modulus: params.modulus.clone(),
        a,
        i0,
    };
    let secrets = GameSecrets {
        hidden: oracle.hidden().clone(),
        h_tilde,
        delta,
        s,
    };
    adversary.observe(&secrets);

    let shift: BigInt = if config.shift_to_one {
        &pk.a[pk.i0] >> 1
    } else {
        BigInt::from(0)
    };
    let mut ask = |w: BigInt, rng: &mut dyn RngCore| -> Result<bool> {
        adversary.accept(&pk, &(w + &shift).mod_floor(&pk.modulus), rng)
    };
    let (mut hits0, mut hitsu) = (0usize, 0usize);
    for _ in 0..config.estimate_samples {
        let w = encrypt(&pk, 0, rng)?.w;
        hits0 += usize::from(ask(w, rng)?);
        let u = random_below(&pk.modulus, rng)?;
        hitsu += usize::from(ask(u, rng)?);
    }
    let k = config.estimate_samples.max(1) as f64;
    let (p0, pu) = (hits0 as f64 / k, hitsu as f64 / k);
    Ok(PkeGameOutcome {
        accept: (p0 - pu).abs() > config.gap_threshold,
        p0,
        pu,
        secrets,
    })
}

/// Draws `(h̃, δ, s)` conditioned on the event that the game's key looks like a
/// real one (`h ≤ h̃ < 2h`, `δh ∈ [√N, 2√N)`, `frc(δh) < 1/(16m)`, and the
/// widened `β` in `[4/γ², 8/γ²)`), and returns the induced `(δh, β')`.
pub fn sample_conditioned_key_shape<R: Rng + ?Sized>(
    params: &PkeParams,
    h: f64,
    beta: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let choices = h_tilde_choices(&params.modulus);
    if !choices.iter().any(|&t| h <= t && t < 2.0 * h) {
        return Err(Error::Parameter(format!("no h̃ on the grid covers h = {h}")));
    }
    let sn = sqrt_n(params);
    let nf = sn * sn;
    let g2 = params.gamma * params.gamma;
    let frc_bound = 1.0 / (16.0 * params.m as f64);
    loop {
        let h_tilde = loop {
            let t = choices[rng.random_range(0..choices.len())];
            if h <= t && t < 2.0 * h {
                break t;
            }
        };
        let dh = loop {
            let dh = rng.random_range(sn / h_tilde..4.0 * sn / h_tilde) * h;
            if dh >= sn && dh < 2.0 * sn && frc(dh) < frc_bound {
                break dh;
            }
        };
        let s = rng.random_range(0.0..7.0 / g2);
        let b = beta + dh * dh * s / nf;
        if (4.0 / g2..8.0 / g2).contains(&b) {
            return Ok((dh, b));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{bin_counts, statistical_distance_estimate};
    use crate::numerics::PrecisionContext;
    use crate::pke::keygen_with_transcript;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn oracle(spec: DensitySpec) -> UnknownDistribution {
        UnknownDistribution::new(spec, 100_000).unwrap()
    }

    fn wavy() -> DensitySpec {
        DensitySpec::T {
            h: 16.0,
            beta: 2.0 / 4096.0,
        }
    }

    fn rate(spec: DensitySpec, games: usize, seed: u64) -> f64 {
        let p = PkeParams::desk_small();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adv = ClairvoyantAdversary::default();
        let acc = (0..games)
            .filter(|_| {
                pke_security_game(
                    &mut adv,
                    &mut oracle(spec.clone()),
                    &p,
                    &PkeGameConfig::default(),
                    &mut rng,
                )
                .unwrap()
                .accept
            })
            .count();
        acc as f64 / games as f64
    }

    #[test]
    fn uniform_oracle_is_rejected() {
        assert!(rate(DensitySpec::Uniform, 60, 1) <= 0.05);
    }

    #[test]
    fn wavy_oracle_is_accepted_often() {
        assert!(rate(wavy(), 60, 2) >= 0.2);
    }

    #[test]
    fn threshold_one_never_accepts() {
        let p = PkeParams::desk_small();
        let cfg = PkeGameConfig {
            gap_threshold: 1.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut adv = ClairvoyantAdversary::default();
        for _ in 0..10 {
            assert!(
                !pke_security_game(&mut adv, &mut oracle(wavy()), &p, &cfg, &mut rng)
                    .unwrap()
                    .accept
            );
        }
    }

    #[test]
    fn rejecting_adversary_never_accepts() {
        let p = PkeParams::desk_small();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let out = pke_security_game(
                &mut RejectingAdversary,
                &mut oracle(wavy()),
                &p,
                &PkeGameConfig::default(),
                &mut rng,
            )
            .unwrap();
            assert!(!out.accept);
            assert_eq!((out.p0, out.pu), (0.0, 0.0));
        }
    }

    #[test]
    fn shifted_adversary_sees_encryptions_of_one() {
        let p = PkeParams::desk_small();
        let cfg = PkeGameConfig {
            shift_to_one: true,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut adv = RejectingAdversary;
        let out = pke_security_game(&mut adv, &mut oracle(wavy()), &p, &cfg, &mut rng).unwrap();
        assert!(!out.accept);
    }

    #[test]
    fn exhausted_oracle_is_an_error() {
        let p = PkeParams::desk_small();
        let mut o = UnknownDistribution::new(DensitySpec::Uniform, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = pke_security_game(
            &mut RejectingAdversary,
            &mut o,
            &p,
            &PkeGameConfig::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::StreamExhausted(5))));
    }

    #[test]
    fn games_are_deterministic() {
        let p = PkeParams::desk_small();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut adv = ClairvoyantAdversary::default();
            let o = pke_security_game(
                &mut adv,
                &mut oracle(wavy()),
                &p,
                &PkeGameConfig::default(),
                &mut rng,
            )
            .unwrap();
            (o.accept, o.p0, o.pu, o.secrets)
        };
        assert_eq!(run(7), run(7));
    }

    /// Bin masses of the density `2/x²` on `[1, 2)`, in the variable `x − 1`.
    fn inverse_square_masses(bins: usize) -> Vec<f64> {
        let cdf = |t: f64| 2.0 * (1.0 - 1.0 / (1.0 + t));
        (0..bins)
            .map(|b| cdf((b + 1) as f64 / bins as f64) - cdf(b as f64 / bins as f64))
            .collect()
    }

    fn distance_to_masses(xs: &[f64], masses: &[f64]) -> f64 {
        let counts = bin_counts(xs, masses.len());
        0.5 * counts
            .iter()
            .zip(masses)
            .map(|(&c, m)| (c as f64 / xs.len() as f64 - m).abs())
            .sum::<f64>()
    }

    #[test]
    fn conditioned_keys_against_keygen() {
        let p = PkeParams::desk_small();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sn = 65536.0;
        let g2 = p.gamma * p.gamma;
        let count = 20_000;
        let (mut game_h, mut game_b, mut key_h, mut key_b) = (vec![], vec![], vec![], vec![]);
        for _ in 0..count {
            let (dh, b) = sample_conditioned_key_shape(&p, 16.0, 2.0 / g2, &mut rng).unwrap();
            game_h.push(dh / sn - 1.0);
            game_b.push(b * g2 / 4.0 - 1.0);
        }
        let ctx = PrecisionContext::default();
        for _ in 0..count {
            let (sk, _, tr) = keygen_with_transcript(&p, &ctx, &mut rng).unwrap();
            key_h.push(sk.h.to_f64() / sn - 1.0);
            key_b.push(tr.beta * g2 / 4.0 - 1.0);
        }
        // β' matches keygen's β.
        assert!(statistical_distance_estimate(&game_b, &key_b, 32).unwrap() < 0.05);
        // Conditioning on β' reweights δh by 1/(δh)², so δh has density 2/x² on
        // [√N, 2√N) (in units of √N) while keygen's h is uniform there. The two
        // laws are 3 − 2√2 apart.
        let uniform = vec![1.0 / 32.0; 32];
        assert!(distance_to_masses(&game_h, &inverse_square_masses(32)) < 0.03);
        assert!(distance_to_masses(&key_h, &uniform) < 0.03);
        let gap = statistical_distance_estimate(&game_h, &key_h, 32).unwrap();
        assert!((gap - (3.0 - 2.0 * 2f64.sqrt())).abs() < 0.03, "{gap}");
    }
}
