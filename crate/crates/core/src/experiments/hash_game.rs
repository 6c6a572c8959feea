//! Distinguishing `U` from a wavy distribution with a collision finder for the
//! subset-sum hash: sweep a geometric grid of period guesses `h̃` and test
//! whether `Σ b_i h̃ y_i` lands near an integer.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, RngCore};

use super::oracle::UnknownDistribution;
use crate::error::{Error, Result};
use crate::hash::{birthday_collision, bruteforce_collision, verify_collision, HashKey};
use crate::numerics::{frc, mod1};

pub trait CollisionFinder {
    /// A short relation `Σ b_i a_i ≡ 0 (mod N)`, or `None` on failure.
    fn find(&mut self, key: &HashKey) -> Option<Vec<i64>>;
}

/// Meet-in-the-middle over `{-1,0,1}^m`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MitmFinder;

impl CollisionFinder for MitmFinder {
    fn find(&mut self, key: &HashKey) -> Option<Vec<i64>> {
        bruteforce_collision(key).ok()
    }
}

/// Birthday search over subsets in Gray-code order.
#[derive(Clone, Copy, Debug)]
pub struct BirthdayFinder {
    pub max_steps: u64,
}

impl Default for BirthdayFinder {
    fn default() -> Self {
        Self { max_steps: 1 << 22 }
    }
}

impl CollisionFinder for BirthdayFinder {
    fn find(&mut self, key: &HashKey) -> Option<Vec<i64>> {
        birthday_collision(key, self.max_steps).ok()
    }
}

/// Never finds anything.
#[derive(Clone, Copy, Debug, Default)]
pub struct FailingFinder;

impl CollisionFinder for FailingFinder {
    fn find(&mut self, _key: &HashKey) -> Option<Vec<i64>> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashGameConfig {
    pub modulus: BigInt,
    pub m: usize,
    /// Security parameter: calls of the routine per grid point.
    pub n: u32,
    /// Finder success exponent; the routine gives up after `n^{c_a+1}` failures.
    pub c_a: f64,
    /// Grid ratio `μ`, so `h̃ = (1+μ)^i`.
    pub mu: f64,
}

impl HashGameConfig {
    pub fn desk() -> Self {
        Self {
            modulus: BigInt::from(1u32 << 16),
            m: 20,
            n: 16,
            c_a: 1.0,
            mu: 1.0 / 64.0,
        }
    }

    pub fn failure_budget(&self) -> u64 {
        f64::from(self.n).powf(self.c_a + 1.0).ceil() as u64
    }

    /// `(1+μ)^i` for `i = 0, 1, …` up to `N`.
    pub fn grid(&self) -> Vec<f64> {
        let top = self.modulus.to_f64().unwrap_or(f64::INFINITY);
        let steps = (top.ln() / self.mu.ln_1p()).ceil() as i32;
        (0..=steps)
            .map(|i| (1.0 + self.mu).powi(i))
            .take_while(|&h| h <= top)
            .collect()
    }
}

/// One run of the routine at a fixed `h̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutineOutcome {
    pub accept: bool,
    /// Set when the finder failed every time.
    pub finder_gave_up: bool,
    pub finder_calls: u64,
}

/// Draws `x_i` from the oracle and `y_i ∈ [0, 1/h̃)`, hashes `a_i = ⌊N(x_i − y_i mod 1)⌋`,
/// and tests `frc(Σ b_i h̃ y_i) < 1/4` on the finder's relation.
pub fn routine_c(
    finder: &mut dyn CollisionFinder,
    oracle: &mut UnknownDistribution,
    config: &HashGameConfig,
    h_tilde: f64,
    rng: &mut dyn RngCore,
) -> Result<RoutineOutcome> {
    let nf = config.modulus.to_f64().ok_or(Error::Rank)?;
    let budget = config.failure_budget();
    for call in 1..=budget {
        let mut y = Vec::with_capacity(config.m);
        let mut a = Vec::with_capacity(config.m);
        for _ in 0..config.m {
            let x = oracle.draw(rng)?;
            let yi = rng.random::<f64>() / h_tilde;
            let z = mod1(x - yi);
            a.push(BigInt::from(((z * nf).floor() as u64).min(nf as u64 - 1)));
            y.push(yi);
        }
        let key = HashKey::new(config.modulus.clone(), a)?;
        let Some(b) = finder.find(&key) else { continue };
        if !verify_collision(&key, &b) {
            continue;
        }
        let t: f64 = b
            .iter()
            .zip(&y)
            .map(|(&bi, yi)| bi as f64 * h_tilde * yi)
            .sum();
        return Ok(RoutineOutcome {
            accept: frc(t) < 0.25,
            finder_gave_up: false,
            finder_calls: call,
        });
    }
    Ok(RoutineOutcome {
        accept: true,
        finder_gave_up: true,
        finder_calls: budget,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashGameOutcome {
    pub accept: bool,
    /// First grid value where all `n` calls accepted.
    pub h_tilde: Option<f64>,
    pub routine_calls: u64,
    pub routine_accepts: u64,
    pub finder_calls: u64,
}

/// Sweeps the grid; accepts at the first `h̃` whose `n` calls all accept.
pub fn hash_distinguisher_game(
    finder: &mut dyn CollisionFinder,
    oracle: &mut UnknownDistribution,
    config: &HashGameConfig,
    rng: &mut dyn RngCore,
) -> Result<HashGameOutcome> {
    let mut out = HashGameOutcome {
        accept: false,
        h_tilde: None,
        routine_calls: 0,
        routine_accepts: 0,
        finder_calls: 0,
    };
    for h_tilde in config.grid() {
        let mut all = true;
        for _ in 0..config.n {
            let r = routine_c(finder, oracle, config, h_tilde, rng)?;
            out.routine_calls += 1;
            out.finder_calls += r.finder_calls;
            if r.accept {
                out.routine_accepts += 1;
            } else {
                all = false;
                break;
            }
        }
        if all {
            out.accept = true;
            out.h_tilde = Some(h_tilde);
            return Ok(out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DensitySpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn oracle(spec: DensitySpec) -> UnknownDistribution {
        UnknownDistribution::new(spec, u64::MAX).unwrap()
    }

    #[test]
    fn grid_is_geometric_up_to_n() {
        let c = HashGameConfig::desk();
        let g = c.grid();
        assert_eq!(g[0], 1.0);
        assert!(*g.last().unwrap() <= 65536.0);
        assert!(g.last().unwrap() * (1.0 + c.mu) > 65536.0);
        assert_eq!(c.failure_budget(), 256);
    }

    #[test]
    fn per_call_acceptance_on_uniform_is_one_half() {
        let c = HashGameConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut o = oracle(DensitySpec::Uniform);
        let mut f = BirthdayFinder::default();
        let grid = c.grid();
        let calls = 10_000;
        let acc = (0..calls)
            .filter(|i| {
                routine_c(&mut f, &mut o, &c, grid[i % grid.len()], &mut rng)
                    .unwrap()
                    .accept
            })
            .count();
        let p = acc as f64 / calls as f64;
        assert!((0.45..=0.55).contains(&p), "{p}");
    }

    #[test]
    fn uniform_rejected_and_wavy_accepted() {
        let c = HashGameConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut f = BirthdayFinder::default();
        let games = 30;
        let u = (0..games)
            .filter(|_| {
                hash_distinguisher_game(&mut f, &mut oracle(DensitySpec::Uniform), &c, &mut rng)
                    .unwrap()
                    .accept
            })
            .count();
        let t = (0..games)
            .filter(|_| {
                let spec = DensitySpec::T {
                    h: 16.0,
                    beta: 1e-3,
                };
                hash_distinguisher_game(&mut f, &mut oracle(spec), &c, &mut rng)
                    .unwrap()
                    .accept
            })
            .count();
        assert!(u <= 2, "{u}");
        assert!(t >= games / 2, "{t}");
    }

    #[test]
    fn mitm_finder_works_in_the_routine() {
        let c = HashGameConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = routine_c(
            &mut MitmFinder,
            &mut oracle(DensitySpec::Uniform),
            &c,
            4.0,
            &mut rng,
        )
        .unwrap();
        assert!(!r.finder_gave_up);
        assert_eq!(r.finder_calls, 1);
    }

    #[test]
    fn failing_finder_makes_everything_accept() {
        let c = HashGameConfig {
            n: 4,
            ..HashGameConfig::desk()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = routine_c(
            &mut FailingFinder,
            &mut oracle(DensitySpec::Uniform),
            &c,
            2.0,
            &mut rng,
        )
        .unwrap();
        assert!(r.accept && r.finder_gave_up);
        assert_eq!(r.finder_calls, 16);
        let g = hash_distinguisher_game(
            &mut FailingFinder,
            &mut oracle(DensitySpec::Uniform),
            &c,
            &mut rng,
        )
        .unwrap();
        assert!(g.accept);
        assert_eq!(g.h_tilde, Some(1.0));
        assert_eq!(g.finder_calls, 4 * 16);
    }

    #[test]
    fn games_are_deterministic() {
        let c = HashGameConfig::desk();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = DensitySpec::T {
                h: 16.0,
                beta: 1e-3,
            };
            hash_distinguisher_game(
                &mut BirthdayFinder::default(),
                &mut oracle(spec),
                &c,
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(run(9), run(9));
    }
}
