//! Games for general periodic distributions `T^D_h`: the dihedral-coset game,
//! which turns a `Z_k` solver into a distinguisher, and the grid distinguisher
//! that turns a `U` vs `T^D_h` detector into a `U` vs `T_{h,β}` one.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::oracle::UnknownDistribution;
use crate::distributions::{DensitySpec, PeriodicShape};
use crate::error::{Error, Result};
use crate::numerics::{frc, mod1};

pub trait ZkSolver {
    fn observe(&mut self, _hidden: &DensitySpec) {}
    /// Recovers `k` from samples `z ∈ {0, …, N−1}`.
    fn solve(&mut self, samples: &[u64], modulus: u64) -> u64;
}

/// Reports the frequency of the hidden `T^D_h` when there is one, and a fixed
/// fallback otherwise.
#[derive(Clone, Copy, Debug)]
pub struct KnownFrequencySolver {
    pub fallback: u64,
    known: Option<u64>,
}

impl KnownFrequencySolver {
    pub fn new(fallback: u64) -> Self {
        Self {
            fallback,
            known: None,
        }
    }
}

impl ZkSolver for KnownFrequencySolver {
    fn observe(&mut self, hidden: &DensitySpec) {
        self.known = match *hidden {
            DensitySpec::TD { h, .. } | DensitySpec::T { h, .. } => Some(h as u64),
            _ => None,
        };
    }

    fn solve(&mut self, _samples: &[u64], _modulus: u64) -> u64 {
        self.known.unwrap_or(self.fallback)
    }
}

/// Exhaustive maximum likelihood over `k ∈ [1, k_max]`.
#[derive(Clone, Copy, Debug)]
pub struct MaxLikelihoodSolver {
    pub k_max: u64,
}

impl ZkSolver for MaxLikelihoodSolver {
    fn solve(&mut self, samples: &[u64], modulus: u64) -> u64 {
        let score = |k: u64| -> f64 {
            samples
                .iter()
                .map(|&z| {
                    let c = (PI * k as f64 * z as f64 / modulus as f64).cos();
                    (c * c).max(1e-300).ln()
                })
                .sum()
        };
        (1..=self.k_max.max(1))
            .map(|k| (k, score(k)))
            .fold((1, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b })
            .0
    }
}

/// Always answers `k`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSolver(pub u64);

impl ZkSolver for ConstantSolver {
    fn solve(&mut self, _samples: &[u64], _modulus: u64) -> u64 {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DihedralOutcome {
    pub accept: bool,
    pub k: u64,
    pub r: f64,
}

/// Feeds `⌊N R⌋` samples to the solver, draws one more `r`, accepts iff
/// `frc(r k) < 1/4`.
pub fn dihedral_reduction_game(
    solver: &mut dyn ZkSolver,
    oracle: &mut UnknownDistribution,
    modulus: u64,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<DihedralOutcome> {
    if modulus < 2 {
        return Err(Error::Parameter("N must be at least 2".into()));
    }
    solver.observe(oracle.hidden());
    let zs = (0..samples)
        .map(|_| Ok(((oracle.draw(rng)? * modulus as f64) as u64).min(modulus - 1)))
        .collect::<Result<Vec<_>>>()?;
    let k = solver.solve(&zs, modulus);
    let r = oracle.draw(rng)?;
    Ok(DihedralOutcome {
        accept: frc(r * k as f64) < 0.25,
        k,
        r,
    })
}

pub trait PeriodicDetector {
    fn observe(&mut self, _hidden: &DensitySpec) {}
    fn sequence_len(&self) -> usize;
    fn accept(&mut self, seq: &[f64]) -> bool;
}

/// Knows `h`; accepts when the mean of `D(h r mod 1)` exceeds `threshold`.
/// With `D = 2cos²(πr)` the mean is 1 under `U` and 3/2 under `T^D_h`.
#[derive(Clone, Copy, Debug)]
pub struct ClairvoyantPeriodicDetector {
    pub shape: PeriodicShape,
    pub len: usize,
    pub threshold: f64,
    h: f64,
}

impl ClairvoyantPeriodicDetector {
    pub fn new(shape: PeriodicShape, len: usize, threshold: f64) -> Self {
        Self {
            shape,
            len,
            threshold,
            h: 1.0,
        }
    }
}

impl PeriodicDetector for ClairvoyantPeriodicDetector {
    fn observe(&mut self, hidden: &DensitySpec) {
        if let DensitySpec::T { h, .. } | DensitySpec::TD { h, .. } = *hidden {
            self.h = h;
        }
    }

    fn sequence_len(&self) -> usize {
        self.len
    }

    fn accept(&mut self, seq: &[f64]) -> bool {
        let mean = seq
            .iter()
            .map(|&r| self.shape.eval(mod1(self.h * r)))
            .sum::<f64>()
            / seq.len().max(1) as f64;
        mean > self.threshold
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGameConfig {
    pub shape: PeriodicShape,
    /// Grid ratio `μ`.
    pub mu: f64,
    pub h_max: f64,
    /// Sequences per acceptance estimate.
    pub sequences: usize,
    /// Accept when the estimate is further than this from `p̂_u`.
    pub gap_threshold: f64,
}

impl Default for PeriodicGameConfig {
    fn default() -> Self {
        Self {
            shape: PeriodicShape::CosSquared,
            mu: 1.0 / 16.0,
            h_max: 64.0,
            sequences: 100,
            gap_threshold: 0.25,
        }
    }
}

impl PeriodicGameConfig {
    /// `{1, 1+μ, (1+μ)², …}` up to `h_max`.
    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.h_max.ln() / self.mu.ln_1p()).floor() as i32;
        (0..=steps).map(|i| (1.0 + self.mu).powi(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicOutcome {
    pub accept: bool,
    pub h_tilde: f64,
    pub p_shifted: f64,
    pub p_uniform: f64,
}

/// Picks `h̃` from the grid, feeds the detector sequences from
/// `R' = R + D/h̃ mod 1` and from `U`, and accepts on a large difference.
pub fn general_periodic_distinguisher(
    detector: &mut dyn PeriodicDetector,
    oracle: &mut UnknownDistribution,
    config: &PeriodicGameConfig,
    rng: &mut dyn RngCore,
) -> Result<PeriodicOutcome> {
    let grid = config.grid();
    let h_tilde = grid[rng.random_range(0..grid.len())];
    detector.observe(oracle.hidden());
    let len = detector.sequence_len();
    let (mut hits, mut hits_u) = (0usize, 0usize);
    let mut seq = vec![0.0; len];
    for _ in 0..config.sequences {
        for v in seq.iter_mut() {
            *v = mod1(oracle.draw(rng)? + config.shape.sample(rng)? / h_tilde);
        }
        hits += usize::from(detector.accept(&seq));
        for v in seq.iter_mut() {
            *v = rng.random();
        }
        hits_u += usize::from(detector.accept(&seq));
    }
    let e = config.sequences.max(1) as f64;
    let (p_shifted, p_uniform) = (hits as f64 / e, hits_u as f64 / e);
    Ok(PeriodicOutcome {
        accept: (p_shifted - p_uniform).abs() > config.gap_threshold,
        h_tilde,
        p_shifted,
        p_uniform,
    })
}
