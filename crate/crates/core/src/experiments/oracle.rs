//! Sample access to a hidden one-dimensional distribution.

use rand::{Rng, RngCore};

use crate::distributions::{Density, DensitySpec};
use crate::error::{Error, Result};

/// Draws from a hidden density up to a fixed budget. Games may only call
/// [`UnknownDistribution::draw`]; the spec is exposed for scoring.
#[derive(Clone, Debug)]
pub struct UnknownDistribution {
    density: Density,
    budget: u64,
    drawn: u64,
}

impl UnknownDistribution {
    pub fn new(hidden: DensitySpec, budget: u64) -> Result<Self> {
        Ok(Self {
            density: Density::of(hidden)?,
            budget,
            drawn: 0,
        })
    }

    pub fn draw(&mut self, rng: &mut dyn RngCore) -> Result<f64> {
        if self.drawn >= self.budget {
            return Err(Error::StreamExhausted(self.budget as usize));
        }
        self.drawn += 1;
        self.density.sample_with(rng)
    }

    pub fn hidden(&self) -> &DensitySpec {
        self.density.spec()
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }
}

/// The admissible wavy distributions: integer `h ≤ h_max` and
/// `β ∈ [beta_lo, beta_hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TWindow {
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub h_max: u64,
}

impl TWindow {
    /// `β ∈ [n/g², 4n/g²)`, `h ≤ 2^{c_h n²}` (capped at 2^62).
    pub fn from_ng(n: u32, g: f64, c_h: f64) -> Self {
        let nf = f64::from(n);
        let bits = (c_h * nf * nf).min(62.0);
        Self {
            beta_lo: nf / (g * g),
            beta_hi: 4.0 * nf / (g * g),
            h_max: 2f64.powf(bits) as u64,
        }
    }

    /// `β ∈ [1/γ², 4/γ²)`, the window with `g = √n γ`.
    pub fn for_gamma(gamma: f64, h_max: u64) -> Self {
        Self {
            beta_lo: 1.0 / (gamma * gamma),
            beta_hi: 4.0 / (gamma * gamma),
            h_max,
        }
    }

    pub fn contains(&self, spec: &DensitySpec) -> bool {
        match *spec {
            DensitySpec::T { h, beta } => {
                h.fract() == 0.0
                    && h >= 1.0
                    && h <= self.h_max as f64
                    && beta >= self.beta_lo
                    && beta < self.beta_hi
            }
            _ => false,
        }
    }

    /// Uniform integer `h ∈ [h_lo, h_max]` and uniform `β` in the window.
    pub fn sample<R: Rng + ?Sized>(&self, h_lo: u64, rng: &mut R) -> Result<DensitySpec> {
        if h_lo == 0 || h_lo > self.h_max {
            return Err(Error::Parameter(format!(
                "need 1 <= h_lo <= {}",
                self.h_max
            )));
        }
        let h = rng.random_range(h_lo..=self.h_max) as f64;
        Ok(DensitySpec::T {
            h,
            beta: rng.random_range(self.beta_lo..self.beta_hi),
        })
    }
}
