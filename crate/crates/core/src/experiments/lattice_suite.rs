//! Empirical checks of the Gaussian measure `D_{L*}` on `𝒫(L*)`: close to
//! uniform when `L` has no short vectors, wavy along `u` when `u` is a unique
//! short vector.

use rand::Rng;

use crate::distributions::{bin_counts, chi_square_uniform_p};
use crate::error::{Error, Result};
use crate::lattice::{
    dual_basis, norm_sq, q_to_f64, sample_dual_gaussian_f64, t_dual_density, Basis, Vector,
};

/// Largest dimension the suite accepts.
pub const MAX_SUITE_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct UniformCheck {
    /// Grid cells over the dual coordinates.
    pub cells: usize,
    pub distance: f64,
    pub chi2_p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WavyCheck {
    pub bins: usize,
    pub u_norm: f64,
    /// Distance between the phase `⟨u, x⟩ mod 1` and the fibre of `T_{L*,u}`.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeDistributionReport {
    pub samples: usize,
    pub uniform: UniformCheck,
    pub wavy: Option<WavyCheck>,
}

impl LatticeDistributionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,samples,cells_or_bins,distance,chi2_p,u_norm\n");
        let u = &self.uniform;
        out += &format!(
            "uniform,{},{},{:.6},{:.6},\n",
            self.samples, u.cells, u.distance, u.chi2_p
        );
        if let Some(w) = &self.wavy {
            out += &format!(
                "wavy,{},{},{:.6},,{:.6}\n",
                self.samples, w.bins, w.distance, w.u_norm
            );
        }
        out
    }
}

/// Cells per axis so that the grid has at most `max_cells` cells.
fn cells_per_axis(n: usize, max_cells: usize) -> usize {
    let mut k = 1;
    while (k + 1usize).pow(n as u32) <= max_cells {
        k += 1;
    }
    k
}

/// Samples `D_{L*}` and reports its distance to `U_{L*}` on a coordinate grid
/// of at most `bins` cells, and, given a short vector `u ∈ L`, the distance of
/// the phase `⟨u, x⟩ mod 1` from the marginal of `T_{L*,u}` over `bins` bins.
pub fn lattice_distribution_suite<R: Rng + ?Sized>(
    basis: &Basis,
    short: Option<&Vector>,
    samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<LatticeDistributionReport> {
    let n = basis.dim();
    if n > MAX_SUITE_DIM {
        return Err(Error::Refused(format!(
            "suite supports n <= {MAX_SUITE_DIM}, got {n}"
        )));
    }
    if samples == 0 || bins == 0 {
        return Err(Error::Domain("need at least one sample and one bin".into()));
    }
    let coeffs = match short {
        Some(u) => Some(
            basis
                .integer_coordinates(u)?
                .filter(|c| c.iter().any(|x| x.sign() != num_bigint::Sign::NoSign))
                .ok_or_else(|| Error::Domain("u must be a nonzero lattice vector".into()))?
                .iter()
                .map(|c| num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::NAN))
                .collect::<Vec<f64>>(),
        ),
        None => None,
    };
    let cols = basis.to_f64_columns();
    let dual = dual_basis(basis)?.to_f64_columns();

    let k = cells_per_axis(n, bins);
    let cells = k.pow(n as u32);
    let mut counts = vec![0u64; cells];
    let mut phases = Vec::with_capacity(if coeffs.is_some() { samples } else { 0 });
    for _ in 0..samples {
        let s = sample_dual_gaussian_f64(&cols, &dual, rng);
        let cell = s.coords.iter().fold(0usize, |acc, &c| {
            acc * k + ((c * k as f64) as usize).min(k - 1)
        });
        counts[cell] += 1;
        if let Some(a) = &coeffs {
            let t: f64 = a.iter().zip(&s.coords).map(|(x, c)| x * c).sum();
            phases.push(t - t.floor());
        }
    }
    let expected = 1.0 / cells as f64;
    let distance = 0.5
        * counts
            .iter()
            .map(|&c| (c as f64 / samples as f64 - expected).abs())
            .sum::<f64>();
    let uniform = UniformCheck {
        cells,
        distance,
        chi2_p: chi_square_uniform_p(&counts),
    };

    let wavy = match short {
        Some(u) => {
            let uf: Vec<f64> = u.iter().map(q_to_f64).collect();
            let u2 = q_to_f64(&norm_sq(u));
            let det = q_to_f64(&basis.lattice_determinant());
            // Marginal of T_{L*,u} at phase φ, read off at x = φ u / ‖u‖².
            let fibre = |phi: f64| -> Result<f64> {
                let x: Vec<f64> = uf.iter().map(|c| phi * c / u2).collect();
                Ok(t_dual_density(basis, u, &x)? / det)
            };
            let per_bin = 64;
            let mut masses = Vec::with_capacity(bins);
            for b in 0..bins {
                let mut acc = 0.0;
                for j in 0..per_bin {
                    acc += fibre((b as f64 + (j as f64 + 0.5) / per_bin as f64) / bins as f64)?;
                }
                masses.push(acc / (per_bin * bins) as f64);
            }
            let hist = bin_counts(&phases, bins);
            let distance = 0.5
                * hist
                    .iter()
                    .zip(&masses)
                    .map(|(&c, m)| (c as f64 / samples as f64 - m).abs())
                    .sum::<f64>();
            Some(WavyCheck {
                bins,
                u_norm: u2.sqrt(),
                distance,
            })
        }
        None => None,
    };
    Ok(LatticeDistributionReport {
        samples,
        uniform,
        wavy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{q_frac, q_int};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_sizes() {
        assert_eq!(cells_per_axis(3, 64), 4);
        assert_eq!(cells_per_axis(2, 64), 8);
        assert_eq!(cells_per_axis(1, 64), 64);
    }

    #[test]
    fn scaled_integer_lattice_is_uniform() {
        let b = Basis::diagonal(&[q_int(3), q_int(3), q_int(3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = lattice_distribution_suite(&b, None, 100_000, 64, &mut rng).unwrap();
        assert!(r.uniform.distance < 0.02, "{r:?}");
        assert!(r.uniform.chi2_p > 1e-4);
        assert!(r.wavy.is_none());
    }

    #[test]
    fn short_vector_makes_it_wavy() {
        let b = Basis::diagonal(&[q_frac(1, 8), q_int(3), q_int(3)]).unwrap();
        let u = vec![q_frac(1, 8), q_int(0), q_int(0)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = lattice_distribution_suite(&b, Some(&u), 100_000, 64, &mut rng).unwrap();
        let w = r.wavy.clone().unwrap();
        assert!(w.distance < 0.02, "{r:?}");
        assert!(r.uniform.distance > 0.3);
        assert!(r.to_csv().lines().count() == 3);
    }

    #[test]
    fn one_dimensional_exact_comparison() {
        let b = Basis::diagonal(&[q_frac(1, 4)]).unwrap();
        let u = vec![q_frac(1, 4)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = lattice_distribution_suite(&b, Some(&u), 100_000, 16, &mut rng).unwrap();
        assert!(r.wavy.unwrap().distance < 0.01);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = Basis::identity(5);
        assert!(lattice_distribution_suite(&b, None, 10, 8, &mut rng).is_err());
        let b = Basis::identity(2);
        let not_in = vec![q_frac(1, 2), q_int(0)];
        assert!(lattice_distribution_suite(&b, Some(&not_in), 10, 8, &mut rng).is_err());
    }
}
