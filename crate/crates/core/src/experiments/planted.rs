//! Random lattices with a planted unique shortest vector.

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{norm_sq, q_int, q_to_f64, scale, shortest_vector_enum, Basis, Vector, Q};

/// Attempts before giving up on a planted instance.
pub const PLANT_ATTEMPTS: usize = 16;
/// Largest dimension the generator validates by enumeration.
pub const MAX_PLANT_DIM: usize = 6;

#[derive(Clone, Debug)]
pub struct PlantedLattice {
    pub basis: Basis,
    /// The planted shortest vector.
    pub tau: Vector,
    /// Coefficients of `tau` in `basis`.
    pub coefficients: Vec<BigInt>,
    pub lambda: f64,
    /// Verified lower bound on the uniqueness ratio.
    pub ratio: f64,
}

/// Builds a basis of dimension `n` whose shortest vector is `≥ ratio` times
/// shorter than every non-parallel vector, verified by enumeration.
pub fn planted_unique_lattice<R: Rng + ?Sized>(
    n: usize,
    ratio: f64,
    rng: &mut R,
) -> Result<PlantedLattice> {
    if n == 0 || n > MAX_PLANT_DIM || !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::Parameter(format!(
            "need 1 <= n <= {MAX_PLANT_DIM} and ratio >= 1, got n={n}, ratio={ratio}"
        )));
    }
    let r = (2.0 * ratio).ceil() as i64 + 1;
    for _ in 0..PLANT_ATTEMPTS {
        // Column 0 is e_1; column k is R e_k with small noise off the e_1 axis.
        let mut cols = vec![vec![0i64; n]; n];
        cols[0][0] = 1;
        for (k, col) in cols.iter_mut().enumerate().skip(1) {
            col[0] = rng.random_range(0..r);
            col[k] = r;
            for (t, c) in col.iter_mut().enumerate().skip(1) {
                if t != k {
                    *c = rng.random_range(-(r / 8)..=r / 8);
                }
            }
        }
        let mixed = unimodular_mix(cols, rng);
        let Ok(basis) = Basis::from_integer_columns(&mixed) else {
            continue;
        };
        let tau: Vector = (0..n).map(|i| q_int(i64::from(i == 0))).collect();
        let svp = shortest_vector_enum(&basis, ratio)?;
        if svp.norm_sq != norm_sq(&tau) || svp.uniqueness_ratio < ratio {
            continue;
        }
        let coefficients = basis.integer_coordinates(&tau)?.ok_or(Error::Rank)?;
        if coefficients.iter().all(Zero::is_zero) {
            continue;
        }
        return Ok(PlantedLattice {
            lambda: q_to_f64(&norm_sq(&tau)).sqrt(),
            ratio: svp.uniqueness_ratio,
            basis,
            tau,
            coefficients,
        });
    }
    Err(Error::NotFound(format!(
        "no planted lattice after {PLANT_ATTEMPTS} attempts"
    )))
}

/// As [`planted_unique_lattice`], scaled so the planted vector has length
/// `lambda` (taken exactly from its binary expansion).
pub fn plant_unique_lattice<R: Rng + ?Sized>(
    n: usize,
    lambda: f64,
    ratio: f64,
    rng: &mut R,
) -> Result<PlantedLattice> {
    let l = Q::from_float(lambda)
        .filter(|l| *l > Q::from_integer(0.into()))
        .ok_or_else(|| {
            Error::Parameter(format!("lambda must be positive and finite, got {lambda}"))
        })?;
    let pl = planted_unique_lattice(n, ratio, rng)?;
    Ok(PlantedLattice {
        basis: pl.basis.scaled(&l)?,
        tau: scale(&pl.tau, &l),
        lambda: pl.lambda * lambda,
        ..pl
    })
}

/// Applies random elementary column operations.
fn unimodular_mix<R: Rng + ?Sized>(mut cols: Vec<Vec<i64>>, rng: &mut R) -> Vec<Vec<i64>> {
    let n = cols.len();
    if n < 2 {
        return cols;
    }
    for _ in 0..2 * n * n {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        match rng.random_range(0..4) {
            0 => cols.swap(i, j),
            1 => cols[i].iter_mut().for_each(|x| *x = -*x),
            _ => {
                let t = rng.random_range(-2i64..=2);
                let cj = cols[j].clone();
                for (x, y) in cols[i].iter_mut().zip(cj) {
                    *x += t * y;
                }
            }
        }
    }
    cols
}
