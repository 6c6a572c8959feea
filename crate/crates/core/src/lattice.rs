//! Exact lattice linear algebra over the rationals: bases, Gram–Schmidt, LLL,
//! duals, reduction modulo the fundamental parallelepiped, shortest-vector
//! enumeration, and Gaussian measures on lattices.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

pub type Q = BigRational;
pub type Vector = Vec<Q>;

/// Enumeration-backed operations refuse above this dimension.
pub const MAX_ENUM_DIM: usize = 12;
/// Enumeration gives up after visiting this many tree nodes.
pub const MAX_ENUM_NODES: u64 = 100_000_000;
/// Relative radius slack that absorbs floating-point error in enumeration.
const RADIUS_SLACK: f64 = 1e-6;

pub fn q_int(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

pub fn q_frac(p: i64, q: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(q))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

pub fn norm_sq(a: &[Q]) -> Q {
    dot(a, a)
}

pub fn scale(a: &[Q], s: &Q) -> Vector {
    a.iter().map(|x| x * s).collect()
}

pub fn add(a: &[Q], b: &[Q]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn to_f64_vec(a: &[Q]) -> Vec<f64> {
    a.iter().map(q_to_f64).collect()
}

/// Exact square matrix determinant by fraction-preserving elimination.
fn determinant_rows(mut m: Vec<Vec<Q>>) -> Q {
    let n = m.len();
    let mut det = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let pivot = m[c][c].clone();
        det *= &pivot;
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] / &pivot;
            for k in c..n {
                let t = &f * &m[c][k];
                m[r][k] -= t;
            }
        }
    }
    det
}

/// Solves `m y = x` exactly; `m` given by rows.
fn solve_rows(mut m: Vec<Vec<Q>>, x: &[Q]) -> Result<Vector> {
    let n = m.len();
    let mut rhs = x.to_vec();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero()).ok_or(Error::Rank)?;
        m.swap(p, c);
        rhs.swap(p, c);
        let inv = m[c][c].recip();
        for k in c..n {
            m[c][k] *= &inv;
        }
        rhs[c] *= &inv;
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for k in c..n {
                let t = &f * &m[c][k];
                m[r][k] -= t;
            }
            let t = &f * &rhs[c];
            rhs[r] -= t;
        }
    }
    Ok(rhs)
}

/// A full-rank lattice basis in `Q^n`, stored by columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    cols: Vec<Vector>,
}

impl Basis {
    pub fn new(cols: Vec<Vector>) -> Result<Self> {
        let n = cols.len();
        if n == 0 || cols.iter().any(|c| c.len() != n) {
            return domain("basis must be n columns of length n, n >= 1");
        }
        let b = Self { cols };
        if b.determinant().is_zero() {
            return Err(Error::Rank);
        }
        Ok(b)
    }

    pub fn from_integer_columns(cols: &[Vec<i64>]) -> Result<Self> {
        Self::new(
            cols.iter()
                .map(|c| c.iter().map(|&x| q_int(x)).collect())
                .collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Q::one(); n]).expect("identity is nonsingular")
    }

    pub fn diagonal(d: &[Q]) -> Result<Self> {
        let n = d.len();
        Self::new(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { d[i].clone() } else { Q::zero() })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn columns(&self) -> &[Vector] {
        &self.cols
    }

    pub fn column(&self, i: usize) -> &Vector {
        &self.cols[i]
    }

    pub fn into_columns(self) -> Vec<Vector> {
        self.cols
    }

    fn rows(&self) -> Vec<Vec<Q>> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.cols[c][r].clone()).collect())
            .collect()
    }

    /// Signed determinant of the column matrix.
    pub fn determinant(&self) -> Q {
        determinant_rows(self.rows())
    }

    /// `d(L) = |det B|`.
    pub fn lattice_determinant(&self) -> Q {
        self.determinant().abs()
    }

    /// `B c` for an integer coefficient vector.
    pub fn combine(&self, coeffs: &[BigInt]) -> Vector {
        let n = self.dim();
        let mut out = vec![Q::zero(); n];
        for (c, col) in coeffs.iter().zip(&self.cols) {
            if c.is_zero() {
                continue;
            }
            let c = Q::from_integer(c.clone());
            for (o, x) in out.iter_mut().zip(col) {
                *o += &c * x;
            }
        }
        out
    }

    /// Coordinates `B^{-1} x`.
    pub fn coordinates(&self, x: &[Q]) -> Result<Vector> {
        if x.len() != self.dim() {
            return domain("vector dimension does not match basis");
        }
        solve_rows(self.rows(), x)
    }

    /// Integer coordinates of `x` if `x ∈ L`.
    pub fn integer_coordinates(&self, x: &[Q]) -> Result<Option<Vec<BigInt>>> {
        let c = self.coordinates(x)?;
        Ok(c.iter()
            .all(|q| q.is_integer())
            .then(|| c.iter().map(|q| q.to_integer()).collect()))
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        matches!(self.integer_coordinates(x), Ok(Some(_)))
    }

    /// Replaces column `i`.
    pub fn with_column(&self, i: usize, v: Vector) -> Result<Self> {
        let mut cols = self.cols.clone();
        cols[i] = v;
        Self::new(cols)
    }

    /// Every column multiplied by `s`.
    pub fn scaled(&self, s: &Q) -> Result<Self> {
        Self::new(self.cols.iter().map(|c| scale(c, s)).collect())
    }

    /// True if `other` generates the same lattice.
    pub fn same_lattice(&self, other: &Basis) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let fwd = other.cols.iter().all(|c| self.contains(c));
        fwd && self.lattice_determinant() == other.lattice_determinant()
    }

    pub fn to_f64_columns(&self) -> Vec<Vec<f64>> {
        self.cols.iter().map(|c| to_f64_vec(c)).collect()
    }

    /// Common denominator of all entries.
    fn denominator_lcm(&self) -> BigInt {
        self.cols
            .iter()
            .flatten()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
    }
}

/// File format: first line `n`, then one line per column vector `v_i` with `n`
/// space-separated rationals `p/q` (or integers).
impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.dim())?;
        for c in &self.cols {
            let line: Vec<String> = c.iter().map(|x| x.to_string()).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty basis file".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad dimension line".into()))?;
        let mut cols = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing column {i}")))?;
            let col = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<Q>()
                        .map_err(|_| Error::Parse(format!("bad rational {t:?}")))
                })
                .collect::<Result<Vector>>()?;
            if col.len() != n {
                return Err(Error::Parse(format!(
                    "column {i} has {} entries, expected {n}",
                    col.len()
                )));
            }
            cols.push(col);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after basis".into()));
        }
        Basis::new(cols)
    }
}

/// Exact Gram–Schmidt data. `mu[i][j] = ⟨v_i, v_j†⟩ / ‖v_j†‖²` for `j < i`.
#[derive(Clone, Debug)]
pub struct GramSchmidtData {
    pub ortho: Vec<Vector>,
    pub norms_sq: Vec<Q>,
    pub mu: Vec<Vec<Q>>,
}

pub fn gram_schmidt(b: &Basis) -> Result<GramSchmidtData> {
    let n = b.dim();
    let mut ortho: Vec<Vector> = Vec::with_capacity(n);
    let mut norms_sq: Vec<Q> = Vec::with_capacity(n);
    let mut mu = vec![vec![Q::zero(); n]; n];
    for i in 0..n {
        let mut v = b.cols[i].clone();
        for j in 0..i {
            let m = dot(&b.cols[i], &ortho[j]) / &norms_sq[j];
            v = sub(&v, &scale(&ortho[j], &m));
            mu[i][j] = m;
        }
        let ns = norm_sq(&v);
        if ns.is_zero() {
            return Err(Error::Rank);
        }
        mu[i][i] = Q::one();
        ortho.push(v);
        norms_sq.push(ns);
    }
    Ok(GramSchmidtData {
        ortho,
        norms_sq,
        mu,
    })
}

fn int_dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter()
        .zip(b)
        .fold(BigInt::zero(), |acc, (x, y)| acc + x * y)
}

/// Integral LLL with `δ = 3/4` on integer vectors, exact throughout.
fn lll_integral(b: &mut [Vec<BigInt>]) -> Result<()> {
    let n = b.len();
    if n <= 1 {
        return Ok(());
    }
    let mut d = vec![BigInt::zero(); n + 1];
    d[0] = BigInt::one();
    d[1] = int_dot(&b[0], &b[0]);
    if d[1].is_zero() {
        return Err(Error::Rank);
    }
    let mut lam = vec![vec![BigInt::zero(); n]; n];
    let (mut k, mut kmax) = (1usize, 0usize);

    fn red(b: &mut [Vec<BigInt>], lam: &mut [Vec<BigInt>], d: &[BigInt], k: usize, l: usize) {
        let two_l: BigInt = &lam[k][l] * 2;
        if two_l.abs() <= d[l + 1] {
            return;
        }
        let q = (&two_l + &d[l + 1]).div_floor(&(&d[l + 1] * 2));
        let bl = b[l].clone();
        for (x, y) in b[k].iter_mut().zip(&bl) {
            *x -= &q * y;
        }
        lam[k][l] -= &q * &d[l + 1];
        for i in 0..l {
            let t = &q * &lam[l][i];
            lam[k][i] -= t;
        }
    }

    while k < n {
        if k > kmax {
            kmax = k;
            for j in 0..=k {
                let mut u = int_dot(&b[k], &b[j]);
                for i in 0..j {
                    u = (&d[i + 1] * &u - &lam[k][i] * &lam[j][i]) / &d[i];
                }
                if j < k {
                    lam[k][j] = u;
                } else {
                    if u.is_zero() {
                        return Err(Error::Rank);
                    }
                    d[k + 1] = u;
                }
            }
        }
        red(b, &mut lam, &d, k, k - 1);
        let l = lam[k][k - 1].clone();
        let lhs: BigInt = &d[k + 1] * &d[k - 1] * 4;
        let rhs: BigInt = &d[k] * &d[k] * 3 - &l * &l * 4;
        if lhs < rhs {
            b.swap(k, k - 1);
            for j in 0..k - 1 {
                let t = std::mem::take(&mut lam[k][j]);
                lam[k][j] = std::mem::replace(&mut lam[k - 1][j], t);
            }
            let bb = (&d[k - 1] * &d[k + 1] + &l * &l) / &d[k];
            for i in k + 1..=kmax {
                let t = lam[i][k].clone();
                lam[i][k] = (&d[k + 1] * &lam[i][k - 1] - &l * &t) / &d[k];
                lam[i][k - 1] = (&bb * &t + &l * &lam[i][k]) / &d[k + 1];
            }
            d[k] = bb;
            k = (k - 1).max(1);
        } else {
            for l in (0..k - 1).rev() {
                red(b, &mut lam, &d, k, l);
            }
            k += 1;
        }
    }
    Ok(())
}

/// LLL reduction (`δ = 3/4`): size-reduced with `‖v_i†‖ ≤ √2 ‖v_{i+1}†‖`.
pub fn lll_reduce(b: &Basis) -> Result<Basis> {
    let den = b.denominator_lcm();
    let mut ints: Vec<Vec<BigInt>> = b
        .cols
        .iter()
        .map(|c| {
            c.iter()
                .map(|x| (x * Q::from_integer(den.clone())).to_integer())
                .collect()
        })
        .collect();
    lll_integral(&mut ints)?;
    let cols = ints
        .into_iter()
        .map(|c| c.into_iter().map(|x| Q::new(x, den.clone())).collect())
        .collect();
    Basis::new(cols)
}

/// `(B^T)^{-1}`, whose columns satisfy `⟨v_i, v*_j⟩ = δ_ij`.
pub fn dual_basis(b: &Basis) -> Result<Basis> {
    let n = b.dim();
    // Column j of the dual solves B^T y = e_j.
    let bt: Vec<Vec<Q>> = b.cols.clone();
    let cols = (0..n)
        .map(|j| {
            let e: Vector = (0..n)
                .map(|i| if i == j { Q::one() } else { Q::zero() })
                .collect();
            solve_rows(bt.clone(), &e)
        })
        .collect::<Result<Vec<_>>>()?;
    Basis::new(cols)
}

/// The unique `y ∈ 𝒫(B)` with `y - x ∈ L`.
pub fn reduce_mod_pp(x: &[Q], b: &Basis) -> Result<Vector> {
    let c = b.coordinates(x)?;
    let frac: Vec<Q> = c.iter().map(|q| q - q.floor()).collect();
    let n = b.dim();
    let mut out = vec![Q::zero(); n];
    for (f, col) in frac.iter().zip(&b.cols) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += f * v;
        }
    }
    Ok(out)
}

/// Floating-point Gram–Schmidt data (from the exact computation) for enumeration.
struct FloatGs {
    n: usize,
    bstar: Vec<f64>,
    mu: Vec<Vec<f64>>,
    ortho: Vec<Vec<f64>>,
}

impl FloatGs {
    fn new(b: &Basis) -> Result<Self> {
        let gs = gram_schmidt(b)?;
        Ok(Self {
            n: b.dim(),
            bstar: gs.norms_sq.iter().map(q_to_f64).collect(),
            mu: gs.mu.iter().map(|r| to_f64_vec(r)).collect(),
            ortho: gs.ortho.iter().map(|v| to_f64_vec(v)).collect(),
        })
    }

    /// Gram–Schmidt coordinates `t_i = ⟨s, v_i†⟩ / ‖v_i†‖²` of a shift vector.
    fn shift_coords(&self, s: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.ortho[i].iter().zip(s).map(|(a, b)| a * b).sum::<f64>() / self.bstar[i])
            .collect()
    }
}

/// Depth-first enumeration of `c ∈ Z^n` with `‖B c + s‖² ≤ bound`. The visitor
/// may shrink the bound by returning `Some(new_bound)`.
fn enumerate<F>(gs: &FloatGs, shift: &[f64], bound: f64, mut visit: F) -> Result<u64>
where
    F: FnMut(&[i64], f64) -> Option<f64>,
{
    struct St<'a, F> {
        gs: &'a FloatGs,
        t: &'a [f64],
        bound: f64,
        nodes: u64,
        x: Vec<i64>,
        visit: F,
    }
    fn rec<F: FnMut(&[i64], f64) -> Option<f64>>(
        st: &mut St<'_, F>,
        i: usize,
        partial: f64,
    ) -> Result<()> {
        let n = st.gs.n;
        let mut c = -st.t[i];
        for j in i + 1..n {
            c -= st.gs.mu[j][i] * st.x[j] as f64;
        }
        let rem = st.bound - partial;
        if rem < 0.0 {
            return Ok(());
        }
        let w = (rem / st.gs.bstar[i]).sqrt();
        let (lo, hi) = ((c - w).ceil() as i64, (c + w).floor() as i64);
        for xi in lo..=hi {
            st.nodes += 1;
            if st.nodes > MAX_ENUM_NODES {
                return Err(Error::Refused(format!(
                    "enumeration exceeded {MAX_ENUM_NODES} nodes"
                )));
            }
            let dlt = xi as f64 - c;
            let p = partial + st.gs.bstar[i] * dlt * dlt;
            if p > st.bound {
                continue;
            }
            st.x[i] = xi;
            if i == 0 {
                if let Some(nb) = (st.visit)(&st.x, p) {
                    st.bound = nb;
                }
            } else {
                rec(st, i - 1, p)?;
            }
        }
        st.x[i] = 0;
        Ok(())
    }
    let t = gs.shift_coords(shift);
    let mut st = St {
        gs,
        t: &t,
        bound,
        nodes: 0,
        x: vec![0; gs.n],
        visit: &mut visit,
    };
    rec(&mut st, gs.n - 1, 0.0)?;
    Ok(st.nodes)
}

fn check_enum_dim(b: &Basis, max: usize) -> Result<()> {
    if b.dim() > max {
        return Err(Error::Refused(format!(
            "dimension {} exceeds enumeration limit {max}",
            b.dim()
        )));
    }
    Ok(())
}

/// Output of [`shortest_vector_enum`].
#[derive(Clone, Debug)]
pub struct ShortestVectorResult {
    /// `τ(L)`, sign-normalized so the first nonzero coefficient is positive.
    pub vector: Vector,
    /// Coefficients of `τ` in the input basis.
    pub coefficients: Vec<BigInt>,
    pub norm_sq: Q,
    pub length: f64,
    /// Shortest non-parallel length over `λ`, if one was found in range.
    pub second_norm_sq: Option<Q>,
    pub uniqueness_ratio: f64,
    /// Set when no non-parallel vector lies within `radius_factor · λ`, so
    /// `uniqueness_ratio` is only the lower bound `radius_factor`.
    pub ratio_is_lower_bound: bool,
}

fn parallel(a: &[i64], b: &[i64]) -> bool {
    (0..a.len()).all(|i| {
        (i + 1..a.len()).all(|j| a[i] as i128 * b[j] as i128 == a[j] as i128 * b[i] as i128)
    })
}

/// Exact Gram matrix scaled to integers: `G = G_int / den²`.
struct IntGram {
    g: Vec<Vec<BigInt>>,
    den_sq: BigInt,
}

impl IntGram {
    fn new(b: &Basis) -> Self {
        let den = b.denominator_lcm();
        let ints: Vec<Vec<BigInt>> = b
            .cols
            .iter()
            .map(|c| {
                c.iter()
                    .map(|x| (x * Q::from_integer(den.clone())).to_integer())
                    .collect()
            })
            .collect();
        let n = b.dim();
        let g = (0..n)
            .map(|i| (0..n).map(|j| int_dot(&ints[i], &ints[j])).collect())
            .collect();
        Self {
            g,
            den_sq: &den * &den,
        }
    }

    fn norm_sq(&self, c: &[i64]) -> Q {
        let n = c.len();
        let mut acc = BigInt::zero();
        for i in 0..n {
            if c[i] == 0 {
                continue;
            }
            let mut row = BigInt::zero();
            for j in 0..n {
                if c[j] != 0 {
                    row += &self.g[i][j] * c[j];
                }
            }
            acc += row * c[i];
        }
        Q::new(acc, self.den_sq.clone())
    }
}

/// Exhaustive shortest-vector search. `radius_factor ≥ 1` bounds how far the
/// second, non-parallel vector is searched for.
pub fn shortest_vector_enum(b: &Basis, radius_factor: f64) -> Result<ShortestVectorResult> {
    check_enum_dim(b, MAX_ENUM_DIM)?;
    if !(radius_factor >= 1.0 && radius_factor.is_finite()) {
        return domain(format!(
            "radius factor must be at least 1, got {radius_factor}"
        ));
    }
    let red = lll_reduce(b)?;
    let gs = FloatGs::new(&red)?;
    let gram = IntGram::new(&red);
    let n = b.dim();
    let zero = vec![0.0; n];

    // Phase 1: shrinking-radius search for λ².
    let start = red
        .cols
        .iter()
        .map(|c| q_to_f64(&norm_sq(c)))
        .fold(f64::INFINITY, f64::min);
    let mut best = start;
    enumerate(&gs, &zero, start * (1.0 + RADIUS_SLACK), |x, p| {
        if x.iter().any(|&v| v != 0) && p < best {
            best = p;
            return Some(p * (1.0 + RADIUS_SLACK));
        }
        None
    })?;

    // Phase 2: everything within radius_factor · λ, with exact norms.
    let mut cands: Vec<Vec<i64>> = Vec::new();
    enumerate(
        &gs,
        &zero,
        best * radius_factor * radius_factor * (1.0 + RADIUS_SLACK),
        |x, _| {
            if x.iter().any(|&v| v != 0) {
                cands.push(x.to_vec());
            }
            None
        },
    )?;
    let mut exact: Vec<(Q, Vec<i64>)> = cands.into_iter().map(|c| (gram.norm_sq(&c), c)).collect();
    exact.sort_by(|a, b| a.0.cmp(&b.0));
    let (min_sq, _) = exact
        .first()
        .cloned()
        .ok_or_else(|| Error::NotFound("no nonzero vector".into()))?;

    // Among minimal vectors choose a canonical one via input-basis coefficients.
    let mut best_choice: Option<(Vec<BigInt>, Vec<i64>)> = None;
    for (ns, c) in exact.iter().take_while(|(ns, _)| *ns == min_sq) {
        let _ = ns;
        let v = red.combine(&c.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>());
        let mut a = b
            .integer_coordinates(&v)?
            .ok_or_else(|| Error::Protocol("enumerated vector not in lattice".into()))?;
        if a.iter()
            .find(|x| !x.is_zero())
            .is_some_and(|x| x.is_negative())
        {
            a.iter_mut().for_each(|x| *x = -x.clone());
        }
        if best_choice.as_ref().is_none_or(|(ba, _)| a < *ba) {
            best_choice = Some((a, c.clone()));
        }
    }
    let (coefficients, tau_c) = best_choice.expect("at least one minimal vector");
    let second = exact
        .iter()
        .find(|(_, c)| !parallel(c, &tau_c))
        .map(|(ns, _)| ns.clone());
    let length = q_to_f64(&min_sq).sqrt();
    let (uniqueness_ratio, ratio_is_lower_bound) = match &second {
        Some(s) => ((q_to_f64(s) / q_to_f64(&min_sq)).sqrt(), false),
        None => (radius_factor, true),
    };
    Ok(ShortestVectorResult {
        vector: b.combine(&coefficients),
        coefficients,
        norm_sq: min_sq,
        length,
        second_norm_sq: second,
        uniqueness_ratio,
        ratio_is_lower_bound,
    })
}

/// `λ(L)` by enumeration.
pub fn lambda1(b: &Basis) -> Result<f64> {
    Ok(shortest_vector_enum(b, 1.0)?.length)
}

/// `ρ(A) = Σ_{x ∈ A} e^{-π‖x‖²}` summed over `A = (L + shift) ∩ radius·B_n`.
#[derive(Clone, Copy, Debug)]
pub struct RhoSum {
    pub value: f64,
    /// Upper bound on the omitted mass beyond the radius (infinite when the
    /// radius is too small for the tail estimate to apply).
    pub tail_bound: f64,
    pub points: u64,
}

fn sum_over_points<F: FnMut(&[f64], f64)>(
    b: &Basis,
    shift: &[f64],
    radius: f64,
    mut f: F,
) -> Result<u64> {
    let red = lll_reduce(b)?;
    let gs = FloatGs::new(&red)?;
    let cols = red.to_f64_columns();
    let n = b.dim();
    let mut count = 0u64;
    let mut point = vec![0.0; n];
    enumerate(&gs, shift, radius * radius * (1.0 + 1e-12), |x, _| {
        for (k, p) in point.iter_mut().enumerate() {
            *p = shift[k]
                + x.iter()
                    .zip(&cols)
                    .map(|(&c, col)| c as f64 * col[k])
                    .sum::<f64>();
        }
        let ns = point.iter().map(|v| v * v).sum::<f64>();
        count += 1;
        f(&point, ns);
        None
    })?;
    Ok(count)
}

pub fn rho_truncated(b: &Basis, shift: &[f64], radius: f64) -> Result<RhoSum> {
    check_enum_dim(b, MAX_ENUM_DIM)?;
    if !(radius > 0.0) {
        return domain("radius must be positive");
    }
    if shift.len() != b.dim() {
        return domain("shift dimension does not match basis");
    }
    let mut value = 0.0;
    let points = sum_over_points(b, shift, radius, |_, ns| value += (-PI * ns).exp())?;
    let n = b.dim() as f64;
    let c = radius / n.sqrt();
    let cn = (c * (2.0 * PI * std::f64::consts::E).sqrt() * (-PI * c * c).exp()).powf(n);
    let tail_bound = if c > 1.0 / (2.0 * PI).sqrt() && cn < 1.0 {
        // ρ((L+s) ∖ c√n B) < 2 C^n ρ(L), and ρ(L) ≤ ρ_trunc(L) / (1 - C^n).
        let rho_l = if shift.iter().all(|&s| s == 0.0) {
            value
        } else {
            rho_truncated(b, &vec![0.0; b.dim()], radius)?.value
        };
        2.0 * cn * rho_l / (1.0 - cn)
    } else {
        f64::INFINITY
    };
    Ok(RhoSum {
        value,
        tail_bound,
        points,
    })
}

/// `|ρ(L* + y) − d(L) Σ_{x∈L} cos(2π⟨x,y⟩) ρ({x})|`, both sides truncated at `radius`.
pub fn poisson_residual(b: &Basis, y: &[f64], radius: f64) -> Result<f64> {
    check_enum_dim(b, 6)?;
    let dual = dual_basis(b)?;
    let lhs = rho_truncated(&dual, y, radius)?.value;
    let mut rhs = 0.0;
    sum_over_points(b, &vec![0.0; b.dim()], radius, |x, ns| {
        let phase: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        rhs += (2.0 * PI * phase).cos() * (-PI * ns).exp();
    })?;
    Ok((lhs - q_to_f64(&b.lattice_determinant()) * rhs).abs())
}

/// `ρ({x ∈ L, x ≠ 0 : ‖x‖ ≥ radius}) / ρ(L)`.
pub fn banaszczyk_ratio(b: &Basis, radius: f64) -> Result<f64> {
    check_enum_dim(b, 8)?;
    if !(radius >= 0.0) {
        return domain("radius must be nonnegative");
    }
    let r2 = radius * radius * (1.0 - 1e-12);
    let (mut total, mut outer) = (0.0, 0.0);
    sum_over_points(b, &vec![0.0; b.dim()], radius + 6.0, |_, ns| {
        let w = (-PI * ns).exp();
        total += w;
        if ns > 0.0 && ns >= r2 {
            outer += w;
        }
    })?;
    Ok(outer / total)
}

/// A point of `𝒫(L*)` with its dual coordinates.
#[derive(Clone, Debug)]
pub struct DualSample {
    /// Coordinates in `[0, 1)^n` with respect to the dual basis.
    pub coords: Vec<f64>,
    pub point: Vec<f64>,
}

/// Draws `x` with density `e^{-π‖x‖²}` and reduces it modulo `𝒫(L*)`.
pub fn sample_dual_gaussian<R: Rng + ?Sized>(b: &Basis, rng: &mut R) -> Result<DualSample> {
    let cols = b.to_f64_columns();
    let dual = dual_basis(b)?.to_f64_columns();
    Ok(sample_dual_gaussian_f64(&cols, &dual, rng))
}

/// As [`sample_dual_gaussian`] with precomputed floating-point columns of `B` and `B*`.
pub fn sample_dual_gaussian_f64<R: Rng + ?Sized>(
    cols: &[Vec<f64>],
    dual: &[Vec<f64>],
    rng: &mut R,
) -> DualSample {
    let n = cols.len();
    let sd = 1.0 / (2.0 * PI).sqrt();
    let x: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * sd)
        .collect();
    // Dual coordinates of x are B^T x.
    let coords: Vec<f64> = cols
        .iter()
        .map(|c| {
            let a: f64 = c.iter().zip(&x).map(|(u, v)| u * v).sum();
            let f = a - a.floor();
            if f >= 1.0 {
                0.0
            } else {
                f
            }
        })
        .collect();
    let point = (0..n)
        .map(|k| coords.iter().zip(dual).map(|(a, d)| a * d[k]).sum())
        .collect();
    DualSample { coords, point }
}

/// `T_{L*,v}(x) = (d(L)/‖v‖) Σ_k e^{-π((k + ⟨v,x⟩)/‖v‖)²}`.
pub fn t_dual_density(b: &Basis, v: &[Q], x: &[f64]) -> Result<f64> {
    if v.iter().all(Zero::is_zero) || !b.contains(v) {
        return domain("v must be a nonzero lattice vector");
    }
    if x.len() != b.dim() {
        return domain("point dimension does not match basis");
    }
    let vf = to_f64_vec(v);
    let len = vf.iter().map(|a| a * a).sum::<f64>().sqrt();
    let phase: f64 = vf.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(q_to_f64(&b.lattice_determinant()) / len * wave_series(phase, len))
}

/// `Σ_k e^{-π((k + t)/s)²}` with the tail below `2^-64` dropped.
pub fn wave_series(t: f64, s: f64) -> f64 {
    let center = (-t).round() as i64;
    let kc = (s * (64.0 * LN_2 / PI).sqrt()).ceil() as i64 + 2;
    (center - kc..=center + kc)
        .map(|k| (-PI * ((k as f64 + t) / s).powi(2)).exp())
        .sum()
}
