//! Modular subset-sum hashing `f(b) = Σ b_i a_i mod N`, collision checking and
//! finding, and the exact distribution of subset sums modulo `2^l`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{bigint_from_hex, bigint_to_hex, random_below};

/// Largest `m` accepted by the meet-in-the-middle search.
pub const MAX_MITM_M: usize = 26;
/// Largest `l` accepted by the subset-sum distribution.
pub const MAX_DIST_BITS: u32 = 20;
/// Largest value count for which subset counts fit in a u128.
pub const MAX_DIST_VALUES: usize = 120;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashKey {
    pub modulus: BigInt,
    pub a: Vec<BigInt>,
}

impl HashKey {
    pub fn new(modulus: BigInt, a: Vec<BigInt>) -> Result<Self> {
        if !modulus.is_positive() {
            return Err(Error::Parameter("N must be positive".into()));
        }
        if a.iter().any(|x| x.is_negative() || *x >= modulus) {
            return Err(Error::Parameter("key values must lie in [0, N)".into()));
        }
        Ok(Self { modulus, a })
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    /// True when `2^m > N`, so distinct inputs must collide.
    pub fn compresses(&self) -> bool {
        self.a.len() as u64 >= self.modulus.bits()
    }
}

pub fn keygen<R: Rng + ?Sized>(modulus: &BigInt, m: usize, rng: &mut R) -> Result<HashKey> {
    let a = (0..m)
        .map(|_| random_below(modulus, rng))
        .collect::<Result<Vec<_>>>()?;
    HashKey::new(modulus.clone(), a)
}

/// `Σ b_i a_i mod N` for a bit vector `b`.
pub fn hash_eval(key: &HashKey, bits: &[bool]) -> Result<BigInt> {
    if bits.len() != key.m() {
        return Err(Error::Domain(format!(
            "input has {} bits, key expects {}",
            bits.len(),
            key.m()
        )));
    }
    let s: BigInt = key
        .a
        .iter()
        .zip(bits)
        .filter(|(_, &b)| b)
        .map(|(a, _)| a)
        .sum();
    Ok(s.mod_floor(&key.modulus))
}

/// `b ≠ 0`, `‖b‖² ≤ m` and `Σ b_i a_i ≡ 0 (mod N)`.
pub fn verify_collision(key: &HashKey, b: &[i64]) -> bool {
    if b.len() != key.m() || b.iter().all(|&x| x == 0) {
        return false;
    }
    let norm: u128 = b.iter().map(|&x| u128::from(x.unsigned_abs()).pow(2)).sum();
    if norm > key.m() as u128 {
        return false;
    }
    let s: BigInt = key.a.iter().zip(b).map(|(a, &x)| a * x).sum();
    s.mod_floor(&key.modulus).is_zero()
}

/// Difference of two bit vectors.
pub fn collision_difference(x: &[bool], y: &[bool]) -> Vec<i64> {
    x.iter()
        .zip(y)
        .map(|(&u, &v)| i64::from(u) - i64::from(v))
        .collect()
}

fn small_key(key: &HashKey) -> Result<(u128, Vec<u128>)> {
    if key.modulus.bits() > 64 {
        return Err(Error::Refused("collision search needs N < 2^64".into()));
    }
    let n = key.modulus.to_u128().ok_or(Error::Rank)?;
    let a = key
        .a
        .iter()
        .map(|x| x.to_u128().ok_or(Error::Rank))
        .collect::<Result<Vec<_>>>()?;
    Ok((n, a))
}

/// Sign-normalises so the first nonzero entry is positive.
fn canonical(mut b: Vec<i64>) -> Vec<i64> {
    if b.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        b.iter_mut().for_each(|x| *x = -*x);
    }
    b
}

/// Decodes a base-3 code over `len` digits into `{0, 1, -1}` coefficients.
fn ternary(mut code: u64, len: usize) -> Vec<i64> {
    (0..len)
        .map(|_| {
            let d = code % 3;
            code /= 3;
            [0, 1, -1][d as usize]
        })
        .collect()
}

/// All `{-1,0,1}` combinations of `a` with their sums mod `n`, by base-3 code.
fn ternary_sums(a: &[u128], n: u128) -> Vec<u128> {
    let mut sums = vec![0u128];
    for &x in a {
        let x = x % n;
        let neg = (n - x) % n;
        let mut next = Vec::with_capacity(sums.len() * 3);
        // Code digit for this element is the most significant so far.
        for add in [0, x, neg] {
            next.extend(sums.iter().map(|&s| (s + add) % n));
        }
        sums = next;
    }
    sums
}

/// Meet-in-the-middle search for `b ∈ {-1,0,1}^m` with `Σ b_i a_i ≡ 0`.
pub fn bruteforce_collision(key: &HashKey) -> Result<Vec<i64>> {
    let m = key.m();
    if m > MAX_MITM_M {
        return Err(Error::Refused(format!(
            "meet-in-the-middle needs m <= {MAX_MITM_M}, got {m}"
        )));
    }
    let (n, a) = small_key(key)?;
    let half = m / 2;
    let (left, right) = a.split_at(half);
    let mut table: HashMap<u128, u64> = HashMap::new();
    for (code, s) in ternary_sums(left, n).into_iter().enumerate() {
        if s == 0 && code != 0 {
            let mut b = ternary(code as u64, half);
            b.resize(m, 0);
            return Ok(canonical(b));
        }
        table.entry(s).or_insert(code as u64);
    }
    for (code, s) in ternary_sums(right, n).into_iter().enumerate().skip(1) {
        let want = (n - s) % n;
        if let Some(&lc) = table.get(&want) {
            let mut b = ternary(lc, half);
            b.extend(ternary(code as u64, m - half));
            return Ok(canonical(b));
        }
    }
    Err(Error::NotFound(format!(
        "no {{-1,0,1}} collision for m = {m}"
    )))
}

/// Walks subsets in Gray-code order until two share a hash value; returns their
/// difference. Stops after `max_steps` subsets.
pub fn birthday_collision(key: &HashKey, max_steps: u64) -> Result<Vec<i64>> {
    let m = key.m();
    let (n, a) = small_key(key)?;
    let limit = if m >= 63 {
        max_steps
    } else {
        max_steps.min(1u64 << m)
    };
    let mut seen: HashMap<u128, u64> = HashMap::new();
    let mut sum = 0u128;
    let mut mask = 0u64;
    seen.insert(0, 0);
    for step in 1..limit {
        let bit = step.trailing_zeros() as usize;
        if bit >= m.min(64) {
            break;
        }
        mask ^= 1 << bit;
        let ai = a[bit] % n;
        sum = if mask >> bit & 1 == 1 {
            (sum + ai) % n
        } else {
            (sum + n - ai) % n
        };
        if let Some(&other) = seen.get(&sum) {
            let b = (0..m)
                .map(|i| {
                    if i < 64 {
                        i64::from((mask >> i & 1) as u8) - i64::from((other >> i & 1) as u8)
                    } else {
                        0
                    }
                })
                .collect();
            return Ok(canonical(b));
        }
        seen.insert(sum, mask);
    }
    Err(Error::NotFound(format!(
        "no collision within {limit} subsets"
    )))
}

/// Exact law of `Σ_{i∈S} a_i mod 2^l` for uniform `S`.
#[derive(Clone, Debug)]
pub struct SubsetSumDistribution {
    pub bits: u32,
    /// Number of subsets reaching each residue; sums to `2^{|a|}`.
    pub counts: Vec<u128>,
    pub values: usize,
}

impl SubsetSumDistribution {
    pub fn probability(&self, t: usize) -> BigRational {
        BigRational::new(
            BigInt::from(self.counts[t]),
            BigInt::from(1u8) << self.values,
        )
    }

    /// Exact statistical distance to uniform on `Z_{2^l}`.
    pub fn distance_to_uniform(&self) -> BigRational {
        // Σ_t |c_t/2^k − 2^{−l}| / 2 = Σ_t |c_t 2^l − 2^k| / 2^{k+l+1}.
        let total = BigInt::from(1u8) << self.values;
        let num: BigInt = self
            .counts
            .iter()
            .map(|&c| ((BigInt::from(c) << self.bits) - &total).abs())
            .sum();
        BigRational::new(
            num,
            BigInt::from(1u8) << (self.values + self.bits as usize + 1),
        )
    }

    pub fn distance_to_uniform_f64(&self) -> f64 {
        self.distance_to_uniform().to_f64().unwrap_or(f64::NAN)
    }
}

/// Iterated convolution `dist'[t] = dist[t] + dist[t − a_i]`, kept as counts.
pub fn subset_sum_distribution(a: &[u64], bits: u32) -> Result<SubsetSumDistribution> {
    if bits > MAX_DIST_BITS {
        return Err(Error::Domain(format!(
            "modulus 2^{bits} exceeds 2^{MAX_DIST_BITS}"
        )));
    }
    if a.len() > MAX_DIST_VALUES {
        return Err(Error::Domain(format!(
            "at most {MAX_DIST_VALUES} values, got {}",
            a.len()
        )));
    }
    let size = 1usize << bits;
    let mask = size as u64 - 1;
    let mut counts = vec![0u128; size];
    counts[0] = 1;
    for &x in a {
        let shift = (x & mask) as usize;
        let prev = counts.clone();
        for (t, c) in counts.iter_mut().enumerate() {
            *c += prev[(t + size - shift) % size];
        }
    }
    Ok(SubsetSumDistribution {
        bits,
        counts,
        values: a.len(),
    })
}

impl fmt::Display for HashKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hash-key v1")?;
        writeln!(f, "N={}", bigint_to_hex(&self.modulus))?;
        writeln!(f, "m={}", self.a.len())?;
        for a in &self.a {
            writeln!(f, "a={}", bigint_to_hex(a))?;
        }
        Ok(())
    }
}

impl FromStr for HashKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.lines().map(str::trim).filter(|l| !l.is_empty());
        if it.next() != Some("hash-key v1") {
            return Err(Error::Parse("expected header \"hash-key v1\"".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = it
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {key}= line")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| Error::Parse(format!("expected {key}=..., got {line:?}")))
        };
        let modulus = bigint_from_hex(&field("N")?)?;
        let m: usize = field("m")?
            .parse()
            .map_err(|_| Error::Parse("bad m".into()))?;
        let a = (0..m)
            .map(|_| bigint_from_hex(&field("a")?))
            .collect::<Result<Vec<_>>>()?;
        if it.next().is_some() {
            return Err(Error::Parse("trailing data in hash key".into()));
        }
        HashKey::new(modulus, a).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Parses a bit string such as `0110`.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("not a bit: {c:?}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(n: u64, a: &[u64]) -> HashKey {
        HashKey::new(
            BigInt::from(n),
            a.iter().map(|&x| BigInt::from(x)).collect(),
        )
        .unwrap()
    }

    fn bits_of(mask: u64, m: usize) -> Vec<bool> {
        (0..m).map(|i| mask >> i & 1 == 1).collect()
    }

    #[test]
    fn eval_examples() {
        let k = key(97, &[5, 40, 90]);
        assert_eq!(hash_eval(&k, &[false; 3]).unwrap(), BigInt::zero());
        assert_eq!(
            hash_eval(&k, &[false, true, false]).unwrap(),
            BigInt::from(40)
        );
        assert_eq!(hash_eval(&k, &[true; 3]).unwrap(), BigInt::from(135 % 97));
        assert!(hash_eval(&k, &[true]).is_err());
    }

    #[test]
    fn verify_examples() {
        let k = key(97, &[5, 40, 90]);
        assert!(!verify_collision(&k, &[0, 0, 0]));
        // 5·8 − 40 = 0, but ‖b‖² = 65 > m.
        assert!(!verify_collision(&k, &[8, -1, 0]));
        let k2 = key(10, &[3, 7, 5]);
        assert!(verify_collision(&k2, &[1, 1, 0]));
        assert!(!verify_collision(&k2, &[1, 0, 0]));
        // ‖b‖² = 4 = m + 1 with Σ b_i a_i = 10 ≡ 0.
        let k3 = key(10, &[5, 0, 0]);
        assert!(!verify_collision(&k3, &[2, 0, 0]));
        assert!(verify_collision(&k3, &[0, 1, 0]));
    }

    #[test]
    fn tiny_collision() {
        let k = key(2, &[1, 1]);
        let b = bruteforce_collision(&k).unwrap();
        assert!(b == vec![1, -1] || b == vec![1, 1], "{b:?}");
        assert!(verify_collision(&k, &b));
    }

    #[test]
    fn mitm_finds_collisions_when_compressing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = BigInt::from(1u32 << 16);
        for _ in 0..20 {
            let k = keygen(&n, 20, &mut rng).unwrap();
            assert!(k.compresses());
            let b = bruteforce_collision(&k).unwrap();
            assert!(verify_collision(&k, &b));
            assert!(b.iter().all(|x| x.abs() <= 1));
        }
    }

    #[test]
    fn short_keys_usually_have_no_collision() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = BigInt::from(1u32 << 16);
        let found = (0..50)
            .filter(|_| bruteforce_collision(&keygen(&n, 4, &mut rng).unwrap()).is_ok())
            .count();
        // 80 nonzero ternary vectors against 2^16 residues.
        assert!(found <= 3, "{found}");
        assert!(!keygen(&n, 4, &mut rng).unwrap().compresses());
    }

    #[test]
    fn refuses_large_instances() {
        let k = key(1 << 16, &[1; 27]);
        assert!(matches!(bruteforce_collision(&k), Err(Error::Refused(_))));
        let big = HashKey::new(BigInt::one() << 70, vec![BigInt::one(); 4]).unwrap();
        assert!(matches!(bruteforce_collision(&big), Err(Error::Refused(_))));
    }

    #[test]
    fn birthday_finds_collisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = BigInt::from(1u32 << 16);
        for _ in 0..20 {
            let k = keygen(&n, 20, &mut rng).unwrap();
            let b = birthday_collision(&k, 1 << 20).unwrap();
            assert!(verify_collision(&k, &b));
        }
        let k = key(1 << 16, &[1, 2, 4]);
        assert!(matches!(
            birthday_collision(&k, 1 << 20),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn verify_matches_hash_equality_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (m, n) = (12usize, BigInt::from(1u32 << 10));
        let k = keygen(&n, m, &mut rng).unwrap();
        let hashes: Vec<BigInt> = (0..1u64 << m)
            .map(|x| hash_eval(&k, &bits_of(x, m)).unwrap())
            .collect();
        for x in 0..1u64 << m {
            for y in (x + 1..1u64 << m).step_by(37) {
                let b = collision_difference(&bits_of(x, m), &bits_of(y, m));
                assert_eq!(
                    verify_collision(&k, &b),
                    hashes[x as usize] == hashes[y as usize]
                );
            }
        }
    }

    #[test]
    fn distribution_examples() {
        let d = subset_sum_distribution(&[1], 1).unwrap();
        assert_eq!(d.counts, vec![1, 1]);
        assert!(d.distance_to_uniform().is_zero());
        let d = subset_sum_distribution(&[2], 1).unwrap();
        assert_eq!(d.counts, vec![2, 0]);
        assert_eq!(
            d.distance_to_uniform(),
            BigRational::new(1.into(), 2.into())
        );
        assert!(subset_sum_distribution(&[1], 21).is_err());
        assert!(subset_sum_distribution(&[1; 121], 4).is_err());
    }

    #[test]
    fn distribution_matches_enumeration() {
        // Oracle: brute-force over all 2^10 subsets.
        let a = [3u64, 17, 200, 255, 1, 64, 99, 128, 7, 31];
        let d = subset_sum_distribution(&a, 8).unwrap();
        let mut want = vec![0u128; 256];
        for s in 0..1u32 << a.len() {
            let t: u64 = a
                .iter()
                .enumerate()
                .filter(|(i, _)| s >> i & 1 == 1)
                .map(|(_, &x)| x)
                .sum();
            want[(t % 256) as usize] += 1;
        }
        assert_eq!(d.counts, want);
        assert_eq!(
            d.probability(0),
            BigRational::new(want[0].into(), 1024.into())
        );
    }

    #[test]
    fn key_file_roundtrip() {
        let k = keygen(
            &BigInt::from(1u32 << 16),
            20,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let text = k.to_string();
        assert!(text.starts_with("hash-key v1\nN=10000\nm=20\n"));
        assert_eq!(text.parse::<HashKey>().unwrap(), k);
        assert!("hash-key v1\nN=10\nm=1\na=20\n".parse::<HashKey>().is_err());
        assert_eq!(parse_bits("0110").unwrap(), vec![false, true, true, false]);
        assert!(parse_bits("012").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distribution_mass_is_total(a in proptest::collection::vec(any::<u64>(), 0..40), bits in 0u32..10) {
            let d = subset_sum_distribution(&a, bits).unwrap();
            prop_assert_eq!(d.counts.iter().sum::<u128>(), 1u128 << a.len());
            let dist = d.distance_to_uniform();
            prop_assert!(dist >= BigRational::zero() && dist < BigRational::one());
        }

        #[test]
        fn differences_of_colliding_inputs_verify(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = keygen(&BigInt::from(256), 10, &mut rng).unwrap();
            let x = bits_of(rng.random_range(0..1024), 10);
            let y = bits_of(rng.random_range(0..1024), 10);
            let same = hash_eval(&k, &x).unwrap() == hash_eval(&k, &y).unwrap();
            prop_assert_eq!(verify_collision(&k, &collision_difference(&x, &y)), same && x != y);
        }
    }
}
