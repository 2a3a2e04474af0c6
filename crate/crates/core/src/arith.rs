//! Exact integer and rational arithmetic on the projective line over Q.
//!
//! Points are stored as coprime, sign-normalized integer pairs so that equal
//! points compare bitwise equal; heights are returned as `f64` computed from
//! the exact integers with relative error far below `2^-40`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number (reduced, positive denominator).
pub type ExactRational = BigRational;

/// A point of `P^1(Q)` as a coprime integer pair `[x : y]` with `y > 0`, or
/// `y = 0` and `x = 1` for the point at infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProjectivePoint {
    x: BigInt,
    y: BigInt,
}

impl ProjectivePoint {
    /// Canonical representative of `[x : y]`.
    pub fn normalize(x: BigInt, y: BigInt) -> Result<Self> {
        if x.is_zero() && y.is_zero() {
            return Err(Error::ZeroPoint);
        }
        if y.is_zero() {
            return Ok(Self::infinity());
        }
        let g = x.gcd(&y);
        let (mut x, mut y) = (x / &g, y / &g);
        if y.is_negative() {
            x = -x;
            y = -y;
        }
        Ok(ProjectivePoint { x, y })
    }

    /// As [`normalize`](Self::normalize), given that `gcd(x, y)` divides
    /// `bound`; avoids a gcd of two large coordinates.
    pub(crate) fn normalize_dividing(x: BigInt, y: BigInt, bound: &BigInt) -> Result<Self> {
        if bound.is_zero() || y.is_zero() {
            return Self::normalize(x, y);
        }
        let b = bound.abs();
        let g = (&x % &b).gcd(&b);
        let g = (&y % &g).gcd(&g);
        let (mut x, mut y) = if g.is_one() { (x, y) } else { (x / &g, y / &g) };
        if y.is_negative() {
            x = -x;
            y = -y;
        }
        Ok(ProjectivePoint { x, y })
    }

    pub fn from_i64(x: i64, y: i64) -> Result<Self> {
        Self::normalize(BigInt::from(x), BigInt::from(y))
    }

    /// The affine point `q = a/b`, i.e. `[a : b]`.
    pub fn from_rational(q: &ExactRational) -> Self {
        ProjectivePoint { x: q.numer().clone(), y: q.denom().clone() }
    }

    pub fn infinity() -> Self {
        ProjectivePoint { x: BigInt::one(), y: BigInt::zero() }
    }

    pub fn x(&self) -> &BigInt {
        &self.x
    }

    pub fn y(&self) -> &BigInt {
        &self.y
    }

    pub fn is_infinity(&self) -> bool {
        self.y.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero()
    }

    /// Affine coordinate `x/y`, or `None` at infinity.
    pub fn to_rational(&self) -> Option<ExactRational> {
        if self.is_infinity() {
            None
        } else {
            Some(BigRational::new(self.x.clone(), self.y.clone()))
        }
    }

    /// `max(|x|, |y|)` of the canonical representative.
    pub fn max_abs(&self) -> BigUint {
        self.x.magnitude().max(self.y.magnitude()).clone()
    }

    /// Total bit size of both coordinates.
    pub fn bits(&self) -> u64 {
        self.x.bits() + self.y.bits()
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.x, self.y)
    }
}

impl FromStr for ProjectivePoint {
    type Err = Error;

    /// Accepts `"a/b"` (with `"1/0"` for infinity) or a bare integer `"a"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            BigInt::from_str(t.trim()).map_err(|_| Error::Invalid(format!("bad integer {t:?} in point {s:?}")))
        };
        match s.split_once('/') {
            Some((a, b)) => Self::normalize(parse(a)?, parse(b)?),
            None => Self::normalize(parse(s)?, BigInt::one()),
        }
    }
}

impl Ord for ProjectivePoint {
    /// Orders affine points by value, with infinity last.
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_infinity(), other.is_infinity()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => (&self.x * &other.y).cmp(&(&other.x * &self.y)),
        }
    }
}

impl PartialOrd for ProjectivePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Natural log of a positive integer, safe for integers of any size.
pub fn log_biguint(n: &BigUint) -> Result<f64> {
    if n.is_zero() {
        return Err(Error::NonPositive);
    }
    let bits = n.bits();
    if bits <= 64 {
        return Ok((n.to_u64().expect("fits in u64") as f64).ln());
    }
    let shift = bits - 64;
    let top = (n >> shift).to_u64().expect("top 64 bits");
    Ok((top as f64).ln() + shift as f64 * LN_2)
}

/// Natural log of an integer `n >= 1`.
pub fn log_bigint(n: &BigInt) -> Result<f64> {
    if n.sign() != Sign::Plus {
        return Err(Error::NonPositive);
    }
    log_biguint(n.magnitude())
}

/// `log max(|x|, |y|)` for a canonical point.
pub fn weil_height(p: &ProjectivePoint) -> f64 {
    log_biguint(&p.max_abs()).expect("canonical points are nonzero")
}

/// Exponent of the prime `p` in the nonzero integer `n`.
pub fn int_valuation(p: &BigUint, n: &BigInt) -> Result<u64> {
    if n.is_zero() {
        return Err(Error::UndefinedAtZero);
    }
    let mut m = n.magnitude().clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return Ok(v);
        }
        m = q;
        v += 1;
    }
}

/// Exponent of the prime `p` in the nonzero rational `q`.
pub fn valuation(p: &BigUint, q: &ExactRational) -> Result<i64> {
    if q.is_zero() {
        return Err(Error::UndefinedAtZero);
    }
    let num = int_valuation(p, q.numer())? as i64;
    let den = int_valuation(p, q.denom())? as i64;
    Ok(num - den)
}

/// Splits `n` as `p^v * rest` with `p` not dividing `rest` (`n != 0`).
pub fn split_prime_power(p: &BigUint, n: &BigInt) -> (u64, BigInt) {
    let p = BigInt::from(p.clone());
    let mut rest = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = rest.div_rem(&p);
        if !r.is_zero() {
            return (v, rest);
        }
        rest = q;
        v += 1;
    }
}

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Miller-Rabin with the first 25 prime bases (deterministic below 3.3e24).
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for &a in &SMALL_PRIMES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant of Pollard's rho; returns a nontrivial factor of composite n.
fn pollard_brent(n: &BigUint) -> BigUint {
    if n.is_even() {
        return BigUint::from(2u32);
    }
    let mut c = BigUint::one();
    loop {
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut y = BigUint::from(2u32);
        let mut r: u64 = 1;
        let mut q = BigUint::one();
        let mut g = BigUint::one();
        let mut x = y.clone();
        let mut ys = y.clone();
        const M: u64 = 128;
        while g.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g.is_one() {
                ys = y.clone();
                for _ in 0..M.min(r - k) {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = (q * diff) % n;
                }
                g = q.gcd(n);
                k += M;
            }
            r *= 2;
        }
        if &g == n {
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if !g.is_one() {
                    break;
                }
            }
        }
        if &g != n {
            return g;
        }
        c += 1u32;
    }
}

/// Full prime factorization of `n >= 1` as `prime -> exponent`.
pub fn factorize(n: &BigUint) -> BTreeMap<BigUint, u32> {
    let mut out = BTreeMap::new();
    let mut m = n.clone();
    if m.is_zero() {
        return out;
    }
    let mut p = 2u32;
    while p < 10_000 {
        let bp = BigUint::from(p);
        if &bp * &bp > m {
            break;
        }
        while (&m % &bp).is_zero() {
            m /= &bp;
            *out.entry(bp.clone()).or_insert(0) += 1;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    let mut stack = vec![m];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_probable_prime(&m) {
            *out.entry(m).or_insert(0) += 1;
            continue;
        }
        let d = pollard_brent(&m);
        stack.push(&m / &d);
        stack.push(d);
    }
    out
}

/// Distinct primes dividing the nonzero integer `n`, ascending.
pub fn prime_divisors(n: &BigInt) -> Vec<BigUint> {
    factorize(n.magnitude()).into_keys().collect()
}
