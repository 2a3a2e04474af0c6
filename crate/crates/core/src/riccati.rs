//! Rational functions over `F_p(t)` and the Riccati invariants of a
//! polynomial `phi(x) = A_0 x^d + A_1 x^(d-1) + ... + A_d` with coefficients
//! in `F_p(t)`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigUint;

use crate::arith::is_probable_prime;
use crate::error::{Error, Result};

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(p));
    pow_mod(a, p - 2, p)
}

/// Checks that `p` is an odd prime.
pub fn check_characteristic(p: u64) -> Result<()> {
    if p == 2 || !is_probable_prime(&BigUint::from(p)) {
        Err(Error::Invalid(format!("characteristic must be an odd prime, got {p}")))
    } else {
        Ok(())
    }
}

/// A polynomial in `t` over `F_p`, ascending coefficients with no trailing
/// zeros (the zero polynomial is empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FpPoly {
    p: u64,
    c: Vec<u64>,
}

impl FpPoly {
    pub fn new(p: u64, coeffs: &[i64]) -> Self {
        let c = coeffs.iter().map(|&v| v.rem_euclid(p as i64) as u64).collect();
        FpPoly::from_raw(p, c)
    }

    fn from_raw(p: u64, mut c: Vec<u64>) -> Self {
        while c.last() == Some(&0) {
            c.pop();
        }
        FpPoly { p, c }
    }

    pub fn zero(p: u64) -> Self {
        FpPoly { p, c: Vec::new() }
    }

    pub fn constant(p: u64, v: i64) -> Self {
        FpPoly::new(p, &[v])
    }

    /// The variable `t`.
    pub fn t(p: u64) -> Self {
        FpPoly::new(p, &[0, 1])
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree; `None` for zero.
    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn leading(&self) -> u64 {
        self.c.last().copied().unwrap_or(0)
    }

    pub fn scale(&self, k: u64) -> Self {
        FpPoly::from_raw(self.p, self.c.iter().map(|&a| mul_mod(a, k, self.p)).collect())
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(inv_mod(self.leading(), self.p))
    }

    pub fn derivative(&self) -> Self {
        let p = self.p;
        FpPoly::from_raw(p, self.c.iter().enumerate().skip(1).map(|(i, &a)| mul_mod(a, i as u64 % p, p)).collect())
    }

    pub fn eval(&self, t: u64) -> u64 {
        self.c.iter().rev().fold(0, |acc, &a| (mul_mod(acc, t, self.p) + a) % self.p)
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn div_rem(&self, d: &FpPoly) -> (FpPoly, FpPoly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let p = self.p;
        let mut r = self.c.clone();
        let dd = d.c.len() - 1;
        if r.len() <= dd {
            return (FpPoly::zero(p), self.clone());
        }
        let inv = inv_mod(d.leading(), p);
        let mut q = vec![0; r.len() - dd];
        for i in (0..q.len()).rev() {
            let coef = mul_mod(r[i + dd], inv, p);
            q[i] = coef;
            if coef == 0 {
                continue;
            }
            for (j, &dj) in d.c.iter().enumerate() {
                r[i + j] = (r[i + j] + p - mul_mod(coef, dj, p)) % p;
            }
        }
        r.truncate(dd);
        (FpPoly::from_raw(p, q), FpPoly::from_raw(p, r))
    }

    /// Monic gcd (zero if both are zero).
    pub fn gcd(&self, other: &FpPoly) -> FpPoly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }
}

impl Add for &FpPoly {
    type Output = FpPoly;
    fn add(self, o: &FpPoly) -> FpPoly {
        let n = self.c.len().max(o.c.len());
        let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
        FpPoly::from_raw(self.p, (0..n).map(|i| (get(&self.c, i) + get(&o.c, i)) % self.p).collect())
    }
}

impl Neg for &FpPoly {
    type Output = FpPoly;
    fn neg(self) -> FpPoly {
        FpPoly::from_raw(self.p, self.c.iter().map(|&a| (self.p - a) % self.p).collect())
    }
}

impl Sub for &FpPoly {
    type Output = FpPoly;
    fn sub(self, o: &FpPoly) -> FpPoly {
        self + &(-o)
    }
}

impl Mul for &FpPoly {
    type Output = FpPoly;
    fn mul(self, o: &FpPoly) -> FpPoly {
        if self.is_zero() || o.is_zero() {
            return FpPoly::zero(self.p);
        }
        let p = self.p;
        let mut out = vec![0u64; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            for (j, &b) in o.c.iter().enumerate() {
                out[i + j] = (out[i + j] + mul_mod(a, b, p)) % p;
            }
        }
        FpPoly::from_raw(p, out)
    }
}

impl fmt::Display for FpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &a) in self.c.iter().enumerate().rev() {
            if a == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (i, a) {
                (0, _) => write!(f, "{a}")?,
                (1, 1) => write!(f, "t")?,
                (1, _) => write!(f, "{a}t")?,
                (_, 1) => write!(f, "t^{i}")?,
                _ => write!(f, "{a}t^{i}")?,
            }
        }
        Ok(())
    }
}

/// An element of `F_p(t)` in lowest terms with monic denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FpRatFunc {
    num: FpPoly,
    den: FpPoly,
}

impl FpRatFunc {
    pub fn new(num: FpPoly, den: FpPoly) -> Result<Self> {
        if num.p != den.p {
            return Err(Error::Invalid("mixed characteristics".into()));
        }
        if den.is_zero() {
            return Err(Error::Invalid("zero denominator".into()));
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: FpPoly, den: FpPoly) -> Self {
        let p = num.p;
        if num.is_zero() {
            return FpRatFunc { num, den: FpPoly::constant(p, 1) };
        }
        let g = num.gcd(&den);
        let (n, _) = num.div_rem(&g);
        let (d, _) = den.div_rem(&g);
        let lead = inv_mod(d.leading(), p);
        FpRatFunc { num: n.scale(lead), den: d.scale(lead) }
    }

    pub fn from_poly(num: FpPoly) -> Self {
        let p = num.p;
        FpRatFunc { num, den: FpPoly::constant(p, 1) }
    }

    pub fn constant(p: u64, v: i64) -> Self {
        Self::from_poly(FpPoly::constant(p, v))
    }

    pub fn zero(p: u64) -> Self {
        Self::constant(p, 0)
    }

    pub fn characteristic(&self) -> u64 {
        self.num.p
    }

    pub fn numer(&self) -> &FpPoly {
        &self.num
    }

    pub fn denom(&self) -> &FpPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `k` times `self` for an integer `k`.
    pub fn times(&self, k: i64) -> Self {
        let p = self.characteristic();
        Self::reduce(self.num.scale(k.rem_euclid(p as i64) as u64), self.den.clone())
    }

    /// Value at `t`, if the denominator does not vanish there.
    pub fn eval(&self, t: u64) -> Option<u64> {
        let p = self.characteristic();
        let d = self.den.eval(t);
        (d != 0).then(|| mul_mod(self.num.eval(t), inv_mod(d, p), p))
    }

    /// `d/dt` by the quotient rule.
    pub fn ddt(&self) -> Self {
        let num = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        Self::reduce(num, &self.den * &self.den)
    }

    pub fn inverse(&self) -> Option<Self> {
        (!self.is_zero()).then(|| Self::reduce(self.den.clone(), self.num.clone()))
    }
}

impl Add for &FpRatFunc {
    type Output = FpRatFunc;
    fn add(self, o: &FpRatFunc) -> FpRatFunc {
        FpRatFunc::reduce(&(&self.num * &o.den) + &(&o.num * &self.den), &self.den * &o.den)
    }
}

impl Neg for &FpRatFunc {
    type Output = FpRatFunc;
    fn neg(self) -> FpRatFunc {
        FpRatFunc { num: -&self.num, den: self.den.clone() }
    }
}

impl Sub for &FpRatFunc {
    type Output = FpRatFunc;
    fn sub(self, o: &FpRatFunc) -> FpRatFunc {
        self + &(-o)
    }
}

impl Mul for &FpRatFunc {
    type Output = FpRatFunc;
    fn mul(self, o: &FpRatFunc) -> FpRatFunc {
        FpRatFunc::reduce(&self.num * &o.num, &self.den * &o.den)
    }
}

impl Div for &FpRatFunc {
    type Output = FpRatFunc;
    fn div(self, o: &FpRatFunc) -> FpRatFunc {
        assert!(!o.is_zero(), "division by zero in F_p(t)");
        FpRatFunc::reduce(&self.num * &o.den, &self.den * &o.num)
    }
}

impl fmt::Display for FpRatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.degree() == Some(0) {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

/// `phi(x) = A_0 x^d + ... + A_d` over `F_p(t)`, `d >= 3`, `A_0 != 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpPolySelfMap {
    p: u64,
    coeffs: Vec<FpRatFunc>,
}

impl FpPolySelfMap {
    /// `coeffs = [A_0, A_1, ..., A_d]`.
    pub fn new(coeffs: Vec<FpRatFunc>) -> Result<Self> {
        let p = coeffs.first().map(FpRatFunc::characteristic).ok_or_else(|| Error::Invalid("no coefficients".into()))?;
        check_characteristic(p)?;
        if coeffs.iter().any(|a| a.characteristic() != p) {
            return Err(Error::Invalid("coefficients lie in different fields".into()));
        }
        if coeffs.len() < 4 {
            return Err(Error::Invalid(format!("degree must be at least 3, got {}", coeffs.len().saturating_sub(1))));
        }
        if coeffs[0].is_zero() {
            return Err(Error::Invalid("leading coefficient A_0 is zero".into()));
        }
        Ok(FpPolySelfMap { p, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    /// `A_i`, the coefficient of `x^(d - i)`.
    pub fn a(&self, i: usize) -> &FpRatFunc {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[FpRatFunc] {
        &self.coeffs
    }
}

/// `delta = 2 d A_0 A_2 - (d - 1) A_1^2`.
pub fn delta(phi: &FpPolySelfMap) -> FpRatFunc {
    let d = phi.degree() as i64;
    let (a0, a1, a2) = (phi.a(0), phi.a(1), phi.a(2));
    &(a0 * a2).times(2 * d) - &(a1 * a1).times(d - 1)
}

/// Coefficients of the Riccati equations `y' = b y + c` and
/// `phi(y)' = f phi(y) + g` (the quadratic coefficients vanish).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiccatiCoeffs {
    pub b: FpRatFunc,
    pub f: FpRatFunc,
    pub c: FpRatFunc,
    pub g: FpRatFunc,
}

pub fn riccati_coeffs(phi: &FpPolySelfMap) -> Result<RiccatiCoeffs> {
    let p = phi.characteristic();
    let d = phi.degree();
    if (d as u64).is_multiple_of(p) {
        return Err(Error::BadCharacteristic { p, d });
    }
    let del = delta(phi);
    if del.is_zero() {
        return Err(Error::SingularDelta);
    }
    let d = d as i64;
    let (a0, a1, a2) = (phi.a(0), phi.a(1), phi.a(2));
    let (da0, da1, da2) = (a0.ddt(), a1.ddt(), a2.ddt());
    let a0a0 = a0 * a0;
    let a0a1 = a0 * a1;
    let a0a2 = a0 * a2;
    let a1a1 = a1 * a1;
    let t_a2 = &a0a0 * &da2;
    let t_a1 = &a0a1 * &da1;
    let t_a0 = &a0a2 * &da0;
    let t_a0b = &a1a1 * &da0;
    let b = &(&(&t_a2.times(d) - &t_a1.times(d - 1)) - &t_a0.times(d)) + &t_a0b.times(d - 1);
    let f = &(&(&t_a2.times(d * d) - &t_a1.times(d * (d - 1))) - &t_a0.times(d * (d - 2))) + &t_a0b.times(d * (d - 2) + 1);
    let c = &(&(&a0a1 * &da2) - &(&a0a2 * &da1).times(2)) + &(&(a1 * a2) * &da0);
    let (b, f, c) = (&b / &del, &f / &del, &c / &del);
    let (ad1, ad) = (phi.a(phi.degree() - 1), phi.a(phi.degree()));
    let g = &(&(ad1 * &c) - &(ad * &f)) + &ad.ddt();
    Ok(RiccatiCoeffs { b, f, c, g })
}

/// Why an ordered pair `(phi, psi)` fails the condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PairFailure {
    /// `p` divides `deg(phi) deg(psi)`.
    DegreeDivisible,
    /// `delta_phi = 0` (first) or `delta_psi = 0` (second).
    SingularDelta { first: bool },
    /// `b_phi = f_psi`.
    BEqualsF,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionReport {
    /// `(i, j, reason)` for every failing ordered pair.
    pub failures: Vec<(usize, usize, PairFailure)>,
}

impl ConditionReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `deg(phi) deg(psi) delta_phi delta_psi (b_phi - f_psi) != 0` for every
/// ordered pair, including `phi = psi`.
pub fn check_theorem_condition(maps: &[FpPolySelfMap]) -> ConditionReport {
    let coeffs: Vec<Option<RiccatiCoeffs>> = maps.iter().map(|m| riccati_coeffs(m).ok()).collect();
    let mut failures = Vec::new();
    for (i, phi) in maps.iter().enumerate() {
        for (j, psi) in maps.iter().enumerate() {
            let p = phi.characteristic();
            let reason = if ((phi.degree() as u64 % p) * (psi.degree() as u64 % p)).is_multiple_of(p) {
                Some(PairFailure::DegreeDivisible)
            } else if delta(phi).is_zero() {
                Some(PairFailure::SingularDelta { first: true })
            } else if delta(psi).is_zero() {
                Some(PairFailure::SingularDelta { first: false })
            } else {
                let (ci, cj) = (coeffs[i].as_ref().expect("checked"), coeffs[j].as_ref().expect("checked"));
                (ci.b == cj.f).then_some(PairFailure::BEqualsF)
            };
            if let Some(r) = reason {
                failures.push((i, j, r));
            }
        }
    }
    ConditionReport { failures }
}
