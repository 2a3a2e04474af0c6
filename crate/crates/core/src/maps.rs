//! Rational self-maps of `P^1` as primitive pairs of integer binary forms.
//!
//! A form of degree `d` is stored as `d + 1` coefficients where entry `i`
//! multiplies `x^i y^(d-i)`; this matches entering a map in affine form
//! `N(z)/D(z)` with ascending coefficient lists.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::{int_valuation, log_biguint, prime_divisors, ProjectivePoint};
use crate::error::{Error, Result};
use crate::linalg::{det_bareiss, solve_rational};

/// A degree-`d` self-map of `P^1` given by a primitive lift `(F, G)` with
/// nonzero resultant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalMapLift {
    degree: usize,
    f: Vec<BigInt>,
    g: Vec<BigInt>,
    resultant: BigInt,
}

/// Certified bound `|h(phi(P)) - d h(P)| <= constant` over all of `P^1(Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightControlCertificate {
    pub degree: usize,
    /// `h(phi(P)) - d h(P) <= upper`.
    pub upper: f64,
    /// `d h(P) - h(phi(P)) <= lower`.
    pub lower: f64,
    pub constant: f64,
}

fn trim(mut v: Vec<BigInt>) -> Vec<BigInt> {
    while v.len() > 1 && v.last().is_some_and(Zero::is_zero) {
        v.pop();
    }
    v
}

fn l1(v: &[BigInt]) -> BigUint {
    v.iter().map(|c| c.magnitude()).sum()
}

/// Product of two binary forms in the ascending-`x` coefficient convention.
pub(crate) fn form_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Evaluates `sum c_i x^i y^(d-i)` at an integer pair.
pub(crate) fn eval_form(c: &[BigInt], x: &BigInt, y: &BigInt) -> BigInt {
    let d = c.len() - 1;
    let mut ypow = Vec::with_capacity(d + 1);
    ypow.push(BigInt::one());
    for k in 1..=d {
        let next = &ypow[k - 1] * y;
        ypow.push(next);
    }
    let mut acc = BigInt::zero();
    for (i, ci) in c.iter().enumerate().rev() {
        acc *= x;
        if !ci.is_zero() {
            acc += ci * &ypow[d - i];
        }
    }
    acc
}

/// Sylvester matrix of two degree-`d` binary forms (coefficients descending in `x`).
pub(crate) fn sylvester_matrix(f: &[BigInt], g: &[BigInt]) -> Vec<Vec<BigInt>> {
    let d = f.len() - 1;
    let n = 2 * d;
    let mut m = vec![vec![BigInt::zero(); n]; n];
    for r in 0..d {
        for k in 0..=d {
            m[r][r + k] = f[d - k].clone();
            m[d + r][r + k] = g[d - k].clone();
        }
    }
    m
}

/// Resultant of two binary forms of the same degree `d >= 1`.
pub fn form_resultant(f: &[BigInt], g: &[BigInt]) -> BigInt {
    det_bareiss(sylvester_matrix(f, g))
}

impl RationalMapLift {
    /// Builds the map `N(z)/D(z)` from ascending affine coefficient lists.
    pub fn from_affine(num: &[BigInt], den: &[BigInt]) -> Result<Self> {
        let num = trim(num.to_vec());
        let den = trim(den.to_vec());
        if num.iter().all(Zero::is_zero) || den.iter().all(Zero::is_zero) {
            return Err(Error::DegenerateMap("numerator or denominator is zero".into()));
        }
        let degree = (num.len() - 1).max(den.len() - 1);
        let pad = |mut v: Vec<BigInt>| {
            v.resize(degree + 1, BigInt::zero());
            v
        };
        Self::from_forms(pad(num), pad(den))
    }

    /// Convenience constructor from small integer coefficient lists.
    pub fn from_affine_i64(num: &[i64], den: &[i64]) -> Result<Self> {
        let conv = |v: &[i64]| v.iter().map(|&c| BigInt::from(c)).collect::<Vec<_>>();
        Self::from_affine(&conv(num), &conv(den))
    }

    /// `z^d + c`.
    pub fn unicritical(d: usize, c: i64) -> Self {
        let mut num = vec![0i64; d + 1];
        num[0] = c;
        num[d] = 1;
        Self::from_affine_i64(&num, &[1]).expect("z^d + c is a valid map for d >= 2")
    }

    /// Builds a map from two homogeneous forms of equal length `d + 1`.
    /// The joint content is stripped.
    pub fn from_forms(f: Vec<BigInt>, g: Vec<BigInt>) -> Result<Self> {
        if f.len() != g.len() || f.is_empty() {
            return Err(Error::DegenerateMap("forms must have equal degree".into()));
        }
        let degree = f.len() - 1;
        if degree < 2 {
            return Err(Error::DegenerateMap(format!("degree {degree} < 2")));
        }
        let content = f.iter().chain(&g).fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if content.is_zero() {
            return Err(Error::DegenerateMap("zero forms".into()));
        }
        let lead_negative = g
            .iter()
            .rev()
            .chain(f.iter().rev())
            .find(|c| !c.is_zero())
            .is_some_and(|c| c.is_negative());
        let content = if lead_negative { -content } else { content };
        let f: Vec<BigInt> = f.into_iter().map(|c| c / &content).collect();
        let g: Vec<BigInt> = g.into_iter().map(|c| c / &content).collect();
        let resultant = form_resultant(&f, &g);
        if resultant.is_zero() {
            return Err(Error::DegenerateMap("F and G share a projective root".into()));
        }
        Ok(RationalMapLift { degree, f, g, resultant })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Numerator form coefficients (`x^i y^(d-i)`).
    pub fn f(&self) -> &[BigInt] {
        &self.f
    }

    pub fn g(&self) -> &[BigInt] {
        &self.g
    }

    /// `Res(F, G)`; never zero.
    pub fn resultant(&self) -> &BigInt {
        &self.resultant
    }

    /// Unreduced image `(F(x, y), G(x, y))`.
    pub fn apply_lift(&self, x: &BigInt, y: &BigInt) -> (BigInt, BigInt) {
        (eval_form(&self.f, x, y), eval_form(&self.g, x, y))
    }

    /// Canonical representative of `phi(P)`.
    pub fn evaluate(&self, p: &ProjectivePoint) -> ProjectivePoint {
        let (a, b) = self.apply_lift(p.x(), p.y());
        // for coprime (x, y), gcd(F(x, y), G(x, y)) divides the resultant
        ProjectivePoint::normalize_dividing(a, b, &self.resultant)
            .expect("coprime forms never vanish together at a point")
    }

    /// Primitive lift of `psi o self`.
    pub fn then(&self, psi: &RationalMapLift) -> RationalMapLift {
        let d = psi.degree;
        let mut f_pows = vec![vec![BigInt::one()]];
        let mut g_pows = vec![vec![BigInt::one()]];
        for k in 1..=d {
            f_pows.push(form_mul(&f_pows[k - 1], &self.f));
            g_pows.push(form_mul(&g_pows[k - 1], &self.g));
        }
        let apply = |coeffs: &[BigInt]| {
            let mut acc = vec![BigInt::zero(); d * self.degree + 1];
            for (i, c) in coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for (k, v) in form_mul(&f_pows[i], &g_pows[d - i]).into_iter().enumerate() {
                    acc[k] += c * v;
                }
            }
            acc
        };
        RationalMapLift::from_forms(apply(&psi.f), apply(&psi.g))
            .expect("composition of morphisms is a morphism")
    }

    /// Cofactor forms `(A1, B1, A2, B2)` of degree `d - 1` with
    /// `A1 F + B1 G = Res x^(2d-1)` and `A2 F + B2 G = Res y^(2d-1)`.
    pub fn sylvester_cofactors(&self) -> [Vec<BigRational>; 4] {
        let d = self.degree;
        let n = 2 * d;
        let mut m = vec![vec![BigInt::zero(); n]; n];
        for j in 0..d {
            for i in 0..=d {
                m[i + j][j] = self.f[i].clone();
                m[i + j][d + j] = self.g[i].clone();
            }
        }
        let mut rhs_x = vec![BigInt::zero(); n];
        rhs_x[n - 1] = self.resultant.clone();
        let mut rhs_y = vec![BigInt::zero(); n];
        rhs_y[0] = self.resultant.clone();
        let sx = solve_rational(&m, &rhs_x).expect("nonzero resultant gives invertible system");
        let sy = solve_rational(&m, &rhs_y).expect("nonzero resultant gives invertible system");
        [sx[..d].to_vec(), sx[d..].to_vec(), sy[..d].to_vec(), sy[d..].to_vec()]
    }

    // log max(||F||_1, ||G||_1)
    fn log_upper(&self) -> f64 {
        log_biguint(&l1(&self.f).max(l1(&self.g))).expect("nonzero forms")
    }

    // log max_i(||A_i||_1 + ||B_i||_1)
    fn log_cofactor_norm(&self) -> f64 {
        let [a1, b1, a2, b2] = self.sylvester_cofactors();
        let norm = |a: &[BigRational], b: &[BigRational]| -> BigRational {
            a.iter().chain(b).map(|c| c.abs()).fold(BigRational::zero(), |s, c| s + c)
        };
        let l = norm(&a1, &b1).max(norm(&a2, &b2));
        // Cofactors come from the adjugate, so they are integral.
        debug_assert!(l.is_integer());
        log_biguint(l.to_integer().magnitude()).expect("cofactor norm is positive")
    }

    /// Explicit `C_phi` with `|h(phi(P)) - d h(P)| <= C_phi` for all `P`.
    ///
    /// Upper side: `||(F, G)(u)|| <= max(||F||_1, ||G||_1) ||u||^d`.
    /// Lower side: the cofactor identities give
    /// `|Res| ||u||^(2d-1) <= L ||u||^(d-1) ||(F, G)(u)||` and the content of
    /// `(F(u), G(u))` divides `Res` for coprime `u`, so
    /// `h(phi(P)) >= d h(P) - log L`.
    pub fn height_control_constant(&self) -> HeightControlCertificate {
        let upper = self.log_upper().max(0.0);
        let lower = self.log_cofactor_norm().max(0.0);
        HeightControlCertificate { degree: self.degree, upper, lower, constant: upper.max(lower) }
    }

    /// Constant `c` with `|log||phi(u)|| - d log||u||| <= c` for the real
    /// sup-norm on `R^2 \ {0}`.
    pub fn archimedean_constant(&self) -> f64 {
        let res = log_biguint(self.resultant.magnitude()).expect("nonzero resultant");
        self.log_upper().max(self.log_cofactor_norm() - res).max(0.0)
    }

    /// `v_p(Res)`: the largest p-power that can be stripped in one step.
    pub fn resultant_valuation(&self, p: &BigUint) -> u64 {
        int_valuation(p, &self.resultant).expect("nonzero resultant")
    }

    /// Renders the map as an affine rational function of `z`.
    pub fn affine_string(&self) -> String {
        fn poly(c: &[BigInt]) -> String {
            let mut terms = Vec::new();
            for (i, ci) in c.iter().enumerate().rev() {
                if ci.is_zero() {
                    continue;
                }
                let mono = match i {
                    0 => String::new(),
                    1 => "z".to_string(),
                    _ => format!("z^{i}"),
                };
                let coef = if mono.is_empty() {
                    ci.to_string()
                } else if ci.is_one() {
                    String::new()
                } else if *ci == -BigInt::one() {
                    "-".to_string()
                } else {
                    format!("{ci}*")
                };
                terms.push(format!("{coef}{mono}"));
            }
            if terms.is_empty() {
                "0".into()
            } else {
                terms.join(" + ").replace("+ -", "- ")
            }
        }
        let g_const = self.g.iter().skip(1).all(Zero::is_zero);
        if g_const && self.g[0].is_one() {
            poly(&self.f)
        } else {
            format!("({}) / ({})", poly(&self.f), poly(&self.g))
        }
    }
}

impl fmt::Display for RationalMapLift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.affine_string())
    }
}

/// `compose(phi, psi) = psi o phi`.
pub fn compose(phi: &RationalMapLift, psi: &RationalMapLift) -> RationalMapLift {
    phi.then(psi)
}

/// All primes dividing some `Res(F_phi, G_phi)`.
pub fn bad_primes<'a>(maps: impl IntoIterator<Item = &'a RationalMapLift>) -> BTreeSet<BigUint> {
    maps.into_iter().flat_map(|m| prime_divisors(m.resultant())).collect()
}
