//! Orbits in lowest terms, primitive prime divisors and Zsigmondy sets.
//!
//! A prime `p` is a primitive divisor of `gamma_n P = a_n / b_n` when `p`
//! divides `a_n` but none of `a_1, ..., a_{n-1}`. The primitive part `r_n`
//! keeps exactly those primes of `a_n` (with their multiplicity) and is
//! found by repeatedly dividing out gcds with the earlier numerators, so no
//! factorization is needed.

use std::collections::{BTreeSet, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::ProjectivePoint;
use crate::error::{Error, Result};
use crate::heights::{canonical_height, Limits};
use crate::linalg::det_bareiss;
use crate::maps::RationalMapLift;
use crate::measure::{GeneratingSystem, SystemWord, Word};
use crate::stability::stable_closure;

/// `gamma_n P = a / b` in lowest terms; `b = 0` only for the point at
/// infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitEntry {
    pub n: usize,
    pub a: BigInt,
    pub b: BigInt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitTable {
    pub entries: Vec<OrbitEntry>,
    pub hit_zero: bool,
    pub hit_infinity: bool,
}

impl OrbitTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn numerator(&self, n: usize) -> Option<&BigInt> {
        n.checked_sub(1).and_then(|i| self.entries.get(i)).map(|e| &e.a)
    }

    /// First step at which `0` or `infinity` appeared.
    pub fn first_hit(&self) -> Option<(usize, &'static str)> {
        self.entries.iter().find_map(|e| {
            if e.b.is_zero() {
                Some((e.n, "infinity"))
            } else if e.a.is_zero() {
                Some((e.n, "zero"))
            } else {
                None
            }
        })
    }
}

/// How hits of `0` or `infinity` are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OrbitMode {
    /// Stop the orbit at the first hit; Zsigmondy sets past it are errors.
    #[default]
    Strict,
    /// Keep iterating through `0` and `infinity`.
    Relaxed,
}

fn check_word_length(word: &Word, horizon: usize) -> Result<()> {
    match word.len() {
        Some(len) if len < horizon => {
            Err(Error::Invalid(format!("word has {len} letters but the horizon is {horizon}")))
        }
        _ => Ok(()),
    }
}

/// `gamma_1 P, ..., gamma_N P` in lowest terms.
pub fn orbit(
    system: &GeneratingSystem,
    word: &Word,
    p: &ProjectivePoint,
    horizon: usize,
    mode: OrbitMode,
    limits: &Limits,
) -> Result<OrbitTable> {
    check_word_length(word, horizon)?;
    let mut table = OrbitTable { entries: Vec::with_capacity(horizon), hit_zero: false, hit_infinity: false };
    let mut q = p.clone();
    for n in 1..=horizon {
        let i = word.letter(n - 1).expect("length checked");
        let map = system.map(i);
        q = map.evaluate(&q);
        limits.check_bits(&q)?;
        table.entries.push(OrbitEntry { n, a: q.x().clone(), b: q.y().clone() });
        let (zero, inf) = (q.is_zero(), q.is_infinity());
        table.hit_zero |= zero;
        table.hit_infinity |= inf;
        if (zero || inf) && mode == OrbitMode::Strict {
            break;
        }
    }
    Ok(table)
}

/// `|a_n|` with every prime dividing an earlier numerator removed.
pub fn primitive_part(n: usize, table: &OrbitTable) -> Result<BigInt> {
    let a = table.numerator(n).ok_or_else(|| Error::Invalid(format!("orbit has no entry {n}")))?;
    if a.is_zero() {
        return Err(Error::ZeroNumerator(n));
    }
    Ok(strip_against(a.abs(), table.entries[..n - 1].iter().map(|e| &e.a)))
}

fn strip_against<'a>(mut r: BigInt, earlier: impl Iterator<Item = &'a BigInt>) -> BigInt {
    for am in earlier {
        if r.is_one() {
            break;
        }
        // gcd(r, 0) = r: every prime divides 0
        loop {
            let g = r.gcd(am);
            if g.is_one() {
                break;
            }
            r /= g;
        }
    }
    r
}

/// `Z(gamma, P) ∩ [1, N]` with the primitive parts `r_1, ..., r_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZsigmondyReport {
    pub horizon: usize,
    pub members: BTreeSet<usize>,
    /// `r_n`; `0` stands for a zero numerator with no earlier zero (every
    /// prime is primitive there).
    pub primitive_parts: Vec<BigInt>,
}

pub fn zsigmondy_set(
    system: &GeneratingSystem,
    word: &Word,
    p: &ProjectivePoint,
    horizon: usize,
    mode: OrbitMode,
    limits: &Limits,
) -> Result<ZsigmondyReport> {
    let table = orbit(system, word, p, horizon, mode, limits)?;
    if mode == OrbitMode::Strict {
        if let Some((step, what)) = table.first_hit() {
            return Err(Error::OrbitDegenerate { step, what });
        }
    }
    zsigmondy_from_table(&table)
}

/// Primitive parts and members for every entry of `table`.
pub fn zsigmondy_from_table(table: &OrbitTable) -> Result<ZsigmondyReport> {
    let mut members = BTreeSet::new();
    let mut parts = Vec::with_capacity(table.len());
    let mut seen_zero = false;
    for e in &table.entries {
        let r = if e.a.is_zero() {
            let r = if seen_zero { BigInt::one() } else { BigInt::zero() };
            seen_zero = true;
            r
        } else {
            primitive_part(e.n, table)?
        };
        if r.is_one() {
            members.insert(e.n);
        }
        parts.push(r);
    }
    Ok(ZsigmondyReport { horizon: table.len(), members, primitive_parts: parts })
}

/// Verdict of [`good_pair_check`].
#[derive(Clone, Debug, PartialEq)]
pub enum GoodPair {
    Good,
    Bad(String),
    /// Nothing bad seen up to the horizon, but positivity of the canonical
    /// height was not certified.
    Inconclusive(String),
}

/// Horizon-bounded test of `h_hat_gamma(P) > 0` and
/// `0, infinity` not in `Orb_gamma(P) ∪ Orb_gamma(0)`.
pub fn good_pair_check(
    system: &GeneratingSystem,
    word: &Word,
    p: &ProjectivePoint,
    horizon: usize,
    eps: f64,
    limits: &Limits,
) -> Result<GoodPair> {
    if horizon == 0 {
        return Err(Error::Invalid("horizon must be at least 1".into()));
    }
    check_word_length(word, horizon)?;
    let zero = ProjectivePoint::from_i64(0, 1)?;
    for (label, start) in [("P", p), ("0", &zero)] {
        match orbit(system, word, start, horizon, OrbitMode::Strict, limits) {
            Ok(t) => {
                if let Some((n, what)) = t.first_hit() {
                    return Ok(GoodPair::Bad(format!("orbit of {label} hits {what} at step {n}")));
                }
            }
            Err(e) if e.is_budget() => {
                return Ok(GoodPair::Inconclusive(format!("orbit of {label}: {e}")));
            }
            Err(e) => return Err(e),
        }
    }
    if stable_closure(system, p).is_finite() {
        return Ok(GoodPair::Bad("P lies in a finite S-stable set, so its height is 0".into()));
    }
    if !word.is_finite() && has_finite_orbit(system, word, p, limits) {
        return Ok(GoodPair::Bad("orbit along the periodic word repeats, so its height is 0".into()));
    }
    let mut source = SystemWord::new(system, word.clone())?;
    match canonical_height(&mut source, p, eps, limits) {
        Ok(h) if h.lo() > 0.0 => Ok(GoodPair::Good),
        Ok(h) => Ok(GoodPair::Inconclusive(format!("canonical height {h} not certified positive"))),
        Err(e) if e.is_budget() => Ok(GoodPair::Inconclusive(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Whether `(state, point)` repeats along an eventually periodic word before
/// the height escapes.
fn has_finite_orbit(system: &GeneratingSystem, word: &Word, p: &ProjectivePoint, limits: &Limits) -> bool {
    let bound = system.constants().escape_bound();
    let mut seen = HashSet::new();
    let mut q = p.clone();
    let mut k = 0;
    loop {
        if crate::arith::weil_height(&q) > bound * (1.0 + crate::estimate::LOG_FLOOR) + crate::estimate::LOG_FLOOR
            || limits.check_bits(&q).is_err()
        {
            return false;
        }
        if k >= word.prefix().len() && !seen.insert((word.state(k), q.clone())) {
            return true;
        }
        let Some(i) = word.letter(k) else { return false };
        q = system.map(i).evaluate(&q);
        k += 1;
    }
}

/// Resultant of univariate integer polynomials (ascending coefficients,
/// nonzero leading terms) via the Sylvester determinant.
pub fn poly_resultant(f: &[BigInt], g: &[BigInt]) -> BigInt {
    let (m, n) = (f.len() - 1, g.len() - 1);
    let size = m + n;
    if size == 0 {
        return BigInt::one();
    }
    let mut rows = vec![vec![BigInt::zero(); size]; size];
    for r in 0..n {
        for (i, c) in f.iter().rev().enumerate() {
            rows[r][r + i] = c.clone();
        }
    }
    for r in 0..m {
        for (i, c) in g.iter().rev().enumerate() {
            rows[n + r][r + i] = c.clone();
        }
    }
    det_bareiss(rows)
}

/// Discriminant of a polynomial of degree `>= 1` (ascending coefficients).
pub fn discriminant(f: &[BigInt]) -> BigInt {
    let mut f = f.to_vec();
    while f.len() > 1 && f.last().is_some_and(Zero::is_zero) {
        f.pop();
    }
    let n = f.len() - 1;
    if n == 0 {
        return BigInt::zero();
    }
    if n == 1 {
        return BigInt::one();
    }
    let df: Vec<BigInt> = f.iter().enumerate().skip(1).map(|(i, c)| c * BigInt::from(i)).collect();
    let res = poly_resultant(&f, &df);
    let sign = if (n * (n - 1) / 2).is_multiple_of(2) { BigInt::one() } else { -BigInt::one() };
    sign * res / &f[n]
}

/// Degree and squarefreeness of one map's numerator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimdivCheck {
    pub numerator_degree: usize,
    pub discriminant: BigInt,
    pub degree_ok: bool,
    pub squarefree: bool,
}

impl PrimdivCheck {
    pub fn passes(&self) -> bool {
        self.degree_ok && self.squarefree
    }
}

/// `deg F >= 4` and `disc F != 0` for the affine numerator `F` of `phi`.
pub fn check_primdiv_hypotheses_map(phi: &RationalMapLift) -> PrimdivCheck {
    let f = phi.f();
    let deg = f.iter().rposition(|c| !c.is_zero()).expect("numerator form is nonzero");
    let disc = discriminant(&f[..=deg]);
    PrimdivCheck { numerator_degree: deg, degree_ok: deg >= 4, squarefree: !disc.is_zero(), discriminant: disc }
}

pub fn check_primdiv_hypotheses(system: &GeneratingSystem) -> Vec<PrimdivCheck> {
    system.maps().map(check_primdiv_hypotheses_map).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::factorize;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn pt(x: i64, y: i64) -> ProjectivePoint {
        ProjectivePoint::from_i64(x, y).unwrap()
    }

    fn uc(d: usize, c: i64) -> RationalMapLift {
        RationalMapLift::unicritical(d, c)
    }

    fn single(map: RationalMapLift) -> GeneratingSystem {
        GeneratingSystem::uniform(vec![map]).unwrap()
    }

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn limits() -> Limits {
        Limits::default()
    }

    // primitive parts by full factorization
    fn oracle_parts(table: &OrbitTable) -> Vec<BigInt> {
        let mut earlier: BTreeSet<BigUint> = BTreeSet::new();
        let mut out = Vec::new();
        for e in &table.entries {
            let f = factorize(e.a.magnitude());
            let mut r = BigInt::one();
            for (q, k) in &f {
                if !earlier.contains(q) {
                    r *= num_traits::pow(BigInt::from(q.clone()), *k as usize);
                }
            }
            earlier.extend(f.into_keys());
            out.push(r);
        }
        out
    }

    #[test]
    fn orbit_examples() {
        let s = single(uc(2, 1));
        let t = orbit(&s, &Word::periodic(vec![0]), &pt(1, 1), 4, OrbitMode::Strict, &limits()).unwrap();
        let a: Vec<_> = t.entries.iter().map(|e| e.a.clone()).collect();
        assert_eq!(a, vec![big(2), big(5), big(26), big(677)]);
        let t = orbit(&single(uc(2, -1)), &Word::periodic(vec![0]), &pt(0, 1), 5, OrbitMode::Strict, &limits()).unwrap();
        assert!(t.hit_zero);
        assert_eq!(t.len(), 2);
        let t = orbit(&single(uc(2, 0)), &Word::periodic(vec![0]), &ProjectivePoint::infinity(), 3, OrbitMode::Strict, &limits())
            .unwrap();
        assert!(t.hit_infinity);
        assert_eq!(t.first_hit(), Some((1, "infinity")));
    }

    #[test]
    fn primitive_part_examples() {
        let s = single(uc(2, 1));
        let t = orbit(&s, &Word::periodic(vec![0]), &pt(1, 1), 4, OrbitMode::Strict, &limits()).unwrap();
        assert_eq!(primitive_part(1, &t).unwrap(), big(2));
        assert_eq!(primitive_part(3, &t).unwrap(), big(13));
        let t = orbit(&single(uc(2, -3)), &Word::periodic(vec![0]), &pt(2, 1), 1, OrbitMode::Strict, &limits()).unwrap();
        assert_eq!(primitive_part(1, &t).unwrap(), big(1));
        let r = zsigmondy_set(&single(uc(2, -3)), &Word::periodic(vec![0]), &pt(2, 1), 1, OrbitMode::Strict, &limits()).unwrap();
        assert_eq!(r.members, [1].into_iter().collect());
    }

    #[test]
    fn zero_numerator_handling() {
        let s = single(uc(2, -1));
        let w = Word::periodic(vec![0]);
        assert_eq!(
            zsigmondy_set(&s, &w, &pt(0, 1), 4, OrbitMode::Strict, &limits()),
            Err(Error::OrbitDegenerate { step: 2, what: "zero" })
        );
        let t = orbit(&s, &w, &pt(0, 1), 6, OrbitMode::Relaxed, &limits()).unwrap();
        assert_eq!(primitive_part(2, &t), Err(Error::ZeroNumerator(2)));
        // orbit -1, 0, -1, 0, ...: after the first 0 nothing is primitive
        let r = zsigmondy_set(&s, &w, &pt(0, 1), 6, OrbitMode::Relaxed, &limits()).unwrap();
        assert_eq!(r.members, [1, 3, 4, 5, 6].into_iter().collect());
    }

    #[test]
    fn finite_orbit_makes_zsigmondy_cofinite() {
        // z^2 - 3 fixes... 2 -> 1 -> -2 -> 1 -> -2: numerators repeat
        let r = zsigmondy_set(&single(uc(2, -3)), &Word::periodic(vec![0]), &pt(2, 1), 12, OrbitMode::Strict, &limits())
            .unwrap();
        assert_eq!(r.members, (1..=12).filter(|&n| n != 2).collect());
        let r = zsigmondy_set(&single(uc(2, 0)), &Word::periodic(vec![0]), &pt(-1, 1), 12, OrbitMode::Strict, &limits())
            .unwrap();
        assert_eq!(r.members, (1..=12).collect());
    }

    #[test]
    fn matches_factorization_oracle() {
        let cases = [
            (vec![uc(2, 1)], vec![0], 1i64, 8usize),
            (vec![uc(2, 1), uc(2, 3)], vec![0, 1], 1, 7),
            (vec![uc(2, -1), uc(3, 1)], vec![1, 0, 0], 2, 6),
            (vec![uc(2, 2)], vec![0], 1, 7),
        ];
        for (maps, cycle, x, n) in cases {
            let s = GeneratingSystem::uniform(maps).unwrap();
            let w = Word::periodic(cycle);
            let r = zsigmondy_set(&s, &w, &pt(x, 1), n, OrbitMode::Strict, &limits()).unwrap();
            let t = orbit(&s, &w, &pt(x, 1), n, OrbitMode::Strict, &limits()).unwrap();
            assert_eq!(r.primitive_parts, oracle_parts(&t));
        }
    }

    #[test]
    fn lift_scaling_does_not_change_orbits() {
        let f: Vec<BigInt> = [3, 0, 5].iter().map(|&c| big(c)).collect();
        let g: Vec<BigInt> = [0, 2, 0].iter().map(|&c| big(c)).collect();
        let base = RationalMapLift::from_forms(f.clone(), g.clone()).unwrap();
        let scaled = RationalMapLift::from_forms(f.iter().map(|c| c * -6).collect(), g.iter().map(|c| c * -6).collect()).unwrap();
        let w = Word::periodic(vec![0]);
        let a = orbit(&single(base), &w, &pt(1, 3), 6, OrbitMode::Strict, &limits()).unwrap();
        let b = orbit(&single(scaled), &w, &pt(1, 3), 6, OrbitMode::Strict, &limits()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn good_pair_examples() {
        let w = Word::periodic(vec![0]);
        let check = |m: RationalMapLift, p: ProjectivePoint, n| good_pair_check(&single(m), &w, &p, n, 1e-3, &limits()).unwrap();
        assert!(matches!(check(uc(2, -1), pt(0, 1), 10), GoodPair::Bad(_)));
        assert_eq!(check(uc(2, 1), pt(1, 1), 10), GoodPair::Good);
        assert!(matches!(check(uc(2, 0), ProjectivePoint::infinity(), 3), GoodPair::Bad(_)));
        // 0 is fixed by z^2 + z
        let z2z = RationalMapLift::from_affine_i64(&[0, 1, 1], &[1]).unwrap();
        assert!(matches!(check(z2z, pt(3, 1), 4), GoodPair::Bad(_)));
        // z^2 - 2 at 3 escapes, but the orbit of 0 is -2, 2, 2, ...: fine; orbit of 3 never hits 0
        assert_eq!(check(uc(2, -2), pt(3, 1), 6), GoodPair::Good);
        let tight = Limits { bit_budget: 40, ..Limits::default() };
        assert!(matches!(good_pair_check(&single(uc(2, 1)), &w, &pt(1, 1), 10, 1e-3, &tight).unwrap(), GoodPair::Inconclusive(_)));
        assert!(good_pair_check(&single(uc(2, 1)), &Word::finite(vec![0]), &pt(1, 1), 3, 1e-3, &limits()).is_err());
    }

    #[test]
    fn discriminant_examples() {
        let d = |c: &[i64]| discriminant(&c.iter().map(|&v| big(v)).collect::<Vec<_>>());
        assert_eq!(d(&[1, 0, 0, 0, 1]), big(256));
        // b^2 - 4c and -4p^3 - 27q^2
        assert_eq!(d(&[3, 5, 1]), big(25 - 12));
        assert_eq!(d(&[2, -3, 0, 1]), big(-4 * -27 - 27 * 4));
        // (x - 1)^2 (x^2 + 1) = x^4 - 2x^3 + 2x^2 - 2x + 1
        assert_eq!(d(&[1, -2, 2, -2, 1]), big(0));
    }

    #[test]
    fn primdiv_hypothesis_examples() {
        assert!(check_primdiv_hypotheses_map(&uc(4, 1)).passes());
        let sq = check_primdiv_hypotheses_map(&uc(2, 0));
        assert!(!sq.degree_ok && !sq.passes());
        let rep = RationalMapLift::from_affine_i64(&[1, -2, 2, -2, 1], &[0, 1]).unwrap();
        let c = check_primdiv_hypotheses_map(&rep);
        assert!(c.degree_ok && !c.squarefree);
        let s = GeneratingSystem::uniform(vec![uc(4, 1), uc(5, -2), uc(3, 1)]).unwrap();
        let v: Vec<bool> = check_primdiv_hypotheses(&s).iter().map(PrimdivCheck::passes).collect();
        assert_eq!(v, vec![true, true, false]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn gcd_stripping_matches_factorization(c1 in -4i64..=4, c2 in -4i64..=4, x in -6i64..=6, pattern in 0u8..8) {
            let s = GeneratingSystem::uniform(vec![uc(2, c1), uc(2, c2)]).unwrap();
            let cycle: Vec<usize> = (0..3).map(|k| ((pattern >> k) & 1) as usize).collect();
            let w = Word::periodic(cycle);
            let t = orbit(&s, &w, &pt(x, 1), 12, OrbitMode::Strict, &limits()).unwrap();
            // numerators below 2^64
            let usable = t.entries.iter().take_while(|e| e.a.bits() < 64).count();
            let t = OrbitTable { entries: t.entries[..usable].to_vec(), ..t };
            prop_assume!(t.first_hit().is_none());
            let r = zsigmondy_from_table(&t).unwrap();
            prop_assert_eq!(&r.primitive_parts, &oracle_parts(&t));
            for (i, rn) in r.primitive_parts.iter().enumerate() {
                prop_assert!((&t.entries[i].a % rn).is_zero());
                for e in &t.entries[..i] {
                    prop_assert!(rn.gcd(&e.a).is_one());
                }
                prop_assert_eq!(r.members.contains(&(i + 1)), rn.is_one());
            }
        }

        #[test]
        fn discriminant_detects_squares(a in -5i64..5, b in -5i64..5, c in -5i64..5) {
            // (x - a)^2 (x^2 + b x + c) has zero discriminant
            let sq = [a * a, -2 * a, 1];
            let q = [c, b, 1];
            let mut f = [0i64; 5];
            for (i, u) in sq.iter().enumerate() {
                for (j, v) in q.iter().enumerate() {
                    f[i + j] += u * v;
                }
            }
            prop_assert!(discriminant(&f.iter().map(|&v| big(v)).collect::<Vec<_>>()).is_zero());
        }
    }
}
