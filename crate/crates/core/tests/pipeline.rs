use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::One;

use stoch_heights::arith::factorize;
use stoch_heights::heights::{canonical_height, expected_height_exact, expected_height_mc};
use stoch_heights::local::{decompose, expected_local_height, ExpectationMode};
use stoch_heights::measure::{substream, SampledWord, SystemWord};
use stoch_heights::riccati::{check_theorem_condition, riccati_coeffs, FpPoly};
use stoch_heights::stability::kernel_probe;
use stoch_heights::zsigmondy::{orbit, zsigmondy_set, OrbitMode};
use stoch_heights::{
    compose, stable_closure, DivisorForm, FpPolySelfMap, FpRatFunc, GeneratingSystem, Limits, Place, ProjectivePoint,
    RationalMapLift, Sampler, StabilityVerdict, Word,
};

fn pt(x: i64, y: i64) -> ProjectivePoint {
    ProjectivePoint::from_i64(x, y).unwrap()
}

fn uc(d: usize, c: i64) -> RationalMapLift {
    RationalMapLift::unicritical(d, c)
}

#[test]
fn composed_map_gives_the_same_height_as_the_word() {
    let s = GeneratingSystem::uniform(vec![uc(2, -1), uc(3, 1)]).unwrap();
    let both = GeneratingSystem::uniform(vec![compose(&uc(2, -1), &uc(3, 1))]).unwrap();
    let limits = Limits::default();
    for p in [pt(2, 1), pt(-3, 5), pt(7, 2)] {
        let a = canonical_height(&mut SystemWord::new(&s, Word::periodic(vec![0, 1])).unwrap(), &p, 1e-6, &limits).unwrap();
        let b = canonical_height(&mut SystemWord::new(&both, Word::periodic(vec![0])).unwrap(), &p, 1e-6, &limits).unwrap();
        assert!((a.value - b.value).abs() <= a.error + b.error, "{p}: {a} vs {b}");
    }
}

#[test]
fn kernel_points_have_zero_expected_height() {
    let s = GeneratingSystem::uniform(vec![uc(2, 0), uc(2, -1)]).unwrap();
    let found = kernel_probe(&s, 2f64.ln(), 2, 1 << 20).unwrap();
    assert!(!found.is_empty());
    for p in &found {
        assert!(stable_closure(&s, p).is_finite());
        let e = expected_height_exact(&s, p, 10, &Limits::default()).unwrap();
        assert!(e.contains(0.0), "{p}: {e}");
    }
}

#[test]
fn positive_verdict_agrees_with_monte_carlo() {
    let s = GeneratingSystem::uniform(vec![uc(2, -2), RationalMapLift::from_affine_i64(&[0, 1, 1], &[1]).unwrap()]).unwrap();
    let p = pt(0, 1);
    assert!(matches!(stable_closure(&s, &p), StabilityVerdict::PositiveHeight { .. }));
    let exact = expected_height_exact(&s, &p, 12, &Limits::default()).unwrap();
    let mc = expected_height_mc(Sampler::System(&s), &p, 400, 11, 1e-4, 0.01, &Limits::default()).unwrap();
    assert!(exact.excludes_zero());
    assert!((mc.value - exact.value).abs() <= mc.error + exact.error);
}

#[test]
fn expected_local_heights_sum_to_expected_height() {
    // {z^2, 2z^2} at P = 3: only inf and 2 contribute for E = y
    let s = GeneratingSystem::uniform(vec![uc(2, 0), RationalMapLift::from_affine_i64(&[0, 0, 2], &[1]).unwrap()]).unwrap();
    let p = pt(3, 1);
    let mode = ExpectationMode::Exact { depth: 8, enum_budget: 1 << 20 };
    let (mut value, mut error) = (0.0, 0.0);
    for v in [Place::Archimedean, Place::prime(2).unwrap()] {
        let l = expected_local_height(&s, &v, &DivisorForm::y(), &p, mode).unwrap();
        value += l.value;
        error += l.error;
    }
    let h = expected_height_exact(&s, &p, 8, &Limits::default()).unwrap();
    assert!((value - h.value).abs() <= error + h.error, "{value} ± {error} vs {h}");
}

#[test]
fn decomposition_along_sampled_words() {
    let s = GeneratingSystem::uniform(vec![uc(2, 1), uc(3, -1)]).unwrap();
    let e = DivisorForm::from_i64(&[-1, 0, 1]).unwrap();
    for seed in 0..5 {
        let p = pt(5, 3);
        let d = decompose(&mut SampledWord::new(&s, substream(seed, 0)), &e, p.x(), p.y(), 1e-6).unwrap();
        let h = canonical_height(&mut SampledWord::new(&s, substream(seed, 0)), &p, 1e-6, &Limits::default()).unwrap();
        assert!((d.local_sum.value - h.value).abs() <= d.local_sum.error + h.error);
        let places: BTreeSet<String> = d.contributions.iter().map(|c| c.place.to_string()).collect();
        // both maps have good reduction everywhere and E(5, 3) = 16
        assert_eq!(places, BTreeSet::from(["inf".to_string(), "2".to_string()]));
    }
}

#[test]
fn zsigmondy_matches_factorization_on_short_orbits() {
    let s = GeneratingSystem::uniform(vec![uc(2, 1), uc(2, -3)]).unwrap();
    let word = Word::periodic(vec![0, 0, 1]);
    let p = pt(1, 1);
    let limits = Limits::default();
    let report = zsigmondy_set(&s, &word, &p, 6, OrbitMode::Strict, &limits).unwrap();
    let table = orbit(&s, &word, &p, 6, OrbitMode::Strict, &limits).unwrap();
    let mut earlier: BTreeSet<BigUint> = BTreeSet::new();
    for (e, r) in table.entries.iter().zip(&report.primitive_parts) {
        let primes: BTreeSet<BigUint> = factorize(e.a.magnitude()).into_keys().collect();
        let fresh: BTreeSet<&BigUint> = primes.difference(&earlier).collect();
        let from_r: BTreeSet<BigUint> = factorize(r.magnitude()).into_keys().collect();
        assert_eq!(fresh.into_iter().cloned().collect::<BTreeSet<_>>(), from_r, "n = {}", e.n);
        assert_eq!(r.is_one(), report.members.contains(&e.n));
        earlier.extend(primes);
    }
}

#[test]
fn riccati_condition_matches_pairwise_coefficients() {
    let p = 7;
    let t = FpRatFunc::from_poly(FpPoly::t(p));
    let k = |v: i64| FpRatFunc::constant(p, v);
    let phi = FpPolySelfMap::new(vec![k(1), k(0), t.clone(), k(1)]).unwrap();
    let psi = FpPolySelfMap::new(vec![k(2), t.clone(), k(0), k(0), k(5)]).unwrap();
    let r = riccati_coeffs(&phi).unwrap();
    assert!(!(&r.b - &r.f).is_zero());
    let report = check_theorem_condition(&[phi.clone(), psi.clone()]);
    let rp = riccati_coeffs(&psi).unwrap();
    let expect_fail = r.b == rp.f || rp.b == r.f || rp.b == rp.f;
    assert_eq!(report.passes(), !expect_fail);
}
