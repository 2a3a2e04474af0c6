//! Deciding whether a point has expected canonical height zero.
//!
//! `E_nu[h_hat](P) = 0` exactly when `P` lies in a finite set mapped into
//! itself by every map of the system. If such a set exists, every point `Q`
//! of it has finite orbits under all words, so `h(Q) <= C / (alpha - 1)`.
//! The forward closure of `P` is therefore explored breadth first: reaching
//! a point above that bound certifies positive height, and otherwise the
//! closure is contained in the finitely many rational points of bounded
//! height and must stabilize.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;

use crate::arith::{weil_height, ProjectivePoint};
use crate::error::{Error, Result};
use crate::estimate::LOG_FLOOR;
use crate::maps::RationalMapLift;
use crate::measure::GeneratingSystem;

/// Outcome of [`stable_closure`].
#[derive(Clone, Debug, PartialEq)]
pub enum StabilityVerdict {
    /// The forward closure of `P`; finite, contains `P`, closed under `S`.
    FiniteStableSet(BTreeSet<ProjectivePoint>),
    /// A point reachable from `P` (by `word`) whose height exceeds the
    /// escape bound.
    PositiveHeight { witness: ProjectivePoint, witness_height: f64, word: Vec<usize> },
}

impl StabilityVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, StabilityVerdict::FiniteStableSet(_))
    }
}

/// Heights above this are certainly above `bound`, allowing for the
/// rounding of `weil_height`.
fn escape_threshold(bound: f64) -> f64 {
    bound * (1.0 + LOG_FLOOR) + LOG_FLOOR
}

/// Breadth-first closure of `{P}` under the maps of positive weight.
pub fn stable_closure(system: &GeneratingSystem, p: &ProjectivePoint) -> StabilityVerdict {
    let threshold = escape_threshold(system.constants().escape_bound());
    let support: Vec<usize> =
        (0..system.len()).filter(|&i| system.weights()[i] > num_traits::Zero::zero()).collect();
    // point -> (parent, letter) for witness reconstruction
    let mut parent: HashMap<ProjectivePoint, Option<(ProjectivePoint, usize)>> = HashMap::new();
    let mut queue = VecDeque::new();
    parent.insert(p.clone(), None);
    queue.push_back(p.clone());
    while let Some(q) = queue.pop_front() {
        let h = weil_height(&q);
        if h > threshold {
            let mut word = Vec::new();
            let mut cur = &q;
            while let Some(Some((prev, i))) = parent.get(cur) {
                word.push(*i);
                cur = prev;
            }
            word.reverse();
            return StabilityVerdict::PositiveHeight { witness: q, witness_height: h, word };
        }
        for &i in &support {
            let next = system.map(i).evaluate(&q);
            if !parent.contains_key(&next) {
                parent.insert(next.clone(), Some((q.clone(), i)));
                queue.push_back(next);
            }
        }
    }
    StabilityVerdict::FiniteStableSet(parent.into_keys().collect())
}

/// `E_nu[h_hat](P) == 0`; independent of the (strictly positive) weights.
pub fn is_expected_height_zero(system: &GeneratingSystem, p: &ProjectivePoint) -> bool {
    stable_closure(system, p).is_finite()
}

/// Whether `P` is preperiodic for `phi`.
pub fn preperiodic_single(phi: &RationalMapLift, p: &ProjectivePoint) -> bool {
    let bound = phi.height_control_constant().constant / (phi.degree() as f64 - 1.0);
    let threshold = escape_threshold(bound);
    let mut seen = HashSet::new();
    let mut q = p.clone();
    loop {
        if weil_height(&q) > threshold {
            return false;
        }
        if !seen.insert(q.clone()) {
            return true;
        }
        q = phi.evaluate(&q);
    }
}

/// All affine points `x/y` with `|x| <= exp(height_bound)`,
/// `1 <= y <= min(denominator_bound, exp(height_bound))` whose closure is
/// finite. This is a box search, not a classification.
pub fn kernel_probe(
    system: &GeneratingSystem,
    height_bound: f64,
    denominator_bound: u64,
    budget: u64,
) -> Result<Vec<ProjectivePoint>> {
    if height_bound.is_nan() {
        return Err(Error::Invalid("height bound is NaN".into()));
    }
    if height_bound < 0.0 || denominator_bound == 0 {
        return Ok(Vec::new());
    }
    // tolerate exp rounding just below an integer
    let side = (height_bound.exp() + 1e-9).floor();
    let too_big = Error::BudgetExceeded { needed: u128::MAX, budget };
    if !side.is_finite() || side > 1e18 {
        return Err(too_big);
    }
    let side = side as u64;
    let ymax = side.min(denominator_bound);
    let needed = (2 * side as u128 + 1) * ymax as u128;
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut kernel: HashSet<ProjectivePoint> = HashSet::new();
    let mut out = Vec::new();
    for y in 1..=ymax {
        for x in -(side as i64)..=(side as i64) {
            if x.unsigned_abs().gcd(&y) != 1 {
                continue;
            }
            let p = ProjectivePoint::normalize(BigInt::from(x), BigInt::from(y))?;
            if kernel.contains(&p) {
                out.push(p);
                continue;
            }
            if let StabilityVerdict::FiniteStableSet(set) = stable_closure(system, &p) {
                kernel.extend(set);
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heights::{expected_height_exact, Limits};
    use crate::measure::substream;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::Rng;

    fn pt(x: i64, y: i64) -> ProjectivePoint {
        ProjectivePoint::from_i64(x, y).unwrap()
    }

    fn uc(d: usize, c: i64) -> RationalMapLift {
        RationalMapLift::unicritical(d, c)
    }

    fn z2_plus_z() -> RationalMapLift {
        RationalMapLift::from_affine_i64(&[0, 1, 1], &[1]).unwrap()
    }

    fn assert_closed(system: &GeneratingSystem, set: &BTreeSet<ProjectivePoint>) {
        for q in set {
            for map in system.maps() {
                assert!(set.contains(&map.evaluate(q)), "{} maps {q} outside", map);
            }
        }
    }

    fn replay(system: &GeneratingSystem, p: &ProjectivePoint, word: &[usize]) -> ProjectivePoint {
        word.iter().fold(p.clone(), |q, &i| system.map(i).evaluate(&q))
    }

    #[test]
    fn kernel_example_is_finite() {
        let s = GeneratingSystem::uniform(vec![uc(2, 0), uc(2, -1)]).unwrap();
        match stable_closure(&s, &pt(-1, 1)) {
            StabilityVerdict::FiniteStableSet(set) => {
                assert_eq!(set, [pt(-1, 1), pt(0, 1), pt(1, 1)].into_iter().collect());
                assert_closed(&s, &set);
            }
            v => panic!("{v:?}"),
        }
        assert!(is_expected_height_zero(&s, &pt(-1, 1)));
    }

    #[test]
    fn common_preperiodic_failure_example() {
        let s = GeneratingSystem::uniform(vec![uc(2, -2), z2_plus_z()]).unwrap();
        let p = pt(0, 1);
        match stable_closure(&s, &p) {
            StabilityVerdict::PositiveHeight { witness, witness_height, word } => {
                assert_eq!(replay(&s, &p, &word), witness);
                assert_eq!(weil_height(&witness), witness_height);
                assert!(witness_height > s.constants().escape_bound());
            }
            v => panic!("{v:?}"),
        }
        assert!(!is_expected_height_zero(&s, &p));
        // 0 is preperiodic for each map separately
        assert!(preperiodic_single(&uc(2, -2), &p));
        assert!(preperiodic_single(&z2_plus_z(), &p));
    }

    #[test]
    fn power_map_examples() {
        let s = GeneratingSystem::uniform(vec![uc(2, 0)]).unwrap();
        assert_eq!(stable_closure(&s, &pt(1, 1)), StabilityVerdict::FiniteStableSet([pt(1, 1)].into_iter().collect()));
        assert!(!is_expected_height_zero(&s, &pt(2, 1)));
    }

    #[test]
    fn preperiodic_examples() {
        assert!(preperiodic_single(&uc(2, 0), &pt(1, 1)));
        assert!(preperiodic_single(&uc(2, -1), &pt(0, 1)));
        assert!(!preperiodic_single(&uc(2, 0), &pt(2, 1)));
        assert!(preperiodic_single(&uc(2, 0), &ProjectivePoint::infinity()));
        assert!(preperiodic_single(&uc(2, -2), &pt(1, 1)));
        assert!(!preperiodic_single(&uc(2, 1), &pt(0, 1)));
    }

    #[test]
    fn kernel_probe_examples() {
        let s = GeneratingSystem::uniform(vec![uc(2, 0), uc(2, -1)]).unwrap();
        let found = kernel_probe(&s, 2.0, 8, 1_000_000).unwrap();
        for p in [pt(-1, 1), pt(0, 1), pt(1, 1)] {
            assert!(found.contains(&p));
        }
        for p in &found {
            assert!(is_expected_height_zero(&s, p));
        }
        let shifted = GeneratingSystem::uniform(vec![uc(2, 3)]).unwrap();
        assert!(kernel_probe(&shifted, 1.5, 4, 1_000_000).unwrap().is_empty());
        assert!(kernel_probe(&s, -1.0, 4, 10).unwrap().is_empty());
        assert!(kernel_probe(&s, 2.0, 8, 0).unwrap_err().is_budget());
        assert!(kernel_probe(&s, 1e6, 8, 10).unwrap_err().is_budget());
    }

    #[test]
    fn probe_box_includes_integer_edge() {
        // exp(ln 7) rounds below 7
        let s = GeneratingSystem::uniform(vec![uc(2, 0)]).unwrap();
        let found = kernel_probe(&s, 7f64.ln(), 7, 1000).unwrap();
        assert_eq!(found, vec![pt(-1, 1), pt(0, 1), pt(1, 1)]);
    }

    #[test]
    fn verdicts_agree_with_expected_heights() {
        let limits = Limits::default();
        let kernel = GeneratingSystem::uniform(vec![uc(2, 0), uc(2, -1)]).unwrap();
        assert!(expected_height_exact(&kernel, &pt(-1, 1), 10, &limits).unwrap().contains(0.0));
        let pos = GeneratingSystem::uniform(vec![uc(2, -2), z2_plus_z()]).unwrap();
        assert!(expected_height_exact(&pos, &pt(0, 1), 12, &limits).unwrap().excludes_zero());
    }

    fn random_system(rng: &mut impl Rng) -> Vec<RationalMapLift> {
        let n = rng.random_range(1..=3);
        (0..n).map(|_| uc(rng.random_range(2..=3), rng.random_range(-2..=1))).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn closure_is_sound(seed in 0u64..10_000, x in -4i64..=4, y in 1i64..=3) {
            let mut rng = substream(seed, 1);
            let maps = random_system(&mut rng);
            let s = GeneratingSystem::uniform(maps.clone()).unwrap();
            let p = pt(x, y);
            let verdict = stable_closure(&s, &p);
            match &verdict {
                StabilityVerdict::FiniteStableSet(set) => {
                    prop_assert!(set.contains(&p));
                    assert_closed(&s, set);
                    for q in set {
                        prop_assert!(weil_height(q) <= escape_threshold(s.constants().escape_bound()));
                    }
                }
                StabilityVerdict::PositiveHeight { witness, word, .. } => {
                    prop_assert_eq!(&replay(&s, &p, word), witness);
                    prop_assert!(weil_height(witness) > s.constants().escape_bound());
                }
            }
            // other strictly positive weights give the same verdict
            let n = maps.len();
            let weights: Vec<BigRational> = (1..=n)
                .map(|i| BigRational::new((i as i64).into(), ((n * (n + 1)) / 2).into()))
                .collect();
            let reweighted = GeneratingSystem::new(maps, weights).unwrap();
            prop_assert_eq!(stable_closure(&reweighted, &p).is_finite(), verdict.is_finite());
        }
    }
}
