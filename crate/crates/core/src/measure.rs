//! Generating systems `(S, nu_1)`, words over `S`, exact product measures and
//! the unicritical families `z^d + c` with geometric or Poisson degree laws.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, Poisson};

use crate::arith::log_biguint;
use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::maps::{bad_primes, HeightControlCertificate, RationalMapLift};

/// Default cap on the number of enumerated words.
pub const DEFAULT_ENUM_BUDGET: u64 = 2_000_000;

/// A finite word over `S`, as indices into the system.
pub type SequencePrefix = Vec<usize>;

/// Reproducible RNG for substream `index` of a master seed.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Height-control data of a family: `C` bounds every map's height
/// distortion and `alpha` is the minimum degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemConstants {
    pub c: f64,
    pub alpha: u32,
}

impl SystemConstants {
    /// `C / (alpha - 1)`: the uniform bound on `|h_hat - h|`.
    pub fn escape_bound(&self) -> f64 {
        self.c / (self.alpha as f64 - 1.0)
    }

    /// Tail bound after a prefix of degree `deg`.
    pub fn tail(&self, deg: f64) -> f64 {
        self.escape_bound() / deg
    }
}

/// A finite set of maps with exact probability weights.
#[derive(Clone, Debug)]
pub struct GeneratingSystem {
    maps: Vec<Arc<RationalMapLift>>,
    weights: Vec<BigRational>,
    certificates: Vec<HeightControlCertificate>,
}

impl GeneratingSystem {
    pub fn new(maps: Vec<RationalMapLift>, weights: Vec<BigRational>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Invalid("a generating system needs at least one map".into()));
        }
        if maps.len() != weights.len() {
            return Err(Error::Invalid(format!("{} maps but {} weights", maps.len(), weights.len())));
        }
        if weights.iter().any(Signed::is_negative) {
            return Err(Error::Invalid("weights must be non-negative".into()));
        }
        let total: BigRational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("weights sum to {total}, not 1")));
        }
        let certificates = maps.iter().map(RationalMapLift::height_control_constant).collect();
        Ok(GeneratingSystem { maps: maps.into_iter().map(Arc::new).collect(), weights, certificates })
    }

    pub fn uniform(maps: Vec<RationalMapLift>) -> Result<Self> {
        let n = maps.len().max(1);
        let w = BigRational::new(BigInt::one(), BigInt::from(n));
        Self::new(maps, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn map(&self, i: usize) -> &Arc<RationalMapLift> {
        &self.maps[i]
    }

    pub fn maps(&self) -> impl Iterator<Item = &RationalMapLift> {
        self.maps.iter().map(|m| m.as_ref())
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn certificates(&self) -> &[HeightControlCertificate] {
        &self.certificates
    }

    /// Every weight strictly positive.
    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(Signed::is_positive)
    }

    pub fn min_degree(&self) -> usize {
        self.maps.iter().map(|m| m.degree()).min().expect("nonempty")
    }

    pub fn max_degree(&self) -> usize {
        self.maps.iter().map(|m| m.degree()).max().expect("nonempty")
    }

    pub fn constants(&self) -> SystemConstants {
        let c = self.certificates.iter().map(|c| c.constant).fold(0.0, f64::max);
        SystemConstants { c, alpha: self.min_degree() as u32 }
    }

    /// Largest real-place one-step constant over the maps.
    pub fn archimedean_constant(&self) -> f64 {
        self.maps
            .iter()
            .zip(&self.certificates)
            .map(|(m, c)| {
                let res = log_biguint(m.resultant().magnitude()).expect("nonzero resultant");
                c.upper.max(c.lower - res)
            })
            .fold(0.0, f64::max)
    }

    /// `max v_p(Res)` over the maps.
    pub fn resultant_valuation_bound(&self, p: &BigUint) -> u64 {
        self.maps.iter().map(|m| m.resultant_valuation(p)).max().unwrap_or(0)
    }

    pub fn bad_primes(&self) -> BTreeSet<BigUint> {
        bad_primes(self.maps())
    }

    fn check_word(&self, word: &[usize]) -> Result<()> {
        match word.iter().find(|&&i| i >= self.len()) {
            Some(i) => Err(Error::Invalid(format!("map index {i} out of range for {} maps", self.len()))),
            None => Ok(()),
        }
    }

    /// Product of the degrees along `word`.
    pub fn prefix_degree(&self, word: &[usize]) -> Result<u128> {
        self.check_word(word)?;
        word.iter().try_fold(1u128, |acc, &i| acc.checked_mul(self.maps[i].degree() as u128)).ok_or_else(|| {
            Error::Invalid("word degree overflows u128".into())
        })
    }

    /// `nu_n(word)`: product of the letter weights.
    pub fn word_weight(&self, word: &[usize]) -> Result<BigRational> {
        self.check_word(word)?;
        Ok(word.iter().map(|&i| &self.weights[i]).product())
    }

    /// `(sum nu_1(phi) / deg(phi))^-1`.
    pub fn d_nu(&self) -> BigRational {
        let s: BigRational = self
            .maps
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w / BigInt::from(m.degree()))
            .sum();
        s.recip()
    }

    /// `nu_k*(word) = nu_k(word) / deg(word) * d_nu^k`.
    pub fn nu_star_weight(&self, word: &[usize]) -> Result<BigRational> {
        let deg = self.prefix_degree(word)?;
        let d = self.d_nu();
        let dk = num_traits::pow(d, word.len());
        Ok(self.word_weight(word)? / BigInt::from(deg) * dk)
    }

    /// `|S|^n`, or an error when it exceeds `budget`.
    pub fn check_budget(&self, n: usize, budget: u64) -> Result<u128> {
        let count = (self.len() as u128).checked_pow(n as u32);
        match count {
            Some(c) if c <= budget as u128 => Ok(c),
            Some(c) => Err(Error::BudgetExceeded { needed: c, budget }),
            None => Err(Error::BudgetExceeded { needed: u128::MAX, budget }),
        }
    }

    /// All words of length `n` with their exact weights, in lexicographic order.
    pub fn enumerate_prefixes(&self, n: usize, budget: u64) -> Result<Vec<(SequencePrefix, BigRational)>> {
        self.check_budget(n, budget)?;
        let mut out: Vec<(SequencePrefix, BigRational)> = vec![(Vec::new(), BigRational::one())];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|(w, p)| {
                    self.weights.iter().enumerate().map(move |(i, wi)| {
                        let mut w = w.clone();
                        w.push(i);
                        (w, &p * wi)
                    })
                })
                .collect();
        }
        Ok(out)
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        let w: Vec<f64> = self.weights.iter().map(|w| w.to_f64().unwrap_or(0.0)).collect();
        WeightedIndex::new(w).expect("weights sum to one")
    }

    /// An i.i.d. word of length `n` drawn from `nu_1`.
    pub fn sample_prefix<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SequencePrefix {
        let dist = self.sampler();
        (0..n).map(|_| dist.sample(rng)).collect()
    }
}

/// An eventually periodic word `prefix . cycle^infinity`; an empty cycle
/// makes the word finite.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    prefix: Vec<usize>,
    cycle: Vec<usize>,
}

impl Word {
    pub fn finite(letters: Vec<usize>) -> Self {
        Word { prefix: letters, cycle: Vec::new() }
    }

    pub fn periodic(cycle: Vec<usize>) -> Self {
        Word { prefix: Vec::new(), cycle }
    }

    pub fn eventually_periodic(prefix: Vec<usize>, cycle: Vec<usize>) -> Self {
        Word { prefix, cycle }
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn is_finite(&self) -> bool {
        self.cycle.is_empty()
    }

    /// Length of a finite word; `None` for infinite words.
    pub fn len(&self) -> Option<usize> {
        self.is_finite().then_some(self.prefix.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Letter `k` (0-based), `None` past the end of a finite word.
    pub fn letter(&self, k: usize) -> Option<usize> {
        if k < self.prefix.len() {
            Some(self.prefix[k])
        } else if self.cycle.is_empty() {
            None
        } else {
            Some(self.cycle[(k - self.prefix.len()) % self.cycle.len()])
        }
    }

    /// The first `n` letters (fewer if the word is shorter).
    pub fn take(&self, n: usize) -> SequencePrefix {
        (0..n).map_while(|k| self.letter(k)).collect()
    }

    /// The word with its first `m` letters removed.
    pub fn shift(&self, m: usize) -> Word {
        if m <= self.prefix.len() {
            return Word { prefix: self.prefix[m..].to_vec(), cycle: self.cycle.clone() };
        }
        if self.cycle.is_empty() {
            return Word::finite(Vec::new());
        }
        let r = (m - self.prefix.len()) % self.cycle.len();
        let mut cycle = self.cycle[r..].to_vec();
        cycle.extend_from_slice(&self.cycle[..r]);
        Word { prefix: Vec::new(), cycle }
    }

    /// Position state for cycle detection: equal states have equal futures.
    pub fn state(&self, k: usize) -> usize {
        if k < self.prefix.len() || self.cycle.is_empty() {
            k
        } else {
            self.prefix.len() + (k - self.prefix.len()) % self.cycle.len()
        }
    }
}

/// A lazily supplied sequence of maps `theta_1, theta_2, ...`.
pub trait MapSource {
    fn constants(&self) -> SystemConstants;

    /// Map applied at step `k` (0-based); `None` past the end of a finite word.
    fn map_at(&mut self, k: usize) -> Option<Arc<RationalMapLift>>;

    /// Bound on `|log||theta(u)|| - deg(theta) log||u|||` at the real place,
    /// over every map the source can supply.
    fn archimedean_constant(&self) -> f64;

    /// Bound on `v_p(Res(theta))` over every map the source can supply.
    fn resultant_valuation_bound(&self, p: &BigUint) -> u64;

    /// Primes of bad reduction of some map the source can supply.
    fn bad_primes(&self) -> BTreeSet<BigUint>;
}

/// A deterministic word over a generating system.
#[derive(Clone, Debug)]
pub struct SystemWord<'a> {
    pub system: &'a GeneratingSystem,
    pub word: Word,
}

impl<'a> SystemWord<'a> {
    pub fn new(system: &'a GeneratingSystem, word: Word) -> Result<Self> {
        system.check_word(word.prefix())?;
        system.check_word(word.cycle())?;
        Ok(SystemWord { system, word })
    }
}

impl MapSource for SystemWord<'_> {
    fn constants(&self) -> SystemConstants {
        self.system.constants()
    }

    fn map_at(&mut self, k: usize) -> Option<Arc<RationalMapLift>> {
        self.word.letter(k).map(|i| self.system.map(i).clone())
    }

    fn archimedean_constant(&self) -> f64 {
        self.system.archimedean_constant()
    }

    fn resultant_valuation_bound(&self, p: &BigUint) -> u64 {
        self.system.resultant_valuation_bound(p)
    }

    fn bad_primes(&self) -> BTreeSet<BigUint> {
        self.system.bad_primes()
    }
}

/// An i.i.d. word drawn lazily from `nu_1`; letters are cached so repeated
/// queries agree.
#[derive(Clone, Debug)]
pub struct SampledWord<'a> {
    system: &'a GeneratingSystem,
    dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    drawn: Vec<usize>,
}

impl<'a> SampledWord<'a> {
    pub fn new(system: &'a GeneratingSystem, rng: ChaCha8Rng) -> Self {
        SampledWord { system, dist: system.sampler(), rng, drawn: Vec::new() }
    }

    /// Letters drawn so far.
    pub fn drawn(&self) -> &[usize] {
        &self.drawn
    }

    /// Letter `k`, drawing as needed.
    pub fn letter(&mut self, k: usize) -> usize {
        while self.drawn.len() <= k {
            let i = self.dist.sample(&mut self.rng);
            self.drawn.push(i);
        }
        self.drawn[k]
    }
}

impl MapSource for SampledWord<'_> {
    fn constants(&self) -> SystemConstants {
        self.system.constants()
    }

    fn map_at(&mut self, k: usize) -> Option<Arc<RationalMapLift>> {
        let i = self.letter(k);
        Some(self.system.map(i).clone())
    }

    fn archimedean_constant(&self) -> f64 {
        self.system.archimedean_constant()
    }

    fn resultant_valuation_bound(&self, p: &BigUint) -> u64 {
        self.system.resultant_valuation_bound(p)
    }

    fn bad_primes(&self) -> BTreeSet<BigUint> {
        self.system.bad_primes()
    }
}

/// Degree law of a unicritical family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DegreeLaw {
    /// `P(d) = (1 - r) r^(d - 2)`, `0 < r < 1`.
    Geometric { r: f64 },
    /// `P(d) = e^-lambda lambda^(d - 2) / (d - 2)!`, `lambda > 0`.
    Poisson { lambda: f64 },
}

/// `S_B = { z^d + c : d >= 2, |c| <= B }` with mass
/// `P(d) / (2B + 1)` on each `z^d + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnicriticalFamily {
    pub bound: u64,
    pub law: DegreeLaw,
}

impl UnicriticalFamily {
    pub fn new(bound: u64, law: DegreeLaw) -> Result<Self> {
        if bound == 0 {
            return Err(Error::Invalid("family bound B must be positive".into()));
        }
        match law {
            DegreeLaw::Geometric { r } if !(r > 0.0 && r < 1.0) => {
                Err(Error::Invalid(format!("geometric parameter r = {r} outside (0, 1)")))
            }
            DegreeLaw::Poisson { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::Invalid(format!("poisson parameter lambda = {lambda} must be positive")))
            }
            _ => Ok(UnicriticalFamily { bound, law }),
        }
    }

    /// `C = log(2B)`, `alpha = 2`.
    pub fn constants(&self) -> SystemConstants {
        SystemConstants { c: (2.0 * self.bound as f64).ln(), alpha: 2 }
    }

    /// Total mass of degree `d` (summed over the `2B + 1` constants).
    pub fn degree_mass(&self, d: usize) -> f64 {
        if d < 2 {
            return 0.0;
        }
        let k = (d - 2) as f64;
        match self.law {
            DegreeLaw::Geometric { r } => (1.0 - r) * r.powf(k),
            DegreeLaw::Poisson { lambda } => {
                let log_fact: f64 = (1..=(d - 2)).map(|i| (i as f64).ln()).sum();
                (-lambda + k * lambda.ln() - log_fact).exp()
            }
        }
    }

    /// Mass of the single map `z^d + c`.
    pub fn mass(&self, d: usize, c: i64) -> f64 {
        if c.unsigned_abs() > self.bound {
            return 0.0;
        }
        self.degree_mass(d) / (2 * self.bound + 1) as f64
    }

    /// Upper bound on `sum_{d > dmax} P(d)`.
    pub fn tail_mass(&self, dmax: usize) -> f64 {
        if dmax < 2 {
            return 1.0;
        }
        match self.law {
            DegreeLaw::Geometric { r } => r.powf((dmax - 1) as f64),
            DegreeLaw::Poisson { lambda } => {
                // ratio p_{k+1} / p_k = lambda / (k + 1) is decreasing in k
                let ratio = lambda / dmax as f64;
                if ratio >= 1.0 {
                    1.0
                } else {
                    (self.degree_mass(dmax + 1) / (1.0 - ratio)).min(1.0)
                }
            }
        }
    }

    /// Draws `(d, c)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, i64) {
        let k = match self.law {
            DegreeLaw::Geometric { r } => Geometric::new(1.0 - r).expect("valid p").sample(rng) as usize,
            DegreeLaw::Poisson { lambda } => Poisson::new(lambda).expect("valid lambda").sample(rng) as usize,
        };
        let b = self.bound as i64;
        (k + 2, rng.random_range(-b..=b))
    }

    /// `(sum_d P(d) / d)^-1` with a certified truncation radius `<= eps`.
    pub fn d_nu(&self, eps: f64) -> Estimate {
        let mut partial = 0.0;
        let mut d = 2usize;
        loop {
            partial += self.degree_mass(d) / d as f64;
            let tail = self.tail_mass(d) / (d + 1) as f64;
            let hi = 1.0 / partial;
            let lo = 1.0 / (partial + tail);
            let radius = (hi - lo) / 2.0 + 4.0 * f64::EPSILON * hi * d as f64;
            if radius <= eps || d > 100_000 {
                return Estimate::certified((hi + lo) / 2.0, radius);
            }
            d += 1;
        }
    }
}

/// An i.i.d. word in a unicritical family.
#[derive(Clone, Debug)]
pub struct FamilyWord {
    family: UnicriticalFamily,
    rng: ChaCha8Rng,
    drawn: Vec<(usize, i64)>,
    cache: HashMap<(usize, i64), Arc<RationalMapLift>>,
}

impl FamilyWord {
    pub fn new(family: UnicriticalFamily, rng: ChaCha8Rng) -> Self {
        FamilyWord { family, rng, drawn: Vec::new(), cache: HashMap::new() }
    }

    pub fn drawn(&self) -> &[(usize, i64)] {
        &self.drawn
    }

    pub fn letter(&mut self, k: usize) -> (usize, i64) {
        while self.drawn.len() <= k {
            let dc = self.family.sample(&mut self.rng);
            self.drawn.push(dc);
        }
        self.drawn[k]
    }
}

impl MapSource for FamilyWord {
    fn constants(&self) -> SystemConstants {
        self.family.constants()
    }

    fn map_at(&mut self, k: usize) -> Option<Arc<RationalMapLift>> {
        let (d, c) = self.letter(k);
        Some(self.cache.entry((d, c)).or_insert_with(|| Arc::new(RationalMapLift::unicritical(d, c))).clone())
    }

    /// `z^d + c` moves sup-norms by at most a factor `1 + |c|` either way.
    fn archimedean_constant(&self) -> f64 {
        (1.0 + self.family.bound as f64).ln()
    }

    /// Every `z^d + c` has resultant 1.
    fn resultant_valuation_bound(&self, _p: &BigUint) -> u64 {
        0
    }

    fn bad_primes(&self) -> BTreeSet<BigUint> {
        BTreeSet::new()
    }
}

/// Where i.i.d. words are drawn from.
#[derive(Clone, Copy, Debug)]
pub enum Sampler<'a> {
    System(&'a GeneratingSystem),
    Family(&'a UnicriticalFamily),
}

impl<'a> Sampler<'a> {
    pub fn constants(&self) -> SystemConstants {
        match self {
            Sampler::System(s) => s.constants(),
            Sampler::Family(f) => f.constants(),
        }
    }

    /// The word for sample `index` of the run seeded by `seed`.
    pub fn source(&self, seed: u64, index: u64) -> Box<dyn MapSource + 'a> {
        let rng = substream(seed, index);
        match *self {
            Sampler::System(s) => Box::new(SampledWord::new(s, rng)),
            Sampler::Family(f) => Box::new(FamilyWord::new(*f, rng)),
        }
    }
}

/// Sums `nu_n` over all words of length `n` (exactly).
pub fn total_weight(system: &GeneratingSystem, n: usize, budget: u64) -> Result<BigRational> {
    Ok(system.enumerate_prefixes(n, budget)?.into_iter().map(|(_, w)| w).fold(BigRational::zero(), |a, b| a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn power(d: usize) -> RationalMapLift {
        RationalMapLift::unicritical(d, 0)
    }

    fn sys(degs: &[usize], weights: &[(i64, i64)]) -> GeneratingSystem {
        GeneratingSystem::new(degs.iter().map(|&d| power(d)).collect(), weights.iter().map(|&(a, b)| q(a, b)).collect()).unwrap()
    }

    #[test]
    fn system_validation() {
        assert!(GeneratingSystem::new(vec![power(2)], vec![q(1, 2)]).is_err());
        assert!(GeneratingSystem::new(vec![power(2), power(3)], vec![q(3, 2), q(-1, 2)]).is_err());
        assert!(GeneratingSystem::new(vec![], vec![]).is_err());
        let s = sys(&[2, 3], &[(1, 1), (0, 1)]);
        assert!(!s.is_strictly_positive());
        assert!(sys(&[2, 3], &[(1, 2), (1, 2)]).is_strictly_positive());
    }

    #[test]
    fn enumerate_examples() {
        let s = sys(&[2, 2], &[(1, 2), (1, 2)]);
        let words = s.enumerate_prefixes(3, DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(words.len(), 8);
        assert!(words.iter().all(|(_, w)| *w == q(1, 8)));
        let s = sys(&[2, 3], &[(1, 3), (2, 3)]);
        let words = s.enumerate_prefixes(2, DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(words.iter().find(|(w, _)| w == &vec![0, 1]).unwrap().1, q(2, 9));
        let empty = s.enumerate_prefixes(0, DEFAULT_ENUM_BUDGET).unwrap();
        assert_eq!(empty, vec![(vec![], q(1, 1))]);
        assert!(matches!(s.enumerate_prefixes(30, DEFAULT_ENUM_BUDGET), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn prefix_degree_examples() {
        let s = sys(&[2, 3], &[(1, 2), (1, 2)]);
        assert_eq!(s.prefix_degree(&[0, 1]).unwrap(), 6);
        assert_eq!(s.prefix_degree(&[]).unwrap(), 1);
        assert_eq!(s.prefix_degree(&[0, 0, 0]).unwrap(), 8);
        assert!(s.prefix_degree(&[2]).is_err());
    }

    #[test]
    fn d_nu_examples() {
        assert_eq!(sys(&[3, 3], &[(1, 3), (2, 3)]).d_nu(), q(3, 1));
        assert_eq!(sys(&[2, 3], &[(1, 2), (1, 2)]).d_nu(), q(12, 5));
        assert_eq!(sys(&[2, 4], &[(1, 4), (3, 4)]).d_nu(), q(16, 5));
    }

    #[test]
    fn nu_star_examples() {
        let common = sys(&[2, 2, 2], &[(1, 6), (1, 3), (1, 2)]);
        for (w, nu) in common.enumerate_prefixes(3, DEFAULT_ENUM_BUDGET).unwrap() {
            assert_eq!(common.nu_star_weight(&w).unwrap(), nu);
        }
        let s = sys(&[2, 3], &[(1, 2), (1, 2)]);
        assert_eq!(s.nu_star_weight(&[0]).unwrap(), q(3, 5));
        assert_eq!(s.nu_star_weight(&[1]).unwrap(), q(2, 5));
    }

    #[test]
    fn sampling_is_deterministic_and_calibrated() {
        let s = sys(&[2, 3], &[(1, 3), (2, 3)]);
        let a = s.sample_prefix(50, &mut substream(9, 0));
        let b = s.sample_prefix(50, &mut substream(9, 0));
        assert_eq!(a, b);
        assert_ne!(a, s.sample_prefix(50, &mut substream(9, 1)));
        let n = 100_000;
        let draws = s.sample_prefix(n, &mut substream(42, 3));
        let ones = draws.iter().filter(|&&i| i == 0).count() as f64;
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((ones - n as f64 * p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn sampled_word_caches_letters() {
        let s = sys(&[2, 3], &[(1, 2), (1, 2)]);
        let mut w = SampledWord::new(&s, substream(1, 0));
        let l5 = w.letter(5);
        assert_eq!(w.drawn().len(), 6);
        assert_eq!(w.letter(5), l5);
        let mut w2 = SampledWord::new(&s, substream(1, 0));
        assert_eq!(w2.letter(5), l5);
    }

    #[test]
    fn word_shift_and_letters() {
        let w = Word::eventually_periodic(vec![2], vec![0, 1]);
        assert_eq!(w.take(6), vec![2, 0, 1, 0, 1, 0]);
        assert_eq!(w.shift(0), w);
        let s = w.shift(2);
        assert_eq!(s, Word::periodic(vec![1, 0]));
        assert!(!s.is_finite());
        assert_eq!(Word::finite(vec![1, 2, 3]).shift(5), Word::finite(vec![]));
        assert_eq!(Word::finite(vec![1, 2, 3]).letter(3), None);
        for m in 0..7 {
            for k in 0..7 {
                assert_eq!(w.shift(m).letter(k), w.letter(m + k));
            }
        }
    }

    #[test]
    fn family_sampling_matches_mass_function() {
        let fam = UnicriticalFamily::new(1, DegreeLaw::Geometric { r: 0.5 }).unwrap();
        let mut rng = substream(7, 0);
        let n = 60_000;
        let mut deg2 = 0usize;
        let mut by_c = [0usize; 3];
        for _ in 0..n {
            let (d, c) = fam.sample(&mut rng);
            if d == 2 {
                deg2 += 1;
                by_c[(c + 1) as usize] += 1;
            }
        }
        let p = 0.5;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((deg2 as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        for count in by_c {
            let p3 = 1.0 / 6.0;
            let s3 = (n as f64 * p3 * (1.0 - p3)).sqrt();
            assert!((count as f64 - n as f64 * p3).abs() <= 4.0 * s3);
        }
        assert!((fam.mass(2, 0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(fam.mass(2, 2), 0.0);
    }

    #[test]
    fn family_masses_sum_to_one() {
        for law in [DegreeLaw::Geometric { r: 0.3 }, DegreeLaw::Geometric { r: 0.9 }, DegreeLaw::Poisson { lambda: 0.5 }, DegreeLaw::Poisson { lambda: 7.0 }] {
            let fam = UnicriticalFamily::new(2, law).unwrap();
            let mut d = 2;
            let mut total = 0.0;
            loop {
                for c in -2..=2 {
                    total += fam.mass(d, c);
                }
                if fam.tail_mass(d) < 1e-13 {
                    break;
                }
                d += 1;
            }
            assert!((total - 1.0).abs() <= 1e-12 + fam.tail_mass(d), "{law:?}: {total}");
        }
    }

    #[test]
    fn family_d_nu_examples() {
        // partial-sum oracle written out directly
        let oracle = |mass: &dyn Fn(usize) -> f64| 1.0 / (2..400).map(|d| mass(d) / d as f64).sum::<f64>();
        let geo = UnicriticalFamily::new(1, DegreeLaw::Geometric { r: 0.01 }).unwrap();
        let e = geo.d_nu(1e-10);
        assert!(e.error <= 1e-10);
        assert!((e.value - oracle(&|d| 0.99 * 0.01f64.powi(d as i32 - 2))).abs() <= 1e-9);
        assert!((e.value - 2.0).abs() < 0.01);
        let poi = UnicriticalFamily::new(3, DegreeLaw::Poisson { lambda: 1e-3 }).unwrap();
        let e = poi.d_nu(1e-10);
        assert!((e.value - 2.0).abs() < 1e-3);
        let heavy = UnicriticalFamily::new(1, DegreeLaw::Poisson { lambda: 20.0 }).unwrap();
        let e = heavy.d_nu(1e-8);
        assert!(e.value >= 2.0 && e.error <= 1e-8);
        assert!(UnicriticalFamily::new(1, DegreeLaw::Geometric { r: 1.0 }).is_err());
        assert!(UnicriticalFamily::new(0, DegreeLaw::Geometric { r: 0.5 }).is_err());
    }

    fn small_system() -> impl Strategy<Value = GeneratingSystem> {
        proptest::collection::vec((2usize..=4, 1i64..=5), 1..=3).prop_map(|v| {
            let total: i64 = v.iter().map(|x| x.1).sum();
            GeneratingSystem::new(v.iter().map(|&(d, _)| power(d)).collect(), v.iter().map(|&(_, w)| q(w, total)).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn measures_are_normalized(s in small_system(), n in 0usize..=6) {
            prop_assert!(total_weight(&s, n, DEFAULT_ENUM_BUDGET).unwrap().is_one());
            let star: BigRational = s.enumerate_prefixes(n, DEFAULT_ENUM_BUDGET).unwrap().iter().map(|(w, _)| s.nu_star_weight(w).unwrap()).sum();
            prop_assert!(star.is_one());
        }

        #[test]
        fn degree_is_multiplicative(s in small_system(), u in proptest::collection::vec(0usize..3, 0..6), v in proptest::collection::vec(0usize..3, 0..6)) {
            let u: Vec<usize> = u.into_iter().map(|i| i % s.len()).collect();
            let v: Vec<usize> = v.into_iter().map(|i| i % s.len()).collect();
            let mut uv = u.clone();
            uv.extend(&v);
            prop_assert_eq!(s.prefix_degree(&uv).unwrap(), s.prefix_degree(&u).unwrap() * s.prefix_degree(&v).unwrap());
        }

        #[test]
        fn d_nu_is_between_degrees(s in small_system()) {
            let d = s.d_nu();
            prop_assert!(d >= BigRational::from_integer(s.min_degree().into()));
            prop_assert!(d <= BigRational::from_integer(s.max_degree().into()));
        }
    }
}
