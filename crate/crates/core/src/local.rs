//! Green functions, local canonical heights and the decomposition of the
//! canonical height into local pieces over the places of `Q`.
//!
//! For a lift `u = (x, y)` and a word `theta_1, theta_2, ...`,
//! `G_v(u) = lim log||theta_n~ ... theta_1~(u)||_v / deg(gamma_n)`. With
//! `u_k` the step-`k` image and `t_k = log||theta_k~(u_{k-1})||_v - d_k log||u_{k-1}||_v`,
//! `G_v(u) = log||u||_v + sum_k t_k / deg(gamma_k)` and `|t_k| <= c_v`.
//! Since `t_k` is invariant under scaling `u_{k-1}`, the real place works
//! with fixed-point rescaled coordinates and the p-adic places work modulo a
//! fixed power of `p` with the `p`-content stripped.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::arith::{is_probable_prime, log_biguint, prime_divisors, split_prime_power, ProjectivePoint};
use crate::error::{Error, Result};
use crate::estimate::{Estimate, GreenValue, LOG_FLOOR};
use crate::heights::hoeffding_half_width;
use crate::maps::eval_form;
use crate::measure::{GeneratingSystem, MapSource, Sampler, SystemWord, Word};

/// A place of `Q`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Place {
    Archimedean,
    Prime(BigUint),
}

impl Place {
    pub fn prime(p: u64) -> Result<Self> {
        Self::prime_big(BigUint::from(p))
    }

    pub fn prime_big(p: BigUint) -> Result<Self> {
        if is_probable_prime(&p) {
            Ok(Place::Prime(p))
        } else {
            Err(Error::Invalid(format!("{p} is not prime")))
        }
    }

    /// `log |n|_v`; `None` for `n = 0`.
    pub fn log_abs(&self, n: &BigInt) -> Option<f64> {
        if n.is_zero() {
            return None;
        }
        Some(match self {
            Place::Archimedean => log_biguint(n.magnitude()).expect("nonzero"),
            Place::Prime(p) => {
                let v = split_prime_power(p, n).0;
                -(v as f64) * log_biguint(p).expect("prime")
            }
        })
    }

    /// `log ||(x, y)||_v`.
    pub fn log_norm(&self, x: &BigInt, y: &BigInt) -> Option<f64> {
        match (self.log_abs(x), self.log_abs(y)) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(f64::NEG_INFINITY).max(b.unwrap_or(f64::NEG_INFINITY))),
        }
    }

    /// One-step constant `c_v` of the maps a source can supply.
    pub fn constant(&self, source: &dyn MapSource) -> f64 {
        match self {
            Place::Archimedean => source.archimedean_constant(),
            Place::Prime(p) => source.resultant_valuation_bound(p) as f64 * log_biguint(p).expect("prime"),
        }
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Archimedean => write!(f, "inf"),
            Place::Prime(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Place {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "oo" | "∞" => Ok(Place::Archimedean),
            t => {
                let p: BigUint = t.parse().map_err(|_| Error::Invalid(format!("bad place {s:?}")))?;
                Place::prime_big(p)
            }
        }
    }
}

/// A nonzero binary form `E` of degree `e >= 1`; coefficient `i` multiplies
/// `x^i y^(e - i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DivisorForm {
    coeffs: Vec<BigInt>,
}

impl DivisorForm {
    pub fn new(coeffs: Vec<BigInt>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Invalid("divisor form must have degree at least 1".into()));
        }
        if coeffs.iter().all(Zero::is_zero) {
            return Err(Error::Invalid("divisor form is identically zero".into()));
        }
        Ok(DivisorForm { coeffs })
    }

    pub fn from_i64(coeffs: &[i64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// `E = x`, the divisor `[0 : 1]`.
    pub fn x() -> Self {
        DivisorForm { coeffs: vec![BigInt::zero(), BigInt::one()] }
    }

    /// `E = y`, the divisor at infinity.
    pub fn y() -> Self {
        DivisorForm { coeffs: vec![BigInt::one(), BigInt::zero()] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn eval(&self, x: &BigInt, y: &BigInt) -> BigInt {
        eval_form(&self.coeffs, x, y)
    }
}

/// Extra working bits for the real place beyond what the one-step constant
/// needs.
const ARCH_GUARD_BITS: u64 = 160;

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("tolerance must be positive, got {eps}")))
    }
}

fn tail(c: f64, alpha: u32, degree: f64) -> f64 {
    c / (degree * (alpha as f64 - 1.0))
}

fn max_bits(x: &BigInt, y: &BigInt) -> u64 {
    x.bits().max(y.bits())
}

fn rescale(x: BigInt, y: BigInt, bits: u64) -> (BigInt, BigInt) {
    let b = max_bits(&x, &y);
    if b > bits {
        let s = b - bits;
        (x >> s, y >> s)
    } else {
        let s = bits - b;
        (x << s, y << s)
    }
}

fn green_archimedean(source: &mut dyn MapSource, x: &BigInt, y: &BigInt, eps: f64) -> GreenValue {
    let consts = source.constants();
    let c = source.archimedean_constant();
    let log_norm = log_biguint(&x.magnitude().clone().max(y.magnitude().clone())).expect("nonzero point");
    let bits = ARCH_GUARD_BITS + (3.0 * c / std::f64::consts::LN_2).ceil() as u64;
    // Dropping bits perturbs the unit vector by at most 2^(1 - bits)
    // relatively; through theta and the lower bound exp(-c) on its norm this
    // moves t_k by at most d e^(2c) 2^(3 - bits).
    let trunc = (2.0 * c).exp() * (3.0 - bits as f64).exp2();
    let (mut ux, mut uy) = rescale(x.clone(), y.clone(), bits);
    let mut value = log_norm;
    let mut rounding = 4.0 * f64::EPSILON * log_norm.abs();
    let mut degree = 1.0f64;
    let mut k = 0;
    while tail(c, consts.alpha, degree) > eps {
        let Some(map) = source.map_at(k) else { break };
        let d = map.degree() as f64;
        let before = log_biguint(&ux.magnitude().clone().max(uy.magnitude().clone())).expect("unit vector");
        let (nx, ny) = map.apply_lift(&ux, &uy);
        let after = log_biguint(&nx.magnitude().clone().max(ny.magnitude().clone())).expect("morphism");
        degree *= d;
        value += (after - d * before) / degree;
        rounding += (4.0 * f64::EPSILON * (after.abs() + d * before.abs()) + d * trunc) / degree;
        (ux, uy) = rescale(nx, ny, bits);
        k += 1;
    }
    let err = tail(c, consts.alpha, degree) + rounding + LOG_FLOOR * value.abs();
    GreenValue::certified(value, err)
}

/// Exponents `s_k` stripped at each of the first `steps` steps of the
/// p-adic Green function at `(x, y)`, after the initial content `v_0`.
pub fn padic_strip_trace(
    source: &mut dyn MapSource,
    p: &BigUint,
    x: &BigInt,
    y: &BigInt,
    steps: usize,
) -> Result<(u64, Vec<u64>)> {
    let run = padic_run(source, p, x, y, steps, |_| true)?;
    Ok((run.v0, run.strips))
}

struct PadicRun {
    v0: u64,
    strips: Vec<u64>,
    degrees: Vec<f64>,
}

/// Runs at most `max_steps` steps while `keep_going(degree)` holds.
fn padic_run(
    source: &mut dyn MapSource,
    p: &BigUint,
    x: &BigInt,
    y: &BigInt,
    max_steps: usize,
    keep_going: impl Fn(f64) -> bool,
) -> Result<PadicRun> {
    if x.is_zero() && y.is_zero() {
        return Err(Error::ZeroPoint);
    }
    let valuation = |n: &BigInt| if n.is_zero() { u64::MAX } else { split_prime_power(p, n).0 };
    let v0 = valuation(x).min(valuation(y));
    let pb = BigInt::from(p.clone());
    let pow = |e: u64| num_traits::pow(pb.clone(), e as usize);
    let vmax = source.resultant_valuation_bound(p);
    // For a primitive (x, y) at p, one step strips at most vmax digits, so
    // this many digits suffice for every step.
    let mut prec = (max_steps as u64 + 1) * vmax + 1;
    let mut modulus = pow(prec);
    let content = pow(v0);
    let (mut ux, mut uy) = ((x / &content).mod_floor(&modulus), (y / &content).mod_floor(&modulus));
    let mut strips = Vec::new();
    let mut degrees = Vec::new();
    let mut degree = 1.0f64;
    while strips.len() < max_steps && keep_going(degree) {
        let Some(map) = source.map_at(strips.len()) else { break };
        degree *= map.degree() as f64;
        degrees.push(degree);
        if vmax == 0 {
            strips.push(0);
            continue;
        }
        let (nx, ny) = map.apply_lift(&ux, &uy);
        let (nx, ny) = (nx.mod_floor(&modulus), ny.mod_floor(&modulus));
        let s = valuation(&nx).min(valuation(&ny)).min(prec);
        if s >= prec {
            return Err(Error::Invalid("p-adic precision exhausted".into()));
        }
        let ps = pow(s);
        prec -= s;
        modulus = pow(prec);
        ux = (nx / &ps).mod_floor(&modulus);
        uy = (ny / &ps).mod_floor(&modulus);
        strips.push(s);
    }
    Ok(PadicRun { v0, strips, degrees })
}

fn green_padic(source: &mut dyn MapSource, p: &BigUint, x: &BigInt, y: &BigInt, eps: f64) -> Result<GreenValue> {
    let consts = source.constants();
    let logp = log_biguint(p).expect("prime");
    let c = source.resultant_valuation_bound(p) as f64 * logp;
    let alpha = consts.alpha as f64;
    let needed = if c == 0.0 { 0.0 } else { ((c / (eps * (alpha - 1.0))).ln() / alpha.ln()).ceil().max(0.0) };
    let run = padic_run(source, p, x, y, needed as usize, |degree| tail(c, consts.alpha, degree) > eps)?;
    let mut digits = run.v0 as f64;
    for (s, d) in run.strips.iter().zip(&run.degrees) {
        digits += *s as f64 / d;
    }
    let degree = run.degrees.last().copied().unwrap_or(1.0);
    let value = -digits * logp;
    let rounding = 4.0 * f64::EPSILON * (run.strips.len() as f64 + 1.0) * value.abs();
    Ok(GreenValue::certified(value, tail(c, consts.alpha, degree) + rounding + LOG_FLOOR * value.abs()))
}

/// `G_{v, gamma}(x, y)` to within `eps` (or to the tail at the end of a
/// finite word).
pub fn green(place: &Place, source: &mut dyn MapSource, x: &BigInt, y: &BigInt, eps: f64) -> Result<GreenValue> {
    check_eps(eps)?;
    if x.is_zero() && y.is_zero() {
        return Err(Error::ZeroPoint);
    }
    match place {
        Place::Archimedean => Ok(green_archimedean(source, x, y, eps)),
        Place::Prime(p) => green_padic(source, p, x, y, eps),
    }
}

/// `lambda_hat_v = e G_v(x, y) - log|E(x, y)|_v` on the representative
/// `(x, y)`.
pub fn local_height_at(
    place: &Place,
    source: &mut dyn MapSource,
    divisor: &DivisorForm,
    x: &BigInt,
    y: &BigInt,
    eps: f64,
) -> Result<GreenValue> {
    check_eps(eps)?;
    let e = divisor.degree() as f64;
    let log_e = place.log_abs(&divisor.eval(x, y)).ok_or(Error::OnDivisor)?;
    let g = green(place, source, x, y, eps / e)?;
    Ok(GreenValue::certified(e * g.value - log_e, e * g.error + LOG_FLOOR * log_e.abs()))
}

/// `lambda_hat_{v, E}(P)` on the canonical representative of `P`.
pub fn local_canonical_height(
    place: &Place,
    source: &mut dyn MapSource,
    divisor: &DivisorForm,
    p: &ProjectivePoint,
    eps: f64,
) -> Result<GreenValue> {
    local_height_at(place, source, divisor, p.x(), p.y(), eps)
}

/// One place's share of a decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaceContribution {
    pub place: Place,
    pub green: GreenValue,
    pub local: GreenValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub contributions: Vec<PlaceContribution>,
    /// `sum_v G_v(x, y)`, which is `h_hat_P(gamma)`.
    pub green_sum: Estimate,
    /// `(1/e) sum_v lambda_hat_v`, which is also `h_hat_P(gamma)`.
    pub local_sum: Estimate,
}

/// Places where `G_v` or `log|E|_v` can be nonzero at `(x, y)`.
pub fn support_places(source: &dyn MapSource, divisor: &DivisorForm, x: &BigInt, y: &BigInt) -> BTreeSet<Place> {
    let mut primes: BTreeSet<BigUint> = source.bad_primes();
    primes.extend(prime_divisors(&divisor.eval(x, y)));
    primes.extend(prime_divisors(&x.gcd(y)));
    std::iter::once(Place::Archimedean).chain(primes.into_iter().map(Place::Prime)).collect()
}

/// Local decomposition of the canonical height along a word, on the
/// (arbitrary, integral, nonzero) representative `(x, y)`.
pub fn decompose(
    source: &mut dyn MapSource,
    divisor: &DivisorForm,
    x: &BigInt,
    y: &BigInt,
    eps: f64,
) -> Result<Decomposition> {
    check_eps(eps)?;
    if x.is_zero() && y.is_zero() {
        return Err(Error::ZeroPoint);
    }
    if divisor.eval(x, y).is_zero() {
        return Err(Error::OnDivisor);
    }
    let places = support_places(source, divisor, x, y);
    let e = divisor.degree() as f64;
    let per_place = eps / places.len() as f64;
    let mut contributions = Vec::new();
    let (mut gv, mut ge, mut lv, mut le) = (0.0, 0.0, 0.0, 0.0);
    for place in places {
        let g = green(&place, source, x, y, per_place)?;
        let l = local_height_at(&place, source, divisor, x, y, per_place)?;
        gv += g.value;
        ge += g.error;
        lv += l.value;
        le += l.error;
        contributions.push(PlaceContribution { place, green: g, local: l });
    }
    let n = contributions.len() as f64;
    let rounding = |v: f64| 2.0 * n * f64::EPSILON * v.abs();
    Ok(Decomposition {
        contributions,
        green_sum: Estimate::certified(gv, ge + rounding(gv)),
        local_sum: Estimate::certified(lv / e, le / e + rounding(lv / e)),
    })
}

/// How an expected local height is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectationMode {
    /// Exact enumeration of all words of length `depth`.
    Exact { depth: usize, enum_budget: u64 },
    /// Monte Carlo over sampled words.
    MonteCarlo { samples: usize, seed: u64, eps_inner: f64, delta: f64 },
}

/// `E_nu[lambda_hat_{v, E}](P)` on a finite system.
pub fn expected_local_height(
    system: &GeneratingSystem,
    place: &Place,
    divisor: &DivisorForm,
    p: &ProjectivePoint,
    mode: ExpectationMode,
) -> Result<GreenValue> {
    match mode {
        ExpectationMode::Exact { depth, enum_budget } => {
            if divisor.eval(p.x(), p.y()).is_zero() {
                return Err(Error::OnDivisor);
            }
            let words = system.enumerate_prefixes(depth, enum_budget)?;
            let (mut value, mut error) = (0.0, 0.0);
            for (word, weight) in &words {
                let w = weight.to_f64().unwrap_or(0.0);
                if w == 0.0 {
                    continue;
                }
                let mut source = SystemWord::new(system, Word::finite(word.clone()))?;
                // the tolerance is never reached before the word ends
                let l = local_canonical_height(place, &mut source, divisor, p, f64::MIN_POSITIVE)?;
                value += w * l.value;
                error += w * l.error;
            }
            let rounding = 2.0 * words.len() as f64 * f64::EPSILON * value.abs();
            Ok(GreenValue::certified(value, error + rounding))
        }
        ExpectationMode::MonteCarlo { samples, seed, eps_inner, delta } => {
            expected_local_height_mc(Sampler::System(system), place, divisor, p, samples, seed, eps_inner, delta)
        }
    }
}

fn sample_local_heights(
    sampler: Sampler<'_>,
    place: &Place,
    divisor: &DivisorForm,
    p: &ProjectivePoint,
    samples: usize,
    seed: u64,
    eps_inner: f64,
) -> Result<Vec<f64>> {
    check_eps(eps_inner)?;
    if divisor.eval(p.x(), p.y()).is_zero() {
        return Err(Error::OnDivisor);
    }
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut source = sampler.source(seed, i as u64);
            local_canonical_height(place, source.as_mut(), divisor, p, eps_inner).map(|l| l.value)
        })
        .collect()
}

/// Monte Carlo `E_nu[lambda_hat_{v, E}](P)`; the radius is the Hoeffding
/// half-width for the range `2 e c_v / (alpha - 1)` plus `eps_inner`.
#[allow(clippy::too_many_arguments)]
pub fn expected_local_height_mc(
    sampler: Sampler<'_>,
    place: &Place,
    divisor: &DivisorForm,
    p: &ProjectivePoint,
    samples: usize,
    seed: u64,
    eps_inner: f64,
    delta: f64,
) -> Result<GreenValue> {
    if samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!("confidence parameter delta = {delta} outside (0, 1)")));
    }
    let values = sample_local_heights(sampler, place, divisor, p, samples, seed, eps_inner)?;
    let mean = values.iter().sum::<f64>() / samples as f64;
    let probe = sampler.source(seed, 0);
    let alpha = probe.constants().alpha as f64;
    let range = 2.0 * divisor.degree() as f64 * place.constant(probe.as_ref()) / (alpha - 1.0);
    let half = hoeffding_half_width(range, samples, delta);
    Ok(GreenValue::statistical(mean, half + eps_inner + LOG_FLOOR * mean.abs()))
}

/// Result of [`dependence_probe`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dependence {
    Correlation(f64),
    /// One of the two local heights is (numerically) constant.
    Degenerate,
}

/// Sample Pearson correlation between `lambda_hat_{v1}` and
/// `lambda_hat_{v2}` over sampled words.
#[allow(clippy::too_many_arguments)]
pub fn dependence_probe(
    sampler: Sampler<'_>,
    v1: &Place,
    v2: &Place,
    divisor: &DivisorForm,
    p: &ProjectivePoint,
    samples: usize,
    seed: u64,
    eps_inner: f64,
) -> Result<Dependence> {
    if v1 == v2 {
        return Err(Error::Invalid("the two places must differ".into()));
    }
    if samples < 2 {
        return Err(Error::Invalid("correlation needs at least two samples".into()));
    }
    let a = sample_local_heights(sampler, v1, divisor, p, samples, seed, eps_inner)?;
    let b = sample_local_heights(sampler, v2, divisor, p, samples, seed, eps_inner)?;
    let n = samples as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    let (va, vb) = (saa / (n - 1.0), sbb / (n - 1.0));
    if va < 10.0 * eps_inner || vb < 10.0 * eps_inner {
        return Ok(Dependence::Degenerate);
    }
    Ok(Dependence::Correlation((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)))
}
