//! Canonical heights along words and expected canonical heights.
//!
//! Along a word `gamma = (theta_1, theta_2, ...)` the quotients
//! `h(gamma_n P) / deg(gamma_n)` form a Cauchy sequence: the distance from
//! step `n` to the limit is at most `C / (deg(gamma_n) (alpha - 1))`, where
//! `C` bounds `|h(phi Q) - deg(phi) h(Q)|` over the family and `alpha` is the
//! minimum degree. Every estimate below carries that tail bound plus a
//! relative `2^-40` allowance for rounding logs of exact integers.

use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::arith::{weil_height, ProjectivePoint};
use crate::error::{Error, Result};
use crate::estimate::{HeightEstimate, LOG_FLOOR};
use crate::measure::{GeneratingSystem, MapSource, Sampler, SystemConstants, Word, DEFAULT_ENUM_BUDGET};

/// Default cap on the bit size of an orbit point.
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 26;

/// Resource limits shared by the height computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum total bits of an orbit point's coordinates.
    pub bit_budget: u64,
    /// Maximum number of words enumerated at one depth.
    pub enum_budget: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { bit_budget: DEFAULT_BIT_BUDGET, enum_budget: DEFAULT_ENUM_BUDGET }
    }
}

impl Limits {
    pub(crate) fn check_bits(&self, p: &ProjectivePoint) -> Result<()> {
        let bits = p.bits();
        if bits > self.bit_budget {
            Err(Error::IterationCap { bits, budget: self.bit_budget })
        } else {
            Ok(())
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("tolerance must be positive, got {eps}")))
    }
}

/// State of a canonical-height run after the last applied step.
#[derive(Clone, Debug)]
pub struct HeightRun {
    pub estimate: HeightEstimate,
    pub steps: usize,
    pub degree: f64,
    pub endpoint: ProjectivePoint,
}

/// Iterates until the tail bound drops to `eps` or the word ends.
pub fn canonical_height_run(
    source: &mut dyn MapSource,
    p: &ProjectivePoint,
    eps: f64,
    limits: &Limits,
) -> Result<HeightRun> {
    check_eps(eps)?;
    let consts = source.constants();
    let mut point = p.clone();
    let mut degree = 1.0f64;
    let mut steps = 0;
    while consts.tail(degree) > eps {
        let Some(map) = source.map_at(steps) else { break };
        point = map.evaluate(&point);
        limits.check_bits(&point)?;
        degree *= map.degree() as f64;
        steps += 1;
    }
    let value = weil_height(&point) / degree;
    let error = consts.tail(degree) + LOG_FLOOR * value.abs();
    Ok(HeightRun { estimate: HeightEstimate::certified(value, error), steps, degree, endpoint: point })
}

/// `h_hat_P(gamma)` to within `eps` (or to the tail bound at the end of a
/// finite word).
pub fn canonical_height(
    source: &mut dyn MapSource,
    p: &ProjectivePoint,
    eps: f64,
    limits: &Limits,
) -> Result<HeightEstimate> {
    canonical_height_run(source, p, eps, limits).map(|r| r.estimate)
}

/// `gamma \ gamma_m`.
pub fn shift(word: &Word, m: usize) -> Word {
    word.shift(m)
}

struct Accum {
    value: f64,
    error: f64,
}

#[allow(clippy::too_many_arguments)]
fn expected_dfs(
    system: &GeneratingSystem,
    weights: &[f64],
    consts: &SystemConstants,
    point: &ProjectivePoint,
    depth_left: usize,
    weight: f64,
    degree: f64,
    limits: &Limits,
    acc: &mut Accum,
) -> Result<()> {
    if depth_left == 0 {
        let v = weil_height(point) / degree;
        acc.value += weight * v;
        acc.error += weight * (consts.tail(degree) + LOG_FLOOR * v);
        return Ok(());
    }
    for (i, map) in system.maps().enumerate() {
        if weights[i] == 0.0 {
            continue;
        }
        let next = map.evaluate(point);
        limits.check_bits(&next)?;
        expected_dfs(
            system,
            weights,
            consts,
            &next,
            depth_left - 1,
            weight * weights[i],
            degree * map.degree() as f64,
            limits,
            acc,
        )?;
    }
    Ok(())
}

/// `E_nu[h_hat](P)` by exact enumeration of all words of length `n`:
/// value `sum nu_n(gamma) h(gamma P) / deg(gamma)`, certified radius
/// `sum nu_n(gamma) C / (deg(gamma) (alpha - 1))` plus the rounding floor.
pub fn expected_height_exact(
    system: &GeneratingSystem,
    p: &ProjectivePoint,
    n: usize,
    limits: &Limits,
) -> Result<HeightEstimate> {
    system.check_budget(n, limits.enum_budget)?;
    let weights: Vec<f64> = system.weights().iter().map(|w| w.to_f64().unwrap_or(0.0)).collect();
    let consts = system.constants();
    let mut acc = Accum { value: 0.0, error: 0.0 };
    expected_dfs(system, &weights, &consts, p, n, 1.0, 1.0, limits, &mut acc)?;
    // f64 accumulation of up to |S|^n terms
    let rounding = acc.value.abs() * f64::EPSILON * (n as f64 + 2.0);
    Ok(HeightEstimate::certified(acc.value, acc.error + rounding))
}

/// Per-path canonical heights of `samples` i.i.d. words, each certified to
/// `eps_inner`. Sample `i` uses RNG substream `i`, so the result does not
/// depend on the number of worker threads.
pub fn sample_heights(
    sampler: Sampler<'_>,
    p: &ProjectivePoint,
    samples: usize,
    seed: u64,
    eps_inner: f64,
    limits: &Limits,
) -> Result<Vec<f64>> {
    check_eps(eps_inner)?;
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut source = sampler.source(seed, i as u64);
            canonical_height(source.as_mut(), p, eps_inner, limits).map(|e| e.value)
        })
        .collect()
}

/// Hoeffding half-width for the mean of `n` variables with range `range`.
pub fn hoeffding_half_width(range: f64, n: usize, delta: f64) -> f64 {
    range * ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Monte Carlo estimate of `E_nu[h_hat](P)`. The radius is the Hoeffding
/// half-width at confidence `1 - delta` for the a-priori range
/// `2C / (alpha - 1)`, plus `eps_inner`.
pub fn expected_height_mc(
    sampler: Sampler<'_>,
    p: &ProjectivePoint,
    samples: usize,
    seed: u64,
    eps_inner: f64,
    delta: f64,
    limits: &Limits,
) -> Result<HeightEstimate> {
    if samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!("confidence parameter delta = {delta} outside (0, 1)")));
    }
    let values = sample_heights(sampler, p, samples, seed, eps_inner, limits)?;
    let mean = values.iter().sum::<f64>() / samples as f64;
    let range = 2.0 * sampler.constants().escape_bound();
    let half = hoeffding_half_width(range, samples, delta);
    Ok(HeightEstimate::statistical(mean, half + eps_inner + LOG_FLOOR * mean.abs()))
}

/// Unbiased sample variance of `values` (needs at least two).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Unbiased sample variance of the per-path canonical heights.
pub fn variance_estimate(
    sampler: Sampler<'_>,
    p: &ProjectivePoint,
    samples: usize,
    seed: u64,
    eps_inner: f64,
    limits: &Limits,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Invalid("variance needs at least two samples".into()));
    }
    Ok(sample_variance(&sample_heights(sampler, p, samples, seed, eps_inner, limits)?))
}

/// Both sides of `E_{nu_k*}[E(gamma_k P)] = d_nu^k E(P)` evaluated with
/// depth-`n` truncations.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Sum of the certified radii of both sides.
    pub bound: f64,
}

impl TransformationCheck {
    pub fn holds(&self) -> bool {
        self.residual <= self.bound
    }
}

pub fn transformation_check(
    system: &GeneratingSystem,
    p: &ProjectivePoint,
    k: usize,
    n: usize,
    limits: &Limits,
) -> Result<TransformationCheck> {
    let prefixes = system.enumerate_prefixes(k, limits.enum_budget)?;
    system.check_budget(n, limits.enum_budget)?;
    let (mut lhs, mut lhs_err) = (0.0, 0.0);
    for (word, _) in &prefixes {
        let star = system.nu_star_weight(word)?.to_f64().unwrap_or(0.0);
        if star == 0.0 {
            continue;
        }
        let mut q = p.clone();
        for &i in word {
            q = system.map(i).evaluate(&q);
        }
        let e = expected_height_exact(system, &q, n, limits)?;
        lhs += star * e.value;
        lhs_err += star * e.error;
    }
    let dk = num_traits::pow(system.d_nu(), k).to_f64().unwrap_or(f64::INFINITY);
    let e = expected_height_exact(system, p, n, limits)?;
    let rhs = dk * e.value;
    let rounding = (lhs.abs() + rhs.abs()) * f64::EPSILON * (prefixes.len() as f64 + 4.0);
    Ok(TransformationCheck { lhs, rhs, residual: (lhs - rhs).abs(), bound: lhs_err + dk * e.error + rounding })
}
