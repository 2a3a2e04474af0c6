//! JSON system descriptions.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use stoch_heights::riccati::{FpPoly, FpRatFunc};
use stoch_heights::{DegreeLaw, Error, FpPolySelfMap, GeneratingSystem, RationalMapLift, Result, UnicriticalFamily};

/// An integer written either as a JSON number or as a decimal string (for
/// values outside `i64`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Int {
    Small(i64),
    Big(String),
}

impl Int {
    pub fn to_bigint(&self) -> Result<BigInt> {
        match self {
            Int::Small(v) => Ok(BigInt::from(*v)),
            Int::Big(s) => BigInt::from_str(s.trim()).map_err(|_| Error::Invalid(format!("bad integer {s:?}"))),
        }
    }
}

/// `num(z) / den(z)`, ascending coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub num: Vec<Int>,
    #[serde(default = "one")]
    pub den: Vec<Int>,
}

fn one() -> Vec<Int> {
    vec![Int::Small(1)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawName {
    Geometric,
    Poisson,
}

/// `{ z^d + c : |c| <= B }` with degree law `law(parameter)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    #[serde(rename = "B")]
    pub bound: u64,
    pub law: LawName,
    pub parameter: f64,
}

/// A coefficient in `F_p(t)`: a polynomial in `t` or a quotient of two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FpCoeff {
    Poly(Vec<i64>),
    Ratio { num: Vec<i64>, den: Vec<i64> },
}

/// Polynomials `A_0 x^d + A_1 x^(d-1) + ... + A_d` over `F_p(t)`; `maps[j][i]`
/// is `A_i` (descending powers of `x`), each as ascending coefficients in `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpConfig {
    pub p: u64,
    pub maps: Vec<Vec<FpCoeff>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<MapConfig>,
    /// Exact weights `"p/q"`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp: Option<FpConfig>,
}

fn parse_weight(s: &str) -> Result<BigRational> {
    let bad = || Error::Invalid(format!("bad weight {s:?}, expected \"p/q\""));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s.trim(), "1"),
    };
    let p = BigInt::from_str(p).map_err(|_| bad())?;
    let q = BigInt::from_str(q).map_err(|_| bad())?;
    if q == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(p, q))
}

fn ints(v: &[Int]) -> Result<Vec<BigInt>> {
    v.iter().map(Int::to_bigint).collect()
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn system(&self) -> Result<GeneratingSystem> {
        if self.maps.is_empty() {
            return Err(Error::Invalid("config has no maps".into()));
        }
        let maps = self
            .maps
            .iter()
            .enumerate()
            .map(|(i, m)| {
                RationalMapLift::from_affine(&ints(&m.num)?, &ints(&m.den)?)
                    .map_err(|e| Error::Invalid(format!("map {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match &self.weights {
            None => GeneratingSystem::uniform(maps),
            Some(w) => GeneratingSystem::new(maps, w.iter().map(|s| parse_weight(s)).collect::<Result<_>>()?),
        }
    }

    pub fn family(&self) -> Result<Option<UnicriticalFamily>> {
        let Some(f) = &self.family else { return Ok(None) };
        let law = match f.law {
            LawName::Geometric => DegreeLaw::Geometric { r: f.parameter },
            LawName::Poisson => DegreeLaw::Poisson { lambda: f.parameter },
        };
        UnicriticalFamily::new(f.bound, law).map(Some)
    }

    pub fn fp_maps(&self) -> Result<Vec<FpPolySelfMap>> {
        let fp = self.fp.as_ref().ok_or_else(|| Error::Invalid("config has no fp block".into()))?;
        stoch_heights::riccati::check_characteristic(fp.p)?;
        fp.maps
            .iter()
            .enumerate()
            .map(|(j, coeffs)| {
                let coeffs = coeffs
                    .iter()
                    .map(|c| match c {
                        FpCoeff::Poly(a) => Ok(FpRatFunc::from_poly(FpPoly::new(fp.p, a))),
                        FpCoeff::Ratio { num, den } => FpRatFunc::new(FpPoly::new(fp.p, num), FpPoly::new(fp.p, den)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                FpPolySelfMap::new(coeffs).map_err(|e| Error::Invalid(format!("fp map {j}: {e}")))
            })
            .collect()
    }
}
