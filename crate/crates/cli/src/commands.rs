use std::collections::BTreeSet;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::{json, Value};

use stoch_heights::heights::{self, Limits};
use stoch_heights::local::{self, Dependence, ExpectationMode};
use stoch_heights::measure::{substream, FamilyWord, SampledWord, SystemWord};
use stoch_heights::riccati::{check_theorem_condition, delta, riccati_coeffs, PairFailure};
use stoch_heights::stability::{kernel_probe, stable_closure, StabilityVerdict};
use stoch_heights::zsigmondy::{self, GoodPair, OrbitMode};
use stoch_heights::{
    DivisorForm, Error, Estimate, GeneratingSystem, MapSource, ProjectivePoint, Result, Sampler, UnicriticalFamily,
    Word,
};

use crate::config::SystemConfig;
use crate::{Cli, Command, Common, Mode, RiccatiCommand};

/// A word as given on the command line.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum WordSpec {
    Finite(Vec<usize>),
    Tagged(TaggedWord),
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TaggedWord {
    Finite(Vec<usize>),
    Periodic(Vec<usize>),
    Seed(u64),
}

fn letters(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Invalid(format!("bad map index {t:?} in word"))))
        .collect()
}

impl FromStr for WordSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') || s.starts_with('[') {
            return serde_json::from_str(s).map_err(|e| Error::Invalid(format!("word {s:?}: {e}")));
        }
        if let Some(rest) = s.strip_prefix("periodic:") {
            return Ok(WordSpec::Tagged(TaggedWord::Periodic(letters(rest)?)));
        }
        if let Some(rest) = s.strip_prefix("seed:") {
            let n = rest.trim().parse().map_err(|_| Error::Invalid(format!("bad word seed {rest:?}")))?;
            return Ok(WordSpec::Tagged(TaggedWord::Seed(n)));
        }
        Ok(WordSpec::Finite(letters(s)?))
    }
}

impl WordSpec {
    fn tagged(self) -> TaggedWord {
        match self {
            WordSpec::Finite(w) => TaggedWord::Finite(w),
            WordSpec::Tagged(t) => t,
        }
    }
}

/// Everything a command needs besides the point.
struct Context {
    common: Common,
    config: SystemConfig,
    limits: Limits,
}

enum Maps {
    System(GeneratingSystem),
    Family(UnicriticalFamily),
}

impl Context {
    fn word(&self) -> Result<TaggedWord> {
        if let Some(n) = self.common.word_seed {
            return Ok(TaggedWord::Seed(n));
        }
        match &self.common.word {
            Some(w) => Ok(w.parse::<WordSpec>()?.tagged()),
            None => Ok(TaggedWord::Seed(self.common.seed)),
        }
    }

    /// The finite system when the config lists maps, else the family.
    fn maps(&self) -> Result<Maps> {
        if !self.config.maps.is_empty() {
            return self.config.system().map(Maps::System);
        }
        match self.config.family()? {
            Some(f) => Ok(Maps::Family(f)),
            None => Err(Error::Invalid("config has neither maps nor a family".into())),
        }
    }

    fn system(&self) -> Result<GeneratingSystem> {
        match self.maps()? {
            Maps::System(s) => Ok(s),
            Maps::Family(_) => Err(Error::Invalid("this command needs a finite list of maps".into())),
        }
    }

    fn delta(&self) -> Result<f64> {
        let c = self.common.confidence;
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Invalid(format!("confidence {c} outside (0, 1)")));
        }
        Ok(1.0 - c)
    }

    fn divisor(&self, s: &str) -> Result<DivisorForm> {
        match s.trim() {
            "x" => Ok(DivisorForm::x()),
            "y" => Ok(DivisorForm::y()),
            t => {
                let t = t.trim_start_matches('[').trim_end_matches(']');
                let coeffs = t
                    .split(',')
                    .map(|c| c.trim().parse().map_err(|_| Error::Invalid(format!("bad divisor coefficient {c:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                DivisorForm::new(coeffs)
            }
        }
    }
}

/// The word named by `spec` as a map source over `maps`.
fn source<'a>(maps: &'a Maps, spec: &TaggedWord) -> Result<Box<dyn MapSource + 'a>> {
    match (maps, spec) {
        (Maps::System(s), TaggedWord::Finite(w)) => Ok(Box::new(SystemWord::new(s, Word::finite(w.clone()))?)),
        (Maps::System(s), TaggedWord::Periodic(w)) => Ok(Box::new(SystemWord::new(s, Word::periodic(w.clone()))?)),
        (Maps::System(s), TaggedWord::Seed(n)) => Ok(Box::new(SampledWord::new(s, substream(*n, 0)))),
        (Maps::Family(f), TaggedWord::Seed(n)) => Ok(Box::new(FamilyWord::new(*f, substream(*n, 0)))),
        (Maps::Family(_), _) => Err(Error::Invalid("family words can only be sampled (use a seed)".into())),
    }
}

/// A word over `system` with at least `horizon` letters.
fn system_word(system: &GeneratingSystem, spec: &TaggedWord, horizon: usize) -> Result<Word> {
    Ok(match spec {
        TaggedWord::Finite(w) => Word::finite(w.clone()),
        TaggedWord::Periodic(w) => Word::periodic(w.clone()),
        TaggedWord::Seed(n) => {
            let mut sampled = SampledWord::new(system, substream(*n, 0));
            Word::finite((0..horizon).map(|k| sampled.letter(k)).collect())
        }
    })
}

fn word_json(spec: &TaggedWord) -> Value {
    match spec {
        TaggedWord::Finite(w) => json!(w),
        TaggedWord::Periodic(w) => json!({"periodic": w}),
        TaggedWord::Seed(n) => json!({"seed": n}),
    }
}

fn estimate(e: &Estimate) -> Value {
    json!({"value": e.value, "error": e.error, "kind": e.kind.as_str()})
}

fn points(common: &Common) -> Result<Vec<ProjectivePoint>> {
    if let Some(path) = &common.batch {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        return text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(ProjectivePoint::from_str)
            .collect();
    }
    match &common.point {
        Some(p) => Ok(vec![p.parse()?]),
        None => Err(Error::Invalid("--point or --batch is required".into())),
    }
}

fn load_config(common: &Common) -> Result<SystemConfig> {
    let path = common.config.as_ref().ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    SystemConfig::from_json(&text)
}

/// Runs the command; one report per point (or a single report for
/// commands without a point).
pub fn run(cli: &Cli) -> Result<Vec<Value>> {
    let common = cli.common.clone();
    if !(common.eps > 0.0 && common.eps.is_finite()) {
        return Err(Error::Invalid(format!("eps {} must be positive", common.eps)));
    }
    let limits = Limits { bit_budget: common.bit_budget, enum_budget: common.enum_budget };
    let ctx = Context { config: load_config(&common)?, common, limits };
    match &cli.command {
        Command::KernelProbe { height_bound, denominator_bound } => {
            let s = ctx.system()?;
            let found = kernel_probe(&s, *height_bound, *denominator_bound, ctx.limits.enum_budget)?;
            let found: Vec<String> = found.iter().map(ToString::to_string).collect();
            Ok(vec![json!({"height_bound": height_bound, "denominator_bound": denominator_bound, "points": found})])
        }
        Command::PrimdivHypotheses => {
            let s = ctx.system()?;
            let checks = zsigmondy::check_primdiv_hypotheses(&s);
            let maps: Vec<Value> = s
                .maps()
                .zip(&checks)
                .map(|(m, c)| {
                    json!({
                        "map": m.affine_string(),
                        "numerator_degree": c.numerator_degree,
                        "discriminant": c.discriminant.to_string(),
                        "degree_ok": c.degree_ok,
                        "squarefree": c.squarefree,
                        "passes": c.passes(),
                    })
                })
                .collect();
            Ok(vec![json!({"maps": maps, "passes": checks.iter().all(|c| c.passes())})])
        }
        Command::Riccati { what } => riccati(&ctx, *what).map(|r| vec![r]),
        command => points(&ctx.common)?.iter().map(|p| per_point(&ctx, command, p)).collect(),
    }
}

fn riccati(ctx: &Context, what: RiccatiCommand) -> Result<Value> {
    let maps = ctx.config.fp_maps()?;
    let p = maps.first().map(|m| m.characteristic());
    match what {
        RiccatiCommand::Delta => {
            let deltas: Vec<String> = maps.iter().map(|m| delta(m).to_string()).collect();
            Ok(json!({"p": p, "delta": deltas}))
        }
        RiccatiCommand::Coeffs => {
            let rows = maps
                .iter()
                .map(|m| match riccati_coeffs(m) {
                    Ok(r) => json!({
                        "b": r.b.to_string(), "f": r.f.to_string(),
                        "c": r.c.to_string(), "g": r.g.to_string(),
                    }),
                    Err(e) => json!({"error": e.to_string()}),
                })
                .collect::<Vec<_>>();
            Ok(json!({"p": p, "coeffs": rows}))
        }
        RiccatiCommand::Check => {
            let report = check_theorem_condition(&maps);
            let failures: Vec<Value> = report
                .failures
                .iter()
                .map(|(i, j, why)| {
                    let reason = match why {
                        PairFailure::DegreeDivisible => "degree divisible by p",
                        PairFailure::SingularDelta { first: true } => "delta of first map vanishes",
                        PairFailure::SingularDelta { first: false } => "delta of second map vanishes",
                        PairFailure::BEqualsF => "b of first map equals f of second",
                    };
                    json!({"pair": [i, j], "reason": reason})
                })
                .collect();
            Ok(json!({"p": p, "passes": report.passes(), "failures": failures}))
        }
    }
}

fn per_point(ctx: &Context, command: &Command, p: &ProjectivePoint) -> Result<Value> {
    let c = &ctx.common;
    let point = p.to_string();
    match command {
        Command::Height => {
            let maps = ctx.maps()?;
            let word = ctx.word()?;
            let mut src = source(&maps, &word)?;
            let run = heights::canonical_height_run(src.as_mut(), p, c.eps, &ctx.limits)?;
            let mut r = estimate(&run.estimate);
            r["point"] = json!(point);
            r["word"] = word_json(&word);
            r["steps"] = json!(run.steps);
            Ok(r)
        }
        Command::ExpectedHeight { mode } => {
            let (e, mut r) = match (mode, ctx.maps()?) {
                (Mode::Exact, Maps::System(s)) => {
                    (heights::expected_height_exact(&s, p, c.depth, &ctx.limits)?, json!({"mode": "exact", "depth": c.depth}))
                }
                (Mode::Exact, Maps::Family(_)) => {
                    return Err(Error::Invalid("exact expectation needs a finite list of maps".into()))
                }
                (Mode::Mc, maps) => {
                    let sampler = match &maps {
                        Maps::System(s) => Sampler::System(s),
                        Maps::Family(f) => Sampler::Family(f),
                    };
                    let e = heights::expected_height_mc(sampler, p, c.samples, c.seed, c.eps, ctx.delta()?, &ctx.limits)?;
                    (e, json!({"mode": "mc", "samples": c.samples, "seed": c.seed, "confidence": c.confidence}))
                }
            };
            merge(&mut r, estimate(&e));
            r["point"] = json!(point);
            Ok(r)
        }
        Command::StableSet => {
            let s = ctx.system()?;
            Ok(match stable_closure(&s, p) {
                StabilityVerdict::FiniteStableSet(set) => {
                    let set: Vec<String> = set.iter().map(ToString::to_string).collect();
                    json!({"point": point, "verdict": "finite", "set": set})
                }
                StabilityVerdict::PositiveHeight { witness, witness_height, word } => json!({
                    "point": point,
                    "verdict": "positive-height",
                    "witness": witness.to_string(),
                    "witness_height": witness_height,
                    "word": word,
                }),
            })
        }
        Command::Green { place } => {
            let maps = ctx.maps()?;
            let word = ctx.word()?;
            let g = local::green(place, source(&maps, &word)?.as_mut(), p.x(), p.y(), c.eps)?;
            let mut r = estimate(&g);
            r["point"] = json!(point);
            r["place"] = json!(place.to_string());
            r["word"] = word_json(&word);
            Ok(r)
        }
        Command::LocalHeight { place, divisor } => {
            let maps = ctx.maps()?;
            let word = ctx.word()?;
            let e = ctx.divisor(divisor)?;
            let l = local::local_canonical_height(place, source(&maps, &word)?.as_mut(), &e, p, c.eps)?;
            let mut r = estimate(&l);
            r["point"] = json!(point);
            r["place"] = json!(place.to_string());
            r["word"] = word_json(&word);
            Ok(r)
        }
        Command::Decompose { divisor } => {
            let maps = ctx.maps()?;
            let word = ctx.word()?;
            let e = ctx.divisor(divisor)?;
            let d = local::decompose(source(&maps, &word)?.as_mut(), &e, p.x(), p.y(), c.eps)?;
            let places: Vec<Value> = d
                .contributions
                .iter()
                .map(|pc| json!({"place": pc.place.to_string(), "green": estimate(&pc.green), "local": estimate(&pc.local)}))
                .collect();
            Ok(json!({
                "point": point,
                "word": word_json(&word),
                "places": places,
                "green_sum": estimate(&d.green_sum),
                "local_sum": estimate(&d.local_sum),
            }))
        }
        Command::ExpectedLocal { place, divisor, mode } => {
            let e = ctx.divisor(divisor)?;
            let (l, mut r) = match (mode, ctx.maps()?) {
                (Mode::Exact, Maps::System(s)) => {
                    let m = ExpectationMode::Exact { depth: c.depth, enum_budget: ctx.limits.enum_budget };
                    (local::expected_local_height(&s, place, &e, p, m)?, json!({"mode": "exact", "depth": c.depth}))
                }
                (Mode::Exact, Maps::Family(_)) => {
                    return Err(Error::Invalid("exact expectation needs a finite list of maps".into()))
                }
                (Mode::Mc, maps) => {
                    let sampler = match &maps {
                        Maps::System(s) => Sampler::System(s),
                        Maps::Family(f) => Sampler::Family(f),
                    };
                    let l = local::expected_local_height_mc(sampler, place, &e, p, c.samples, c.seed, c.eps, ctx.delta()?)?;
                    (l, json!({"mode": "mc", "samples": c.samples, "seed": c.seed, "confidence": c.confidence}))
                }
            };
            merge(&mut r, estimate(&l));
            r["point"] = json!(point);
            r["place"] = json!(place.to_string());
            Ok(r)
        }
        Command::DependenceProbe { place, other, divisor } => {
            let maps = ctx.maps()?;
            let sampler = match &maps {
                Maps::System(s) => Sampler::System(s),
                Maps::Family(f) => Sampler::Family(f),
            };
            let e = ctx.divisor(divisor)?;
            let d = local::dependence_probe(sampler, place, other, &e, p, c.samples, c.seed, c.eps)?;
            let mut r = json!({
                "point": point,
                "places": [place.to_string(), other.to_string()],
                "samples": c.samples,
                "seed": c.seed,
                "kind": "statistical",
            });
            match d {
                Dependence::Correlation(rho) => r["correlation"] = json!(rho),
                Dependence::Degenerate => r["degenerate"] = json!(true),
            }
            Ok(r)
        }
        Command::Zsigmondy { relaxed } => {
            let s = ctx.system()?;
            let spec = ctx.word()?;
            let word = system_word(&s, &spec, c.horizon)?;
            let mode = if *relaxed { OrbitMode::Relaxed } else { OrbitMode::Strict };
            let report = zsigmondy::zsigmondy_set(&s, &word, p, c.horizon, mode, &ctx.limits)?;
            let letters: Vec<usize> = (0..c.horizon).filter_map(|k| word.letter(k)).collect();
            let members: BTreeSet<usize> = report.members;
            Ok(json!({
                "point": point,
                "horizon": c.horizon,
                "word": letters,
                "members": members,
                "primitive_parts": report.primitive_parts.iter().map(ToString::to_string).collect::<Vec<_>>(),
            }))
        }
        Command::GoodPair => {
            let s = ctx.system()?;
            let spec = ctx.word()?;
            let word = system_word(&s, &spec, c.horizon)?;
            let (verdict, reason) = match zsigmondy::good_pair_check(&s, &word, p, c.horizon, c.eps, &ctx.limits)? {
                GoodPair::Good => ("good", None),
                GoodPair::Bad(why) => ("bad", Some(why)),
                GoodPair::Inconclusive(why) => ("inconclusive", Some(why)),
            };
            Ok(json!({"point": point, "horizon": c.horizon, "word": word_json(&spec), "verdict": verdict, "reason": reason}))
        }
        Command::KernelProbe { .. } | Command::PrimdivHypotheses | Command::Riccati { .. } => {
            unreachable!("handled without a point")
        }
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_forms() {
        assert_eq!("0,0,1".parse::<WordSpec>().unwrap().tagged(), TaggedWord::Finite(vec![0, 0, 1]));
        assert_eq!("[0, 1]".parse::<WordSpec>().unwrap().tagged(), TaggedWord::Finite(vec![0, 1]));
        assert_eq!("periodic:1,0".parse::<WordSpec>().unwrap().tagged(), TaggedWord::Periodic(vec![1, 0]));
        assert_eq!(r#"{"periodic": [1]}"#.parse::<WordSpec>().unwrap().tagged(), TaggedWord::Periodic(vec![1]));
        assert_eq!("seed:9".parse::<WordSpec>().unwrap().tagged(), TaggedWord::Seed(9));
        assert_eq!(r#"{"seed": 9}"#.parse::<WordSpec>().unwrap().tagged(), TaggedWord::Seed(9));
        assert!("0,x".parse::<WordSpec>().is_err());
        assert!(r#"{"cycle": [1]}"#.parse::<WordSpec>().is_err());
    }
}
