use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{generate, GeneratorSpec, HarnessError};
use crate::carleson::{
    almost_disjoint_decomposition, carleson_constant, chain_structure, choose_m,
    condensation_search, CarlesonError,
};
use crate::dyadic::{format_intervals, full_grid, DyadicRational, IntervalCollection};
use crate::gamlen_gaudet::GamlenGaudetError;
use crate::type_constant::{
    check_lemma1, check_transfer, estimate_best_constant, estimate_best_constant_seeded,
    l1_witness_family, l1_witness_ratio, rayleigh_ratio, EstimateConfig, Space, TypeConstantError,
};

/// What to run on each collection of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    /// Almost-disjoint decomposition with certificates, plus chain structure of every part.
    Decomposition,
    /// Estimated constant against the closed-form upper bound.
    Lemma1,
    /// Estimate and Carleson constant do not drop when passing to a superset.
    Monotonicity,
    /// Block-system transfer, on collections that condense at the configured depth.
    Transfer,
    /// `ℓ^1` witness ratios: closed form against grid evaluation, increasing in depth.
    /// Runs once per corpus, not per collection.
    Growth,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::Decomposition,
        Check::Lemma1,
        Check::Monotonicity,
        Check::Transfer,
        Check::Growth,
    ];
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Decomposition => "decomposition",
            Check::Lemma1 => "lemma1",
            Check::Monotonicity => "monotonicity",
            Check::Transfer => "transfer",
            Check::Growth => "growth",
        })
    }
}

impl FromStr for Check {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.to_string() == s.trim())
            .ok_or_else(|| HarnessError::InvalidSpec(format!("unknown check `{s}`")))
    }
}

impl Serialize for Check {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Check {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub checks: Vec<Check>,
    pub exponents: Vec<f64>,
    pub space: Space,
    pub estimate: EstimateConfig,
    pub transfer_depth: u32,
    pub transfer_delta: DyadicRational,
    pub growth_depth: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            checks: vec![Check::Decomposition, Check::Lemma1],
            exponents: vec![1.25, 1.5, 2.0],
            space: Space::Scalar,
            estimate: EstimateConfig::default(),
            transfer_depth: 3,
            transfer_delta: DyadicRational::new(1, 1),
            growth_depth: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub passed: bool,
    /// Preconditions not met (for example no condensed root); counts as a pass.
    pub skipped: bool,
    pub detail: Value,
}

impl CheckOutcome {
    fn pass(check: Check, p: Option<f64>, detail: Value) -> Self {
        CheckOutcome {
            check,
            p,
            passed: true,
            skipped: false,
            detail,
        }
    }

    fn fail(check: Check, p: Option<f64>, why: impl fmt::Display) -> Self {
        CheckOutcome {
            check,
            p,
            passed: false,
            skipped: false,
            detail: json!({ "error": why.to_string() }),
        }
    }

    fn skip(check: Check, p: Option<f64>, why: impl fmt::Display) -> Self {
        CheckOutcome {
            check,
            p,
            passed: true,
            skipped: true,
            detail: json!({ "reason": why.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReport {
    pub index: usize,
    pub spec: GeneratorSpec,
    pub size: usize,
    pub max_level: u32,
    pub carleson: DyadicRational,
    #[serde(rename = "M")]
    pub m: u64,
    pub outcomes: Vec<CheckOutcome>,
    pub passed: bool,
    /// The collection in interval text format, kept only for failures so the
    /// instance can be replayed from the report alone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub seed: u64,
    pub config: CorpusConfig,
    pub instances: Vec<InstanceReport>,
    pub global: Vec<CheckOutcome>,
    pub passed: bool,
    /// Wall-clock seconds; written to a separate file so reports stay byte-identical.
    #[serde(skip)]
    pub seconds: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn failures(&self) -> impl Iterator<Item = &InstanceReport> {
        self.instances.iter().filter(|i| !i.passed)
    }

    /// One row per check outcome, plot-ready.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "instance", "spec", "size", "carleson", "M", "check", "p", "passed", "skipped",
            "lower", "upper", "margin",
        ])?;
        let field = |d: &Value, k: &str| d.get(k).map(|v| v.to_string()).unwrap_or_default();
        for inst in &self.instances {
            for o in &inst.outcomes {
                w.write_record([
                    inst.index.to_string(),
                    inst.spec.to_string(),
                    inst.size.to_string(),
                    inst.carleson.to_string(),
                    inst.m.to_string(),
                    o.check.to_string(),
                    o.p.map(|p| p.to_string()).unwrap_or_default(),
                    o.passed.to_string(),
                    o.skipped.to_string(),
                    field(&o.detail, "lower"),
                    field(&o.detail, "upper"),
                    field(&o.detail, "margin"),
                ])?;
            }
        }
        for o in &self.global {
            w.write_record([
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                o.check.to_string(),
                o.p.map(|p| p.to_string()).unwrap_or_default(),
                o.passed.to_string(),
                o.skipped.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.json`, `report.csv`, `timing.json` and, for every failing
    /// instance, `failures/instance-<i>.txt` with its intervals.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&self.to_json())? + "\n",
        )?;
        self.write_csv(fs::File::create(dir.join("report.csv"))?)?;
        fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&json!({ "seconds": self.seconds }))? + "\n",
        )?;
        let failures: Vec<&InstanceReport> = self.failures().collect();
        if !failures.is_empty() {
            let fdir = dir.join("failures");
            fs::create_dir_all(&fdir)?;
            for f in failures {
                let header = format!("# {}\n", f.spec);
                fs::write(
                    fdir.join(format!("instance-{}.txt", f.index)),
                    header + f.intervals.as_deref().unwrap_or(""),
                )?;
            }
        }
        Ok(())
    }
}

/// The 200 random-budget collections used by the decomposition and bound
/// sweeps: depths 4 to 10, budgets `k/4` for `k = 4..=16`, seeds drawn from `seed`.
pub fn criterion_corpus(seed: u64) -> Vec<GeneratorSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200u32)
        .map(|i| GeneratorSpec::RandomBudget {
            max_depth: 4 + i % 7,
            budget: DyadicRational::new(4 + (i % 13) as i128, 2),
            seed: rng.gen(),
        })
        .collect()
}

/// Whether an error means a check failed rather than the run being misconfigured.
fn is_violation(e: &TypeConstantError) -> bool {
    match e {
        TypeConstantError::Lemma1Violated { .. } | TypeConstantError::TransferViolated(_) => true,
        TypeConstantError::Carleson(c) => is_carleson_violation(c),
        TypeConstantError::GamlenGaudet(g) => matches!(
            **g,
            GamlenGaudetError::PropertyViolated { .. }
                | GamlenGaudetError::JointDistribution { .. }
        ),
        _ => false,
    }
}

fn is_carleson_violation(e: &CarlesonError) -> bool {
    matches!(
        e,
        CarlesonError::CertificateViolation { .. } | CarlesonError::NotAlmostDisjoint(_)
    )
}

fn decomposition(collection: &IntervalCollection) -> Result<CheckOutcome, HarnessError> {
    let cover = match almost_disjoint_decomposition(collection) {
        Ok(c) => c,
        Err(e) if is_carleson_violation(&e) => {
            return Ok(CheckOutcome::fail(Check::Decomposition, None, e))
        }
        Err(e) => return Err(e.into()),
    };
    let mut decay = 0;
    let mut longest = 0;
    for part in cover.parts.iter().filter(|p| !p.is_empty()) {
        match chain_structure(part) {
            Ok(s) => {
                decay += s.decay.len();
                longest = longest.max(s.chains.values().map(|c| c.len()).max().unwrap_or(0));
            }
            Err(e) if is_carleson_violation(&e) => {
                return Ok(CheckOutcome::fail(Check::Decomposition, None, e))
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(CheckOutcome::pass(
        Check::Decomposition,
        None,
        json!({
            "M": cover.m,
            "part_sizes": cover.parts.iter().map(|p| p.len()).collect::<Vec<_>>(),
            "certificates": cover.certificates.iter().map(|c| c.len()).sum::<usize>(),
            "decay_entries": decay,
            "longest_chain": longest,
        }),
    ))
}

fn lemma1(
    collection: &IntervalCollection,
    p: f64,
    config: &CorpusConfig,
) -> Result<CheckOutcome, HarnessError> {
    match check_lemma1(collection, p, &config.space, &config.estimate) {
        Ok(r) => Ok(CheckOutcome::pass(
            Check::Lemma1,
            Some(p),
            json!({
                "lower": r.estimate.lower,
                "upper": r.estimate.upper,
                "margin": r.margin,
                "start": r.estimate.start,
                "iterations": r.estimate.iterations,
            }),
        )),
        Err(e) if is_violation(&e) => Ok(CheckOutcome::fail(Check::Lemma1, Some(p), e)),
        Err(e) => Err(e.into()),
    }
}

fn monotonicity(
    collection: &IntervalCollection,
    p: f64,
    config: &CorpusConfig,
) -> Result<CheckOutcome, HarnessError> {
    let sub: IntervalCollection = collection.iter().step_by(2).copied().collect();
    if sub.len() == collection.len() {
        return Ok(CheckOutcome::skip(
            Check::Monotonicity,
            Some(p),
            "collection has a single interval",
        ));
    }
    let small = estimate_best_constant(&sub, p, &config.space, &config.estimate)?;
    let large = estimate_best_constant_seeded(
        collection,
        p,
        &config.space,
        &config.estimate,
        std::slice::from_ref(&small.witness),
    )?;
    let slack = 2.0 * config.estimate.tol;
    let carleson_ok = small.carleson <= large.carleson;
    let estimate_ok = small.lower <= large.lower + slack;
    let detail = json!({
        "sub_size": sub.len(),
        "sub_lower": small.lower,
        "lower": large.lower,
        "sub_carleson": small.carleson,
        "carleson": large.carleson,
        "margin": large.lower + slack - small.lower,
    });
    Ok(CheckOutcome {
        check: Check::Monotonicity,
        p: Some(p),
        passed: carleson_ok && estimate_ok,
        skipped: false,
        detail,
    })
}

fn transfer(
    collection: &IntervalCollection,
    p: f64,
    config: &CorpusConfig,
) -> Result<CheckOutcome, HarnessError> {
    let depth = config.transfer_depth;
    let witness = condensation_search(collection, depth as usize)?;
    let required = DyadicRational::ONE - config.transfer_delta.scale_pow2(-(depth as i32) - 1);
    if witness.density < required {
        return Ok(CheckOutcome::skip(
            Check::Transfer,
            Some(p),
            format!(
                "densest root {} fills {} at depth {depth}, below {required}",
                witness.root, witness.density
            ),
        ));
    }
    match check_transfer(
        collection,
        Some(witness.root),
        depth,
        config.transfer_delta,
        p,
        &config.space,
        &config.estimate,
    ) {
        Ok(r) => Ok(CheckOutcome::pass(
            Check::Transfer,
            Some(p),
            json!({
                "root": witness.root,
                "lower": r.collection.lower,
                "grid_lower": r.grid.lower,
                "factor": r.factor,
                "margin": r.margin,
            }),
        )),
        Err(e) if is_violation(&e) => Ok(CheckOutcome::fail(Check::Transfer, Some(p), e)),
        Err(e) => Err(e.into()),
    }
}

fn growth(config: &CorpusConfig) -> Result<Vec<CheckOutcome>, HarnessError> {
    let mut out = Vec::new();
    for &p in &config.exponents {
        let mut rows = Vec::new();
        let mut passed = true;
        let mut previous = f64::NEG_INFINITY;
        for n in 0..=config.growth_depth {
            let closed = l1_witness_ratio(n, p);
            let family = l1_witness_family(n);
            let grid = rayleigh_ratio(&full_grid(n), &family, p, &Space::l1(family.dim()))?;
            let agrees = (closed - grid).abs() <= 1e-9;
            let increasing = closed > previous;
            passed &= agrees && increasing;
            previous = closed;
            rows.push(json!({ "n": n, "closed_form": closed, "grid": grid }));
        }
        out.push(CheckOutcome {
            check: Check::Growth,
            p: Some(p),
            passed,
            skipped: false,
            detail: json!(rows),
        });
    }
    Ok(out)
}

fn run_instance(
    index: usize,
    spec: &GeneratorSpec,
    config: &CorpusConfig,
) -> Result<InstanceReport, HarnessError> {
    let collection = generate(spec)?;
    let carleson = carleson_constant(&collection)?.constant;
    let mut outcomes = Vec::new();
    for check in &config.checks {
        match check {
            Check::Decomposition => outcomes.push(decomposition(&collection)?),
            Check::Lemma1 => {
                for &p in &config.exponents {
                    outcomes.push(lemma1(&collection, p, config)?);
                }
            }
            Check::Monotonicity => {
                for &p in &config.exponents {
                    outcomes.push(monotonicity(&collection, p, config)?);
                }
            }
            Check::Transfer => {
                for &p in &config.exponents {
                    outcomes.push(transfer(&collection, p, config)?);
                }
            }
            Check::Growth => {}
        }
    }
    let passed = outcomes.iter().all(|o| o.passed);
    Ok(InstanceReport {
        index,
        spec: spec.clone(),
        size: collection.len(),
        max_level: collection.max_level().unwrap_or(0),
        carleson,
        m: choose_m(carleson)?,
        outcomes,
        passed,
        intervals: (!passed).then(|| format_intervals(&collection)),
    })
}

/// Runs the configured checks over every spec (in parallel) and collects the
/// outcomes in spec order. The seed is recorded and drives the random starts
/// of every estimate.
pub fn run_corpus(
    specs: &[GeneratorSpec],
    config: &CorpusConfig,
    seed: u64,
) -> Result<ExperimentReport, HarnessError> {
    let started = Instant::now();
    let mut config = config.clone();
    config.estimate.seed = seed;
    let instances = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| run_instance(i, spec, &config))
        .collect::<Result<Vec<_>, _>>()?;
    let global = if config.checks.contains(&Check::Growth) {
        growth(&config)?
    } else {
        Vec::new()
    };
    let passed = instances.iter().all(|i| i.passed) && global.iter().all(|o| o.passed);
    Ok(ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config,
        instances,
        global,
        passed,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus_passes() {
        let report = run_corpus(&[], &CorpusConfig::default(), 1).unwrap();
        assert!(report.passed);
        assert!(report.instances.is_empty());
    }

    #[test]
    fn corpus_shape() {
        let specs = criterion_corpus(42);
        assert_eq!(specs.len(), 200);
        assert_eq!(specs, criterion_corpus(42));
        assert_ne!(specs, criterion_corpus(43));
        for s in &specs {
            match s {
                GeneratorSpec::RandomBudget {
                    max_depth, budget, ..
                } => {
                    assert!(*max_depth <= 10);
                    assert!(
                        *budget >= DyadicRational::ONE
                            && *budget <= DyadicRational::from_integer(4)
                    );
                }
                other => panic!("unexpected spec {other}"),
            }
        }
    }

    #[test]
    fn check_names_round_trip() {
        for c in Check::ALL {
            assert_eq!(c.to_string().parse::<Check>().unwrap(), c);
        }
        assert!("everything".parse::<Check>().is_err());
    }

    #[test]
    fn all_checks_on_small_corpus_are_deterministic() {
        let specs: Vec<GeneratorSpec> = [
            "full:3",
            "chain:6",
            "disjoint:2:3",
            "cascade:2:4:0:1",
            "random-budget:6:2:9",
        ]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
        let config = CorpusConfig {
            checks: Check::ALL.to_vec(),
            growth_depth: 4,
            ..CorpusConfig::default()
        };
        let a = run_corpus(&specs, &config, 7).unwrap();
        assert!(
            a.passed,
            "{}",
            serde_json::to_string_pretty(&a.to_json()).unwrap()
        );
        let b = run_corpus(&specs, &config, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&a.to_json()).unwrap(),
            serde_json::to_string(&b.to_json()).unwrap()
        );
        // The lossless cascade condenses perfectly, so the transfer check ran.
        let cascade = &a.instances[3];
        assert!(cascade
            .outcomes
            .iter()
            .any(|o| o.check == Check::Transfer && !o.skipped));
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().lines().count() > specs.len());
    }
}
