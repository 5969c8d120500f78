use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use haarlab_core::carleson::{
    almost_disjoint_decomposition, carleson_constant, chain_structure, condensation_densities,
    condensation_search, CarlesonError,
};
use haarlab_core::dyadic::{parse_intervals, DyadicInterval, DyadicRational, IntervalCollection};
use haarlab_core::gamlen_gaudet::{
    build_system, verify_joint_distribution, verify_properties, GamlenGaudetError,
};
use haarlab_core::harness::{self, generate, Check, CorpusConfig, GeneratorSpec, HarnessError};
use haarlab_core::type_constant::{
    check_lemma1, check_transfer, estimate_best_constant, EstimateConfig, Space, TypeConstantError,
};

#[derive(Parser)]
#[command(name = "haarlab", version)]
#[command(
    about = "Carleson constants, block systems and Haar-type constant estimates for dyadic collections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Interval file, one `level index` pair per line (`-` reads stdin)
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,

    /// Generator spec such as `full:5`, `chain:10`, `random-budget:8:3:1`, `cascade:2:5:0.01:7`
    #[arg(long)]
    generate: Option<String>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct Output {
    /// Directory to write results into instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Clone)]
struct Estimate {
    /// Exponent p in (1, 2]
    #[arg(long, default_value = "2")]
    p: f64,

    /// Target space: `scalar`, `lQ:DIM` (e.g. `l1:7`, `l1.5:4`) or `linf:DIM`
    #[arg(long, default_value = "scalar")]
    space: String,

    /// Seeded random starts on top of the structured ones
    #[arg(long, default_value = "4")]
    restarts: usize,

    #[arg(long, default_value = "200")]
    max_iter: usize,

    /// Relative change of the ratio at which an iteration stops
    #[arg(long, default_value = "1e-10")]
    tol: f64,

    #[arg(long, default_value = "0")]
    seed: u64,
}

impl Estimate {
    fn config(&self) -> EstimateConfig {
        EstimateConfig {
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
        }
    }

    fn space(&self) -> Result<Space> {
        Ok(self.space.parse()?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact Carleson constant with its witness and local masses
    Carleson {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },
    /// Almost-disjoint decomposition with certificates and chain structure
    Decompose {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        output: Output,
    },
    /// Densest root of the n-th generation
    Condense {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Build a block system and optionally verify its joint distribution
    GamlenGaudet {
        #[command(flatten)]
        source: Source,
        /// Root interval as `level:index`; defaults to the densest root
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        depth: u32,
        /// Dyadic parameter in (0, 1), e.g. `1/16` or `0.25`
        #[arg(long, default_value = "1/2")]
        delta: String,
        /// Re-run every verifier and the joint-distribution check
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Lower bound (with witness) and closed-form upper bound for the best constant
    EstimateConstant {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        estimate: Estimate,
        #[command(flatten)]
        output: Output,
    },
    /// Check the estimated constant against the closed-form upper bound
    VerifyLemma1 {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        estimate: Estimate,
        #[command(flatten)]
        output: Output,
    },
    /// Push a grid witness through a block system and compare both estimates
    CheckTransfer {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value = "1/2")]
        delta: String,
        #[command(flatten)]
        estimate: Estimate,
        #[command(flatten)]
        output: Output,
    },
    /// Run checks over generated collections
    Corpus {
        /// Generator spec; repeat for several collections
        #[arg(long = "generate", required = true)]
        specs: Vec<String>,
        /// Comma-separated: decomposition, lemma1, monotonicity, transfer, growth
        #[arg(long, default_value = "decomposition,lemma1", value_delimiter = ',')]
        checks: Vec<String>,
        /// Comma-separated exponents
        #[arg(long, default_value = "1.25,1.5,2", value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, default_value = "scalar")]
        space: String,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run acceptance criteria 1 to 8 end to end
    Reproduce {
        #[arg(long, default_value = "42")]
        seed: u64,
        /// Directory for report.json and timing.json; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(source: &Source) -> Result<IntervalCollection> {
    match (&source.input, &source.generate) {
        (Some(path), None) => {
            let text = if path.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s)?;
                s
            } else {
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
            };
            let collection =
                parse_intervals(&text).with_context(|| format!("parsing {}", path.display()))?;
            if collection.is_empty() {
                bail!("{} contains no intervals", path.display());
            }
            Ok(collection)
        }
        (None, Some(spec)) => Ok(generate(&spec.parse::<GeneratorSpec>()?)?),
        _ => bail!("give exactly one of --input or --generate"),
    }
}

fn parse_root(text: &str) -> Result<DyadicInterval> {
    let (level, index) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("root must be `level:index`, got `{text}`"))?;
    Ok(DyadicInterval::new(
        level.trim().parse()?,
        index.trim().parse()?,
    )?)
}

fn parse_delta(text: &str) -> Result<DyadicRational> {
    text.parse::<DyadicRational>()
        .map_err(|e| anyhow!("delta `{text}`: {e}"))
}

/// Writes JSON (or CSV rows when asked and available) to stdout or `out/name.ext`.
fn emit(output: &Output, name: &str, value: &Value, rows: Option<Vec<Vec<String>>>) -> Result<()> {
    let (text, ext) = match (output.format, rows) {
        (Format::Csv, Some(rows)) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.write_record(r)?;
            }
            (String::from_utf8(w.into_inner()?)?, "csv")
        }
        (Format::Csv, None) => bail!("{name} has no CSV form"),
        (Format::Json, _) => (serde_json::to_string_pretty(value)? + "\n", "json"),
    };
    match &output.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{name}.{ext}"));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn strings<const N: usize>(fields: [String; N]) -> Vec<String> {
    fields.to_vec()
}

fn cmd_carleson(source: &Source, output: &Output) -> Result<bool> {
    let e = load(source)?;
    let report = carleson_constant(&e)?;
    let masses: Vec<Value> = report
        .local_masses
        .iter()
        .map(|(i, m)| json!({ "interval": i, "local_mass": m }))
        .collect();
    let value = json!({
        "constant": report.constant,
        "witness": report.witness,
        "size": e.len(),
        "max_level": e.max_level(),
        "local_masses": masses,
    });
    let mut rows = vec![strings([
        "level".into(),
        "index".into(),
        "local_mass".into(),
        "ratio".into(),
    ])];
    for (i, m) in &report.local_masses {
        let ratio = m.scale_pow2(i.level() as i32);
        rows.push(strings([
            i.level().to_string(),
            i.index().to_string(),
            m.to_string(),
            ratio.to_string(),
        ]));
    }
    emit(output, "carleson", &value, Some(rows))?;
    Ok(true)
}

fn cmd_decompose(source: &Source, output: &Output) -> Result<bool> {
    let e = load(source)?;
    let cover = almost_disjoint_decomposition(&e)?;
    let mut value = cover.to_json();
    let mut chains = Vec::new();
    for (index, part) in cover
        .parts
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
    {
        let s = chain_structure(part)?;
        chains.push(json!({
            "part": index,
            "longest_chain": s.chains.values().map(|c| c.len() - 1).max().unwrap_or(0),
            "fringe_measure": s.fringes.values().map(|f| f.measure()).sum::<DyadicRational>(),
            "decay": s.decay.iter().map(|d| json!({ "interval": d.interval, "l": d.l, "mass": d.mass })).collect::<Vec<_>>(),
        }));
    }
    value["chains"] = json!(chains);
    let mut rows = vec![strings([
        "part".into(),
        "level".into(),
        "index".into(),
        "child_mass".into(),
        "local_mass".into(),
    ])];
    for (index, certs) in cover.certificates.iter().enumerate() {
        for c in certs {
            rows.push(strings([
                index.to_string(),
                c.interval.level().to_string(),
                c.interval.index().to_string(),
                c.child_mass.to_string(),
                c.local_mass.to_string(),
            ]));
        }
    }
    emit(output, "decompose", &value, Some(rows))?;
    Ok(true)
}

fn cmd_condense(source: &Source, depth: usize, output: &Output) -> Result<bool> {
    let e = load(source)?;
    let witness = condensation_search(&e, depth)?;
    let densities = condensation_densities(&e, depth)?;
    let value = json!({ "root": witness.root, "depth": depth, "density": witness.density });
    let mut rows = vec![strings(["level".into(), "index".into(), "density".into()])];
    for (i, d) in &densities {
        rows.push(strings([
            i.level().to_string(),
            i.index().to_string(),
            d.to_string(),
        ]));
    }
    emit(output, "condense", &value, Some(rows))?;
    Ok(true)
}

fn resolve_root(
    e: &IntervalCollection,
    root: &Option<String>,
    depth: u32,
) -> Result<DyadicInterval> {
    match root {
        Some(text) => parse_root(text),
        None => Ok(condensation_search(e, depth as usize)?.root),
    }
}

fn cmd_gamlen_gaudet(
    source: &Source,
    root: &Option<String>,
    depth: u32,
    delta: &str,
    verify: bool,
    output: &Output,
) -> Result<bool> {
    let e = load(source)?;
    let root = resolve_root(&e, root, depth)?;
    let system = build_system(&e, root, depth, parse_delta(delta)?)?;
    let mut value = system.to_json();
    let mut passed = true;
    if verify {
        value["properties"] = verify_properties(&system)?.to_json();
        let joint = verify_joint_distribution(&system);
        passed = joint.passed();
        value["joint_distribution"] = joint.to_json();
    }
    let mut rows = vec![strings([
        "level".into(),
        "index".into(),
        "blocks".into(),
        "block_measure".into(),
        "trimmed_measure".into(),
    ])];
    for i in system.indices() {
        rows.push(strings([
            i.level().to_string(),
            i.index().to_string(),
            system.blocks(&i).map_or(0, |b| b.len()).to_string(),
            system
                .block_set(&i)
                .map(|s| s.measure())
                .unwrap_or_default()
                .to_string(),
            system
                .trimmed_set(&i)
                .map(|s| s.measure())
                .unwrap_or_default()
                .to_string(),
        ]));
    }
    emit(output, "gamlen_gaudet", &value, Some(rows))?;
    Ok(passed)
}

fn estimate_row(
    est: &haarlab_core::type_constant::ConstantEstimate,
    margin: f64,
) -> Vec<Vec<String>> {
    vec![
        strings([
            "p".into(),
            "space".into(),
            "size".into(),
            "carleson".into(),
            "M".into(),
            "lower".into(),
            "upper".into(),
            "margin".into(),
            "iterations".into(),
            "seed".into(),
        ]),
        strings([
            est.p.to_string(),
            est.space.to_string(),
            est.size.to_string(),
            est.carleson.to_string(),
            est.m.to_string(),
            est.lower.to_string(),
            est.upper.to_string(),
            margin.to_string(),
            est.iterations.to_string(),
            est.seed.to_string(),
        ]),
    ]
}

fn cmd_estimate(source: &Source, estimate: &Estimate, output: &Output) -> Result<bool> {
    let e = load(source)?;
    let est = estimate_best_constant(&e, estimate.p, &estimate.space()?, &estimate.config())?;
    let rows = estimate_row(&est, est.upper - est.lower);
    emit(output, "estimate", &est.to_json(), Some(rows))?;
    Ok(true)
}

fn cmd_verify_lemma1(source: &Source, estimate: &Estimate, output: &Output) -> Result<bool> {
    let e = load(source)?;
    let report = check_lemma1(&e, estimate.p, &estimate.space()?, &estimate.config())?;
    let mut value = report.estimate.to_json();
    value["margin"] = json!(report.margin);
    value["passed"] = json!(true);
    let rows = estimate_row(&report.estimate, report.margin);
    emit(output, "lemma1", &value, Some(rows))?;
    Ok(true)
}

fn cmd_check_transfer(
    source: &Source,
    root: &Option<String>,
    depth: u32,
    delta: &str,
    estimate: &Estimate,
    output: &Output,
) -> Result<bool> {
    let e = load(source)?;
    let root = root.as_deref().map(parse_root).transpose()?;
    let report = check_transfer(
        &e,
        root,
        depth,
        parse_delta(delta)?,
        estimate.p,
        &estimate.space()?,
        &estimate.config(),
    )?;
    let rows = vec![
        strings([
            "p".into(),
            "space".into(),
            "delta".into(),
            "grid_lower".into(),
            "lower".into(),
            "transferred_ratio".into(),
            "ratio_factor".into(),
            "factor".into(),
            "margin".into(),
        ]),
        strings([
            estimate.p.to_string(),
            estimate.space.clone(),
            report.system.delta().to_string(),
            report.grid.lower.to_string(),
            report.collection.lower.to_string(),
            report.inequality.ratio_blocks.to_string(),
            report.inequality.ratio_factor.to_string(),
            report.factor.to_string(),
            report.margin.to_string(),
        ]),
    ];
    emit(output, "transfer", &report.to_json(), Some(rows))?;
    Ok(true)
}

fn cmd_corpus(
    specs: &[String],
    checks: &[String],
    p: &[f64],
    space: &str,
    seed: u64,
    output: &Output,
) -> Result<bool> {
    let specs: Vec<GeneratorSpec> = specs
        .iter()
        .map(|s| Ok(s.parse()?))
        .collect::<Result<_>>()?;
    let checks: Vec<Check> = checks
        .iter()
        .map(|c| Ok(c.parse()?))
        .collect::<Result<_>>()?;
    let config = CorpusConfig {
        checks,
        exponents: p.to_vec(),
        space: space.parse()?,
        ..CorpusConfig::default()
    };
    let report = harness::run_corpus(&specs, &config, seed)?;
    match &output.out {
        Some(dir) => report.write_to_dir(dir)?,
        None if output.format == Format::Csv => report.write_csv(io::stdout())?,
        None => println!("{}", serde_json::to_string_pretty(&report.to_json())?),
    }
    for f in report.failures() {
        eprintln!("failed: instance {} ({})", f.index, f.spec);
    }
    Ok(report.passed)
}

fn cmd_reproduce(seed: u64, out: &Option<PathBuf>) -> Result<bool> {
    let report = harness::reproduce(seed)?;
    for c in &report.criteria {
        eprintln!(
            "criterion {}: {} ({:.2} s) {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.seconds,
            c.title
        );
    }
    match out {
        Some(dir) => report.write_to_dir(dir)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(report.passed)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Carleson { source, output } => cmd_carleson(source, output),
        Command::Decompose { source, output } => cmd_decompose(source, output),
        Command::Condense {
            source,
            depth,
            output,
        } => cmd_condense(source, *depth, output),
        Command::GamlenGaudet {
            source,
            root,
            depth,
            delta,
            verify,
            output,
        } => cmd_gamlen_gaudet(source, root, *depth, delta, *verify, output),
        Command::EstimateConstant {
            source,
            estimate,
            output,
        } => cmd_estimate(source, estimate, output),
        Command::VerifyLemma1 {
            source,
            estimate,
            output,
        } => cmd_verify_lemma1(source, estimate, output),
        Command::CheckTransfer {
            source,
            root,
            depth,
            delta,
            estimate,
            output,
        } => cmd_check_transfer(source, root, *depth, delta, estimate, output),
        Command::Corpus {
            specs,
            checks,
            p,
            space,
            seed,
            output,
        } => cmd_corpus(specs, checks, p, space, *seed, output),
        Command::Reproduce { seed, out } => cmd_reproduce(*seed, out),
    }
}

/// A failed mathematical check, as opposed to bad input.
fn is_check_failure(err: &anyhow::Error) -> bool {
    let carleson = |e: &CarlesonError| {
        matches!(
            e,
            CarlesonError::CertificateViolation { .. } | CarlesonError::NotAlmostDisjoint(_)
        )
    };
    let gamlen = |e: &GamlenGaudetError| {
        matches!(
            e,
            GamlenGaudetError::PropertyViolated { .. }
                | GamlenGaudetError::JointDistribution { .. }
        )
    };
    let typed = |e: &TypeConstantError| match e {
        TypeConstantError::Lemma1Violated { .. } | TypeConstantError::TransferViolated(_) => true,
        TypeConstantError::Carleson(c) => carleson(c),
        TypeConstantError::GamlenGaudet(g) => gamlen(g),
        _ => false,
    };
    err.chain().any(|cause| {
        cause.downcast_ref::<CarlesonError>().is_some_and(carleson)
            || cause
                .downcast_ref::<GamlenGaudetError>()
                .is_some_and(gamlen)
            || cause.downcast_ref::<TypeConstantError>().is_some_and(typed)
            || cause
                .downcast_ref::<HarnessError>()
                .is_some_and(|h| match h {
                    HarnessError::Carleson(c) => carleson(c),
                    HarnessError::GamlenGaudet(g) => gamlen(g),
                    HarnessError::TypeConstant(t) => typed(t),
                    _ => false,
                })
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("HAARLAB_THREADS") {
        let n: usize = value
            .parse()
            .with_context(|| format!("HAARLAB_THREADS=`{value}` is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_check_failure(&e) { 1 } else { 2 })
        }
    }
}
