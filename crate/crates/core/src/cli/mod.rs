//! The `morrey` command-line front end.
//!
//! Exit codes: 0 when the expected verdict is reached, 2 when it is not,
//! 64 for usage errors and 65 for bad configuration or input.

pub mod config;
pub mod report;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::checkers::{
    falsify_strong_mqc, falsify_weak_mqc, reproduce_paper_counterexample, scalar_equivalence_suite, ReproduceConfig,
    ScalarSuiteConfig, SearchConfig, StrongConfig, SuiteStatus,
};
use crate::density::{gallery_density, sublevel_midpoint_convexity, Density, GradientPoint, SampleBudget, GALLERY_IDS};
use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Rational, Scalar};
use crate::verdict::{Verdict, VerdictStatus};
pub use config::{PairsMode, RunConfig};
use report::{envelope, write_atomic, Outcome};

pub const EXIT_EXPECTED: i32 = 0;
pub const EXIT_UNEXPECTED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 65;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "MORREY_THREADS";

/// Density used by `scalar-suite` when none is given.
pub const DEFAULT_SCALAR_DENSITY: &str = "segment2d((0,0),(1,0))";

#[derive(Debug, Parser)]
#[command(name = "morrey", version, about = "Checks for level-set and Morrey quasiconvexity of L-infinity densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the gallery densities and their descriptors.
    Gallery(RunConfig),
    /// Sampled midpoint test of a sublevel set.
    CheckQc(RunConfig),
    /// Search for a weak Morrey violation at A.
    FalsifyWeak(RunConfig),
    /// Search for strong Morrey falsifications at A along a delta sequence.
    FalsifyStrong(RunConfig),
    /// Consistency of the three notions on a scalar-case density.
    ScalarSuite(RunConfig),
    /// End-to-end square-boundary counterexample.
    Reproduce(RunConfig),
}

impl Command {
    fn split(self) -> (&'static str, RunConfig) {
        match self {
            Command::Gallery(c) => ("gallery", c),
            Command::CheckQc(c) => ("check-qc", c),
            Command::FalsifyWeak(c) => ("falsify-weak", c),
            Command::FalsifyStrong(c) => ("falsify-strong", c),
            Command::ScalarSuite(c) => ("scalar-suite", c),
            Command::Reproduce(c) => ("reproduce", c),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_EXPECTED };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("morrey: {e}");
        return EXIT_CONFIG;
    }
    let (name, flags) = cli.command.split();
    match execute(name, flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("morrey {name}: {e}");
            EXIT_CONFIG
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::invalid(THREADS_ENV, format!("`{text}` is not a positive integer")))?;
    // A second call in the same process (tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn execute(name: &str, flags: RunConfig) -> Result<i32> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::from_file(path)?.overlay(flags),
        None => flags,
    };
    cfg.config = None;
    if let Some(cmd) = &cfg.command {
        if cmd != name {
            return Err(Error::invalid("command", format!("config is for `{cmd}`, running `{name}`")));
        }
    }
    let (outcome, result, label) = match name {
        "gallery" => gallery(&cfg)?,
        "check-qc" => check_qc(&cfg)?,
        "falsify-weak" => falsify_weak(&cfg)?,
        "falsify-strong" => falsify_strong(&cfg)?,
        "scalar-suite" => scalar_suite(&cfg)?,
        "reproduce" => reproduce(&cfg)?,
        other => return Err(Error::invalid("command", format!("unknown subcommand `{other}`"))),
    };
    let report = envelope(name, &cfg, &outcome, result);
    let target = match &cfg.out {
        Some(path) => {
            write_atomic(path, &report)?;
            path.display().to_string()
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            "stdout".to_string()
        }
    };
    eprintln!(
        "{name} {label}: {} (expected {}); report: {target}",
        outcome.status, outcome.expected
    );
    Ok(outcome.exit_code)
}

fn density(cfg: &RunConfig, default: &str) -> Result<Density> {
    let id = cfg.density.as_deref().unwrap_or(default);
    let d = gallery_density(id).map_err(|e| Error::invalid("density", e.to_string()))?;
    match cfg.shape()? {
        Some((n, m)) => d.with_shape(n, m).map_err(|e| Error::invalid("shape", e.to_string())),
        None => Ok(d),
    }
}

fn base_point(cfg: &RunConfig, d: &Density) -> Result<GradientPoint<Rational>> {
    match &cfg.a {
        Some(text) => GradientPoint::parse(text, d.n(), d.m()),
        None if d.id() == "square4d" => GradientPoint::parse("1/2,0,1/2,0", 2, 2),
        None => Err(Error::invalid("A", format!("required for density {}", d.id()))),
    }
}

fn verdict_outcome(v: &Verdict, cfg: &RunConfig) -> Outcome {
    let expected = cfg.expect.unwrap_or(VerdictStatus::NoViolationWithinBudget);
    Outcome {
        status: v.status.as_str().into(),
        expected: expected.as_str().into(),
        exit_code: if v.status == expected { EXIT_EXPECTED } else { EXIT_UNEXPECTED },
    }
}

fn search_config(cfg: &RunConfig, trials: usize) -> Result<SearchConfig> {
    let base = SearchConfig::default();
    Ok(SearchConfig {
        k: cfg.k.unwrap_or(base.k),
        trials: cfg.trials.unwrap_or(trials),
        local_starts: cfg.local_starts.unwrap_or(base.local_starts),
        local_steps: cfg.local_steps.unwrap_or(base.local_steps),
        k_search: RunConfig::rational("k_search", &cfg.k_search, base.k_search)?,
        seed: cfg.seed(),
        mode: cfg.mode(),
    })
}

fn strong_config(cfg: &RunConfig, random_trials: usize) -> Result<StrongConfig> {
    let base = StrongConfig::default();
    Ok(StrongConfig {
        eps_def: RunConfig::rational("eps_def", &cfg.eps_def, base.eps_def)?,
        k_bound: RunConfig::rational("K", &cfg.k_bound, base.k_bound)?,
        deltas: cfg.deltas_or(base.deltas)?,
        families: cfg.families_or_all()?,
        random_trials: cfg.random_trials.unwrap_or(random_trials),
        random_k: cfg.k.unwrap_or(base.random_k),
        include_zero_map: true,
        seed: cfg.seed(),
        mode: cfg.mode(),
    })
}

type Ran = (Outcome, Value, String);

fn gallery(cfg: &RunConfig) -> Result<Ran> {
    let densities = match &cfg.density {
        Some(_) => vec![density(cfg, "")?.descriptor()],
        None => vec![
            gallery_density("square4d")?.descriptor(),
            gallery_density(DEFAULT_SCALAR_DENSITY)?.descriptor(),
        ],
    };
    let outcome = Outcome { status: "listed".into(), expected: "listed".into(), exit_code: EXIT_EXPECTED };
    let label = format!("{} densities", densities.len());
    Ok((outcome, json!({ "ids": GALLERY_IDS, "densities": densities }), label))
}

fn check_qc(cfg: &RunConfig) -> Result<Ran> {
    let d = density(cfg, "square4d")?;
    let s = match (&cfg.s, d.as_indicator()) {
        (Some(text), _) => parse_rational(text).map_err(|e| Error::invalid("s", e.to_string()))?,
        (None, Some(ind)) => (ind.on_value() + ind.off_value()) / Rational::from_int(2),
        (None, None) => return Err(Error::invalid("s", "required for this density")),
    };
    let mut budget = SampleBudget::new(cfg.samples.unwrap_or(1000));
    if cfg.pairs == Some(PairsMode::Random) {
        budget = budget.random_only();
    }
    let v = sublevel_midpoint_convexity(&d, &s, &budget, cfg.seed(), cfg.mode())?;
    let outcome = verdict_outcome(&v, cfg);
    let result = json!({ "density": d.descriptor(), "s": s.to_string(), "verdict": v });
    Ok((outcome, result, d.id().to_string()))
}

fn falsify_weak(cfg: &RunConfig) -> Result<Ran> {
    let d = density(cfg, "square4d")?;
    let a = base_point(cfg, &d)?;
    let v = falsify_weak_mqc(&d, &a, &search_config(cfg, SearchConfig::default().trials)?)?;
    let outcome = verdict_outcome(&v, cfg);
    let result = json!({ "density": d.descriptor(), "A": a.to_json(), "verdict": v });
    Ok((outcome, result, d.id().to_string()))
}

fn falsify_strong(cfg: &RunConfig) -> Result<Ran> {
    let d = density(cfg, "square4d")?;
    let a = base_point(cfg, &d)?;
    let v = falsify_strong_mqc(&d, &a, &strong_config(cfg, StrongConfig::default().random_trials)?)?;
    let outcome = verdict_outcome(&v, cfg);
    let result = json!({ "density": d.descriptor(), "A": a.to_json(), "verdict": v });
    Ok((outcome, result, d.id().to_string()))
}

fn scalar_suite(cfg: &RunConfig) -> Result<Ran> {
    let d = density(cfg, DEFAULT_SCALAR_DENSITY)?;
    let base = ScalarSuiteConfig::default();
    let suite_cfg = ScalarSuiteConfig {
        s_values: match &cfg.s {
            Some(text) => Some(vec![parse_rational(text).map_err(|e| Error::invalid("s", e.to_string()))?]),
            None => None,
        },
        convexity_pairs: cfg.samples.unwrap_or(base.convexity_pairs),
        sampled_a: cfg.sampled_a.unwrap_or(base.sampled_a),
        a_box_radius: base.a_box_radius,
        weak: search_config(cfg, base.weak.trials).map(|w| SearchConfig {
            local_starts: cfg.local_starts.unwrap_or(base.weak.local_starts),
            local_steps: cfg.local_steps.unwrap_or(base.weak.local_steps),
            ..w
        })?,
        strong: strong_config(cfg, base.strong.random_trials)?,
        seed: cfg.seed(),
        mode: cfg.mode(),
    };
    let report = scalar_equivalence_suite(&d, &suite_cfg)?;
    let status = match report.status {
        SuiteStatus::Consistent => "consistent",
        SuiteStatus::InconclusiveTension => "inconclusive_tension",
        SuiteStatus::Inconsistent => "inconsistent",
    };
    let outcome = Outcome {
        status: status.into(),
        expected: "consistent or inconclusive_tension".into(),
        exit_code: if report.status == SuiteStatus::Inconsistent { EXIT_UNEXPECTED } else { EXIT_EXPECTED },
    };
    let result = json!({ "density": d.descriptor(), "report": report });
    Ok((outcome, result, d.id().to_string()))
}

fn reproduce(cfg: &RunConfig) -> Result<Ran> {
    let base = ReproduceConfig::default();
    let strong_a = match &cfg.a {
        Some(text) => Some(GradientPoint::parse(text, 2, 2)?),
        None => None,
    };
    let rep_cfg = ReproduceConfig {
        search: search_config(cfg, base.search.trials)?,
        grid: cfg.grid.unwrap_or(base.grid),
        grid_trials: cfg.trials.unwrap_or(base.grid_trials).min(base.grid_trials),
        strong: strong_config(cfg, base.strong.random_trials)?,
        strong_a,
        sublevel_pairs: cfg.samples.unwrap_or(base.sublevel_pairs),
    };
    let report = reproduce_paper_counterexample(&rep_cfg)?;
    let outcome = Outcome {
        status: report.status.as_str().into(),
        expected: "confirmed".into(),
        exit_code: if report.failing_stage.is_none() { EXIT_EXPECTED } else { EXIT_UNEXPECTED },
    };
    let label = match &report.failing_stage {
        Some(stage) => format!("square4d (failing stage {stage})"),
        None => "square4d".into(),
    };
    Ok((outcome, serde_json::to_value(&report).expect("report serializes"), label))
}
