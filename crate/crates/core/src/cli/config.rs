//! Run configuration: a JSON file whose fields any flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkers::{dyadic_deltas, Family};
use crate::error::{Error, Result};
use crate::scalar::{parse_rational, parse_rational_list, ArithmeticMode, Rational};
use crate::verdict::VerdictStatus;

/// Which pairs `check-qc` tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PairsMode {
    /// Segment endpoints first, then random draws.
    Vertices,
    /// Random draws only.
    Random,
}

/// Every field is optional; unset fields take per-command defaults.
/// Rationals are strings (`"1/2"`, `"0.5"`, `"2e-3"`) so they stay exact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON config file; flags override its fields.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Subcommand the file is meant for (checked against the one run).
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    /// Gallery density id: `square4d` or `segment2d(ax,ay,bx,by)`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,

    /// Reshape the density to `n,m` (same n*m).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,

    /// Base point, flat comma-separated list in component-major order.
    #[arg(long = "A", allow_hyphen_values = true)]
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,

    /// Mesh subdivisions per axis.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,

    /// Random candidates (weak search) or trials per grid point (reproduce).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_starts: Option<usize>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_steps: Option<usize>,

    /// Gradient cap for random weak candidates.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_search: Option<String>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Decreasing boundary bounds: `1/2,1/4,...` or `dyadic:J` for 2^-1..2^-J.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<String>,

    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_def: Option<String>,

    /// Gradient bound of the strong definition.
    #[arg(long = "K")]
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k_bound: Option<String>,

    /// Strong-search families, comma-separated: zigzag,laminate,random.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<String>,

    /// Random small-boundary maps per delta.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_trials: Option<usize>,

    #[arg(long, value_parser = parse_mode)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ArithmeticMode>,

    /// Sublevel threshold for check-qc.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<String>,

    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PairsMode>,

    /// Pairs tested by check-qc, or convexity pairs of scalar-suite.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,

    /// Base points sampled by scalar-suite.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_a: Option<usize>,

    /// Interior grid points per side for the reproduce weak stage.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    /// Expected verdict: violated, no-violation or inconclusive.
    #[arg(long, value_parser = parse_expect)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<VerdictStatus>,

    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<ArithmeticMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_expect(s: &str) -> std::result::Result<VerdictStatus, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    /// `top` wins wherever it sets a field.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(
            base, top, config, command, density, shape, a, k, trials, local_starts, local_steps, k_search, seed,
            deltas, eps_def, k_bound, families, random_trials, mode, s, pairs, samples, sampled_a, grid, expect,
            out
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn mode(&self) -> ArithmeticMode {
        self.mode.unwrap_or_default()
    }

    pub fn rational(field: &str, value: &Option<String>, default: Rational) -> Result<Rational> {
        match value {
            None => Ok(default),
            Some(v) => parse_rational(v).map_err(|e| Error::invalid(field, e.to_string())),
        }
    }

    pub fn deltas_or(&self, default: Vec<Rational>) -> Result<Vec<Rational>> {
        let Some(text) = &self.deltas else { return Ok(default) };
        let text = text.trim();
        if let Some(j) = text.strip_prefix("dyadic:") {
            let j: u32 = j
                .trim()
                .parse()
                .ok()
                .filter(|&j| (1..=62).contains(&j))
                .ok_or_else(|| Error::invalid("deltas", "dyadic:J needs 1 <= J <= 62"))?;
            return Ok(dyadic_deltas(j));
        }
        parse_rational_list(text).map_err(|e| Error::invalid("deltas", e.to_string()))
    }

    pub fn families_or_all(&self) -> Result<Vec<Family>> {
        match &self.families {
            None => Ok(Family::ALL.to_vec()),
            Some(text) => text.split(',').map(str::parse).collect(),
        }
    }

    pub fn shape(&self) -> Result<Option<(usize, usize)>> {
        let Some(text) = &self.shape else { return Ok(None) };
        let parts: Vec<&str> = text.split([',', 'x']).map(str::trim).collect();
        match parts.as_slice() {
            [n, m] => match (n.parse(), m.parse()) {
                (Ok(n), Ok(m)) => Ok(Some((n, m))),
                _ => Err(Error::invalid("shape", format!("`{text}` is not `n,m`"))),
            },
            _ => Err(Error::invalid("shape", format!("`{text}` is not `n,m`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let err = RunConfig::from_json_str(r#"{"density": "square4d", "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn flags_win() {
        let file = RunConfig::from_json_str(r#"{"seed": 3, "k": 4, "A": "1,0,0,0"}"#).unwrap();
        let flags = RunConfig { seed: Some(9), ..RunConfig::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.k, Some(4));
        assert_eq!(merged.a.as_deref(), Some("1,0,0,0"));
    }

    #[test]
    fn deltas_and_shapes() {
        let c = RunConfig { deltas: Some("dyadic:3".into()), shape: Some("1x2".into()), ..RunConfig::default() };
        assert_eq!(c.deltas_or(vec![]).unwrap(), dyadic_deltas(3));
        assert_eq!(c.shape().unwrap(), Some((1, 2)));
        let c = RunConfig { deltas: Some("1/2, 0.125".into()), ..RunConfig::default() };
        assert_eq!(c.deltas_or(vec![]).unwrap(), vec![Rational::new(1.into(), 2.into()), Rational::new(1.into(), 8.into())]);
        let c = RunConfig { deltas: Some("dyadic:0".into()), shape: Some("3".into()), ..RunConfig::default() };
        assert!(c.deltas_or(vec![]).is_err());
        assert!(c.shape().is_err());
    }

    fn opt<T: Clone + std::fmt::Debug>(s: impl Strategy<Value = T>) -> impl Strategy<Value = Option<T>> {
        prop::option::of(s)
    }

    proptest! {
        #[test]
        fn config_round_trips(
            density in opt("[a-z0-9(),]{1,12}"),
            a in opt("[0-9/,.-]{1,16}"),
            k in opt(1usize..64),
            seed in opt(any::<u64>()),
            mode in opt(prop_oneof![Just(ArithmeticMode::Rational), Just(ArithmeticMode::Float)]),
            pairs in opt(prop_oneof![Just(PairsMode::Vertices), Just(PairsMode::Random)]),
            expect in opt(prop_oneof![Just(VerdictStatus::Violated), Just(VerdictStatus::NoViolationWithinBudget)]),
            deltas in opt("[0-9/,]{1,10}"),
        ) {
            let c = RunConfig { density, a, k, seed, mode, pairs, expect, deltas, ..RunConfig::default() };
            let text = serde_json::to_string(&c).unwrap();
            prop_assert_eq!(RunConfig::from_json_str(&text).unwrap(), c);
        }
    }
}
