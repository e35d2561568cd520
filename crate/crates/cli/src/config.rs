//! Flat `key = value` run configuration. File values and command-line flags
//! are collected into the same raw map and validated together.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use swd_core::{ExtraClusterRule, SearchMode};

use crate::error::CliError;

pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_THRESHOLD: f64 = 0.99;
pub const DEFAULT_TOP_K: usize = 10;

const KEYS: &[&str] = &[
    "command",
    "periods",
    "lambda",
    "icc",
    "mu",
    "sizes",
    "mean",
    "cv",
    "clusters",
    "alloc",
    "mode",
    "reps",
    "seed",
    "threshold",
    "mirror_dedup",
    "extra_rule",
    "output",
    "top_k",
    "scatter",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Optimal,
    Enumerate,
    Sample,
    Recommend,
    Moments,
}

impl Command {
    pub fn needs_sizes(self) -> bool {
        matches!(
            self,
            Command::Analyze | Command::Enumerate | Command::Sample | Command::Recommend
        )
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Analyze => "analyze",
            Command::Optimal => "optimal",
            Command::Enumerate => "enumerate",
            Command::Sample => "sample",
            Command::Recommend => "recommend",
            Command::Moments => "moments",
        })
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "analyze" => Command::Analyze,
            "optimal" => Command::Optimal,
            "enumerate" => Command::Enumerate,
            "sample" => Command::Sample,
            "recommend" => Command::Recommend,
            "moments" => Command::Moments,
            _ => {
                return Err(format!(
                    "unknown command {s:?}; expected analyze, optimal, enumerate, sample, recommend or moments"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Lambda(f64),
    Icc(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SizeInput {
    List(Vec<u64>),
    Moments { mean: f64, cv: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Table => "table",
            OutputFormat::Csv => "csv",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(format!("unknown output {s:?}; expected table or csv")),
        }
    }
}

/// Two-column plot data instead of the ranked report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scatter {
    Distance,
    Imbalance,
}

impl fmt::Display for Scatter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scatter::Distance => "distance",
            Scatter::Imbalance => "imbalance",
        })
    }
}

impl FromStr for Scatter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "distance" => Ok(Scatter::Distance),
            "imbalance" => Ok(Scatter::Imbalance),
            _ => Err(format!(
                "unknown scatter {s:?}; expected distance or imbalance"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub periods: usize,
    pub correlation: Correlation,
    pub mu: Option<f64>,
    pub sizes: SizeInput,
    /// Cluster count when only moments are given.
    pub clusters: Option<usize>,
    /// Sequence (1-based) for each cluster, in `sizes` order.
    pub alloc: Option<Vec<usize>>,
    pub mode: Option<SearchMode>,
    pub reps: usize,
    pub seed: Option<u64>,
    pub threshold: f64,
    pub mirror_dedup: bool,
    pub extra_rule: ExtraClusterRule,
    pub output: OutputFormat,
    pub top_k: usize,
    pub scatter: Option<Scatter>,
}

/// Where a raw value came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    Env,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => f.write_str("command line"),
            Origin::Env => f.write_str("environment"),
        }
    }
}

/// Unvalidated values keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, (String, Origin)>,
}

/// Keys that describe the same setting; giving one on the command line drops
/// the others from the file.
const OVERRIDE_GROUPS: &[&[&str]] = &[&["lambda", "icc"], &["sizes", "mean", "cv"]];

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::parse(
                    None,
                    Origin::Line(lineno),
                    format!("expected `key = value`, got {content:?}"),
                )
            })?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::parse(
                    Some(&key),
                    Origin::Line(lineno),
                    format!("unknown key; valid keys are {}", KEYS.join(", ")),
                ));
            }
            if let Some((_, first)) = raw.values.get(&key) {
                return Err(CliError::parse(
                    Some(&key),
                    Origin::Line(lineno),
                    format!("repeated key, first set on {first}"),
                ));
            }
            raw.values
                .insert(key, (value.trim().to_string(), Origin::Line(lineno)));
        }
        Ok(raw)
    }

    /// Command-line value; replaces the file value and any file value of an
    /// alternative key for the same setting.
    pub fn set_flag(&mut self, key: &str, value: impl Into<String>) {
        if let Some(group) = OVERRIDE_GROUPS.iter().find(|g| g.contains(&key)) {
            let companions: &[&str] = if key == "mean" || key == "cv" {
                &["sizes"]
            } else {
                group
            };
            for k in companions {
                if *k != key && matches!(self.values.get(*k), Some((_, Origin::Line(_)))) {
                    self.values.remove(*k);
                }
            }
        }
        self.values
            .insert(key.to_string(), (value.into(), Origin::Flag));
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.values.get(key)
    }

    fn typed<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v.parse::<T>().map(Some).map_err(|_| {
                CliError::parse(
                    Some(key),
                    origin.clone(),
                    format!("expected {what}, got {v:?}"),
                )
            }),
        }
    }

    fn named<T: FromStr<Err = E>, E: fmt::Display>(
        &self,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::parse(Some(key), origin.clone(), e.to_string())),
        }
    }

    fn list<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .split(',')
                .map(str::trim)
                .map(|t| {
                    t.parse::<T>().map_err(|_| {
                        CliError::parse(
                            Some(key),
                            origin.clone(),
                            format!("expected {what}, got {t:?}"),
                        )
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> CliError {
        let origin = self.get(key).map_or(Origin::Flag, |(_, o)| o.clone());
        CliError::parse(Some(key), origin, message)
    }

    pub fn validate(&self) -> Result<RunConfig, CliError> {
        let command: Command = self
            .named("command")?
            .ok_or_else(|| CliError::parse(Some("command"), Origin::Flag, "no command given"))?;

        let periods: usize = self
            .typed("periods", "an integer number of periods")?
            .ok_or_else(|| CliError::parse(Some("periods"), Origin::Flag, "periods is required"))?;
        if periods < 2 {
            return Err(self.fail("periods", "at least 2 periods are needed"));
        }

        let lambda: Option<f64> = self.typed("lambda", "a number")?;
        let icc: Option<f64> = self.typed("icc", "a number")?;
        let correlation = match (lambda, icc) {
            (Some(_), Some(_)) => {
                return Err(self.fail("icc", "give lambda or icc, not both"));
            }
            (Some(l), None) if l.is_finite() && l >= 0.0 => Correlation::Lambda(l),
            (Some(_), None) => {
                return Err(self.fail("lambda", "lambda must be finite and nonnegative"))
            }
            (None, Some(r)) if (0.0..=1.0).contains(&r) => Correlation::Icc(r),
            (None, Some(_)) => return Err(self.fail("icc", "icc must lie in [0, 1]")),
            (None, None) => {
                return Err(CliError::parse(
                    Some("lambda"),
                    Origin::Flag,
                    "lambda or icc is required",
                ));
            }
        };

        let mu: Option<f64> = self.typed("mu", "a number")?;
        if let Some(m) = mu {
            if !(m.is_finite() && m >= 0.0) {
                return Err(self.fail("mu", "mu must be finite and nonnegative"));
            }
        }

        let list: Option<Vec<u64>> = self.list("sizes", "a positive integer cluster size")?;
        let mean: Option<f64> = self.typed("mean", "a number")?;
        let cv: Option<f64> = self.typed("cv", "a number")?;
        let sizes = match (list, mean, cv) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                let key = if mean.is_some() { "mean" } else { "cv" };
                return Err(self.fail(key, "give either sizes or mean and cv, not both"));
            }
            (Some(l), None, None) => {
                if l.contains(&0) {
                    return Err(self.fail("sizes", "cluster sizes must be positive"));
                }
                SizeInput::List(l)
            }
            (None, Some(mean), Some(cv)) => {
                if !(mean.is_finite() && mean > 0.0) {
                    return Err(self.fail("mean", "mean must be positive"));
                }
                if !(cv.is_finite() && cv >= 0.0) {
                    return Err(self.fail("cv", "cv must be nonnegative"));
                }
                SizeInput::Moments { mean, cv }
            }
            (None, Some(_), None) => return Err(self.fail("mean", "mean needs cv as well")),
            (None, None, Some(_)) => return Err(self.fail("cv", "cv needs mean as well")),
            (None, None, None) => {
                return Err(CliError::parse(
                    Some("sizes"),
                    Origin::Flag,
                    "either sizes or mean and cv are required",
                ));
            }
        };
        if command.needs_sizes() && matches!(sizes, SizeInput::Moments { .. }) {
            return Err(self.fail(
                "mean",
                format!("command {command} needs individual cluster sizes, not moments"),
            ));
        }

        let clusters: Option<usize> = self.typed("clusters", "a cluster count")?;
        if clusters.is_some() && matches!(sizes, SizeInput::List(_)) {
            return Err(self.fail("clusters", "clusters is only used with mean and cv"));
        }

        let alloc: Option<Vec<usize>> = self.list("alloc", "a sequence number")?;
        if let (Some(a), SizeInput::List(l)) = (&alloc, &sizes) {
            if a.len() != l.len() {
                return Err(self.fail(
                    "alloc",
                    format!("{} sequence numbers for {} clusters", a.len(), l.len()),
                ));
            }
            if let Some(bad) = a.iter().find(|&&x| x == 0 || x >= periods) {
                return Err(self.fail(
                    "alloc",
                    format!("sequence {bad} outside 1..={}", periods - 1),
                ));
            }
        }
        if alloc.is_some() && matches!(sizes, SizeInput::Moments { .. }) {
            return Err(self.fail("alloc", "an allocation needs individual cluster sizes"));
        }
        if command == Command::Analyze && alloc.is_none() {
            return Err(CliError::parse(
                Some("alloc"),
                Origin::Flag,
                "analyze needs alloc",
            ));
        }

        let mode: Option<SearchMode> = self.named("mode")?;
        let reps: usize = self
            .typed("reps", "a repetition count")?
            .unwrap_or(DEFAULT_REPS);
        if reps == 0 && matches!(command, Command::Sample | Command::Recommend) {
            return Err(self.fail("reps", "random sampling needs reps >= 1"));
        }
        let seed: Option<u64> = self.typed("seed", "an unsigned 64-bit integer")?;
        let threshold: f64 = self
            .typed("threshold", "an efficiency")?
            .unwrap_or(DEFAULT_THRESHOLD);
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(self.fail("threshold", "threshold must be a nonnegative efficiency"));
        }
        let mirror_dedup: bool = self
            .typed("mirror_dedup", "true or false")?
            .unwrap_or(false);
        let extra_rule: ExtraClusterRule = self.named("extra_rule")?.unwrap_or_default();
        let output: OutputFormat = self.named("output")?.unwrap_or_default();
        let top_k: usize = self.typed("top_k", "a row count")?.unwrap_or(DEFAULT_TOP_K);
        let scatter: Option<Scatter> = self.named("scatter")?;

        Ok(RunConfig {
            command,
            periods,
            correlation,
            mu,
            sizes,
            clusters,
            alloc,
            mode,
            reps,
            seed,
            threshold,
            mirror_dedup,
            extra_rule,
            output,
            top_k,
            scatter,
        })
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RawConfig::parse(text)?.validate()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Renders a configuration that [`parse_config`] reads back unchanged.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut lines = vec![
        format!("command = {}", cfg.command),
        format!("periods = {}", cfg.periods),
    ];
    match cfg.correlation {
        Correlation::Lambda(l) => lines.push(format!("lambda = {l}")),
        Correlation::Icc(r) => lines.push(format!("icc = {r}")),
    }
    if let Some(mu) = cfg.mu {
        lines.push(format!("mu = {mu}"));
    }
    match &cfg.sizes {
        SizeInput::List(l) => lines.push(format!("sizes = {}", join(l))),
        SizeInput::Moments { mean, cv } => {
            lines.push(format!("mean = {mean}"));
            lines.push(format!("cv = {cv}"));
        }
    }
    if let Some(c) = cfg.clusters {
        lines.push(format!("clusters = {c}"));
    }
    if let Some(a) = &cfg.alloc {
        lines.push(format!("alloc = {}", join(a)));
    }
    if let Some(m) = cfg.mode {
        lines.push(format!("mode = {m}"));
    }
    lines.push(format!("reps = {}", cfg.reps));
    if let Some(s) = cfg.seed {
        lines.push(format!("seed = {s}"));
    }
    lines.push(format!("threshold = {}", cfg.threshold));
    lines.push(format!("mirror_dedup = {}", cfg.mirror_dedup));
    lines.push(format!("extra_rule = {}", cfg.extra_rule));
    lines.push(format!("output = {}", cfg.output));
    lines.push(format!("top_k = {}", cfg.top_k));
    if let Some(s) = cfg.scatter {
        lines.push(format!("scatter = {s}"));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
