//! Executes a validated [`RunConfig`] against the core library.

use nalgebra::DVector;
use swd_core::approx::ApproxConstants;
use swd_core::search::{attach_exact, rank_distinct};
use swd_core::{
    build_geometry, enumerate, evaluate_allocation, fit_regression, moment_summary, optimal_p,
    recommend, sample, Allocation, ClusterSet, RegressionFit, SearchMode, SearchScheme,
    SizeMoments, TrialConfig,
};

use crate::config::{Command, Correlation, Origin, OutputFormat, RunConfig, SizeInput};
use crate::error::CliError;
use crate::report::{emit_pairs, emit_report, emit_scatter};

pub const SEED_ENV: &str = "SWD_SEED";

/// Report text for stdout plus diagnostic notes for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub notes: Vec<String>,
}

pub fn trial_config(cfg: &RunConfig) -> Result<TrialConfig, CliError> {
    let mut t = match cfg.correlation {
        Correlation::Lambda(l) => TrialConfig::cross_sectional(cfg.periods, l)?,
        Correlation::Icc(r) => TrialConfig::from_icc(cfg.periods, r)?,
    };
    if let Some(mu) = cfg.mu {
        t = t.with_closed_cohort(mu)?;
    }
    Ok(t)
}

fn cluster_set(cfg: &RunConfig) -> Result<ClusterSet, CliError> {
    match &cfg.sizes {
        SizeInput::List(l) => Ok(ClusterSet::new(l.clone())?),
        SizeInput::Moments { .. } => Err(CliError::parse(
            Some("sizes"),
            Origin::Flag,
            format!("command {} needs individual cluster sizes", cfg.command),
        )),
    }
}

/// Seed from the configuration, then the environment, then fresh entropy.
pub fn resolve_seed(cfg: &RunConfig, env: Option<&str>) -> Result<(u64, &'static str), CliError> {
    if let Some(s) = cfg.seed {
        return Ok((s, "config"));
    }
    if let Some(v) = env {
        let s = v.trim().parse::<u64>().map_err(|_| {
            CliError::parse(
                Some(SEED_ENV),
                Origin::Env,
                format!("expected an unsigned 64-bit integer, got {v:?}"),
            )
        })?;
        return Ok((s, SEED_ENV));
    }
    Ok((rand::random::<u64>(), "entropy"))
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(","))
}

fn with_pairs(
    report: String,
    pairs: &[(String, String)],
    output: OutputFormat,
    notes: &mut Vec<String>,
) -> Result<String, CliError> {
    match output {
        OutputFormat::Table => Ok(format!("{report}\n{}", emit_pairs(pairs, output)?)),
        OutputFormat::Csv => {
            notes.extend(pairs.iter().map(|(k, v)| format!("{k} = {v}")));
            Ok(report)
        }
    }
}

fn scheme_for(cfg: &RunConfig, seed: u64) -> Result<SearchScheme, CliError> {
    let mode = cfg.mode.unwrap_or(SearchMode::RandomClusterBalanced);
    if mode == SearchMode::Exhaustive {
        return Err(CliError::parse(
            Some("mode"),
            Origin::Flag,
            format!(
                "{} draws at random; use the enumerate command for an exhaustive search",
                cfg.command
            ),
        ));
    }
    Ok(SearchScheme {
        mode,
        reps: cfg.reps,
        seed,
        mirror_dedup: cfg.mirror_dedup,
        extra_rule: cfg.extra_rule,
        cap: swd_core::search::DEFAULT_CAP,
        top_k_exact: cfg.top_k,
    })
}

/// Cluster proportions for a cluster-balanced deal of `c` clusters: `c / S`
/// each, leftovers to the outer sequences in pairs, an odd one to the middle.
fn balanced_k(c: usize, s: usize) -> Vec<f64> {
    let mut counts = vec![(c / s) as f64; s];
    let mut extra = c % s;
    if extra % 2 == 1 {
        counts[s / 2] += 1.0;
        extra -= 1;
    }
    for i in 0..extra / 2 {
        counts[i] += 1.0;
        counts[s - 1 - i] += 1.0;
    }
    counts.iter().map(|x| x / c as f64).collect()
}

fn analyze(cfg: &RunConfig, trial: &TrialConfig) -> Result<Outcome, CliError> {
    let clusters = cluster_set(cfg)?;
    let s = trial.sequences();
    let alloc = Allocation::new(cfg.alloc.clone().unwrap_or_default(), s)?;
    let canon = alloc.canonical(&clusters, s)?;
    let ranked = evaluate_allocation(&canon, trial, &clusters)?;
    let fit = fit_regression(trial, &clusters);
    let mut notes = Vec::new();
    let n = clusters.total() as f64;
    let c = clusters.len() as f64;
    let mut pairs = vec![
        ("W".to_string(), num(fit.w)),
        ("beta".to_string(), num(fit.beta)),
        ("W_beta".to_string(), num(fit.w_beta())),
        ("correlation".to_string(), num(fit.corr)),
    ];
    if let Some(v) = ranked.v_exact {
        pairs.push(("var_theta_over_sigma2".to_string(), num(1.0 / (n * v))));
    }
    for (l, (p, k)) in ranked.p.iter().zip(ranked.k.iter()).enumerate() {
        let mean = if *k > 0.0 {
            num(n * p / (c * k))
        } else {
            "-".to_string()
        };
        pairs.push((format!("mean_size_seq{}", l + 1), mean));
    }
    let report = emit_report(
        std::slice::from_ref(&ranked),
        clusters.total(),
        clusters.len(),
        cfg.output,
    )?;
    let stdout = with_pairs(report, &pairs, cfg.output, &mut notes)?;
    Ok(Outcome { stdout, notes })
}

fn optimal(cfg: &RunConfig, trial: &TrialConfig) -> Result<Outcome, CliError> {
    let s = trial.sequences();
    let geometry = build_geometry(s)?;
    let (fit, count) = match &cfg.sizes {
        SizeInput::List(l) => {
            let clusters = ClusterSet::new(l.clone())?;
            (fit_regression(trial, &clusters), Some(clusters.len()))
        }
        SizeInput::Moments { mean, cv } => {
            let lambda = trial.lambda().ok_or_else(|| {
                CliError::parse(
                    Some("icc"),
                    Origin::Flag,
                    "moment approximations need icc > 0",
                )
            })?;
            let m = moment_summary(&SizeMoments::new(*mean, *cv)?, lambda, cfg.periods)?;
            let fit = RegressionFit {
                w: m.w_second,
                beta: m.w_beta / m.w_second,
                alpha: 0.0,
                residuals: Vec::new(),
                corr: 1.0,
            };
            (fit, cfg.clusters)
        }
    };
    let constants = ApproxConstants::new(&fit, &geometry)?;
    let k: Vec<f64> = match (&cfg.alloc, count) {
        (Some(a), Some(c)) => {
            let mut k = vec![0.0; s];
            for &l in a {
                k[l - 1] += 1.0 / c as f64;
            }
            k
        }
        (None, Some(c)) => balanced_k(c, s),
        _ => vec![1.0 / s as f64; s],
    };
    let k = DVector::from_vec(k);
    let design = optimal_p(&constants, &geometry, &k);
    let mut pairs = vec![
        ("W".to_string(), num(fit.w)),
        ("beta".to_string(), num(fit.beta)),
        ("W_beta".to_string(), num(fit.w_beta())),
        ("h1".to_string(), num(constants.h1)),
        ("h2".to_string(), num(constants.h2)),
        ("gamma".to_string(), num(constants.gamma)),
        ("h3".to_string(), num(constants.h3)),
        ("K".to_string(), vector(k.as_slice())),
        ("a".to_string(), num(design.a)),
        ("b".to_string(), num(design.b)),
        ("P_opt".to_string(), vector(design.p_opt.as_slice())),
        ("V_opt".to_string(), num(design.v_opt)),
        ("feasible".to_string(), design.feasible.to_string()),
    ];
    if let Some(c) = &design.constrained {
        pairs.push(("P_constrained".to_string(), vector(c.p.as_slice())));
        pairs.push(("V_constrained".to_string(), num(c.v)));
    }
    Ok(Outcome {
        stdout: emit_pairs(&pairs, cfg.output)?,
        notes: Vec::new(),
    })
}

fn enumerate_cmd(cfg: &RunConfig, trial: &TrialConfig) -> Result<Outcome, CliError> {
    let clusters = cluster_set(cfg)?;
    let scheme = SearchScheme {
        mirror_dedup: cfg.mirror_dedup,
        top_k_exact: cfg.top_k,
        ..SearchScheme::exhaustive()
    };
    let mut ranked = enumerate(&clusters, trial, &scheme)?;
    let notes = vec![format!("{} estimable allocations", ranked.len())];
    if let Some(sc) = cfg.scatter {
        return Ok(Outcome {
            stdout: emit_scatter(&ranked, sc)?,
            notes,
        });
    }
    ranked.truncate(cfg.top_k);
    Ok(Outcome {
        stdout: emit_report(&ranked, clusters.total(), clusters.len(), cfg.output)?,
        notes,
    })
}

fn sample_cmd(cfg: &RunConfig, trial: &TrialConfig, seed: u64) -> Result<Outcome, CliError> {
    let clusters = cluster_set(cfg)?;
    let scheme = scheme_for(cfg, seed)?;
    let draws = sample(&clusters, trial, &scheme)?;
    let mut notes = vec![format!("{} estimable draws of {}", draws.len(), cfg.reps)];
    if let Some(sc) = cfg.scatter {
        return Ok(Outcome {
            stdout: emit_scatter(&draws, sc)?,
            notes,
        });
    }
    let mut distinct = rank_distinct(draws);
    notes.push(format!("{} distinct allocations", distinct.len()));
    distinct.truncate(cfg.top_k);
    attach_exact(trial, &clusters, &mut distinct, cfg.top_k)?;
    Ok(Outcome {
        stdout: emit_report(&distinct, clusters.total(), clusters.len(), cfg.output)?,
        notes,
    })
}

fn recommend_cmd(cfg: &RunConfig, trial: &TrialConfig, seed: u64) -> Result<Outcome, CliError> {
    let clusters = cluster_set(cfg)?;
    let scheme = scheme_for(cfg, seed)?;
    let rec = recommend(&clusters, trial, &scheme, cfg.threshold)?;
    let a = &rec.audit;
    let mut pairs = vec![
        ("seed".to_string(), a.seed.to_string()),
        ("threshold".to_string(), a.threshold.to_string()),
        ("reps".to_string(), a.reps.to_string()),
        ("estimable_draws".to_string(), a.draws.to_string()),
        ("qualifiers".to_string(), a.qualifiers.to_string()),
        ("best_efficiency".to_string(), num(a.best_efficiency)),
    ];
    for (level, count) in &a.tally {
        pairs.push((format!("below_{level}"), count.to_string()));
    }
    let mut notes = Vec::new();
    let report = emit_report(
        std::slice::from_ref(&rec.choice),
        clusters.total(),
        clusters.len(),
        cfg.output,
    )?;
    let stdout = with_pairs(report, &pairs, cfg.output, &mut notes)?;
    Ok(Outcome { stdout, notes })
}

fn moments_cmd(cfg: &RunConfig, trial: &TrialConfig) -> Result<Outcome, CliError> {
    let lambda = trial.lambda().ok_or_else(|| {
        CliError::parse(
            Some("icc"),
            Origin::Flag,
            "moment approximations need icc > 0",
        )
    })?;
    let (moments, exact) = match &cfg.sizes {
        SizeInput::Moments { mean, cv } => (SizeMoments::new(*mean, *cv)?, None),
        SizeInput::List(l) => {
            let clusters = ClusterSet::new(l.clone())?;
            let m = SizeMoments::new(clusters.mean(), clusters.cv())?.with_clusters(clusters.len());
            (m, Some(fit_regression(trial, &clusters)))
        }
    };
    let s = moment_summary(&moments, lambda, cfg.periods)?;
    let mut pairs = vec![
        ("W_first".to_string(), format!("{:.4}", s.w_first)),
        ("W_second".to_string(), format!("{:.4}", s.w_second)),
        ("W_beta".to_string(), format!("{:.4}", s.w_beta)),
    ];
    if let Some(fit) = exact {
        pairs.push(("W_exact".to_string(), format!("{:.4}", fit.w)));
        pairs.push(("W_beta_exact".to_string(), format!("{:.4}", fit.w_beta())));
    }
    Ok(Outcome {
        stdout: emit_pairs(&pairs, cfg.output)?,
        notes: Vec::new(),
    })
}

pub fn execute(cfg: &RunConfig, env_seed: Option<&str>) -> Result<Outcome, CliError> {
    let trial = trial_config(cfg)?;
    let mut out = match cfg.command {
        Command::Analyze => analyze(cfg, &trial)?,
        Command::Optimal => optimal(cfg, &trial)?,
        Command::Enumerate => enumerate_cmd(cfg, &trial)?,
        Command::Moments => moments_cmd(cfg, &trial)?,
        Command::Sample | Command::Recommend => {
            let (seed, source) = resolve_seed(cfg, env_seed)?;
            let mut out = if cfg.command == Command::Sample {
                sample_cmd(cfg, &trial, seed)?
            } else {
                recommend_cmd(cfg, &trial, seed)?
            };
            out.notes
                .insert(0, format!("seed = {seed} (from {source})"));
            out
        }
    };
    if let (Correlation::Icc(_), Some(l)) = (cfg.correlation, trial.lambda()) {
        out.notes.push(format!("lambda = {l:.6} (from icc)"));
    }
    Ok(out)
}
