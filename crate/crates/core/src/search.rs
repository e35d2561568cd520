//! Exhaustive enumeration and seeded random sampling over allocations, with
//! ranking, efficiency against the closed-form optimum, and the
//! threshold-then-randomize recommendation step.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use nalgebra::DVector;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocation::{AllocationProfile, CanonicalAllocation};
use crate::approx::{ApproxModel, ApproxTerms};
use crate::config::{ClusterSet, TrialConfig};
use crate::error::{Result, SwdError};
use crate::exact::exact_precision_scalar;
use crate::geometry::dot;
use crate::optimal::optimal_p;

pub const DEFAULT_CAP: u128 = 1_000_000;
pub const DEFAULT_TOP_K_EXACT: usize = 100;
/// Efficiency cut points for the recommendation tally.
pub const TALLY_LEVELS: [f64; 4] = [0.90, 0.95, 0.98, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    RandomUnrestricted,
    RandomClusterBalanced,
}

/// Where the `C mod S` clusters left over after an even deal go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtraClusterRule {
    /// Outermost sequences first, in symmetric pairs.
    #[default]
    OuterSymmetric,
    /// Central sequences first, in symmetric pairs.
    InnerSymmetric,
    /// Distinct sequences chosen at random.
    Free,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::RandomUnrestricted => "random-unrestricted",
            SearchMode::RandomClusterBalanced => "random-cluster-balanced",
        })
    }
}

impl FromStr for SearchMode {
    type Err = SwdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "random-unrestricted" | "unrestricted" => Ok(SearchMode::RandomUnrestricted),
            "random-cluster-balanced" | "cluster-balanced" | "balanced" => {
                Ok(SearchMode::RandomClusterBalanced)
            }
            other => Err(SwdError::InvalidInput(format!(
                "unknown search mode {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ExtraClusterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtraClusterRule::OuterSymmetric => "outer",
            ExtraClusterRule::InnerSymmetric => "inner",
            ExtraClusterRule::Free => "free",
        })
    }
}

impl FromStr for ExtraClusterRule {
    type Err = SwdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "outer" | "outer-symmetric" => Ok(ExtraClusterRule::OuterSymmetric),
            "inner" | "inner-symmetric" => Ok(ExtraClusterRule::InnerSymmetric),
            "free" => Ok(ExtraClusterRule::Free),
            other => Err(SwdError::InvalidInput(format!(
                "unknown extra-cluster rule {other:?} (expected outer, inner or free)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchScheme {
    pub mode: SearchMode,
    pub reps: usize,
    pub seed: u64,
    pub mirror_dedup: bool,
    pub extra_rule: ExtraClusterRule,
    pub cap: u128,
    /// How many of the best allocations also get an exact precision.
    pub top_k_exact: usize,
}

impl SearchScheme {
    pub fn exhaustive() -> Self {
        SearchScheme {
            mode: SearchMode::Exhaustive,
            reps: 1,
            seed: 0,
            mirror_dedup: false,
            extra_rule: ExtraClusterRule::default(),
            cap: DEFAULT_CAP,
            top_k_exact: DEFAULT_TOP_K_EXACT,
        }
    }

    pub fn random(mode: SearchMode, reps: usize, seed: u64) -> Self {
        SearchScheme {
            mode,
            reps,
            seed,
            ..Self::exhaustive()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != SearchMode::Exhaustive && self.reps == 0 {
            return Err(SwdError::InvalidInput(
                "random sampling needs at least one repetition".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedAllocation {
    pub allocation: CanonicalAllocation,
    pub p: DVector<f64>,
    pub k: DVector<f64>,
    pub v_approx: f64,
    pub v_exact: Option<f64>,
    /// `v_approx` over the optimum for the same `a`, `b`.
    pub efficiency: f64,
    /// Euclidean distance from `P` to the optimal `P` for the same `K`.
    pub distance: f64,
    /// `2 N P^T z`.
    pub imbalance: f64,
    pub terms: ApproxTerms,
}

/// Optimum value and target `P` for one cluster disposition.
#[derive(Debug, Clone)]
struct KOptimum {
    v_opt: f64,
    target: DVector<f64>,
}

type CountKey = Vec<usize>;

fn count_key(alloc: &CanonicalAllocation) -> CountKey {
    alloc.groups().iter().map(Vec::len).collect()
}

struct Evaluator<'a> {
    config: &'a TrialConfig,
    clusters: &'a ClusterSet,
    model: ApproxModel,
}

struct Partial {
    allocation: CanonicalAllocation,
    profile: AllocationProfile,
    terms: ApproxTerms,
}

impl<'a> Evaluator<'a> {
    fn new(config: &'a TrialConfig, clusters: &'a ClusterSet) -> Result<Self> {
        let model = ApproxModel::new(config, clusters)?;
        if model.fit.w_beta() > 1.0 / config.periods() as f64 + 1e-12 {
            warn!(
                "W beta = {} exceeds 1/T; the approximation is outside its usual range",
                model.fit.w_beta()
            );
        }
        Ok(Evaluator {
            config,
            clusters,
            model,
        })
    }

    fn partial(&self, allocation: CanonicalAllocation) -> Partial {
        let profile = AllocationProfile::from_canonical(self.config, self.clusters, &allocation);
        let terms = self.model.evaluate(&profile);
        Partial {
            allocation,
            profile,
            terms,
        }
    }

    fn optima(&self, partials: &[Partial]) -> BTreeMap<CountKey, KOptimum> {
        let mut keys: BTreeMap<CountKey, DVector<f64>> = BTreeMap::new();
        for p in partials {
            keys.entry(count_key(&p.allocation))
                .or_insert_with(|| p.profile.k.clone());
        }
        keys.into_par_iter()
            .map(|(key, k)| {
                let opt = optimal_p(&self.model.constants, &self.model.geometry, &k);
                let target = opt.target().clone();
                (
                    key,
                    KOptimum {
                        v_opt: opt.v_opt,
                        target,
                    },
                )
            })
            .collect()
    }

    fn finish(&self, partials: Vec<Partial>) -> Vec<RankedAllocation> {
        let optima = self.optima(&partials);
        let n = self.clusters.total() as f64;
        partials
            .into_par_iter()
            .map(|part| {
                let opt = &optima[&count_key(&part.allocation)];
                let v = part.terms.total();
                RankedAllocation {
                    efficiency: v / opt.v_opt,
                    distance: (&part.profile.p - &opt.target).norm(),
                    imbalance: 2.0 * n * dot(&part.profile.p, &self.model.geometry.z),
                    v_approx: v,
                    v_exact: None,
                    allocation: part.allocation,
                    p: part.profile.p,
                    k: part.profile.k,
                    terms: part.terms,
                }
            })
            .collect()
    }
}

/// Number of distinct canonical allocations: for each distinct size with
/// multiplicity `m`, `C(m + S - 1, S - 1)` ways to spread it over sequences.
pub fn canonical_count(clusters: &ClusterSet, sequences: usize) -> u128 {
    size_multiplicities(clusters)
        .iter()
        .map(|&(_, m)| binomial((m + sequences - 1) as u128, (sequences - 1) as u128))
        .fold(1u128, |acc, x| acc.saturating_mul(x))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Distinct sizes in descending order with their multiplicities.
fn size_multiplicities(clusters: &ClusterSet) -> Vec<(u64, usize)> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &n in clusters.sizes() {
        *counts.entry(n).or_default() += 1;
    }
    counts.into_iter().rev().collect()
}

/// Every way to write `m` as an ordered sum of `parts` nonnegative integers.
fn weak_compositions(m: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for x in (0..=left).rev() {
            cur.push(x);
            rec(left - x, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// All canonical allocations of `clusters` over `sequences`, unfiltered.
pub fn canonical_allocations(
    clusters: &ClusterSet,
    sequences: usize,
    cap: u128,
) -> Result<Vec<CanonicalAllocation>> {
    let count = canonical_count(clusters, sequences);
    if count > cap {
        return Err(SwdError::TooLarge { count, cap });
    }
    let per_size: Vec<(u64, Vec<Vec<usize>>)> = size_multiplicities(clusters)
        .into_iter()
        .map(|(n, m)| (n, weak_compositions(m, sequences)))
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; per_size.len()];
    loop {
        let mut groups = vec![Vec::new(); sequences];
        for ((n, comps), &i) in per_size.iter().zip(&idx) {
            for (g, &c) in groups.iter_mut().zip(&comps[i]) {
                g.extend(std::iter::repeat_n(*n, c));
            }
        }
        out.push(CanonicalAllocation::from_groups(groups));
        // odometer over the per-size composition lists
        let mut d = per_size.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < per_size[d].1.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// The member of a mirror pair kept when deduplicating: larger cluster counts
/// read from sequence 1 upward, then the larger canonical form.
pub fn mirror_representative(alloc: &CanonicalAllocation) -> CanonicalAllocation {
    let m = alloc.mirror();
    let (ka, km) = (count_key(alloc), count_key(&m));
    match ka.cmp(&km).then_with(|| alloc.cmp(&m)) {
        std::cmp::Ordering::Less => m,
        _ => alloc.clone(),
    }
}

fn rank_order(a: &RankedAllocation, b: &RankedAllocation) -> std::cmp::Ordering {
    b.v_approx
        .total_cmp(&a.v_approx)
        .then_with(|| a.allocation.cmp(&b.allocation))
}

/// Fills `v_exact` for the first `k` entries.
pub fn attach_exact(
    config: &TrialConfig,
    clusters: &ClusterSet,
    ranked: &mut [RankedAllocation],
    k: usize,
) -> Result<()> {
    let k = k.min(ranked.len());
    ranked[..k].par_iter_mut().try_for_each(|r| {
        let alloc = r.allocation.to_allocation(clusters)?;
        let report = exact_precision_scalar(config, clusters, &alloc)?;
        r.v_exact = Some(report.v_exact);
        Ok(())
    })
}

/// Every estimable canonical allocation, best first.
pub fn enumerate(
    clusters: &ClusterSet,
    config: &TrialConfig,
    scheme: &SearchScheme,
) -> Result<Vec<RankedAllocation>> {
    let s = config.sequences();
    let all = canonical_allocations(clusters, s, scheme.cap)?;
    let total = all.len();
    let evaluator = Evaluator::new(config, clusters)?;
    let partials: Vec<Partial> = all
        .into_par_iter()
        .filter(|c| c.occupied() >= 2)
        .filter(|c| !scheme.mirror_dedup || mirror_representative(c) == *c)
        .map(|c| evaluator.partial(c))
        .collect();
    debug!("{total} canonical allocations, {} kept", partials.len());
    let mut ranked = evaluator.finish(partials);
    ranked.par_sort_by(rank_order);
    attach_exact(config, clusters, &mut ranked, scheme.top_k_exact)?;
    Ok(ranked)
}

/// Sequences (0-based) that receive one extra cluster each.
fn extra_slots(
    rule: ExtraClusterRule,
    s: usize,
    extras: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    if extras == 0 {
        return Vec::new();
    }
    if rule == ExtraClusterRule::Free {
        let mut seqs: Vec<usize> = (0..s).collect();
        seqs.shuffle(rng);
        seqs.truncate(extras);
        return seqs;
    }
    // symmetric pairs ordered from the outside in, plus the middle when S is odd
    let mut pairs: Vec<(usize, usize)> = (0..s / 2).map(|i| (i, s - 1 - i)).collect();
    if rule == ExtraClusterRule::InnerSymmetric {
        pairs.reverse();
    }
    let middle = (s % 2 == 1).then_some(s / 2);
    let mut slots = Vec::with_capacity(extras);
    let mut left = extras;
    if let (Some(mid), true) = (middle, extras % 2 == 1) {
        slots.push(mid);
        left -= 1;
    }
    for &(lo, hi) in &pairs {
        if left >= 2 {
            slots.push(lo);
            slots.push(hi);
            left -= 2;
        } else if left == 1 {
            slots.push(if rng.random_bool(0.5) { lo } else { hi });
            left = 0;
        }
    }
    slots
}

fn draw(clusters: &ClusterSet, s: usize, scheme: &SearchScheme, rep: usize) -> CanonicalAllocation {
    let mut rng = ChaCha8Rng::seed_from_u64(scheme.seed);
    rng.set_stream(rep as u64);
    let sizes = clusters.sizes();
    let mut groups = vec![Vec::new(); s];
    match scheme.mode {
        SearchMode::RandomUnrestricted | SearchMode::Exhaustive => {
            for &n in sizes {
                groups[rng.random_range(0..s)].push(n);
            }
        }
        SearchMode::RandomClusterBalanced => {
            let mut order: Vec<usize> = (0..sizes.len()).collect();
            order.shuffle(&mut rng);
            let mut counts = vec![sizes.len() / s; s];
            for l in extra_slots(scheme.extra_rule, s, sizes.len() % s, &mut rng) {
                counts[l] += 1;
            }
            let mut it = order.into_iter();
            for (g, &c) in groups.iter_mut().zip(&counts) {
                g.extend(it.by_ref().take(c).map(|i| sizes[i]));
            }
        }
    }
    CanonicalAllocation::from_groups(groups)
}

/// One ranked entry per estimable draw, in draw order. Draw `rep` uses the
/// generator seeded with `seed` on stream `rep`, so the output does not depend
/// on the number of threads.
pub fn sample(
    clusters: &ClusterSet,
    config: &TrialConfig,
    scheme: &SearchScheme,
) -> Result<Vec<RankedAllocation>> {
    scheme.validate()?;
    let s = config.sequences();
    let evaluator = Evaluator::new(config, clusters)?;
    let partials: Vec<Partial> = (0..scheme.reps)
        .into_par_iter()
        .map(|rep| draw(clusters, s, scheme, rep))
        .filter(|c| c.occupied() >= 2)
        .map(|c| {
            let c = if scheme.mirror_dedup {
                mirror_representative(&c)
            } else {
                c
            };
            evaluator.partial(c)
        })
        .collect();
    if partials.len() < scheme.reps {
        debug!(
            "{} of {} draws not estimable",
            scheme.reps - partials.len(),
            scheme.reps
        );
    }
    Ok(evaluator.finish(partials))
}

/// Distinct sampled allocations, best first.
pub fn rank_distinct(mut draws: Vec<RankedAllocation>) -> Vec<RankedAllocation> {
    draws.par_sort_by(rank_order);
    draws.dedup_by(|a, b| a.allocation == b.allocation);
    draws
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationAudit {
    pub seed: u64,
    pub threshold: f64,
    pub reps: usize,
    /// Estimable draws considered.
    pub draws: usize,
    pub qualifiers: usize,
    pub best_efficiency: f64,
    /// Draws with efficiency below each of [`TALLY_LEVELS`].
    pub tally: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub choice: RankedAllocation,
    pub audit: RecommendationAudit,
}

/// Samples, keeps draws with efficiency at least `threshold`, and picks one
/// uniformly. The pick uses stream `u64::MAX` of the same seed, which no draw uses.
pub fn recommend(
    clusters: &ClusterSet,
    config: &TrialConfig,
    scheme: &SearchScheme,
    threshold: f64,
) -> Result<Recommendation> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(SwdError::InvalidInput(format!(
            "threshold must be a nonnegative efficiency, got {threshold}"
        )));
    }
    let mut sampling = scheme.clone();
    if sampling.mode == SearchMode::Exhaustive {
        sampling.mode = SearchMode::RandomClusterBalanced;
    }
    let draws = sample(clusters, config, &sampling)?;
    let best = draws
        .iter()
        .map(|d| d.efficiency)
        .fold(f64::NEG_INFINITY, f64::max);
    let tally = TALLY_LEVELS
        .iter()
        .map(|&lvl| (lvl, draws.iter().filter(|d| d.efficiency < lvl).count()))
        .collect();
    let qualifiers: Vec<&RankedAllocation> =
        draws.iter().filter(|d| d.efficiency >= threshold).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scheme.seed);
    rng.set_stream(u64::MAX);
    let choice = (*qualifiers
        .choose(&mut rng)
        .ok_or(SwdError::NoQualifier { threshold, best })?)
    .clone();
    let mut choice = choice;
    attach_exact(config, clusters, std::slice::from_mut(&mut choice), 1)?;
    Ok(Recommendation {
        choice,
        audit: RecommendationAudit {
            seed: scheme.seed,
            threshold,
            reps: scheme.reps,
            draws: draws.len(),
            qualifiers: qualifiers.len(),
            best_efficiency: best,
            tally,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMetrics {
    pub distance: f64,
    pub imbalance: f64,
    /// `N p_l / (C k_l)`; absent for empty sequences.
    pub mean_size: Vec<Option<f64>>,
}

/// Ranks a single allocation, with its exact precision attached.
pub fn evaluate_allocation(
    alloc: &CanonicalAllocation,
    config: &TrialConfig,
    clusters: &ClusterSet,
) -> Result<RankedAllocation> {
    if alloc.sequences() != config.sequences() {
        return Err(SwdError::InvalidInput(format!(
            "allocation {alloc} has {} sequences, the design has {}",
            alloc.sequences(),
            config.sequences()
        )));
    }
    if alloc.occupied() < 2 {
        return Err(SwdError::NonEstimable(alloc.to_string()));
    }
    // validates that the allocation uses exactly these clusters
    alloc.to_allocation(clusters)?;
    let evaluator = Evaluator::new(config, clusters)?;
    let mut ranked = evaluator.finish(vec![evaluator.partial(alloc.clone())]);
    attach_exact(config, clusters, &mut ranked, 1)?;
    Ok(ranked.remove(0))
}

pub fn metrics(
    alloc: &CanonicalAllocation,
    config: &TrialConfig,
    clusters: &ClusterSet,
) -> Result<AllocationMetrics> {
    let r = evaluate_allocation(alloc, config, clusters)?;
    let n = clusters.total() as f64;
    let c = clusters.len() as f64;
    let mean_size =
        r.p.iter()
            .zip(r.k.iter())
            .map(|(&p, &k)| (k > 0.0).then(|| n * p / (c * k)))
            .collect();
    Ok(AllocationMetrics {
        distance: r.distance,
        imbalance: r.imbalance,
        mean_size,
    })
}
