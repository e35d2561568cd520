//! Cluster-to-sequence allocations, their canonical form, and the per-sequence
//! profile (`P`, `K`, `Q`, `W`, `a`, `b`) every precision formula consumes.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::config::{ClusterSet, TrialConfig};
use crate::error::{Result, SwdError};
use crate::geometry::mirror_sum;

/// Sequence index (1-based) for each cluster, in cluster order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation {
    assignment: Vec<usize>,
}

impl Allocation {
    pub fn new(assignment: Vec<usize>, sequences: usize) -> Result<Self> {
        if let Some((i, &l)) = assignment
            .iter()
            .enumerate()
            .find(|(_, &l)| l == 0 || l > sequences)
        {
            return Err(SwdError::InvalidInput(format!(
                "cluster {} is assigned to sequence {l}, outside 1..={sequences}",
                i + 1
            )));
        }
        Ok(Allocation { assignment })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Cluster on sequence `l` moves to `S + 1 - l`.
    pub fn mirror(&self, sequences: usize) -> Allocation {
        Allocation {
            assignment: self.assignment.iter().map(|&l| sequences + 1 - l).collect(),
        }
    }

    pub fn canonical(
        &self,
        clusters: &ClusterSet,
        sequences: usize,
    ) -> Result<CanonicalAllocation> {
        check_len(self, clusters)?;
        let mut groups = vec![Vec::new(); sequences];
        for (&n, &l) in clusters.sizes().iter().zip(&self.assignment) {
            groups[l - 1].push(n);
        }
        Ok(CanonicalAllocation::from_groups(groups))
    }

    /// `(size, sequence)` for each cluster.
    pub(crate) fn members<'a>(
        &'a self,
        clusters: &'a ClusterSet,
    ) -> impl Iterator<Item = (u64, usize)> + 'a {
        clusters
            .sizes()
            .iter()
            .copied()
            .zip(self.assignment.iter().copied())
    }
}

pub(crate) fn check_len(alloc: &Allocation, clusters: &ClusterSet) -> Result<()> {
    if alloc.len() != clusters.len() {
        return Err(SwdError::InvalidInput(format!(
            "allocation lists {} clusters but the cluster set has {}",
            alloc.len(),
            clusters.len()
        )));
    }
    Ok(())
}

/// Allocation up to permutation of equal-sized clusters: the multiset of sizes
/// on each sequence, each sorted in descending order. Written `4,4,2;6;6,6`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalAllocation {
    groups: Vec<Vec<u64>>,
}

impl CanonicalAllocation {
    pub fn from_groups(mut groups: Vec<Vec<u64>>) -> Self {
        for g in &mut groups {
            g.sort_unstable_by(|a, b| b.cmp(a));
        }
        CanonicalAllocation { groups }
    }

    pub fn groups(&self) -> &[Vec<u64>] {
        &self.groups
    }

    pub fn sequences(&self) -> usize {
        self.groups.len()
    }

    pub fn mirror(&self) -> CanonicalAllocation {
        CanonicalAllocation {
            groups: self.groups.iter().rev().cloned().collect(),
        }
    }

    /// Number of sequences holding at least one cluster.
    pub fn occupied(&self) -> usize {
        self.groups.iter().filter(|g| !g.is_empty()).count()
    }

    pub fn cluster_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Concrete allocation over `clusters`, taking equal-sized clusters in index order.
    pub fn to_allocation(&self, clusters: &ClusterSet) -> Result<Allocation> {
        let mut assignment = vec![0usize; clusters.len()];
        for (l, group) in self.groups.iter().enumerate() {
            for &n in group {
                let slot = clusters
                    .sizes()
                    .iter()
                    .enumerate()
                    .position(|(i, &m)| m == n && assignment[i] == 0)
                    .ok_or_else(|| {
                        SwdError::InvalidInput(format!(
                            "allocation {self} uses more clusters of size {n} than the cluster set provides"
                        ))
                    })?;
                assignment[slot] = l + 1;
            }
        }
        if let Some(i) = assignment.iter().position(|&l| l == 0) {
            return Err(SwdError::InvalidInput(format!(
                "allocation {self} leaves cluster {} (size {}) unassigned",
                i + 1,
                clusters.sizes()[i]
            )));
        }
        Allocation::new(assignment, self.groups.len())
    }

    pub(crate) fn members(&self) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(l, g)| g.iter().map(move |&n| (n, l + 1)))
    }
}

impl fmt::Display for CanonicalAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, g) in self.groups.iter().enumerate() {
            if l > 0 {
                f.write_str(";")?;
            }
            for (i, n) in g.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{n}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for CanonicalAllocation {
    type Err = SwdError;

    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split(';')
            .map(|g| {
                g.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<u64>().map_err(|_| {
                            SwdError::InvalidInput(format!(
                                "bad cluster size {t:?} in allocation {s:?}"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CanonicalAllocation::from_groups(groups))
    }
}

/// Per-sequence proportions of individuals (`p`), clusters (`k`) and
/// `q`-weights, with `W = sum q_i`, `b = K^T z` and `a = K^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProfile {
    pub p: DVector<f64>,
    pub k: DVector<f64>,
    pub q: DVector<f64>,
    pub w: f64,
    pub b: f64,
    pub a: f64,
}

impl AllocationProfile {
    pub(crate) fn from_members(
        config: &TrialConfig,
        clusters: &ClusterSet,
        sequences: usize,
        members: impl Iterator<Item = (u64, usize)>,
    ) -> Self {
        let n = clusters.total() as f64;
        let c = clusters.len() as f64;
        let mut p = DVector::zeros(sequences);
        let mut k = DVector::zeros(sequences);
        let mut q = DVector::zeros(sequences);
        for (size, l) in members {
            let pi = size as f64 / n;
            p[l - 1] += pi;
            k[l - 1] += 1.0;
            q[l - 1] += pi * config.cluster_weight(size);
        }
        k /= c;
        let w = config.total_weight(clusters);
        let centre = (sequences as f64 + 1.0) / 2.0;
        let b = mirror_sum(sequences, |l| k[l] * ((l + 1) as f64 - centre));
        let a = mirror_sum(sequences, |l| k[l] * ((l + 1) as f64 - centre).powi(2));
        AllocationProfile { p, k, q, w, b, a }
    }

    pub fn from_canonical(
        config: &TrialConfig,
        clusters: &ClusterSet,
        alloc: &CanonicalAllocation,
    ) -> Self {
        Self::from_members(config, clusters, alloc.sequences(), alloc.members())
    }
}

pub fn derive_profile(
    config: &TrialConfig,
    clusters: &ClusterSet,
    alloc: &Allocation,
) -> Result<AllocationProfile> {
    check_len(alloc, clusters)?;
    Ok(AllocationProfile::from_members(
        config,
        clusters,
        config.sequences(),
        alloc.members(clusters),
    ))
}
