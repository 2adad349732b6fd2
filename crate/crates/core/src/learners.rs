//! Weak-learner bases: the implicit normalized stump matrix used for training
//! and a dense matrix for small verification designs.
//!
//! A basis is a matrix B (n × K) with unit-norm columns and a partition of its
//! columns into groups. The stump basis never materializes B; inner products
//! ⟨B_{:j}, v⟩ for a whole group come from one prefix-sum pass over the
//! feature's sorted values.

use crate::data::{Dataset, SplitCandidates};
use crate::error::{Error, Result};
use crate::numeric::{dot, norm2, pairwise_sum};
use crate::sampling::{CandidateSet, Partition};

/// Tolerance on ‖B_{:j}‖₂ = 1 for dense bases.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Best learner of a scanned set: `score = ⟨B_{:j}, v⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateBest {
    pub learner: usize,
    pub score: f64,
}

impl CandidateBest {
    /// Larger |score| wins; equal magnitudes go to the smaller index.
    pub fn better_than(&self, other: &Self) -> bool {
        let (a, b) = (self.score.abs(), other.score.abs());
        a > b || (a == b && self.learner < other.learner)
    }

    fn pick(best: Option<Self>, cand: Self) -> Option<Self> {
        match best {
            Some(b) if !cand.better_than(&b) => Some(b),
            _ => Some(cand),
        }
    }
}

pub trait WeakLearners {
    fn n_samples(&self) -> usize;

    fn n_learners(&self) -> usize;

    fn partition(&self) -> &Partition;

    /// Column B_{:j}.
    fn column(&self, j: usize) -> Result<Vec<f64>>;

    /// Best learner of group `g` for `v`.
    fn best_in_group(&self, g: usize, v: &[f64]) -> Result<CandidateBest>;

    /// Best learner among explicit learner indices.
    fn best_among(&self, learners: &[usize], v: &[f64]) -> Result<CandidateBest>;

    /// out += scale · B_{:j}
    fn add_column(&self, j: usize, scale: f64, out: &mut [f64]) -> Result<()> {
        let col = self.column(j)?;
        for (o, c) in out.iter_mut().zip(col) {
            *o += scale * c;
        }
        Ok(())
    }

    fn n_groups(&self) -> usize {
        self.partition().n_groups()
    }

    /// Best learner over the union of the given groups.
    fn best_in_groups(&self, groups: &[usize], v: &[f64]) -> Result<CandidateBest> {
        let mut best = None;
        for &g in groups {
            best = CandidateBest::pick(best, self.best_in_group(g, v)?);
        }
        best.ok_or_else(|| Error::InvalidArgument("empty candidate set".into()))
    }

    /// Best learner of the candidate set J.
    fn best_in_set(&self, set: &CandidateSet, v: &[f64]) -> Result<CandidateBest> {
        match set {
            CandidateSet::All => {
                let all: Vec<usize> = (0..self.n_groups()).collect();
                self.best_in_groups(&all, v)
            }
            CandidateSet::Groups(gs) => self.best_in_groups(gs, v),
            CandidateSet::Learners(js) => self.best_among(js, v),
        }
    }
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("vector of length {} for {n} samples", v.len())));
    }
    Ok(())
}

/// A stump b(x; g, s) = +1 if x_g ≤ s, −1 otherwise (before normalization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
}

impl Stump {
    pub fn sign(&self, x_g: f64) -> f64 {
        if x_g <= self.threshold {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
struct FeatureScan {
    feature: usize,
    thresholds: Vec<f64>,
    /// Nonzero (sample, value) pairs sorted by value, then by sample.
    sorted: Vec<(u32, f64)>,
    /// Number of samples whose value is 0.
    zeros: usize,
}

/// Implicit design matrix of all stumps, one group per feature that has at
/// least one threshold. Entries are ±1/√n.
#[derive(Debug, Clone)]
pub struct StumpBasis {
    n: usize,
    scale: f64,
    scans: Vec<FeatureScan>,
    /// First learner index of each group, plus K at the end.
    offsets: Vec<usize>,
    partition: Partition,
}

impl StumpBasis {
    pub fn new(d: &Dataset, splits: &SplitCandidates) -> Result<Self> {
        if splits.n_features() != d.n_features() {
            return Err(Error::Dimension(format!(
                "split candidates for {} features, dataset has {}",
                splits.n_features(),
                d.n_features()
            )));
        }
        let n = d.n_samples();
        if u32::try_from(n).is_err() {
            return Err(Error::TooLarge(format!("{n} samples")));
        }
        let mut scans = Vec::new();
        let mut offsets = vec![0];
        for (g, col) in d.feature_columns().into_iter().enumerate() {
            let thresholds = splits.feature(g);
            if thresholds.is_empty() {
                continue;
            }
            let zeros = n - col.len();
            let mut sorted: Vec<(u32, f64)> = col.into_iter().map(|(i, v)| (i as u32, v)).collect();
            sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            offsets.push(offsets.last().unwrap() + thresholds.len());
            scans.push(FeatureScan { feature: g, thresholds: thresholds.to_vec(), sorted, zeros });
        }
        let k = *offsets.last().unwrap();
        if k == 0 {
            return Err(Error::EmptyBasis);
        }
        let partition = Partition::new(offsets.windows(2).map(|w| (w[0]..w[1]).collect()).collect())?;
        Ok(Self { n, scale: 1.0 / (n as f64).sqrt(), scans, offsets, partition })
    }

    /// The normalization 1/√n applied to every entry.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn stump(&self, j: usize) -> Result<Stump> {
        let (g, rank) = self.locate(j)?;
        let scan = &self.scans[g];
        Ok(Stump { feature: scan.feature, threshold: scan.thresholds[rank] })
    }

    /// Feature index behind group `g`.
    pub fn group_feature(&self, g: usize) -> usize {
        self.scans[g].feature
    }

    fn locate(&self, j: usize) -> Result<(usize, usize)> {
        let k = self.n_learners();
        if j >= k {
            return Err(Error::LearnerOutOfRange { index: j, count: k });
        }
        let g = self.partition.group_of(j);
        Ok((g, j - self.offsets[g]))
    }

    /// Scores ⟨B_{:j}, v⟩ for every learner of group `g`, via
    /// ⟨B_{:j}, v⟩ = (2 Σ_{x_ig ≤ s} v_i − Σ_i v_i) / √n.
    fn group_scores(&self, g: usize, v: &[f64], total: f64, out: &mut Vec<f64>) {
        let scan = &self.scans[g];
        out.clear();
        let nonzero_mass: f64 = pairwise_sum(&scan.sorted.iter().map(|&(i, _)| v[i as usize]).collect::<Vec<_>>());
        let zero_mass = if scan.zeros > 0 { total - nonzero_mass } else { 0.0 };
        let mut below = 0.0;
        let mut zero_added = false;
        let mut pos = 0;
        for &s in &scan.thresholds {
            while pos < scan.sorted.len() && scan.sorted[pos].1 <= s {
                let (i, val) = scan.sorted[pos];
                if !zero_added && val > 0.0 {
                    below += zero_mass;
                    zero_added = true;
                }
                below += v[i as usize];
                pos += 1;
            }
            if !zero_added && s >= 0.0 {
                below += zero_mass;
                zero_added = true;
            }
            out.push((2.0 * below - total) * self.scale);
        }
    }
}

impl WeakLearners for StumpBasis {
    fn n_samples(&self) -> usize {
        self.n
    }

    fn n_learners(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn column(&self, j: usize) -> Result<Vec<f64>> {
        let (g, rank) = self.locate(j)?;
        let scan = &self.scans[g];
        let s = scan.thresholds[rank];
        let entry = |x: f64| if x <= s { self.scale } else { -self.scale };
        let mut col = vec![entry(0.0); self.n];
        for &(i, val) in &scan.sorted {
            col[i as usize] = entry(val);
        }
        Ok(col)
    }

    fn best_in_group(&self, g: usize, v: &[f64]) -> Result<CandidateBest> {
        check_len(v, self.n)?;
        if g >= self.scans.len() {
            return Err(Error::EmptyGroup(g));
        }
        let total = pairwise_sum(v);
        let mut scores = Vec::new();
        self.group_scores(g, v, total, &mut scores);
        let mut best = None;
        for (rank, &score) in scores.iter().enumerate() {
            best = CandidateBest::pick(best, CandidateBest { learner: self.offsets[g] + rank, score });
        }
        best.ok_or(Error::EmptyGroup(g))
    }

    fn best_in_groups(&self, groups: &[usize], v: &[f64]) -> Result<CandidateBest> {
        check_len(v, self.n)?;
        let total = pairwise_sum(v);
        let mut scores = Vec::new();
        let mut best = None;
        for &g in groups {
            if g >= self.scans.len() {
                return Err(Error::EmptyGroup(g));
            }
            self.group_scores(g, v, total, &mut scores);
            for (rank, &score) in scores.iter().enumerate() {
                best = CandidateBest::pick(best, CandidateBest { learner: self.offsets[g] + rank, score });
            }
        }
        best.ok_or_else(|| Error::InvalidArgument("empty candidate set".into()))
    }

    fn best_among(&self, learners: &[usize], v: &[f64]) -> Result<CandidateBest> {
        check_len(v, self.n)?;
        let mut sorted = learners.to_vec();
        sorted.sort_unstable();
        let total = pairwise_sum(v);
        let mut scores = Vec::new();
        let mut best = None;
        let mut current_group = usize::MAX;
        for j in sorted {
            let (g, rank) = self.locate(j)?;
            if g != current_group {
                self.group_scores(g, v, total, &mut scores);
                current_group = g;
            }
            best = CandidateBest::pick(best, CandidateBest { learner: j, score: scores[rank] });
        }
        best.ok_or_else(|| Error::InvalidArgument("empty candidate set".into()))
    }
}

/// Builds the stump basis for a dataset and its split candidates.
pub fn build_stump_basis(d: &Dataset, splits: &SplitCandidates) -> Result<StumpBasis> {
    StumpBasis::new(d, splits)
}

/// Explicit n × K basis with unit-norm columns.
#[derive(Debug, Clone)]
pub struct DenseBasis {
    n: usize,
    columns: Vec<Vec<f64>>,
    partition: Partition,
}

impl DenseBasis {
    /// Columns must already have unit norm. Every column is its own group.
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        let k = columns.len();
        Self::with_partition(columns, Partition::singletons(k))
    }

    pub fn with_partition(columns: Vec<Vec<f64>>, partition: Partition) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.is_empty() || n == 0 {
            return Err(Error::EmptyBasis);
        }
        if partition.n_items() != columns.len() {
            return Err(Error::Dimension(format!(
                "partition covers {} columns, basis has {}",
                partition.n_items(),
                columns.len()
            )));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Dimension(format!("column {j} has length {}", c.len())));
            }
            let nrm = norm2(c);
            if (nrm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidArgument(format!("column {j} has norm {nrm}, expected 1")));
            }
        }
        Ok(Self { n, columns, partition })
    }

    /// Scales every column to unit norm; zero columns are rejected.
    pub fn normalized(mut columns: Vec<Vec<f64>>) -> Result<Self> {
        for (j, c) in columns.iter_mut().enumerate() {
            let nrm = norm2(c);
            if nrm == 0.0 {
                return Err(Error::InvalidArgument(format!("column {j} is zero")));
            }
            c.iter_mut().for_each(|x| *x /= nrm);
        }
        Self::new(columns)
    }

    /// The p × p identity: an orthonormal design.
    pub fn identity(p: usize) -> Result<Self> {
        Self::new(
            (0..p)
                .map(|j| (0..p).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn into_partitioned(self, partition: Partition) -> Result<Self> {
        Self::with_partition(self.columns, partition)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.columns.len() {
            return Err(Error::LearnerOutOfRange { index: j, count: self.columns.len() });
        }
        Ok(())
    }
}

impl WeakLearners for DenseBasis {
    fn n_samples(&self) -> usize {
        self.n
    }

    fn n_learners(&self) -> usize {
        self.columns.len()
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn column(&self, j: usize) -> Result<Vec<f64>> {
        self.check_index(j)?;
        Ok(self.columns[j].clone())
    }

    fn best_in_group(&self, g: usize, v: &[f64]) -> Result<CandidateBest> {
        if g >= self.partition.n_groups() {
            return Err(Error::EmptyGroup(g));
        }
        self.best_among(self.partition.group(g), v)
    }

    fn best_among(&self, learners: &[usize], v: &[f64]) -> Result<CandidateBest> {
        check_len(v, self.n)?;
        let mut best = None;
        for &j in learners {
            self.check_index(j)?;
            best = CandidateBest::pick(best, CandidateBest { learner: j, score: dot(&self.columns[j], v) });
        }
        best.ok_or_else(|| Error::InvalidArgument("empty candidate set".into()))
    }

    fn add_column(&self, j: usize, scale: f64, out: &mut [f64]) -> Result<()> {
        self.check_index(j)?;
        for (o, c) in out.iter_mut().zip(&self.columns[j]) {
            *o += scale * c;
        }
        Ok(())
    }
}
