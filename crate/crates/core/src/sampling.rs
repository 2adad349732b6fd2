//! Random candidate-set selection (Type 0–3 rules), the random-then-greedy
//! pick, and its exact selection law.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Identifier recorded with every run so traces can be reproduced.
pub const GENERATOR_ID: &str = "chacha8-rand_chacha-0.9";

/// Stream used by train/test splitting.
pub const SPLIT_STREAM: u64 = 0;
/// Stream used by a training run.
pub const TRAIN_STREAM: u64 = 1;
/// Stream used by the MCA multistart estimator.
pub const GEOMETRY_STREAM: u64 = 2;

/// Seeded 64-bit generator with independent streams.
#[derive(Debug, Clone)]
pub struct RunRng(ChaCha8Rng);

impl RunRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }
}

impl RngCore for RunRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Moves a uniform random `k`-subset of `pool` (without replacement) into
/// `pool[..k]` by partial Fisher–Yates.
pub fn partial_shuffle<R: Rng + ?Sized>(pool: &mut [usize], k: usize, rng: &mut R) {
    let n = pool.len();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
}

/// A partition {I_g} of the learner indices 0..K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let k: usize = groups.iter().map(Vec::len).sum();
        let mut group_of = vec![usize::MAX; k];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyGroup(g));
            }
            for &j in members {
                if j >= k || group_of[j] != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "groups do not partition 0..{k} (index {j})"
                    )));
                }
                group_of[j] = g;
            }
        }
        Ok(Self { groups, group_of })
    }

    /// Consecutive groups with the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        Self::new(groups)
    }

    pub fn singletons(k: usize) -> Self {
        Self::new((0..k).map(|j| vec![j]).collect()).expect("singletons partition")
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_items(&self) -> usize {
        self.group_of.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.group_of[j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// All learners.
    Type0,
    /// `t` learners uniformly without replacement.
    Type1 { t: usize },
    /// One group uniformly at random.
    Type2,
    /// `t` groups uniformly without replacement.
    Type3 { t: usize },
}

impl SelectionRule {
    pub fn from_kind(kind: &str, t: Option<usize>) -> Result<Self> {
        let need_t = || t.ok_or_else(|| Error::InvalidArgument(format!("rule {kind} needs --t")));
        match kind {
            "type0" => Ok(Self::Type0),
            "type1" => Ok(Self::Type1 { t: need_t()? }),
            "type2" => Ok(Self::Type2),
            "type3" => Ok(Self::Type3 { t: need_t()? }),
            other => Err(Error::InvalidArgument(format!("unknown selection rule {other:?}"))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Type0 => "type0",
            Self::Type1 { .. } => "type1",
            Self::Type2 => "type2",
            Self::Type3 { .. } => "type3",
        }
    }

    /// Type 2 is Type 3 with a single group.
    pub fn normalized(self) -> Self {
        match self {
            Self::Type2 => Self::Type3 { t: 1 },
            other => other,
        }
    }

    /// Checks `t` against K learners and G groups.
    pub fn validate(&self, k: usize, g: usize) -> Result<()> {
        match *self {
            Self::Type1 { t } if t == 0 || t > k => Err(Error::InvalidArgument(format!(
                "type1 needs 1 <= t <= K = {k}, got {t}"
            ))),
            Self::Type3 { t } if t == 0 || t > g => Err(Error::InvalidArgument(format!(
                "type3 needs 1 <= t <= G = {g}, got {t}"
            ))),
            Self::Type2 if g == 0 => Err(Error::InvalidArgument("type2 needs at least one group".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Type1 { t } | Self::Type3 { t } => write!(f, "{}(t={t})", self.kind()),
            _ => f.write_str(self.kind()),
        }
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((kind, t)) => {
                let t = t.parse().map_err(|_| Error::InvalidArgument(format!("bad t in {s:?}")))?;
                Self::from_kind(kind, Some(t))
            }
            None => Self::from_kind(s, None),
        }
    }
}

/// The random set J drawn at one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateSet {
    All,
    /// Individual learner indices.
    Learners(Vec<usize>),
    /// Group indices; J is the union of their members.
    Groups(Vec<usize>),
}

impl CandidateSet {
    /// Materializes J as sorted learner indices.
    pub fn learners(&self, partition: &Partition) -> Vec<usize> {
        let mut out: Vec<usize> = match self {
            Self::All => (0..partition.n_items()).collect(),
            Self::Learners(js) => js.clone(),
            Self::Groups(gs) => gs.iter().flat_map(|&g| partition.group(g).iter().copied()).collect(),
        };
        out.sort_unstable();
        out
    }
}

/// Draws candidate sets; keeps its index pools between draws so each draw
/// costs O(t).
#[derive(Debug, Clone)]
pub struct CandidateSampler {
    rule: SelectionRule,
    learner_pool: Vec<usize>,
    group_pool: Vec<usize>,
}

impl CandidateSampler {
    pub fn new(rule: SelectionRule, k: usize, g: usize) -> Result<Self> {
        rule.validate(k, g)?;
        let rule = rule.normalized();
        let learner_pool = if matches!(rule, SelectionRule::Type1 { .. }) { (0..k).collect() } else { Vec::new() };
        let group_pool = if matches!(rule, SelectionRule::Type3 { .. }) { (0..g).collect() } else { Vec::new() };
        Ok(Self { rule, learner_pool, group_pool })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> CandidateSet {
        match self.rule {
            SelectionRule::Type0 => CandidateSet::All,
            SelectionRule::Type1 { t } => {
                partial_shuffle(&mut self.learner_pool, t, rng);
                CandidateSet::Learners(self.learner_pool[..t].to_vec())
            }
            SelectionRule::Type3 { t } => {
                partial_shuffle(&mut self.group_pool, t, rng);
                CandidateSet::Groups(self.group_pool[..t].to_vec())
            }
            SelectionRule::Type2 => unreachable!("normalized to type3"),
        }
    }
}

/// One-shot draw of a candidate set for K learners and G groups.
pub fn sample_candidates<R: Rng + ?Sized>(
    rule: SelectionRule,
    k: usize,
    g: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    Ok(CandidateSampler::new(rule, k, g)?.sample(rng))
}

/// γ over ranks 1..=K, stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPmf(Vec<f64>);

impl SelectionPmf {
    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    /// Probability of rank `j` (1-based).
    pub fn rank(&self, j: usize) -> f64 {
        self.0[j - 1]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// γ_t^K(j) = C(K−j, t−1) / C(K, t): the probability that the j-th largest
/// entry is returned when t of K entries are drawn without replacement.
///
/// Uses γ(1) = t/K and γ(j+1)/γ(j) = (K−j−t+1)/(K−j), which never forms a
/// factorial.
pub fn selection_pmf(k: usize, t: usize) -> Result<SelectionPmf> {
    if t == 0 || t > k {
        return Err(Error::InvalidArgument(format!("selection pmf needs 1 <= t <= K, got t={t}, K={k}")));
    }
    let mut p = vec![0.0; k];
    p[0] = t as f64 / k as f64;
    for j in 1..k {
        // rank j (1-based) -> j+1
        let num = (k - j + 1) as f64 - t as f64;
        if num <= 0.0 {
            break;
        }
        // the ratio is below 1, so the product cannot round upwards
        p[j] = p[j - 1] * (num / (k - j) as f64);
    }
    Ok(SelectionPmf(p))
}

/// Density of Beta(1, t): t (1 − q)^{t−1}.
pub fn beta_limit_pdf(q: f64, t: usize) -> f64 {
    t as f64 * (1.0 - q).powi(t as i32 - 1)
}

/// Random-then-greedy pick: draws J by `rule` and returns the index of the
/// largest |a_j| in J (smallest index on ties) and that magnitude.
pub fn rtg_pick<R: Rng + ?Sized>(
    a: &[f64],
    rule: SelectionRule,
    partition: &Partition,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("rtg_pick on an empty vector".into()));
    }
    if partition.n_items() != a.len() {
        return Err(Error::Dimension(format!(
            "partition covers {} items, vector has {}",
            partition.n_items(),
            a.len()
        )));
    }
    let set = sample_candidates(rule, a.len(), partition.n_groups(), rng)?;
    Ok(argmax_abs(a, set.learners(partition)))
}

/// argmax |a_j| over `indices`, smallest index on ties.
pub(crate) fn argmax_abs(a: &[f64], indices: impl IntoIterator<Item = usize>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for j in indices {
        let m = a[j].abs();
        if m > best.1 || (m == best.1 && j < best.0) {
            best = (j, m);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn pmf_k4_t2() {
        let p = selection_pmf(4, 2).unwrap();
        let expect = [0.5, 1.0 / 3.0, 1.0 / 6.0, 0.0];
        for (a, b) in p.probabilities().iter().zip(expect) {
            assert!(close(*a, b), "{a} vs {b}");
        }
    }

    #[test]
    fn pmf_edge_cases() {
        let p = selection_pmf(7, 7).unwrap();
        assert_eq!(p.rank(1), 1.0);
        assert!(p.probabilities()[1..].iter().all(|&x| x == 0.0));
        let p = selection_pmf(9, 1).unwrap();
        assert!(p.probabilities().iter().all(|&x| close(x, 1.0 / 9.0)));
        assert!(selection_pmf(3, 0).is_err());
        assert!(selection_pmf(3, 4).is_err());
    }

    #[test]
    fn pmf_large_k_is_normalized_and_monotone() {
        for (k, t) in [(1_000_000, 1), (1_000_000, 37), (1_000_000, 1000), (5000, 4999)] {
            let p = selection_pmf(k, t).unwrap();
            let s: f64 = crate::numeric::pairwise_sum(p.probabilities());
            assert!((s - 1.0).abs() < 1e-12, "K={k} t={t} sum={s}");
            assert!(p.probabilities().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn beta_pdf_values() {
        for q in [0.01, 0.3, 0.99] {
            assert_eq!(beta_limit_pdf(q, 1), 1.0);
        }
        assert!((beta_limit_pdf(0.1, 10) - 3.874_204_89).abs() < 1e-8);
    }

    #[test]
    fn type0_and_full_type1() {
        let mut rng = RunRng::new(1, TRAIN_STREAM);
        let p = Partition::singletons(5);
        assert_eq!(sample_candidates(SelectionRule::Type0, 5, 5, &mut rng).unwrap(), CandidateSet::All);
        for seed in 0..5 {
            let mut rng = RunRng::new(seed, TRAIN_STREAM);
            let set = sample_candidates(SelectionRule::Type1 { t: 5 }, 5, 5, &mut rng).unwrap();
            assert_eq!(set.learners(&p), vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn type3_is_reproducible_and_distinct() {
        let draw = || {
            let mut rng = RunRng::new(99, TRAIN_STREAM);
            let mut s = CandidateSampler::new(SelectionRule::Type3 { t: 2 }, 8, 4).unwrap();
            (0..20).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        let a = draw();
        assert_eq!(a, draw());
        for set in &a {
            let CandidateSet::Groups(gs) = set else { panic!("expected groups") };
            assert_eq!(gs.len(), 2);
            assert_ne!(gs[0], gs[1]);
            assert!(gs.iter().all(|&g| g < 4));
        }
    }

    #[test]
    fn rule_validation() {
        assert!(SelectionRule::Type1 { t: 0 }.validate(5, 2).is_err());
        assert!(SelectionRule::Type1 { t: 6 }.validate(5, 2).is_err());
        assert!(SelectionRule::Type3 { t: 3 }.validate(5, 2).is_err());
        assert!(SelectionRule::Type3 { t: 2 }.validate(5, 2).is_ok());
        assert_eq!("type3:4".parse::<SelectionRule>().unwrap(), SelectionRule::Type3 { t: 4 });
        assert!("type1".parse::<SelectionRule>().is_err());
    }

    #[test]
    fn rtg_type0_is_global_max() {
        let mut rng = RunRng::new(0, 0);
        let p = Partition::singletons(3);
        let (j, m) = rtg_pick(&[1.0, -3.0, 2.0], SelectionRule::Type0, &p, &mut rng).unwrap();
        assert_eq!((j, m), (1, 3.0));
    }

    #[test]
    fn rtg_ties_take_smallest_index() {
        let mut rng = RunRng::new(0, 0);
        let p = Partition::singletons(4);
        let (j, _) = rtg_pick(&[2.0, -2.0, 1.0, 2.0], SelectionRule::Type0, &p, &mut rng).unwrap();
        assert_eq!(j, 0);
    }

    #[test]
    fn rtg_type2_picks_each_group_max_half_the_time() {
        let a = [1.0, -3.0, 2.0];
        let p = Partition::new(vec![vec![0, 1], vec![2]]).unwrap();
        let mut rng = RunRng::new(4, 0);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| rtg_pick(&a, SelectionRule::Type2, &p, &mut rng).unwrap().0 == 1)
            .count();
        assert!((hits as f64 / trials as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn partial_shuffle_is_uniform_over_pairs() {
        let mut rng = RunRng::new(17, 0);
        let mut pool: Vec<usize> = (0..4).collect();
        let mut counts = [[0usize; 4]; 4];
        let trials = 60_000;
        for _ in 0..trials {
            partial_shuffle(&mut pool, 2, &mut rng);
            counts[pool[0]][pool[1]] += 1;
        }
        for (a, row) in counts.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                if a == b {
                    assert_eq!(c, 0);
                } else {
                    assert!((c as f64 / trials as f64 - 1.0 / 12.0).abs() < 0.01);
                }
            }
        }
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(Partition::new(vec![vec![0], vec![]]).is_err());
        assert!(Partition::new(vec![vec![0, 5]]).is_err());
        let p = Partition::from_sizes(&[2, 1]).unwrap();
        assert_eq!(p.group(1), &[2]);
        assert_eq!(p.group_of(1), 0);
    }
}
