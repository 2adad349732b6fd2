//! The four structured norms tied to the selection rules, their duals, and
//! exact expectations of the random-then-greedy pick.
//!
//! | rule  | norm                                   |
//! |-------|----------------------------------------|
//! | Type0 | ‖a‖_∞                                  |
//! | Type1 | ordered ℓ1 with γ = γ_t^K              |
//! | Type2 | ℓ1,∞ group norm                        |
//! | Type3 | ordered mixed norm with γ = γ_t^G      |

use crate::error::{Error, Result};
use crate::sampling::{selection_pmf, Partition, SelectionRule};

/// Tolerance on Σγ = 1.
pub const GAMMA_SUM_TOL: f64 = 1e-9;

/// Exhaustive enumeration is refused above this many learners or groups.
pub const MAX_ENUMERATION_DIM: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    Infinity,
    OrderedL1 { gamma: Vec<f64> },
    Group { partition: Partition },
    OrderedMixed { partition: Partition, gamma: Vec<f64> },
}

fn validate_gamma(gamma: &[f64]) -> Result<()> {
    if gamma.is_empty() {
        return Err(Error::InvalidArgument("empty weight sequence".into()));
    }
    if gamma.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if gamma.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("weights must be nonincreasing".into()));
    }
    let s: f64 = gamma.iter().sum();
    if (s - 1.0).abs() > GAMMA_SUM_TOL {
        return Err(Error::InvalidArgument(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

impl NormSpec {
    pub fn ordered_l1(gamma: Vec<f64>) -> Result<Self> {
        validate_gamma(&gamma)?;
        Ok(Self::OrderedL1 { gamma })
    }

    pub fn group(partition: Partition) -> Self {
        Self::Group { partition }
    }

    pub fn ordered_mixed(partition: Partition, gamma: Vec<f64>) -> Result<Self> {
        validate_gamma(&gamma)?;
        if gamma.len() != partition.n_groups() {
            return Err(Error::Dimension(format!(
                "{} weights for {} groups",
                gamma.len(),
                partition.n_groups()
            )));
        }
        Ok(Self::OrderedMixed { partition, gamma })
    }

    /// The norm whose value is E|a_ĵ| under `rule`.
    pub fn for_rule(rule: SelectionRule, k: usize, partition: &Partition) -> Result<Self> {
        rule.validate(k, partition.n_groups())?;
        match rule {
            SelectionRule::Type0 => Ok(Self::Infinity),
            SelectionRule::Type1 { t } => Self::ordered_l1(selection_pmf(k, t)?.into_vec()),
            SelectionRule::Type2 => Ok(Self::group(partition.clone())),
            SelectionRule::Type3 { t } => {
                Self::ordered_mixed(partition.clone(), selection_pmf(partition.n_groups(), t)?.into_vec())
            }
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        let expect = match self {
            Self::Infinity => return Ok(()),
            Self::OrderedL1 { gamma } => gamma.len(),
            Self::Group { partition } | Self::OrderedMixed { partition, .. } => partition.n_items(),
        };
        if expect != len {
            return Err(Error::Dimension(format!("norm expects length {expect}, got {len}")));
        }
        Ok(())
    }

    pub fn norm(&self, a: &[f64]) -> Result<f64> {
        self.check_dim(a.len())?;
        Ok(match self {
            Self::Infinity => a.iter().fold(0.0, |m, x| m.max(x.abs())),
            Self::OrderedL1 { gamma } => sorted_desc(a.iter().map(|x| x.abs()))
                .iter()
                .zip(gamma)
                .map(|(x, g)| x * g)
                .sum(),
            Self::Group { partition } => {
                let g = partition.n_groups() as f64;
                group_reduce(partition, a, f64::max).iter().sum::<f64>() / g
            }
            Self::OrderedMixed { partition, gamma } => sorted_desc(group_reduce(partition, a, f64::max))
                .iter()
                .zip(gamma)
                .map(|(x, g)| x * g)
                .sum(),
        })
    }

    pub fn dual_norm(&self, b: &[f64]) -> Result<f64> {
        self.check_dim(b.len())?;
        Ok(match self {
            Self::Infinity => b.iter().map(|x| x.abs()).sum(),
            Self::OrderedL1 { gamma } => max_prefix_ratio(&sorted_desc(b.iter().map(|x| x.abs())), gamma).1,
            Self::Group { partition } => {
                let sums = group_reduce(partition, b, |s, x| s + x);
                partition.n_groups() as f64 * sums.iter().fold(0.0, |m: f64, &x| m.max(x))
            }
            Self::OrderedMixed { partition, gamma } => {
                max_prefix_ratio(&sorted_desc(group_reduce(partition, b, |s, x| s + x)), gamma).1
            }
        })
    }

    /// A vector `a` with norm(a) = 1 and ⟨a, b⟩ = dual_norm(b).
    pub fn dual_maximizer(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(b.len())?;
        let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
        let mut a = vec![0.0; b.len()];
        match self {
            Self::Infinity => {
                for (ai, &bi) in a.iter_mut().zip(b) {
                    *ai = sign(bi);
                }
            }
            Self::OrderedL1 { gamma } => {
                let order = order_desc(&b.iter().map(|x| x.abs()).collect::<Vec<_>>());
                let sorted: Vec<f64> = order.iter().map(|&j| b[j].abs()).collect();
                let (i, _) = max_prefix_ratio(&sorted, gamma);
                let scale = gamma[..=i].iter().sum::<f64>();
                for &j in &order[..=i] {
                    a[j] = sign(b[j]) / scale;
                }
            }
            Self::Group { partition } => {
                let sums = group_reduce(partition, b, |s, x| s + x);
                let g_star = order_desc(&sums)[0];
                let g = partition.n_groups() as f64;
                for &j in partition.group(g_star) {
                    a[j] = g * sign(b[j]);
                }
            }
            Self::OrderedMixed { partition, gamma } => {
                let sums = group_reduce(partition, b, |s, x| s + x);
                let order = order_desc(&sums);
                let sorted: Vec<f64> = order.iter().map(|&g| sums[g]).collect();
                let (i, _) = max_prefix_ratio(&sorted, gamma);
                let scale = gamma[..=i].iter().sum::<f64>();
                for &g in &order[..=i] {
                    for &j in partition.group(g) {
                        a[j] = sign(b[j]) / scale;
                    }
                }
            }
        }
        Ok(a)
    }

    /// A subgradient of the norm at `a`: dual_norm(u) ≤ 1 and ⟨u, a⟩ = norm(a).
    pub fn subgradient(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(a.len())?;
        let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
        let abs: Vec<f64> = a.iter().map(|x| x.abs()).collect();
        let mut u = vec![0.0; a.len()];
        match self {
            Self::Infinity => {
                if let Some(&j) = order_desc(&abs).first() {
                    u[j] = sign(a[j]);
                }
            }
            Self::OrderedL1 { gamma } => {
                for (&j, g) in order_desc(&abs).iter().zip(gamma) {
                    u[j] = g * sign(a[j]);
                }
            }
            Self::Group { partition } => {
                let g = partition.n_groups() as f64;
                for members in partition.groups() {
                    let j = group_argmax(members, &abs);
                    u[j] = sign(a[j]) / g;
                }
            }
            Self::OrderedMixed { partition, gamma } => {
                let tops: Vec<usize> = partition.groups().iter().map(|m| group_argmax(m, &abs)).collect();
                let maxima: Vec<f64> = tops.iter().map(|&j| abs[j]).collect();
                for (&g, w) in order_desc(&maxima).iter().zip(gamma) {
                    let j = tops[g];
                    u[j] = w * sign(a[j]);
                }
            }
        }
        Ok(u)
    }
}

fn group_argmax(members: &[usize], abs: &[f64]) -> usize {
    let mut best = members[0];
    for &j in &members[1..] {
        if abs[j] > abs[best] {
            best = j;
        }
    }
    best
}

/// Reduces |x_j| within each group with `op`, starting from 0.
fn group_reduce(partition: &Partition, x: &[f64], op: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    partition
        .groups()
        .iter()
        .map(|members| members.iter().fold(0.0, |acc, &j| op(acc, x[j].abs())))
        .collect()
}

fn sorted_desc(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Indices sorting `values` in decreasing order (stable).
fn order_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    idx
}

/// max over i of (Σ_{j≤i} x_j) / (Σ_{j≤i} γ_j), skipping zero prefix weights.
/// Returns the (0-based) maximizing prefix end and the value.
fn max_prefix_ratio(sorted: &[f64], gamma: &[f64]) -> (usize, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut best = (0, 0.0);
    for (i, (x, g)) in sorted.iter().zip(gamma).enumerate() {
        num += x;
        den += g;
        if den > 0.0 {
            let r = num / den;
            if r > best.1 {
                best = (i, r);
            }
        }
    }
    best
}

/// Calls `f` on every `t`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, t: usize, mut f: impl FnMut(&[usize])) {
    if t > n {
        return;
    }
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        f(&idx);
        let mut i = t;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - t {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for k in i + 1..t {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// E|a_ĵ| for the random-then-greedy pick, computed by enumerating every
/// equally likely candidate set.
pub fn exact_rtg_expectation(a: &[f64], rule: SelectionRule, partition: &Partition) -> Result<f64> {
    let k = a.len();
    if partition.n_items() != k {
        return Err(Error::Dimension(format!("partition covers {}, vector has {k}", partition.n_items())));
    }
    let g = partition.n_groups();
    rule.validate(k, g)?;
    let group_max: Vec<f64> = group_reduce(partition, a, f64::max);
    let (items, t): (&[f64], usize) = match rule.normalized() {
        SelectionRule::Type0 => return Ok(a.iter().fold(0.0, |m, x| m.max(x.abs()))),
        SelectionRule::Type1 { t } => (a, t),
        SelectionRule::Type3 { t } => (&group_max, t),
        SelectionRule::Type2 => unreachable!(),
    };
    let n = items.len();
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::EnumerationTooLarge { subsets: binomial(n, t) });
    }
    let mut total = 0.0;
    let mut count = 0u64;
    for_each_subset(n, t, |s| {
        total += s.iter().fold(0.0, |m: f64, &j| m.max(items[j].abs()));
        count += 1;
    });
    Ok(total / count as f64)
}
