//! Minimal cosine angle of a weak-learner set and the kernel distance.
//!
//! Θ_F = min over c ∈ Range(B) of ‖Bᵀc‖_F / ‖c‖₂. Closed forms exist for
//! orthogonal and binary designs; [`mca_estimate`] handles small dense
//! matrices numerically. Everything here is dense and desk-scale.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::norms::NormSpec;
use crate::numeric::{dot, norm2};

pub const MAX_MCA_DIM: usize = 200;
pub const MAX_DIST_LEARNERS: usize = 12;
pub const DEFAULT_RESTARTS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;
const UNIT_COLUMN_TOL: f64 = 1e-8;
/// Relative slack accepted when checking a point against the unit ball.
const BALL_TOL: f64 = 1e-10;
const MAX_CUTS: usize = 20_000;
const MAX_LINEARIZATIONS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McaMethod {
    ClosedForm,
    Multistart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McaEstimate {
    pub value: f64,
    pub restarts: usize,
    /// Unit vector c ∈ Range(B) attaining `value`.
    pub direction: Vec<f64>,
    pub method: McaMethod,
}

fn require_positive(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(())
}

/// Θ_∞ of an orthonormal basis of R^p: 1/√p.
pub fn mca_orthogonal_infinity(p: usize) -> Result<f64> {
    require_positive(p)?;
    Ok(1.0 / (p as f64).sqrt())
}

/// Θ of an orthonormal basis under the ordered ℓ1 norm with weights γ:
/// min over i of (γ₁ + … + γ_i)/√i.
pub fn mca_orthogonal_ordered(gamma: &[f64]) -> Result<f64> {
    NormSpec::ordered_l1(gamma.to_vec())?;
    let mut prefix = 0.0;
    let mut best = f64::INFINITY;
    for (i, g) in gamma.iter().enumerate() {
        prefix += g;
        best = best.min(prefix / ((i + 1) as f64).sqrt());
    }
    Ok(best)
}

/// Θ_∞ of the binary basis of R^p: 1/√(Σ_{i≤p} (√i − √(i−1))²).
pub fn mca_binary_infinity(p: usize) -> Result<f64> {
    require_positive(p)?;
    let s: f64 = (1..=p)
        .map(|i| {
            let d = (i as f64).sqrt() - ((i - 1) as f64).sqrt();
            d * d
        })
        .sum();
    Ok(1.0 / s.sqrt())
}

/// p × p identity.
pub fn orthogonal_basis(p: usize) -> Result<DMatrix<f64>> {
    require_positive(p)?;
    Ok(DMatrix::identity(p, p))
}

/// Every nonzero vector of {−1, 0, 1}^p, normalized: 3^p − 1 columns.
pub fn binary_extended_basis(p: usize) -> Result<DMatrix<f64>> {
    require_positive(p)?;
    let k = 3usize
        .checked_pow(p as u32)
        .map(|x| x - 1)
        .filter(|&k| k <= MAX_MCA_DIM)
        .ok_or_else(|| Error::TooLarge(format!("binary basis for p={p} exceeds {MAX_MCA_DIM} columns")))?;
    let mut b = DMatrix::zeros(p, k);
    let mut j = 0;
    for code in 0..=k {
        let mut c = code;
        let col: Vec<f64> = (0..p)
            .map(|_| {
                let digit = (c % 3) as f64 - 1.0;
                c /= 3;
                digit
            })
            .collect();
        let n = norm2(&col);
        if n > 0.0 {
            let unit: Vec<f64> = col.iter().map(|x| x / n).collect();
            b.set_column(j, &DVector::from_vec(unit));
            j += 1;
        }
    }
    Ok(b)
}

struct Subspaces {
    /// n × r orthonormal basis of Range(B)
    range: DMatrix<f64>,
    /// K × k orthonormal basis of Ker(B)
    kernel: DMatrix<f64>,
    /// smallest retained singular value
    sigma_min: f64,
}

fn subspaces(b: &DMatrix<f64>) -> Subspaces {
    let (n, k) = b.shape();
    // pad with zero rows so the right factor is a full K × K orthogonal matrix
    let rows = n.max(k);
    let mut padded = DMatrix::zeros(rows, k);
    padded.view_mut((0, 0), (n, k)).copy_from(b);
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let threshold = RANK_TOL * sigma_max;
    let kept: Vec<usize> = (0..k).filter(|&i| svd.singular_values[i] > threshold).collect();
    let dropped: Vec<usize> = (0..k).filter(|&i| svd.singular_values[i] <= threshold).collect();
    let mut range = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        range.set_column(c, &u.column(i).rows(0, n));
    }
    let mut kernel = DMatrix::zeros(k, dropped.len());
    for (c, &i) in dropped.iter().enumerate() {
        kernel.set_column(c, &v_t.row(i).transpose());
    }
    let sigma_min = kept.iter().map(|&i| svd.singular_values[i]).fold(f64::INFINITY, f64::min);
    Subspaces { range, kernel, sigma_min }
}

fn column_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

fn transpose_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m.tr_mul(&DVector::from_column_slice(x))).as_slice().to_vec()
}

/// The unit ball {z : ‖A z‖_F ≤ 1}, described lazily by subgradient cuts.
struct CutBall<'a> {
    a: &'a DMatrix<f64>,
    spec: &'a NormSpec,
    cuts: Vec<Vec<f64>>,
    bound: f64,
}

impl CutBall<'_> {
    fn value(&self, z: &[f64]) -> Result<f64> {
        self.spec.norm(&column_vec(self.a, z))
    }

    /// argmax of ⟨w, z⟩ over the ball.
    fn support_point(&mut self, w: &[f64]) -> Result<Vec<f64>> {
        let r = w.len();
        loop {
            // z = z⁺ − z⁻ with 0 ≤ z^± ≤ bound
            let mut cost = Vec::with_capacity(2 * r);
            cost.extend(w.iter().map(|x| -x));
            cost.extend(w.iter().copied());
            let mut lp = LinearProgram::minimize(cost);
            for g in &self.cuts {
                let mut row = g.clone();
                row.extend(g.iter().map(|x| -x));
                lp.constrain(row, Relation::Le, 1.0);
            }
            for i in 0..2 * r {
                let mut row = vec![0.0; 2 * r];
                row[i] = 1.0;
                lp.constrain(row, Relation::Le, self.bound);
            }
            let LpOutcome::Optimal { x, .. } = lp.solve()? else {
                return Err(Error::Model("unit-ball linear program has no optimum".into()));
            };
            let z: Vec<f64> = (0..r).map(|i| x[i] - x[r + i]).collect();
            let az = column_vec(self.a, &z);
            if self.spec.norm(&az)? <= 1.0 + BALL_TOL {
                return Ok(z);
            }
            if self.cuts.len() >= MAX_CUTS {
                return Err(Error::TooLarge(format!("more than {MAX_CUTS} cutting planes")));
            }
            let u = self.spec.subgradient(&az)?;
            self.cuts.push(transpose_vec(self.a, &u));
        }
    }
}

fn check_unit_columns(b: &DMatrix<f64>) -> Result<()> {
    if b.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("zero matrix".into()));
    }
    for (j, col) in b.column_iter().enumerate() {
        let n = col.norm();
        if (n - 1.0).abs() > UNIT_COLUMN_TOL {
            return Err(Error::InvalidArgument(format!("column {j} has norm {n}, expected 1")));
        }
    }
    Ok(())
}

/// Multistart estimate of Θ_F for a dense n × K matrix with unit columns.
///
/// Θ_F is the reciprocal of the largest Euclidean norm over the polytope
/// P = {c ∈ Range(B) : ‖Bᵀc‖_F ≤ 1}. Each restart draws c₀ = B·g with g
/// Gaussian and repeatedly replaces c by the point of P maximizing ⟨c, ·⟩
/// (a linear program over P, built from subgradient cuts). The ratio
/// ‖Bᵀc‖_F/‖c‖₂ never increases along the way; a restart stops when it
/// decreases by less than a relative `tol`. The smallest ratio wins. Any
/// direction's ratio is an upper bound on Θ_F.
pub fn mca_estimate<R: Rng + ?Sized>(
    b: &DMatrix<f64>,
    spec: &NormSpec,
    restarts: usize,
    tol: f64,
    rng: &mut R,
) -> Result<McaEstimate> {
    let (n, k) = b.shape();
    if n > MAX_MCA_DIM || k > MAX_MCA_DIM {
        return Err(Error::TooLarge(format!("{n} × {k} matrix exceeds the {MAX_MCA_DIM} guard")));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {tol}")));
    }
    check_unit_columns(b)?;
    spec.norm(&vec![0.0; k])?;

    let sub = subspaces(b);
    let a = b.tr_mul(&sub.range);
    // ‖Az‖_F ≥ ‖Az‖_∞ / K ≥ σ_min ‖z‖ / K^{3/2}, so P lies in this box
    let bound = 2.0 * (k as f64).powf(1.5) / sub.sigma_min + 1.0;
    let mut ball = CutBall { a: &a, spec, cuts: Vec::new(), bound };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..restarts {
        let mut z = loop {
            let g: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let z = transpose_vec(&sub.range, &column_vec(b, &g));
            if norm2(&z) > 1e-12 {
                break z;
            }
        };
        let mut ratio = ball.value(&z)? / norm2(&z);
        for _ in 0..MAX_LINEARIZATIONS {
            let nz = norm2(&z);
            let w: Vec<f64> = z.iter().map(|x| x / nz).collect();
            let next = ball.support_point(&w)?;
            let next_ratio = ball.value(&next)? / norm2(&next);
            let improved = next_ratio < ratio;
            let converged = next_ratio >= ratio * (1.0 - tol);
            if improved {
                ratio = next_ratio;
                z = next;
            }
            if converged {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, _)| ratio < *v) {
            best = Some((ratio, z));
        }
    }
    let (value, z) = best.expect("restarts > 0");
    let mut direction = column_vec(&sub.range, &z);
    let nd = norm2(&direction);
    direction.iter_mut().for_each(|x| *x /= nd);
    Ok(McaEstimate { value, restarts, direction, method: McaMethod::Multistart })
}

/// ‖Bᵀc‖_F / ‖c‖₂ for a given direction.
pub fn cosine_ratio(b: &DMatrix<f64>, spec: &NormSpec, c: &[f64]) -> Result<f64> {
    if c.len() != b.nrows() {
        return Err(Error::Dimension(format!("direction has {} entries, matrix {} rows", c.len(), b.nrows())));
    }
    Ok(spec.norm(&transpose_vec(b, c))? / norm2(c))
}

/// dist(0, a) = min over ω ∈ Ker(B) of ‖a − ω‖_{F*}.
///
/// Solved exactly as a linear program in kernel coordinates, with the dual
/// norm described by cuts ⟨v, ·⟩ for extreme points v of the F unit ball.
pub fn dist_estimate(b: &DMatrix<f64>, a: &[f64], spec: &NormSpec) -> Result<f64> {
    let k = b.ncols();
    if k > MAX_DIST_LEARNERS {
        return Err(Error::TooLarge(format!("{k} learners exceeds the {MAX_DIST_LEARNERS} guard")));
    }
    if a.len() != k {
        return Err(Error::Dimension(format!("vector has {} entries, matrix {k} columns", a.len())));
    }
    let kernel = subspaces(b).kernel;
    let dim = kernel.ncols();
    let a_dual = spec.dual_norm(a)?;
    if dim == 0 {
        return Ok(a_dual);
    }
    // every dual norm here dominates ‖·‖₂, so the optimal ω has
    // ‖ω‖₂ ≤ ‖a‖₂ + ‖a‖_{F*}
    let bound = 2.0 * (norm2(a) + a_dual) + 1.0;
    let residual = |z: &[f64]| -> Vec<f64> {
        let w = column_vec(&kernel, z);
        a.iter().zip(&w).map(|(x, y)| x - y).collect()
    };
    // variables: z⁺ (dim), z⁻ (dim), τ
    let mut cuts = vec![spec.dual_maximizer(a)?];
    let mut best = a_dual;
    loop {
        let mut cost = vec![0.0; 2 * dim + 1];
        cost[2 * dim] = 1.0;
        let mut lp = LinearProgram::minimize(cost);
        for v in &cuts {
            // ⟨v, a − N z⟩ ≤ τ
            let nv = transpose_vec(&kernel, v);
            let mut row: Vec<f64> = nv.iter().map(|x| -x).collect();
            row.extend(nv.iter().copied());
            row.push(-1.0);
            lp.constrain(row, Relation::Le, -dot(v, a));
        }
        for i in 0..2 * dim {
            let mut row = vec![0.0; 2 * dim + 1];
            row[i] = 1.0;
            lp.constrain(row, Relation::Le, bound);
        }
        let LpOutcome::Optimal { x, .. } = lp.solve()? else {
            return Err(Error::Model("kernel-distance linear program has no optimum".into()));
        };
        let tau = x[2 * dim];
        let z: Vec<f64> = (0..dim).map(|i| x[i] - x[dim + i]).collect();
        let res = residual(&z);
        let value = spec.dual_norm(&res)?;
        best = best.min(value);
        if best - tau <= 1e-12 * (1.0 + best) {
            return Ok(best);
        }
        if cuts.len() >= MAX_CUTS {
            return Err(Error::TooLarge(format!("more than {MAX_CUTS} cutting planes")));
        }
        cuts.push(spec.dual_maximizer(&res)?);
    }
}
