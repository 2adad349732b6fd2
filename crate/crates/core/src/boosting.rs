//! Training loops.
//!
//! [`train_rgbm`] works in function space: it fits each pseudo-residual with
//! the best weak-learner of a random candidate set and updates the
//! predictions. [`train_rtgcd`] works in coefficient space: random-then-greedy
//! coordinate descent on L(β) = Σᵢ ℓ(yᵢ, B_{i:}β). Given the same seed both
//! produce the same learners, steps and objectives.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{CandidateBest, Stump, StumpBasis, WeakLearners};
use crate::losses::{line_search, objective, pseudo_residual_into, LossSpec};
use crate::sampling::{CandidateSampler, RunRng, SelectionRule, GENERATOR_ID, TRAIN_STREAM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    LineSearch,
    /// ρ_m = ρ · ⟨r, B_{:j_m}⟩
    Constant(f64),
}

impl StepRule {
    /// The constant rule ρ = 1/σ.
    pub fn inverse_smoothness(loss: &LossSpec) -> Result<Self> {
        let sigma = loss
            .smoothness()
            .ok_or_else(|| Error::InvalidArgument(format!("{loss} is not smooth; use line search")))?;
        Ok(Self::Constant(1.0 / sigma))
    }

    fn validate(&self, loss: &LossSpec) -> Result<()> {
        if let Self::Constant(rho) = *self {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::InvalidArgument(format!("constant step must be > 0, got {rho}")));
            }
            if loss.smoothness().is_none() {
                return Err(Error::InvalidArgument(format!(
                    "{loss} is not smooth; the constant step rule is undefined"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub rule: SelectionRule,
    pub step: StepRule,
    pub iterations: usize,
    pub seed: u64,
}

/// Sparse β: learner index → weight. Re-selected learners accumulate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientVector(BTreeMap<usize, f64>);

impl CoefficientVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, j: usize, delta: f64) {
        *self.0.entry(j).or_insert(0.0) += delta;
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0.get(&j).copied().unwrap_or(0.0)
    }

    pub fn support_size(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&j, &w)| (j, w))
    }

    /// B β evaluated column by column.
    pub fn predictions<B: WeakLearners + ?Sized>(&self, basis: &B) -> Result<Vec<f64>> {
        let mut f = vec![0.0; basis.n_samples()];
        for (j, w) in self.iter() {
            basis.add_column(j, w, &mut f)?;
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration count: the objective is measured after this many updates.
    pub iter: usize,
    pub elapsed_sec: f64,
    pub learner: usize,
    /// ⟨B_{:j_m}, r^m⟩ = −∇_{j_m} L(β^m)
    pub score: f64,
    pub step: f64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    /// The line-search step cap was reached.
    pub capped: bool,
}

impl IterationRecord {
    /// Everything but the wall-clock time, formatted bit-exactly.
    pub fn fingerprint(&self) -> String {
        format!(
            "{} {} {:016x} {:016x} {:016x} {:?} {}",
            self.iter,
            self.learner,
            self.score.to_bits(),
            self.step.to_bits(),
            self.train_loss.to_bits(),
            self.test_loss.map(f64::to_bits),
            self.capped
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: CoefficientVector,
    pub trace: Vec<IterationRecord>,
    pub initial_train_loss: f64,
    pub initial_test_loss: Option<f64>,
    /// Final training predictions as maintained by the loop.
    pub train_predictions: Vec<f64>,
    pub generator_id: &'static str,
    pub seed: u64,
}

impl TrainResult {
    pub fn final_train_loss(&self) -> f64 {
        self.trace.last().map_or(self.initial_train_loss, |r| r.train_loss)
    }

    pub fn final_test_loss(&self) -> Option<f64> {
        self.trace.last().map_or(self.initial_test_loss, |r| r.test_loss)
    }
}

/// A held-out set evaluated alongside training.
pub trait HeldOut {
    fn labels(&self) -> &[f64];

    /// out += scale · (learner j evaluated on every held-out sample)
    fn add_learner(&self, j: usize, scale: f64, out: &mut [f64]) -> Result<()>;
}

/// Held-out rows scored by the stumps of a training basis.
pub struct StumpHeldOut<'a> {
    pub basis: &'a StumpBasis,
    pub data: &'a Dataset,
}

impl HeldOut for StumpHeldOut<'_> {
    fn labels(&self) -> &[f64] {
        self.data.labels()
    }

    fn add_learner(&self, j: usize, scale: f64, out: &mut [f64]) -> Result<()> {
        let stump = self.basis.stump(j)?;
        let unit = scale * self.basis.scale();
        for (i, o) in out.iter_mut().enumerate() {
            *o += unit * stump.sign(self.data.value(i, stump.feature));
        }
        Ok(())
    }
}

fn check_inputs<B: WeakLearners + ?Sized>(basis: &B, labels: &[f64], cfg: &TrainConfig) -> Result<()> {
    if labels.len() != basis.n_samples() {
        return Err(Error::Dimension(format!(
            "{} labels for a basis over {} samples",
            labels.len(),
            basis.n_samples()
        )));
    }
    cfg.step.validate(&cfg.loss)?;
    cfg.rule.validate(basis.n_learners(), basis.n_groups())
}

struct StepOutcome {
    rho: f64,
    capped: bool,
}

/// Step size for learner `best` at predictions `f`.
fn choose_step<B: WeakLearners + ?Sized>(
    basis: &B,
    loss: &LossSpec,
    step: StepRule,
    labels: &[f64],
    f: &[f64],
    best: CandidateBest,
) -> Result<StepOutcome> {
    match step {
        StepRule::Constant(rho) => Ok(StepOutcome { rho: rho * best.score, capped: false }),
        // closed form ⟨r, B_{:j}⟩ for unit-norm columns
        StepRule::LineSearch if matches!(loss, LossSpec::Squared) => {
            Ok(StepOutcome { rho: best.score, capped: false })
        }
        StepRule::LineSearch => {
            let col = basis.column(best.learner)?;
            let ls = line_search(loss, labels, f, &col)?;
            Ok(StepOutcome { rho: ls.rho, capped: ls.capped })
        }
    }
}

struct Tracker<'a> {
    loss: LossSpec,
    labels: &'a [f64],
    test: Option<(&'a dyn HeldOut, Vec<f64>)>,
    start: Instant,
    trace: Vec<IterationRecord>,
}

impl<'a> Tracker<'a> {
    fn new(loss: LossSpec, labels: &'a [f64], test: Option<&'a dyn HeldOut>, capacity: usize) -> Self {
        let test = test.map(|t| (t, vec![0.0; t.labels().len()]));
        Self { loss, labels, test, start: Instant::now(), trace: Vec::with_capacity(capacity) }
    }

    fn test_loss(&self) -> Result<Option<f64>> {
        self.test
            .as_ref()
            .map(|(t, f)| objective(&self.loss, t.labels(), f))
            .transpose()
    }

    fn record(&mut self, best: CandidateBest, step: &StepOutcome, f: &[f64]) -> Result<()> {
        if let Some((t, ft)) = self.test.as_mut() {
            t.add_learner(best.learner, step.rho, ft)?;
        }
        let train_loss = objective(&self.loss, self.labels, f)?;
        let test_loss = self.test_loss()?;
        self.trace.push(IterationRecord {
            iter: self.trace.len() + 1,
            elapsed_sec: self.start.elapsed().as_secs_f64(),
            learner: best.learner,
            score: best.score,
            step: step.rho,
            train_loss,
            test_loss,
            capped: step.capped,
        });
        Ok(())
    }
}

/// Randomized gradient boosting in function space, starting from f⁰ = 0.
///
/// Each iteration computes the pseudo-residual r, draws a candidate set J,
/// picks the learner of J that best fits r in least squares (equivalently
/// the largest |⟨B_{:j}, r⟩|, since columns have unit norm), chooses the step
/// and adds ρ_m B_{:j_m} to the predictions.
pub fn train_rgbm<B: WeakLearners + ?Sized>(
    basis: &B,
    labels: &[f64],
    test: Option<&dyn HeldOut>,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    check_inputs(basis, labels, cfg)?;
    let n = basis.n_samples();
    let mut rng = RunRng::new(cfg.seed, TRAIN_STREAM);
    let mut sampler = CandidateSampler::new(cfg.rule, basis.n_learners(), basis.n_groups())?;
    let mut tracker = Tracker::new(cfg.loss, labels, test, cfg.iterations);
    let initial_test_loss = tracker.test_loss()?;

    let mut f = vec![0.0; n];
    let mut residual = vec![0.0; n];
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(cfg.iterations);
    let initial_train_loss = objective(&cfg.loss, labels, &f)?;

    for _ in 0..cfg.iterations {
        pseudo_residual_into(&cfg.loss, labels, &f, &mut residual);
        let set = sampler.sample(&mut rng);
        let best = basis.best_in_set(&set, &residual)?;
        let step = choose_step(basis, &cfg.loss, cfg.step, labels, &f, best)?;
        basis.add_column(best.learner, step.rho, &mut f)?;
        terms.push((best.learner, step.rho));
        tracker.record(best, &step, &f)?;
    }

    let mut model = CoefficientVector::new();
    for (j, rho) in terms {
        model.add(j, rho);
    }
    Ok(TrainResult {
        model,
        trace: tracker.trace,
        initial_train_loss,
        initial_test_loss,
        train_predictions: f,
        generator_id: GENERATOR_ID,
        seed: cfg.seed,
    })
}

/// Random-then-greedy coordinate descent on β, starting from β⁰ = 0.
///
/// The gradient coordinates ∇_j L(β) = Σᵢ ∂ℓ(yᵢ, B_{i:}β)/∂f · B_{ij} are
/// evaluated on the candidate set and the largest in magnitude is updated:
/// by line search along e_j, or by −ρ ∇_j L(β).
pub fn train_rtgcd<B: WeakLearners + ?Sized>(
    basis: &B,
    labels: &[f64],
    test: Option<&dyn HeldOut>,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    check_inputs(basis, labels, cfg)?;
    let n = basis.n_samples();
    let mut rng = RunRng::new(cfg.seed, TRAIN_STREAM);
    let mut sampler = CandidateSampler::new(cfg.rule, basis.n_learners(), basis.n_groups())?;
    let mut tracker = Tracker::new(cfg.loss, labels, test, cfg.iterations);
    let initial_test_loss = tracker.test_loss()?;

    let mut beta = CoefficientVector::new();
    // B β, kept in sync with every coordinate update
    let mut margin = vec![0.0; n];
    let mut loss_grad = vec![0.0; n];
    let initial_train_loss = objective(&cfg.loss, labels, &margin)?;

    for _ in 0..cfg.iterations {
        for ((g, &y), &m) in loss_grad.iter_mut().zip(labels).zip(&margin) {
            *g = cfg.loss.derivative(y, m);
        }
        let set = sampler.sample(&mut rng);
        // ⟨B_{:j}, ∂ℓ⟩ is the gradient coordinate; its argmax-|·| is the
        // greedy coordinate of J
        let steepest = basis.best_in_set(&set, &loss_grad)?;
        let j = steepest.learner;
        let grad_j = steepest.score;
        let as_residual = CandidateBest { learner: j, score: -grad_j };
        let step = match cfg.step {
            StepRule::Constant(rho) => StepOutcome { rho: -rho * grad_j, capped: false },
            StepRule::LineSearch => choose_step(basis, &cfg.loss, cfg.step, labels, &margin, as_residual)?,
        };
        beta.add(j, step.rho);
        basis.add_column(j, step.rho, &mut margin)?;
        tracker.record(as_residual, &step, &margin)?;
    }

    Ok(TrainResult {
        model: beta,
        trace: tracker.trace,
        initial_train_loss,
        initial_test_loss,
        train_predictions: margin,
        generator_id: GENERATOR_ID,
        seed: cfg.seed,
    })
}

/// Train on a dataset with its stump basis, optionally tracking a test set.
pub fn fit_stumps(
    basis: &StumpBasis,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    let held_out = test.map(|data| StumpHeldOut { basis, data });
    train_rgbm(basis, train.labels(), held_out.as_ref().map(|h| h as &dyn HeldOut), cfg)
}

/// Linear-rate bound (1 − (μ/σ) θ²)^M · gap₀.
pub fn rate_bound(mu: f64, sigma: f64, theta: f64, iterations: usize, initial_gap: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= sigma) {
        return Err(Error::InvalidArgument(format!("need 0 < mu <= sigma, got mu={mu}, sigma={sigma}")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < theta <= 1, got {theta}")));
    }
    let rate = 1.0 - (mu / sigma) * theta * theta;
    let m = i32::try_from(iterations).map_err(|_| Error::InvalidArgument("too many iterations".into()))?;
    Ok(rate.powi(m) * initial_gap)
}

/// Σ_j β_j b(x; τ_j) for a sparse feature row.
pub fn predict(model: &CoefficientVector, basis: &StumpBasis, x: &[(usize, f64)]) -> Result<f64> {
    let value = |g: usize| match x.binary_search_by_key(&g, |&(idx, _)| idx) {
        Ok(pos) => x[pos].1,
        Err(_) => 0.0,
    };
    let mut sum = 0.0;
    for (j, w) in model.iter() {
        let stump = basis.stump(j)?;
        sum += w * stump.sign(value(stump.feature));
    }
    Ok(sum * basis.scale())
}

const MODEL_MAGIC: &str = "rgbm-model";
const MODEL_VERSION: &str = "v1";

/// Serializable stump ensemble: everything `predict` needs without the
/// training data.
#[derive(Debug, Clone, PartialEq)]
pub struct StumpModel {
    pub scale: f64,
    pub loss_kind: String,
    pub terms: Vec<(Stump, f64)>,
}

impl StumpModel {
    pub fn from_coefficients(model: &CoefficientVector, basis: &StumpBasis, loss: &LossSpec) -> Result<Self> {
        let terms = model
            .iter()
            .map(|(j, w)| Ok((basis.stump(j)?, w)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scale: basis.scale(), loss_kind: loss.kind().to_string(), terms })
    }

    pub fn predict(&self, x: &[(usize, f64)]) -> f64 {
        let value = |g: usize| match x.binary_search_by_key(&g, |&(idx, _)| idx) {
            Ok(pos) => x[pos].1,
            Err(_) => 0.0,
        };
        self.terms.iter().map(|(s, w)| w * s.sign(value(s.feature))).sum::<f64>() * self.scale
    }

    /// Header `rgbm-model v1 <scale> <loss-kind>`, then one
    /// `feature<TAB>threshold<TAB>coefficient` line per stump, with 1-based
    /// feature indices as in LIBSVM files.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION} {} {}\n", self.scale, self.loss_kind);
        for (s, w) in &self.terms {
            let _ = writeln!(out, "{}\t{}\t{}", s.feature + 1, s.threshold, w);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Model("empty model file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [magic, version, scale, loss_kind] = fields[..] else {
            return Err(Error::Model(format!("bad header {header:?}")));
        };
        if magic != MODEL_MAGIC || version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported header {header:?}")));
        }
        let scale: f64 = scale.parse().map_err(|_| Error::Model(format!("bad scale {scale:?}")))?;
        let mut terms = Vec::new();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::Model(format!("line {}: {line:?}", k + 2));
            let mut it = line.split('\t');
            let (Some(g), Some(s), Some(w), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(bad());
            };
            let g: usize = g.parse().map_err(|_| bad())?;
            if g == 0 {
                return Err(bad());
            }
            let threshold: f64 = s.parse().map_err(|_| bad())?;
            let w: f64 = w.parse().map_err(|_| bad())?;
            terms.push((Stump { feature: g - 1, threshold }, w));
        }
        Ok(Self { scale, loss_kind: loss_kind.to_string(), terms })
    }
}
