//! Scalar losses, the empirical objective, pseudo-residuals and the
//! one-dimensional line search used by both training loops.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum_by;

/// Derivative tolerance of the line search (absolute, on the 1-D slope).
pub const LINE_SEARCH_TOL: f64 = 1e-12;
pub const LINE_SEARCH_MAX_ITER: usize = 200;
/// Step cap for the exponential loss, whose 1-D problem can be unbounded below.
pub const EXPONENTIAL_STEP_CAP: f64 = 50.0;
/// Cap for the remaining non-quadratic losses (only reachable with d = 0 logistic
/// on a separating direction).
const GENERIC_STEP_CAP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// ½(y − f)²
    Squared,
    /// Quadratic within `d` of the label, linear outside.
    Huber { d: f64 },
    /// log(1 + e^{−yf}) + (d/2) f²
    Logistic { d: f64 },
    /// e^{−yf}
    Exponential,
}

impl LossSpec {
    pub fn huber(d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("huber parameter must be > 0, got {d}")));
        }
        Ok(Self::Huber { d })
    }

    pub fn logistic(d: f64) -> Result<Self> {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("logistic parameter must be >= 0, got {d}")));
        }
        Ok(Self::Logistic { d })
    }

    /// Build from a kind name and optional parameter (defaults: huber d = 1,
    /// logistic d = 0).
    pub fn from_kind(kind: &str, param: Option<f64>) -> Result<Self> {
        match kind {
            "squared" => Ok(Self::Squared),
            "huber" => Self::huber(param.unwrap_or(1.0)),
            "logistic" => Self::logistic(param.unwrap_or(0.0)),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::InvalidArgument(format!("unknown loss {other:?}"))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Squared => "squared",
            Self::Huber { .. } => "huber",
            Self::Logistic { .. } => "logistic",
            Self::Exponential => "exponential",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            Self::Huber { d } | Self::Logistic { d } => Some(d),
            _ => None,
        }
    }

    /// Smoothness constant σ, if the loss is smooth.
    pub fn smoothness(&self) -> Option<f64> {
        match *self {
            Self::Squared | Self::Huber { .. } => Some(1.0),
            Self::Logistic { d } => Some(0.25 + d),
            Self::Exponential => None,
        }
    }

    /// Strong convexity constant μ, if any.
    pub fn strong_convexity(&self) -> Option<f64> {
        match *self {
            Self::Squared => Some(1.0),
            Self::Logistic { d } if d > 0.0 => Some(d),
            _ => None,
        }
    }

    pub fn value(&self, y: f64, f: f64) -> f64 {
        match *self {
            Self::Squared => 0.5 * (y - f) * (y - f),
            Self::Huber { d } => {
                let e = (y - f).abs();
                if e <= d {
                    0.5 * e * e
                } else {
                    d * e - 0.5 * d * d
                }
            }
            Self::Logistic { d } => softplus(-y * f) + 0.5 * d * f * f,
            Self::Exponential => (-y * f).exp(),
        }
    }

    /// ∂ℓ(y, f)/∂f
    pub fn derivative(&self, y: f64, f: f64) -> f64 {
        match *self {
            Self::Squared => f - y,
            Self::Huber { d } => (f - y).clamp(-d, d),
            Self::Logistic { d } => -y * sigmoid(-y * f) + d * f,
            Self::Exponential => -y * (-y * f).exp(),
        }
    }

    /// ∂²ℓ(y, f)/∂f², used by the Newton steps of the line search.
    pub fn second_derivative(&self, y: f64, f: f64) -> f64 {
        match *self {
            Self::Squared => 1.0,
            Self::Huber { d } => {
                if (f - y).abs() <= d {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Logistic { d } => {
                let s = sigmoid(-y * f);
                y * y * s * (1.0 - s) + d
            }
            Self::Exponential => y * y * (-y * f).exp(),
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(d) => write!(f, "{}({d})", self.kind()),
            None => f.write_str(self.kind()),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_kind(s, None)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_len(labels: &[f64], f: &[f64]) -> Result<()> {
    if labels.len() != f.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} predictions",
            labels.len(),
            f.len()
        )));
    }
    Ok(())
}

/// Σᵢ ℓ(yᵢ, fᵢ), pairwise-summed.
pub fn objective(loss: &LossSpec, labels: &[f64], f: &[f64]) -> Result<f64> {
    check_len(labels, f)?;
    Ok(pairwise_sum_by(f.len(), &|i| loss.value(labels[i], f[i])))
}

/// rᵢ = −∂ℓ(yᵢ, fᵢ)/∂f
pub fn pseudo_residual(loss: &LossSpec, labels: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    check_len(labels, f)?;
    let mut r = vec![0.0; f.len()];
    pseudo_residual_into(loss, labels, f, &mut r);
    Ok(r)
}

pub(crate) fn pseudo_residual_into(loss: &LossSpec, labels: &[f64], f: &[f64], out: &mut [f64]) {
    for ((o, &y), &fi) in out.iter_mut().zip(labels).zip(f) {
        *o = -loss.derivative(y, fi);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub rho: f64,
    /// The step cap was reached; the 1-D problem may be unbounded.
    pub capped: bool,
    pub iterations: usize,
}

/// ρ* = argmin_ρ Σᵢ ℓ(yᵢ, fᵢ + ρ cᵢ) for a unit-norm direction `column`.
///
/// Squared loss uses the closed form ⟨r, c⟩. Other losses use a safeguarded
/// Newton iteration on the slope: the minimizer is bracketed by doubling,
/// and any Newton step that leaves the bracket is replaced by bisection.
pub fn line_search(loss: &LossSpec, labels: &[f64], f: &[f64], column: &[f64]) -> Result<LineSearch> {
    check_len(labels, f)?;
    check_len(labels, column)?;
    if let LossSpec::Squared = loss {
        let rho = pairwise_sum_by(f.len(), &|i| (labels[i] - f[i]) * column[i]);
        return Ok(LineSearch { rho, capped: false, iterations: 0 });
    }
    let cap = match loss {
        LossSpec::Exponential => EXPONENTIAL_STEP_CAP,
        _ => GENERIC_STEP_CAP,
    };
    Ok(newton_bisect(loss, labels, f, column, cap))
}

fn slope(loss: &LossSpec, y: &[f64], f: &[f64], c: &[f64], rho: f64) -> f64 {
    pairwise_sum_by(f.len(), &|i| loss.derivative(y[i], f[i] + rho * c[i]) * c[i])
}

fn curvature(loss: &LossSpec, y: &[f64], f: &[f64], c: &[f64], rho: f64) -> f64 {
    pairwise_sum_by(f.len(), &|i| loss.second_derivative(y[i], f[i] + rho * c[i]) * c[i] * c[i])
}

fn newton_bisect(loss: &LossSpec, y: &[f64], f: &[f64], c: &[f64], cap: f64) -> LineSearch {
    let g0 = slope(loss, y, f, c, 0.0);
    if g0.abs() <= LINE_SEARCH_TOL || !g0.is_finite() {
        return LineSearch { rho: 0.0, capped: false, iterations: 0 };
    }
    // Minimizer lies in the direction of −g0.
    let dir = -g0.signum();
    let h0 = curvature(loss, y, f, c, 0.0);
    let mut step = if h0 > 0.0 { (g0 / h0).abs() } else { 1.0 };
    step = step.min(cap);

    // `near` keeps the slope sign of 0, `far` the opposite sign.
    let mut near = 0.0;
    let mut far;
    let mut iterations = 0;
    loop {
        let x = dir * step;
        let gx = slope(loss, y, f, c, x);
        iterations += 1;
        if gx.abs() <= LINE_SEARCH_TOL {
            return LineSearch { rho: x, capped: false, iterations };
        }
        if gx.signum() != g0.signum() {
            far = x;
            break;
        }
        near = x;
        if step >= cap {
            return LineSearch { rho: dir * cap, capped: true, iterations };
        }
        step = (2.0 * step).min(cap);
    }

    let mut x = near;
    let mut gx = slope(loss, y, f, c, x);
    for _ in 0..LINE_SEARCH_MAX_ITER {
        iterations += 1;
        let (lo, hi) = if near < far { (near, far) } else { (far, near) };
        let hx = curvature(loss, y, f, c, x);
        let newton = x - gx / hx;
        x = if hx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        gx = slope(loss, y, f, c, x);
        if gx.abs() <= LINE_SEARCH_TOL {
            break;
        }
        if gx.signum() == g0.signum() {
            near = x;
        } else {
            far = x;
        }
        if (far - near).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    LineSearch { rho: x, capped: false, iterations }
}
