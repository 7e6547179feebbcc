//! The Stein-rule class `beta_hat + c * h(beta_hat, beta_tilde) * (beta_hat - beta_tilde)`
//! and its named members.
//!
//! `ShrinkageSpec::c` is always in this class orientation. The classic Stein
//! rule `beta_hat - a / ||d||^2 * d` is therefore `(InverseSqNorm, c = -a)`,
//! and the risk helpers in [`crate::risk`] take the *shrinkage* coefficient
//! `a` of `beta_hat - a h d`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    estimate_pair, restriction_gain, Competitor, EstimatePair, LinearModel, LinearRestriction,
};

/// Below this norm the difference `beta_hat - beta_tilde` is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-14;

type CustomFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Weight function family.
#[derive(Clone)]
pub enum HKind {
    /// `1 / ||x - y||^2`
    InverseSqNorm,
    /// `1 / (1 + ||x - y||^p)`, `p >= 2`
    SmoothInverse(f64),
    Zero,
    One,
    Custom { label: String, f: Arc<CustomFn> },
}

impl fmt::Debug for HKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HKind::InverseSqNorm => write!(f, "InverseSqNorm"),
            HKind::SmoothInverse(p) => write!(f, "SmoothInverse({p})"),
            HKind::Zero => write!(f, "Zero"),
            HKind::One => write!(f, "One"),
            HKind::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// A weight function `h` together with its bound constant `q0`, where
/// `|h(x, y)| * ||x - y||^2 <= q0`.
#[derive(Debug, Clone)]
pub struct HFunction {
    kind: HKind,
    q0: f64,
    depends_only_on_difference: bool,
}

impl HFunction {
    pub fn inverse_sq_norm() -> Self {
        Self {
            kind: HKind::InverseSqNorm,
            q0: 1.0,
            depends_only_on_difference: true,
        }
    }

    pub fn smooth_inverse(p: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::Config(format!("smooth inverse needs finite p >= 2, got {p}")));
        }
        Ok(Self {
            kind: HKind::SmoothInverse(p),
            q0: smooth_inverse_bound(p),
            depends_only_on_difference: true,
        })
    }

    /// `h = 0`: the combination collapses to the base estimator. Any positive
    /// constant bounds it; 1 is used.
    pub fn zero() -> Self {
        Self {
            kind: HKind::Zero,
            q0: 1.0,
            depends_only_on_difference: true,
        }
    }

    /// `h = 1`. Not bounded in the sense above, so `q0` is infinite.
    pub fn one() -> Self {
        Self {
            kind: HKind::One,
            q0: f64::INFINITY,
            depends_only_on_difference: true,
        }
    }

    pub fn custom<F>(label: impl Into<String>, q0: f64, depends_only_on_difference: bool, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: HKind::Custom {
                label: label.into(),
                f: Arc::new(f),
            },
            q0,
            depends_only_on_difference,
        }
    }

    pub fn kind(&self) -> &HKind {
        &self.kind
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn depends_only_on_difference(&self) -> bool {
        self.depends_only_on_difference
    }

    /// True when `h` blows up as the two arguments meet.
    pub fn is_singular(&self) -> bool {
        matches!(self.kind, HKind::InverseSqNorm | HKind::Custom { .. })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            HKind::Custom { f, .. } => f(x, y),
            _ => {
                let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                self.eval_dist_sq(dist_sq)
            }
        }
    }

    /// `h` as a function of `||x - y||^2` for the built-in kinds.
    pub fn eval_dist_sq(&self, dist_sq: f64) -> f64 {
        match &self.kind {
            HKind::InverseSqNorm => 1.0 / dist_sq,
            HKind::SmoothInverse(p) => 1.0 / (1.0 + dist_sq.powf(p / 2.0)),
            HKind::Zero => 0.0,
            HKind::One => 1.0,
            HKind::Custom { .. } => panic!("custom h is not a function of the distance alone"),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            HKind::InverseSqNorm => "inverse_sq_norm".into(),
            HKind::SmoothInverse(p) => format!("smooth_inverse(p={p})"),
            HKind::Zero => "zero".into(),
            HKind::One => "one".into(),
            HKind::Custom { label, .. } => label.clone(),
        }
    }
}

/// `sup_{z > 0} z^2 / (1 + z^p)`.
fn smooth_inverse_bound(p: f64) -> f64 {
    if p == 2.0 {
        // increasing in z, limit 1
        return 1.0;
    }
    let zp = 2.0 / (p - 2.0);
    zp.powf(2.0 / p) / (1.0 + zp)
}

/// Serializable description of the built-in weight functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HSpec {
    InverseSqNorm,
    SmoothInverse { p: f64 },
    Zero,
    One,
}

impl HSpec {
    pub fn build(&self) -> Result<HFunction> {
        match *self {
            HSpec::InverseSqNorm => Ok(HFunction::inverse_sq_norm()),
            HSpec::SmoothInverse { p } => HFunction::smooth_inverse(p),
            HSpec::Zero => Ok(HFunction::zero()),
            HSpec::One => Ok(HFunction::one()),
        }
    }
}

/// One member `(h, c)` of the class.
#[derive(Debug, Clone)]
pub struct ShrinkageSpec {
    pub h: HFunction,
    pub c: f64,
}

impl ShrinkageSpec {
    pub fn new(h: HFunction, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Config(format!("c must be finite, got {c}")));
        }
        Ok(Self { h, c })
    }

    /// Stein rule `beta_hat - a / ||d||^2 * d`.
    pub fn stein_rule(a: f64) -> Result<Self> {
        Self::new(HFunction::inverse_sq_norm(), -a)
    }
}

/// Output of [`combine`].
#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    pub estimate: DVector<f64>,
    /// `beta_hat` and `beta_tilde` coincided; the base estimate was returned.
    pub degenerate: bool,
}

/// `beta_hat + c h(beta_hat, beta_tilde) (beta_hat - beta_tilde)`.
pub fn combine(pair: &EstimatePair, spec: &ShrinkageSpec) -> Combined {
    let d = pair.difference();
    if d.norm() < DEGENERATE_NORM {
        return Combined {
            estimate: pair.beta_hat.clone(),
            degenerate: true,
        };
    }
    if spec.c == 0.0 {
        return Combined {
            estimate: pair.beta_hat.clone(),
            degenerate: false,
        };
    }
    let h = spec.h.eval(pair.beta_hat.as_slice(), pair.beta_tilde.as_slice());
    Combined {
        estimate: &pair.beta_hat + d * (spec.c * h),
        degenerate: false,
    }
}

/// `a_hat = S^2 trace((X'X)^-1) - trace(Sigma_hat)`; the semiparametric
/// Stein-like estimator is `combine` with `(InverseSqNorm, c = -a_hat)`.
pub fn spsl_c_hat(model: &LinearModel, sigma_hat: &DMatrix<f64>) -> Result<f64> {
    if sigma_hat.shape() != (model.k(), model.k()) {
        return Err(Error::Dimension(format!(
            "Sigma_hat is {:?}, expected k x k with k={}",
            sigma_hat.shape(),
            model.k()
        )));
    }
    let s2 = model.residual_variance()?;
    Ok(s2 * model.gram_inverse()?.trace() - sigma_hat.trace())
}

/// `S^2 D^-1`, the plug-in covariance of OLS with the diagonal competitor.
pub fn diag_sigma_hat(model: &LinearModel) -> Result<DMatrix<f64>> {
    let s2 = model.residual_variance()?;
    let g = model.gram();
    Ok(DMatrix::from_diagonal(&g.diagonal().map(|d| s2 / d)))
}

/// `S^2 J R (X'X)^-1` (symmetrized), the plug-in covariance of `beta_hat - beta_tilde`
/// under a linear restriction.
pub fn restricted_xi_hat(model: &LinearModel, restriction: &LinearRestriction) -> Result<DMatrix<f64>> {
    let s2 = model.residual_variance()?;
    let j = restriction_gain(model, restriction)?;
    Ok(linalg::symmetrize(&(j * restriction.matrix() * model.gram_inverse()?)) * s2)
}

/// Shrinkage constant for the restricted competitor:
/// `(q - 2) * smallest positive eigenvalue of Xi_hat`, zero when `q <= 2`.
///
/// Under a true restriction `eta(h) = 1` and `omega(h) <= 1 / ((q-2) lambda_min)`,
/// so this constant stays at or below the optimum `eta(h) / omega(h)`.
pub fn restricted_c_hat(model: &LinearModel, restriction: &LinearRestriction) -> Result<f64> {
    let q = restriction.rank();
    if q <= 2 {
        return Ok(0.0);
    }
    let xi = restricted_xi_hat(model, restriction)?;
    let (values, _) = linalg::sym_eigen(&xi);
    let smallest = values[q - 1].max(0.0);
    Ok((q as f64 - 2.0) * smallest)
}

/// Data-driven shrinkage constant for the given competitor.
pub fn spsl_constant(model: &LinearModel, competitor: &Competitor) -> Result<f64> {
    match competitor {
        Competitor::Diag => spsl_c_hat(model, &diag_sigma_hat(model)?),
        Competitor::Restricted(restriction) => restricted_c_hat(model, restriction),
    }
}

/// The semiparametric Stein-like estimate for one sample.
pub fn spsl(model: &LinearModel, competitor: &Competitor) -> Result<Combined> {
    let pair = estimate_pair(model, competitor)?;
    let a_hat = spsl_constant(model, competitor)?;
    Ok(combine(&pair, &ShrinkageSpec::stein_rule(a_hat)?))
}

/// Risk-minimizing shrinkage coefficient `eta(h) / omega(h)`.
pub fn optimal_c(eta_h: f64, omega_h: f64) -> Result<f64> {
    if !(omega_h > 0.0) {
        return Err(Error::InvalidRiskMoment(omega_h));
    }
    Ok(eta_h / omega_h)
}

/// Open interval of shrinkage coefficients that beat the base estimator.
pub fn dominance_interval(c_star: f64) -> (f64, f64) {
    (f64::min(0.0, 2.0 * c_star), f64::max(0.0, 2.0 * c_star))
}

/// An estimator recipe usable in sweeps and on real data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Base least-squares estimator.
    Ls,
    /// Stein rule with the data-driven constant from [`spsl_constant`].
    Spsl,
    /// Fixed class member `(h, c)` (class orientation).
    Shrink { h: HSpec, c: f64 },
}

impl EstimatorSpec {
    pub fn name(&self) -> String {
        match self {
            EstimatorSpec::Ls => "LS".into(),
            EstimatorSpec::Spsl => "SPSL".into(),
            EstimatorSpec::Shrink { h, c } => {
                let h = h.build().map(|h| h.label()).unwrap_or_else(|_| format!("{h:?}"));
                format!("shrink[{h};c={c}]")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let EstimatorSpec::Shrink { h, c } = self {
            ShrinkageSpec::new(h.build()?, *c)?;
        }
        Ok(())
    }

    /// Estimate given the sample and its already computed estimate pair.
    pub fn apply(
        &self,
        model: &LinearModel,
        competitor: &Competitor,
        pair: &EstimatePair,
    ) -> Result<Combined> {
        let a_hat = match self {
            EstimatorSpec::Spsl => spsl_constant(model, competitor)?,
            _ => 0.0,
        };
        self.apply_with_a_hat(pair, a_hat)
    }

    /// As [`apply`](Self::apply) with the data-driven constant already computed.
    pub fn apply_with_a_hat(&self, pair: &EstimatePair, a_hat: f64) -> Result<Combined> {
        match self {
            EstimatorSpec::Ls => Ok(Combined {
                estimate: pair.beta_hat.clone(),
                degenerate: false,
            }),
            EstimatorSpec::Spsl => Ok(combine(pair, &ShrinkageSpec::stein_rule(a_hat)?)),
            EstimatorSpec::Shrink { h, c } => Ok(combine(pair, &ShrinkageSpec::new(h.build()?, *c)?)),
        }
    }
}
