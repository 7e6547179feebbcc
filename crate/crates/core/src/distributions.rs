//! Samplers for the joint law of `(beta_hat - beta, beta_tilde - beta)` and the
//! inverse-moment oracle `E[1 / chi^2_k(lambda)]`.
//!
//! Elliptical laws are handled through their Gaussian scale-mixture
//! representation: draw a precision scale `z` from the weighting law, then a
//! Gaussian with covariance `z^-1 * Cov`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{restriction_gain, JointMoments, LinearModel, LinearRestriction};
use crate::rng;

/// Weighting law of the precision scale in the normal scale mixture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticalSpec {
    /// Point mass at 1: the Gaussian case.
    #[default]
    DiracAtOne,
    /// `Gamma(nu/2, rate nu/2)` scale, i.e. multivariate t with `nu` degrees of freedom.
    GammaMixture { nu: f64 },
    /// Scale `z1` with probability `w`, else `z2`.
    TwoPointMixture { z1: f64, z2: f64, w: f64 },
}

impl EllipticalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EllipticalSpec::DiracAtOne => Ok(()),
            EllipticalSpec::GammaMixture { nu } if nu > 2.0 && nu.is_finite() => Ok(()),
            EllipticalSpec::GammaMixture { nu } => {
                Err(Error::Config(format!("gamma mixture needs nu > 2, got {nu}")))
            }
            EllipticalSpec::TwoPointMixture { z1, z2, w }
                if z1 > 0.0 && z2 > 0.0 && w > 0.0 && w < 1.0 && z1.is_finite() && z2.is_finite() =>
            {
                Ok(())
            }
            EllipticalSpec::TwoPointMixture { .. } => Err(Error::Config(
                "two-point mixture needs z1, z2 > 0 and w in (0, 1)".into(),
            )),
        }
    }

    /// `int t |kappa(t)| dt`.
    pub fn first_abs_moment(&self) -> f64 {
        match *self {
            EllipticalSpec::DiracAtOne => 1.0,
            EllipticalSpec::GammaMixture { .. } => 1.0,
            EllipticalSpec::TwoPointMixture { z1, z2, w } => w * z1 + (1.0 - w) * z2,
        }
    }

    /// `E[1/z]`, the factor by which the mixture inflates the covariance.
    pub fn covariance_inflation(&self) -> f64 {
        match *self {
            EllipticalSpec::DiracAtOne => 1.0,
            EllipticalSpec::GammaMixture { nu } => nu / (nu - 2.0),
            EllipticalSpec::TwoPointMixture { z1, z2, w } => w / z1 + (1.0 - w) / z2,
        }
    }

    /// Draw a precision scale `z`. The Gaussian case consumes no randomness.
    pub fn draw_scale(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            EllipticalSpec::DiracAtOne => 1.0,
            EllipticalSpec::GammaMixture { nu } => Gamma::new(nu / 2.0, 2.0 / nu)
                .expect("validated shape")
                .sample(rng),
            EllipticalSpec::TwoPointMixture { z1, z2, w } => {
                if rng.random::<f64>() < w {
                    z1
                } else {
                    z2
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            EllipticalSpec::DiracAtOne => "gaussian".into(),
            EllipticalSpec::GammaMixture { nu } => format!("t(nu={nu})"),
            EllipticalSpec::TwoPointMixture { z1, z2, w } => format!("two_point({z1},{z2},{w})"),
        }
    }
}

/// `count` draws of `(U1, U2)`, stored row-major as `[U1 | U2]` of width `2k`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDraws {
    k: usize,
    data: Vec<f64>,
}

impl JointDraws {
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.data.len() / (2 * self.k)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * 2 * self.k..(i + 1) * 2 * self.k]
    }

    pub fn u1(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.k]
    }

    pub fn u2(&self, i: usize) -> &[f64] {
        &self.row(i)[self.k..]
    }

    /// Draws as a `count x 2k` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), 2 * self.k, &self.data)
    }
}

/// Location-scale sampler for `(U1, U2)` built from [`JointMoments`].
#[derive(Debug, Clone)]
pub struct JointSampler {
    k: usize,
    mean: Vec<f64>,
    /// Column-major `2k x width` factor of the block covariance.
    factor: DMatrix<f64>,
    law: EllipticalSpec,
}

/// Anything that can produce reproducible draws of `(U1, U2)`.
pub trait JointSource: Sync {
    fn k(&self) -> usize;

    /// Length of the per-thread scratch buffer passed to [`draw_into`](Self::draw_into).
    fn scratch_len(&self) -> usize;

    /// Fill `out` (length `2k`, laid out as `[U1 | U2]`) with one draw.
    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut [f64], out: &mut [f64]);

    /// Separates the random streams of different source families.
    fn stream_salt(&self) -> u64;

    /// `E[1/z]` of the scale mixture; 1 for Gaussian sources.
    fn covariance_inflation(&self) -> f64 {
        1.0
    }

    /// Reproducible batch of draws; draw `i` depends only on `(seed, i)`.
    fn sample(&self, count: usize, seed: u64) -> JointDraws
    where
        Self: Sized,
    {
        let k = self.k();
        let data = fold_draws(self, count, seed, Vec::new, |buf: &mut Vec<f64>, u1, u2| {
            buf.extend_from_slice(u1);
            buf.extend_from_slice(u2);
        })
        .concat();
        JointDraws { k, data }
    }
}

/// Run `step` over `count` draws, one accumulator per block of
/// [`rng::BLOCK`] draws. Blocks are returned in index order so that merging
/// them sequentially is reproducible regardless of thread scheduling.
pub fn fold_draws<S, T, I, F>(source: &S, count: usize, seed: u64, init: I, step: F) -> Vec<T>
where
    S: JointSource + ?Sized,
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, &[f64], &[f64]) + Sync,
{
    let k = source.k();
    let key = rng::derive_key(seed, &[source.stream_salt()]);
    rng::par_blocks(count, key, |rng, range| {
        let mut acc = init();
        let mut scratch = vec![0.0; source.scratch_len()];
        let mut out = vec![0.0; 2 * k];
        for _ in range {
            source.draw_into(rng, &mut scratch, &mut out);
            step(&mut acc, &out[..k], &out[k..]);
        }
        acc
    })
}

impl JointSampler {
    pub fn gaussian(m: &JointMoments) -> Result<Self> {
        Self::elliptical(m, EllipticalSpec::DiracAtOne)
    }

    pub fn elliptical(m: &JointMoments, law: EllipticalSpec) -> Result<Self> {
        law.validate()?;
        let cov = m.block_covariance();
        let factor = block_factor(&cov)?;
        Ok(Self {
            k: m.k(),
            mean: m.block_mean().as_slice().to_vec(),
            factor,
            law,
        })
    }

    pub fn law(&self) -> EllipticalSpec {
        self.law
    }
}

impl JointSource for JointSampler {
    fn k(&self) -> usize {
        self.k
    }

    fn scratch_len(&self) -> usize {
        self.factor.ncols()
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut [f64], out: &mut [f64]) {
        let z = self.law.draw_scale(rng);
        let scale = 1.0 / z.sqrt();
        for s in scratch.iter_mut() {
            *s = rng.sample(StandardNormal);
        }
        let rows = self.factor.nrows();
        out.copy_from_slice(&self.mean);
        for (c, &s) in scratch.iter().enumerate() {
            let col = self.factor.column(c);
            let v = s * scale;
            for r in 0..rows {
                out[r] += col[r] * v;
            }
        }
    }

    fn stream_salt(&self) -> u64 {
        0x6a_6f69_6e74
    }

    fn covariance_inflation(&self) -> f64 {
        self.law.covariance_inflation()
    }
}

fn block_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, _) = linalg::sym_eigen(cov);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let trace = cov.trace();
    if min < -1e-8 * trace.max(f64::MIN_POSITIVE) {
        return Err(Error::MomentInconsistency { min_eigenvalue: min });
    }
    if min > linalg::RANK_TOL * values[0] {
        if let Some(ch) = linalg::symmetrize(cov).cholesky() {
            return Ok(ch.l());
        }
    }
    Ok(linalg::psd_factor(cov).0)
}

/// Draws generated through the regression itself: Gaussian noise, OLS and the
/// restricted estimator. The joint law is singular whenever the restriction
/// has fewer rows than coefficients.
#[derive(Debug, Clone)]
pub struct RegressionSampler {
    k: usize,
    sigma: f64,
    /// `(X'X)^-1 X'`, stored `n x k` so each noise entry updates a contiguous row.
    hat_t: DMatrix<f64>,
    proj: DMatrix<f64>,
    shift: Vec<f64>,
}

impl RegressionSampler {
    pub fn new(
        model: &LinearModel,
        restriction: &LinearRestriction,
        beta_true: &DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let k = model.k();
        if beta_true.len() != k {
            return Err(Error::Dimension(format!("beta has {} entries, k={k}", beta_true.len())));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        let hat_t = model.x() * model.gram_inverse()?;
        let j = restriction_gain(model, restriction)?;
        let rm = restriction.matrix();
        let shift = &j * (rm * beta_true - restriction.r());
        Ok(Self {
            k,
            sigma,
            hat_t,
            proj: &j * rm,
            shift: shift.as_slice().to_vec(),
        })
    }
}

impl JointSource for RegressionSampler {
    fn k(&self) -> usize {
        self.k
    }

    fn scratch_len(&self) -> usize {
        self.hat_t.nrows()
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut [f64], out: &mut [f64]) {
        let k = self.k;
        for e in scratch.iter_mut() {
            *e = self.sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let (u1, u2) = out.split_at_mut(k);
        for (c, u) in u1.iter_mut().enumerate() {
            let col = self.hat_t.column(c);
            *u = col.iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
        }
        // beta_tilde - beta = U1 - J (R U1 + R beta - r)
        for (r, u) in u2.iter_mut().enumerate() {
            let mut v = u1[r] - self.shift[r];
            for c in 0..k {
                v -= self.proj[(r, c)] * u1[c];
            }
            *u = v;
        }
    }

    fn stream_salt(&self) -> u64 {
        0x7265_6772
    }
}

/// Gaussian draws of `(U1, U2)` with mean `(0, gamma)` and the block covariance.
pub fn sample_joint_gaussian(m: &JointMoments, count: usize, seed: u64) -> Result<JointDraws> {
    Ok(JointSampler::gaussian(m)?.sample(count, seed))
}

/// Scale-mixture draws: `z ~ kappa`, then Gaussian with covariance scaled by `1/z`.
pub fn sample_joint_elliptical(
    m: &JointMoments,
    spec: EllipticalSpec,
    count: usize,
    seed: u64,
) -> Result<JointDraws> {
    Ok(JointSampler::elliptical(m, spec)?.sample(count, seed))
}

/// Draws of `(beta_hat - beta, beta_tilde - beta)` from simulated regressions
/// with `N(0, sigma^2)` noise and a restricted competitor.
pub fn sample_joint_singular(
    model: &LinearModel,
    restriction: &LinearRestriction,
    beta_true: &DVector<f64>,
    sigma: f64,
    count: usize,
    seed: u64,
) -> Result<JointDraws> {
    Ok(RegressionSampler::new(model, restriction, beta_true, sigma)?.sample(count, seed))
}

/// `E[1 / chi^2_k(lambda)]` as a Poisson mixture of central inverse moments:
/// `sum_j Pois(j; lambda/2) / (k + 2j - 2)`.
pub fn inv_chisq_mean(k: usize, lambda: f64) -> Result<f64> {
    if k < 3 {
        return Err(Error::DivergentMoment(k));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("noncentrality must be finite and >= 0, got {lambda}")));
    }
    let kf = k as f64;
    if lambda == 0.0 {
        return Ok(1.0 / (kf - 2.0));
    }
    let half = lambda / 2.0;
    let log_weight = |j: f64| -half + j * half.ln() - ln_gamma(j + 1.0);
    let term = |j: f64| log_weight(j).exp() / (kf + 2.0 * j - 2.0);
    let mode = half.floor();
    const TOL: f64 = 1e-15;

    let mut sum = 0.0;
    // downward from the mode; weights shrink at least geometrically
    let mut j = mode;
    loop {
        let t = term(j);
        sum += t;
        if j == 0.0 {
            break;
        }
        let ratio = j / half;
        if ratio < 1.0 && t * ratio / (1.0 - ratio) < TOL * sum {
            break;
        }
        j -= 1.0;
    }
    // upward tail
    let mut j = mode + 1.0;
    loop {
        let t = term(j);
        sum += t;
        let ratio = half / (j + 1.0);
        if ratio < 1.0 && t * ratio / (1.0 - ratio) < TOL * sum {
            break;
        }
        j += 1.0;
    }
    Ok(sum)
}

/// `E[1 / Z'Z]` for `Z ~ E_k(mu, I; kappa)`:
/// `int t kappa(t) E[1/chi^2_k(t mu'mu)] dt`.
pub fn elliptical_inverse_norm_mean(spec: EllipticalSpec, k: usize, mu_sq: f64) -> Result<f64> {
    spec.validate()?;
    let at = |t: f64| -> Result<f64> { Ok(t * inv_chisq_mean(k, t * mu_sq)?) };
    match spec {
        EllipticalSpec::DiracAtOne => at(1.0),
        EllipticalSpec::TwoPointMixture { z1, z2, w } => Ok(w * at(z1)? + (1.0 - w) * at(z2)?),
        EllipticalSpec::GammaMixture { nu } => {
            if mu_sq == 0.0 {
                return Ok(1.0 / (k as f64 - 2.0));
            }
            let shape = nu / 2.0;
            let rate = nu / 2.0;
            let log_norm = shape * rate.ln() - ln_gamma(shape);
            let density = |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    (log_norm + (shape - 1.0) * t.ln() - rate * t).exp()
                }
            };
            // Simpson on [0, upper]; the gamma tail beyond is below 1e-14
            let sd = (shape / (rate * rate)).sqrt();
            let upper = shape / rate + 60.0 * sd;
            let intervals = 40_000usize;
            let step = upper / intervals as f64;
            let mut total = 0.0;
            for i in 0..=intervals {
                let t = i as f64 * step;
                let w = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let f = if t == 0.0 { 0.0 } else { density(t) * at(t)? };
                total += w * f;
            }
            Ok(total * step / 3.0)
        }
    }
}
