//! Regression instances, the base / competing / restricted estimators and the
//! second-moment structure of the pair `(beta_hat - beta, beta_tilde - beta)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};

/// `y = X beta + eps` with noise standard deviation `sigma`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    x: DMatrix<f64>,
    y: DVector<f64>,
    sigma: f64,
}

impl LinearModel {
    /// Validates `n > k >= 1` and full column rank of `x`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, sigma: f64) -> Result<Self> {
        let (n, k) = x.shape();
        if k == 0 || n <= k {
            return Err(Error::Dimension(format!("need n > k >= 1, got n={n}, k={k}")));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!("y has {} rows, X has {n}", y.len())));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        let rank = column_rank(&x);
        if rank < k {
            return Err(Error::Singular { rank, cols: k });
        }
        Ok(Self { x, y, sigma })
    }

    /// Model with `sigma` replaced by the residual estimate `S`.
    pub fn with_estimated_sigma(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let mut model = Self::new(x, y, 0.0)?;
        model.sigma = model.residual_variance()?.sqrt();
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `X'X`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x)
    }

    pub fn gram_inverse(&self) -> Result<DMatrix<f64>> {
        linalg::spd_inverse(&self.gram())
    }

    /// `S^2 = ||y - X beta_hat||^2 / (n - k)`.
    pub fn residual_variance(&self) -> Result<f64> {
        let beta_hat = fit_ols(self)?;
        let resid = &self.y - &self.x * beta_hat;
        Ok(resid.norm_squared() / (self.n() - self.k()) as f64)
    }
}

fn column_rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Base and competing estimates for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatePair {
    pub beta_hat: DVector<f64>,
    pub beta_tilde: DVector<f64>,
}

impl EstimatePair {
    pub fn new(beta_hat: DVector<f64>, beta_tilde: DVector<f64>) -> Result<Self> {
        if beta_hat.len() != beta_tilde.len() {
            return Err(Error::Dimension(format!(
                "estimate lengths differ: {} vs {}",
                beta_hat.len(),
                beta_tilde.len()
            )));
        }
        if beta_hat.iter().chain(beta_tilde.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite estimate".into()));
        }
        Ok(Self { beta_hat, beta_tilde })
    }

    pub fn difference(&self) -> DVector<f64> {
        &self.beta_hat - &self.beta_tilde
    }
}

/// Linear restriction `R beta = r` with `R` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRestriction {
    matrix: DMatrix<f64>,
    r: DVector<f64>,
}

impl LinearRestriction {
    pub fn new(matrix: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        let q = matrix.nrows();
        if q == 0 {
            return Err(Error::EmptyRestriction);
        }
        if r.len() != q {
            return Err(Error::Dimension(format!("r has {} entries, R has {q} rows", r.len())));
        }
        if q > matrix.ncols() || column_rank(&matrix.transpose()) < q {
            return Err(Error::DegenerateRestriction);
        }
        Ok(Self { matrix, r })
    }

    /// Restriction that pins the listed coefficients to the given values.
    pub fn select(k: usize, indices: &[usize], values: &[f64]) -> Result<Self> {
        let mut m = DMatrix::zeros(indices.len(), k);
        for (row, &j) in indices.iter().enumerate() {
            if j >= k {
                return Err(Error::Dimension(format!("coefficient {j} out of range for k={k}")));
            }
            m[(row, j)] = 1.0;
        }
        Self::new(m, DVector::from_column_slice(values))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_rhs(&self, r: DVector<f64>) -> Result<Self> {
        Self::new(self.matrix.clone(), r)
    }
}

/// The competing estimator used alongside the base estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Competitor {
    /// `diag(X'X)^-1 X'y`.
    Diag,
    /// Restricted least squares under `R beta = r`.
    Restricted(LinearRestriction),
}

/// Ordinary least squares `(X'X)^-1 X'y`, solved through a QR factorization.
pub fn fit_ols(model: &LinearModel) -> Result<DVector<f64>> {
    let qr = model.x.clone().qr();
    let qty = qr.q().tr_mul(&model.y);
    qr.r()
        .solve_upper_triangular(&qty)
        .ok_or(Error::Singular {
            rank: column_rank(&model.x),
            cols: model.k(),
        })
}

/// `D^-1 X'y` with `D = diag(X'X)`.
pub fn fit_diag_competitor(model: &LinearModel) -> Result<DVector<f64>> {
    let xty = model.x.tr_mul(&model.y);
    let mut out = DVector::zeros(model.k());
    for (j, col) in model.x.column_iter().enumerate() {
        let d = col.norm_squared();
        if d <= 0.0 {
            return Err(Error::DegenerateColumn { column: j });
        }
        out[j] = xty[j] / d;
    }
    Ok(out)
}

/// `J = (X'X)^-1 R' [R (X'X)^-1 R']^-1`.
pub fn restriction_gain(model: &LinearModel, restriction: &LinearRestriction) -> Result<DMatrix<f64>> {
    check_restriction(model, restriction)?;
    let g_inv = model.gram_inverse()?;
    let rm = restriction.matrix();
    let g_inv_rt = &g_inv * rm.transpose();
    let middle = rm * &g_inv_rt;
    let middle_inv = linalg::spd_inverse(&middle).map_err(|_| Error::DegenerateRestriction)?;
    Ok(g_inv_rt * middle_inv)
}

fn check_restriction(model: &LinearModel, restriction: &LinearRestriction) -> Result<()> {
    if restriction.matrix().ncols() != model.k() {
        return Err(Error::Dimension(format!(
            "restriction has {} columns, model has k={}",
            restriction.matrix().ncols(),
            model.k()
        )));
    }
    Ok(())
}

/// Restricted estimator `beta_hat - J (R beta_hat - r)`; satisfies `R beta_tilde = r`.
pub fn fit_restricted(model: &LinearModel, restriction: &LinearRestriction) -> Result<DVector<f64>> {
    let beta_hat = fit_ols(model)?;
    let j = restriction_gain(model, restriction)?;
    Ok(restrict(&beta_hat, &j, restriction))
}

fn restrict(beta_hat: &DVector<f64>, j: &DMatrix<f64>, restriction: &LinearRestriction) -> DVector<f64> {
    let excess = restriction.matrix() * beta_hat - restriction.r();
    beta_hat - j * excess
}

/// Base estimate plus the chosen competitor.
pub fn estimate_pair(model: &LinearModel, competitor: &Competitor) -> Result<EstimatePair> {
    let beta_hat = fit_ols(model)?;
    let beta_tilde = match competitor {
        Competitor::Diag => fit_diag_competitor(model)?,
        Competitor::Restricted(restriction) => {
            let j = restriction_gain(model, restriction)?;
            restrict(&beta_hat, &j, restriction)
        }
    };
    EstimatePair::new(beta_hat, beta_tilde)
}

/// Second-moment structure of `U = (beta_hat - beta, beta_tilde - beta)`.
///
/// `U1` has mean zero and covariance `A`, `U2` has mean `gamma` and covariance
/// `Phi`, and `cov(U1, U2) = Sigma`. The difference `U1 - U2` has covariance
/// `Xi = A - Sigma - Sigma' + Phi = P P'` where `P` is `k x q`, `q = rank(Xi)`.
/// Factor coordinates are `Z = P^+ (U1 - U2)` with mean `mu = -P^+ gamma`
/// and Gram matrix `R = P'P`.
#[derive(Debug, Clone)]
pub struct JointMoments {
    gamma: DVector<f64>,
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    phi: DMatrix<f64>,
    xi: DMatrix<f64>,
    p: DMatrix<f64>,
    p_pinv: DMatrix<f64>,
    r: DMatrix<f64>,
    mu: DVector<f64>,
    q: usize,
    psi0: f64,
    psi1: f64,
}

impl JointMoments {
    pub fn new(
        gamma: DVector<f64>,
        a: DMatrix<f64>,
        sigma: DMatrix<f64>,
        phi: DMatrix<f64>,
    ) -> Result<Self> {
        let k = gamma.len();
        for (name, m) in [("A", &a), ("Sigma", &sigma), ("Phi", &phi)] {
            if m.shape() != (k, k) {
                return Err(Error::Dimension(format!(
                    "{name} is {:?}, expected ({k}, {k})",
                    m.shape()
                )));
            }
        }
        let a = linalg::symmetrize(&a);
        let phi = linalg::symmetrize(&phi);
        let xi = linalg::symmetrize(&(&a - &sigma - sigma.transpose() + &phi));

        let (p, q) = factor(&xi);
        let r = p.tr_mul(&p);
        let p_pinv = if q == 0 {
            DMatrix::zeros(0, k)
        } else {
            linalg::spd_inverse(&r)? * p.transpose()
        };
        let mu = -(&p_pinv * &gamma);
        let (psi0, psi1) = if q == 0 {
            (0.0, 0.0)
        } else {
            let (rv, _) = linalg::sym_eigen(&r);
            (rv[q - 1], linalg::max_abs_eigenvalue(&coupling_matrix(&p)))
        };
        Ok(Self {
            gamma,
            a,
            sigma,
            phi,
            xi,
            p,
            p_pinv,
            r,
            mu,
            q,
            psi0,
            psi1,
        })
    }

    /// `A = I`, `Sigma = 0`, `Phi = I`, `gamma = 0`: independent standard normal estimators.
    pub fn identity(k: usize) -> Self {
        Self::new(
            DVector::zeros(k),
            DMatrix::identity(k, k),
            DMatrix::zeros(k, k),
            DMatrix::identity(k, k),
        )
        .expect("identity instance is valid")
    }

    /// Same covariance structure with a different bias vector.
    pub fn with_gamma(&self, gamma: DVector<f64>) -> Result<Self> {
        Self::new(gamma, self.a.clone(), self.sigma.clone(), self.phi.clone())
    }

    pub fn k(&self) -> usize {
        self.gamma.len()
    }
    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }
    /// Factor `P` with `P P' = Xi` (lower Cholesky factor when `Xi` is nonsingular).
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    /// Left inverse of `P`, mapping differences to factor coordinates.
    pub fn p_pinv(&self) -> &DMatrix<f64> {
        &self.p_pinv
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }
    pub fn q(&self) -> usize {
        self.q
    }
    /// Smallest eigenvalue of `R`.
    pub fn psi0(&self) -> f64 {
        self.psi0
    }
    /// Largest absolute eigenvalue of the coupling matrix `B`.
    pub fn psi1(&self) -> f64 {
        self.psi1
    }

    pub fn trace_a(&self) -> f64 {
        self.a.trace()
    }

    pub fn mu_norm_sq(&self) -> f64 {
        self.mu.norm_squared()
    }

    /// `B = [[0, P], [P', 0]]`, the symmetric part of the map `W -> U1'PZ`
    /// in the ordering `W = (U1, Z)`.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        coupling_matrix(&self.p)
    }

    /// Covariance of `(U1, U2)`: `[[A, Sigma], [Sigma', Phi]]`.
    pub fn block_covariance(&self) -> DMatrix<f64> {
        let k = self.k();
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        m.view_mut((0, 0), (k, k)).copy_from(&self.a);
        m.view_mut((0, k), (k, k)).copy_from(&self.sigma);
        m.view_mut((k, 0), (k, k)).copy_from(&self.sigma.transpose());
        m.view_mut((k, k), (k, k)).copy_from(&self.phi);
        m
    }

    /// Mean of `(U1, U2)`: `(0, gamma)`.
    pub fn block_mean(&self) -> DVector<f64> {
        let k = self.k();
        let mut m = DVector::zeros(2 * k);
        m.rows_mut(k, k).copy_from(&self.gamma);
        m
    }
}

fn factor(xi: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let q = linalg::numerical_rank(xi);
    if q == xi.nrows() {
        if let Some(ch) = xi.clone().cholesky() {
            return (ch.l(), q);
        }
    }
    linalg::psd_factor(xi)
}

fn coupling_matrix(p: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, q) = p.shape();
    let mut b = DMatrix::zeros(k + q, k + q);
    b.view_mut((0, k), (k, q)).copy_from(p);
    b.view_mut((k, 0), (q, k)).copy_from(&p.transpose());
    b
}

/// Moments for the pair (OLS, diagonal competitor) at true coefficients `beta_true`.
///
/// With `G = X'X` and `D = diag(G)`: `A = s^2 G^-1`, `Sigma = s^2 D^-1`,
/// `Phi = s^2 D^-1 G D^-1`, `gamma = (D^-1 G - I) beta_true`.
pub fn joint_moments_diag(model: &LinearModel, beta_true: &DVector<f64>) -> Result<JointMoments> {
    check_beta(model, beta_true)?;
    let g = model.gram();
    let s2 = model.sigma() * model.sigma();
    let d_inv = DMatrix::from_diagonal(&g.diagonal().map(|d| 1.0 / d));
    if g.diagonal().iter().any(|&d| d <= 0.0) {
        let column = g.diagonal().iter().position(|&d| d <= 0.0).unwrap_or(0);
        return Err(Error::DegenerateColumn { column });
    }
    let a = linalg::spd_inverse(&g)? * s2;
    let sigma = &d_inv * s2;
    let phi = &d_inv * &g * &d_inv * s2;
    let k = model.k();
    let gamma = (&d_inv * &g - DMatrix::identity(k, k)) * beta_true;
    JointMoments::new(gamma, a, sigma, phi)
}

/// Moments for the pair (OLS, restricted LS). The joint law is singular:
/// `Sigma = Phi = A - JRA`, `Xi = JRA` of rank `q`, `gamma = -J (R beta_true - r)`.
pub fn joint_moments_restricted(
    model: &LinearModel,
    restriction: &LinearRestriction,
    beta_true: &DVector<f64>,
) -> Result<JointMoments> {
    check_beta(model, beta_true)?;
    let j = restriction_gain(model, restriction)?;
    let s2 = model.sigma() * model.sigma();
    let a = model.gram_inverse()? * s2;
    let jra = linalg::symmetrize(&(&j * restriction.matrix() * &a));
    let cross = &a - &jra;
    let gamma = -(&j * (restriction.matrix() * beta_true - restriction.r()));
    let m = JointMoments::new(gamma, a, cross.clone(), cross)?;
    if m.q() == 0 {
        return Err(Error::EmptyRestriction);
    }
    Ok(m)
}

fn check_beta(model: &LinearModel, beta: &DVector<f64>) -> Result<()> {
    if beta.len() != model.k() {
        return Err(Error::Dimension(format!("beta has {} entries, k={}", beta.len(), model.k())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_model() -> LinearModel {
        let x = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.3, 1.2, 1.0, 1.9, 0.4, 1.0, 0.8, 2.2, 1.0, 1.1, 0.9, 1.0, 2.5, 1.7, 1.0, 0.2,
                0.1,
            ],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5, 3.0, 0.2]);
        LinearModel::new(x, y, 0.5).unwrap()
    }

    #[test]
    fn ols_is_mean_for_intercept_only() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let m = LinearModel::new(x, y, 1.0).unwrap();
        assert_relative_eq!(fit_ols(&m).unwrap()[0], 2.5, epsilon = 1e-14);
        assert_relative_eq!(fit_diag_competitor(&m).unwrap()[0], 2.5, epsilon = 1e-14);
    }

    #[test]
    fn noiseless_fit_recovers_beta() {
        let mut x = DMatrix::zeros(5, 3);
        for i in 0..3 {
            x[(i, i)] = 1.0;
        }
        x[(3, 0)] = 1.0;
        x[(4, 2)] = 2.0;
        let beta = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let y = &x * &beta;
        let m = LinearModel::new(x, y, 0.0).unwrap();
        assert!((fit_ols(&m).unwrap() - beta).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::zeros(4);
        match LinearModel::new(x, y, 1.0) {
            Err(Error::Singular { rank, cols }) => assert_eq!((rank, cols), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_column_is_degenerate_for_diag_competitor() {
        // full-rank checks happen first, so build the model by hand
        let m = LinearModel {
            x: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
            y: DVector::zeros(3),
            sigma: 1.0,
        };
        assert!(matches!(
            fit_diag_competitor(&m),
            Err(Error::DegenerateColumn { column: 1 })
        ));
    }

    #[test]
    fn restricted_estimator_projects_onto_constraint() {
        // X'X = I with k = 2
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let y = DVector::from_vec(vec![3.0, 1.0, 5.0]);
        let m = LinearModel::new(x, y, 1.0).unwrap();
        let restr = LinearRestriction::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![0.0]),
        )
        .unwrap();
        let bt = fit_restricted(&m, &restr).unwrap();
        // beta_hat = (3, 1); subtract half the sum from each coordinate
        assert_relative_eq!(bt[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(bt[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn restriction_already_satisfied_leaves_ols_unchanged() {
        let m = toy_model();
        let bh = fit_ols(&m).unwrap();
        let rm = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, -2.0]);
        let r = &rm * &bh;
        let restr = LinearRestriction::new(rm, r).unwrap();
        assert!((fit_restricted(&m, &restr).unwrap() - bh).norm() < 1e-10);
    }

    #[test]
    fn bad_restrictions_are_rejected() {
        assert!(matches!(
            LinearRestriction::new(DMatrix::zeros(0, 3), DVector::zeros(0)),
            Err(Error::EmptyRestriction)
        ));
        let dup = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            LinearRestriction::new(dup, DVector::zeros(2)),
            Err(Error::DegenerateRestriction)
        ));
    }

    #[test]
    fn identity_instance_constants() {
        let m = JointMoments::identity(3);
        assert!(linalg::max_abs_entry(&(m.xi() - DMatrix::identity(3, 3) * 2.0)) < 1e-14);
        assert!(linalg::max_abs_entry(&(m.r() - DMatrix::identity(3, 3) * 2.0)) < 1e-14);
        assert_relative_eq!(m.psi0(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.psi1(), 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(m.q(), 3);
        assert_eq!(m.mu_norm_sq(), 0.0);
    }

    #[test]
    fn orthogonal_design_has_no_bias_and_equal_blocks() {
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        let m = LinearModel::new(x, DVector::zeros(4), 1.3).unwrap();
        let jm = joint_moments_diag(&m, &DVector::from_vec(vec![2.0, -7.0])).unwrap();
        assert!(jm.gamma().norm() < 1e-14);
        assert!(linalg::max_abs_entry(&(jm.sigma() - jm.a())) < 1e-14);
        assert!(linalg::max_abs_entry(&(jm.phi() - jm.a())) < 1e-14);
        assert_eq!(jm.q(), 0);
    }

    #[test]
    fn full_restriction_makes_competitor_deterministic() {
        let m = toy_model();
        let restr = LinearRestriction::select(3, &[0, 1, 2], &[1.0, 2.0, 3.0]).unwrap();
        let jm = joint_moments_restricted(&m, &restr, &DVector::from_vec(vec![0.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(jm.q(), 3);
        assert!(linalg::max_abs_entry(&(jm.xi() - jm.a())) < 1e-12);
        assert!(linalg::max_abs_entry(jm.phi()) < 1e-12);
        let bt = fit_restricted(&m, &restr).unwrap();
        assert!((bt - DVector::from_vec(vec![1.0, 2.0, 3.0])).norm() < 1e-10);
    }

    #[test]
    fn true_restriction_gives_zero_bias() {
        let m = toy_model();
        let beta = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let rm = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let restr = LinearRestriction::new(rm.clone(), &rm * &beta).unwrap();
        let jm = joint_moments_restricted(&m, &restr, &beta).unwrap();
        assert!(jm.gamma().norm() < 1e-12);
        assert_eq!(jm.q(), 1);
    }
}
