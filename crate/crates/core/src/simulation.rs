//! Monte Carlo sweeps of relative mean squared error against least squares.
//!
//! Each cell of the sweep fixes `(n, k, sigma, rho, beta'beta[, gamma'gamma])`,
//! draws one design (intercept plus equicorrelated `N(1, 1)` columns), and
//! replicates the regression noise. The design depends only on
//! `(seed, n, k, rho)` and replication `i` uses the same standard-normal noise
//! in every cell with the same `(seed, n, k, rho)`, so comparisons across
//! `sigma` and `beta'beta` use common random numbers.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::EllipticalSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Competitor, EstimatePair, LinearModel, LinearRestriction};
use crate::rng;
use crate::shrinkage::EstimatorSpec;
use crate::stats::CoMoments;

const DESIGN_SALT: u64 = 0x6465_7369_676e;
const NOISE_SALT: u64 = 0x6e_6f69_7365;

/// A scalar or a list in the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl<T> From<T> for OneOrMany<T> {
    fn from(v: T) -> Self {
        OneOrMany::One(v)
    }
}

/// Which competing estimator the sweep combines with least squares.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompetitorSpec {
    /// `D^-1 X'y` with `D = diag(X'X)`.
    #[default]
    Diag,
    /// Restricted least squares under `R beta = r`. Rows of `matrix` are the
    /// restrictions; when omitted, all slopes are restricted (all coefficients
    /// when `k = 3`, so the restriction has rank 3). The right-hand side is
    /// derived per cell from `beta` and the `gamma'gamma` target.
    Restricted {
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
    },
}

impl CompetitorSpec {
    /// Restriction matrix for `k` coefficients.
    pub fn restriction_matrix(&self, k: usize) -> Result<Option<DMatrix<f64>>> {
        match self {
            CompetitorSpec::Diag => Ok(None),
            CompetitorSpec::Restricted { matrix: Some(rows) } => {
                if rows.is_empty() {
                    return Err(Error::EmptyRestriction);
                }
                if rows.iter().any(|r| r.len() != k) {
                    return Err(Error::Config(format!("restriction rows must have {k} entries")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(Some(DMatrix::from_row_slice(rows.len(), k, &flat)))
            }
            CompetitorSpec::Restricted { matrix: None } => {
                let indices: Vec<usize> = if k == 3 { (0..3).collect() } else { (1..k).collect() };
                if indices.is_empty() {
                    return Err(Error::EmptyRestriction);
                }
                let zeros = vec![0.0; indices.len()];
                Ok(Some(LinearRestriction::select(k, &indices, &zeros)?.matrix().clone()))
            }
        }
    }
}

fn default_estimators() -> Vec<EstimatorSpec> {
    vec![EstimatorSpec::Ls, EstimatorSpec::Spsl]
}

/// Sweep configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: OneOrMany<usize>,
    pub k: OneOrMany<usize>,
    pub sigma: OneOrMany<f64>,
    pub rho: OneOrMany<f64>,
    pub beta_norms: Vec<f64>,
    #[serde(default)]
    pub gamma_norms: Option<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub distribution: EllipticalSpec,
    #[serde(default)]
    pub competitor: CompetitorSpec,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replications < 100 {
            return bad(format!("replications must be >= 100, got {}", self.replications));
        }
        let ns = self.n.values();
        let ks = self.k.values();
        if ns.is_empty() || ks.is_empty() || self.sigma.values().is_empty() || self.rho.values().is_empty() {
            return bad("n, k, sigma and rho need at least one value".into());
        }
        for &k in &ks {
            if k < 2 {
                return bad(format!("k must be >= 2, got {k}"));
            }
            for &n in &ns {
                if n <= k {
                    return bad(format!("need n > k, got n={n}, k={k}"));
                }
            }
            for rho in self.rho.values() {
                check_rho(rho, k)?;
            }
            self.competitor.restriction_matrix(k)?;
        }
        for s in self.sigma.values() {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma must be finite and > 0, got {s}"));
            }
        }
        if self.beta_norms.is_empty() {
            return bad("beta_norms is empty".into());
        }
        for &b in &self.beta_norms {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("beta norms must be finite and > 0, got {b}"));
            }
        }
        if let Some(gs) = &self.gamma_norms {
            if self.competitor == CompetitorSpec::Diag {
                return bad("gamma_norms needs a restricted competitor; the diagonal competitor's bias is fixed by beta".into());
            }
            if gs.is_empty() || gs.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
                return bad("gamma norms must be a non-empty list of finite values >= 0".into());
            }
        }
        if self.estimators.is_empty() {
            return bad("estimators is empty".into());
        }
        for e in &self.estimators {
            e.validate()?;
        }
        self.distribution.validate()
    }

    /// Number of cells the sweep will produce.
    pub fn cell_count(&self) -> usize {
        self.n.values().len()
            * self.k.values().len()
            * self.sigma.values().len()
            * self.rho.values().len()
            * self.beta_norms.len()
            * self.gamma_norms.as_ref().map_or(1, Vec::len)
    }
}

fn check_rho(rho: f64, k: usize) -> Result<()> {
    let lower = if k > 2 { -1.0 / (k as f64 - 2.0) } else { -1.0 };
    if rho > lower && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "rho={rho} makes the equicorrelation matrix of {} columns singular or indefinite",
            k - 1
        )))
    }
}

/// Intercept column followed by `k - 1` columns drawn from `N(1, C)`, where
/// `C` has unit diagonal and off-diagonal `rho`.
pub fn generate_design(n: usize, k: usize, rho: f64, seed: u64) -> Result<DMatrix<f64>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be >= 2, got {k}")));
    }
    check_rho(rho, k)?;
    let m = k - 1;
    let corr = DMatrix::from_fn(m, m, |r, c| if r == c { 1.0 } else { rho });
    let chol = corr
        .cholesky()
        .ok_or_else(|| Error::Config(format!("equicorrelation matrix with rho={rho} is not positive definite")))?
        .l();
    let key = rng::derive_key(seed, &[DESIGN_SALT, n as u64, k as u64, rho.to_bits()]);
    let mut rng = rng::stream(key, 0);
    let mut x = DMatrix::from_element(n, k, 1.0);
    let mut z = DVector::zeros(m);
    for r in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let row = &chol * &z;
        for c in 0..m {
            x[(r, c + 1)] = 1.0 + row[c];
        }
    }
    Ok(x)
}

/// `sqrt(target / k) * (1, ..., 1)`, so that `beta'beta = target`.
pub fn make_beta(k: usize, target_norm: f64) -> Result<DVector<f64>> {
    if k == 0 || !(target_norm > 0.0 && target_norm.is_finite()) {
        return Err(Error::Config(format!("need k >= 1 and a finite positive norm, got k={k}, {target_norm}")));
    }
    Ok(DVector::from_element(k, (target_norm / k as f64).sqrt()))
}

/// One output row: an estimator's RMSE in one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell_id: usize,
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    pub rho: f64,
    pub beta_norm: f64,
    pub gamma_norm: f64,
    pub estimator: String,
    pub rmse: f64,
    pub rmse_se: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Choices made where the experiment leaves freedom, stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub beta_direction: &'static str,
    pub gamma_construction: &'static str,
    pub design: &'static str,
    pub distribution: String,
    pub competitor: CompetitorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows of one estimator, in cell order.
    pub fn estimator_rows<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == name)
    }
}

/// Design-dependent quantities reused by every replication of a cell.
struct CellKernel {
    x: DMatrix<f64>,
    /// `(X'X)^-1 X'`
    hat: DMatrix<f64>,
    competitor: CompetitorKernel,
    /// `a_hat = S^2 * a_factor`
    a_factor: f64,
    n: usize,
    k: usize,
}

enum CompetitorKernel {
    /// `D^-1 X'`
    Diag(DMatrix<f64>),
    /// `J`, `R`, `r`
    Restricted(DMatrix<f64>, DMatrix<f64>, DVector<f64>),
}

impl CellKernel {
    fn new(x: DMatrix<f64>, competitor: &Competitor) -> Result<Self> {
        let (n, k) = x.shape();
        let model = LinearModel::new(x.clone(), DVector::zeros(n), 1.0)?;
        let g_inv = model.gram_inverse()?;
        let hat = &g_inv * x.transpose();
        let (kernel, a_factor) = match competitor {
            Competitor::Diag => {
                let mut dinv_xt = x.transpose();
                let mut trace_dinv = 0.0;
                for (j, mut row) in dinv_xt.row_iter_mut().enumerate() {
                    let d = x.column(j).norm_squared();
                    if d <= 0.0 {
                        return Err(Error::DegenerateColumn { column: j });
                    }
                    row /= d;
                    trace_dinv += 1.0 / d;
                }
                (CompetitorKernel::Diag(dinv_xt), g_inv.trace() - trace_dinv)
            }
            Competitor::Restricted(restriction) => {
                let j = crate::model::restriction_gain(&model, restriction)?;
                let q = restriction.rank();
                let factor = if q <= 2 {
                    0.0
                } else {
                    let xi = linalg::symmetrize(&(&j * restriction.matrix() * &g_inv));
                    let (values, _) = linalg::sym_eigen(&xi);
                    (q as f64 - 2.0) * values[q - 1].max(0.0)
                };
                (
                    CompetitorKernel::Restricted(j, restriction.matrix().clone(), restriction.r().clone()),
                    factor,
                )
            }
        };
        Ok(Self {
            x,
            hat,
            competitor: kernel,
            a_factor,
            n,
            k,
        })
    }

    /// Estimate pair and `a_hat` for response `y`.
    fn fit(&self, y: &DVector<f64>) -> Result<(EstimatePair, f64)> {
        let beta_hat = &self.hat * y;
        let resid = y - &self.x * &beta_hat;
        let s2 = resid.norm_squared() / (self.n - self.k) as f64;
        let beta_tilde = match &self.competitor {
            CompetitorKernel::Diag(dinv_xt) => dinv_xt * y,
            CompetitorKernel::Restricted(j, rm, r) => &beta_hat - j * (rm * &beta_hat - r),
        };
        Ok((EstimatePair::new(beta_hat, beta_tilde)?, s2 * self.a_factor))
    }
}

/// Realized `gamma'gamma` of the competitor for the given design and `beta`.
fn realized_gamma_norm(x: &DMatrix<f64>, competitor: &Competitor, beta: &DVector<f64>) -> Result<f64> {
    match competitor {
        Competitor::Diag => {
            let g = x.transpose() * x;
            let gb = &g * beta;
            Ok((0..beta.len()).map(|j| (gb[j] / g[(j, j)] - beta[j]).powi(2)).sum())
        }
        Competitor::Restricted(restriction) => {
            let model = LinearModel::new(x.clone(), DVector::zeros(x.nrows()), 1.0)?;
            let j = crate::model::restriction_gain(&model, restriction)?;
            let gamma = -(j * (restriction.matrix() * beta - restriction.r()));
            Ok(gamma.norm_squared())
        }
    }
}

/// Restriction with `r = R beta - s * 1`, where `s` is chosen so the bias
/// `gamma = -J (R beta - r)` has `gamma'gamma = target`.
fn restriction_for_gamma(
    x: &DMatrix<f64>,
    matrix: &DMatrix<f64>,
    beta: &DVector<f64>,
    target: f64,
) -> Result<LinearRestriction> {
    let rows = matrix.nrows();
    let base = LinearRestriction::new(matrix.clone(), matrix * beta)?;
    if target == 0.0 {
        return Ok(base);
    }
    let model = LinearModel::new(x.clone(), DVector::zeros(x.nrows()), 1.0)?;
    let j = crate::model::restriction_gain(&model, &base)?;
    let unit = DVector::from_element(rows, 1.0);
    let per_unit = (&j * &unit).norm_squared();
    if per_unit <= 0.0 {
        return Err(Error::DegenerateRestriction);
    }
    let s = (target / per_unit).sqrt();
    base.with_rhs(matrix * beta - unit * s)
}

struct Cell {
    id: usize,
    n: usize,
    k: usize,
    sigma: f64,
    rho: f64,
    beta_norm: f64,
    gamma_target: Option<f64>,
}

fn cells(cfg: &SimConfig) -> Vec<Cell> {
    let gammas: Vec<Option<f64>> = match &cfg.gamma_norms {
        Some(g) => g.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut out = Vec::new();
    for n in cfg.n.values() {
        for k in cfg.k.values() {
            for sigma in cfg.sigma.values() {
                for rho in cfg.rho.values() {
                    for &beta_norm in &cfg.beta_norms {
                        for &gamma_target in &gammas {
                            out.push(Cell {
                                id: out.len(),
                                n,
                                k,
                                sigma,
                                rho,
                                beta_norm,
                                gamma_target,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn run_cell(cfg: &SimConfig, cell: &Cell) -> Result<Vec<SweepRow>> {
    let (n, k) = (cell.n, cell.k);
    let x = generate_design(n, k, cell.rho, cfg.seed)?;
    let beta = make_beta(k, cell.beta_norm)?;
    let competitor = match cfg.competitor.restriction_matrix(k)? {
        None => Competitor::Diag,
        Some(matrix) => Competitor::Restricted(restriction_for_gamma(
            &x,
            &matrix,
            &beta,
            cell.gamma_target.unwrap_or(0.0),
        )?),
    };
    let gamma_norm = realized_gamma_norm(&x, &competitor, &beta)?;
    let kernel = CellKernel::new(x, &competitor)?;
    let mean = &kernel.x * &beta;
    let law = cfg.distribution;
    let sigma = cell.sigma;
    let est = &cfg.estimators;

    let key = rng::derive_key(cfg.seed, &[NOISE_SALT, n as u64, k as u64, cell.rho.to_bits()]);
    let blocks = rng::par_blocks(cfg.replications, key, |rng, range| -> Result<Vec<CoMoments>> {
        let mut acc = vec![CoMoments::default(); est.len()];
        let mut y = DVector::zeros(n);
        for _ in range {
            let z = law.draw_scale(rng);
            let scale = sigma / z.sqrt();
            for (yi, mi) in y.iter_mut().zip(mean.iter()) {
                *yi = mi + scale * rng.sample::<f64, _>(StandardNormal);
            }
            let (pair, a_hat) = kernel.fit(&y)?;
            let base_loss = (&pair.beta_hat - &beta).norm_squared();
            for (a, spec) in acc.iter_mut().zip(est) {
                let out = spec.apply_with_a_hat(&pair, a_hat)?;
                a.push((out.estimate - &beta).norm_squared(), base_loss);
            }
        }
        Ok(acc)
    });
    let mut total = vec![CoMoments::default(); est.len()];
    for block in blocks {
        for (t, a) in total.iter_mut().zip(block?) {
            t.merge(&a);
        }
    }
    Ok(est
        .iter()
        .zip(total)
        .map(|(spec, acc)| {
            let (rmse, rmse_se) = match spec {
                EstimatorSpec::Ls => (1.0, 0.0),
                _ => acc.ratio(),
            };
            SweepRow {
                cell_id: cell.id,
                n,
                k,
                sigma,
                rho: cell.rho,
                beta_norm: cell.beta_norm,
                gamma_norm,
                estimator: spec.name(),
                rmse,
                rmse_se,
                replications: cfg.replications,
                seed: cfg.seed,
            }
        })
        .collect())
}

/// Run every cell of the configuration, in order.
pub fn run_sweep(cfg: &SimConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.cell_count() * cfg.estimators.len());
    for cell in cells(cfg) {
        let cell_rows = run_cell(cfg, &cell).map_err(|e| Error::Cell {
            cell: cell.id,
            source: Box::new(e),
        })?;
        rows.extend(cell_rows);
    }
    Ok(SweepResult {
        rows,
        metadata: SweepMetadata {
            beta_direction: "all-ones vector scaled to the target beta'beta",
            gamma_construction: "r = R beta - s*1 with s set so that gamma'gamma hits the target; gamma = -J (R beta - r)",
            design: "intercept plus equicorrelated N(1,1) columns, one design per (seed, n, k, rho)",
            distribution: cfg.distribution.label(),
            competitor: cfg.competitor.clone(),
        },
    })
}

/// Sweep over `gamma'gamma` with a restricted competitor.
pub fn gamma_sweep(cfg: &SimConfig, gamma_norms: &[f64]) -> Result<SweepResult> {
    let mut cfg = cfg.clone();
    if cfg.competitor == CompetitorSpec::Diag {
        cfg.competitor = CompetitorSpec::Restricted { matrix: None };
    }
    cfg.gamma_norms = Some(gamma_norms.to_vec());
    run_sweep(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::estimate_pair;
    use crate::shrinkage::{spsl_constant, HSpec};
    use approx::assert_relative_eq;

    fn config() -> SimConfig {
        SimConfig {
            n: 15.into(),
            k: 3.into(),
            sigma: 0.5.into(),
            rho: 0.6.into(),
            beta_norms: vec![1.2, 4.8],
            gamma_norms: None,
            replications: 500,
            seed: 7,
            distribution: EllipticalSpec::DiracAtOne,
            competitor: CompetitorSpec::Diag,
            estimators: vec![
                EstimatorSpec::Ls,
                EstimatorSpec::Spsl,
                EstimatorSpec::Shrink { h: HSpec::Zero, c: 0.0 },
            ],
        }
    }

    #[test]
    fn beta_has_requested_norm() {
        let b = make_beta(3, 1.2).unwrap();
        assert_relative_eq!(b[0], 0.4f64.sqrt(), epsilon = 1e-15);
        for (k, t) in [(4, 4.8), (7, 29.7), (2, 0.3)] {
            assert!((make_beta(k, t).unwrap().norm_squared() - t).abs() < 1e-12);
        }
        assert_relative_eq!(make_beta(4, 4.8).unwrap()[2], 1.2f64.sqrt(), epsilon = 1e-15);
        assert!(make_beta(3, 0.0).is_err());
    }

    #[test]
    fn design_shape_and_determinism() {
        let x = generate_design(40, 4, 0.3, 5).unwrap();
        assert!(x.column(0).iter().all(|&v| v == 1.0));
        assert_eq!(x, generate_design(40, 4, 0.3, 5).unwrap());
        assert_ne!(x, generate_design(40, 4, 0.3, 6).unwrap());
        assert!(generate_design(10, 4, -0.6, 1).is_err());
        assert!(generate_design(10, 1, 0.0, 1).is_err());
    }

    #[test]
    fn uncorrelated_design_columns() {
        let n = 10_000;
        let x = generate_design(n, 4, 0.0, 11).unwrap();
        for a in 1..4 {
            assert!((x.column(a).mean() - 1.0).abs() < 4.0 / (n as f64).sqrt());
            for b in a + 1..4 {
                let ca = x.column(a).add_scalar(-x.column(a).mean());
                let cb = x.column(b).add_scalar(-x.column(b).mean());
                let r = ca.dot(&cb) / (ca.norm() * cb.norm());
                assert!(r.abs() < 3.0 / (n as f64).sqrt(), "r={r}");
            }
        }
        let x = generate_design(n, 2, 0.5, 11).unwrap();
        assert!((x.column(1).mean() - 1.0).abs() < 0.05);
    }

    #[test]
    fn kernel_matches_generic_fit() {
        let x = generate_design(15, 4, 0.6, 3).unwrap();
        let y = DVector::from_fn(15, |i, _| (i as f64 * 0.37).sin() + 1.0);
        let model = LinearModel::new(x.clone(), y.clone(), 1.0).unwrap();
        let restriction = LinearRestriction::select(4, &[1, 2, 3], &[0.5, 0.0, 1.0]).unwrap();
        for comp in [Competitor::Diag, Competitor::Restricted(restriction)] {
            let kernel = CellKernel::new(x.clone(), &comp).unwrap();
            let (pair, a_hat) = kernel.fit(&y).unwrap();
            let reference = estimate_pair(&model, &comp).unwrap();
            assert!((&pair.beta_hat - &reference.beta_hat).amax() < 1e-10);
            assert!((&pair.beta_tilde - &reference.beta_tilde).amax() < 1e-10);
            assert_relative_eq!(a_hat, spsl_constant(&model, &comp).unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn sweep_rows_and_controls() {
        let res = run_sweep(&config()).unwrap();
        assert_eq!(res.rows.len(), 2 * 3);
        for row in &res.rows {
            if row.estimator == "LS" || row.estimator.starts_with("shrink") {
                assert_eq!(row.rmse, 1.0, "{row:?}");
            }
        }
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "cell_id,n,k,sigma,rho,beta_norm,gamma_norm,estimator,rmse,rmse_se,replications,seed\n"
        ));
        assert_eq!(res, run_sweep(&config()).unwrap());
    }

    #[test]
    fn gamma_targets_are_met() {
        let x = generate_design(25, 4, 0.6, 1).unwrap();
        let beta = make_beta(4, 4.8).unwrap();
        let m = CompetitorSpec::Restricted { matrix: None }.restriction_matrix(4).unwrap().unwrap();
        for target in [0.0, 0.5, 3.0, 20.0] {
            let r = restriction_for_gamma(&x, &m, &beta, target).unwrap();
            let g = realized_gamma_norm(&x, &Competitor::Restricted(r), &beta).unwrap();
            assert!((g - target).abs() < 1e-9 * target.max(1.0), "{g} vs {target}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = config();
        c.replications = 99;
        assert!(c.validate().is_err());
        let mut c = config();
        c.gamma_norms = Some(vec![1.0]);
        assert!(c.validate().is_err());
        let mut c = config();
        c.rho = OneOrMany::One(1.0);
        assert!(c.validate().is_err());
        let json = r#"{"n": [15, 25], "k": 3, "sigma": [0.1, 1.0], "rho": 0.6,
            "beta_norms": [1.2], "replications": 100, "seed": 1,
            "distribution": {"gamma_mixture": {"nu": 5.0}},
            "competitor": {"restricted": {}},
            "estimators": [{"kind": "ls"}, {"kind": "spsl"},
                           {"kind": "shrink", "h": {"smooth_inverse": {"p": 2.0}}, "c": -0.5}]}"#;
        let cfg = SimConfig::from_json(json).unwrap();
        assert_eq!(cfg.cell_count(), 4);
        assert!(SimConfig::from_json(r#"{"n": 15}"#).is_err());
        assert!(SimConfig::from_json(&json.replace("\"seed\"", "\"sede\"")).is_err());
    }
}
