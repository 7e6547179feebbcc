//! Real-data pipeline: CSV ingestion, Pearson correlations, point estimates
//! and a pairs-bootstrap estimate of relative efficiency.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{estimate_pair, Competitor, LinearModel};
use crate::rng;
use crate::shrinkage::EstimatorSpec;
use crate::stats::CoMoments;

/// Numeric columns of a table, plus any all-text label columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    data: DMatrix<f64>,
    labels: Vec<(String, Vec<String>)>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if columns.len() != data.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                columns.len(),
                data.ncols()
            )));
        }
        Ok(Self {
            columns,
            data,
            labels: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn labels(&self) -> &[(String, Vec<String>)] {
        &self.labels
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        Ok(self.data.column(self.index(name)?).into_owned())
    }

    /// Regression of `response` on an intercept and `covariates`, with the
    /// noise scale estimated from the residuals.
    pub fn model(&self, response: &str, covariates: &[String]) -> Result<LinearModel> {
        let y = self.column(response)?;
        let idx = covariates
            .iter()
            .map(|c| self.index(c))
            .collect::<Result<Vec<_>>>()?;
        let x = DMatrix::from_fn(self.n(), idx.len() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                self.data[(r, idx[c - 1])]
            }
        });
        LinearModel::with_estimated_sigma(x, y)
    }

    /// Subset of rows, in the given order (repeats allowed).
    pub fn rows(&self, indices: &[usize]) -> Self {
        let data = DMatrix::from_fn(indices.len(), self.data.ncols(), |r, c| self.data[(indices[r], c)]);
        Self {
            columns: self.columns.clone(),
            data,
            labels: Vec::new(),
        }
    }
}

/// Read a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

/// Parse CSV text. Columns in which no cell parses as a number are kept as
/// labels; in every other column an empty cell is a missing value and a
/// non-numeric cell is a parse error. Rows are numbered from 1 (first data row).
pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Parse {
            row: 0,
            column: "<header>".into(),
            value: String::new(),
        });
    }
    let mut cells: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        cells.push(record?.iter().map(str::to_string).collect());
    }
    if cells.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: "<data>".into(),
            value: String::new(),
        });
    }
    let numeric: Vec<bool> = (0..header.len())
        .map(|c| cells.iter().any(|row| row[c].parse::<f64>().is_ok()))
        .collect();
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if !numeric[c] {
            labels.push((name.clone(), cells.iter().map(|row| row[c].clone()).collect()));
            continue;
        }
        columns.push(name.clone());
        for (r, row) in cells.iter().enumerate() {
            let raw = &row[c];
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue {
                    row: r + 1,
                    column: name.clone(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: name.clone(),
                value: raw.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::MissingValue {
                    row: r + 1,
                    column: name.clone(),
                });
            }
            values.push(v);
        }
    }
    let data = DMatrix::from_column_slice(cells.len(), columns.len(), &values);
    Ok(Dataset {
        columns,
        data,
        labels,
    })
}

/// Pearson correlations with two-sided t-test p-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl CorrelationTable {
    pub fn get(&self, a: &str, b: &str) -> Result<(f64, f64)> {
        let i = self.position(a)?;
        let j = self.position(b)?;
        Ok((self.r[i][j], self.p[i][j]))
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// Correlation matrix of all numeric columns. The p-value of `r` uses
/// `t = r sqrt((n-2)/(1-r^2))` against Student t with `n - 2` degrees of freedom.
pub fn correlation_table(data: &Dataset) -> Result<CorrelationTable> {
    let n = data.n();
    if n < 3 {
        return Err(Error::Config(format!("correlations need at least 3 rows, got {n}")));
    }
    let m = data.columns.len();
    let mut centered = Vec::with_capacity(m);
    for (c, name) in data.columns.iter().enumerate() {
        let col = data.data.column(c);
        let dev = col.add_scalar(-col.mean());
        let norm = dev.norm();
        if norm == 0.0 {
            return Err(Error::ConstantColumn(name.clone()));
        }
        centered.push(dev / norm);
    }
    let df = (n - 2) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Config(e.to_string()))?;
    let mut r = vec![vec![0.0; m]; m];
    let mut p = vec![vec![0.0; m]; m];
    for i in 0..m {
        r[i][i] = 1.0;
        for j in i + 1..m {
            let v = centered[i].dot(&centered[j]).clamp(-1.0, 1.0);
            let pv = if v.abs() >= 1.0 {
                0.0
            } else {
                let t = v * (df / (1.0 - v * v)).sqrt();
                2.0 * (1.0 - t_dist.cdf(t.abs()))
            };
            r[i][j] = v;
            r[j][i] = v;
            p[i][j] = pv;
            p[j][i] = pv;
        }
    }
    Ok(CorrelationTable {
        names: data.columns.clone(),
        r,
        p,
    })
}

/// Estimates of each recipe on the full sample, keyed by estimator name.
/// The competitor is the diagonal estimator `D^-1 X'y`.
pub fn point_estimates(
    data: &Dataset,
    response: &str,
    covariates: &[String],
    specs: &[EstimatorSpec],
) -> Result<BTreeMap<String, Vec<f64>>> {
    let model = data.model(response, covariates)?;
    let pair = estimate_pair(&model, &Competitor::Diag)?;
    specs
        .iter()
        .map(|spec| {
            let est = spec.apply(&model, &Competitor::Diag, &pair)?;
            Ok((spec.name(), est.estimate.as_slice().to_vec()))
        })
        .collect()
}

/// Point estimates and bootstrap relative efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub coefficients: Vec<String>,
    pub point_estimates: BTreeMap<String, Vec<f64>>,
    /// Bootstrap MSE of each estimator divided by that of least squares.
    pub relative_efficiency: BTreeMap<String, f64>,
    /// Delta-method standard errors of the ratios.
    pub relative_efficiency_se: BTreeMap<String, f64>,
    #[serde(rename = "B")]
    pub bootstrap_replications: usize,
    pub seed: u64,
    /// Resamples discarded because their design was rank deficient.
    pub redraws: usize,
    pub scheme: &'static str,
}

/// Pairs bootstrap: resample rows with replacement, refit every estimator
/// and measure squared error against the full-sample least-squares fit.
/// Rank-deficient resamples are redrawn; the run fails after `10 B` redraws.
pub fn bootstrap_efficiency(
    data: &Dataset,
    response: &str,
    covariates: &[String],
    specs: &[EstimatorSpec],
    b: usize,
    seed: u64,
) -> Result<EfficiencyReport> {
    if b < 100 {
        return Err(Error::Config(format!("bootstrap needs B >= 100, got {b}")));
    }
    let mut specs_all = vec![EstimatorSpec::Ls];
    specs_all.extend(specs.iter().filter(|s| **s != EstimatorSpec::Ls).cloned());
    let model = data.model(response, covariates)?;
    let reference = crate::model::fit_ols(&model)?;
    let point = point_estimates(data, response, covariates, &specs_all)?;
    let n = data.n();
    let max_redraws = 10 * b;
    let key = rng::derive_key(seed, &[0x626f_6f74]);

    let blocks = rng::par_blocks(b, key, |rng, range| -> Result<(Vec<CoMoments>, usize)> {
        let mut acc = vec![CoMoments::default(); specs_all.len()];
        let mut redraws = 0usize;
        let mut idx = vec![0usize; n];
        for _ in range {
            let (m, pair) = loop {
                for i in idx.iter_mut() {
                    *i = rng.random_range(0..n);
                }
                let sample = data.rows(&idx);
                match sample.model(response, covariates).and_then(|m| {
                    let p = estimate_pair(&m, &Competitor::Diag)?;
                    Ok((m, p))
                }) {
                    Ok(v) => break v,
                    Err(Error::Singular { .. }) | Err(Error::DegenerateColumn { .. }) => {
                        redraws += 1;
                        if redraws > max_redraws {
                            return Err(Error::BootstrapExhausted { redraws });
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            let base = (&pair.beta_hat - &reference).norm_squared();
            for (a, spec) in acc.iter_mut().zip(&specs_all) {
                let est = spec.apply(&m, &Competitor::Diag, &pair)?;
                a.push((est.estimate - &reference).norm_squared(), base);
            }
        }
        Ok((acc, redraws))
    });

    let mut total = vec![CoMoments::default(); specs_all.len()];
    let mut redraws = 0;
    for block in blocks {
        let (acc, r) = block?;
        redraws += r;
        for (t, a) in total.iter_mut().zip(acc) {
            t.merge(&a);
        }
    }
    if redraws > max_redraws {
        return Err(Error::BootstrapExhausted { redraws });
    }
    let mut relative_efficiency = BTreeMap::new();
    let mut relative_efficiency_se = BTreeMap::new();
    for (spec, acc) in specs_all.iter().zip(&total) {
        let (r, se) = if *spec == EstimatorSpec::Ls { (1.0, 0.0) } else { acc.ratio() };
        relative_efficiency.insert(spec.name(), r);
        relative_efficiency_se.insert(spec.name(), se);
    }
    let mut coefficients = vec!["intercept".to_string()];
    coefficients.extend(covariates.iter().cloned());
    Ok(EfficiencyReport {
        coefficients,
        point_estimates: point,
        relative_efficiency,
        relative_efficiency_se,
        bootstrap_replications: b,
        seed,
        redraws,
        scheme: "pairs bootstrap; squared error against the full-sample least-squares fit",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table() -> &'static str {
        "name,a,b,c\nx,1,2.5,3\ny,2,1.0,5\nz,3,0.5,4\nw,4,2.0,8\nv,5,3.5,7\n"
    }

    #[test]
    fn labels_and_numbers_split() {
        let d = read_csv(table().as_bytes()).unwrap();
        assert_eq!(d.columns(), &["a", "b", "c"]);
        assert_eq!(d.n(), 5);
        assert_eq!(d.labels()[0].0, "name");
        assert_eq!(d.column("c").unwrap()[3], 8.0);
        assert!(matches!(d.column("zz"), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn bad_cells_report_coordinates() {
        let missing = "a,b\n1,2\n3,\n";
        match read_csv(missing.as_bytes()) {
            Err(Error::MissingValue { row, column }) => assert_eq!((row, column.as_str()), (2, "b")),
            other => panic!("{other:?}"),
        }
        let junk = "a,b\n1,2\n3,x7\n5,6\n";
        match read_csv(junk.as_bytes()) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "x7"))
            }
            other => panic!("{other:?}"),
        }
        assert!(read_csv("".as_bytes()).is_err());
        assert!(read_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn correlation_properties() {
        let d = read_csv(table().as_bytes()).unwrap();
        let t = correlation_table(&d).unwrap();
        for i in 0..3 {
            assert_eq!(t.r[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(t.r[i][j], t.r[j][i]);
                assert!(t.r[i][j].abs() <= 1.0);
                assert!((0.0..=1.0).contains(&t.p[i][j]));
            }
        }
        // a vs c: hand value
        let (r, _) = t.get("a", "c").unwrap();
        assert_relative_eq!(r, 0.8387421368293256, epsilon = 1e-12);
        let constant = read_csv("a,b\n1,2\n1,3\n1,4\n".as_bytes()).unwrap();
        assert!(matches!(correlation_table(&constant), Err(Error::ConstantColumn(_))));
    }

    #[test]
    fn zero_weight_matches_least_squares() {
        let d = read_csv(table().as_bytes()).unwrap();
        let covs = vec!["a".to_string(), "b".to_string()];
        let specs = [
            EstimatorSpec::Ls,
            EstimatorSpec::Shrink { h: crate::shrinkage::HSpec::Zero, c: 1.0 },
        ];
        let est = point_estimates(&d, "c", &covs, &specs).unwrap();
        let ls = &est["LS"];
        let zero = est.iter().find(|(k, _)| k.starts_with("shrink")).unwrap().1;
        assert_eq!(ls, zero);
    }

    #[test]
    fn bootstrap_needs_enough_replications() {
        let d = read_csv(table().as_bytes()).unwrap();
        let covs = vec!["a".to_string()];
        assert!(bootstrap_efficiency(&d, "c", &covs, &[EstimatorSpec::Spsl], 10, 0).is_err());
    }
}
