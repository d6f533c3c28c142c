//! Vector autoregression: least-squares estimation, BIC order selection,
//! stability and simulation.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Moments, SubsetFit};
use crate::panel::Panel;

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_MAX_ORDER: usize = 10;
const STABILITY_MARGIN: f64 = 1e-8;

/// Start date given to simulated panels.
pub fn simulation_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

/// A fitted or constructed VAR(p):
/// `x_t = c + sum_k A_k x_{t-k} + e_t`, `cov(e_t) = sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VarModelRepr", into = "VarModelRepr")]
pub struct VarModel {
    order: usize,
    coeffs: Vec<DMatrix<f64>>,
    intercept: Vec<f64>,
    sigma: DMatrix<f64>,
    labels: Vec<String>,
    nobs: usize,
}

#[derive(Serialize, Deserialize)]
struct VarModelRepr {
    order: usize,
    labels: Vec<String>,
    /// `coeffs[k][i][j]`: effect of series j at lag k+1 on series i.
    coeffs: Vec<Vec<Vec<f64>>>,
    intercept: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    nobs: usize,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("{what} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl From<VarModel> for VarModelRepr {
    fn from(m: VarModel) -> Self {
        Self {
            order: m.order,
            coeffs: m.coeffs.iter().map(to_rows).collect(),
            sigma: to_rows(&m.sigma),
            intercept: m.intercept,
            labels: m.labels,
            nobs: m.nobs,
        }
    }
}

impl TryFrom<VarModelRepr> for VarModel {
    type Error = Error;

    fn try_from(r: VarModelRepr) -> Result<Self> {
        let n = r.labels.len();
        let coeffs = r
            .coeffs
            .iter()
            .map(|c| from_rows(c, n, "coefficient matrix"))
            .collect::<Result<Vec<_>>>()?;
        if coeffs.len() != r.order {
            return Err(Error::InvalidArgument(format!(
                "order {} but {} coefficient matrices",
                r.order,
                coeffs.len()
            )));
        }
        let sigma = from_rows(&r.sigma, n, "sigma")?;
        let mut m = VarModel::new(coeffs, sigma, r.labels)?.with_intercept(r.intercept)?;
        m.nobs = r.nobs;
        Ok(m)
    }
}

impl VarModel {
    /// Builds a model, checking shapes and that `sigma` is symmetric PSD.
    pub fn new(coeffs: Vec<DMatrix<f64>>, sigma: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("VAR order must be >= 1".into()));
        }
        if coeffs.iter().any(|a| a.shape() != (n, n)) || sigma.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!("VAR matrices must be {n}x{n}")));
        }
        check_covariance(&sigma)?;
        Ok(Self {
            order: coeffs.len(),
            coeffs,
            intercept: vec![0.0; n],
            sigma,
            labels,
            nobs: 0,
        })
    }

    pub fn with_intercept(mut self, intercept: Vec<f64>) -> Result<Self> {
        if intercept.len() != self.dim() {
            return Err(Error::InvalidArgument("intercept length must equal series count".into()));
        }
        self.intercept = intercept;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Effective sample used by the fit (`T - p`); zero for constructed models.
    pub fn nobs(&self) -> usize {
        self.nobs
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown series `{label}`")))
    }

    /// Companion-form transition matrix of size `n*p`.
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.dim();
        let np = n * self.order;
        let mut c = DMatrix::zeros(np, np);
        for (k, a) in self.coeffs.iter().enumerate() {
            c.view_mut((0, k * n), (n, n)).copy_from(a);
        }
        for i in n..np {
            c[(i, i - n)] = 1.0;
        }
        c
    }

    pub fn spectral_radius(&self) -> f64 {
        self.companion()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn from_parts(
        coeffs: Vec<DMatrix<f64>>,
        intercept: Vec<f64>,
        sigma: DMatrix<f64>,
        labels: Vec<String>,
        nobs: usize,
    ) -> Self {
        Self {
            order: coeffs.len(),
            coeffs,
            intercept,
            sigma,
            labels,
            nobs,
        }
    }
}

fn check_covariance(sigma: &DMatrix<f64>) -> Result<()> {
    let n = sigma.nrows();
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 {
                return Err(Error::InvalidArgument("sigma must be symmetric".into()));
            }
        }
    }
    if n > 0 {
        let min_eig = sigma.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive semi-definite (min eigenvalue {min_eig:.3e})"
            )));
        }
    }
    Ok(())
}

/// True iff the companion matrix has spectral radius below `1 - 1e-8`.
pub fn is_stable(model: &VarModel) -> bool {
    model.spectral_radius() < 1.0 - STABILITY_MARGIN
}

/// Enforces `T - p > n*p + 1`, warning when below `3*n*p`.
pub fn check_degrees_of_freedom(len: usize, vars: usize, order: usize) -> Result<()> {
    let params = vars * order;
    if len <= order || len - order <= params + 1 {
        return Err(Error::DegreesOfFreedom {
            nobs: len,
            vars,
            order,
        });
    }
    if len - order < 3 * params {
        log::warn!(
            "only {} observations for {} regressors per equation; estimates will be noisy",
            len - order,
            params + 1
        );
    }
    Ok(())
}

/// Lagged moment matrix shared by nested VAR regressions.
///
/// Variables are laid out lag-major: column `(lag-1)*n + j` holds series `j`
/// at lag `lag`, followed by the `n` contemporaneous responses.
#[derive(Debug, Clone)]
pub(crate) struct LagDesign {
    n: usize,
    order: usize,
    moments: Moments,
}

impl LagDesign {
    /// Responses run over rows `first_row..T`; requires `first_row >= order`.
    pub fn new(columns: &[&[f64]], order: usize, first_row: usize) -> Self {
        debug_assert!(first_row >= order);
        let n = columns.len();
        let len = columns.first().map_or(0, |c| c.len());
        let nobs = len.saturating_sub(first_row);
        let moments = Moments::from_fn(nobs, n * (order + 1), |r, buf| {
            let t = first_row + r;
            for lag in 1..=order {
                for (j, col) in columns.iter().enumerate() {
                    buf[(lag - 1) * n + j] = col[t - lag];
                }
            }
            for (j, col) in columns.iter().enumerate() {
                buf[order * n + j] = col[t];
            }
        });
        Self { n, order, moments }
    }

    pub fn from_panel(panel: &Panel, order: usize, first_row: usize) -> Self {
        let cols: Vec<&[f64]> = panel.columns().iter().map(Vec::as_slice).collect();
        Self::new(&cols, order, first_row)
    }

    pub fn nobs(&self) -> usize {
        self.moments.nobs
    }

    pub fn resp_col(&self, series: usize) -> usize {
        self.order * self.n + series
    }

    /// Regressor columns for lags `1..=order` of the given series.
    pub fn lag_cols(&self, series: &[usize], order: usize) -> Vec<usize> {
        (1..=order)
            .flat_map(|lag| series.iter().map(move |&j| (lag - 1) * self.n + j))
            .collect()
    }

    /// Regression on the given regressor columns; collinearity is reported
    /// with the offending series label.
    pub fn subset(&self, cols: Vec<usize>, labels: &[String]) -> Result<SubsetFit<'_>> {
        let n = self.n;
        SubsetFit::new(&self.moments, cols.clone()).map_err(|pos| {
            let series = cols[pos] % n;
            Error::Collinear(labels[series].clone())
        })
    }

    /// Fits a VAR(`order`) on the given series only.
    pub fn fit(&self, series: &[usize], order: usize, labels: &[String]) -> Result<VarModel> {
        debug_assert!(order <= self.order);
        let k = series.len();
        let fit = self.subset(self.lag_cols(series, order), labels)?;
        let mut coeffs = vec![DMatrix::zeros(k, k); order];
        let mut intercept = vec![0.0; k];
        for (i, &si) in series.iter().enumerate() {
            let resp = self.resp_col(si);
            let b = fit.coefficients(resp);
            intercept[i] = fit.intercept(resp, &b);
            for lag in 1..=order {
                for j in 0..k {
                    coeffs[lag - 1][(i, j)] = b[(lag - 1) * k + j];
                }
            }
        }
        let resps: Vec<usize> = series.iter().map(|&s| self.resp_col(s)).collect();
        let sigma = fit.residual_cross(&resps) / self.nobs() as f64;
        let sub_labels = series.iter().map(|&s| labels[s].clone()).collect();
        Ok(VarModel::from_parts(coeffs, intercept, sigma, sub_labels, self.nobs()))
    }
}

/// Least-squares VAR(`order`) fit over every series of the panel.
/// Sigma is the residual cross-product divided by `T - p`.
pub fn fit_var(panel: &Panel, order: usize) -> Result<VarModel> {
    if order == 0 {
        return Err(Error::InvalidArgument("VAR order must be >= 1".into()));
    }
    panel.require_complete()?;
    check_degrees_of_freedom(panel.len(), panel.width(), order)?;
    let design = LagDesign::from_panel(panel, order, order);
    let all: Vec<usize> = (0..panel.width()).collect();
    design.fit(&all, order, panel.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub chosen: usize,
    /// BIC value per candidate order.
    pub scores: BTreeMap<usize, f64>,
}

/// Chooses the VAR order in `1..=max_order` minimising
/// `ln det(sigma) + p n^2 ln(T*)/T*` over the common sample `T* = T - max_order`.
/// Ties go to the smaller order.
pub fn select_order_bic(panel: &Panel, max_order: usize) -> Result<OrderSelection> {
    if max_order == 0 {
        return Err(Error::InvalidArgument("max_order must be >= 1".into()));
    }
    panel.require_complete()?;
    let n = panel.width();
    check_degrees_of_freedom(panel.len(), n, max_order)?;
    let design = LagDesign::from_panel(panel, max_order, max_order);
    let all: Vec<usize> = (0..n).collect();
    let resps: Vec<usize> = all.iter().map(|&s| design.resp_col(s)).collect();
    let t_star = design.nobs() as f64;
    let mut scores = BTreeMap::new();
    for p in 1..=max_order {
        let fit = design.subset(design.lag_cols(&all, p), panel.labels())?;
        let sigma = fit.residual_cross(&resps) / t_star;
        let chol = crate::linalg::Cholesky::new(&sigma).map_err(|i| {
            Error::Degenerate(format!(
                "residual covariance is singular at order {p} (series `{}`)",
                panel.labels()[i]
            ))
        })?;
        let penalty = (p * n * n) as f64 * t_star.ln() / t_star;
        scores.insert(p, chol.log_det() + penalty);
    }
    let chosen = scores
        .iter()
        .fold((1, f64::INFINITY), |best, (&p, &s)| if s < best.1 { (p, s) } else { best })
        .0;
    Ok(OrderSelection { chosen, scores })
}

/// Square root `L` with `L L^T = sigma`, via Cholesky or, for singular PSD
/// matrices, the symmetric eigendecomposition.
pub(crate) fn covariance_root(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = sigma.clone().cholesky() {
        return ch.l();
    }
    let eig = sigma.clone().symmetric_eigen();
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// Simulates `len` observations with Gaussian innovations, discarding the
/// first `burn_in` draws. Deterministic for a given seed.
pub fn simulate_var(model: &VarModel, len: usize, seed: u64, burn_in: usize) -> Result<Panel> {
    let columns = simulate_columns(model, len, seed, burn_in)?;
    Panel::from_columns_daily(model.labels.clone(), simulation_start(), columns)
}

pub(crate) fn simulate_columns(model: &VarModel, len: usize, seed: u64, burn_in: usize) -> Result<Vec<Vec<f64>>> {
    if !is_stable(model) {
        return Err(Error::Unstable(model.spectral_radius()));
    }
    let n = model.dim();
    let p = model.order;
    let root = covariance_root(&model.sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = burn_in + len;
    // ring of the last p states, newest first
    let mut history = vec![vec![0.0; n]; p];
    let mut columns = vec![Vec::with_capacity(len); n];
    let mut z = vec![0.0; n];
    let mut x = vec![0.0; n];
    for t in 0..total {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            let mut v = model.intercept[i];
            for (k, a) in model.coeffs.iter().enumerate() {
                let h = &history[k];
                for j in 0..n {
                    v += a[(i, j)] * h[j];
                }
            }
            for (j, zj) in z.iter().enumerate() {
                v += root[(i, j)] * zj;
            }
            x[i] = v;
        }
        history.rotate_right(1);
        history[0].copy_from_slice(&x);
        if t >= burn_in {
            for (c, v) in columns.iter_mut().zip(&x) {
                c.push(*v);
            }
        }
    }
    Ok(columns)
}
