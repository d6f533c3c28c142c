//! Frequency-domain Granger causality.
//!
//! Spectra follow the convention `S(λ) = H(λ) Σ H(λ)*` on `[0, π]`, so the
//! variance of a component is `(1/π) ∫₀^π S_ii(λ) dλ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::panel::Panel;
use crate::var::{check_degrees_of_freedom, is_stable, LagDesign, VarModel};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const DEFAULT_GRID_POINTS: usize = 512;
/// Condition number above which `I - Σ A_k e^{-ikλ}` is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
const NEG_TOL: f64 = 1e-10;
const LOG_FLOOR: f64 = 1e-300;

/// Uniform grid on `[0, π]`, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument(format!("frequency grid needs at least 2 points, got {count}")));
        }
        let step = PI / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|j| j as f64 * step).collect();
        points[count - 1] = PI;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        PI / (self.len() - 1) as f64
    }

    /// Trapezoid approximation of `(1/π) ∫₀^π f(λ) dλ` from grid values.
    pub fn mean(&self, values: &[f64]) -> f64 {
        let n = values.len();
        if n < 2 {
            return values.first().copied().unwrap_or(0.0);
        }
        let inner: f64 = values[1..n - 1].iter().sum();
        (inner + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::uniform(DEFAULT_GRID_POINTS).expect("default grid size is valid")
    }
}

/// Transfer and spectral matrices of a model over a grid.
#[derive(Debug, Clone)]
pub struct SpectralMatrices {
    pub grid: FrequencyGrid,
    pub transfer: Vec<CMatrix>,
    pub spectrum: Vec<CMatrix>,
}

/// `I - Σ_k A_k e^{-ikλ}`.
fn lag_polynomial(coeffs: &[DMatrix<f64>], n: usize, lambda: f64) -> CMatrix {
    let mut d = CMatrix::identity(n, n);
    for (k, a) in coeffs.iter().enumerate() {
        let z = Complex::from_polar(1.0, -((k + 1) as f64) * lambda);
        for j in 0..n {
            for i in 0..n {
                d[(i, j)] -= z * a[(i, j)];
            }
        }
    }
    d
}

fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn invert_checked(d: CMatrix, lambda: f64) -> Result<CMatrix> {
    let nd = norm1(&d);
    let inv = d.try_inverse().ok_or(Error::SpectralSingularity {
        lambda,
        condition: f64::INFINITY,
    })?;
    let condition = nd * norm1(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SpectralSingularity { lambda, condition });
    }
    Ok(inv)
}

fn require_stable(model: &VarModel) -> Result<()> {
    if is_stable(model) {
        Ok(())
    } else {
        Err(Error::Unstable(model.spectral_radius()))
    }
}

/// `H(λ) = (I - Σ A_k e^{-ikλ})^{-1}` at each grid point.
pub fn transfer_function(model: &VarModel, grid: &FrequencyGrid) -> Result<Vec<CMatrix>> {
    require_stable(model)?;
    transfer_unchecked(model, grid)
}

fn transfer_unchecked(model: &VarModel, grid: &FrequencyGrid) -> Result<Vec<CMatrix>> {
    grid.points()
        .iter()
        .map(|&l| invert_checked(lag_polynomial(model.coeffs(), model.dim(), l), l))
        .collect()
}

fn sigma_complex(model: &VarModel) -> CMatrix {
    model.sigma().map(|v| Complex::new(v, 0.0))
}

/// Cross-power spectral density `S(λ) = H Σ H*`.
pub fn cpsd(model: &VarModel, grid: &FrequencyGrid) -> Result<SpectralMatrices> {
    let transfer = transfer_function(model, grid)?;
    let sigma = sigma_complex(model);
    let spectrum = transfer.iter().map(|h| h * &sigma * h.adjoint()).collect();
    Ok(SpectralMatrices {
        grid: grid.clone(),
        transfer,
        spectrum,
    })
}

/// Rotates innovations so that `x`'s innovation is uncorrelated with `y`'s.
///
/// With `P = I - (Σ_yx/Σ_xx) e_y e_xᵀ`, coefficients become `P A_k P⁻¹`,
/// the covariance `P Σ Pᵀ` and the intercept `P c`.
pub fn remove_instantaneous(model: &VarModel, x: usize, y: usize) -> Result<VarModel> {
    let n = model.dim();
    if x >= n || y >= n || x == y {
        return Err(Error::InvalidArgument(format!("need distinct indices below {n}, got x={x}, y={y}")));
    }
    let sigma = model.sigma();
    let sxx = sigma[(x, x)];
    if !(sxx > 0.0) {
        return Err(Error::Degenerate(format!("innovation variance of `{}` is {sxx}", model.labels()[x])));
    }
    let c = sigma[(y, x)] / sxx;
    if c == 0.0 {
        return Ok(model.clone());
    }
    let mut p = DMatrix::<f64>::identity(n, n);
    p[(y, x)] = -c;
    let mut p_inv = DMatrix::<f64>::identity(n, n);
    p_inv[(y, x)] = c;
    let coeffs = model.coeffs().iter().map(|a| &p * a * &p_inv).collect();
    let mut s = &p * sigma * p.transpose();
    s[(x, y)] = 0.0;
    s[(y, x)] = 0.0;
    let s = (&s + s.transpose()) * 0.5;
    let intercept = (&p * nalgebra::DVector::from_column_slice(model.intercept())).as_slice().to_vec();
    Ok(VarModel::from_parts(coeffs, intercept, s, model.labels().to_vec(), model.nobs()))
}

/// Frequency band of an information flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Medium,
    High,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Band::Low),
            "medium" => Ok(Band::Medium),
            "high" => Ok(Band::High),
            _ => Err(Error::InvalidArgument(format!("unknown band `{s}`"))),
        }
    }
}

/// Boundaries between the low/medium and medium/high bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    pub low_medium: f64,
    pub medium_high: f64,
}

impl Default for BandEdges {
    fn default() -> Self {
        Self {
            low_medium: PI / 3.0,
            medium_high: 2.0 * PI / 3.0,
        }
    }
}

impl BandEdges {
    pub fn new(low_medium: f64, medium_high: f64) -> Result<Self> {
        if !(0.0 <= low_medium && low_medium <= medium_high && medium_high <= PI) {
            return Err(Error::InvalidArgument(format!(
                "band edges must satisfy 0 <= {low_medium} <= {medium_high} <= pi"
            )));
        }
        Ok(Self { low_medium, medium_high })
    }

    pub fn classify(&self, lambda: f64) -> Result<Band> {
        if !(0.0..=PI).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("frequency {lambda} outside [0, pi]")));
        }
        Ok(if lambda < self.low_medium {
            Band::Low
        } else if lambda < self.medium_high {
            Band::Medium
        } else {
            Band::High
        })
    }
}

/// Band of `lambda` under the default tertile edges.
pub fn band_classify(lambda: f64) -> Result<Band> {
    BandEdges::default().classify(lambda)
}

/// Location of the largest spectral value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub lambda: f64,
    pub value: f64,
    /// Set when the whole profile is zero.
    pub zero_power: bool,
}

/// `𝔣_{y→x}(λ)` over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub source: String,
    pub target: String,
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub peak_lambda: f64,
    pub zero_power: bool,
    pub band: Band,
}

impl SpectralProfile {
    pub fn new(source: String, target: String, grid: FrequencyGrid, values: Vec<f64>, edges: &BandEdges) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let peak = peak_of(grid.points(), &values)?;
        let band = edges.classify(peak.lambda)?;
        Ok(Self {
            source,
            target,
            grid,
            values,
            peak_lambda: peak.lambda,
            zero_power: peak.zero_power,
            band,
        })
    }

    /// Grid average, comparable to the time-domain statistic.
    pub fn mean(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn peak_of(points: &[f64], values: &[f64]) -> Result<Peak> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty spectral profile".into()));
    }
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = j;
        }
    }
    let value = values[best];
    Ok(Peak {
        lambda: points[best],
        value,
        zero_power: value <= 0.0,
    })
}

/// Frequency of maximal causal power; ties go to the lowest frequency.
pub fn peak_frequency(profile: &SpectralProfile) -> Result<Peak> {
    peak_of(profile.grid.points(), &profile.values)
}

fn log_ratio(num: f64, den: f64, lambda: f64) -> Result<f64> {
    if den < -NEG_TOL || num < -NEG_TOL {
        return Err(Error::Numerical(format!(
            "negative spectral power at lambda = {lambda:.6} (numerator {num:.3e}, denominator {den:.3e})"
        )));
    }
    let f = (num.max(LOG_FLOOR) / den.max(LOG_FLOOR)).ln();
    if f < -NEG_TOL {
        return Err(Error::Numerical(format!("spectral causality {f:.3e} < 0 at lambda = {lambda:.6}")));
    }
    Ok(f.max(0.0))
}

/// Spectral causality `y → x` of a bivariate model.
pub fn spectral_gc(model: &VarModel, x: usize, y: usize, grid: &FrequencyGrid, edges: &BandEdges) -> Result<SpectralProfile> {
    if model.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "spectral_gc needs a bivariate model, got {} series",
            model.dim()
        )));
    }
    require_stable(model)?;
    let m = remove_instantaneous(model, x, y)?;
    let h = transfer_unchecked(&m, grid)?;
    let sigma = sigma_complex(&m);
    let syy = m.sigma()[(y, y)];
    let values = grid
        .points()
        .iter()
        .zip(&h)
        .map(|(&l, h)| {
            let sxx = (h * &sigma * h.adjoint())[(x, x)].re;
            let causal = h[(x, y)].norm_sqr() * syy;
            log_ratio(sxx, sxx - causal, l)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = m.labels();
    SpectralProfile::new(labels[y].clone(), labels[x].clone(), grid.clone(), values, edges)
}

/// Full-system quantities shared by every target.
struct FullSpectra {
    transfer: Vec<CMatrix>,
    sigma: DMatrix<f64>,
}

impl FullSpectra {
    fn new(model: &VarModel, grid: &FrequencyGrid) -> Result<Self> {
        let transfer = transfer_function(model, grid).stage("full transfer function")?;
        Ok(Self {
            transfer,
            sigma: model.sigma().clone(),
        })
    }

    /// Geweke conditional statistic `y → x | rest`.
    ///
    /// `reduced` is the VAR without `y`; `reduced_map[i]` gives the full
    /// index of its `i`-th series and `x_red` the position of `x` in it.
    ///
    /// 1. normalise full innovations so that `x`'s is uncorrelated with all
    ///    others: `P_{jx} = -Σ_jx/Σ_xx`, `Σ' = P Σ Pᵀ`;
    /// 2. express the reduced `x` innovation through the normalised full
    ///    innovations: `Q_x(λ) = D^r_{x,·}(λ) H(λ) P⁻¹`;
    /// 3. `𝔣 = ln(Q_x Σ' Q_x* / |Q_xx|² Σ'_xx)`.
    fn conditional(
        &self,
        grid: &FrequencyGrid,
        x: usize,
        reduced: &VarModel,
        reduced_map: &[usize],
        x_red: usize,
    ) -> Result<Vec<f64>> {
        let n = self.sigma.nrows();
        let sxx = self.sigma[(x, x)];
        if !(sxx > 0.0) {
            return Err(Error::Degenerate("zero innovation variance in full model".into()));
        }
        let v: Vec<f64> = (0..n).map(|j| if j == x { 0.0 } else { self.sigma[(j, x)] / sxx }).collect();
        let mut schur = self.sigma.clone();
        for i in 0..n {
            for j in 0..n {
                schur[(i, j)] -= self.sigma[(i, x)] * self.sigma[(x, j)] / sxx;
            }
        }
        let kp = reduced.coeffs();
        grid.points()
            .iter()
            .zip(&self.transfer)
            .map(|(&l, h)| {
                let mut r = vec![C64::new(0.0, 0.0); n];
                r[x] = C64::new(1.0, 0.0);
                for (k, a) in kp.iter().enumerate() {
                    let z = Complex::from_polar(1.0, -((k + 1) as f64) * l);
                    for (i, &fi) in reduced_map.iter().enumerate() {
                        r[fi] -= z * a[(x_red, i)];
                    }
                }
                let mut q: Vec<C64> = (0..n).map(|j| (0..n).map(|i| r[i] * h[(i, j)]).sum()).collect();
                let shift: C64 = (0..n).map(|j| q[j] * v[j]).sum();
                q[x] += shift;
                let intrinsic = q[x].norm_sqr() * sxx;
                let mut other = 0.0;
                for i in 0..n {
                    if i == x {
                        continue;
                    }
                    for j in 0..n {
                        if j != x {
                            other += (q[i] * schur[(i, j)] * q[j].conj()).re;
                        }
                    }
                }
                log_ratio(intrinsic + other, intrinsic, l)
            })
            .collect()
    }
}

/// Conditional spectral causality `y → x` given `cond`, estimated at `order`.
pub fn conditional_spectral_gc<S: AsRef<str>>(
    panel: &Panel,
    x: &str,
    y: &str,
    cond: &[S],
    order: usize,
    grid: &FrequencyGrid,
    edges: &BandEdges,
) -> Result<SpectralProfile> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    let mut labels: Vec<&str> = vec![x, y];
    labels.extend(cond.iter().map(|c| c.as_ref()));
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::InvalidArgument(format!("series `{a}` appears twice")));
        }
    }
    let sub = panel.select(&labels)?;
    sub.require_complete()?;
    check_degrees_of_freedom(sub.len(), sub.width(), order)?;
    let design = LagDesign::from_panel(&sub, order, order);
    let all: Vec<usize> = (0..sub.width()).collect();
    let reduced_map: Vec<usize> = all.iter().copied().filter(|&i| i != 1).collect();
    let full = design.fit(&all, order, sub.labels()).stage("full model fit")?;
    let reduced = design.fit(&reduced_map, order, sub.labels()).stage("reduced model fit")?;
    let spectra = FullSpectra::new(&full, grid)?;
    let values = spectra.conditional(grid, 0, &reduced, &reduced_map, 0).stage("conditional spectrum")?;
    SpectralProfile::new(y.to_string(), x.to_string(), grid.clone(), values, edges)
}

/// Conditional spectral profiles for the given `(source, target)` pairs,
/// each conditioned on every other series of the panel.
pub fn conditional_spectral_profiles(
    panel: &Panel,
    pairs: &[(String, String)],
    order: usize,
    grid: &FrequencyGrid,
    edges: &BandEdges,
) -> Result<Vec<SpectralProfile>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    if order == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    panel.require_complete()?;
    check_degrees_of_freedom(panel.len(), panel.width(), order)?;
    let labels = panel.labels();
    let mut by_source: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, (s, t)) in pairs.iter().enumerate() {
        let y = panel.index_of(s)?;
        let x = panel.index_of(t)?;
        if x == y {
            return Err(Error::InvalidArgument(format!("self pair `{s}`")));
        }
        by_source.entry(y).or_default().push((k, x));
    }
    let design = LagDesign::from_panel(panel, order, order);
    let all: Vec<usize> = (0..panel.width()).collect();
    let full = design.fit(&all, order, labels).stage("full model fit")?;
    let spectra = FullSpectra::new(&full, grid)?;
    let groups: Vec<(usize, Vec<(usize, usize)>)> = by_source.into_iter().collect();
    let computed: Vec<Vec<(usize, SpectralProfile)>> = groups
        .par_iter()
        .map(|(y, targets)| {
            let reduced_map: Vec<usize> = all.iter().copied().filter(|i| i != y).collect();
            let reduced = design.fit(&reduced_map, order, labels).stage("reduced model fit")?;
            targets
                .iter()
                .map(|&(k, x)| {
                    let x_red = reduced_map.iter().position(|&i| i == x).expect("target is kept");
                    let values = spectra
                        .conditional(grid, x, &reduced, &reduced_map, x_red)
                        .stage("conditional spectrum")?;
                    let p = SpectralProfile::new(labels[*y].clone(), labels[x].clone(), grid.clone(), values, edges)?;
                    Ok((k, p))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<(usize, SpectralProfile)> = computed.into_iter().flatten().collect();
    out.sort_by_key(|(k, _)| *k);
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

/// Long-format CSV: `source,target,lambda,value`.
pub fn write_profiles_csv<W: Write>(profiles: &[SpectralProfile], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "target", "lambda", "value"])?;
    for p in profiles {
        for (l, v) in p.grid.points().iter().zip(&p.values) {
            w.write_record([p.source.as_str(), p.target.as_str(), &format!("{l:?}"), &format!("{v:?}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per profile: `source,target,peak_lambda,band,mean,max,zero_power`.
pub fn write_peaks_csv<W: Write>(profiles: &[SpectralProfile], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "target", "peak_lambda", "band", "mean", "max", "zero_power"])?;
    for p in profiles {
        w.write_record([
            p.source.as_str(),
            p.target.as_str(),
            &format!("{:?}", p.peak_lambda),
            p.band.as_str(),
            &format!("{:?}", p.mean()),
            &format!("{:?}", p.max()),
            &p.zero_power.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
