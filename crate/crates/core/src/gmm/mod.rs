//! Difference and System GMM for one dynamic panel equation.
//!
//! The estimator stacks, per entity, the first-differenced rows followed by
//! the level rows. One-step estimation uses the usual initial weight
//! (`2/-1` tridiagonal on consecutive difference rows, identity on level
//! rows, zero cross block). Two-step estimation reweights with the
//! entity-clustered moment covariance of the one-step residuals, with the
//! Windmeijer finite-sample correction available for its covariance.
//!
//! Serial-correlation tests follow Arellano and Bond; the overidentification
//! statistic is Hansen's J at the two-step weight.

mod instruments;

pub use instruments::{
    build_difference_instruments, build_instruments, build_level_instruments, transformable_rows,
    InstrumentBlock, InstrumentCounts, InstrumentLabel, InstrumentSet, RowKind, StackedRow,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, inverse_symmetric, pinv_symmetric, symmetrize};
use crate::model::{Equation, EquationDesign, Term, TermTag};
use crate::scalar::Scalar;

/// Name of the level-equation intercept in coefficient tables.
pub const CONSTANT_NAME: &str = "_cons";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GmmMode {
    DifferenceOnly,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Steps {
    One,
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmOptions {
    pub mode: GmmMode,
    pub instrument_lag_min: usize,
    /// `None` uses every available lag.
    pub instrument_lag_max: Option<usize>,
    pub collapse: bool,
    pub steps: Steps,
    pub windmeijer_correction: bool,
    /// Relative eigenvalue cutoff for pseudo-inverting weight matrices.
    pub ridge_tolerance: f64,
    /// Adds an intercept to the level equation (system mode only).
    pub level_constant: bool,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            mode: GmmMode::System,
            instrument_lag_min: 2,
            instrument_lag_max: Some(4),
            collapse: true,
            steps: Steps::One,
            windmeijer_correction: true,
            ridge_tolerance: 1e-10,
            level_constant: true,
        }
    }
}

impl GmmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.instrument_lag_min < 2 {
            return Err(Error::InvalidSpec(
                "instrument_lag_min must be at least 2".into(),
            ));
        }
        if let Some(max) = self.instrument_lag_max {
            if max < self.instrument_lag_min {
                return Err(Error::InvalidSpec(
                    "instrument_lag_max must not be below instrument_lag_min".into(),
                ));
            }
        }
        if !(self.ridge_tolerance >= 0.0 && self.ridge_tolerance < 1.0) {
            return Err(Error::InvalidSpec("ridge_tolerance must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HansenTest {
    pub statistic: f64,
    pub df: usize,
    /// `None` when the model is exactly identified.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArTest {
    pub order: usize,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hansen: HansenTest,
    pub ar1: Option<ArTest>,
    pub ar2: Option<ArTest>,
    /// A weight matrix had to be pseudo-inverted.
    pub weight_singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n_entities: usize,
    pub n_rows: usize,
    pub n_difference_rows: usize,
    pub n_instruments: usize,
    pub n_coefficients: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual<T> {
    pub entity: usize,
    pub period: usize,
    pub kind: RowKind,
    pub value: T,
}

/// Stacked system kept for post-estimation tests.
#[derive(Debug, Clone, PartialEq)]
struct Moments<T: Scalar> {
    rows: Vec<StackedRow>,
    ranges: Vec<(usize, std::ops::Range<usize>)>,
    x: DMatrix<T>,
    z: DMatrix<T>,
    /// Weight of the reported step.
    weight: DMatrix<T>,
    /// `(X'Z W Z'X)^-1` of the reported step.
    bread: DMatrix<T>,
    residuals: DVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult<T: Scalar> {
    pub equation: Equation,
    /// Column names: design terms, then the intercept when present.
    pub names: Vec<String>,
    /// Term tag per coefficient; `None` for the intercept.
    pub tags: Vec<Option<TermTag>>,
    pub coefficients: DVector<T>,
    /// Entity-clustered robust covariance of `coefficients`.
    pub vce: DMatrix<T>,
    pub residuals: Vec<Residual<T>>,
    pub diagnostics: Diagnostics,
    pub sample: SampleMeta,
    pub options: GmmOptions,
    pub instrument_labels: Vec<String>,
    pub warnings: Vec<String>,
    moments: Moments<T>,
}

impl<T: Scalar> EstimationResult<T> {
    pub fn coefficient(&self, term: &Term) -> Option<T> {
        self.position(term).map(|k| self.coefficients[k])
    }

    pub fn position(&self, term: &Term) -> Option<usize> {
        self.tags
            .iter()
            .position(|t| t.as_ref().map(|t| &t.term) == Some(term))
    }

    pub fn std_errors(&self) -> DVector<T> {
        self.vce.diagonal().map(|v| v.max(T::zero()).sqrt())
    }

    pub fn n_coefficients(&self) -> usize {
        self.coefficients.len()
    }

    /// Residuals on the stacked rows, in stacked order.
    pub fn residual_vector(&self) -> &DVector<T> {
        &self.moments.residuals
    }

    /// `X b` on the stacked rows.
    pub fn fitted_values(&self) -> DVector<T> {
        &self.moments.x * &self.coefficients
    }
}

fn initial_weight_block<T: Scalar>(rows: &[StackedRow]) -> DMatrix<T> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |a, b| {
        let (ra, rb) = (rows[a], rows[b]);
        match (ra.kind, rb.kind) {
            (RowKind::Difference, RowKind::Difference) => {
                if a == b {
                    T::lit(2.0)
                } else if ra.period.abs_diff(rb.period) == 1 {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            (RowKind::Level, RowKind::Level) if a == b => T::one(),
            _ => T::zero(),
        }
    })
}

fn clustered_moment_covariance<T: Scalar>(
    z: &DMatrix<T>,
    e: &DVector<T>,
    ranges: &[(usize, std::ops::Range<usize>)],
) -> DMatrix<T> {
    let l = z.ncols();
    let mut s = DMatrix::zeros(l, l);
    for (_, r) in ranges {
        let zi = z.rows(r.start, r.len());
        let g = zi.transpose() * e.rows(r.start, r.len());
        s += &g * g.transpose();
    }
    symmetrize(&s)
}

struct Step<T: Scalar> {
    beta: DVector<T>,
    bread: DMatrix<T>,
    residuals: DVector<T>,
    singular: bool,
}

fn gmm_step<T: Scalar>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    zx: &DMatrix<T>,
    zy: &DVector<T>,
    w: &DMatrix<T>,
    tol: T,
) -> Step<T> {
    let xzw = zx.transpose() * w;
    let (bread, singular) = inverse_symmetric(&(&xzw * zx), tol);
    let beta = &bread * (&xzw * zy);
    let residuals = y - x * &beta;
    Step {
        beta,
        bread,
        residuals,
        singular,
    }
}

fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::standard();
    2.0 * (1.0 - n.cdf(z.abs()))
}

fn chi_square_upper(stat: f64, df: usize) -> Option<f64> {
    if df == 0 {
        return None;
    }
    let chi = ChiSquared::new(df as f64).ok()?;
    Some(1.0 - chi.cdf(stat.max(0.0)))
}

/// Estimates one equation by Difference or System GMM.
pub fn estimate<T: Scalar>(
    design: &EquationDesign<T>,
    opts: &GmmOptions,
) -> Result<EstimationResult<T>> {
    opts.validate()?;
    let tol = T::lit(opts.ridge_tolerance);
    let full = build_instruments(design, opts)?;
    let inst = full.without_empty_columns();
    let rows = inst.rows.clone();
    let ranges = inst.entity_ranges();
    let with_constant = opts.mode == GmmMode::System && opts.level_constant;

    let k_design = design.n_columns();
    let k = k_design + usize::from(with_constant);
    let n = rows.len();
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        let cur = r.design_row;
        match r.kind {
            RowKind::Difference => {
                y[i] = design.dependent[cur] - design.dependent[cur - 1];
                for c in 0..k_design {
                    x[(i, c)] = design.regressors[(cur, c)] - design.regressors[(cur - 1, c)];
                }
            }
            RowKind::Level => {
                y[i] = design.dependent[cur];
                for c in 0..k_design {
                    x[(i, c)] = design.regressors[(cur, c)];
                }
                if with_constant {
                    x[(i, k_design)] = T::one();
                }
            }
        }
    }
    let mut names = design.column_names();
    let mut tags: Vec<Option<TermTag>> = design.tags.iter().cloned().map(Some).collect();
    if with_constant {
        names.push(CONSTANT_NAME.to_string());
        tags.push(None);
    }

    let collinear = dependent_columns(&x, T::lit(1e-10));
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(
            collinear.into_iter().map(|c| names[c].clone()).collect(),
        ));
    }
    let n_inst = inst.counts.n_instruments;
    if n_inst < k {
        return Err(Error::Underidentified {
            instruments: n_inst,
            coefficients: k,
        });
    }

    let z = &inst.matrix;
    let zx = z.transpose() * &x;
    let zy = z.transpose() * &y;
    let mut warnings = Vec::new();

    let mut zhz = DMatrix::zeros(n_inst, n_inst);
    for (_, r) in &ranges {
        let zi = z.rows(r.start, r.len());
        let h = initial_weight_block::<T>(&rows[r.clone()]);
        zhz += zi.transpose() * h * zi;
    }
    let (w1, w1_singular) = pinv_symmetric(&zhz, tol);
    if w1_singular {
        warnings.push("one-step weight matrix pseudo-inverted".to_string());
    }
    let one = gmm_step(&x, &y, &zx, &zy, &w1, tol);
    if one.singular {
        warnings.push("one-step normal matrix pseudo-inverted".to_string());
    }
    let s1 = clustered_moment_covariance(z, &one.residuals, &ranges);
    let (w2, w2_singular) = pinv_symmetric(&s1, tol);
    if w2_singular {
        warnings.push("two-step weight matrix pseudo-inverted".to_string());
    }
    let v1_robust = {
        let m = zx.transpose() * &w1;
        symmetrize(&(&one.bread * (&m * &s1 * m.transpose()) * &one.bread))
    };

    let two = gmm_step(&x, &y, &zx, &zy, &w2, tol);
    if two.singular && opts.steps == Steps::Two {
        warnings.push("two-step normal matrix pseudo-inverted".to_string());
    }
    let ze2 = z.transpose() * &two.residuals;
    let hansen_stat = if w2_singular && s1.amax() == T::zero() {
        0.0
    } else {
        (ze2.transpose() * &w2 * &ze2)[(0, 0)].as_f64()
    };
    let df = n_inst - k;
    let hansen = HansenTest {
        statistic: if df == 0 { 0.0 } else { hansen_stat.max(0.0) },
        df,
        p_value: chi_square_upper(hansen_stat, df),
    };

    let (beta, bread, residuals, weight, vce) = match opts.steps {
        Steps::One => (one.beta, one.bread.clone(), one.residuals, w1, v1_robust),
        Steps::Two => {
            let vce = if opts.windmeijer_correction {
                windmeijer(&two.bread, &v1_robust, &x, z, &zx, &w2, &one.residuals, &ze2, &ranges)
            } else {
                two.bread.clone()
            };
            (two.beta, two.bread, two.residuals, w2, vce)
        }
    };

    let residual_list = rows
        .iter()
        .zip(residuals.iter())
        .map(|(r, &value)| Residual {
            entity: r.entity,
            period: r.period,
            kind: r.kind,
            value,
        })
        .collect();
    let n_diff = rows.iter().filter(|r| r.kind == RowKind::Difference).count();
    let mut result = EstimationResult {
        equation: design.equation,
        names,
        tags,
        coefficients: beta,
        vce,
        residuals: residual_list,
        diagnostics: Diagnostics {
            hansen,
            ar1: None,
            ar2: None,
            weight_singular: w1_singular || (opts.steps == Steps::Two && w2_singular),
        },
        sample: SampleMeta {
            n_entities: ranges.len(),
            n_rows: n_diff,
            n_difference_rows: n_diff,
            n_instruments: n_inst,
            n_coefficients: k,
        },
        options: opts.clone(),
        instrument_labels: inst.labels.iter().map(|l| l.to_string()).collect(),
        warnings,
        moments: Moments {
            rows,
            ranges,
            x,
            z: inst.matrix.clone(),
            weight,
            bread,
            residuals,
        },
    };
    result.diagnostics.ar1 = ar_test(&result, 1).ok();
    result.diagnostics.ar2 = ar_test(&result, 2).ok();
    Ok(result)
}

/// Windmeijer-corrected covariance of the two-step estimator.
#[allow(clippy::too_many_arguments)]
fn windmeijer<T: Scalar>(
    bread2: &DMatrix<T>,
    v1_robust: &DMatrix<T>,
    x: &DMatrix<T>,
    z: &DMatrix<T>,
    zx: &DMatrix<T>,
    w2: &DMatrix<T>,
    e1: &DVector<T>,
    ze2: &DVector<T>,
    ranges: &[(usize, std::ops::Range<usize>)],
) -> DMatrix<T> {
    let k = x.ncols();
    let g2 = w2 * ze2;
    let lead = bread2 * zx.transpose() * w2;
    let per_entity: Vec<(DMatrix<T>, DVector<T>)> = ranges
        .iter()
        .map(|(_, r)| {
            let zi = z.rows(r.start, r.len());
            (zi.transpose() * x.rows(r.start, r.len()), zi.transpose() * e1.rows(r.start, r.len()))
        })
        .collect();
    let mut d = DMatrix::zeros(k, k);
    for c in 0..k {
        let mut ds_g = DVector::zeros(z.ncols());
        for (zxi, bi) in &per_entity {
            let a = zxi.column(c);
            ds_g += a * bi.dot(&g2) + bi * a.dot(&g2);
        }
        d.set_column(c, &(&lead * ds_g));
    }
    symmetrize(&(bread2 + &d * bread2 + bread2 * d.transpose() + &d * v1_robust * d.transpose()))
}

/// Hansen overidentification statistic at the two-step weight.
pub fn hansen_j<T: Scalar>(result: &EstimationResult<T>) -> HansenTest {
    result.diagnostics.hansen
}

/// Arellano–Bond test for order-`m` serial correlation in the
/// first-differenced residuals.
pub fn ar_test<T: Scalar>(result: &EstimationResult<T>, m: usize) -> Result<ArTest> {
    if m == 0 {
        return Err(Error::InvalidSpec("AR test order must be at least 1".into()));
    }
    let mo = &result.moments;
    let e = &mo.residuals;
    let k = mo.x.ncols();
    let fit_scale = (&mo.x * &result.coefficients).amax();
    if e.amax() <= T::lit(1e-10) * fit_scale {
        return Err(Error::InsufficientData(
            "residuals are numerically zero".into(),
        ));
    }
    let mut lagged = DVector::<T>::zeros(e.len());
    let mut pairs = 0usize;
    for (_, range) in &mo.ranges {
        for i in range.clone() {
            let r = mo.rows[i];
            if r.kind != RowKind::Difference || r.period < m {
                continue;
            }
            let target = r.period - m;
            if let Some(j) = range.clone().find(|&j| {
                mo.rows[j].kind == RowKind::Difference && mo.rows[j].period == target
            }) {
                lagged[i] = e[j];
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::InsufficientData(format!(
            "no overlapping residual pairs at lag {m}"
        )));
    }

    let mut numerator = T::zero();
    let mut sum_sq = T::zero();
    let mut zus = DVector::<T>::zeros(mo.z.ncols());
    for (_, range) in &mo.ranges {
        let mut s_i = T::zero();
        for i in range.clone() {
            if mo.rows[i].kind == RowKind::Difference {
                s_i += lagged[i] * e[i];
            }
        }
        numerator += s_i;
        sum_sq += s_i * s_i;
        let zi = mo.z.rows(range.start, range.len());
        zus += zi.transpose() * e.rows(range.start, range.len()) * s_i;
    }
    let mut wx = DVector::<T>::zeros(k);
    for (i, r) in mo.rows.iter().enumerate() {
        if r.kind == RowKind::Difference {
            wx += mo.x.row(i).transpose() * lagged[i];
        }
    }
    let zx = mo.z.transpose() * &mo.x;
    let m_mat = &mo.bread * zx.transpose() * &mo.weight;
    let cross = wx.dot(&(&m_mat * &zus));
    let quad = wx.dot(&(&result.vce * &wx));
    let var = (sum_sq - T::lit(2.0) * cross + quad).as_f64();
    let scale = sum_sq.as_f64().abs().max(quad.as_f64().abs());
    if !(var.is_finite() && var > 1e-12 * scale && var > 0.0) {
        return Err(Error::InsufficientData(format!(
            "degenerate AR({m}) variance"
        )));
    }
    let z = numerator.as_f64() / var.sqrt();
    Ok(ArTest {
        order: m,
        z,
        p_value: normal_two_sided(z),
    })
}
