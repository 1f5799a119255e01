//! GMM-style and IV-style instrument matrices for the stacked
//! difference + level system.
//!
//! Difference-equation rows exist for every design row whose predecessor
//! quarter is also a design row. The level block uses the same rows, so each
//! entity contributes a matched pair of blocks. Unavailable instrument cells
//! are zero.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GmmMode, GmmOptions};
use crate::error::{Error, Result};
use crate::model::EquationDesign;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowKind {
    Difference,
    Level,
}

/// One row of the stacked system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackedRow {
    pub entity: usize,
    pub period: usize,
    pub kind: RowKind,
    /// Design row at `period`; the difference row also uses `design_row - 1`.
    pub design_row: usize,
}

/// Provenance of an instrument column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstrumentLabel {
    /// Level of the dependent variable at `t - lag`, for difference rows.
    /// `period` is set for uncollapsed (one column per period) instruments.
    DifferenceGmm { lag: usize, period: Option<usize> },
    /// Difference of the dependent variable at `t - lag`, for level rows.
    LevelGmm { lag: usize, period: Option<usize> },
    /// Exogenous regressor: differenced in difference rows, in levels in level rows.
    Iv(String),
    /// Level-equation intercept.
    Constant,
}

impl InstrumentLabel {
    pub fn is_gmm(&self) -> bool {
        matches!(self, Self::DifferenceGmm { .. } | Self::LevelGmm { .. })
    }
}

impl fmt::Display for InstrumentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DifferenceGmm { lag, period: None } => write!(f, "L{lag}.w"),
            Self::DifferenceGmm { lag, period: Some(t) } => write!(f, "L{lag}.w@{t}"),
            Self::LevelGmm { lag, period: None } => write!(f, "L{lag}.D.w"),
            Self::LevelGmm { lag, period: Some(t) } => write!(f, "L{lag}.D.w@{t}"),
            Self::Iv(name) => write!(f, "iv({name})"),
            Self::Constant => write!(f, "_cons"),
        }
    }
}

/// Instruments for the rows of one equation block.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentBlock<T: Scalar> {
    pub rows: Vec<StackedRow>,
    pub gmm: DMatrix<T>,
    pub gmm_labels: Vec<InstrumentLabel>,
    pub iv: DMatrix<T>,
    pub iv_labels: Vec<InstrumentLabel>,
}

impl<T: Scalar> InstrumentBlock<T> {
    fn empty() -> Self {
        Self {
            rows: Vec::new(),
            gmm: DMatrix::zeros(0, 0),
            gmm_labels: Vec::new(),
            iv: DMatrix::zeros(0, 0),
            iv_labels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentCounts {
    pub n_instruments: usize,
    pub n_gmm_columns: usize,
    pub n_iv_columns: usize,
}

/// Full stacked instrument matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSet<T: Scalar> {
    pub rows: Vec<StackedRow>,
    pub matrix: DMatrix<T>,
    pub labels: Vec<InstrumentLabel>,
    pub counts: InstrumentCounts,
}

impl<T: Scalar> InstrumentSet<T> {
    /// Drops columns that are zero on every row.
    pub fn without_empty_columns(&self) -> Self {
        let keep: Vec<usize> = (0..self.matrix.ncols())
            .filter(|&k| self.matrix.column(k).iter().any(|v| *v != T::zero()))
            .collect();
        let labels: Vec<InstrumentLabel> = keep.iter().map(|&k| self.labels[k].clone()).collect();
        let n_gmm = labels.iter().filter(|l| l.is_gmm()).count();
        Self {
            rows: self.rows.clone(),
            matrix: self.matrix.select_columns(&keep),
            counts: InstrumentCounts {
                n_instruments: labels.len(),
                n_gmm_columns: n_gmm,
                n_iv_columns: labels.len() - n_gmm,
            },
            labels,
        }
    }

    /// Half-open row ranges of each entity inside the stacked matrix.
    pub fn entity_ranges(&self) -> Vec<(usize, std::ops::Range<usize>)> {
        entity_ranges(&self.rows)
    }
}

pub(crate) fn entity_ranges(rows: &[StackedRow]) -> Vec<(usize, std::ops::Range<usize>)> {
    let mut out: Vec<(usize, std::ops::Range<usize>)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        match out.last_mut() {
            Some((e, range)) if *e == r.entity => range.end = i + 1,
            _ => out.push((r.entity, i..i + 1)),
        }
    }
    out
}

/// Design rows that have a same-entity predecessor one quarter earlier.
pub fn transformable_rows<T: Scalar>(design: &EquationDesign<T>) -> Vec<usize> {
    (1..design.rows.len())
        .filter(|&i| {
            let (prev, cur) = (design.rows[i - 1], design.rows[i]);
            prev.entity == cur.entity && prev.period + 1 == cur.period
        })
        .collect()
}

fn stacked_rows<T: Scalar>(design: &EquationDesign<T>, kind: RowKind) -> Vec<StackedRow> {
    transformable_rows(design)
        .into_iter()
        .map(|i| StackedRow {
            entity: design.rows[i].entity,
            period: design.rows[i].period,
            kind,
            design_row: i,
        })
        .collect()
}

fn level_at<T: Scalar>(design: &EquationDesign<T>, entity: usize, period: usize, lag: usize) -> Option<T> {
    period
        .checked_sub(lag)
        .and_then(|t| design.dependent_at(entity, t))
}

fn difference_at<T: Scalar>(
    design: &EquationDesign<T>,
    entity: usize,
    period: usize,
    lag: usize,
) -> Option<T> {
    match (
        level_at(design, entity, period, lag),
        level_at(design, entity, period, lag + 1),
    ) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    }
}

fn iv_columns<T: Scalar>(
    design: &EquationDesign<T>,
    rows: &[StackedRow],
) -> (DMatrix<T>, Vec<InstrumentLabel>) {
    let exog = design.exogenous_columns();
    let names = design.column_names();
    let mut m = DMatrix::zeros(rows.len(), exog.len());
    for (i, r) in rows.iter().enumerate() {
        for (c, &k) in exog.iter().enumerate() {
            let cur = design.regressors[(r.design_row, k)];
            m[(i, c)] = match r.kind {
                RowKind::Difference => cur - design.regressors[(r.design_row - 1, k)],
                RowKind::Level => cur,
            };
        }
    }
    let labels = exog
        .iter()
        .map(|&k| InstrumentLabel::Iv(names[k].clone()))
        .collect();
    (m, labels)
}

/// Instruments for the first-differenced equation: lagged dependent levels
/// at depths `lag_min..=lag_max` plus differenced exogenous regressors.
pub fn build_difference_instruments<T: Scalar>(
    design: &EquationDesign<T>,
    opts: &GmmOptions,
) -> Result<InstrumentBlock<T>> {
    opts.validate()?;
    let rows = stacked_rows(design, RowKind::Difference);
    if rows.is_empty() {
        return Err(Error::InsufficientData(
            "no usable rows after first differencing".into(),
        ));
    }
    let max_period = rows.iter().map(|r| r.period).max().unwrap_or(0);
    let lag_hi = opts
        .instrument_lag_max
        .unwrap_or(max_period)
        .max(opts.instrument_lag_min);

    let mut labels = Vec::new();
    let mut cols: Vec<Vec<T>> = Vec::new();
    if opts.collapse {
        for lag in opts.instrument_lag_min..=lag_hi {
            labels.push(InstrumentLabel::DifferenceGmm { lag, period: None });
            cols.push(
                rows.iter()
                    .map(|r| level_at(design, r.entity, r.period, lag).unwrap_or(T::zero()))
                    .collect(),
            );
        }
    } else {
        let periods: BTreeSet<usize> = rows.iter().map(|r| r.period).collect();
        for &t in &periods {
            for lag in (opts.instrument_lag_min..=lag_hi).filter(|&l| l <= t) {
                labels.push(InstrumentLabel::DifferenceGmm {
                    lag,
                    period: Some(t),
                });
                cols.push(
                    rows.iter()
                        .map(|r| {
                            if r.period == t {
                                level_at(design, r.entity, t, lag).unwrap_or(T::zero())
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                );
            }
        }
    }
    let gmm = DMatrix::from_fn(rows.len(), cols.len(), |i, k| cols[k][i]);
    let (iv, iv_labels) = iv_columns(design, &rows);
    Ok(InstrumentBlock {
        rows,
        gmm,
        gmm_labels: labels,
        iv,
        iv_labels,
    })
}

/// Instruments for the level equation: the lagged difference of the
/// dependent variable at depth `lag_min - 1` plus exogenous regressors in
/// levels. Empty in difference-only mode.
pub fn build_level_instruments<T: Scalar>(
    design: &EquationDesign<T>,
    opts: &GmmOptions,
) -> Result<InstrumentBlock<T>> {
    opts.validate()?;
    if opts.mode == GmmMode::DifferenceOnly {
        return Ok(InstrumentBlock::empty());
    }
    let rows = stacked_rows(design, RowKind::Level);
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let lag = opts.instrument_lag_min - 1;
    let mut labels = Vec::new();
    let mut cols: Vec<Vec<T>> = Vec::new();
    if opts.collapse {
        labels.push(InstrumentLabel::LevelGmm { lag, period: None });
        cols.push(
            rows.iter()
                .map(|r| difference_at(design, r.entity, r.period, lag).unwrap_or(T::zero()))
                .collect(),
        );
    } else {
        let periods: BTreeSet<usize> = rows.iter().map(|r| r.period).collect();
        for &t in &periods {
            labels.push(InstrumentLabel::LevelGmm {
                lag,
                period: Some(t),
            });
            cols.push(
                rows.iter()
                    .map(|r| {
                        if r.period == t {
                            difference_at(design, r.entity, t, lag).unwrap_or(T::zero())
                        } else {
                            T::zero()
                        }
                    })
                    .collect(),
            );
        }
    }
    let gmm = DMatrix::from_fn(rows.len(), cols.len(), |i, k| cols[k][i]);
    let (iv, iv_labels) = iv_columns(design, &rows);
    Ok(InstrumentBlock {
        rows,
        gmm,
        gmm_labels: labels,
        iv,
        iv_labels,
    })
}

/// Stacks both blocks entity by entity (difference rows, then level rows).
///
/// Column layout: difference GMM, level GMM, IV (one column per exogenous
/// regressor spanning both blocks), then the level intercept when enabled.
pub fn build_instruments<T: Scalar>(
    design: &EquationDesign<T>,
    opts: &GmmOptions,
) -> Result<InstrumentSet<T>> {
    let diff = build_difference_instruments(design, opts)?;
    let level = build_level_instruments(design, opts)?;
    let with_constant = opts.mode == GmmMode::System && opts.level_constant;

    let mut order: Vec<(usize, bool, usize)> = Vec::new();
    for (i, r) in diff.rows.iter().enumerate() {
        order.push((r.entity, false, i));
    }
    for (i, r) in level.rows.iter().enumerate() {
        order.push((r.entity, true, i));
    }
    order.sort_by_key(|&(e, is_level, i)| (e, is_level, i));

    let n_dg = diff.gmm.ncols();
    let n_lg = level.gmm.ncols();
    let n_iv = diff.iv.ncols();
    let n_cols = n_dg + n_lg + n_iv + usize::from(with_constant);
    let mut m = DMatrix::zeros(order.len(), n_cols);
    let mut rows = Vec::with_capacity(order.len());
    for (out, &(_, is_level, i)) in order.iter().enumerate() {
        let block = if is_level { &level } else { &diff };
        rows.push(block.rows[i]);
        let gmm_offset = if is_level { n_dg } else { 0 };
        for k in 0..block.gmm.ncols() {
            m[(out, gmm_offset + k)] = block.gmm[(i, k)];
        }
        for k in 0..n_iv {
            m[(out, n_dg + n_lg + k)] = block.iv[(i, k)];
        }
        if with_constant && is_level {
            m[(out, n_cols - 1)] = T::one();
        }
    }
    let mut labels: Vec<InstrumentLabel> = diff.gmm_labels.clone();
    labels.extend(level.gmm_labels.iter().cloned());
    labels.extend(diff.iv_labels.iter().cloned());
    if with_constant {
        labels.push(InstrumentLabel::Constant);
    }
    Ok(InstrumentSet {
        rows,
        matrix: m,
        counts: InstrumentCounts {
            n_instruments: n_cols,
            n_gmm_columns: n_dg + n_lg,
            n_iv_columns: n_iv + usize::from(with_constant),
        },
        labels,
    })
}
