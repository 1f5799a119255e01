//! Commodity-trade classification, a chained commodity terms-of-trade index,
//! and descriptive statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::panel::{sample_sd, Series};
use crate::scalar::Scalar;

/// Annual commodity trade flows of one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord<T> {
    pub entity: String,
    pub year: i32,
    pub commodity_exports: T,
    pub commodity_imports: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TradeGroup {
    /// Zero or positive commodity trade balance.
    NetExporter = 1,
    NetImporter = 2,
}

impl TradeGroup {
    pub fn is_exporter(self) -> bool {
        self == TradeGroup::NetExporter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T> {
    pub group: TradeGroup,
    pub ratio: T,
}

pub type GroupAssignment<T> = BTreeMap<String, Assignment<T>>;

/// `(exports - imports) / (exports + imports)`, in `[-1, 1]`.
pub fn commodity_trade_ratio<T: Scalar>(rec: &TradeRecord<T>) -> Result<T> {
    let (x, m) = (rec.commodity_exports, rec.commodity_imports);
    if x < T::zero() || m < T::zero() {
        return Err(Error::InvalidSpec(format!(
            "{} {}: negative trade flow",
            rec.entity, rec.year
        )));
    }
    let total = x + m;
    if total == T::zero() {
        return Err(Error::ZeroDenominator(format!(
            "{} {}: no commodity trade",
            rec.entity, rec.year
        )));
    }
    Ok((x - m) / total)
}

pub fn classify_ratio<T: Scalar>(ratio: T) -> TradeGroup {
    if ratio >= T::zero() {
        TradeGroup::NetExporter
    } else {
        TradeGroup::NetImporter
    }
}

/// Group 1 for ratios `≥ 0`, group 2 otherwise.
pub fn classify<T: Scalar>(ratios: &BTreeMap<String, T>) -> GroupAssignment<T> {
    ratios
        .iter()
        .map(|(e, &ratio)| {
            (
                e.clone(),
                Assignment {
                    group: classify_ratio(ratio),
                    ratio,
                },
            )
        })
        .collect()
}

/// Time-invariant classification from annual records: the mean annual ratio
/// per entity decides the group.
pub fn classify_records<T: Scalar>(records: &[TradeRecord<T>]) -> Result<GroupAssignment<T>> {
    let mut sums: BTreeMap<String, (T, usize)> = BTreeMap::new();
    for rec in records {
        let r = commodity_trade_ratio(rec)?;
        let e = sums.entry(rec.entity.clone()).or_insert((T::zero(), 0));
        e.0 += r;
        e.1 += 1;
    }
    let means = sums
        .into_iter()
        .map(|(k, (s, n))| (k, s / T::from_count(n)))
        .collect();
    Ok(classify(&means))
}

/// Chained index `I_t = I_{t-1} exp(Σ_k w_k Δlog P_{k,t})`, `I_0 = 100`.
///
/// Entry 0 of every price-change series is ignored (it is the base period);
/// a missing change at `t > 0` makes the index missing from `t` on.
pub fn ctot_index<T: Scalar>(weights: &[T], log_price_changes: &[Series<T>]) -> Result<Series<T>> {
    if weights.len() != log_price_changes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} commodities",
            weights.len(),
            log_price_changes.len()
        )));
    }
    let len = log_price_changes.first().map_or(0, |s| s.len());
    if log_price_changes.iter().any(|s| s.len() != len) {
        return Err(Error::DimensionMismatch("price-change series misaligned".into()));
    }
    if weights.iter().any(|w| !w.is_finite_value()) {
        return Err(Error::InvalidSpec("non-finite weight".into()));
    }
    let mut out = Vec::with_capacity(len);
    let mut level = Some(T::lit(100.0));
    for t in 0..len {
        if t > 0 {
            level = level.and_then(|prev| {
                let mut growth = T::zero();
                for (w, s) in weights.iter().zip(log_price_changes) {
                    growth += *w * s.get(t)?;
                }
                Some(prev * growth.exp())
            });
        }
        out.push(level);
    }
    Ok(Series::new(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson correlation over pairwise-complete observations with a two-sided
/// t-test (`n - 2` degrees of freedom).
pub fn correlation<T: Scalar>(x: &Series<T>, y: &Series<T>) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch("series lengths differ".into()));
    }
    let pairs: Vec<(f64, f64)> = (0..x.len())
        .filter_map(|t| Some((x.get(t)?.as_f64(), y.get(t)?.as_f64())))
        .collect();
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} complete pairs, need 3")));
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroDenominator("zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Correlation { r, p_value, n })
}

/// Sample standard deviation over mean.
pub fn coefficient_of_variation<T: Scalar>(s: &Series<T>) -> Result<T> {
    let obs: Vec<T> = s.observed().collect();
    let mean = s.mean()?;
    if mean == T::zero() {
        return Err(Error::ZeroDenominator("zero mean".into()));
    }
    Ok(sample_sd(&obs)? / mean)
}
