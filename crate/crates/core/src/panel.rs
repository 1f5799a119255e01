//! Unbalanced quarterly panel storage and the series transforms used to build
//! dynamic regression designs.
//!
//! Missing values are explicit (`None`) everywhere. Gaps are never
//! interpolated, so a gap breaks every lag or difference chain that crosses it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Entity label used in long-format records for entity-invariant series.
pub const GLOBAL_ENTITY: &str = "";

/// Reserved variable name carrying the constant 0/1 exporter indicator.
pub const GROUP_VARIABLE: &str = "exporter";

/// Calendar quarter, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quarter {
    pub year: i32,
    pub quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::MalformedPeriod(format!("{year}-Q{quarter}")));
        }
        Ok(Self { year, quarter })
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(4) as i32,
            quarter: (ord.rem_euclid(4) + 1) as u8,
        }
    }

    pub fn offset(self, quarters: i64) -> Self {
        Self::from_ordinal(self.ordinal() + quarters)
    }

    pub fn quarters_until(self, later: Quarter) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::MalformedPeriod(s.to_string());
        let (year, q) = s.trim().split_once("-Q").ok_or_else(bad)?;
        if year.len() != 4 || q.len() != 1 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let q: u8 = q.parse().map_err(|_| bad())?;
        Quarter::new(year, q).map_err(|_| bad())
    }
}

/// A period-aligned sequence with explicit missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    values: Vec<Option<T>>,
}

impl<T: Scalar> Series<T> {
    pub fn new(values: Vec<Option<T>>) -> Self {
        Self { values }
    }

    pub fn missing(len: usize) -> Self {
        Self { values: vec![None; len] }
    }

    pub fn from_values(values: &[T]) -> Self {
        Self {
            values: values.iter().copied().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<T> {
        self.values.get(t).copied().flatten()
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn observed(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }

    /// Shifts the series back by `k` periods; the first `k` entries become missing.
    pub fn lag(&self, k: usize) -> Self {
        let n = self.values.len();
        let values = (0..n)
            .map(|t| if t >= k { self.values[t - k] } else { None })
            .collect();
        Self { values }
    }

    pub fn first_difference(&self) -> Self {
        let values = (0..self.values.len())
            .map(|t| match (t.checked_sub(1).and_then(|s| self.values[s]), self.values[t]) {
                (Some(prev), Some(cur)) => Some(cur - prev),
                _ => None,
            })
            .collect();
        Self { values }
    }

    /// Unbiased standard deviation over the observed values.
    pub fn sample_sd(&self) -> Result<T> {
        sample_sd(&self.observed().collect::<Vec<_>>())
    }

    pub fn mean(&self) -> Result<T> {
        let obs: Vec<T> = self.observed().collect();
        if obs.is_empty() {
            return Err(Error::InsufficientData("no observed values".into()));
        }
        Ok(obs.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(obs.len()))
    }
}

/// Unbiased (n - 1 denominator) standard deviation.
pub fn sample_sd<T: Scalar>(values: &[T]) -> Result<T> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "standard deviation needs at least 2 observations, got {n}"
        )));
    }
    let mean = values.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(n);
    let ss = values
        .iter()
        .fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
    Ok((ss / T::from_count(n - 1)).sqrt())
}

/// One long-format input record, still in textual form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongRecord {
    pub entity: String,
    pub period: String,
    pub variable: String,
    pub value: String,
}

impl LongRecord {
    pub fn new(entity: &str, period: &str, variable: &str, value: &str) -> Self {
        Self {
            entity: entity.into(),
            period: period.into(),
            variable: variable.into(),
            value: value.into(),
        }
    }
}

/// Position of an observation inside a [`PanelDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId {
    pub entity: usize,
    pub period: usize,
}

/// First/last observed period and number of observed values for one entity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntitySpan {
    pub first: usize,
    pub last: usize,
    pub observed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanSummary {
    pub entities: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Immutable unbalanced entity-by-quarter panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset<T> {
    entities: Vec<String>,
    periods: Vec<Quarter>,
    country: BTreeMap<String, Vec<Series<T>>>,
    global: BTreeMap<String, Series<T>>,
    exporter: Vec<bool>,
}

impl<T: Scalar> PanelDataset<T> {
    /// Builds a dataset from long-format records.
    ///
    /// Records whose entity is empty are global series. The reserved variable
    /// [`GROUP_VARIABLE`] sets the exporter flag; entities without it are
    /// importers. Row numbers in errors are 1-based and count data rows only.
    pub fn from_records(records: &[LongRecord]) -> Result<Self> {
        struct Parsed<T> {
            entity: String,
            period: Quarter,
            variable: String,
            value: Option<T>,
        }

        let mut parsed = Vec::with_capacity(records.len());
        let mut seen = BTreeSet::new();
        for (i, rec) in records.iter().enumerate() {
            let row = i + 1;
            let period: Quarter = rec.period.parse().map_err(|e: Error| Error::Ingestion {
                row,
                message: e.to_string(),
            })?;
            let raw = rec.value.trim();
            let value = if raw.is_empty() {
                None
            } else {
                let v: f64 = raw.parse().map_err(|_| Error::Ingestion {
                    row,
                    message: format!("non-numeric value `{raw}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Ingestion {
                        row,
                        message: format!("non-finite value `{raw}`"),
                    });
                }
                Some(T::lit(v))
            };
            let entity = rec.entity.trim().to_string();
            let variable = rec.variable.trim().to_string();
            if variable.is_empty() {
                return Err(Error::Ingestion {
                    row,
                    message: "empty variable name".into(),
                });
            }
            if !seen.insert((entity.clone(), period, variable.clone())) {
                return Err(Error::Ingestion {
                    row,
                    message: format!("duplicate cell ({entity}, {period}, {variable})"),
                });
            }
            parsed.push(Parsed {
                entity,
                period,
                variable,
                value,
            });
        }

        let first = parsed.iter().map(|p| p.period).min();
        let last = parsed.iter().map(|p| p.period).max();
        let periods: Vec<Quarter> = match (first, last) {
            (Some(a), Some(b)) => (0..=a.quarters_until(b)).map(|k| a.offset(k)).collect(),
            _ => Vec::new(),
        };
        let entities: Vec<String> = parsed
            .iter()
            .filter(|p| p.entity != GLOBAL_ENTITY)
            .map(|p| p.entity.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let entity_pos: BTreeMap<&str, usize> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_str(), i))
            .collect();
        let t_len = periods.len();
        let origin = periods.first().copied();

        let mut country: BTreeMap<String, Vec<Series<T>>> = BTreeMap::new();
        let mut global: BTreeMap<String, Series<T>> = BTreeMap::new();
        let mut flags: Vec<Option<T>> = vec![None; entities.len()];
        for (i, p) in parsed.into_iter().enumerate() {
            let t = origin.map(|o| o.quarters_until(p.period) as usize).unwrap_or(0);
            if p.entity == GLOBAL_ENTITY {
                global
                    .entry(p.variable)
                    .or_insert_with(|| Series::missing(t_len))
                    .values[t] = p.value;
                continue;
            }
            let e = entity_pos[p.entity.as_str()];
            if p.variable == GROUP_VARIABLE {
                let Some(v) = p.value else { continue };
                if v != T::zero() && v != T::one() {
                    return Err(Error::Ingestion {
                        row: i + 1,
                        message: format!("{GROUP_VARIABLE} must be 0 or 1"),
                    });
                }
                match flags[e] {
                    Some(prev) if prev != v => {
                        return Err(Error::Ingestion {
                            row: i + 1,
                            message: format!("{GROUP_VARIABLE} changes over time for {}", p.entity),
                        })
                    }
                    _ => flags[e] = Some(v),
                }
                continue;
            }
            country
                .entry(p.variable)
                .or_insert_with(|| vec![Series::missing(t_len); entities.len()])[e]
                .values[t] = p.value;
        }
        let exporter = flags.into_iter().map(|f| f == Some(T::one())).collect();
        Ok(Self {
            entities,
            periods,
            country,
            global,
            exporter,
        })
    }

    /// Assembles a dataset from already-aligned series.
    pub fn from_parts(
        entities: Vec<String>,
        periods: Vec<Quarter>,
        country: BTreeMap<String, Vec<Series<T>>>,
        global: BTreeMap<String, Series<T>>,
        exporter: Vec<bool>,
    ) -> Result<Self> {
        if periods.windows(2).any(|w| w[0].quarters_until(w[1]) != 1) {
            return Err(Error::InvalidSpec(
                "periods must be consecutive quarters without duplicates".into(),
            ));
        }
        if exporter.len() != entities.len() {
            return Err(Error::DimensionMismatch(
                "one exporter flag per entity required".into(),
            ));
        }
        if entities.iter().collect::<BTreeSet<_>>().len() != entities.len() {
            return Err(Error::InvalidSpec("duplicate entity".into()));
        }
        for (name, per_entity) in &country {
            if per_entity.len() != entities.len()
                || per_entity.iter().any(|s| s.len() != periods.len())
            {
                return Err(Error::DimensionMismatch(format!("series `{name}`")));
            }
        }
        for (name, s) in &global {
            if s.len() != periods.len() {
                return Err(Error::DimensionMismatch(format!("series `{name}`")));
            }
            if country.contains_key(name) {
                return Err(Error::InvalidSpec(format!(
                    "`{name}` is both a country and a global series"
                )));
            }
        }
        Ok(Self {
            entities,
            periods,
            country,
            global,
            exporter,
        })
    }

    /// Returns a copy with exporter flags replaced; every entity must be covered.
    pub fn with_group_flags(mut self, flags: &BTreeMap<String, bool>) -> Result<Self> {
        for (i, e) in self.entities.iter().enumerate() {
            self.exporter[i] = *flags
                .get(e)
                .ok_or_else(|| Error::UnknownEntity(format!("no group assignment for {e}")))?;
        }
        Ok(self)
    }

    /// Returns a copy restricted to the given entities, in dataset order.
    pub fn select_entities(&self, keep: &BTreeSet<String>) -> Self {
        let idx: Vec<usize> = (0..self.entities.len())
            .filter(|&i| keep.contains(&self.entities[i]))
            .collect();
        Self {
            entities: idx.iter().map(|&i| self.entities[i].clone()).collect(),
            periods: self.periods.clone(),
            country: self
                .country
                .iter()
                .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i].clone()).collect()))
                .collect(),
            global: self.global.clone(),
            exporter: idx.iter().map(|&i| self.exporter[i]).collect(),
        }
    }

    /// Returns a copy with `f` applied to one variable (country or global).
    pub fn transform_variable(&self, name: &str, f: impl Fn(T) -> T + Copy) -> Result<Self> {
        let mut out = self.clone();
        if let Some(s) = out.global.get_mut(name) {
            *s = s.map(f);
        } else if let Some(v) = out.country.get_mut(name) {
            for s in v.iter_mut() {
                *s = s.map(f);
            }
        } else {
            return Err(Error::UnknownVariable(name.into()));
        }
        Ok(out)
    }

    /// Long-format export; values use shortest round-trip decimal formatting.
    pub fn to_records(&self) -> Vec<LongRecord> {
        let mut out = Vec::new();
        for (name, s) in &self.global {
            for (t, v) in s.values.iter().enumerate() {
                if let Some(v) = v {
                    out.push(LongRecord::new(
                        GLOBAL_ENTITY,
                        &self.periods[t].to_string(),
                        name,
                        &v.to_string(),
                    ));
                }
            }
        }
        for (e, entity) in self.entities.iter().enumerate() {
            for (name, per) in &self.country {
                for (t, v) in per[e].values.iter().enumerate() {
                    if let Some(v) = v {
                        out.push(LongRecord::new(
                            entity,
                            &self.periods[t].to_string(),
                            name,
                            &v.to_string(),
                        ));
                    }
                }
            }
            if self.exporter[e] {
                if let Some(p) = self.periods.first() {
                    out.push(LongRecord::new(entity, &p.to_string(), GROUP_VARIABLE, "1"));
                }
            }
        }
        out
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn periods(&self) -> &[Quarter] {
        &self.periods
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn is_exporter(&self, entity: usize) -> bool {
        self.exporter[entity]
    }

    pub fn exporter_flags(&self) -> &[bool] {
        &self.exporter
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.country.contains_key(name) || self.global.contains_key(name)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.global.contains_key(name)
    }

    pub fn country_variables(&self) -> impl Iterator<Item = &str> {
        self.country.keys().map(String::as_str)
    }

    pub fn global_variables(&self) -> impl Iterator<Item = &str> {
        self.global.keys().map(String::as_str)
    }

    pub fn global_series(&self, name: &str) -> Result<&Series<T>> {
        self.global
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(name.into()))
    }

    /// Series of `name` for one entity; global series are broadcast.
    pub fn series(&self, entity: usize, name: &str) -> Result<&Series<T>> {
        if let Some(s) = self.global.get(name) {
            return Ok(s);
        }
        self.country
            .get(name)
            .map(|v| &v[entity])
            .ok_or_else(|| Error::UnknownVariable(name.into()))
    }

    /// Value of `name` at `period - lag` for `entity`, if observed.
    pub fn value(&self, entity: usize, name: &str, period: usize, lag: usize) -> Result<Option<T>> {
        let s = self.series(entity, name)?;
        Ok(period.checked_sub(lag).and_then(|t| s.get(t)))
    }

    pub fn entity_span(&self, entity: usize, name: &str) -> Result<Option<EntitySpan>> {
        let s = self.series(entity, name)?;
        let obs: Vec<usize> = (0..s.len()).filter(|&t| s.get(t).is_some()).collect();
        Ok(match (obs.first(), obs.last()) {
            (Some(&first), Some(&last)) => Some(EntitySpan {
                first,
                last,
                observed: obs.len(),
            }),
            _ => None,
        })
    }

    /// Observed-value counts per entity for one variable, excluding gaps.
    pub fn span_summary(&self, name: &str) -> Result<SpanSummary> {
        let mut counts = Vec::new();
        for e in 0..self.entities.len() {
            if let Some(span) = self.entity_span(e, name)? {
                counts.push(span.observed);
            }
        }
        if counts.is_empty() {
            return Err(Error::InsufficientData(format!("`{name}` has no observations")));
        }
        Ok(SpanSummary {
            entities: counts.len(),
            min: *counts.iter().min().unwrap(),
            max: *counts.iter().max().unwrap(),
            mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        })
    }
}

/// Rows (entity, then period order) at which every `(variable, lag)` term is observed.
pub fn align_observations<T: Scalar>(
    data: &PanelDataset<T>,
    required: &[(String, usize)],
) -> Result<Vec<RowId>> {
    for (name, _) in required {
        if !data.has_variable(name) {
            return Err(Error::UnknownVariable(name.clone()));
        }
    }
    let mut rows = Vec::new();
    for entity in 0..data.n_entities() {
        let series: Vec<(&Series<T>, usize)> = required
            .iter()
            .map(|(name, lag)| Ok((data.series(entity, name)?, *lag)))
            .collect::<Result<_>>()?;
        for period in 0..data.n_periods() {
            let ok = series
                .iter()
                .all(|(s, lag)| period.checked_sub(*lag).and_then(|t| s.get(t)).is_some());
            if ok {
                rows.push(RowId { entity, period });
            }
        }
    }
    Ok(rows)
}
