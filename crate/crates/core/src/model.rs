//! Regression designs for the commodity-price equation and the spread equation.
//!
//! Price equation:
//! `p_it = Σ_{j=1..L} a_j^p p_{i,t-j} + Σ_{j=0..L} (a_j^r + a_j^rx d_i) r_{t-j} + A X_it + μ_i + ε_it`
//!
//! Spread equation:
//! `y_it = Σ_{j=1..L} b_j^y y_{i,t-j} + Σ_{j=0..L} (b_j^r + b_j^rx d_i) r_{t-j}
//!        + Σ_{j=0..L} (b_j^p + b_j^px d_i) p_{i,t-j} + B X_it + λ_i + ε_it`
//!
//! with `d_i` the exporter indicator. Fixed effects are not materialized; the
//! GMM transform removes them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{align_observations, PanelDataset, RowId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Equation {
    Price,
    Spread,
}

impl Equation {
    fn symbol(self) -> char {
        match self {
            Equation::Price => 'a',
            Equation::Spread => 'b',
        }
    }
}

/// Role of one regressor column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    /// Lag `j ≥ 1` of the dependent variable.
    OwnLag(usize),
    /// Lag `j ≥ 0` of the global shock.
    Shock(usize),
    /// Shock lag `j` times the exporter indicator.
    ShockExporter(usize),
    /// Lag `j ≥ 0` of the commodity price (spread equation only).
    Price(usize),
    /// Price lag `j` times the exporter indicator.
    PriceExporter(usize),
    Control(String),
}

impl Term {
    pub fn is_interaction(&self) -> bool {
        matches!(self, Term::ShockExporter(_) | Term::PriceExporter(_))
    }

    /// The non-interacted counterpart of an interaction term.
    pub fn base(&self) -> Option<Term> {
        match self {
            Term::ShockExporter(j) => Some(Term::Shock(*j)),
            Term::PriceExporter(j) => Some(Term::Price(*j)),
            _ => None,
        }
    }
}

/// A column tag: equation plus term role.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermTag {
    pub equation: Equation,
    pub term: Term,
}

impl fmt::Display for TermTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.equation.symbol();
        let own = match self.equation {
            Equation::Price => "p",
            Equation::Spread => "y",
        };
        match &self.term {
            Term::OwnLag(j) => write!(f, "{c}{j}^{own}"),
            Term::Shock(j) => write!(f, "{c}{j}^r"),
            Term::ShockExporter(j) => write!(f, "{c}{j}^rx"),
            Term::Price(j) => write!(f, "{c}{j}^p"),
            Term::PriceExporter(j) => write!(f, "{c}{j}^px"),
            Term::Control(name) => write!(f, "{}[{name}]", c.to_ascii_uppercase()),
        }
    }
}

/// Variable roles and lag order shared by both equations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p_variable: String,
    pub y_variable: String,
    pub r_variable: String,
    pub controls: Vec<String>,
    pub lag_order: usize,
}

impl ModelSpec {
    pub fn new(p: &str, y: &str, r: &str, controls: &[&str], lag_order: usize) -> Self {
        Self {
            p_variable: p.into(),
            y_variable: y.into(),
            r_variable: r.into(),
            controls: controls.iter().map(|s| s.to_string()).collect(),
            lag_order,
        }
    }

    pub fn validate<T: Scalar>(&self, data: &PanelDataset<T>) -> Result<()> {
        if self.lag_order == 0 {
            return Err(Error::InvalidSpec("lag order must be at least 1".into()));
        }
        let names: Vec<&String> = [&self.p_variable, &self.y_variable, &self.r_variable]
            .into_iter()
            .chain(self.controls.iter())
            .collect();
        if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
            return Err(Error::InvalidSpec(
                "p, y, r and controls must be pairwise distinct".into(),
            ));
        }
        for n in names {
            if !data.has_variable(n) {
                return Err(Error::UnknownVariable(n.clone()));
            }
        }
        Ok(())
    }
}

/// Fully materialized regression design for one equation.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationDesign<T: Scalar> {
    pub equation: Equation,
    pub dependent_name: String,
    pub dependent: DVector<T>,
    pub regressors: DMatrix<T>,
    pub tags: Vec<TermTag>,
    pub rows: Vec<RowId>,
    /// Entity labels, indexed by `RowId::entity`.
    pub entities: Vec<String>,
    /// Full-period history of the dependent variable per entity; source of
    /// the lagged-level instruments.
    pub dependent_history: Vec<Vec<Option<T>>>,
}

impl<T: Scalar> EquationDesign<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.tags.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.tags.iter().map(|t| t.to_string()).collect()
    }

    pub fn column_of(&self, term: &Term) -> Option<usize> {
        self.tags.iter().position(|t| &t.term == term)
    }

    /// Entity of each row; the fixed-effect grouping.
    pub fn fixed_effect_groups(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.entity).collect()
    }

    /// Columns instrumented by lagged dependent levels (the endogenous block).
    pub fn endogenous_columns(&self) -> Vec<usize> {
        (0..self.tags.len())
            .filter(|&k| matches!(self.tags[k].term, Term::OwnLag(_)))
            .collect()
    }

    /// Columns treated as strictly exogenous.
    pub fn exogenous_columns(&self) -> Vec<usize> {
        (0..self.tags.len())
            .filter(|&k| !matches!(self.tags[k].term, Term::OwnLag(_)))
            .collect()
    }

    /// `(base column, interaction column)` index pairs.
    pub fn interaction_pairs(&self) -> Vec<(usize, usize)> {
        self.tags
            .iter()
            .enumerate()
            .filter_map(|(k, t)| {
                let base = t.term.base()?;
                self.column_of(&base).map(|b| (b, k))
            })
            .collect()
    }

    /// Level of the dependent variable at an arbitrary period, if observed.
    pub fn dependent_at(&self, entity: usize, period: usize) -> Option<T> {
        self.dependent_history
            .get(entity)
            .and_then(|h| h.get(period))
            .copied()
            .flatten()
    }
}

/// Column name → column index, covering every column exactly once.
pub fn term_map<T: Scalar>(design: &EquationDesign<T>) -> BTreeMap<String, usize> {
    design
        .tags
        .iter()
        .enumerate()
        .map(|(k, t)| (t.to_string(), k))
        .collect()
}

fn canonical_terms(equation: Equation, spec: &ModelSpec) -> Vec<Term> {
    let l = spec.lag_order;
    let mut terms: Vec<Term> = (1..=l).map(Term::OwnLag).collect();
    terms.extend((0..=l).map(Term::Shock));
    terms.extend((0..=l).map(Term::ShockExporter));
    if equation == Equation::Spread {
        terms.extend((0..=l).map(Term::Price));
        terms.extend((0..=l).map(Term::PriceExporter));
    }
    terms.extend(spec.controls.iter().cloned().map(Term::Control));
    terms
}

fn build<T: Scalar>(
    equation: Equation,
    spec: &ModelSpec,
    data: &PanelDataset<T>,
) -> Result<EquationDesign<T>> {
    spec.validate(data)?;
    let dep = match equation {
        Equation::Price => &spec.p_variable,
        Equation::Spread => &spec.y_variable,
    };
    let terms = canonical_terms(equation, spec);

    fn source<'a>(term: &'a Term, dep: &'a str, spec: &'a ModelSpec) -> (&'a str, usize) {
        match term {
            Term::OwnLag(j) => (dep, *j),
            Term::Shock(j) | Term::ShockExporter(j) => (spec.r_variable.as_str(), *j),
            Term::Price(j) | Term::PriceExporter(j) => (spec.p_variable.as_str(), *j),
            Term::Control(name) => (name.as_str(), 0),
        }
    }

    let mut required: Vec<(String, usize)> = vec![(dep.clone(), 0)];
    for t in &terms {
        let (name, lag) = source(t, dep, spec);
        let key = (name.to_string(), lag);
        if !required.contains(&key) {
            required.push(key);
        }
    }
    let rows = align_observations(data, &required)?;
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }

    let mut x = DMatrix::<T>::zeros(rows.len(), terms.len());
    let mut y = DVector::<T>::zeros(rows.len());
    for (i, row) in rows.iter().enumerate() {
        y[i] = data.value(row.entity, dep, row.period, 0)?.expect("aligned");
        let flag = if data.is_exporter(row.entity) {
            T::one()
        } else {
            T::zero()
        };
        for (k, term) in terms.iter().enumerate() {
            let (name, lag) = source(term, dep, spec);
            let v = data.value(row.entity, name, row.period, lag)?.expect("aligned");
            x[(i, k)] = if term.is_interaction() { v * flag } else { v };
        }
    }

    let dependent_history = (0..data.n_entities())
        .map(|e| Ok(data.series(e, dep)?.values().to_vec()))
        .collect::<Result<_>>()?;

    Ok(EquationDesign {
        equation,
        dependent_name: dep.clone(),
        dependent: y,
        regressors: x,
        tags: terms
            .into_iter()
            .map(|term| TermTag { equation, term })
            .collect(),
        rows,
        entities: data.entities().to_vec(),
        dependent_history,
    })
}

/// Commodity-price equation: own lags, shock lags, shock×exporter lags, controls.
pub fn build_price_equation<T: Scalar>(
    spec: &ModelSpec,
    data: &PanelDataset<T>,
) -> Result<EquationDesign<T>> {
    build(Equation::Price, spec, data)
}

/// Spread equation: adds contemporaneous and lagged country price terms and
/// their exporter interactions to the price-equation layout.
pub fn build_spread_equation<T: Scalar>(
    spec: &ModelSpec,
    data: &PanelDataset<T>,
) -> Result<EquationDesign<T>> {
    build(Equation::Spread, spec, data)
}
