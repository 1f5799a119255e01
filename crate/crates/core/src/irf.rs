//! Impulse responses of the recursive price/spread system to a shock in the
//! global variable, in deviations from baseline.
//!
//! Panels: `A` is the price response, `B` the total spread response, and `C`
//! the spread response that runs only through prices (direct shock
//! coefficients of the spread equation set to zero).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::EstimationResult;
use crate::model::{Term, TermTag};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Exporter,
    Importer,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Exporter, Group::Importer];

    pub fn indicator<T: Scalar>(self) -> T {
        match self {
            Group::Exporter => T::one(),
            Group::Importer => T::zero(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Exporter => "exporter",
            Group::Importer => "importer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Panel {
    /// Shock to commodity prices.
    A,
    /// Shock to spreads, total effect.
    B,
    /// Shock to spreads through commodity prices only.
    C,
}

impl Panel {
    pub const ALL: [Panel; 3] = [Panel::A, Panel::B, Panel::C];

    pub fn as_str(self) -> &'static str {
        match self {
            Panel::A => "A",
            Panel::B => "B",
            Panel::C => "C",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockProfile {
    /// `r_0 = size`, zero afterwards.
    #[default]
    Transitory,
    /// `r_h = size` for every `h ≥ 0`.
    Permanent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrfRequest<T> {
    pub shock_size: T,
    pub horizon: usize,
    pub group: Group,
    pub panel: Panel,
    pub profile: ShockProfile,
}

impl<T: Scalar> IrfRequest<T> {
    pub fn new(shock_size: T, horizon: usize, group: Group, panel: Panel) -> Self {
        Self {
            shock_size,
            horizon,
            group,
            panel,
            profile: ShockProfile::Transitory,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("IRF horizon must be at least 1".into()));
        }
        if !self.shock_size.is_finite_value() || self.shock_size <= T::zero() {
            return Err(Error::InvalidSpec("shock size must be positive".into()));
        }
        Ok(())
    }

    fn shock_path(&self) -> Vec<T> {
        (0..=self.horizon)
            .map(|h| match (self.profile, h) {
                (ShockProfile::Transitory, 0) | (ShockProfile::Permanent, _) => self.shock_size,
                _ => T::zero(),
            })
            .collect()
    }
}

/// Response paths over horizons `0..=H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfPath<T> {
    pub p_response: Vec<T>,
    /// Absent for panel A.
    pub y_response: Option<Vec<T>>,
    /// `|p_H|` or `|y_H|` exceeded `1e6 × shock_size`.
    pub explosive: bool,
}

impl<T: Scalar> IrfPath<T> {
    /// The series a panel plots: prices for A, spreads for B and C.
    pub fn panel_series(&self, panel: Panel) -> &[T] {
        match panel {
            Panel::A => &self.p_response,
            Panel::B | Panel::C => self.y_response.as_deref().unwrap_or(&[]),
        }
    }
}

/// Dynamic coefficients of one equation, indexed by lag.
///
/// `own[j - 1]` multiplies the `j`-th own lag; every other vector is indexed
/// from lag 0. The price vectors are empty for the price equation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EquationCoefficients<T> {
    pub own: Vec<T>,
    pub shock: Vec<T>,
    pub shock_exporter: Vec<T>,
    pub price: Vec<T>,
    pub price_exporter: Vec<T>,
}

fn put<T: Scalar>(v: &mut Vec<T>, idx: usize, value: T) {
    if v.len() <= idx {
        v.resize(idx + 1, T::zero());
    }
    v[idx] = value;
}

fn at<T: Scalar>(v: &[T], j: usize) -> T {
    v.get(j).copied().unwrap_or(T::zero())
}

impl<T: Scalar> EquationCoefficients<T> {
    /// Collects dynamic terms by tag; controls and intercepts are ignored
    /// because they cancel in deviations from baseline.
    pub fn from_tagged(tags: &[Option<TermTag>], values: &DVector<T>) -> Result<Self> {
        if tags.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tags for {} coefficients",
                tags.len(),
                values.len()
            )));
        }
        let mut out = Self::default();
        for (tag, &v) in tags.iter().zip(values.iter()) {
            let Some(tag) = tag else { continue };
            match tag.term {
                Term::OwnLag(j) if j >= 1 => put(&mut out.own, j - 1, v),
                Term::Shock(j) => put(&mut out.shock, j, v),
                Term::ShockExporter(j) => put(&mut out.shock_exporter, j, v),
                Term::Price(j) => put(&mut out.price, j, v),
                Term::PriceExporter(j) => put(&mut out.price_exporter, j, v),
                _ => {}
            }
        }
        Ok(out)
    }

    pub fn from_result(result: &EstimationResult<T>) -> Result<Self> {
        Self::from_tagged(&result.tags, &result.coefficients)
    }

    /// `base_j + exporter_j · d` for the group's indicator `d`.
    fn effective(base: &[T], exporter: &[T], group: Group) -> Vec<T> {
        let d = group.indicator::<T>();
        (0..base.len().max(exporter.len()))
            .map(|j| at(base, j) + at(exporter, j) * d)
            .collect()
    }

    pub fn effective_shock(&self, group: Group) -> Vec<T> {
        Self::effective(&self.shock, &self.shock_exporter, group)
    }

    pub fn effective_price(&self, group: Group) -> Vec<T> {
        Self::effective(&self.price, &self.price_exporter, group)
    }

    /// Zeroes the direct shock coefficients (base and exporter interaction).
    pub fn without_shock(&self) -> Self {
        Self {
            shock: vec![T::zero(); self.shock.len()],
            shock_exporter: vec![T::zero(); self.shock_exporter.len()],
            ..self.clone()
        }
    }
}

/// Spectral radius of the companion matrix of `x_t = Σ own[j-1] x_{t-j}`.
pub fn spectral_radius<T: Scalar>(own: &[T]) -> f64 {
    let l = own.len();
    if l == 0 {
        return 0.0;
    }
    let mut c = DMatrix::<f64>::zeros(l, l);
    for j in 0..l {
        c[(0, j)] = own[j].as_f64();
    }
    for j in 1..l {
        c[(j, j - 1)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `x_h = Σ_{j≥1} own_j x_{h-j} + Σ_{j≥0} input_j u_{h-j}` with zero history.
fn filter<T: Scalar>(own: &[T], inputs: &[(&[T], &[T])], horizon: usize) -> Vec<T> {
    let mut x = vec![T::zero(); horizon + 1];
    for h in 0..=horizon {
        let mut v = T::zero();
        for (j, &a) in own.iter().enumerate() {
            if let Some(prev) = h.checked_sub(j + 1) {
                v += a * x[prev];
            }
        }
        for (coefs, series) in inputs {
            for (j, &b) in coefs.iter().enumerate() {
                if let Some(t) = h.checked_sub(j) {
                    v += b * series[t];
                }
            }
        }
        x[h] = v;
    }
    x
}

fn path<T: Scalar>(
    price: &EquationCoefficients<T>,
    spread: &EquationCoefficients<T>,
    req: &IrfRequest<T>,
    with_spread: bool,
) -> Result<IrfPath<T>> {
    req.validate()?;
    let r = req.shock_path();
    let alpha = price.effective_shock(req.group);
    let p = filter(&price.own, &[(&alpha, &r)], req.horizon);
    let y = with_spread.then(|| {
        let beta = spread.effective_shock(req.group);
        let gamma = spread.effective_price(req.group);
        filter(&spread.own, &[(&beta, &r), (&gamma, &p)], req.horizon)
    });
    let limit = T::lit(1e6) * req.shock_size;
    let blown = |v: &[T]| v.last().is_some_and(|x| !x.is_finite_value() || x.abs() > limit);
    let explosive = blown(&p) || y.as_deref().is_some_and(blown);
    Ok(IrfPath {
        p_response: p,
        y_response: y,
        explosive,
    })
}

/// Impulse response for the requested panel and group.
pub fn compute_irf<T: Scalar>(
    price: &EquationCoefficients<T>,
    spread: &EquationCoefficients<T>,
    req: &IrfRequest<T>,
) -> Result<IrfPath<T>> {
    match req.panel {
        Panel::A => path(price, spread, req, false),
        Panel::B => path(price, spread, req, true),
        Panel::C => channel_irf(price, spread, req),
    }
}

/// Spread response through prices only: the recursion with the spread
/// equation's direct shock coefficients forced to zero.
pub fn channel_irf<T: Scalar>(
    price: &EquationCoefficients<T>,
    spread: &EquationCoefficients<T>,
    req: &IrfRequest<T>,
) -> Result<IrfPath<T>> {
    path(price, &spread.without_shock(), req, true)
}

/// Exporter and importer paths for the same request.
pub fn group_pair<T: Scalar>(
    price: &EquationCoefficients<T>,
    spread: &EquationCoefficients<T>,
    req: &IrfRequest<T>,
) -> Result<(IrfPath<T>, IrfPath<T>)> {
    let exp = IrfRequest {
        group: Group::Exporter,
        ..*req
    };
    let imp = IrfRequest {
        group: Group::Importer,
        ..*req
    };
    Ok((
        compute_irf(price, spread, &exp)?,
        compute_irf(price, spread, &imp)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coefs(own: &[f64], shock: &[f64], shock_x: &[f64], price: &[f64], price_x: &[f64]) -> EquationCoefficients<f64> {
        EquationCoefficients {
            own: own.to_vec(),
            shock: shock.to_vec(),
            shock_exporter: shock_x.to_vec(),
            price: price.to_vec(),
            price_exporter: price_x.to_vec(),
        }
    }

    fn req(panel: Panel, group: Group) -> IrfRequest<f64> {
        IrfRequest::new(1.0, 20, group, panel)
    }

    #[test]
    fn zero_coefficients_give_zero_paths() {
        let z = coefs(&[0.0, 0.0], &[0.0; 3], &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        for panel in Panel::ALL {
            let p = compute_irf(&z, &z, &req(panel, Group::Exporter)).unwrap();
            assert!(p.p_response.iter().all(|&v| v == 0.0));
            assert!(p.y_response.unwrap_or_default().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn scalar_ar1_is_geometric() {
        let pc = coefs(&[0.5], &[1.0], &[], &[], &[]);
        let yc = EquationCoefficients::default();
        let p = compute_irf(&pc, &yc, &req(Panel::A, Group::Importer)).unwrap();
        assert!(p.y_response.is_none());
        for (h, v) in p.p_response.iter().enumerate() {
            assert_eq!(*v, 0.5f64.powi(h as i32));
        }
    }

    #[test]
    fn scalar_ar1_in_single_precision() {
        let pc = EquationCoefficients::<f32> {
            own: vec![0.5],
            shock: vec![1.0],
            ..Default::default()
        };
        let p = compute_irf(&pc, &EquationCoefficients::default(), &IrfRequest::new(1.0f32, 5, Group::Importer, Panel::A)).unwrap();
        assert_eq!(p.p_response, vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]);
    }

    #[test]
    fn channel_is_idempotent_without_direct_effect() {
        let pc = coefs(&[0.6, 0.1], &[0.3, 0.1, 0.0], &[-0.8, 0.2, 0.1], &[], &[]);
        let yc = coefs(&[0.4, 0.2], &[0.0; 3], &[0.0; 3], &[0.2, -0.1, 0.05], &[-0.5, 0.1, 0.0]);
        for g in Group::BOTH {
            let b = compute_irf(&pc, &yc, &req(Panel::B, g)).unwrap();
            let c = channel_irf(&pc, &yc, &req(Panel::B, g)).unwrap();
            assert_eq!(b, c);
        }
    }

    #[test]
    fn severed_price_channel_is_zero() {
        let pc = coefs(&[0.6], &[0.3, 0.1], &[-0.8, 0.2], &[], &[]);
        let yc = coefs(&[0.4], &[0.5, 0.2], &[0.1, 0.1], &[0.0, 0.0], &[0.0, 0.0]);
        let c = channel_irf(&pc, &yc, &req(Panel::C, Group::Exporter)).unwrap();
        assert!(c.y_response.unwrap().iter().all(|&v| v == 0.0));
        let a = compute_irf(&pc, &yc, &req(Panel::A, Group::Exporter)).unwrap();
        assert_eq!(a.p_response, c.p_response);
    }

    #[test]
    fn importer_ignores_interactions() {
        let pc = coefs(&[0.6, 0.1], &[0.3, 0.1, 0.0], &[-0.8, 0.2, 0.1], &[], &[]);
        let yc = coefs(&[0.4, 0.2], &[0.3, 0.0, 0.1], &[0.2, 0.1, 0.0], &[0.2, -0.1, 0.05], &[-0.5, 0.1, 0.0]);
        let mut perturbed = pc.clone();
        perturbed.shock_exporter[0] += 3.0;
        let mut perturbed_y = yc.clone();
        perturbed_y.price_exporter[1] -= 1.0;
        perturbed_y.shock_exporter[2] += 0.7;
        for panel in Panel::ALL {
            let r = req(panel, Group::Importer);
            let (_, base) = group_pair(&pc, &yc, &r).unwrap();
            let (_, moved) = group_pair(&perturbed, &perturbed_y, &r).unwrap();
            assert_eq!(base, moved);
        }
    }

    #[test]
    fn zero_interactions_make_groups_identical() {
        let pc = coefs(&[0.6, 0.1], &[0.3, 0.1, 0.0], &[0.0; 3], &[], &[]);
        let yc = coefs(&[0.4, 0.2], &[0.3, 0.0, 0.1], &[0.0; 3], &[0.2, -0.1, 0.05], &[0.0; 3]);
        for panel in Panel::ALL {
            let (e, i) = group_pair(&pc, &yc, &req(panel, Group::Exporter)).unwrap();
            assert_eq!(e, i);
        }
    }

    #[test]
    fn opposite_impact_signs_for_paper_sign_coefficients() {
        // Importers: α0 = +0.4, exporters: α0 = 0.4 - 1.0 = -0.6.
        let pc = coefs(&[0.5], &[0.4, 0.0], &[-1.0, 0.0], &[], &[]);
        let (e, i) = group_pair(&pc, &EquationCoefficients::default(), &req(Panel::A, Group::Exporter)).unwrap();
        assert!(e.p_response[0] < 0.0);
        assert!(i.p_response[0] > 0.0);
    }

    #[test]
    fn explosive_paths_are_flagged_not_dropped() {
        let pc = coefs(&[2.5], &[1.0], &[], &[], &[]);
        let p = compute_irf(&pc, &EquationCoefficients::default(), &req(Panel::A, Group::Importer)).unwrap();
        assert!(p.explosive);
        assert_eq!(p.p_response.len(), 21);
        let stable = coefs(&[0.5], &[1.0], &[], &[], &[]);
        assert!(!compute_irf(&stable, &EquationCoefficients::default(), &req(Panel::A, Group::Importer)).unwrap().explosive);
    }

    #[test]
    fn invalid_requests() {
        let c = EquationCoefficients::<f64>::default();
        assert!(compute_irf(&c, &c, &IrfRequest::new(0.0, 5, Group::Exporter, Panel::A)).is_err());
        assert!(compute_irf(&c, &c, &IrfRequest::new(1.0, 0, Group::Exporter, Panel::A)).is_err());
    }

    #[test]
    fn from_tagged_reads_terms() {
        use crate::model::Equation;
        let tag = |term| Some(TermTag { equation: Equation::Spread, term });
        let tags = vec![
            tag(Term::OwnLag(1)),
            tag(Term::OwnLag(2)),
            tag(Term::Shock(0)),
            tag(Term::PriceExporter(1)),
            tag(Term::Control("ca".into())),
            None,
        ];
        let v = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 9.0, 9.0]);
        let c = EquationCoefficients::from_tagged(&tags, &v).unwrap();
        assert_eq!(c.own, vec![0.1, 0.2]);
        assert_eq!(c.shock, vec![0.3]);
        assert_eq!(c.price_exporter, vec![0.0, 0.4]);
        assert!(EquationCoefficients::from_tagged(&tags[..2], &v).is_err());
    }

    #[test]
    fn spectral_radius_of_ar2() {
        // x_t = 0.5 x_{t-1} + 0.24 x_{t-2}: roots 0.8 and -0.3.
        assert!((spectral_radius(&[0.5, 0.24]) - 0.8).abs() < 1e-12);
        assert_eq!(spectral_radius::<f64>(&[]), 0.0);
    }

    prop_compose! {
        fn stable_coefs()(own1 in -0.6..0.6f64, own2 in -0.3..0.3f64,
                          s in prop::collection::vec(-1.0..1.0f64, 9)) -> (EquationCoefficients<f64>, EquationCoefficients<f64>) {
            (coefs(&[own1, own2], &s[0..2], &s[2..4], &[], &[]),
             coefs(&[own2, own1 * 0.5], &s[4..5], &s[5..6], &s[6..8], &s[8..9]))
        }
    }

    proptest! {
        #[test]
        fn responses_scale_linearly((pc, yc) in stable_coefs(), c in 0.1..10.0f64) {
            for panel in Panel::ALL {
                let base = compute_irf(&pc, &yc, &req(panel, Group::Exporter)).unwrap();
                let scaled = compute_irf(&pc, &yc, &IrfRequest { shock_size: c, ..req(panel, Group::Exporter) }).unwrap();
                for (a, b) in base.p_response.iter().zip(&scaled.p_response) {
                    prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn total_minus_channel_is_direct_effect((pc, yc) in stable_coefs()) {
            // Linearity in (β, γ) with the price path held fixed.
            let mut direct = yc.clone();
            direct.price = vec![0.0; direct.price.len()];
            direct.price_exporter = vec![0.0; direct.price_exporter.len()];
            for g in Group::BOTH {
                let b = compute_irf(&pc, &yc, &req(Panel::B, g)).unwrap().y_response.unwrap();
                let c = compute_irf(&pc, &yc, &req(Panel::C, g)).unwrap().y_response.unwrap();
                let d = compute_irf(&pc, &direct, &req(Panel::B, g)).unwrap().y_response.unwrap();
                for h in 0..b.len() {
                    prop_assert!((b[h] - c[h] - d[h]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn stable_paths_decay((pc, yc) in stable_coefs()) {
            prop_assume!(spectral_radius(&pc.own) < 0.9 && spectral_radius(&yc.own) < 0.9);
            let r = IrfRequest::new(1.0, 400, Group::Exporter, Panel::B);
            let path = compute_irf(&pc, &yc, &r).unwrap();
            let y = path.y_response.unwrap();
            let impact = y.iter().take(3).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-3);
            prop_assert!(y[400].abs() < 1e-6 * impact);
        }
    }
}
