//! Parametric-bootstrap bands for impulse responses.
//!
//! Each replication redraws both coefficient vectors from normal
//! distributions centred on the estimates with the robust covariances,
//! recomputes the requested responses, and the bands are per-horizon
//! empirical quantiles across replications. The two equations are drawn
//! independently.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::replication_seed;
use crate::error::{Error, Result};
use crate::gmm::EstimationResult;
use crate::irf::{compute_irf, EquationCoefficients, IrfPath, IrfRequest};
use crate::linalg::psd_root;
use crate::model::TermTag;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub quantiles: (f64, f64),
    pub seed: u64,
    pub discard_explosive: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 200,
            quantiles: (0.1, 0.9),
            seed: 0,
            discard_explosive: false,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidSpec("at least 2 replications required".into()));
        }
        let (lo, hi) = self.quantiles;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidSpec(
                "quantiles must satisfy 0 < lo < hi < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMeta {
    pub config: BootstrapConfig,
    pub explosive_draws: usize,
    pub used_draws: usize,
    /// Largest negative covariance eigenvalue clipped, per equation.
    pub clipped_eigenvalue_price: f64,
    pub clipped_eigenvalue_spread: f64,
}

/// Point response plus quantile bands for the panel's plotted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfResult<T> {
    pub request: IrfRequest<T>,
    pub point: IrfPath<T>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub meta: BandMeta,
}

impl<T: Scalar> IrfResult<T> {
    pub fn point_series(&self) -> &[T] {
        self.point.panel_series(self.request.panel)
    }
}

/// Multivariate normal sampler `θ̂ + R z` with `R` the symmetric root of the
/// PSD-clipped covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSampler<T: Scalar> {
    pub mean: DVector<T>,
    pub root: DMatrix<T>,
    pub clipped: T,
    pub tags: Vec<Option<TermTag>>,
}

impl<T: Scalar> CoefficientSampler<T> {
    pub fn new(result: &EstimationResult<T>) -> Result<Self> {
        Self::from_moments(&result.coefficients, &result.vce, result.tags.clone())
    }

    pub fn from_moments(mean: &DVector<T>, vce: &DMatrix<T>, tags: Vec<Option<TermTag>>) -> Result<Self> {
        let k = mean.len();
        if vce.nrows() != k || vce.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{} for {k} coefficients",
                vce.nrows(),
                vce.ncols()
            )));
        }
        let (root, clipped) = psd_root(vce);
        Ok(Self {
            mean: mean.clone(),
            root,
            clipped,
            tags,
        })
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<T> {
        let z = DVector::from_fn(self.mean.len(), |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            T::lit(v)
        });
        &self.mean + &self.root * z
    }
}

/// One coefficient draw from the estimated sampling distribution.
pub fn draw_coefficients<T: Scalar>(result: &EstimationResult<T>, rng: &mut ChaCha8Rng) -> Result<DVector<T>> {
    Ok(CoefficientSampler::new(result)?.draw(rng))
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Bands for several requests sharing the same coefficient draws.
pub fn bootstrap_grid<T: Scalar>(
    res_p: &EstimationResult<T>,
    res_y: &EstimationResult<T>,
    requests: &[IrfRequest<T>],
    cfg: &BootstrapConfig,
) -> Result<Vec<IrfResult<T>>> {
    cfg.validate()?;
    for r in requests {
        r.validate()?;
    }
    let sp = CoefficientSampler::new(res_p)?;
    let sy = CoefficientSampler::new(res_y)?;
    let cp = EquationCoefficients::from_result(res_p)?;
    let cy = EquationCoefficients::from_result(res_y)?;
    let points: Vec<IrfPath<T>> = requests
        .iter()
        .map(|r| compute_irf(&cp, &cy, r))
        .collect::<Result<_>>()?;

    let draws: Vec<Result<Vec<IrfPath<T>>>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng_p = ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, 2 * rep as u64));
            let mut rng_y = ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, 2 * rep as u64 + 1));
            let dp = EquationCoefficients::from_tagged(&sp.tags, &sp.draw(&mut rng_p))?;
            let dy = EquationCoefficients::from_tagged(&sy.tags, &sy.draw(&mut rng_y))?;
            requests.iter().map(|r| compute_irf(&dp, &dy, r)).collect()
        })
        .collect();
    let draws: Vec<Vec<IrfPath<T>>> = draws.into_iter().collect::<Result<_>>()?;

    requests
        .iter()
        .enumerate()
        .map(|(k, req)| {
            let explosive = draws.iter().filter(|d| d[k].explosive).count();
            let kept: Vec<&[T]> = draws
                .iter()
                .filter(|d| !(cfg.discard_explosive && d[k].explosive))
                .map(|d| d[k].panel_series(req.panel))
                .collect();
            if kept.is_empty() {
                return Err(Error::BandFailure);
            }
            let len = req.horizon + 1;
            let mut lo = Vec::with_capacity(len);
            let mut hi = Vec::with_capacity(len);
            let mut column = Vec::with_capacity(kept.len());
            for h in 0..len {
                column.clear();
                column.extend(kept.iter().map(|s| s[h]));
                column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                lo.push(quantile_sorted(&column, cfg.quantiles.0));
                hi.push(quantile_sorted(&column, cfg.quantiles.1));
            }
            Ok(IrfResult {
                request: *req,
                point: points[k].clone(),
                lo,
                hi,
                meta: BandMeta {
                    config: *cfg,
                    explosive_draws: explosive,
                    used_draws: kept.len(),
                    clipped_eigenvalue_price: sp.clipped.as_f64(),
                    clipped_eigenvalue_spread: sy.clipped.as_f64(),
                },
            })
        })
        .collect()
}

/// Point response and quantile bands for one request.
pub fn bootstrap_bands<T: Scalar>(
    res_p: &EstimationResult<T>,
    res_y: &EstimationResult<T>,
    req: &IrfRequest<T>,
    cfg: &BootstrapConfig,
) -> Result<IrfResult<T>> {
    Ok(bootstrap_grid(res_p, res_y, std::slice::from_ref(req), cfg)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_200_draws_and_decile_bands() {
        let cfg = BootstrapConfig::default();
        assert_eq!(cfg.replications, 200);
        assert_eq!(cfg.quantiles, (0.1, 0.9));
        assert!(!cfg.discard_explosive);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            BootstrapConfig { replications: 1, ..Default::default() },
            BootstrapConfig { quantiles: (0.9, 0.1), ..Default::default() },
            BootstrapConfig { quantiles: (0.0, 0.9), ..Default::default() },
            BootstrapConfig { quantiles: (0.1, 1.0), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn zero_covariance_draws_equal_mean() {
        let mean = DVector::from_vec(vec![0.3, -1.2]);
        let s = CoefficientSampler::from_moments(&mean, &DMatrix::zeros(2, 2), vec![None, None]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(s.draw(&mut rng), mean);
        }
    }

    #[test]
    fn sampler_sd_matches_variance() {
        let s = CoefficientSampler::from_moments(
            &DVector::from_vec(vec![1.0]),
            &DMatrix::from_element(1, 1, 4.0),
            vec![None],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let v: Vec<f64> = (0..10_000).map(|_| s.draw(&mut rng)[0]).collect();
        let sd = crate::panel::sample_sd(&v).unwrap();
        assert!((sd - 2.0).abs() < 0.1, "sd {sd}");
    }

    #[test]
    fn seeded_draws_repeat() {
        let s = CoefficientSampler::from_moments(
            &DVector::from_vec(vec![0.0, 0.0]),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]),
            vec![None, None],
        )
        .unwrap();
        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| s.draw(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(seq(9), seq(9));
        assert_ne!(seq(9), seq(10));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = CoefficientSampler::from_moments(
            &DVector::from_vec(vec![0.0, 0.0]),
            &DMatrix::zeros(3, 3),
            vec![None, None],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn negative_eigenvalues_are_clipped() {
        let s = CoefficientSampler::from_moments(
            &DVector::from_vec(vec![0.0, 0.0]),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]),
            vec![None, None],
        )
        .unwrap();
        assert_eq!(s.clipped, 1e-3);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((quantile_sorted(&v, 0.1) - 1.4).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.9) - 4.6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quantiles_are_ordered(mut v in prop::collection::vec(-1e6..1e6f64, 1..300), a in 0.0..1.0f64, b in 0.0..1.0f64) {
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantile_sorted(&v, lo) <= quantile_sorted(&v, hi));
        }
    }
}
