//! Sampling distributions over box supports.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CsgError, Result};
use crate::types::{BoxDomain, Sample};

/// Sampler closure: draws one point of the support from the given generator.
///
/// The crate standardizes on the seedable `ChaCha8Rng` generator so that runs
/// are reproducible from a single integer seed.
pub type SamplerFn = dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync;

/// One-dimensional cumulative distribution function on the support interval.
pub type CdfFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Tolerance for validating that a supplied cdf is 0 at the lower and 1 at
/// the upper end of the support.
const CDF_ENDPOINT_TOL: f64 = 1e-9;

/// A probability distribution on a box support, given by a sampler and, for
/// one-dimensional supports, optionally its cdf.
///
/// The cdf is what turns Voronoi cell boundaries into exact cell
/// probabilities; strategies that need it (exact and exact hybrid weights)
/// report an unsupported configuration when it is absent.
#[derive(Clone)]
pub struct Distribution {
    support: BoxDomain,
    sampler: Arc<SamplerFn>,
    cdf: Option<Arc<CdfFn>>,
    uniform: bool,
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Distribution")
            .field("support", &self.support)
            .field("has_cdf", &self.cdf.is_some())
            .field("uniform", &self.uniform)
            .finish()
    }
}

impl Distribution {
    /// The uniform distribution on `support`. For one-dimensional supports
    /// the cdf is attached automatically.
    pub fn uniform(support: BoxDomain) -> Self {
        let bounds: Vec<(f64, f64)> = support
            .lower()
            .iter()
            .zip(support.upper())
            .map(|(&lo, &hi)| (lo, hi))
            .collect();
        let sampler: Arc<SamplerFn> = Arc::new(move |rng: &mut ChaCha8Rng| {
            bounds
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        });
        let cdf: Option<Arc<CdfFn>> = if support.dim() == 1 {
            let lo = support.lower()[0];
            let hi = support.upper()[0];
            Some(Arc::new(move |x: f64| {
                if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else if x < lo {
                    0.0
                } else {
                    1.0
                }
            }))
        } else {
            None
        };
        Self {
            support,
            sampler,
            cdf,
            uniform: true,
        }
    }

    /// A distribution with a caller-supplied sampler and optional cdf.
    ///
    /// A cdf may only be attached to one-dimensional supports and must
    /// evaluate to 0 at the lower and 1 at the upper support endpoint.
    pub fn custom(
        support: BoxDomain,
        sampler: Arc<SamplerFn>,
        cdf: Option<Arc<CdfFn>>,
    ) -> Result<Self> {
        if let Some(cdf) = &cdf {
            if support.dim() != 1 {
                return Err(CsgError::InvalidInput(
                    "a cdf can only be attached to a one-dimensional support".into(),
                ));
            }
            let lo = support.lower()[0];
            let hi = support.upper()[0];
            let at_lo = cdf(lo);
            let at_hi = cdf(hi);
            if at_lo.abs() > CDF_ENDPOINT_TOL || (at_hi - 1.0).abs() > CDF_ENDPOINT_TOL {
                return Err(CsgError::InvalidInput(format!(
                    "cdf must run from 0 to 1 over the support, got cdf({lo}) = {at_lo}, cdf({hi}) = {at_hi}"
                )));
            }
        }
        Ok(Self {
            support,
            sampler,
            cdf,
            uniform: false,
        })
    }

    pub fn support(&self) -> &BoxDomain {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn has_cdf(&self) -> bool {
        self.cdf.is_some()
    }

    /// Whether this is the uniform distribution on its support (used by the
    /// quadrature oracle, which needs a density).
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Draws one sample.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Sample {
        let v = (self.sampler)(rng);
        debug_assert!(
            self.support.contains(&v),
            "sampler produced a point outside the support"
        );
        Sample(v)
    }

    /// Evaluates the cdf at `x` (one-dimensional supports only).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match &self.cdf {
            Some(cdf) => Ok(cdf(x)),
            None => Err(CsgError::UnsupportedConfiguration(
                "distribution has no cdf attached".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn uniform_samples_stay_in_support() {
        let dist = Distribution::uniform(BoxDomain::interval(-0.5, 0.5).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = dist.sample(&mut rng);
            assert!(dist.support().contains(s.as_slice()));
        }
    }

    #[test]
    fn uniform_cdf_endpoints() {
        let dist = Distribution::uniform(BoxDomain::interval(-2.0, 6.0).unwrap());
        assert_eq!(dist.cdf(-2.0).unwrap(), 0.0);
        assert_eq!(dist.cdf(6.0).unwrap(), 1.0);
        assert!((dist.cdf(0.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn multivariate_uniform_has_no_cdf() {
        let dist = Distribution::uniform(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        assert!(!dist.has_cdf());
        assert!(dist.cdf(0.5).is_err());
    }

    #[test]
    fn custom_cdf_endpoints_validated() {
        let support = BoxDomain::interval(0.0, 1.0).unwrap();
        let sampler: Arc<SamplerFn> = Arc::new(|rng: &mut ChaCha8Rng| {
            let u: f64 = rng.gen_range(0.0..=1.0);
            vec![u.sqrt()]
        });
        // cdf(x) = x^2 on [0, 1]: valid
        assert!(Distribution::custom(
            support.clone(),
            sampler.clone(),
            Some(Arc::new(|x: f64| x * x)),
        )
        .is_ok());
        // cdf(1) = 0.5: rejected
        assert!(
            Distribution::custom(support, sampler, Some(Arc::new(|x: f64| 0.5 * x * x))).is_err()
        );
    }

    #[test]
    fn sampling_is_reproducible_from_seed() {
        let dist = Distribution::uniform(BoxDomain::interval(0.0, 1.0).unwrap());
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            assert_eq!(dist.sample(&mut a), dist.sample(&mut b));
        }
    }
}
