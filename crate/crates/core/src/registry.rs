//! Named strategy registries: model families (which transforms turn the base
//! perturbation into LBH / MBH / RLBH / RMBH) and decay laws used by the fitter.
//! Both are looked up by name from configuration.

use std::collections::BTreeMap;

use crate::analysis::FitFamily;
use crate::error::{Error, Result};
use crate::model::{transform_perturbation, ParametricModel, Transform};

/// Generic name -> strategy map.
pub struct Registry<T: ?Sized> {
    entries: BTreeMap<&'static str, Box<T>>,
}

impl<T: ?Sized> Default for Registry<T> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn register(&mut self, name: &'static str, strategy: Box<T>) -> &mut Self {
        self.entries.insert(name, strategy);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// Parameters shared by all model families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyParams {
    /// Gaussian cutoff width in level indices.
    pub cutoff_bandwidth: f64,
    pub randomize_seed: u64,
}

pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Transform turning the base (correlated, uncut) perturbation into this family.
    fn transform(&self, params: &FamilyParams) -> Option<Transform>;

    /// Name of the sign-randomized counterpart, if this family is correlated.
    fn randomized_partner(&self) -> Option<&'static str>;

    fn build(&self, base: &ParametricModel, params: &FamilyParams) -> Result<ParametricModel> {
        match self.transform(params) {
            None => Ok(base.clone()),
            Some(op) => base.with_perturbation(transform_perturbation(base.perturbation(), op)?),
        }
    }
}

struct Linearized;
struct Modified;
struct RandomizedLinearized;
struct RandomizedModified;

impl ModelFamily for Linearized {
    fn name(&self) -> &'static str {
        "lbh"
    }
    fn description(&self) -> &'static str {
        "base perturbation as given"
    }
    fn transform(&self, _: &FamilyParams) -> Option<Transform> {
        None
    }
    fn randomized_partner(&self) -> Option<&'static str> {
        Some("rlbh")
    }
}

impl ModelFamily for Modified {
    fn name(&self) -> &'static str {
        "mbh"
    }
    fn description(&self) -> &'static str {
        "Gaussian band cutoff G(n-m) applied to the base perturbation"
    }
    fn transform(&self, p: &FamilyParams) -> Option<Transform> {
        Some(Transform::GaussianCutoff {
            bandwidth: p.cutoff_bandwidth,
        })
    }
    fn randomized_partner(&self) -> Option<&'static str> {
        Some("rmbh")
    }
}

impl ModelFamily for RandomizedLinearized {
    fn name(&self) -> &'static str {
        "rlbh"
    }
    fn description(&self) -> &'static str {
        "off-diagonal signs of the base perturbation randomized"
    }
    fn transform(&self, p: &FamilyParams) -> Option<Transform> {
        Some(Transform::SignRandomize {
            seed: p.randomize_seed,
        })
    }
    fn randomized_partner(&self) -> Option<&'static str> {
        None
    }
}

impl ModelFamily for RandomizedModified {
    fn name(&self) -> &'static str {
        "rmbh"
    }
    fn description(&self) -> &'static str {
        "band cutoff followed by sign randomization"
    }
    fn transform(&self, p: &FamilyParams) -> Option<Transform> {
        Some(Transform::Both {
            bandwidth: p.cutoff_bandwidth,
            seed: p.randomize_seed,
        })
    }
    fn randomized_partner(&self) -> Option<&'static str> {
        None
    }
}

pub fn model_families() -> Registry<dyn ModelFamily> {
    let mut r: Registry<dyn ModelFamily> = Registry::default();
    r.register("lbh", Box::new(Linearized))
        .register("mbh", Box::new(Modified))
        .register("rlbh", Box::new(RandomizedLinearized))
        .register("rmbh", Box::new(RandomizedModified));
    r
}

/// A decay law linear in some function of time after taking `ln M`:
/// `ln M = slope * regressor(t) + c`.
pub trait DecayLaw: Send + Sync {
    fn name(&self) -> &'static str;
    fn family(&self) -> FitFamily;
    fn regressor(&self, t: f64) -> f64;
    /// Converts the fitted slope to a nonnegative rate (inverse time).
    fn rate_from_slope(&self, slope: f64) -> f64;
    /// `ln M` predicted at `t` for a given rate, without the intercept.
    fn log_decay(&self, rate: f64, t: f64) -> f64;
}

struct Exponential;
struct Gaussian;

impl DecayLaw for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn family(&self) -> FitFamily {
        FitFamily::Exponential
    }
    fn regressor(&self, t: f64) -> f64 {
        t
    }
    fn rate_from_slope(&self, slope: f64) -> f64 {
        (-slope).max(0.0)
    }
    fn log_decay(&self, rate: f64, t: f64) -> f64 {
        -rate * t
    }
}

/// `M = exp(-(t / tau)^2)`; the reported rate is `1 / tau`.
impl DecayLaw for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn family(&self) -> FitFamily {
        FitFamily::Gaussian
    }
    fn regressor(&self, t: f64) -> f64 {
        t * t
    }
    fn rate_from_slope(&self, slope: f64) -> f64 {
        (-slope).max(0.0).sqrt()
    }
    fn log_decay(&self, rate: f64, t: f64) -> f64 {
        -(rate * t).powi(2)
    }
}

pub fn decay_laws() -> Registry<dyn DecayLaw> {
    let mut r: Registry<dyn DecayLaw> = Registry::default();
    r.register("exponential", Box::new(Exponential))
        .register("gaussian", Box::new(Gaussian));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups_by_name() {
        let fams = model_families();
        assert_eq!(fams.names(), vec!["lbh", "mbh", "rlbh", "rmbh"]);
        assert_eq!(fams.get("mbh").unwrap().randomized_partner(), Some("rmbh"));
        assert!(matches!(
            fams.get("stadium"),
            Err(Error::UnknownStrategy { .. })
        ));
        let laws = decay_laws();
        assert_eq!(laws.get("gaussian").unwrap().family(), FitFamily::Gaussian);
        assert_eq!(laws.get("exponential").unwrap().rate_from_slope(-2.0), 2.0);
        assert_eq!(laws.get("gaussian").unwrap().rate_from_slope(-4.0), 2.0);
    }
}
