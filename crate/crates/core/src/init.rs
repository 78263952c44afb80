//! Initial configuration generators.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Configuration, Params};
use crate::theory::rho_bar;

/// Macroscopic density profile `rho0 : [0,1] -> [0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityProfile {
    Constant { value: f64 },
    Linear { left: f64, right: f64 },
    /// `below` on `[0, at]`, `above` on `(at, 1]`.
    Step { at: f64, below: f64, above: f64 },
}

impl DensityProfile {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DensityProfile::Constant { value } => value,
            DensityProfile::Linear { left, right } => left + (right - left) * u,
            DensityProfile::Step { at, below, above } => {
                if u <= at {
                    below
                } else {
                    above
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let values: &[f64] = match self {
            DensityProfile::Constant { value } => &[*value],
            DensityProfile::Linear { left, right } => &[*left, *right],
            DensityProfile::Step { at, below, above } => {
                if !(0.0..=1.0).contains(at) {
                    return Err(Error::InvalidParams(format!("step position {at} outside [0,1]")));
                }
                &[*below, *above]
            }
        };
        match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            Some(v) => Err(Error::InvalidParams(format!("density {v} outside [0,1]"))),
            None => Ok(()),
        }
    }
}

/// How replica initial states are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    AllOccupied,
    AllEmpty,
    /// Deterministic: site `x` occupied iff `rho0(x/N) >= 1/2`.
    Deterministic { profile: DensityProfile },
    /// Product measure with marginals `rho0(x/N)`.
    Bernoulli { profile: DensityProfile },
    /// `round(density (N-1))` particles placed uniformly without replacement.
    FixedCount { density: f64 },
    /// Product measure with marginals given by the hydrostatic profile of the
    /// run's parameters. Must go through [`InitialCondition::resolve`].
    Hydrostatic,
}

const UNRESOLVED: &str = "hydrostatic initial condition used before resolve()";

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Deterministic { profile } | InitialCondition::Bernoulli { profile } => {
                profile.validate()
            }
            InitialCondition::FixedCount { density } if !(0.0..=1.0).contains(density) => {
                Err(Error::InvalidParams(format!("density {density} outside [0,1]")))
            }
            _ => Ok(()),
        }
    }

    /// Replace parameter-dependent variants by concrete ones.
    pub fn resolve(&self, params: &Params) -> InitialCondition {
        match *self {
            InitialCondition::Hydrostatic => {
                let bar = |u| rho_bar(params.theta(), params.c(), params.alpha(), params.beta(), u);
                // every hydrostatic profile is affine
                InitialCondition::Bernoulli { profile: DensityProfile::Linear { left: bar(0.0), right: bar(1.0) } }
            }
            other => other,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Configuration {
        match *self {
            InitialCondition::AllOccupied => Configuration::full(n),
            InitialCondition::AllEmpty => Configuration::empty(n),
            InitialCondition::Deterministic { profile } => {
                Configuration::from_fn(n, |x| profile.eval(x as f64 / n as f64) >= 0.5)
            }
            InitialCondition::Bernoulli { profile } => bernoulli(n, |u| profile.eval(u), rng),
            InitialCondition::FixedCount { density } => {
                let k = (density * (n - 1) as f64).round() as usize;
                fixed_count(n, k, rng)
            }
            InitialCondition::Hydrostatic => panic!("{UNRESOLVED}"),
        }
    }

    /// Macroscopic initial profile `rho0`.
    pub fn profile(&self) -> DensityProfile {
        match *self {
            InitialCondition::AllOccupied => DensityProfile::Constant { value: 1.0 },
            InitialCondition::AllEmpty => DensityProfile::Constant { value: 0.0 },
            InitialCondition::Deterministic { profile } | InitialCondition::Bernoulli { profile } => profile,
            InitialCondition::FixedCount { density } => DensityProfile::Constant { value: density },
            InitialCondition::Hydrostatic => panic!("{UNRESOLVED}"),
        }
    }

    /// Expected initial mean density `E[m^N(eta_0)]` at this `N`.
    pub fn mean_density(&self, n: usize) -> f64 {
        let sites = (n - 1) as f64;
        match *self {
            InitialCondition::AllOccupied => 1.0,
            InitialCondition::AllEmpty => 0.0,
            InitialCondition::Deterministic { profile } => {
                (1..n).filter(|&x| profile.eval(x as f64 / n as f64) >= 0.5).count() as f64 / sites
            }
            InitialCondition::Bernoulli { profile } => {
                (1..n).map(|x| profile.eval(x as f64 / n as f64)).sum::<f64>() / sites
            }
            InitialCondition::FixedCount { density } => (density * sites).round() / sites,
            InitialCondition::Hydrostatic => panic!("{UNRESOLVED}"),
        }
    }
}

/// Product Bernoulli measure with site marginals `rho0(x/N)`.
pub fn bernoulli<R: Rng + ?Sized>(n: usize, rho0: impl Fn(f64) -> f64, rng: &mut R) -> Configuration {
    Configuration::from_fn(n, |x| rng.random::<f64>() < rho0(x as f64 / n as f64))
}

/// Exactly `k` particles at uniformly random distinct sites.
pub fn fixed_count<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Configuration {
    assert!(k < n, "at most N-1 particles");
    let mut occ = vec![0u8; n - 1];
    for i in index::sample(rng, n - 1, k) {
        occ[i] = 1;
    }
    Configuration::from_occupancy(&occ).expect("valid occupancy")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SeedSpec;

    #[test]
    fn deterministic_generators() {
        assert_eq!(InitialCondition::AllOccupied.mean_density(10), 1.0);
        assert_eq!(InitialCondition::AllEmpty.mean_density(10), 0.0);
        let step = InitialCondition::Deterministic {
            profile: DensityProfile::Step { at: 0.5, below: 1.0, above: 0.0 },
        };
        let mut rng = SeedSpec::new(0, 0).rng();
        let c = step.sample(8, &mut rng);
        assert_eq!(c.occupancy(), &[1, 1, 1, 1, 0, 0, 0]);
        assert!((step.mean_density(8) - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_count_is_exact() {
        let mut rng = SeedSpec::new(4, 0).rng();
        for k in [0, 1, 17, 63] {
            let c = fixed_count(64, k, &mut rng);
            assert_eq!(c.particle_count(), k);
            assert!(c.is_consistent());
        }
        let ic = InitialCondition::FixedCount { density: 0.5 };
        assert_eq!(ic.sample(65, &mut rng).particle_count(), 32);
    }

    #[test]
    fn bernoulli_mean_is_close() {
        let mut rng = SeedSpec::new(8, 0).rng();
        let c = bernoulli(100_001, |u| u, &mut rng);
        let m = c.particle_count() as f64 / 100_000.0;
        assert!((m - 0.5).abs() < 0.01);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let bad = InitialCondition::Bernoulli { profile: DensityProfile::Constant { value: 1.5 } };
        assert!(bad.validate().is_err());
        assert!(InitialCondition::FixedCount { density: -0.1 }.validate().is_err());
    }

    #[test]
    fn hydrostatic_resolves_to_rho_bar() {
        for theta in [0.0, 1.0, 2.0] {
            let p = Params::new(16, 1.0, theta, 0.2, 0.8, 0.0).unwrap();
            let ic = InitialCondition::Hydrostatic.resolve(&p);
            for u in [0.0, 0.3, 1.0] {
                assert!((ic.profile().eval(u) - rho_bar(theta, 1.0, 0.2, 0.8, u)).abs() < 1e-15);
            }
        }
        let p = Params::new(16, 1.0, 0.0, 0.2, 0.8, 0.0).unwrap();
        assert_eq!(InitialCondition::AllEmpty.resolve(&p), InitialCondition::AllEmpty);
    }
}
