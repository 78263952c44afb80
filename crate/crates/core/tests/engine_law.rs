//! Long-run state occupation of the engine against the exact stationary law.

use proptest::prelude::*;
use ssep_core::engine::{SeedSpec, Simulation};
use ssep_core::model::{Configuration, Params};
use ssep_core::observables::{pair_empirical, ProfileAverager, StateOccupation, TestFunction};
use ssep_core::theory::{brute_force_stationary, exact_stationary_profile, total_variation};

fn occupation_tv(p: Params, micro: f64, seed: u64) -> f64 {
    let law = brute_force_stationary(&p).unwrap();
    let mut sim = Simulation::new(p, Configuration::empty(p.n()), SeedSpec::new(seed, 0)).unwrap();
    sim.advance_to(2e3 / p.speedup(), &mut ()).unwrap();
    let mut occ = StateOccupation::new(p.n()).unwrap();
    sim.advance_by(micro / p.speedup(), &mut occ).unwrap();
    total_variation(&occ.frequencies(), &law.probabilities)
}

#[test]
fn tiny_systems_match_brute_force() {
    for (n, theta, c, gamma) in [(2, 0.0, 1.0, 0.0), (3, 1.0, 1.0, 0.0), (4, 0.5, 2.0, 1.0), (4, 2.0, 0.5, 0.5)] {
        let p = Params::new(n, c, theta, 0.3, 0.7, gamma).unwrap();
        // the mass mode relaxes on the boundary time scale N^theta / c
        let micro = 4e5 * (1.0 / p.boundary_strength()).max(1.0);
        let tv = occupation_tv(p, micro, 5);
        assert!(tv < 0.01, "N={n} theta={theta} c={c}: tv {tv}");
    }
}

#[test]
fn time_averaged_profile_matches_tridiagonal_solve() {
    let p = Params::new(8, 1.0, 1.0, 0.1, 0.9, 0.0).unwrap();
    let exact = exact_stationary_profile(&p).unwrap();
    let mut sim = Simulation::new(p, Configuration::full(8), SeedSpec::new(9, 0)).unwrap();
    sim.advance_to(1e3 / p.speedup(), &mut ()).unwrap();
    let mut avg = ProfileAverager::new(8);
    sim.advance_by(3e5 / p.speedup(), &mut avg).unwrap();
    for (x, (a, b)) in avg.profile().iter().zip(&exact).enumerate() {
        assert!((a - b).abs() < 0.01, "site {}: {a} vs {b}", x + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bulk_conserves_particles_without_boundary(seed in any::<u64>(), n in 3usize..40) {
        // with the boundary switched off (huge theta) only bulk moves happen
        let p = Params::new(n, 1.0, 60.0, 0.5, 0.5, 0.0).unwrap();
        let init = Configuration::from_fn(n, |x| x % 3 == 0);
        let k = init.particle_count();
        let mut sim = Simulation::new(p, init, SeedSpec::new(seed, 1)).unwrap();
        sim.advance_to(50.0 / p.speedup(), &mut ()).unwrap();
        prop_assert_eq!(sim.config().particle_count(), k);
        prop_assert!(sim.config().is_consistent());
        let mass = pair_empirical(sim.config(), &TestFunction::Constant(1.0));
        prop_assert!((mass - k as f64 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_path(seed in any::<u64>(), replica in 0u64..8) {
        let p = Params::new(16, 1.0, 0.5, 0.2, 0.8, 0.5).unwrap();
        let run = || {
            let mut sim = Simulation::new(p, Configuration::empty(16), SeedSpec::new(seed, replica)).unwrap();
            sim.advance_to(0.01, &mut ()).unwrap();
            (sim.events(), sim.config().clone())
        };
        prop_assert_eq!(run(), run());
    }
}
