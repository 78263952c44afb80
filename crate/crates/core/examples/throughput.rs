//! Events per second of the bare engine on a half-filled system.
//!
//! Usage: throughput [N] [micro-horizon]

use std::time::Instant;

use ssep_core::engine::{SeedSpec, Simulation};
use ssep_core::model::{Configuration, Params};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(128);
    let micro: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2.0e6);
    let params = Params::new(n, 1.0, 2.0, 0.2, 0.8, 0.0).unwrap();
    let init = Configuration::from_fn(n, |x| x % 2 == 0);
    let mut sim = Simulation::new(params, init, SeedSpec::new(1, 0)).unwrap();
    let start = Instant::now();
    sim.advance_to(micro / params.speedup(), &mut ()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    println!("N={n}: {} events in {secs:.3}s = {:.3e} events/s", sim.events(), sim.events() as f64 / secs);
}
