//! Exact event-driven simulation of the chain with generator `N^(2+gamma) L_N`.
//!
//! Each step draws an exponential holding time at the total microscopic rate,
//! then picks a category (bulk, left reservoir, right reservoir) in proportion
//! to its rate and, for the bulk, a uniform active bond. Observers see every
//! holding interval before the jump that ends it, so time integrals of
//! piecewise-constant functionals are exact.

use rand::{Rng, SeedableRng};
use rand_distr::Exp1;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{total_rate, Configuration, Event, EventKind, Params};
use crate::sum::NeumaierSum;

pub type SimRng = Xoshiro256PlusPlus;

/// Micro horizons beyond 2^53 leave less than one unit of time resolution.
const MAX_MICRO_HORIZON: f64 = 9_007_199_254_740_992.0;

/// Master seed plus replica index. Replica `r` uses the master stream
/// advanced by `r` jumps of 2^128 draws, so replica streams never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        Self { master_seed, replica_index }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = SimRng::seed_from_u64(self.master_seed);
        for _ in 0..self.replica_index {
            rng.jump();
        }
        rng
    }

    /// Seed for a sub-task of this replica (e.g. drawing the initial state),
    /// kept apart from the dynamics stream.
    pub fn derived(&self, salt: u64) -> SeedSpec {
        // splitmix64 finaliser over (master, salt)
        let mut z = self.master_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeedSpec { master_seed: z ^ (z >> 31), replica_index: self.replica_index }
    }
}

/// Microscopic clock with compensated accumulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    micro: NeumaierSum,
    speedup: f64,
}

impl SimClock {
    pub fn new(speedup: f64) -> Self {
        assert!(speedup > 0.0 && speedup.is_finite());
        Self { micro: NeumaierSum::new(), speedup }
    }

    #[inline]
    pub fn micro_time(&self) -> f64 {
        self.micro.value()
    }

    #[inline]
    pub fn macro_time(&self) -> f64 {
        self.micro.value() / self.speedup
    }

    pub fn speedup(&self) -> f64 {
        self.speedup
    }

    #[inline]
    pub fn advance(&mut self, dt_micro: f64) {
        debug_assert!(dt_micro >= 0.0);
        self.micro.push(dt_micro);
    }

    fn set_micro(&mut self, t: f64) {
        self.micro = NeumaierSum::from(t);
    }
}

/// Receives the piecewise-constant trajectory. Times are macroscopic.
pub trait Observer {
    /// Called when a segment of the run begins.
    fn start(&mut self, _params: &Params, _config: &Configuration, _t: f64) {}

    /// `config` holds on `[t, t + dt)`.
    #[inline]
    fn hold(&mut self, _config: &Configuration, _t: f64, _dt: f64) {}

    /// `event` has just been applied at time `t`; `config` is the new state.
    #[inline]
    fn event(&mut self, _event: &Event, _config: &Configuration, _t: f64) {}

    /// Segment ended at `t` with state `config`.
    fn finish(&mut self, _config: &Configuration, _t: f64) {}
}

impl Observer for () {}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn start(&mut self, p: &Params, c: &Configuration, t: f64) {
        (**self).start(p, c, t)
    }
    #[inline]
    fn hold(&mut self, c: &Configuration, t: f64, dt: f64) {
        (**self).hold(c, t, dt)
    }
    #[inline]
    fn event(&mut self, e: &Event, c: &Configuration, t: f64) {
        (**self).event(e, c, t)
    }
    fn finish(&mut self, c: &Configuration, t: f64) {
        (**self).finish(c, t)
    }
}

impl<O: Observer + ?Sized> Observer for Box<O> {
    fn start(&mut self, p: &Params, c: &Configuration, t: f64) {
        (**self).start(p, c, t)
    }
    #[inline]
    fn hold(&mut self, c: &Configuration, t: f64, dt: f64) {
        (**self).hold(c, t, dt)
    }
    #[inline]
    fn event(&mut self, e: &Event, c: &Configuration, t: f64) {
        (**self).event(e, c, t)
    }
    fn finish(&mut self, c: &Configuration, t: f64) {
        (**self).finish(c, t)
    }
}

impl<O: Observer> Observer for Vec<O> {
    fn start(&mut self, p: &Params, c: &Configuration, t: f64) {
        self.iter_mut().for_each(|o| o.start(p, c, t))
    }
    #[inline]
    fn hold(&mut self, c: &Configuration, t: f64, dt: f64) {
        self.iter_mut().for_each(|o| o.hold(c, t, dt))
    }
    #[inline]
    fn event(&mut self, e: &Event, c: &Configuration, t: f64) {
        self.iter_mut().for_each(|o| o.event(e, c, t))
    }
    fn finish(&mut self, c: &Configuration, t: f64) {
        self.iter_mut().for_each(|o| o.finish(c, t))
    }
}

macro_rules! tuple_observer {
    ($($name:ident . $idx:tt),+) => {
        impl<$($name: Observer),+> Observer for ($($name,)+) {
            fn start(&mut self, p: &Params, c: &Configuration, t: f64) {
                $(self.$idx.start(p, c, t);)+
            }
            #[inline]
            fn hold(&mut self, c: &Configuration, t: f64, dt: f64) {
                $(self.$idx.hold(c, t, dt);)+
            }
            #[inline]
            fn event(&mut self, e: &Event, c: &Configuration, t: f64) {
                $(self.$idx.event(e, c, t);)+
            }
            fn finish(&mut self, c: &Configuration, t: f64) {
                $(self.$idx.finish(c, t);)+
            }
        }
    };
}

tuple_observer!(A.0);
tuple_observer!(A.0, B.1);
tuple_observer!(A.0, B.1, C.2);
tuple_observer!(A.0, B.1, C.2, D.3);
tuple_observer!(A.0, B.1, C.2, D.3, E.4);

#[inline]
fn pick_event<R: Rng + ?Sized>(params: &Params, config: &Configuration, total: f64, rng: &mut R) -> EventKind {
    let active = config.active_bonds();
    let bulk = active.len() as f64;
    let u = rng.random::<f64>() * total;
    if u < bulk {
        // floor of a uniform on [0, bulk) is a uniform slot
        // SAFETY: 0 <= u < bulk = len, finite
        let slot: usize = unsafe { u.to_int_unchecked() };
        EventKind::BulkExchange(active.at(slot))
    } else if u < bulk + params.left_rate(config.occupied(1)) {
        EventKind::LeftFlip
    } else {
        EventKind::RightFlip
    }
}

#[inline]
fn apply_kind(config: &mut Configuration, kind: EventKind) {
    match kind {
        EventKind::BulkExchange(x) => config.exchange(x),
        EventKind::LeftFlip => config.flip(1),
        EventKind::RightFlip => {
            let last = config.n() - 1;
            config.flip(last)
        }
    }
}

/// One exact jump: exponential wait, categorical choice, clock advance, apply.
pub fn step<R: Rng + ?Sized>(
    params: &Params,
    config: &mut Configuration,
    clock: &mut SimClock,
    rng: &mut R,
) -> Event {
    let total = total_rate(params, config);
    let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
    clock.advance(wait);
    let kind = pick_event(params, config, total, rng);
    apply_kind(config, kind);
    Event { kind, micro_time: clock.micro_time() }
}

/// A running replica: parameters, state, clock and private random stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: Params,
    config: Configuration,
    clock: SimClock,
    rng: SimRng,
    events: u64,
}

impl Simulation {
    pub fn new(params: Params, init: Configuration, seed: SeedSpec) -> Result<Self> {
        Self::with_rng(params, init, seed.rng())
    }

    pub fn with_rng(params: Params, init: Configuration, rng: SimRng) -> Result<Self> {
        if init.n() != params.n() {
            return Err(Error::InvalidParams(format!(
                "initial configuration has N = {}, parameters have N = {}",
                init.n(),
                params.n()
            )));
        }
        Ok(Self { clock: SimClock::new(params.speedup()), params, config: init, rng, events: 0 })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    /// Number of jumps performed so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn step(&mut self) -> Event {
        self.events += 1;
        step(&self.params, &mut self.config, &mut self.clock, &mut self.rng)
    }

    /// Run until absolute macroscopic time `t_macro_end`.
    pub fn advance_to<O: Observer + ?Sized>(&mut self, t_macro_end: f64, observer: &mut O) -> Result<()> {
        let speedup = self.params.speedup();
        let horizon = t_macro_end * speedup;
        if !t_macro_end.is_finite() || !horizon.is_finite() || horizon > MAX_MICRO_HORIZON {
            return Err(Error::HorizonOverflow { t_macro: t_macro_end, speedup, micro: horizon });
        }
        let start = self.clock.macro_time();
        observer.start(&self.params, &self.config, start);
        if horizon <= self.clock.micro_time() {
            observer.finish(&self.config, start);
            return Ok(());
        }

        while self.step_within(horizon, observer) {}
        observer.finish(&self.config, t_macro_end);
        Ok(())
    }

    /// One jump if it lands before `horizon` (micro units); otherwise
    /// deliver the truncated final interval, pin the clock to the horizon
    /// and return `false`.
    #[inline(always)]
    fn step_within<O: Observer + ?Sized>(&mut self, horizon: f64, observer: &mut O) -> bool {
        let speedup = self.params.speedup();
        let total = total_rate(&self.params, &self.config);
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / total;
        let now = self.clock.micro_time();
        if now + wait >= horizon {
            observer.hold(&self.config, now / speedup, (horizon - now) / speedup);
            self.clock.set_micro(horizon);
            return false;
        }
        observer.hold(&self.config, now / speedup, wait / speedup);
        self.clock.advance(wait);
        let kind = pick_event(&self.params, &self.config, total, &mut self.rng);
        apply_kind(&mut self.config, kind);
        self.events += 1;
        let micro = self.clock.micro_time();
        observer.event(&Event { kind, micro_time: micro }, &self.config, micro / speedup);
        true
    }

    /// Run for an additional macroscopic duration.
    pub fn advance_by<O: Observer + ?Sized>(&mut self, dt_macro: f64, observer: &mut O) -> Result<()> {
        let end = self.clock.macro_time() + dt_macro;
        self.advance_to(end, observer)
    }
}

/// Result of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub config: Configuration,
    pub clock: SimClock,
    pub events: u64,
}

/// Run one replica from macro time 0 to `t_macro_end`.
pub fn simulate<O: Observer + ?Sized>(
    params: &Params,
    init: Configuration,
    t_macro_end: f64,
    observer: &mut O,
    seed: SeedSpec,
) -> Result<SimOutcome> {
    if t_macro_end < 0.0 {
        return Err(Error::InvalidParams(format!("negative horizon {t_macro_end}")));
    }
    let mut sim = Simulation::new(*params, init, seed)?;
    sim.advance_to(t_macro_end, observer)?;
    Ok(SimOutcome { events: sim.events, clock: sim.clock, config: sim.config })
}
