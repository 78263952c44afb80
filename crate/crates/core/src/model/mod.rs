//! Process state, parameters, transition rates and event application.
//!
//! Sites are numbered `1..=N-1`; bond `x` joins sites `x` and `x+1`, so
//! bonds run over `1..=N-2`. Exchanges across a bond whose two sites agree
//! are the identity map and are left out of the event set.

mod bonds;

pub use bonds::ActiveBonds;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model tuple `(N, c, theta, alpha, beta, gamma)` with rate constants cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    n: usize,
    c: f64,
    theta: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    // c N^-theta
    boundary_strength: f64,
    // N^(2+gamma)
    speedup: f64,
    left_rates: [f64; 2],
    right_rates: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "N")]
    n: usize,
    c: f64,
    theta: f64,
    alpha: f64,
    beta: f64,
    #[serde(default)]
    gamma: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        Params::new(r.n, r.c, r.theta, r.alpha, r.beta, r.gamma)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams { n: p.n, c: p.c, theta: p.theta, alpha: p.alpha, beta: p.beta, gamma: p.gamma }
    }
}

impl Params {
    pub fn new(n: usize, c: f64, theta: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("theta", theta), ("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
            }
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("N = {n}, need N >= 2")));
        }
        if n >= u32::MAX as usize {
            return Err(Error::InvalidParams(format!("N = {n} too large")));
        }
        if c <= 0.0 {
            return Err(Error::InvalidParams(format!("c = {c}, need c > 0")));
        }
        if theta < 0.0 {
            return Err(Error::InvalidParams(format!("theta = {theta}, need theta >= 0")));
        }
        if gamma < 0.0 {
            return Err(Error::InvalidParams(format!("gamma = {gamma}, need gamma >= 0")));
        }
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParams(format!("{name} = {v}, need 0 < {name} < 1")));
            }
        }
        let nf = n as f64;
        let boundary_strength = c * nf.powf(-theta);
        let speedup = nf.powf(2.0 + gamma);
        if !(boundary_strength > 0.0) || !speedup.is_finite() {
            return Err(Error::InvalidParams(format!(
                "derived rates out of range: c N^-theta = {boundary_strength:e}, N^(2+gamma) = {speedup:e}"
            )));
        }
        Ok(Self {
            n,
            c,
            theta,
            alpha,
            beta,
            gamma,
            boundary_strength,
            speedup,
            left_rates: [boundary_strength * alpha, boundary_strength * (1.0 - alpha)],
            right_rates: [boundary_strength * beta, boundary_strength * (1.0 - beta)],
        })
    }

    /// Same model with a different time-scaling exponent.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n, self.c, self.theta, self.alpha, self.beta, gamma)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.c, self.theta, self.alpha, self.beta, self.gamma)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Reservoir coupling `c N^-theta`.
    pub fn boundary_strength(&self) -> f64 {
        self.boundary_strength
    }

    /// Time change `N^(2+gamma)` from macroscopic to microscopic units.
    pub fn speedup(&self) -> f64 {
        self.speedup
    }

    /// Number of sites, `N - 1`.
    pub fn sites(&self) -> usize {
        self.n - 1
    }

    /// Left flip rate given the occupation of site 1.
    #[inline]
    pub fn left_rate(&self, occupied: bool) -> f64 {
        self.left_rates[occupied as usize]
    }

    /// Right flip rate given the occupation of site N-1.
    #[inline]
    pub fn right_rate(&self, occupied: bool) -> f64 {
        self.right_rates[occupied as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// Exchange across bond `x`, i.e. sites `x` and `x+1`.
    BulkExchange(usize),
    LeftFlip,
    RightFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub micro_time: f64,
}

/// Occupancy vector with cached particle count and active-bond set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    n: usize,
    // indexed by site; slots 0 and N are padding and stay 0
    occ: Vec<u8>,
    particles: usize,
    active: ActiveBonds,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        assert!(n >= 2, "N must be at least 2");
        Self { n, occ: vec![0; n + 1], particles: 0, active: ActiveBonds::with_capacity(n) }
    }

    pub fn full(n: usize) -> Self {
        Self::from_fn(n, |_| true)
    }

    /// Site `x` occupied iff `f(x)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut cfg = Self::empty(n);
        for x in 1..n {
            cfg.occ[x] = f(x) as u8;
        }
        cfg.rebuild();
        cfg
    }

    /// From the occupancy of sites `1..=N-1` (length `N-1`, entries 0 or 1).
    pub fn from_occupancy(occupancy: &[u8]) -> Result<Self> {
        if occupancy.is_empty() {
            return Err(Error::InvalidParams("occupancy must cover at least one site".into()));
        }
        if let Some(bad) = occupancy.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParams(format!("occupancy value {bad} is not 0 or 1")));
        }
        Ok(Self::from_fn(occupancy.len() + 1, |x| occupancy[x - 1] == 1))
    }

    /// Bit `x-1` of `index` is the occupation of site `x`.
    pub fn from_state_index(n: usize, index: usize) -> Self {
        Self::from_fn(n, |x| (index >> (x - 1)) & 1 == 1)
    }

    pub fn state_index(&self) -> usize {
        (1..self.n).filter(|&x| self.occ[x] == 1).fold(0, |acc, x| acc | (1 << (x - 1)))
    }

    fn rebuild(&mut self) {
        self.particles = self.occ.iter().map(|&v| v as usize).sum();
        self.active = ActiveBonds::with_capacity(self.n);
        for x in 1..self.n.saturating_sub(1) {
            if self.occ[x] != self.occ[x + 1] {
                self.active.insert(x);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn occupied(&self, x: usize) -> bool {
        debug_assert!((1..self.n).contains(&x));
        self.occ[x] == 1
    }

    /// Occupancy of sites `1..=N-1`.
    pub fn occupancy(&self) -> &[u8] {
        &self.occ[1..self.n]
    }

    #[inline]
    pub fn particle_count(&self) -> usize {
        self.particles
    }

    #[inline]
    pub fn active_bonds(&self) -> &ActiveBonds {
        &self.active
    }

    /// Recount from scratch: `(particles, sorted active bonds)`.
    pub fn recount(&self) -> (usize, Vec<usize>) {
        let particles = self.occupancy().iter().map(|&v| v as usize).sum();
        let bonds = (1..self.n.saturating_sub(1)).filter(|&x| self.occ[x] != self.occ[x + 1]).collect();
        (particles, bonds)
    }

    /// Incremental state agrees with a from-scratch recount.
    pub fn is_consistent(&self) -> bool {
        let (particles, bonds) = self.recount();
        particles == self.particles && bonds == self.active.sorted()
    }

    /// Apply an event, rejecting exchanges across inactive bonds.
    pub fn apply_event(&mut self, event: &Event) -> Result<()> {
        match event.kind {
            EventKind::BulkExchange(x) => {
                let max = self.n.saturating_sub(2);
                if x == 0 || x > max {
                    return Err(Error::BondOutOfRange { bond: x, max });
                }
                if !self.active.contains(x) {
                    return Err(Error::InactiveBond { bond: x });
                }
                self.exchange(x);
            }
            EventKind::LeftFlip => self.flip(1),
            EventKind::RightFlip => self.flip(self.n - 1),
        }
        Ok(())
    }

    /// Exchange across an active bond. Both sites flip, the bond stays
    /// active and each neighbouring bond becomes active iff it was not.
    #[inline]
    pub(crate) fn exchange(&mut self, x: usize) {
        assert!(x >= 1 && x + 2 <= self.n);
        let occ = self.occ.as_mut_slice();
        // SAFETY: 1 <= x <= N-2 and occ has N+1 slots, so x-1..=x+2 are in bounds.
        unsafe {
            *occ.get_unchecked_mut(x) ^= 1;
            *occ.get_unchecked_mut(x + 1) ^= 1;
            if x > 1 {
                let on = *occ.get_unchecked(x - 1) != *occ.get_unchecked(x);
                self.active.set_unchecked(x - 1, on);
            }
            if x + 2 < self.n {
                let on = *occ.get_unchecked(x + 1) != *occ.get_unchecked(x + 2);
                self.active.set_unchecked(x + 1, on);
            }
        }
    }

    #[inline]
    pub(crate) fn flip(&mut self, x: usize) {
        assert!(x >= 1 && x < self.n);
        let occ = self.occ.as_mut_slice();
        // SAFETY: 1 <= x <= N-1 and occ has N+1 slots.
        unsafe {
            let now = *occ.get_unchecked(x) ^ 1;
            *occ.get_unchecked_mut(x) = now;
            self.particles = self.particles + now as usize - (now ^ 1) as usize;
            if x > 1 {
                let on = *occ.get_unchecked(x - 1) != now;
                self.active.set_unchecked(x - 1, on);
            }
            if x + 2 <= self.n {
                let on = now != *occ.get_unchecked(x + 1);
                self.active.set_unchecked(x, on);
            }
        }
    }
}

/// `(left, right)` boundary flip rates in microscopic units.
#[inline]
pub fn boundary_flip_rates(params: &Params, config: &Configuration) -> (f64, f64) {
    (params.left_rate(config.occupied(1)), params.right_rate(config.occupied(params.n - 1)))
}

/// Total microscopic jump rate: active bonds plus both boundary channels.
#[inline]
pub fn total_rate(params: &Params, config: &Configuration) -> f64 {
    let (l, r) = boundary_flip_rates(params, config);
    config.active_bonds().len() as f64 + l + r
}
