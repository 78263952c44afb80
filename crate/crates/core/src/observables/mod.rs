//! Exact path functionals: empirical measure pairings, mean density,
//! time integrals over holding intervals, and jump quadratic variations.

mod test_function;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::Observer;
use crate::error::{Error, Result};
use crate::model::{Configuration, Event, EventKind, Params};
use crate::sum::NeumaierSum;
use crate::theory::RegimeProfile;

pub use test_function::{simpson, TestFunction};

/// `<pi^N, G> = (1/N) sum_{x=1}^{N-1} eta(x) G(x/N)`.
pub fn pair_empirical(config: &Configuration, g: &TestFunction) -> f64 {
    let n = config.n();
    let nf = n as f64;
    let s: f64 = (1..n).filter(|&x| config.occupied(x)).map(|x| g.eval(x as f64 / nf)).sum();
    s / nf
}

/// `m^N(eta) = (1/(N-1)) sum_x eta(x)`.
#[inline]
pub fn mean_density(config: &Configuration) -> f64 {
    config.particle_count() as f64 / (config.n() - 1) as f64
}

/// Realized quadratic variation of `m^N` from a boundary flip count.
pub fn qv_mean_density(boundary_flips: u64, n: usize) -> f64 {
    let s = (n - 1) as f64;
    boundary_flips as f64 / (s * s)
}

/// Sum of squared jumps of `m^N` along a replayed event log.
pub fn qv_from_log(init: &Configuration, events: &[Event]) -> Result<f64> {
    let mut cfg = init.clone();
    let mut qv = NeumaierSum::new();
    for e in events {
        let before = mean_density(&cfg);
        cfg.apply_event(e)?;
        let jump = mean_density(&cfg) - before;
        qv.push(jump * jump);
    }
    Ok(qv.value())
}

/// Deterministic target `base + amplitude e^{-rate t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTarget {
    pub base: f64,
    pub amplitude: f64,
    pub rate: f64,
}

impl TimeTarget {
    pub fn constant(v: f64) -> Self {
        Self { base: v, amplitude: 0.0, rate: 0.0 }
    }

    /// `m_t` from the relaxation formula.
    pub fn mean_relaxation(c: f64, m0: f64, alpha: f64, beta: f64) -> Self {
        let mid = (alpha + beta) / 2.0;
        Self { base: mid, amplitude: m0 - mid, rate: 2.0 * c }
    }

    /// `t -> int_0^1 rho(t,u) G(u) du` for a limit profile.
    pub fn pairing(profile: &RegimeProfile, g: &TestFunction) -> Self {
        let (int_g, int_ug) = g.moments();
        Self {
            base: profile.intercept * int_g + profile.slope * int_ug,
            amplitude: profile.amplitude * int_g,
            rate: profile.rate,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            self.base
        } else {
            self.base + self.amplitude * (-self.rate * t).exp()
        }
    }

    /// `int_{t0}^{t1}` in closed form.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        let decay = if self.amplitude == 0.0 {
            0.0
        } else if self.rate == 0.0 {
            self.amplitude * (t1 - t0)
        } else {
            // e^{-r t0} (1 - e^{-r (t1 - t0)}) / r, written to avoid cancellation
            self.amplitude * (-self.rate * t0).exp() * -(-self.rate * (t1 - t0)).exp_m1() / self.rate
        };
        self.base * (t1 - t0) + decay
    }
}

/// Integrands of the replacement-type time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Integrand {
    /// `eta(1) - alpha`
    LeftMinusAlpha,
    /// `eta(N-1) - beta`
    RightMinusBeta,
    /// `eta(1) - m^N`
    LeftMinusMean,
    /// `eta(N-1) - m^N`
    RightMinusMean,
    /// `m^N - target(t)`
    MeanMinusTarget,
    /// `<pi^N, G> - target(t)`
    PairMinusTarget,
}

impl Integrand {
    pub const ALL: [Integrand; 6] = [
        Integrand::LeftMinusAlpha,
        Integrand::RightMinusBeta,
        Integrand::LeftMinusMean,
        Integrand::RightMinusMean,
        Integrand::MeanMinusTarget,
        Integrand::PairMinusTarget,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Integrand::LeftMinusAlpha => "eta1-alpha",
            Integrand::RightMinusBeta => "etaN-beta",
            Integrand::LeftMinusMean => "eta1-m",
            Integrand::RightMinusMean => "etaN-m",
            Integrand::MeanMinusTarget => "m-target",
            Integrand::PairMinusTarget => "pi_G-target",
        }
    }

    pub fn needs_target(&self) -> bool {
        matches!(self, Integrand::MeanMinusTarget | Integrand::PairMinusTarget)
    }
}

impl fmt::Display for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Integrand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Integrand::ALL.into_iter().find(|i| i.id() == s).ok_or_else(|| Error::UnknownIntegrand(s.to_string()))
    }
}

impl TryFrom<String> for Integrand {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Integrand> for String {
    fn from(i: Integrand) -> String {
        i.id().to_string()
    }
}

/// Events between full recomputations of an incrementally tracked pairing.
const PAIR_REFRESH: u32 = 1 << 16;

/// Tracks `<pi^N, G>` incrementally from the event stream.
#[derive(Debug, Clone)]
pub struct PairTracker {
    weights: Vec<f64>,
    value: f64,
    since_refresh: u32,
}

impl PairTracker {
    pub fn new(n: usize, g: &TestFunction) -> Self {
        let nf = n as f64;
        let mut weights = vec![0.0; n + 1];
        for (x, w) in weights.iter_mut().enumerate().take(n).skip(1) {
            *w = g.eval(x as f64 / nf) / nf;
        }
        Self { weights, value: 0.0, since_refresh: 0 }
    }

    pub fn reset(&mut self, config: &Configuration) {
        assert_eq!(config.n() + 1, self.weights.len(), "tracker built for a different N");
        self.value = (1..config.n()).filter(|&x| config.occupied(x)).map(|x| self.weights[x]).sum();
        self.since_refresh = 0;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn update(&mut self, event: &Event, config: &Configuration) {
        let w = &self.weights;
        self.value += match event.kind {
            EventKind::BulkExchange(x) => {
                let d = w[x] - w[x + 1];
                if config.occupied(x) {
                    d
                } else {
                    -d
                }
            }
            EventKind::LeftFlip => signed(w[1], config.occupied(1)),
            EventKind::RightFlip => {
                let s = config.n() - 1;
                signed(w[s], config.occupied(s))
            }
        };
        self.since_refresh += 1;
        if self.since_refresh >= PAIR_REFRESH {
            self.reset(config);
        }
    }
}

#[inline]
fn signed(v: f64, positive: bool) -> f64 {
    if positive {
        v
    } else {
        -v
    }
}

/// Exact `int (integrand) dt` over the observed macro-time segments.
///
/// The piecewise-constant part is summed interval by interval; the target
/// part is integrated in closed form over each observed segment.
#[derive(Debug, Clone)]
pub struct IntegralAccumulator {
    integrand: Integrand,
    target: Option<TimeTarget>,
    pair: Option<PairTracker>,
    alpha: f64,
    beta: f64,
    observed: NeumaierSum,
    target_part: NeumaierSum,
    segment_start: f64,
}

impl IntegralAccumulator {
    /// `g` is required for `pi_G-target`; `target` for both target integrands.
    pub fn new(
        integrand: Integrand,
        params: &Params,
        target: Option<TimeTarget>,
        g: Option<&TestFunction>,
    ) -> Result<Self> {
        if integrand.needs_target() && target.is_none() {
            return Err(Error::InvalidSpec(format!("integrand {integrand} needs a target")));
        }
        let pair = match (integrand, g) {
            (Integrand::PairMinusTarget, Some(g)) => Some(PairTracker::new(params.n(), g)),
            (Integrand::PairMinusTarget, None) => {
                return Err(Error::InvalidSpec("integrand pi_G-target needs a test function".into()))
            }
            _ => None,
        };
        Ok(Self {
            integrand,
            target,
            pair,
            alpha: params.alpha(),
            beta: params.beta(),
            observed: NeumaierSum::new(),
            target_part: NeumaierSum::new(),
            segment_start: 0.0,
        })
    }

    pub fn integrand(&self) -> Integrand {
        self.integrand
    }

    pub fn value(&self) -> f64 {
        self.observed.value() - self.target_part.value()
    }

    #[inline]
    fn current(&self, config: &Configuration) -> f64 {
        let last = config.n() - 1;
        let eta = |x: usize| config.occupied(x) as u8 as f64;
        match self.integrand {
            Integrand::LeftMinusAlpha => eta(1) - self.alpha,
            Integrand::RightMinusBeta => eta(last) - self.beta,
            Integrand::LeftMinusMean => eta(1) - mean_density(config),
            Integrand::RightMinusMean => eta(last) - mean_density(config),
            Integrand::MeanMinusTarget => mean_density(config),
            Integrand::PairMinusTarget => self.pair.as_ref().map_or(0.0, PairTracker::value),
        }
    }
}

impl Observer for IntegralAccumulator {
    fn start(&mut self, _params: &Params, config: &Configuration, t: f64) {
        self.segment_start = t;
        if let Some(p) = &mut self.pair {
            p.reset(config);
        }
    }

    #[inline]
    fn hold(&mut self, config: &Configuration, _t: f64, dt: f64) {
        let v = self.current(config);
        self.observed.push(v * dt);
    }

    #[inline]
    fn event(&mut self, event: &Event, config: &Configuration, _t: f64) {
        if let Some(p) = &mut self.pair {
            p.update(event, config);
        }
    }

    fn finish(&mut self, _config: &Configuration, t: f64) {
        if let Some(target) = &self.target {
            self.target_part.push(target.integral(self.segment_start, t));
        }
        self.segment_start = t;
    }
}

/// Time-averaged occupation of every site over the observed segments.
#[derive(Debug, Clone)]
pub struct ProfileAverager {
    occupied_time: Vec<NeumaierSum>,
    since: Vec<f64>,
    duration: NeumaierSum,
    segment_start: f64,
}

impl ProfileAverager {
    pub fn new(n: usize) -> Self {
        Self {
            occupied_time: vec![NeumaierSum::new(); n + 1],
            since: vec![0.0; n + 1],
            duration: NeumaierSum::new(),
            segment_start: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration.value()
    }

    /// Time averages of `eta(x)`, `x = 1..N-1`.
    pub fn profile(&self) -> Vec<f64> {
        let d = self.duration();
        let n = self.occupied_time.len() - 1;
        (1..n).map(|x| if d > 0.0 { self.occupied_time[x].value() / d } else { f64::NAN }).collect()
    }

    /// Merge the totals of another averager of the same size.
    pub fn merge(&mut self, other: &ProfileAverager) {
        for (a, b) in self.occupied_time.iter_mut().zip(&other.occupied_time) {
            *a = *a + *b;
        }
        self.duration = self.duration + other.duration;
    }

    #[inline]
    fn toggled(&mut self, x: usize, now_occupied: bool, t: f64) {
        if now_occupied {
            self.since[x] = t;
        } else {
            self.occupied_time[x].push(t - self.since[x]);
        }
    }
}

impl Observer for ProfileAverager {
    fn start(&mut self, _params: &Params, config: &Configuration, t: f64) {
        assert_eq!(config.n() + 1, self.since.len(), "averager built for a different N");
        self.segment_start = t;
        self.since.iter_mut().for_each(|s| *s = t);
    }

    #[inline]
    fn event(&mut self, event: &Event, config: &Configuration, t: f64) {
        match event.kind {
            EventKind::BulkExchange(x) => {
                let left = config.occupied(x);
                self.toggled(x, left, t);
                self.toggled(x + 1, !left, t);
            }
            EventKind::LeftFlip => self.toggled(1, config.occupied(1), t),
            EventKind::RightFlip => {
                let s = config.n() - 1;
                self.toggled(s, config.occupied(s), t)
            }
        }
    }

    fn finish(&mut self, config: &Configuration, t: f64) {
        for x in 1..config.n() {
            if config.occupied(x) {
                self.occupied_time[x].push(t - self.since[x]);
            }
        }
        self.duration.push(t - self.segment_start);
        self.segment_start = t;
    }
}

/// Counts boundary flips, which are exactly the jumps of `m^N`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryFlipCounter {
    pub left: u64,
    pub right: u64,
    pub bulk: u64,
}

impl BoundaryFlipCounter {
    pub fn flips(&self) -> u64 {
        self.left + self.right
    }

    pub fn qv_mean_density(&self, n: usize) -> f64 {
        qv_mean_density(self.flips(), n)
    }
}

impl Observer for BoundaryFlipCounter {
    #[inline]
    fn event(&mut self, event: &Event, _config: &Configuration, _t: f64) {
        match event.kind {
            EventKind::BulkExchange(_) => self.bulk += 1,
            EventKind::LeftFlip => self.left += 1,
            EventKind::RightFlip => self.right += 1,
        }
    }
}

/// Realized quadratic variation of `<pi^N, H>` as a sum of squared jumps.
#[derive(Debug, Clone)]
pub struct JumpQv {
    weights: Vec<f64>,
    qv: NeumaierSum,
}

impl JumpQv {
    pub fn new(n: usize, h: &TestFunction) -> Self {
        let nf = n as f64;
        Self { weights: (0..=n).map(|x| h.eval(x as f64 / nf) / nf).collect(), qv: NeumaierSum::new() }
    }

    pub fn value(&self) -> f64 {
        self.qv.value()
    }
}

impl Observer for JumpQv {
    #[inline]
    fn event(&mut self, event: &Event, config: &Configuration, _t: f64) {
        let w = &self.weights;
        let jump = match event.kind {
            EventKind::BulkExchange(x) => w[x + 1] - w[x],
            EventKind::LeftFlip => w[1],
            EventKind::RightFlip => w[config.n() - 1],
        };
        self.qv.push(jump * jump);
    }
}

/// Records every event, up to an optional cap.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub cap: Option<usize>,
    pub dropped: u64,
}

impl EventLog {
    pub fn with_cap(cap: usize) -> Self {
        Self { cap: Some(cap), ..Self::default() }
    }
}

impl Observer for EventLog {
    fn event(&mut self, event: &Event, _config: &Configuration, _t: f64) {
        if self.cap.is_some_and(|c| self.events.len() >= c) {
            self.dropped += 1;
        } else {
            self.events.push(*event);
        }
    }
}

/// Quantity read off the configuration at sample times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case", deny_unknown_fields)]
pub enum Probe {
    MeanDensity,
    Pair { g: TestFunction },
    Site { x: usize },
}

impl Probe {
    pub fn read(&self, config: &Configuration) -> f64 {
        match self {
            Probe::MeanDensity => mean_density(config),
            Probe::Pair { g } => pair_empirical(config, g),
            Probe::Site { x } => config.occupied(*x) as u8 as f64,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Probe::MeanDensity => "m".into(),
            Probe::Pair { g } => format!("pi[{g}]"),
            Probe::Site { x } => format!("eta[{x}]"),
        }
    }
}

/// Samples probes at fixed macro times: the value at `t` is the state
/// holding on `[t, t + dt)`, so samples are right-continuous.
#[derive(Debug, Clone)]
pub struct GridSampler {
    probes: Vec<Probe>,
    times: Vec<f64>,
    next: usize,
    /// `samples[k][p]` is probe `p` at `times[k]`.
    pub samples: Vec<Vec<f64>>,
}

impl GridSampler {
    /// `times` must be nondecreasing.
    pub fn new(probes: Vec<Probe>, times: Vec<f64>) -> Self {
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "sample times must be sorted");
        Self { probes, times, next: 0, samples: Vec::new() }
    }

    /// `k + 1` equally spaced times on `[t0, t1]`.
    pub fn uniform(probes: Vec<Probe>, t0: f64, t1: f64, k: usize) -> Self {
        let times = (0..=k).map(|i| t0 + (t1 - t0) * i as f64 / k.max(1) as f64).collect();
        Self::new(probes, times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times[..self.samples.len()]
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    /// Series of one probe.
    pub fn series(&self, probe: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[probe]).collect()
    }

    fn take(&mut self, config: &Configuration) {
        self.samples.push(self.probes.iter().map(|p| p.read(config)).collect());
        self.next += 1;
    }
}

impl Observer for GridSampler {
    #[inline]
    fn hold(&mut self, config: &Configuration, t: f64, dt: f64) {
        let end = t + dt;
        while self.next < self.times.len() && self.times[self.next] < end {
            self.take(config);
        }
    }

    fn finish(&mut self, config: &Configuration, t: f64) {
        while self.next < self.times.len() && self.times[self.next] <= t {
            self.take(config);
        }
    }
}

/// Time spent in each of the `2^{N-1}` states (tiny `N` only).
#[derive(Debug, Clone)]
pub struct StateOccupation {
    time: Vec<NeumaierSum>,
}

impl StateOccupation {
    pub fn new(n: usize) -> Result<Self> {
        if n > crate::theory::MAX_BRUTE_FORCE_N {
            return Err(Error::StateSpaceTooLarge { n, max: crate::theory::MAX_BRUTE_FORCE_N });
        }
        Ok(Self { time: vec![NeumaierSum::new(); 1 << (n - 1)] })
    }

    /// Fraction of observed time in each state.
    pub fn frequencies(&self) -> Vec<f64> {
        let total: f64 = self.time.iter().map(NeumaierSum::value).sum();
        self.time.iter().map(|t| t.value() / total).collect()
    }
}

impl Observer for StateOccupation {
    #[inline]
    fn hold(&mut self, config: &Configuration, _t: f64, dt: f64) {
        self.time[config.state_index()].push(dt);
    }
}

/// Trapezoid rule over samples `(t_k, f_k)`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, SeedSpec, Simulation};
    use proptest::prelude::*;

    fn cfg(occ: &[u8]) -> Configuration {
        Configuration::from_occupancy(occ).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let g = TestFunction::Identity;
        assert_eq!(pair_empirical(&Configuration::empty(9), &g), 0.0);
        let one = TestFunction::Constant(1.0);
        assert!((pair_empirical(&Configuration::full(9), &one) - 8.0 / 9.0).abs() < 1e-15);
        assert!((pair_empirical(&cfg(&[1, 0, 1]), &g) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mean_density_examples() {
        assert_eq!(mean_density(&Configuration::full(5)), 1.0);
        assert_eq!(mean_density(&Configuration::empty(5)), 0.0);
        assert!((mean_density(&cfg(&[1, 0, 1])) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn qv_examples() {
        assert!((qv_mean_density(5, 11) - 0.05).abs() < 1e-15);
        assert_eq!(qv_mean_density(0, 11), 0.0);
    }

    #[test]
    fn integrand_ids() {
        for i in Integrand::ALL {
            assert_eq!(i.id().parse::<Integrand>().unwrap(), i);
        }
        assert!(matches!("eta2-alpha".parse::<Integrand>(), Err(Error::UnknownIntegrand(_))));
    }

    #[test]
    fn target_integral_closed_form() {
        let m = TimeTarget::mean_relaxation(1.0, 1.0, 0.2, 0.8);
        let expect = 0.5 + 0.25 * (1.0 - (-2.0f64).exp());
        assert!((m.integral(0.0, 1.0) - expect).abs() < 1e-15);
        // additivity
        assert!((m.integral(0.0, 0.3) + m.integral(0.3, 1.0) - expect).abs() < 1e-15);
        assert!((TimeTarget::constant(0.7).integral(0.5, 2.5) - 1.4).abs() < 1e-15);
    }

    fn drive<O: Observer>(obs: &mut O, params: &Params, path: &[(Configuration, f64)]) {
        // feeds a prescribed piecewise-constant path; consecutive states differ by a left flip
        obs.start(params, &path[0].0, 0.0);
        let mut t = 0.0;
        for (i, (c, dt)) in path.iter().enumerate() {
            if i > 0 {
                obs.event(&Event { kind: EventKind::LeftFlip, micro_time: t }, c, t);
            }
            obs.hold(c, t, *dt);
            t += dt;
        }
        obs.finish(&path.last().unwrap().0, t);
    }

    #[test]
    fn piecewise_integral_example() {
        let p = Params::new(4, 1.0, 0.0, 0.2, 0.8, 0.0).unwrap();
        let mut acc = IntegralAccumulator::new(Integrand::LeftMinusAlpha, &p, None, None).unwrap();
        drive(&mut acc, &p, &[(cfg(&[1, 0, 0]), 0.5), (cfg(&[0, 0, 0]), 0.5)]);
        assert!((acc.value() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn constant_integrand() {
        let p = Params::new(4, 1.0, 0.0, 0.2, 0.8, 0.0).unwrap();
        let mut acc = IntegralAccumulator::new(Integrand::RightMinusMean, &p, None, None).unwrap();
        let c = cfg(&[0, 1, 1]);
        drive(&mut acc, &p, &[(c.clone(), 0.25), (c.clone(), 0.5), (c, 0.75)]);
        assert!((acc.value() - (1.0 - 2.0 / 3.0) * 1.5).abs() < 1e-15);
    }

    #[test]
    fn missing_target_or_g_is_rejected() {
        let p = Params::new(4, 1.0, 0.0, 0.2, 0.8, 0.0).unwrap();
        assert!(IntegralAccumulator::new(Integrand::MeanMinusTarget, &p, None, None).is_err());
        let t = Some(TimeTarget::constant(0.0));
        assert!(IntegralAccumulator::new(Integrand::PairMinusTarget, &p, t, None).is_err());
    }

    #[test]
    fn integral_matches_fine_grid_trapezoid() {
        let p = Params::new(16, 1.0, 0.5, 0.2, 0.8, 0.0).unwrap();
        let g = TestFunction::Sin(1);
        let target = TimeTarget { base: 0.3, amplitude: 0.2, rate: 3.0 };
        let mut acc = IntegralAccumulator::new(Integrand::PairMinusTarget, &p, Some(target), Some(&g)).unwrap();
        let mut log = EventLog::default();
        let init = Configuration::from_fn(16, |x| x < 8);
        let t_end = 1.0;
        simulate(&p, init.clone(), t_end, &mut (&mut acc, &mut log), SeedSpec::new(3, 0)).unwrap();
        assert!(log.events.len() > 100);

        // replay the log onto grids of increasing resolution
        let speed = p.speedup();
        let grid_integral = |k: usize| {
            let mut c = init.clone();
            let mut i = 0;
            let times: Vec<f64> = (0..=k).map(|j| t_end * j as f64 / k as f64).collect();
            let vals: Vec<f64> = times
                .iter()
                .map(|&t| {
                    while i < log.events.len() && log.events[i].micro_time / speed <= t {
                        c.apply_event(&log.events[i]).unwrap();
                        i += 1;
                    }
                    pair_empirical(&c, &g) - target.value(t)
                })
                .collect();
            trapezoid(&times, &vals)
        };
        let errs: Vec<f64> = [100, 1_000, 10_000, 100_000].iter().map(|&k| (grid_integral(k) - acc.value()).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 1e-3 * t_end);
    }

    #[test]
    fn profile_averager_matches_direct_integrals() {
        let p = Params::new(10, 1.0, 0.0, 0.2, 0.8, 0.0).unwrap();
        let init = Configuration::from_fn(10, |x| x % 2 == 0);
        let mut avg = ProfileAverager::new(10);
        let mut sites: Vec<IntegralAccumulator> = Vec::new();
        // eta(1) and eta(N-1) via accumulators, as an independent cross-check
        sites.push(IntegralAccumulator::new(Integrand::LeftMinusAlpha, &p, None, None).unwrap());
        sites.push(IntegralAccumulator::new(Integrand::RightMinusBeta, &p, None, None).unwrap());
        let mut sim = Simulation::new(p, init, SeedSpec::new(5, 0)).unwrap();
        sim.advance_to(0.01, &mut ()).unwrap();
        sim.advance_to(0.05, &mut (&mut avg, &mut sites)).unwrap();
        let prof = avg.profile();
        assert!((avg.duration() - 0.04).abs() < 1e-15);
        assert!((prof[0] - (sites[0].value() / 0.04 + 0.2)).abs() < 1e-12);
        assert!((prof[8] - (sites[1].value() / 0.04 + 0.8)).abs() < 1e-12);
        assert!(prof.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn qv_counter_matches_log_replay() {
        let p = Params::new(12, 1.0, 1.0, 0.3, 0.6, 0.5).unwrap();
        let init = Configuration::from_fn(12, |x| x > 6);
        let mut counter = BoundaryFlipCounter::default();
        let mut log = EventLog::default();
        let mut hq = JumpQv::new(12, &TestFunction::Constant(1.0));
        simulate(&p, init.clone(), 1.0, &mut (&mut counter, &mut log, &mut hq), SeedSpec::new(9, 1)).unwrap();
        assert!(counter.flips() > 10);
        let replay = qv_from_log(&init, &log.events).unwrap();
        assert!((counter.qv_mean_density(12) - replay).abs() < 1e-12 * replay);
        // H = 1 gives jumps of 1/N instead of 1/(N-1)
        let expect = counter.flips() as f64 / 144.0;
        assert!((hq.value() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn grid_sampler_is_right_continuous() {
        let p = Params::new(4, 1.0, 0.0, 0.2, 0.8, 0.0).unwrap();
        let mut s = GridSampler::new(vec![Probe::MeanDensity, Probe::Site { x: 1 }], vec![0.0, 0.5, 0.75, 1.0]);
        drive(&mut s, &p, &[(cfg(&[1, 0, 0]), 0.5), (cfg(&[0, 0, 0]), 0.5)]);
        assert_eq!(s.series(1), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.times(), &[0.0, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn state_occupation_two_state_balance() {
        let p = Params::new(2, 1.0, 0.0, 0.3, 0.7, 0.0).unwrap();
        let mut occ = StateOccupation::new(2).unwrap();
        let out = simulate(&p, Configuration::empty(2), 5e4, &mut occ, SeedSpec::new(1, 0)).unwrap();
        let f = occ.frequencies();
        // two-state chain with switching rate 1 each way; variance of the time fraction ~ 1/(4T)
        let sd = (1.0 / (4.0 * out.clock.micro_time())).sqrt();
        assert!((f[1] - 0.5).abs() < 4.0 * sd, "{f:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pairing_bounds(occ in prop::collection::vec(0u8..2, 1..80), k in 1u32..5) {
            let c = cfg(&occ);
            let g = TestFunction::Cos(k);
            prop_assert!(pair_empirical(&c, &g).abs() <= g.max_abs() + 1e-15);
            let one = pair_empirical(&c, &TestFunction::Constant(1.0));
            let n = c.n() as f64;
            prop_assert!((one - (n - 1.0) / n * mean_density(&c)).abs() < 1e-14);
        }

        #[test]
        fn tracked_pairing_matches_direct(seed in 0u64..1000, n in 2usize..40) {
            let p = Params::new(n, 1.0, 0.0, 0.4, 0.6, 0.0).unwrap();
            let g = TestFunction::Square;
            let mut tracker = PairTracker::new(n, &g);
            let mut sim = Simulation::new(p, Configuration::from_fn(n, |x| x % 3 == 1), SeedSpec::new(seed, 0)).unwrap();
            tracker.reset(sim.config());
            for _ in 0..500 {
                let e = sim.step();
                tracker.update(&e, sim.config());
            }
            prop_assert!((tracker.value() - pair_empirical(sim.config(), &g)).abs() < 1e-12);
        }
    }
}
