use std::collections::BTreeMap;

use super::{ordered_mean, replica_seed, run_replicas, Estimate, ExperimentId, ExperimentSpec, GridPoint, PointReport, Record, Stats};
use crate::engine::{SeedSpec, Simulation};
use crate::init::InitialCondition;
use crate::error::Result;
use crate::model::{total_rate, Configuration, Params};
use crate::observables::{
    BoundaryFlipCounter, GridSampler, IntegralAccumulator, Integrand, JumpQv, Probe, ProfileAverager, StateOccupation,
    TestFunction, TimeTarget,
};
use crate::pde::{solve_heat, BoundaryCondition, GridFunction};
use crate::theory::{self, Regime, RegimeProfile};

/// Rough event count: half the bonds active plus both boundary channels.
fn rate_estimate(p: &Params) -> f64 {
    (p.n() as f64 - 2.0).max(0.0) / 2.0 + 2.0 * p.boundary_strength()
}

/// Estimated events for one replica at `point`.
pub(super) fn events_per_replica(spec: &ExperimentSpec, point: &GridPoint) -> Result<f64> {
    let p = point.params()?;
    let rate = rate_estimate(&p);
    Ok(match spec.id {
        ExperimentId::OR => spec.burn_in(&p) * rate + spec.events as f64,
        ExperimentId::HS => spec.burn_in(&p) * (1.0 + spec.window_factor) * rate,
        _ => spec.t * p.speedup() * rate,
    })
}

pub(super) fn run_point(
    spec: &ExperimentSpec,
    point: &GridPoint,
    replicas: usize,
    index: usize,
    master: u64,
) -> Result<PointReport> {
    let params = point.params()?;
    let init = spec.init.resolve(&params);
    let ctx = Ctx { spec, point: *point, params, init, replicas, index, master };
    let mut out = Output::default();
    match spec.id {
        ExperimentId::OR => run_or(&ctx, &mut out)?,
        ExperimentId::HS => run_hs(&ctx, &mut out)?,
        ExperimentId::HD => run_hd(&ctx, &mut out)?,
        ExperimentId::LT => run_lt(&ctx, &mut out)?,
        ExperimentId::RL => run_rl(&ctx, &mut out)?,
        ExperimentId::QV => run_qv(&ctx, &mut out)?,
    }
    Ok(PointReport {
        point: *point,
        regime: Regime::classify(point.theta, point.gamma).name().into(),
        estimates: out.estimates,
        events: out.events,
        estimated_events: 0.0,
        skipped: None,
        curves: out.curves,
        records: out.records,
    })
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    point: GridPoint,
    params: Params,
    init: InitialCondition,
    replicas: usize,
    index: usize,
    master: u64,
}

impl Ctx<'_> {
    fn seed(&self, replica: usize) -> SeedSpec {
        replica_seed(self.master, self.index, replica)
    }

    fn simulation(&self, replica: usize) -> Result<Simulation> {
        let seed = self.seed(replica);
        let init = self.init.sample(self.params.n(), &mut seed.derived(1).rng());
        Simulation::new(self.params, init, seed)
    }

    fn speedup(&self) -> f64 {
        self.params.speedup()
    }

    /// Limit profile with `m0` taken from the initial condition.
    fn regime_profile(&self) -> Result<RegimeProfile> {
        let p = &self.params;
        let m0 = self.init.mean_density(p.n());
        RegimeProfile::new(p.theta(), p.gamma(), p.c(), p.alpha(), p.beta(), Some(m0))
    }
}

#[derive(Default)]
struct Output {
    estimates: Vec<Estimate>,
    records: Vec<Record>,
    curves: BTreeMap<String, Vec<(f64, f64)>>,
    events: u64,
}

impl Output {
    fn record(&mut self, ctx: &Ctx, observable: &str, per_replica: &[f64]) {
        for (replica, &value) in per_replica.iter().enumerate() {
            self.records.push(Record {
                experiment: ctx.spec.id.to_string(),
                n: ctx.point.n,
                theta: ctx.point.theta,
                gamma: ctx.point.gamma,
                replica,
                observable: observable.to_string(),
                value,
            });
        }
    }

    /// Estimate whose value is the replica mean.
    fn mean(&mut self, ctx: &Ctx, observable: &str, per_replica: &[f64]) {
        self.record(ctx, observable, per_replica);
        let replicas = Stats::from_samples(per_replica);
        self.estimates.push(Estimate { observable: observable.into(), value: replicas.mean, replicas });
    }

    /// Estimate with a separately computed value (pooled or exact).
    fn value(&mut self, observable: &str, value: f64, per_replica: &[f64]) {
        self.estimates.push(Estimate { observable: observable.into(), value, replicas: Stats::from_samples(per_replica) });
    }
}

fn pooled(rows: &[Vec<f64>]) -> Vec<f64> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|j| ordered_mean(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn site_curve(n: usize, values: &[f64]) -> Vec<(f64, f64)> {
    values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64 / n as f64, v)).collect()
}

fn run_or(ctx: &Ctx, out: &mut Output) -> Result<()> {
    let p = &ctx.params;
    let n = p.n();
    let law = theory::brute_force_stationary(p)?;
    let mean_rate: f64 = law
        .probabilities
        .iter()
        .enumerate()
        .map(|(s, pi)| pi * total_rate(p, &Configuration::from_state_index(n, s)))
        .sum();
    let burn = ctx.spec.burn_in(p);
    let window = ctx.spec.events as f64 / mean_rate;
    let reps = run_replicas(ctx.replicas, |r| {
        let mut sim = ctx.simulation(r)?;
        sim.advance_to(burn / ctx.speedup(), &mut ())?;
        let before = sim.events();
        let mut occ = StateOccupation::new(n)?;
        sim.advance_to((burn + window) / ctx.speedup(), &mut occ)?;
        Ok((occ.frequencies(), (sim.events() - before) as f64, sim.events()))
    })?;
    out.events = reps.iter().map(|r| r.2).sum();
    let freqs: Vec<Vec<f64>> = reps.iter().map(|r| r.0.clone()).collect();
    let tv_rep: Vec<f64> = freqs.iter().map(|f| theory::total_variation(f, &law.probabilities)).collect();
    let pooled_freq = pooled(&freqs);
    out.record(ctx, "tv", &tv_rep);
    out.value("tv", theory::total_variation(&pooled_freq, &law.probabilities), &tv_rep);
    out.mean(ctx, "events_after_burn_in", &reps.iter().map(|r| r.1).collect::<Vec<_>>());
    if p.alpha() == p.beta() {
        let product = theory::product_bernoulli(n, p.alpha());
        out.value("tv_product", theory::total_variation(&law.probabilities, &product), &[]);
    }
    let idx = |v: &[f64]| v.iter().enumerate().map(|(s, &x)| (s as f64, x)).collect::<Vec<_>>();
    out.curves.insert("stationary".into(), idx(&law.probabilities));
    out.curves.insert("empirical".into(), idx(&pooled_freq));
    Ok(())
}

fn run_hs(ctx: &Ctx, out: &mut Output) -> Result<()> {
    let p = &ctx.params;
    let n = p.n();
    let burn = ctx.spec.burn_in(p);
    let window = ctx.spec.window_factor * burn;
    let reps = run_replicas(ctx.replicas, |r| {
        let mut sim = ctx.simulation(r)?;
        sim.advance_to(burn / ctx.speedup(), &mut ())?;
        let mut avg = ProfileAverager::new(n);
        sim.advance_to((burn + window) / ctx.speedup(), &mut avg)?;
        Ok((avg.profile(), sim.events()))
    })?;
    out.events = reps.iter().map(|r| r.1).sum();
    let bar: Vec<f64> =
        (1..n).map(|x| theory::rho_bar(p.theta(), p.c(), p.alpha(), p.beta(), x as f64 / n as f64)).collect();
    let exact = theory::exact_stationary_profile(p)?;
    let profiles: Vec<Vec<f64>> = reps.into_iter().map(|r| r.0).collect();
    let l1_rep: Vec<f64> = profiles.iter().map(|prof| l1(prof, &bar)).collect();
    let pool = pooled(&profiles);
    out.mean(ctx, "l1_replica_mean", &l1_rep);
    out.value("l1_pooled", l1(&pool, &bar), &l1_rep);
    out.value("l1_exact_vs_rho_bar", l1(&exact, &bar), &[]);
    let l1_exact: Vec<f64> = profiles.iter().map(|prof| l1(prof, &exact)).collect();
    out.mean(ctx, "l1_vs_exact", &l1_exact);
    out.curves.insert("profile".into(), site_curve(n, &pool));
    out.curves.insert("rho_bar".into(), site_curve(n, &bar));
    out.curves.insert("exact".into(), site_curve(n, &exact));
    Ok(())
}

fn run_hd(ctx: &Ctx, out: &mut Output) -> Result<()> {
    let p = &ctx.params;
    let spec = ctx.spec;
    let t = spec.t;
    if p.gamma() != 0.0 {
        log::warn!("HD compares against the diffusive-scale PDE; gamma = {} rescales time", p.gamma());
    }
    let bc = BoundaryCondition::for_theta(p.theta(), p.c(), p.alpha(), p.beta());
    let rho0 = ctx.init.profile();
    let g0 = GridFunction::from_fn(spec.pde_resolution, |u| rho0.eval(u));
    let sol = solve_heat(bc, &g0, t, spec.pde_dt)?;
    let gs = spec.test_functions_or_default();
    let probes: Vec<Probe> = gs.iter().map(|&g| Probe::Pair { g }).collect();
    let reps = run_replicas(ctx.replicas, |r| {
        let mut sim = ctx.simulation(r)?;
        let mut sampler = GridSampler::new(probes.clone(), vec![t]);
        sim.advance_to(t, &mut sampler)?;
        Ok((sampler.samples[0].clone(), sim.events()))
    })?;
    out.events = reps.iter().map(|r| r.1).sum();
    for (k, g) in gs.iter().enumerate() {
        let target = sol.pair(|u| g.eval(u));
        let pairs: Vec<f64> = reps.iter().map(|r| r.0[k]).collect();
        let diffs: Vec<f64> = pairs.iter().map(|v| v - target).collect();
        out.mean(ctx, &format!("pair[{g}]"), &pairs);
        out.record(ctx, &format!("pair_diff[{g}]"), &diffs);
        out.value(&format!("pair_error[{g}]"), (ordered_mean(&pairs) - target).abs(), &diffs);
        out.value(&format!("pde_pair[{g}]"), target, &[]);
    }
    out.curves.insert("pde".into(), sol.points().collect());
    Ok(())
}

fn mean_target(profile: &RegimeProfile) -> TimeTarget {
    TimeTarget { base: profile.intercept + profile.slope / 2.0, amplitude: profile.amplitude, rate: profile.rate }
}

fn run_lt(ctx: &Ctx, out: &mut Output) -> Result<()> {
    let p = &ctx.params;
    let spec = ctx.spec;
    let n = p.n();
    let (t, from_t) = (spec.t, spec.from_t);
    let profile = ctx.regime_profile()?;
    let m_target = mean_target(&profile);
    let gs = spec.test_functions.clone();
    let mut probes = vec![Probe::MeanDensity];
    probes.extend(gs.iter().map(|&g| Probe::Pair { g }));
    let want_profile = spec.metric() == "profile_l1";

    let reps = run_replicas(ctx.replicas, |r| {
        let mut sim = ctx.simulation(r)?;
        let mut sampler = GridSampler::uniform(probes.clone(), 0.0, t, spec.samples);
        let mut accs = vec![IntegralAccumulator::new(Integrand::MeanMinusTarget, p, Some(m_target), None)?];
        for g in &gs {
            let target = TimeTarget::pairing(&profile, g);
            accs.push(IntegralAccumulator::new(Integrand::PairMinusTarget, p, Some(target), Some(g))?);
        }
        sim.advance_to(from_t, &mut (&mut sampler, &mut accs))?;
        let mut avg = ProfileAverager::new(n);
        if want_profile {
            sim.advance_to(t, &mut (&mut sampler, &mut accs, &mut avg))?;
        } else {
            sim.advance_to(t, &mut (&mut sampler, &mut accs))?;
        }
        let integrals: Vec<f64> = accs.iter().map(IntegralAccumulator::value).collect();
        Ok((sampler, integrals, want_profile.then(|| avg.profile()), sim.events()))
    })?;
    out.events = reps.iter().map(|r| r.3).sum();

    let times = reps[0].0.times().to_vec();
    let in_window: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= from_t - 1e-12).collect();
    let sup_error = |series: &[f64], target: &dyn Fn(f64) -> f64| {
        in_window.iter().map(|&k| (series[k] - target(times[k])).abs()).fold(0.0, f64::max)
    };

    for (probe, name) in std::iter::once((0, None)).chain(gs.iter().enumerate().map(|(k, g)| (k + 1, Some(g)))) {
        let series: Vec<Vec<f64>> = reps.iter().map(|r| r.0.series(probe)).collect();
        let mean_series = pooled(&series);
        let target: Box<dyn Fn(f64) -> f64> = match name {
            None => Box::new(|s| m_target.value(s)),
            Some(g) => {
                let tt = TimeTarget::pairing(&profile, g);
                Box::new(move |s| tt.value(s))
            }
        };
        let per_rep: Vec<f64> = series.iter().map(|s| sup_error(s, &*target)).collect();
        let abs_int: Vec<f64> = reps.iter().map(|r| r.1[probe].abs()).collect();
        let signed: Vec<f64> = reps.iter().map(|r| r.1[probe]).collect();
        let (sup_name, int_name, raw_name) = match name {
            None => ("sup_mean_error".to_string(), "abs_integral_mean".to_string(), "integral_mean".to_string()),
            Some(g) => (format!("sup_pair_error[{g}]"), format!("abs_integral_pair[{g}]"), format!("integral_pair[{g}]")),
        };
        out.record(ctx, &sup_name, &per_rep);
        out.value(&sup_name, sup_error(&mean_series, &*target), &per_rep);
        out.mean(ctx, &int_name, &abs_int);
        out.record(ctx, &raw_name, &signed);
        let trace_name = match name {
            None => "mean_trace".to_string(),
            Some(g) => format!("pair_trace[{g}]"),
        };
        out.curves.insert(trace_name.clone(), times.iter().copied().zip(mean_series).collect());
        out.curves.insert(format!("{trace_name}_target"), times.iter().map(|&s| (s, target(s))).collect());
    }

    if want_profile {
        let decay = if profile.amplitude == 0.0 {
            0.0
        } else {
            TimeTarget { base: 0.0, amplitude: profile.amplitude, rate: profile.rate }.integral(from_t, t) / (t - from_t)
        };
        let target: Vec<f64> =
            (1..n).map(|x| profile.intercept + profile.slope * x as f64 / n as f64 + decay).collect();
        let profiles: Vec<Vec<f64>> = reps.iter().map(|r| r.2.clone().unwrap_or_default()).collect();
        let per_rep: Vec<f64> = profiles.iter().map(|prof| l1(prof, &target)).collect();
        let pool = pooled(&profiles);
        out.record(ctx, "profile_l1", &per_rep);
        out.value("profile_l1", l1(&pool, &target), &per_rep);
        out.curves.insert("profile".into(), site_curve(n, &pool));
        out.curves.insert("profile_target".into(), site_curve(n, &target));
    }
    Ok(())
}

fn run_rl(ctx: &Ctx, out: &mut Output) -> Result<()> {
    let p = &ctx.params;
    let spec = ctx.spec;
    let integrands = spec.integrands();
    let profile = ctx.regime_profile()?;
    let g0 = spec.test_functions_or_default()[0];
    let reps = run_replicas(ctx.replicas, |r| {
        let mut sim = ctx.simulation(r)?;
        let mut accs = integrands
            .iter()
            .map(|&i| {
                let target = match i {
                    Integrand::MeanMinusTarget => Some(mean_target(&profile)),
                    Integrand::PairMinusTarget => Some(TimeTarget::pairing(&profile, &g0)),
                    _ => None,
                };
                IntegralAccumulator::new(i, p, target, Some(&g0))
            })
            .collect::<Result<Vec<_>>>()?;
        sim.advance_to(spec.t, &mut accs)?;
        Ok((accs.iter().map(IntegralAccumulator::value).collect::<Vec<_>>(), sim.events()))
    })?;
    out.events = reps.iter().map(|r| r.1).sum();
    for (k, i) in integrands.iter().enumerate() {
        let signed: Vec<f64> = reps.iter().map(|r| r.0[k]).collect();
        let abs: Vec<f64> = signed.iter().map(|v| v.abs()).collect();
        out.mean(ctx, &format!("abs_integral[{i}]"), &abs);
        out.record(ctx, &format!("integral[{i}]"), &signed);
    }
    Ok(())
}

fn run_qv(ctx: &Ctx, out: &mut Output) -> Result<()> {
    let n = ctx.params.n();
    let h = TestFunction::Identity;
    let reps = run_replicas(ctx.replicas, |r| {
        let mut sim = ctx.simulation(r)?;
        let mut counter = BoundaryFlipCounter::default();
        let mut hq = JumpQv::new(n, &h);
        sim.advance_to(ctx.spec.t, &mut (&mut counter, &mut hq))?;
        Ok((counter.qv_mean_density(n), hq.value(), counter.flips() as f64, sim.events()))
    })?;
    out.events = reps.iter().map(|r| r.3).sum();
    out.mean(ctx, "qv", &reps.iter().map(|r| r.0).collect::<Vec<_>>());
    out.mean(ctx, &format!("qv_H[{h}]"), &reps.iter().map(|r| r.1).collect::<Vec<_>>());
    out.mean(ctx, "boundary_flips", &reps.iter().map(|r| r.2).collect::<Vec<_>>());
    Ok(())
}
