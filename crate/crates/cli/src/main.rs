use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ssep_core::engine::{SeedSpec, Simulation};
use ssep_core::harness::{self, verify, ExperimentReport, ExperimentSpec};
use ssep_core::init::{DensityProfile, InitialCondition};
use ssep_core::io::csv::{self as table, Table};
use ssep_core::io::svg::{Plot, Series};
use ssep_core::io::{RunConfig, SimulateConfig};
use ssep_core::model::{Configuration, Params};
use ssep_core::observables::{
    mean_density, BoundaryFlipCounter, GridSampler, IntegralAccumulator, Integrand, Probe, ProfileAverager,
    TestFunction, TimeTarget,
};
use ssep_core::pde::{self, BoundaryCondition, GridFunction};
use ssep_core::theory::{self, RegimeProfile};
use ssep_core::Error;

/// Worker thread count for replica parallelism.
const THREADS_ENV: &str = "SSEP_THREADS";

#[derive(Parser)]
#[command(name = "ssep", version, about = "Boundary-driven exclusion process: simulator and verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and print its observables.
    Simulate(SimulateArgs),
    /// Finite-N stationary one-point profile from the tridiagonal equations.
    StationaryExact(ModelArgs),
    /// Stationary law of the full generator (N <= 12).
    BruteForce(ModelArgs),
    /// Solve the heat equation with Dirichlet, Robin or Neumann boundaries.
    Pde(PdeArgs),
    /// Run an acceptance criterion (number or key, or `all`).
    Verify(VerifyArgs),
    /// Run an experiment spec (TOML) and write CSV/JSON output.
    Sweep(SweepArgs),
    /// Render a CSV produced by this tool to SVG.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Write a CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl ModelArgs {
    fn params(&self) -> ssep_core::Result<Params> {
        Params::new(self.n, self.c, self.theta, self.alpha, self.beta, self.gamma)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// RunConfig TOML with [params] and [simulate]; flags below are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N", default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Macroscopic horizon.
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replica: u64,
    /// all-occupied | all-empty | step | hydrostatic | bernoulli:<rho> | fixed:<rho>
    #[arg(long, default_value = "all-occupied")]
    init: String,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Integrand ids, e.g. eta1-alpha, m-target.
    #[arg(long = "integrand")]
    integrands: Vec<String>,
    /// Test functions for pairing traces, e.g. u, sin:1.
    #[arg(long = "test-function")]
    test_functions: Vec<String>,
    /// Directory for trace/profile CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BcKind {
    Dirichlet,
    Robin,
    Neumann,
}

#[derive(Args)]
struct PdeArgs {
    #[arg(long, value_enum)]
    bc: BcKind,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    /// const:<v> | linear:<a>:<b> | step:<at> | sin
    #[arg(long, default_value = "step:0.5")]
    init: String,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = pde::DEFAULT_DT)]
    dt: f64,
    #[arg(long = "M", default_value_t = pde::DEFAULT_RESOLUTION)]
    m: usize,
    /// Print the stationary solution instead of evolving.
    #[arg(long)]
    stationary: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Criterion number (1-10), key (OR, XO, HS, HD, LT, LT-SUB, RL, QV, PDE, PROP) or `all`.
    name: String,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec TOML, or a RunConfig with an [experiment] table.
    spec: PathBuf,
    /// Overrides the seed in a RunConfig.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// For long-format tables: which observable to plot against N.
    #[arg(long)]
    observable: Option<String>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    log_log: bool,
}

enum Failure {
    Acceptance,
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = harness::set_threads(n) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV}={v:?} is not a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::StationaryExact(a) => stationary_exact(a),
        Command::BruteForce(a) => brute_force(a),
        Command::Pde(a) => solve_pde(a),
        Command::Verify(a) => run_verify(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Acceptance) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_init(s: &str) -> Result<InitialCondition, Failure> {
    let bad = || Failure::Usage(format!("unknown initial condition {s:?}"));
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    let ic = match s.split_once(':') {
        None => match s {
            "all-occupied" => InitialCondition::AllOccupied,
            "all-empty" => InitialCondition::AllEmpty,
            "hydrostatic" => InitialCondition::Hydrostatic,
            "step" => InitialCondition::Deterministic {
                profile: DensityProfile::Step { at: 0.5, below: 1.0, above: 0.0 },
            },
            _ => return Err(bad()),
        },
        Some(("bernoulli", v)) => InitialCondition::Bernoulli { profile: DensityProfile::Constant { value: num(v)? } },
        Some(("fixed", v)) => InitialCondition::FixedCount { density: num(v)? },
        _ => return Err(bad()),
    };
    ic.validate()?;
    Ok(ic)
}

fn occupancy_string(c: &Configuration) -> String {
    c.occupancy().iter().map(|&v| if v == 1 { '1' } else { '0' }).collect()
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> ssep_core::Result<()>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let (params, sim_cfg, seed, out) = match &a.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            let params = cfg.params.ok_or_else(|| Failure::Usage("config has no [params] table".into()))?;
            (params, cfg.simulate.unwrap_or_default(), cfg.seed, cfg.output.dir.or(a.out.clone()))
        }
        None => {
            let params = Params::new(a.n, a.c, a.theta, a.alpha, a.beta, a.gamma)?;
            let integrands = a.integrands.iter().map(|s| s.parse()).collect::<ssep_core::Result<Vec<Integrand>>>()?;
            let test_functions =
                a.test_functions.iter().map(|s| s.parse()).collect::<ssep_core::Result<Vec<TestFunction>>>()?;
            let cfg = SimulateConfig {
                t: a.t,
                init: parse_init(&a.init)?,
                samples: a.samples,
                integrands,
                test_functions,
                replica: a.replica,
            };
            (params, cfg, a.seed, a.out.clone())
        }
    };
    if !(sim_cfg.t >= 0.0) {
        return Err(Failure::Usage(format!("t = {}, need t >= 0", sim_cfg.t)));
    }
    let n = params.n();
    let seed = SeedSpec::new(seed, sim_cfg.replica);
    let init = sim_cfg.init.resolve(&params).sample(n, &mut seed.derived(1).rng());
    let m0 = mean_density(&init);
    let profile = RegimeProfile::new(params.theta(), params.gamma(), params.c(), params.alpha(), params.beta(), Some(m0))?;
    let g0 = sim_cfg.test_functions.first().copied().unwrap_or(TestFunction::Constant(1.0));
    let mut accs = sim_cfg
        .integrands
        .iter()
        .map(|&i| {
            let target = match i {
                Integrand::MeanMinusTarget => Some(TimeTarget {
                    base: profile.intercept + profile.slope / 2.0,
                    amplitude: profile.amplitude,
                    rate: profile.rate,
                }),
                Integrand::PairMinusTarget => Some(TimeTarget::pairing(&profile, &g0)),
                _ => None,
            };
            IntegralAccumulator::new(i, &params, target, Some(&g0))
        })
        .collect::<ssep_core::Result<Vec<_>>>()?;
    let mut probes = vec![Probe::MeanDensity];
    probes.extend(sim_cfg.test_functions.iter().map(|&g| Probe::Pair { g }));
    let mut sampler = GridSampler::uniform(probes, 0.0, sim_cfg.t, sim_cfg.samples.max(1));
    let mut averager = ProfileAverager::new(n);
    let mut flips = BoundaryFlipCounter::default();

    println!("params: N={n} c={} theta={} alpha={} beta={} gamma={}", params.c(), params.theta(), params.alpha(), params.beta(), params.gamma());
    println!("regime: {}", profile.regime.name());
    println!("initial: {}", occupancy_string(&init));
    let mut sim = Simulation::new(params, init, seed)?;
    sim.advance_to(sim_cfg.t, &mut (&mut accs, &mut sampler, &mut averager, &mut flips))?;
    println!("final: {}", occupancy_string(sim.config()));
    println!("t: {}", sim.clock().macro_time());
    println!("events: {}", sim.events());
    println!("mean_density: {} -> {}", m0, mean_density(sim.config()));
    println!("boundary_flips: {}", flips.flips());
    println!("qv_mean_density: {}", flips.qv_mean_density(n));
    for acc in &accs {
        println!("integral[{}]: {}", acc.integrand(), acc.value());
    }
    if let Some(dir) = out {
        let trace: Vec<(f64, f64)> = sampler.times().iter().copied().zip(sampler.series(0)).collect();
        write_file(&dir.join("mean_trace.csv"), |b| table::write_trace(b, &trace))?;
        if sim_cfg.t > 0.0 {
            let prof: Vec<(f64, f64)> =
                averager.profile().into_iter().enumerate().map(|(i, v)| ((i + 1) as f64 / n as f64, v)).collect();
            write_file(&dir.join("profile.csv"), |b| table::write_profile(b, &prof))?;
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn stationary_exact(a: ModelArgs) -> Result<(), Failure> {
    if a.gamma != 0.0 {
        log::info!("gamma does not enter the stationary profile");
    }
    let prof = theory::exact_stationary_profile_raw(a.n, a.c, a.theta, a.alpha, a.beta)?;
    for v in &prof {
        println!("{v}");
    }
    if let Some(path) = &a.csv {
        let rows: Vec<(f64, f64)> = prof.iter().enumerate().map(|(i, &v)| ((i + 1) as f64 / a.n as f64, v)).collect();
        write_file(path, |b| table::write_profile(b, &rows))?;
    }
    Ok(())
}

fn brute_force(a: ModelArgs) -> Result<(), Failure> {
    let p = a.params()?;
    let law = theory::brute_force_stationary(&p)?;
    println!("state probability");
    for (s, pi) in law.probabilities.iter().enumerate() {
        println!("{} {pi}", occupancy_string(&Configuration::from_state_index(p.n(), s)));
    }
    println!("marginals");
    for (x, m) in law.marginals.iter().enumerate() {
        println!("{} {m}", x + 1);
    }
    if let Some(path) = &a.csv {
        let rows: Vec<(f64, f64)> =
            law.marginals.iter().enumerate().map(|(i, &v)| ((i + 1) as f64 / p.n() as f64, v)).collect();
        write_file(path, |b| table::write_profile(b, &rows))?;
    }
    Ok(())
}

fn parse_profile(s: &str) -> Result<Box<dyn Fn(f64) -> f64>, Failure> {
    let bad = || Failure::Usage(format!("unknown initial profile {s:?}"));
    let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["const", v] => {
            let v = num(v)?;
            Box::new(move |_| v)
        }
        ["linear", a, b] => {
            let (a, b) = (num(a)?, num(b)?);
            Box::new(move |u| a + (b - a) * u)
        }
        ["step", at] => {
            let at = num(at)?;
            Box::new(move |u| if u <= at { 1.0 } else { 0.0 })
        }
        ["sin"] => Box::new(|u| (std::f64::consts::PI * u).sin()),
        _ => return Err(bad()),
    })
}

fn solve_pde(a: PdeArgs) -> Result<(), Failure> {
    let bc = match a.bc {
        BcKind::Dirichlet => BoundaryCondition::Dirichlet { alpha: a.alpha, beta: a.beta },
        BcKind::Robin => BoundaryCondition::Robin { c: a.c, alpha: a.alpha, beta: a.beta },
        BcKind::Neumann => BoundaryCondition::Neumann,
    };
    let sol = if a.stationary {
        let st = pde::stationary_solution(bc, a.m, (a.alpha, a.beta))?;
        if !st.is_unique() {
            println!("stationary solution is not unique; representative (alpha + beta) / 2");
        }
        st.profile().clone()
    } else {
        let f = parse_profile(&a.init)?;
        let g0 = GridFunction::from_fn(a.m, f);
        pde::solve_heat(bc, &g0, a.t, a.dt)?
    };
    println!("t: {}", sol.t);
    println!("mass: {}", sol.mass());
    for u in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("rho({u}): {}", sol.interpolate(u));
    }
    if let Some(path) = &a.csv {
        let rows: Vec<(f64, f64)> = sol.points().collect();
        write_file(path, |b| table::write_profile(b, &rows))?;
    }
    Ok(())
}

fn write_report(dir: &Path, stem: &str, report: &ExperimentReport) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join(format!("{stem}.csv")), |b| table::write_long(b, report.records()))?;
    fs::write(dir.join(format!("{stem}.json")), ssep_core::io::report_json(report)?)?;
    for (i, p) in report.points.iter().enumerate() {
        for (name, curve) in &p.curves {
            let safe: String = name.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '_' { ch } else { '_' }).collect();
            let path = dir.join(format!("{stem}_p{i}_{safe}.csv"));
            if name.contains("trace") {
                write_file(&path, |b| table::write_trace(b, curve))?;
            } else {
                write_file(&path, |b| table::write_profile(b, curve))?;
            }
        }
    }
    Ok(())
}

fn run_verify(a: VerifyArgs) -> Result<(), Failure> {
    let names: Vec<String> = if a.name.eq_ignore_ascii_case("all") {
        verify::CRITERIA.iter().map(|c| c.1.to_string()).collect()
    } else {
        vec![a.name.clone()]
    };
    let mut all_pass = true;
    for name in names {
        let outcome = verify::run_criterion(&name, a.seed)?;
        for c in &outcome.checks {
            println!("  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        println!("{}", outcome.line());
        if let Some(dir) = &a.out {
            for (k, r) in outcome.reports.iter().enumerate() {
                write_report(dir, &format!("criterion{}_{k}", outcome.number), r)?;
            }
        }
        all_pass &= outcome.pass;
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn load_spec(path: &Path) -> Result<(ExperimentSpec, Option<u64>, Option<PathBuf>), Failure> {
    let text = fs::read_to_string(path)?;
    // a RunConfig carries the spec in [experiment]; a bare spec has `id` at top level
    let is_run_config = text.lines().any(|l| l.trim() == "[experiment]");
    if is_run_config {
        let cfg = RunConfig::from_toml(&text)?;
        let spec = cfg.experiment.ok_or_else(|| Failure::Usage("config has no [experiment] table".into()))?;
        Ok((spec, Some(cfg.seed), cfg.output.dir))
    } else {
        Ok((ExperimentSpec::from_toml(&text)?, None, None))
    }
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let (spec, cfg_seed, cfg_out) = load_spec(&a.spec)?;
    let seed = a.seed.or(cfg_seed).unwrap_or(0);
    let report = harness::run_experiment(&spec, seed)?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    if let Some(dir) = a.out.or(cfg_out) {
        let stem = a.spec.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep").to_string();
        write_report(&dir, &stem, &report)?;
        println!("wrote {}", dir.display());
    }
    println!("{} {}: {}", report.id, report.name, if report.pass { "PASS" } else { "FAIL" });
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn plot(a: PlotArgs) -> Result<(), Failure> {
    let table = table::read_table(fs::File::open(&a.csv)?)?;
    let stem = a.csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    let mut plot = Plot { title: a.title.clone().unwrap_or(stem), log_log: a.log_log, ..Plot::default() };
    match table {
        Table::Profile(rows) => {
            plot.x_label = "u".into();
            plot.y_label = "rho".into();
            plot.series.push(Series { name: "rho".into(), points: rows });
        }
        Table::Trace(rows) => {
            plot.x_label = "t".into();
            plot.y_label = "value".into();
            plot.series.push(Series { name: "value".into(), points: rows });
        }
        Table::Long(records) => {
            let observable = match &a.observable {
                Some(o) => o.clone(),
                None => records.first().map(|r| r.observable.clone()).unwrap_or_default(),
            };
            // replica mean against N, one series per (experiment, theta, gamma)
            let mut groups: std::collections::BTreeMap<(String, u64, u64), std::collections::BTreeMap<usize, Vec<f64>>> =
                Default::default();
            for r in records.iter().filter(|r| r.observable == observable) {
                groups
                    .entry((r.experiment.clone(), r.theta.to_bits(), r.gamma.to_bits()))
                    .or_default()
                    .entry(r.n)
                    .or_default()
                    .push(r.value);
            }
            if groups.is_empty() {
                return Err(Failure::Usage(format!("no rows for observable {observable:?}")));
            }
            plot.x_label = "N".into();
            plot.y_label = observable.clone();
            for ((exp, theta, gamma), by_n) in groups {
                let points = by_n.into_iter().map(|(n, v)| (n as f64, harness::Stats::from_samples(&v).mean)).collect();
                plot.series.push(Series {
                    name: format!("{exp} theta={} gamma={}", f64::from_bits(theta), f64::from_bits(gamma)),
                    points,
                });
            }
        }
    }
    let out = a.out.unwrap_or_else(|| a.csv.with_extension("svg"));
    fs::write(&out, plot.render())?;
    println!("wrote {}", out.display());
    Ok(())
}
