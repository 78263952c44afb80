use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{DensityProfile, InitialCondition};
use crate::model::Params;
use crate::observables::{Integrand, TestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Hydrodynamic limit against the PDE solution.
    HD,
    /// Hydrostatic profile under the stationary law.
    HS,
    /// Long-time `N^{2+gamma}` limits.
    LT,
    /// Replacement-type time integrals shrinking with `N`.
    RL,
    /// Quadratic variation scaling of the mean-density martingale.
    QV,
    /// Tiny-`N` state occupation against the brute-force law.
    OR,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] =
        [ExperimentId::HD, ExperimentId::HS, ExperimentId::LT, ExperimentId::RL, ExperimentId::QV, ExperimentId::OR];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::HD => "HD",
            ExperimentId::HS => "HS",
            ExperimentId::LT => "LT",
            ExperimentId::RL => "RL",
            ExperimentId::QV => "QV",
            ExperimentId::OR => "OR",
        }
    }

    /// Metric the thresholds apply to unless the spec names one.
    pub fn default_metric(&self) -> &'static str {
        match self {
            ExperimentId::HD => "pair_error",
            ExperimentId::HS => "l1_replica_mean",
            ExperimentId::LT => "sup_mean_error",
            ExperimentId::RL => "abs_integral",
            ExperimentId::QV => "qv",
            ExperimentId::OR => "tv",
        }
    }

    pub fn metrics(&self) -> &'static [&'static str] {
        match self {
            ExperimentId::HD => &["pair_error"],
            ExperimentId::HS => &["l1_replica_mean", "l1_pooled"],
            ExperimentId::LT => &["sup_mean_error", "profile_l1", "abs_integral_mean"],
            ExperimentId::RL => &["abs_integral"],
            ExperimentId::QV => &["qv"],
            ExperimentId::OR => &["tv"],
        }
    }

    /// Whether acceptance compares across an `N` ladder.
    pub fn is_ladder(&self) -> bool {
        matches!(self, ExperimentId::HS | ExperimentId::RL | ExperimentId::QV)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown experiment id {s:?}")))
    }
}

fn default_gamma() -> Vec<f64> {
    vec![0.0]
}
fn default_c() -> Vec<f64> {
    vec![1.0]
}
fn default_alpha() -> Vec<f64> {
    vec![0.2]
}
fn default_beta() -> Vec<f64> {
    vec![0.8]
}

/// Cartesian parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub theta: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    /// Use `beta = alpha` instead of crossing with the `beta` list.
    #[serde(default)]
    pub equal_reservoirs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub theta: f64,
    pub gamma: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GridPoint {
    pub fn params(&self) -> Result<Params> {
        Params::new(self.n, self.c, self.theta, self.alpha, self.beta, self.gamma)
    }

    /// Everything except `N`, for grouping points into ladders.
    pub fn line_key(&self) -> [u64; 5] {
        [self.theta, self.gamma, self.c, self.alpha, self.beta].map(f64::to_bits)
    }

    pub fn label(&self) -> String {
        format!(
            "N={} theta={} gamma={} c={} alpha={} beta={}",
            self.n, self.theta, self.gamma, self.c, self.alpha, self.beta
        )
    }

    pub fn line_label(&self) -> String {
        format!("theta={} gamma={} c={} alpha={} beta={}", self.theta, self.gamma, self.c, self.alpha, self.beta)
    }
}

impl Grid {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &theta in &self.theta {
            for &gamma in &self.gamma {
                for &c in &self.c {
                    for &alpha in &self.alpha {
                        let betas = if self.equal_reservoirs { vec![alpha] } else { self.beta.clone() };
                        for beta in betas {
                            for &n in &self.n {
                                out.push(GridPoint { n, theta, gamma, c, alpha, beta });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Upper bound on the metric (at every point, or at the largest `N` of
    /// each ladder for ladder experiments).
    pub max_error: Option<f64>,
    /// Require the metric to decrease strictly along each `N` ladder.
    pub monotone: Option<bool>,
    /// Expected log-log slope; defaults to `gamma - theta`.
    pub slope: Option<f64>,
    pub slope_tolerance: Option<f64>,
}

fn default_replicas() -> usize {
    32
}
fn default_factor() -> f64 {
    10.0
}
fn default_max_events() -> f64 {
    5e9
}
fn default_samples() -> usize {
    50
}
fn default_events() -> u64 {
    1_000_000
}
fn default_pde_resolution() -> usize {
    crate::pde::DEFAULT_RESOLUTION
}
fn default_pde_dt() -> f64 {
    crate::pde::DEFAULT_DT
}
fn default_init() -> InitialCondition {
    InitialCondition::Bernoulli { profile: DensityProfile::Constant { value: 0.5 } }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    #[serde(default)]
    pub name: String,
    pub grid: Grid,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// When set, cheaper grid points get `replicas * floor(cost_max / cost)`
    /// replicas, capped here, so every point costs about the same.
    #[serde(default)]
    pub max_replicas: Option<usize>,
    /// Macroscopic horizon (HD, LT, RL, QV).
    #[serde(default)]
    pub t: f64,
    /// Start of the evaluation window for LT.
    #[serde(default)]
    pub from_t: f64,
    #[serde(default)]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub integrands: Vec<Integrand>,
    #[serde(default = "default_init")]
    pub init: InitialCondition,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub metric: Option<String>,
    /// Burn-in `factor * max(N^{theta+1}/c, N^2)` micro time units (HS, OR).
    #[serde(default = "default_factor")]
    pub burn_in_factor: f64,
    /// Averaging window as a multiple of the burn-in (HS).
    #[serde(default = "default_factor")]
    pub window_factor: f64,
    /// Events per replica after burn-in (OR).
    #[serde(default = "default_events")]
    pub events: u64,
    /// Sample times on `[0, t]` for trajectories (LT).
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_pde_resolution")]
    pub pde_resolution: usize,
    #[serde(default = "default_pde_dt")]
    pub pde_dt: f64,
    /// Feasibility guard on the estimated events of one grid point.
    #[serde(default = "default_max_events")]
    pub max_events: f64,
}

impl ExperimentSpec {
    /// Skeleton with defaults for everything but the id and grid.
    pub fn new(id: ExperimentId, grid: Grid) -> Self {
        Self {
            id,
            name: String::new(),
            grid,
            replicas: default_replicas(),
            max_replicas: None,
            t: 0.0,
            from_t: 0.0,
            test_functions: Vec::new(),
            integrands: Vec::new(),
            init: default_init(),
            thresholds: Thresholds::default(),
            metric: None,
            burn_in_factor: default_factor(),
            window_factor: default_factor(),
            events: default_events(),
            samples: default_samples(),
            pde_resolution: default_pde_resolution(),
            pde_dt: default_pde_dt(),
            max_events: default_max_events(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = crate::io::config::parse_toml(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn metric(&self) -> &str {
        self.metric.as_deref().unwrap_or(self.id.default_metric())
    }

    pub fn integrands(&self) -> Vec<Integrand> {
        if self.integrands.is_empty() {
            vec![Integrand::LeftMinusAlpha]
        } else {
            self.integrands.clone()
        }
    }

    pub fn test_functions_or_default(&self) -> Vec<TestFunction> {
        if self.test_functions.is_empty() {
            vec![TestFunction::Constant(1.0)]
        } else {
            self.test_functions.clone()
        }
    }

    pub fn monotone(&self) -> bool {
        self.thresholds.monotone.unwrap_or(matches!(self.id, ExperimentId::HS | ExperimentId::RL))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let g = &self.grid;
        if g.n.is_empty() || g.theta.is_empty() || g.gamma.is_empty() || g.c.is_empty() || g.alpha.is_empty() {
            return bad("grid lists must be nonempty".into());
        }
        if g.beta.is_empty() && !g.equal_reservoirs {
            return bad("grid.beta must be nonempty".into());
        }
        if self.replicas < 2 {
            return bad(format!("replicas = {}, need at least 2 for a confidence interval", self.replicas));
        }
        for p in g.points() {
            p.params().map_err(|e| Error::InvalidSpec(format!("grid point {}: {e}", p.label())))?;
        }
        self.init.validate()?;
        if !self.id.metrics().contains(&self.metric()) {
            return bad(format!("metric {:?} is not defined for {} (choose from {:?})", self.metric(), self.id, self.id.metrics()));
        }
        let needs_t = matches!(self.id, ExperimentId::HD | ExperimentId::LT | ExperimentId::RL | ExperimentId::QV);
        if needs_t && !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("t = {}, need a positive horizon for {}", self.t, self.id));
        }
        if !(0.0..=self.t.max(0.0)).contains(&self.from_t) {
            return bad(format!("from_t = {} outside [0, t]", self.from_t));
        }
        if !(self.burn_in_factor >= 0.0 && self.window_factor > 0.0) {
            return bad("burn_in_factor must be >= 0 and window_factor > 0".into());
        }
        if self.max_replicas.is_some_and(|m| m < self.replicas) {
            return bad("max_replicas must be at least replicas".into());
        }
        if !(self.max_events > 0.0) {
            return bad("max_events must be positive".into());
        }
        if self.id == ExperimentId::OR && g.n.iter().any(|&n| n > crate::theory::MAX_BRUTE_FORCE_N) {
            return bad(format!("OR needs N <= {}", crate::theory::MAX_BRUTE_FORCE_N));
        }
        if self.id == ExperimentId::QV && g.n.len() < 2 {
            return bad("QV needs at least two values of N for a fit".into());
        }
        if self.id == ExperimentId::LT && self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.id == ExperimentId::HD && self.pde_resolution < crate::pde::MIN_RESOLUTION {
            return bad(format!("pde_resolution must be at least {}", crate::pde::MIN_RESOLUTION));
        }
        Ok(())
    }

    /// Replica count at a point whose replicas cost `cost` events each,
    /// `costliest` being the most expensive point of the grid.
    pub fn replicas_at(&self, cost: f64, costliest: f64) -> usize {
        match self.max_replicas {
            Some(cap) if cost > 0.0 => {
                let scale = (costliest / cost).floor().min(cap as f64) as usize;
                (self.replicas * scale.max(1)).clamp(self.replicas, cap.max(self.replicas))
            }
            _ => self.replicas,
        }
    }

    /// Burn-in in micro time units.
    pub fn burn_in(&self, p: &Params) -> f64 {
        let n = p.n() as f64;
        self.burn_in_factor * (n.powf(p.theta() + 1.0) / p.c()).max(n * n)
    }
}
