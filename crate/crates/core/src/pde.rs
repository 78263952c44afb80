//! Implicit finite differences for the heat equation on `[0,1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tridiag::Factored;

pub const MIN_RESOLUTION: usize = 8;
pub const DEFAULT_RESOLUTION: usize = 256;
pub const DEFAULT_DT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    /// `rho(t,0) = alpha`, `rho(t,1) = beta`.
    Dirichlet { alpha: f64, beta: f64 },
    /// `d_u rho(t,0) = c (rho(t,0) - alpha)`, `d_u rho(t,1) = c (beta - rho(t,1))`.
    Robin { c: f64, alpha: f64, beta: f64 },
    /// Zero flux at both ends.
    Neumann,
}

impl BoundaryCondition {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} = {v}, need 0 <= {name} <= 1")))
            }
        };
        match *self {
            BoundaryCondition::Dirichlet { alpha, beta } => {
                check("alpha", alpha)?;
                check("beta", beta)
            }
            BoundaryCondition::Robin { c, alpha, beta } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParams(format!("c = {c}, need c > 0")));
                }
                check("alpha", alpha)?;
                check("beta", beta)
            }
            BoundaryCondition::Neumann => Ok(()),
        }
    }

    /// The boundary condition of the hydrodynamic equation for a given `theta`.
    pub fn for_theta(theta: f64, c: f64, alpha: f64, beta: f64) -> Self {
        let d = theta - 1.0;
        if d.abs() <= crate::theory::REGIME_TOLERANCE {
            BoundaryCondition::Robin { c, alpha, beta }
        } else if d < 0.0 {
            BoundaryCondition::Dirichlet { alpha, beta }
        } else {
            BoundaryCondition::Neumann
        }
    }
}

/// Values on the uniform grid `u_j = j / M`, `j = 0..=M`, at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub t: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=m).map(|j| f(j as f64 / m as f64)).collect();
        Self { t: 0.0, values }
    }

    pub fn resolution(&self) -> usize {
        self.values.len() - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.resolution() as f64
    }

    pub fn u(&self, j: usize) -> f64 {
        j as f64 / self.resolution() as f64
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(j, &v)| (self.u(j), v))
    }

    /// Trapezoidal mass; the quantity the Neumann scheme conserves exactly.
    pub fn mass(&self) -> f64 {
        let v = &self.values;
        let m = v.len() - 1;
        self.h() * (v[1..m].iter().sum::<f64>() + 0.5 * (v[0] + v[m]))
    }

    /// Linear interpolation at `u` in `[0,1]`.
    pub fn interpolate(&self, u: f64) -> f64 {
        let m = self.resolution();
        let s = (u.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let j = (s.floor() as usize).min(m - 1);
        let w = s - j as f64;
        (1.0 - w) * self.values[j] + w * self.values[j + 1]
    }

    /// `int_0^1 rho(u) G(u) du` by composite Simpson (trapezoid if `M` is odd).
    pub fn pair(&self, g: impl Fn(f64) -> f64) -> f64 {
        let m = self.resolution();
        let h = self.h();
        let f = |j: usize| self.values[j] * g(self.u(j));
        if m % 2 == 0 {
            let mut s = f(0) + f(m);
            for j in 1..m {
                s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j);
            }
            s * h / 3.0
        } else {
            h * ((1..m).map(f).sum::<f64>() + 0.5 * (f(0) + f(m)))
        }
    }

    fn check(&self) -> Result<()> {
        if self.values.len() < MIN_RESOLUTION + 1 {
            return Err(Error::InvalidGrid(format!(
                "resolution M = {}, need M >= {MIN_RESOLUTION}",
                self.values.len().saturating_sub(1)
            )));
        }
        if let Some(j) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial value at grid index {j}")));
        }
        Ok(())
    }
}

/// Backward Euler in time, centred second differences in space. Robin and
/// Neumann ends use ghost points so the boundary rows stay second order.
///
/// The step count is `ceil(t_end / dt)` with the step shortened to land on
/// `t_end` exactly.
pub fn solve_heat(bc: BoundaryCondition, rho0: &GridFunction, t_end: f64, dt: f64) -> Result<GridFunction> {
    let mut out = Vec::new();
    solve_heat_sampled(bc, rho0, t_end, dt, &[], &mut out)
}

/// As [`solve_heat`], additionally recording the solution at each time in
/// `sample_times` (rounded to the nearest step).
pub fn solve_heat_sampled(
    bc: BoundaryCondition,
    rho0: &GridFunction,
    t_end: f64,
    dt: f64,
    sample_times: &[f64],
    samples: &mut Vec<GridFunction>,
) -> Result<GridFunction> {
    bc.validate()?;
    rho0.check()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::NonFinite(format!("t_end = {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonFinite(format!("dt = {dt}, need a positive finite step")));
    }
    let mut state = rho0.values.clone();
    let start = rho0.t;
    let steps = (t_end / dt).ceil() as usize;
    let mut sample_steps: Vec<(usize, usize)> = sample_times
        .iter()
        .enumerate()
        .map(|(i, &t)| (if steps == 0 { 0 } else { ((t / t_end) * steps as f64).round() as usize }, i))
        .collect();
    sample_steps.sort_unstable();
    let mut recorded: Vec<Option<GridFunction>> = vec![None; sample_times.len()];
    let mut next = 0;
    let mut record = |k: usize, t: f64, state: &[f64], next: &mut usize| {
        while *next < sample_steps.len() && sample_steps[*next].0 <= k {
            recorded[sample_steps[*next].1] = Some(GridFunction { t, values: state.to_vec() });
            *next += 1;
        }
    };
    record(0, start, &state, &mut next);
    if steps == 0 {
        samples.extend(recorded.into_iter().flatten());
        return Ok(GridFunction { t: start, values: state });
    }

    let dt = t_end / steps as f64;
    let m = rho0.resolution();
    let h = 1.0 / m as f64;
    let r = dt / (h * h);
    let stepper = Stepper::new(bc, m, r, h)?;
    for k in 1..=steps {
        stepper.advance(&mut state);
        record(k, start + k as f64 * dt, &state, &mut next);
    }
    samples.extend(recorded.into_iter().flatten());
    Ok(GridFunction { t: start + t_end, values: state })
}

struct Stepper {
    op: Factored,
    bc: BoundaryCondition,
    r: f64,
    h: f64,
}

impl Stepper {
    fn new(bc: BoundaryCondition, m: usize, r: f64, h: f64) -> Result<Self> {
        let (n, left_c, right_c) = match bc {
            BoundaryCondition::Dirichlet { .. } => (m - 1, None, None),
            BoundaryCondition::Robin { c, .. } => (m + 1, Some(c), Some(c)),
            BoundaryCondition::Neumann => (m + 1, Some(0.0), Some(0.0)),
        };
        let mut lower = vec![-r; n];
        let mut diag = vec![1.0 + 2.0 * r; n];
        let mut upper = vec![-r; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        if let Some(c) = left_c {
            diag[0] += 2.0 * r * h * c;
            upper[0] = -2.0 * r;
        }
        if let Some(c) = right_c {
            diag[n - 1] += 2.0 * r * h * c;
            lower[n - 1] = -2.0 * r;
        }
        Ok(Self { op: Factored::new(&lower, &diag, &upper)?, bc, r, h })
    }

    fn advance(&self, state: &mut [f64]) {
        let m = state.len() - 1;
        match self.bc {
            BoundaryCondition::Dirichlet { alpha, beta } => {
                state[0] = alpha;
                state[m] = beta;
                let interior = &mut state[1..m];
                interior[0] += self.r * alpha;
                interior[m - 2] += self.r * beta;
                self.op.solve_in_place(interior);
            }
            BoundaryCondition::Robin { c, alpha, beta } => {
                state[0] += 2.0 * self.r * self.h * c * alpha;
                state[m] += 2.0 * self.r * self.h * c * beta;
                self.op.solve_in_place(state);
            }
            BoundaryCondition::Neumann => self.op.solve_in_place(state),
        }
    }
}

/// Stationary profile of the boundary problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stationary {
    Unique(GridFunction),
    /// Every constant is stationary; `representative` is `(alpha + beta) / 2`.
    NonUnique { representative: GridFunction },
}

impl Stationary {
    pub fn profile(&self) -> &GridFunction {
        match self {
            Stationary::Unique(g) | Stationary::NonUnique { representative: g } => g,
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, Stationary::Unique(_))
    }
}

/// Stationary solution on a grid of resolution `m`. Neumann needs the
/// reservoir densities to pick the representative.
pub fn stationary_solution(bc: BoundaryCondition, m: usize, reservoirs: (f64, f64)) -> Result<Stationary> {
    bc.validate()?;
    if m < MIN_RESOLUTION {
        return Err(Error::InvalidGrid(format!("resolution M = {m}, need M >= {MIN_RESOLUTION}")));
    }
    Ok(match bc {
        BoundaryCondition::Dirichlet { alpha, beta } => {
            Stationary::Unique(GridFunction::from_fn(m, |u| crate::theory::rho_bar(0.0, 1.0, alpha, beta, u)))
        }
        BoundaryCondition::Robin { c, alpha, beta } => {
            Stationary::Unique(GridFunction::from_fn(m, |u| crate::theory::rho_bar(1.0, c, alpha, beta, u)))
        }
        BoundaryCondition::Neumann => {
            let mid = (reservoirs.0 + reservoirs.1) / 2.0;
            Stationary::NonUnique { representative: GridFunction::from_fn(m, |_| mid) }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(m: usize) -> GridFunction {
        GridFunction::from_fn(m, |u| (PI * u).sin())
    }

    #[test]
    fn constant_is_neumann_stationary() {
        let g = solve_heat(BoundaryCondition::Neumann, &GridFunction::from_fn(32, |_| 0.5), 1.0, 1e-2).unwrap();
        assert!(g.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!((g.t - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_eigenmode() {
        let g = solve_heat(BoundaryCondition::Dirichlet { alpha: 1e-300, beta: 1e-300 }, &sine(256), 0.1, 1e-5)
            .unwrap();
        assert!((g.values[128] - 0.37268).abs() < 5e-4, "{}", g.values[128]);
    }

    #[test]
    fn affine_dirichlet_is_invariant() {
        let bc = BoundaryCondition::Dirichlet { alpha: 0.2, beta: 0.8 };
        let g0 = GridFunction::from_fn(64, |u| 0.2 + 0.6 * u);
        let g = solve_heat(bc, &g0, 0.5, 1e-3).unwrap();
        for (a, b) in g.values.iter().zip(&g0.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn robin_stationary_profile_is_fixed_point() {
        // Guards the ghost-point sign: with the wrong sign the profile drifts.
        let bc = BoundaryCondition::Robin { c: 2.0, alpha: 0.2, beta: 0.8 };
        let g0 = stationary_solution(bc, 64, (0.2, 0.8)).unwrap().profile().clone();
        let g = solve_heat(bc, &g0, 1.0, 1e-2).unwrap();
        for (a, b) in g.values.iter().zip(&g0.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((g0.values[64] - 0.65).abs() < 1e-15);
        // relaxation from flat data approaches it
        let g = solve_heat(bc, &GridFunction::from_fn(64, |_| 0.5), 5.0, 1e-2).unwrap();
        for (a, b) in g.values.iter().zip(&g0.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn stationary_cases() {
        let d = stationary_solution(BoundaryCondition::Dirichlet { alpha: 0.2, beta: 0.8 }, 8, (0.2, 0.8)).unwrap();
        assert!(d.is_unique());
        assert!((d.profile().interpolate(0.5) - 0.5).abs() < 1e-15);
        let n = stationary_solution(BoundaryCondition::Neumann, 8, (0.2, 0.8)).unwrap();
        assert!(!n.is_unique());
        assert!(n.profile().values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn neumann_conserves_trapezoid_mass() {
        let g0 = GridFunction::from_fn(128, |u| if u <= 0.5 { 1.0 } else { 0.0 });
        let g = solve_heat(BoundaryCondition::Neumann, &g0, 1.0, 1e-3).unwrap();
        assert!((g.mass() - g0.mass()).abs() < 1e-10);
        assert!(g.values.iter().all(|v| (v - g0.mass()).abs() < 1e-3));
    }

    #[test]
    fn robin_flux_identity() {
        let (c, alpha, beta) = (1.5, 0.3, 0.9);
        let bc = BoundaryCondition::Robin { c, alpha, beta };
        let dt = 1e-3;
        let mut g = GridFunction::from_fn(64, |u| u * u);
        for _ in 0..50 {
            let next = solve_heat(bc, &g, dt, dt).unwrap();
            let rate = (next.mass() - g.mass()) / dt;
            let v = &next.values;
            let flux = c * (alpha - v[0]) + c * (beta - v[64]);
            assert!((rate - flux).abs() < 1e-10, "{rate} vs {flux}");
            g = next;
        }
    }

    #[test]
    fn max_principle() {
        let g0 = GridFunction::from_fn(100, |u| if (0.3..0.4).contains(&u) { 1.0 } else { 0.0 });
        for bc in [
            BoundaryCondition::Neumann,
            BoundaryCondition::Dirichlet { alpha: 0.1, beta: 0.9 },
            BoundaryCondition::Robin { c: 3.0, alpha: 0.1, beta: 0.9 },
        ] {
            let g = solve_heat(bc, &g0, 0.05, 1e-3).unwrap();
            assert!(g.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn second_order_in_space() {
        let err = |m: usize| {
            let h = 1.0 / m as f64;
            let g = solve_heat(BoundaryCondition::Dirichlet { alpha: 1e-300, beta: 1e-300 }, &sine(m), 0.1, 0.5 * h * h)
                .unwrap();
            let decay = (-PI * PI * 0.1).exp();
            g.points().map(|(u, v)| (v - decay * (PI * u).sin()).abs()).fold(0.0, f64::max)
        };
        let (e64, e256) = (err(64), err(256));
        let order = (e64 / e256).ln() / 4f64.ln();
        assert!(order >= 1.8, "order {order}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut g = GridFunction::from_fn(16, |_| 0.5);
        g.values[3] = f64::NAN;
        assert!(matches!(solve_heat(BoundaryCondition::Neumann, &g, 1.0, 0.1), Err(Error::NonFinite(_))));
        let g = GridFunction::from_fn(4, |_| 0.5);
        assert!(matches!(solve_heat(BoundaryCondition::Neumann, &g, 1.0, 0.1), Err(Error::InvalidGrid(_))));
        let g = GridFunction::from_fn(16, |_| 0.5);
        assert!(solve_heat(BoundaryCondition::Neumann, &g, 1.0, 0.0).is_err());
        assert!(solve_heat(BoundaryCondition::Dirichlet { alpha: 0.0, beta: 1.0 }, &g, 0.1, 1e-3).is_ok());
        assert!(solve_heat(BoundaryCondition::Dirichlet { alpha: -0.1, beta: 1.0 }, &g, 0.1, 1e-3).is_err());
    }

    #[test]
    fn samples_are_recorded() {
        let g0 = sine(32);
        let mut s = Vec::new();
        let g = solve_heat_sampled(BoundaryCondition::Neumann, &g0, 1.0, 0.01, &[0.0, 0.5, 1.0], &mut s).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].values, g0.values);
        assert!((s[1].t - 0.5).abs() < 1e-12);
        assert_eq!(s[2].values, g.values);
    }

    #[test]
    fn pairing_quadrature() {
        let g = GridFunction::from_fn(64, |u| u);
        assert!((g.pair(|u| u) - 1.0 / 3.0).abs() < 1e-14);
        assert!((g.pair(|_| 1.0) - 0.5).abs() < 1e-15);
    }
}
