//! Closed-form limit profiles and two finite-N oracles: the tridiagonal
//! one-point equations and the brute-force stationary law of the generator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Params;
use crate::tridiag;

/// Tolerance for the measure-zero boundaries `theta = 1` and `gamma = theta - 1`.
pub const REGIME_TOLERANCE: f64 = 1e-12;

/// Inputs within this distance of a boundary (but outside the tolerance)
/// are classified strictly and logged.
const NEAR_BOUNDARY: f64 = 1e-6;

/// Largest `N` the brute-force oracle accepts (2^11 = 2048 states).
pub const MAX_BRUTE_FORCE_N: usize = 12;

/// Long-time limit regime, a pure function of `(theta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `theta < 1`.
    Dirichlet,
    /// `theta = 1`.
    Robin,
    /// `theta > 1`, `gamma < theta - 1`: mean density frozen at `m0`.
    NeumannFrozen,
    /// `theta > 1`, `gamma = theta - 1`: mean relaxes like `e^{-2ct}`.
    NeumannRelaxing,
    /// `theta > 1`, `gamma > theta - 1`: mean at `(alpha + beta) / 2`.
    NeumannEquilibrated,
}

impl Regime {
    pub fn classify(theta: f64, gamma: f64) -> Regime {
        let d_theta = theta - 1.0;
        warn_if_near("theta = 1", d_theta);
        if d_theta.abs() <= REGIME_TOLERANCE {
            return Regime::Robin;
        }
        if d_theta < 0.0 {
            return Regime::Dirichlet;
        }
        let d_gamma = gamma - d_theta;
        warn_if_near("gamma = theta - 1", d_gamma);
        if d_gamma.abs() <= REGIME_TOLERANCE {
            Regime::NeumannRelaxing
        } else if d_gamma < 0.0 {
            Regime::NeumannFrozen
        } else {
            Regime::NeumannEquilibrated
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Dirichlet => "dirichlet",
            Regime::Robin => "robin",
            Regime::NeumannFrozen => "neumann-frozen",
            Regime::NeumannRelaxing => "neumann-relaxing",
            Regime::NeumannEquilibrated => "neumann-equilibrated",
        }
    }

    pub fn needs_initial_density(&self) -> bool {
        matches!(self, Regime::NeumannFrozen | Regime::NeumannRelaxing)
    }
}

fn warn_if_near(boundary: &str, distance: f64) {
    if distance.abs() > REGIME_TOLERANCE && distance.abs() < NEAR_BOUNDARY {
        log::warn!("parameters are {distance:e} from the regime boundary {boundary}; classified strictly");
    }
}

/// Hydrostatic profile.
pub fn rho_bar(theta: f64, c: f64, alpha: f64, beta: f64, u: f64) -> f64 {
    let d = theta - 1.0;
    if d.abs() <= REGIME_TOLERANCE {
        c * (beta - alpha) / (2.0 + c) * u + alpha + (beta - alpha) / (2.0 + c)
    } else if d < 0.0 {
        (beta - alpha) * u + alpha
    } else {
        (alpha + beta) / 2.0
    }
}

/// Mean density relaxation `(a+b)/2 + (m0 - (a+b)/2) e^{-2ct}`.
pub fn m_closed(t: f64, c: f64, m0: f64, alpha: f64, beta: f64) -> f64 {
    let mid = (alpha + beta) / 2.0;
    mid + (m0 - mid) * (-2.0 * c * t).exp()
}

/// Limit profile written as `intercept + slope u + amplitude e^{-rate t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeProfile {
    pub regime: Regime,
    pub intercept: f64,
    pub slope: f64,
    pub amplitude: f64,
    pub rate: f64,
}

impl RegimeProfile {
    pub fn new(theta: f64, gamma: f64, c: f64, alpha: f64, beta: f64, m0: Option<f64>) -> Result<Self> {
        let regime = Regime::classify(theta, gamma);
        let m0 = match (regime.needs_initial_density(), m0) {
            (true, None) => return Err(Error::MissingInitialDensity { regime: regime.name() }),
            (_, m0) => m0.unwrap_or(f64::NAN),
        };
        let mid = (alpha + beta) / 2.0;
        let flat = |v: f64| (v, 0.0, 0.0, 0.0);
        let (intercept, slope, amplitude, rate) = match regime {
            Regime::Dirichlet => (alpha, beta - alpha, 0.0, 0.0),
            Regime::Robin => (alpha + (beta - alpha) / (2.0 + c), c * (beta - alpha) / (2.0 + c), 0.0, 0.0),
            Regime::NeumannFrozen => flat(m0),
            Regime::NeumannEquilibrated => flat(mid),
            Regime::NeumannRelaxing => (mid, 0.0, m0 - mid, 2.0 * c),
        };
        Ok(Self { regime, intercept, slope, amplitude, rate })
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let decay = if self.amplitude == 0.0 { 0.0 } else { self.amplitude * (-self.rate * t).exp() };
        self.intercept + self.slope * u + decay
    }

    /// `int_0^1 rho(t,u) G(u) du` given `int G` and `int u G`.
    pub fn pair(&self, t: f64, int_g: f64, int_ug: f64) -> f64 {
        let decay = if self.amplitude == 0.0 { 0.0 } else { self.amplitude * (-self.rate * t).exp() };
        (self.intercept + decay) * int_g + self.slope * int_ug
    }
}

/// Long-time limit profile `rho_{theta,gamma}(t, u)`.
#[allow(clippy::too_many_arguments)]
pub fn rho_theta_gamma(
    theta: f64,
    gamma: f64,
    c: f64,
    alpha: f64,
    beta: f64,
    m0: Option<f64>,
    t: f64,
    u: f64,
) -> Result<f64> {
    Ok(RegimeProfile::new(theta, gamma, c, alpha, beta, m0)?.eval(t, u))
}

/// Finite-N stationary one-point function `E_ss[eta(x)]`, `x = 1..N-1`,
/// from the closed one-point equations (tridiagonal solve).
///
/// The unknowns are shifted by `(alpha + beta) / 2`: for weak boundaries the
/// system is nearly singular but the shifted solution is small, which keeps
/// the absolute error near `N^2` ulps.
pub fn exact_stationary_profile(params: &Params) -> Result<Vec<f64>> {
    solve_one_point(params.n(), params.boundary_strength(), params.alpha(), params.beta())
}

/// As [`exact_stationary_profile`] from raw values. The linear system stays
/// well posed for reservoir densities on the closed interval `[0, 1]`, so
/// those are accepted here even though the process itself excludes them.
pub fn exact_stationary_profile_raw(n: usize, c: f64, theta: f64, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("N = {n}, need N >= 2")));
    }
    if !(c > 0.0 && c.is_finite()) || !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParams(format!("need c > 0 and theta >= 0, got c = {c}, theta = {theta}")));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParams(format!("{name} = {v}, need 0 <= {name} <= 1")));
        }
    }
    solve_one_point(n, c * (n as f64).powf(-theta), alpha, beta)
}

fn solve_one_point(n: usize, k: f64, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    let sites = n - 1;
    if sites == 1 {
        return Ok(vec![(alpha + beta) / 2.0]);
    }
    let mut lower = vec![1.0; sites];
    let mut diag = vec![-2.0; sites];
    let mut upper = vec![1.0; sites];
    let mut rhs = vec![0.0; sites];
    lower[0] = 0.0;
    upper[sites - 1] = 0.0;
    diag[0] = -(k + 1.0);
    diag[sites - 1] = -(k + 1.0);
    let mid = (alpha + beta) / 2.0;
    rhs[0] = -k * (alpha - mid);
    rhs[sites - 1] = -k * (beta - mid);
    let mut rho = tridiag::solve(&lower, &diag, &upper, &rhs)?;
    rho.iter_mut().for_each(|v| *v += mid);
    Ok(rho)
}

/// Stationary law of the full generator on `{0,1}^{N-1}`.
#[derive(Debug, Clone)]
pub struct BruteForceLaw {
    pub n: usize,
    /// Indexed by state; bit `x-1` is `eta(x)`.
    pub probabilities: Vec<f64>,
    /// `P(eta(x) = 1)` for `x = 1..N-1`.
    pub marginals: Vec<f64>,
}

/// Dense generator matrix `Q[s][s']` of `L_N` over all `2^{N-1}` states.
pub fn generator_matrix(params: &Params) -> Result<DMatrix<f64>> {
    let n = params.n();
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::StateSpaceTooLarge { n, max: MAX_BRUTE_FORCE_N });
    }
    let sites = n - 1;
    let states = 1usize << sites;
    let k = params.boundary_strength();
    let mut q = DMatrix::<f64>::zeros(states, states);
    for s in 0..states {
        let bit = |x: usize| (s >> (x - 1)) & 1;
        for x in 1..sites {
            if bit(x) != bit(x + 1) {
                q[(s, s ^ (0b11 << (x - 1)))] += 1.0;
            }
        }
        let r_alpha = if bit(1) == 1 { 1.0 - params.alpha() } else { params.alpha() };
        q[(s, s ^ 1)] += k * r_alpha;
        let r_beta = if bit(sites) == 1 { 1.0 - params.beta() } else { params.beta() };
        q[(s, s ^ (1 << (sites - 1)))] += k * r_beta;
    }
    for s in 0..states {
        let out: f64 = (0..states).filter(|&j| j != s).map(|j| q[(s, j)]).sum();
        q[(s, s)] = -out;
    }
    Ok(q)
}

/// Unique `pi` with `pi Q = 0`, `sum pi = 1`: the transposed system with its
/// last equation replaced by the normalisation row, solved by LU.
pub fn brute_force_stationary(params: &Params) -> Result<BruteForceLaw> {
    let q = generator_matrix(params)?;
    let states = q.nrows();
    let mut a = q.transpose();
    for j in 0..states {
        a[(states - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(states);
    rhs[states - 1] = 1.0;

    let lu = a.lu();
    let u = lu.u();
    let scale = u.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min_pivot > 1e-12 * scale) {
        return Err(Error::NonUniqueStationary { pivot: min_pivot });
    }
    let pi = lu.solve(&rhs).ok_or(Error::NonUniqueStationary { pivot: min_pivot })?;
    let probabilities: Vec<f64> = pi.iter().copied().collect();

    let n = params.n();
    let marginals = (1..n)
        .map(|x| {
            probabilities.iter().enumerate().filter(|(s, _)| (s >> (x - 1)) & 1 == 1).map(|(_, p)| p).sum()
        })
        .collect();
    Ok(BruteForceLaw { n, probabilities, marginals })
}

/// Product Bernoulli(rho) law over `2^{N-1}` states.
pub fn product_bernoulli(n: usize, rho: f64) -> Vec<f64> {
    (0..1usize << (n - 1))
        .map(|s| {
            let ones = s.count_ones() as i32;
            rho.powi(ones) * (1.0 - rho).powi((n - 1) as i32 - ones)
        })
        .collect()
}

/// Total variation distance between two distributions on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn closed_form_profile(p: &Params) -> Vec<f64> {
        let k_inv = (p.n() as f64).powf(p.theta()) / p.c();
        let n = p.n() as f64;
        (1..p.n())
            .map(|x| p.alpha() + (p.beta() - p.alpha()) * (x as f64 - 1.0 + k_inv) / (n - 2.0 + 2.0 * k_inv))
            .collect()
    }

    #[test]
    fn rho_bar_cases() {
        assert_relative_eq!(rho_bar(0.5, 1.0, 0.2, 0.8, 0.5), 0.5);
        assert_relative_eq!(rho_bar(1.0, 2.0, 0.2, 0.8, 1.0), 0.65, epsilon = 1e-15);
        for u in [0.0, 0.3, 1.0] {
            assert_relative_eq!(rho_bar(2.0, 3.0, 0.2, 0.8, u), 0.5);
        }
    }

    #[test]
    fn regime_dispatch() {
        assert_eq!(Regime::classify(0.0, 5.0), Regime::Dirichlet);
        assert_eq!(Regime::classify(1.0, 0.0), Regime::Robin);
        assert_eq!(Regime::classify(1.0 + 1e-13, 0.0), Regime::Robin);
        assert_eq!(Regime::classify(2.0, 0.5), Regime::NeumannFrozen);
        assert_eq!(Regime::classify(2.0, 1.0), Regime::NeumannRelaxing);
        assert_eq!(Regime::classify(2.0, 1.5), Regime::NeumannEquilibrated);
        assert_eq!(Regime::classify(1.0 + 1e-9, 0.0), Regime::NeumannFrozen);
    }

    #[test]
    fn rho_theta_gamma_cases() {
        assert_relative_eq!(rho_theta_gamma(2.0, 1.0, 1.0, 0.2, 0.8, Some(0.9), 0.0, 0.3).unwrap(), 0.9);
        assert_relative_eq!(rho_theta_gamma(2.0, 2.0, 1.0, 0.2, 0.8, None, 7.0, 0.3).unwrap(), 0.5);
        let t = std::f64::consts::LN_2 / 2.0;
        assert_relative_eq!(rho_theta_gamma(2.0, 1.0, 1.0, 0.2, 0.8, Some(1.0), t, 0.1).unwrap(), 0.75, epsilon = 1e-15);
        assert!(matches!(
            rho_theta_gamma(2.0, 0.5, 1.0, 0.2, 0.8, None, 0.0, 0.0),
            Err(Error::MissingInitialDensity { .. })
        ));
        // subcritical ignores gamma and m0
        assert_relative_eq!(rho_theta_gamma(0.5, 0.5, 1.0, 0.2, 0.8, None, 1.0, 0.25).unwrap(), 0.35);
    }

    #[test]
    fn m_closed_values() {
        assert_relative_eq!(m_closed(0.0, 1.0, 0.9, 0.2, 0.8), 0.9);
        assert_relative_eq!(m_closed(1e3, 1.0, 0.9, 0.2, 0.8), 0.5);
        assert_relative_eq!(m_closed(std::f64::consts::LN_2 / 2.0, 1.0, 1.0, 0.2, 0.8), 0.75, epsilon = 1e-15);
        // monotone toward the midpoint
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        assert!(ts.windows(2).all(|w| m_closed(w[1], 1.0, 1.0, 0.2, 0.8) <= m_closed(w[0], 1.0, 1.0, 0.2, 0.8)));
    }

    #[test]
    fn relaxing_regime_converges_to_equilibrated() {
        let relax = RegimeProfile::new(2.0, 1.0, 1.5, 0.2, 0.8, Some(0.1)).unwrap();
        let eq = RegimeProfile::new(2.0, 3.0, 1.5, 0.2, 0.8, None).unwrap();
        assert!((relax.eval(40.0, 0.4) - eq.eval(40.0, 0.4)).abs() < 1e-15);
    }

    #[test]
    fn equal_reservoirs_collapse_every_regime() {
        let rho = 0.37;
        for (theta, gamma) in [(0.0, 0.0), (0.5, 2.0), (1.0, 0.3), (2.0, 0.5), (2.0, 1.0), (2.0, 4.0)] {
            for t in [0.0, 0.2, 3.0] {
                for u in [0.0, 0.5, 1.0] {
                    let v = rho_theta_gamma(theta, gamma, 1.7, rho, rho, Some(rho), t, u).unwrap();
                    assert_relative_eq!(v, rho, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn exact_profile_examples() {
        let prof = exact_stationary_profile_raw(4, 1.0, 0.0, 0.0, 1.0).unwrap();
        for (a, b) in prof.iter().zip([0.25, 0.5, 0.75]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(exact_stationary_profile_raw(4, 1.0, 0.0, -0.1, 1.0).is_err());
        let p = Params::new(2, 1.0, 0.0, 0.3, 0.7, 0.0).unwrap();
        assert_eq!(exact_stationary_profile(&p).unwrap(), vec![0.5]);
        let p = Params::new(17, 0.7, 1.3, 0.45, 0.45, 0.0).unwrap();
        assert!(exact_stationary_profile(&p).unwrap().iter().all(|v| (v - 0.45).abs() < 1e-14));
    }

    #[test]
    fn exact_profile_matches_closed_form_and_is_affine() {
        for n in [3, 4, 7, 50, 1000] {
            for theta in [0.0, 0.5, 1.0, 2.0] {
                for c in [0.5, 1.0, 2.0] {
                    let p = Params::new(n, c, theta, 0.3, 0.7, 0.0).unwrap();
                    let prof = exact_stationary_profile(&p).unwrap();
                    let oracle = closed_form_profile(&p);
                    for (a, b) in prof.iter().zip(&oracle) {
                        assert!((a - b).abs() < 1e-12, "N={n} theta={theta} c={c}");
                    }
                    // second differences vanish
                    for w in prof.windows(3) {
                        assert!((w[0] - 2.0 * w[1] + w[2]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_profile_approaches_rho_bar() {
        let n = 10_000;
        for (theta, c) in [(0.0, 1.0), (1.0, 2.0), (2.0, 1.0)] {
            let p = Params::new(n, c, theta, 0.2, 0.8, 0.0).unwrap();
            let prof = exact_stationary_profile(&p).unwrap();
            for u in [0.1, 0.5, 0.9] {
                let x = (u * n as f64).ceil() as usize;
                let err = (prof[x - 1] - rho_bar(theta, c, 0.2, 0.8, u)).abs();
                assert!(err < 1e-3, "theta={theta} u={u} err={err}");
            }
        }
        // inside the Dirichlet regime the boundary layer closes like N^{theta-1}
        let errs: Vec<f64> = [1_000, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let p = Params::new(n, 1.0, 0.5, 0.2, 0.8, 0.0).unwrap();
                (exact_stationary_profile(&p).unwrap()[n / 10 - 1] - rho_bar(0.5, 1.0, 0.2, 0.8, 0.1)).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] > 2.5 && errs[1] / errs[2] > 2.5, "{errs:?}");
    }

    #[test]
    fn brute_force_two_state_chain() {
        let p = Params::new(2, 1.0, 0.0, 0.3, 0.7, 0.0).unwrap();
        let law = brute_force_stationary(&p).unwrap();
        assert_relative_eq!(law.marginals[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn brute_force_equal_reservoirs_is_product() {
        let p = Params::new(3, 1.0, 1.0, 0.4, 0.4, 0.0).unwrap();
        let law = brute_force_stationary(&p).unwrap();
        let prod = product_bernoulli(3, 0.4);
        assert!(total_variation(&law.probabilities, &prod) < 1e-14);
    }

    #[test]
    fn brute_force_marginals_match_tridiagonal() {
        let p = Params::new(3, 1.0, 0.0, 0.3, 0.7, 0.0).unwrap();
        let law = brute_force_stationary(&p).unwrap();
        let prof = exact_stationary_profile(&p).unwrap();
        for (a, b) in law.marginals.iter().zip(&prof) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_refuses_large_n() {
        let p = Params::new(13, 1.0, 0.0, 0.3, 0.7, 0.0).unwrap();
        assert!(matches!(brute_force_stationary(&p), Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn generator_rows_sum_to_zero() {
        let p = Params::new(6, 0.8, 0.5, 0.3, 0.6, 0.0).unwrap();
        let q = generator_matrix(&p).unwrap();
        for s in 0..q.nrows() {
            assert!(q.row(s).sum().abs() < 1e-14);
        }
    }
}
