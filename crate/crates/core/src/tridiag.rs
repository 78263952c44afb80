//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Solve `A x = d` where `A` has sub-diagonal `lower` (`lower[0]` unused),
/// diagonal `diag` and super-diagonal `upper` (`upper[n-1]` unused).
///
/// No pivoting; intended for the diagonally dominant systems produced by
/// the stationary profile equations and implicit heat steps.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::InvalidGrid(format!(
            "tridiagonal bands have lengths {}/{}/{}/{}",
            lower.len(),
            n,
            upper.len(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    check_pivot(denom, 0)?;
    c_prime[0] = upper[0] / denom;
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c_prime[i - 1];
        check_pivot(denom, i)?;
        c_prime[i] = upper[i] / denom;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Ok(x)
}

fn check_pivot(p: f64, row: usize) -> Result<()> {
    if p == 0.0 || !p.is_finite() {
        Err(Error::InvalidGrid(format!("zero or non-finite pivot at row {row}")))
    } else {
        Ok(())
    }
}

/// Pre-factored constant tridiagonal operator for repeated solves.
#[derive(Debug, Clone)]
pub struct Factored {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl Factored {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(Error::InvalidGrid("inconsistent tridiagonal bands".into()));
        }
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        for i in 0..n {
            let denom = if i == 0 { diag[0] } else { diag[i] - lower[i] * c_prime[i - 1] };
            check_pivot(denom, i)?;
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = upper[i] * inv_denom[i];
        }
        Ok(Self { lower: lower.to_vec(), c_prime, inv_denom })
    }

    /// Overwrite `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.c_prime.len();
        assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}
