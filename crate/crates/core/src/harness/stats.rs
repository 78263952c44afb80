use serde::{Deserialize, Serialize};

/// z for a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Replica statistics with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Stats {
    /// Samples are summed in sorted order, so the result does not depend
    /// on replica order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let xs = &sorted[..];
        let count = xs.len();
        let mean = if count == 0 { f64::NAN } else { xs.iter().sum::<f64>() / count as f64 };
        let std = if count < 2 {
            f64::NAN
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        };
        let half = Z95 * std / (count as f64).sqrt();
        Self { count, mean, std, ci_low: mean - half, ci_high: mean + half }
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}

/// Least-squares fit of `log(value)` against `log(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    pub points: usize,
}

/// Nonpositive values cannot enter a log-log fit; they are dropped with a
/// warning. Needs at least two usable points.
pub fn fit_scaling(points: &[(f64, f64)]) -> crate::Result<ScalingFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, v)| {
            let ok = n > 0.0 && v > 0.0 && v.is_finite();
            if !ok {
                log::warn!("excluding ({n}, {v}) from the log-log fit");
            }
            ok
        })
        .map(|&(n, v)| (n.ln(), v.ln()))
        .collect();
    if usable.len() < 2 {
        return Err(crate::Error::InvalidSpec(format!("log-log fit needs two positive points, got {}", usable.len())));
    }
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(crate::Error::InvalidSpec("log-log fit needs two distinct N".into()));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(ScalingFit { slope, intercept, residual, points: usable.len() })
}
