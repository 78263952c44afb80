use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named test functions `G : [0,1] -> R`.
///
/// String forms: `1`, `const:<v>`, `u`, `u2`, `sin:<k>`, `cos:<k>`,
/// `bump:<center>:<width>`. A bare `sin`/`cos` means `k = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestFunction {
    Constant(f64),
    Identity,
    Square,
    /// `sin(k pi u)`
    Sin(u32),
    /// `cos(k pi u)`
    Cos(u32),
    /// `exp(1 - 1/(1 - s^2))` for `|s| < 1`, `s = (u - center)/width`; peak 1.
    Bump { center: f64, width: f64 },
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            TestFunction::Constant(v) => v,
            TestFunction::Identity => u,
            TestFunction::Square => u * u,
            TestFunction::Sin(k) => (k as f64 * PI * u).sin(),
            TestFunction::Cos(k) => (k as f64 * PI * u).cos(),
            TestFunction::Bump { center, width } => {
                let s = (u - center) / width;
                if s.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `max_{[0,1]} |G|`.
    pub fn max_abs(&self) -> f64 {
        match *self {
            TestFunction::Constant(v) => v.abs(),
            TestFunction::Identity | TestFunction::Square => 1.0,
            TestFunction::Sin(0) => 0.0,
            TestFunction::Sin(_) | TestFunction::Cos(_) => 1.0,
            TestFunction::Bump { center, .. } => {
                if (0.0..=1.0).contains(&center) {
                    1.0
                } else {
                    let nearest = center.clamp(0.0, 1.0);
                    self.eval(nearest)
                }
            }
        }
    }

    /// `(int_0^1 G, int_0^1 u G)`.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            TestFunction::Constant(v) => (v, v / 2.0),
            TestFunction::Identity => (0.5, 1.0 / 3.0),
            TestFunction::Square => (1.0 / 3.0, 0.25),
            _ => (simpson(|u| self.eval(u), 0.0, 1.0, 1 << 14), simpson(|u| u * self.eval(u), 0.0, 1.0, 1 << 14)),
        }
    }

    fn validate(self) -> Result<Self> {
        let ok = match self {
            TestFunction::Constant(v) => v.is_finite(),
            TestFunction::Bump { center, width } => center.is_finite() && width > 0.0 && width.is_finite(),
            _ => true,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::UnknownTestFunction(self.to_string()))
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Constant(v) if *v == 1.0 => write!(f, "1"),
            TestFunction::Constant(v) => write!(f, "const:{v}"),
            TestFunction::Identity => write!(f, "u"),
            TestFunction::Square => write!(f, "u2"),
            TestFunction::Sin(k) => write!(f, "sin:{k}"),
            TestFunction::Cos(k) => write!(f, "cos:{k}"),
            TestFunction::Bump { center, width } => write!(f, "bump:{center}:{width}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownTestFunction(s.to_string());
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let int = |v: &str| v.trim().parse::<u32>().map_err(|_| bad());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let g = match parts.as_slice() {
            ["1"] => TestFunction::Constant(1.0),
            ["const", v] => TestFunction::Constant(num(v)?),
            ["u"] => TestFunction::Identity,
            ["u2"] => TestFunction::Square,
            ["sin"] => TestFunction::Sin(1),
            ["cos"] => TestFunction::Cos(1),
            ["sin", k] => TestFunction::Sin(int(k)?),
            ["cos", k] => TestFunction::Cos(int(k)?),
            ["bump", c, w] => TestFunction::Bump { center: num(c)?, width: num(w)? },
            _ => return Err(bad()),
        };
        g.validate().map_err(|_| bad())
    }
}

impl TryFrom<String> for TestFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestFunction> for String {
    fn from(g: TestFunction) -> String {
        g.to_string()
    }
}

/// Composite Simpson rule with `m` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = (m.max(2) + 1) & !1;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for j in 1..m {
        s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(a + j as f64 * h);
    }
    s * h / 3.0
}
