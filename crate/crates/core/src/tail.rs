//! Stretched-exponential tail specifications.
//!
//! A [`TailSpec`] fixes the function `R` in a survival law of the form
//! `a(x) e^{-R(x)}` together with its index `r`, the limiting tail constant
//! `a` and the lower domain edge. Everything downstream (centring sequences,
//! rate functions, estimators) consumes tails through the [`TailFunction`]
//! trait so that both explicit specs and tails induced by standardized
//! distributions plug in uniformly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TailError {
    #[error("tail index r must lie in (0,1), got {0}")]
    BadIndex(f64),
    #[error("scale lambda must be positive, got {0}")]
    BadScale(f64),
    #[error("tail constant a must be positive, got {0}")]
    BadConstant(f64),
    #[error("x0 must be >= 0 and finite, got {0}")]
    BadEdge(f64),
    #[error("argument {x} is at or below the domain edge {edge}")]
    OutOfDomain { x: f64, edge: f64 },
    #[error("R(x) x^-d not eventually decreasing for any probed d in ({lo}, 1)")]
    NotDominatedVarying { lo: f64 },
    #[error("extra regular-variation pinch for r > 2/3 failed (eps {eps})")]
    PinchFailed { eps: f64 },
}

/// Functional form of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailVariant {
    /// `R(x) = lambda x^r`
    PureWeibull,
    /// `R(x) = lambda x^r (log(e + x))^p`
    WeibullLog { p: f64 },
}

/// Analytic tail triple (R, R', R'') with its index and tail constant.
pub trait TailFunction {
    /// Tail index `r` in (0,1).
    fn index(&self) -> f64;
    /// Limiting tail constant `a`.
    fn tail_constant(&self) -> f64;
    /// Lower edge of the domain of `R`.
    fn domain_lo(&self) -> f64;
    /// `R`, `R'` or `R''` at `x`; error below the domain edge.
    fn eval(&self, x: f64, order: u8) -> Result<f64, TailError>;

    fn r0(&self, x: f64) -> Result<f64, TailError> {
        self.eval(x, 0)
    }
    fn r1(&self, x: f64) -> Result<f64, TailError> {
        self.eval(x, 1)
    }
}

/// A concrete stretched-exponential tail specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub r: f64,
    pub lambda: f64,
    /// Limiting value of a(x); 1 for the laws constructed in this crate.
    pub a: f64,
    /// Lower domain edge; R is evaluated on (x0, infinity).
    pub x0: f64,
    pub variant: TailVariant,
}

impl TailSpec {
    pub fn pure_weibull(lambda: f64, r: f64) -> Result<Self, TailError> {
        TailSpec {
            r,
            lambda,
            a: 1.0,
            x0: 0.0,
            variant: TailVariant::PureWeibull,
        }
        .validated()
    }

    pub fn weibull_log(lambda: f64, r: f64, p: f64) -> Result<Self, TailError> {
        TailSpec {
            r,
            lambda,
            a: 1.0,
            x0: 0.0,
            variant: TailVariant::WeibullLog { p },
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, TailError> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(TailError::BadIndex(self.r));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(TailError::BadScale(self.lambda));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(TailError::BadConstant(self.a));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(TailError::BadEdge(self.x0));
        }
        self.check_variation()?;
        Ok(self)
    }

    /// Grid checks of the regular-variation side conditions on a log-spaced
    /// grid up to 1e8: R(x) x^-d eventually decreasing for some d in (r, 1),
    /// and for r > 2/3 the (1/2+eps, 1-eps) pinch.
    fn check_variation(&self) -> Result<(), TailError> {
        let grid: Vec<f64> = log_grid(self.x0.max(0.5) + 0.5, 1e8, 200);
        let probe_decreasing = |d: f64| -> bool {
            let mut prev = f64::INFINITY;
            // require monotone decrease on the tail half of the grid
            for &x in &grid[grid.len() / 2..] {
                let v = self.eval(x, 0).unwrap() * x.powf(-d);
                if v > prev * (1.0 + 1e-12) {
                    return false;
                }
                prev = v;
            }
            true
        };
        let mut ok = false;
        let mut d = self.r + 0.02;
        while d < 1.0 {
            if probe_decreasing(d) {
                ok = true;
                break;
            }
            d += 0.05;
        }
        if !ok {
            return Err(TailError::NotDominatedVarying { lo: self.r });
        }
        if self.r > 2.0 / 3.0 {
            let mut pinch_ok = false;
            for &eps in &[0.01, 0.02, 0.05] {
                let incr = {
                    let mut prev = -f64::INFINITY;
                    grid[grid.len() / 2..].iter().all(|&x| {
                        let v = self.eval(x, 0).unwrap() * x.powf(-0.5 - eps);
                        let good = v >= prev * (1.0 - 1e-12);
                        prev = v;
                        good
                    })
                };
                let decr = {
                    let mut prev = f64::INFINITY;
                    grid[grid.len() / 2..].iter().all(|&x| {
                        let v = self.eval(x, 0).unwrap() * x.powf(-1.0 + eps);
                        let good = v <= prev * (1.0 + 1e-12);
                        prev = v;
                        good
                    })
                };
                if incr && decr {
                    pinch_ok = true;
                    break;
                }
            }
            if !pinch_ok {
                return Err(TailError::PinchFailed { eps: 0.05 });
            }
        }
        Ok(())
    }
}

impl TailFunction for TailSpec {
    fn index(&self) -> f64 {
        self.r
    }

    fn tail_constant(&self) -> f64 {
        self.a
    }

    fn domain_lo(&self) -> f64 {
        self.x0
    }

    fn eval(&self, x: f64, order: u8) -> Result<f64, TailError> {
        if x <= self.x0 {
            return Err(TailError::OutOfDomain { x, edge: self.x0 });
        }
        let (lam, r) = (self.lambda, self.r);
        Ok(match self.variant {
            TailVariant::PureWeibull => match order {
                0 => lam * x.powf(r),
                1 => lam * r * x.powf(r - 1.0),
                _ => lam * r * (r - 1.0) * x.powf(r - 2.0),
            },
            TailVariant::WeibullLog { p } => {
                let e = std::f64::consts::E;
                let l = (e + x).ln();
                match order {
                    0 => lam * x.powf(r) * l.powf(p),
                    1 => {
                        lam * (r * x.powf(r - 1.0) * l.powf(p)
                            + x.powf(r) * p * l.powf(p - 1.0) / (e + x))
                    }
                    _ => {
                        lam * (r * (r - 1.0) * x.powf(r - 2.0) * l.powf(p)
                            + 2.0 * r * p * x.powf(r - 1.0) * l.powf(p - 1.0) / (e + x)
                            + x.powf(r) * p * l.powf(p - 2.0) * ((p - 1.0) - l)
                                / ((e + x) * (e + x)))
                    }
                }
            }
        })
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
