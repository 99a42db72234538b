//! The displacement law: a standardized one-sided Weibull.
//!
//! `B` is base-Weibull with `P[B > b] = exp(-lambda b^r)`; the displacement is
//! `X = (B - mu)/sigma`, centred with unit variance. Its upper tail is exactly
//! `exp(-lambda (sigma x + mu)^r)`, a stretched-exponential law with tail
//! constant 1, and every moment is finite.

use crate::quad::{self, QuadError};
use crate::rng::Stream;
use crate::tail::{TailError, TailFunction, TailSpec, TailVariant};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DisplacementError {
    #[error("base spec must be PureWeibull, got {0:?}")]
    NotPureWeibull(TailVariant),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("moment integral overflowed (exponent {0:.3e})")]
    Overflow(f64),
}

/// Standardized Weibull displacement distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdWeibullDisplacement {
    pub spec: TailSpec,
    /// Mean of the base Weibull: lambda^{-1/r} Gamma(1 + 1/r).
    pub mu: f64,
    /// Standard deviation of the base Weibull.
    pub sigma: f64,
}

impl StdWeibullDisplacement {
    pub fn new(lambda: f64, r: f64) -> Result<Self, DisplacementError> {
        let spec = TailSpec::pure_weibull(lambda, r)?;
        let s = lambda.powf(-1.0 / r);
        let m1 = s * gamma(1.0 + 1.0 / r);
        let m2 = s * s * gamma(1.0 + 2.0 / r);
        Ok(StdWeibullDisplacement {
            spec,
            mu: m1,
            sigma: (m2 - m1 * m1).sqrt(),
        })
    }

    pub fn from_spec(spec: TailSpec) -> Result<Self, DisplacementError> {
        if spec.variant != TailVariant::PureWeibull {
            return Err(DisplacementError::NotPureWeibull(spec.variant));
        }
        Self::new(spec.lambda, spec.r)
    }

    /// Essential infimum of X: `-mu/sigma`.
    #[inline]
    pub fn lower_edge(&self) -> f64 {
        -self.mu / self.sigma
    }

    /// Exact survival function `P[X > x]`.
    #[inline]
    pub fn survival(&self, x: f64) -> f64 {
        let t = self.sigma * x + self.mu;
        if t <= 0.0 {
            1.0
        } else {
            (-self.spec.lambda * t.powf(self.spec.r)).exp()
        }
    }

    /// `log P[X > x]`, exact in log-space.
    #[inline]
    pub fn log_survival(&self, x: f64) -> f64 {
        let t = self.sigma * x + self.mu;
        if t <= 0.0 {
            0.0
        } else {
            -self.spec.lambda * t.powf(self.spec.r)
        }
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// x with `P[X > x] = p`, for p in (0, 1].
    pub fn quantile_survival(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p <= 1.0);
        let b = ((-p.ln()) / self.spec.lambda).powf(1.0 / self.spec.r);
        (b - self.mu) / self.sigma
    }

    /// Density of X (diverges at the lower edge for r < 1).
    pub fn density(&self, x: f64) -> f64 {
        let t = self.sigma * x + self.mu;
        if t <= 0.0 {
            0.0
        } else {
            let spec = &self.spec;
            self.sigma
                * spec.lambda
                * spec.r
                * t.powf(spec.r - 1.0)
                * (-spec.lambda * t.powf(spec.r)).exp()
        }
    }

    /// One draw by inverse transform: `B = ((-ln U)/lambda)^{1/r}`.
    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let u = stream.next_f64();
        let b = ((-u.ln()) / self.spec.lambda).powf(1.0 / self.spec.r);
        (b - self.mu) / self.sigma
    }

    /// Raw moment `E[X^j]`.
    pub fn raw_moment(&self, j: u32) -> f64 {
        let mut acc = 0.0;
        for i in 0..=j {
            let eb = self.spec.lambda.powf(-(i as f64) / self.spec.r)
                * gamma(1.0 + i as f64 / self.spec.r);
            acc += binomial(j, i) * eb * (-self.mu).powi((j - i) as i32);
        }
        acc / self.sigma.powi(j as i32)
    }

    /// `E[e^{hX} 1{A < X <= B}]` by the integration-by-parts identity
    /// `int_A^B psi'(s) P[X>s] ds + psi(A)P[X>A] - psi(B)P[X>B]` with
    /// `psi(s) = e^{hs}`, quadrature at relative accuracy 1e-8.
    ///
    /// Returns 0 for an empty interval (A >= B or B below the support).
    pub fn truncated_exp_moment(
        &self,
        h: f64,
        a: f64,
        b: f64,
    ) -> Result<f64, DisplacementError> {
        assert!(h >= 0.0, "h must be nonnegative");
        self.weighted_truncated_moment(0, h, a, b, 1e-9)
    }

    /// `E[X^i e^{sX} 1{A < X <= B}]` for i in {0,1,2}; same identity with
    /// `psi(x) = x^i e^{sx}`. Used by the truncated cumulant generating
    /// function, hence the tight default tolerance there.
    pub fn weighted_truncated_moment(
        &self,
        i: u32,
        s: f64,
        a: f64,
        b: f64,
        rel_tol: f64,
    ) -> Result<f64, DisplacementError> {
        assert!(i <= 2);
        if a >= b {
            return Ok(0.0);
        }
        let edge = self.lower_edge();
        if b <= edge {
            return Ok(0.0);
        }
        let psi = |x: f64| -> f64 { x.powi(i as i32) * (s * x).exp() };
        // exponent guard: the integrand and boundary terms carry exp(sx - R(x))
        let max_exp = {
            let cand = self.sx_minus_r_max(s, a.max(edge), b);
            (s * b).max(cand)
        };
        if max_exp > 700.0 {
            return Err(DisplacementError::Overflow(max_exp));
        }
        // on (A, edge] the survival is exactly 1 and int psi' = psi(edge)-psi(A),
        // which cancels the psi(A) boundary term; with c = max(A, edge) both
        // cases collapse to
        //   E = psi(c) P[X > c] + int_c^B psi'(t) P[X > t] dt - psi(B) P[X > B]
        let c = a.max(edge);
        let integrand = |t: f64| -> f64 {
            let w = (s * t + self.log_survival(t)).exp();
            let dpsi = if i == 0 {
                s
            } else {
                i as f64 * t.powi(i as i32 - 1) + s * t.powi(i as i32)
            };
            dpsi * w
        };
        let q = if s == 0.0 && i == 0 {
            // psi' == 0; the identity reduces to surv(A) - surv(B) exactly
            quad::Quad {
                value: 0.0,
                err_estimate: 0.0,
                evals: 0,
            }
        } else {
            self.integrate_split(integrand, c, b, s, rel_tol)?
        };
        Ok(psi(c) * self.survival(c) + q.value - psi(b) * self.survival(b))
    }

    /// Adaptive quadrature with a split at the critical point of `sx - R(x)`.
    fn integrate_split<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        s: f64,
        rel_tol: f64,
    ) -> Result<quad::Quad, DisplacementError> {
        // upper cut where the integrand is below absolute noise
        let mut cut = hi;
        if self.log_survival(hi) + s * hi < -750.0 {
            // find where exponent ~ -750 by bisection
            let mut l = lo;
            let mut h = hi;
            for _ in 0..200 {
                let m = 0.5 * (l + h);
                if self.log_survival(m) + s * m < -750.0 {
                    h = m;
                } else {
                    l = m;
                }
            }
            cut = h;
        }
        let crit = self.critical_point(s).clamp(lo, cut);
        let mut total = quad::Quad {
            value: 0.0,
            err_estimate: 0.0,
            evals: 0,
        };
        for (x0, x1) in [(lo, crit), (crit, cut)] {
            if x1 > x0 {
                let q = quad::integrate(&f, x0, x1, rel_tol, 1e-305)?;
                total.value += q.value;
                total.err_estimate += q.err_estimate;
                total.evals += q.evals;
            }
        }
        Ok(total)
    }

    /// Stationary point of `sx - R(x)`: where `R'(x) = s`.
    fn critical_point(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.lower_edge();
        }
        let spec = &self.spec;
        let t = (spec.lambda * spec.r * self.sigma / s).powf(1.0 / (1.0 - spec.r));
        (t - self.mu) / self.sigma
    }

    fn sx_minus_r_max(&self, s: f64, lo: f64, hi: f64) -> f64 {
        let at = |x: f64| s * x + self.log_survival(x);
        at(lo).max(at(hi)).max(at(self.critical_point(s).clamp(lo, hi)))
    }

    /// The tail of X itself, `R(x) = lambda (sigma x + mu)^r`, as a
    /// [`TailFunction`] for the centring/scaling machinery.
    pub fn induced_tail(&self) -> StdTail {
        StdTail {
            lambda: self.spec.lambda,
            r: self.spec.r,
            mu: self.mu,
            sigma: self.sigma,
        }
    }
}

/// Tail function induced by standardization: `R(x) = lambda (sigma x + mu)^r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdTail {
    pub lambda: f64,
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl TailFunction for StdTail {
    fn index(&self) -> f64 {
        self.r
    }

    fn tail_constant(&self) -> f64 {
        1.0
    }

    fn domain_lo(&self) -> f64 {
        -self.mu / self.sigma
    }

    fn eval(&self, x: f64, order: u8) -> Result<f64, TailError> {
        let t = self.sigma * x + self.mu;
        if t <= 0.0 {
            return Err(TailError::OutOfDomain {
                x,
                edge: self.domain_lo(),
            });
        }
        let (lam, r, s) = (self.lambda, self.r, self.sigma);
        Ok(match order {
            0 => lam * t.powf(r),
            1 => lam * r * s * t.powf(r - 1.0),
            _ => lam * r * (r - 1.0) * s * s * t.powf(r - 2.0),
        })
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}
