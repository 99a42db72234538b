//! Cumulants and the truncated cumulant generating function.
//!
//! `K(x) = sum_{j=2}^kappa k_j/j! x^j` with `kappa = floor((2-r)/(1-r))`, plus
//! the numerically truncated CGF `K_L(s) = log E[e^{sX} | X <= L]` and the
//! uniform gap `sup_s |K_L^{(i)}(s) - K^{(i)}(s)|` that quantifies how well the
//! polynomial stands in for the truncated law.

use crate::displacement::{DisplacementError, StdWeibullDisplacement};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CumulantError {
    #[error("kappa must be at least 2, got {0}")]
    KappaTooSmall(usize),
    #[error("need moments 1..={kappa}, got {got}")]
    NotEnoughMoments { kappa: usize, got: usize },
    #[error("first moment must vanish for a centred law, got {0}")]
    NotCentred(f64),
    #[error(transparent)]
    Moment(#[from] DisplacementError),
}

/// Cumulants k_1..k_kappa of a standardized law.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantTable {
    /// k[j] is the j-th cumulant; k[0] is unused and zero.
    k: Vec<f64>,
}

/// `kappa = floor((2-r)/(1-r))`.
pub fn kappa_for(r: f64) -> usize {
    ((2.0 - r) / (1.0 - r)).floor() as usize
}

fn binom(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl CumulantTable {
    /// Build k_1..k_kappa from raw moments E[X^j] by the recursion
    /// `k_j = E[X^j] - sum_{i=1}^{j-1} C(j-1, i) k_{j-i} E[X^i]`.
    ///
    /// `moments[j-1]` is E[X^j]; requires a centred input (E[X] = 0).
    pub fn from_moments(moments: &[f64], kappa: usize) -> Result<Self, CumulantError> {
        if kappa < 2 {
            return Err(CumulantError::KappaTooSmall(kappa));
        }
        if moments.len() < kappa {
            return Err(CumulantError::NotEnoughMoments {
                kappa,
                got: moments.len(),
            });
        }
        if moments[0].abs() > 1e-9 {
            return Err(CumulantError::NotCentred(moments[0]));
        }
        let m = |j: usize| moments[j - 1];
        let mut k = vec![0.0; kappa + 1];
        for j in 1..=kappa {
            let mut v = m(j);
            for i in 1..j {
                v -= binom(j - 1, i) * k[j - i] * m(i);
            }
            k[j] = v;
        }
        Ok(CumulantTable { k })
    }

    /// Table for a displacement law at its spec-determined kappa.
    pub fn for_displacement(dist: &StdWeibullDisplacement) -> Result<Self, CumulantError> {
        let kappa = kappa_for(dist.spec.r);
        let moments: Vec<f64> = (1..=kappa).map(|j| dist.raw_moment(j as u32)).collect();
        Self::from_moments(&moments, kappa)
    }

    /// Table with prescribed cumulants k_2, k_3, ... (k_1 = 0).
    pub fn from_cumulants(ks: &[f64]) -> Self {
        let mut k = vec![0.0; ks.len() + 2];
        for (i, &v) in ks.iter().enumerate() {
            k[i + 2] = v;
        }
        CumulantTable { k }
    }

    pub fn kappa(&self) -> usize {
        self.k.len() - 1
    }

    pub fn cumulant(&self, j: usize) -> f64 {
        self.k[j]
    }

    /// Reconstruct raw moments from the cumulants (inverse recursion).
    pub fn to_moments(&self) -> Vec<f64> {
        let kappa = self.kappa();
        let mut m = vec![0.0; kappa + 1];
        m[0] = 1.0;
        for j in 1..=kappa {
            let mut v = self.k[j];
            for i in 1..j {
                v += binom(j - 1, i) * self.k[j - i] * m[i];
            }
            m[j] = v;
        }
        m.remove(0);
        m
    }

    /// `K(s)`, `K'(s)` or `K''(s)`.
    pub fn k_eval(&self, s: f64, order: u8) -> f64 {
        let mut v = 0.0;
        for j in 2..=self.kappa() {
            v += match order {
                0 => self.k[j] / factorial(j) * s.powi(j as i32),
                1 => self.k[j] / factorial(j - 1) * s.powi(j as i32 - 1),
                _ => {
                    if j >= 2 {
                        self.k[j] / factorial(j - 2) * s.powi(j as i32 - 2)
                    } else {
                        0.0
                    }
                }
            };
        }
        v
    }
}

/// `K_L(s) = log E[exp(sX) | X <= L]` and its first two derivatives, from
/// ratios of truncated weighted moments. Relative quadrature accuracy 1e-12
/// (the Lemma-gap trend tests resolve gaps below 1e-8).
pub fn k_truncated(
    dist: &StdWeibullDisplacement,
    l: f64,
    s: f64,
    order: u8,
) -> Result<f64, CumulantError> {
    assert!(s >= 0.0);
    assert!(order <= 2);
    let edge = dist.lower_edge();
    let tol = 1e-12;
    let f0 = dist.weighted_truncated_moment(0, s, edge - 1.0, l, tol)?;
    match order {
        // K_L(s) = log E[e^{sX} 1{X<=L}] - log P[X <= L]
        0 => Ok(f0.ln() - dist.cdf(l).ln()),
        1 => {
            let f1 = dist.weighted_truncated_moment(1, s, edge - 1.0, l, tol)?;
            Ok(f1 / f0)
        }
        _ => {
            let f1 = dist.weighted_truncated_moment(1, s, edge - 1.0, l, tol)?;
            let f2 = dist.weighted_truncated_moment(2, s, edge - 1.0, l, tol)?;
            Ok(f2 / f0 - (f1 / f0) * (f1 / f0))
        }
    }
}

/// Chebyshev-spaced points on [0, hi] (dense near both ends).
pub fn chebyshev_points(hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            0.5 * hi * (1.0 - t)
        })
        .collect()
}

/// `sup_{0<=s<=s_hi} |K_L^{(order)}(s) - K^{(order)}(s)|` over a 64-point
/// Chebyshev grid.
pub fn lemma_gap(
    dist: &StdWeibullDisplacement,
    table: &CumulantTable,
    l: f64,
    s_hi: f64,
    order: u8,
) -> Result<f64, CumulantError> {
    let mut worst = 0.0f64;
    for s in chebyshev_points(s_hi, 64) {
        let g = (k_truncated(dist, l, s, order)? - table.k_eval(s, order)).abs();
        worst = worst.max(g);
    }
    Ok(worst)
}
