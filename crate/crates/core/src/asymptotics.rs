//! Centring/scaling sequences and the large-deviation rate function.
//!
//! For a tail `R` and an offspring mean `m`: `d_n` solves `R(d_n) = n log m`,
//! `a_n = 1/R'(d_n)`, and the rate of `P[S_n > x]` on the deviation window is
//! `I(x) = inf_{s in [0,1]} { R(x - n K'(s)) + n (s K'(s) - K(s)) }` whose
//! interior stationary point satisfies `s* = R'(x - n K'(s*))`. The centring
//! shift `tau_n` is the smallest root of `Psi_n(tau) = R(d_n)` with
//! `Psi_n(z) = I(d_n + z)`.
//!
//! At small `n` the infimum can migrate to the feasibility boundary (where
//! `x - n K'(s)` hits the domain edge of `R`) and the fixed point may not
//! exist; results carry both the fixed-point and the grid values so callers
//! can see which branch was taken.

use crate::cumulants::CumulantTable;
use crate::tail::{TailError, TailFunction};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("root bracketing failed: R does not reach {target} on ({lo}, {hi})")]
    BracketFailure { target: f64, lo: f64, hi: f64 },
    #[error("fixed point did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u32, residual: f64 },
    #[error("fixed-point iterate left the tail domain at s = {s}")]
    DomainEscape { s: f64 },
    #[error("Psi_n(0) = {psi0} exceeds R(d_n) = {r}; tau_n undefined at n = {n}")]
    PsiAboveR { psi0: f64, r: f64, n: u32 },
    #[error(transparent)]
    Tail(#[from] TailError),
}

/// `delta` in `(2^-r, 1)` scaling the big-jump threshold `delta_n = delta d_n`.
pub fn delta_range(r: f64) -> (f64, f64) {
    (2f64.powf(-r), 1.0)
}

/// Smallest solution of `R(x) = n log m`, by bisection plus Newton polish.
pub fn solve_d_n<T: TailFunction>(tail: &T, n: u32, m: f64) -> Result<f64, AsymptoticsError> {
    assert!(n >= 1, "n must be >= 1");
    assert!(m > 1.0, "offspring mean must exceed 1");
    let target = n as f64 * m.ln();
    let edge = tail.domain_lo();
    let mut lo = edge + 1e-300;
    // find a strictly-inside point with R < target
    let mut probe = edge + 1.0;
    for _ in 0..2000 {
        if tail.eval(probe, 0)? < target {
            lo = probe;
            break;
        }
        probe = edge + (probe - edge) / 2.0;
    }
    let mut hi = lo.max(edge + 1.0);
    let mut ok = false;
    for _ in 0..2000 {
        if tail.eval(hi, 0)? >= target {
            ok = true;
            break;
        }
        hi = edge + (hi - edge) * 2.0;
        if hi > 1e300 {
            break;
        }
    }
    if !ok {
        return Err(AsymptoticsError::BracketFailure { target, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail.eval(mid, 0)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let f = tail.eval(x, 0)? - target;
        let fp = tail.eval(x, 1)?;
        let step = f / fp;
        let nx = x - step;
        if nx > edge {
            x = nx;
        }
        if step.abs() <= 1e-13 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Fixed-point solution of `s = R'(x - n K'(s))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SStar {
    pub s: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// Damped fixed-point iteration `s <- (1-w) s + w R'(x - n K'(s))`, w = 1/2,
/// clamped to [0, 1], stopping at residual < 1e-12.
pub fn solve_s_star<T: TailFunction>(
    tail: &T,
    table: &CumulantTable,
    x: f64,
    n: u32,
) -> Result<SStar, AsymptoticsError> {
    if n == 0 {
        // the k = 0 sum convention: the typical part vanishes
        return Ok(SStar {
            s: tail.eval(x, 1)?,
            residual: 0.0,
            iterations: 0,
        });
    }
    let nf = n as f64;
    let edge = tail.domain_lo();
    let start = match tail.eval(x, 1) {
        Ok(v) => v.min(1.0),
        Err(_) => return Err(AsymptoticsError::DomainEscape { s: 0.0 }),
    };
    let mut s = start;
    let omega = 0.5;
    let max_iter = 10_000u32;
    for it in 0..max_iter {
        let arg = x - nf * table.k_eval(s, 1);
        if arg <= edge {
            return Err(AsymptoticsError::DomainEscape { s });
        }
        let f = tail.eval(arg, 1)?.min(1.0).max(0.0);
        let next = ((1.0 - omega) * s + omega * f).clamp(0.0, 1.0);
        if (next - s).abs() < 1e-15 {
            let arg = x - nf * table.k_eval(next, 1);
            if arg <= edge {
                return Err(AsymptoticsError::DomainEscape { s: next });
            }
            let residual = (next - tail.eval(arg, 1)?.min(1.0)).abs();
            if residual < 1e-12 {
                return Ok(SStar {
                    s: next,
                    residual,
                    iterations: it + 1,
                });
            }
            return Err(AsymptoticsError::NoConvergence {
                iterations: it + 1,
                residual,
            });
        }
        s = next;
    }
    let arg = x - nf * table.k_eval(s, 1);
    let residual = if arg > edge {
        (s - tail.eval(arg, 1)?.min(1.0)).abs()
    } else {
        f64::INFINITY
    };
    Err(AsymptoticsError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// The rate objective `R(x - n K'(s)) + n (s K'(s) - K(s))`; infinite when the
/// argument of `R` leaves the domain.
pub fn rate_objective<T: TailFunction>(
    tail: &T,
    table: &CumulantTable,
    x: f64,
    n: u32,
    s: f64,
) -> f64 {
    let nf = n as f64;
    let arg = x - nf * table.k_eval(s, 1);
    match tail.eval(arg, 0) {
        Ok(r) => r + nf * (s * table.k_eval(s, 1) - table.k_eval(s, 0)),
        Err(_) => f64::INFINITY,
    }
}

/// A rate-function evaluation with its self-audit trail.
#[derive(Debug, Clone, Serialize)]
pub struct RateEval {
    /// Global infimum over s in [0,1] (grid + golden refinement).
    pub value: f64,
    /// Minimizing s from the grid route.
    pub s_grid: f64,
    /// Interior fixed point, when the damped iteration converges.
    pub s_star: Option<SStar>,
    /// Objective at the fixed point.
    pub value_at_s_star: Option<f64>,
    /// |fixed point value - grid value| when both exist.
    pub discrepancy: Option<f64>,
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    (m, f(m))
}

/// Evaluate `I(x)` for an `n`-fold sum: both the fixed-point route and a
/// 2048-point grid scan refined by golden section (tolerance 1e-10). The
/// `value` field is the smaller of the two; a nonzero `discrepancy` means the
/// fixed point exists but is not the global minimizer.
pub fn rate_i<T: TailFunction>(
    tail: &T,
    table: &CumulantTable,
    x: f64,
    n: u32,
) -> Result<RateEval, AsymptoticsError> {
    let obj = |s: f64| rate_objective(tail, table, x, n, s);
    let grid_n = 2048usize;
    let mut best = (0.0f64, obj(0.0));
    for i in 1..=grid_n {
        let s = i as f64 / grid_n as f64;
        let v = obj(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    if !best.1.is_finite() {
        return Err(AsymptoticsError::DomainEscape { s: best.0 });
    }
    let h = 1.0 / grid_n as f64;
    let (s_grid, grid_value) = golden_min(
        &obj,
        (best.0 - h).max(0.0),
        (best.0 + h).min(1.0),
        1e-10,
    );
    let fp = solve_s_star(tail, table, x, n).ok();
    let value_at_s_star = fp.as_ref().map(|st| obj(st.s));
    let value = match value_at_s_star {
        Some(v) if v < grid_value => v,
        _ => grid_value,
    };
    let discrepancy = value_at_s_star.map(|v| (v - grid_value).abs());
    Ok(RateEval {
        value,
        s_grid,
        s_star: fp,
        value_at_s_star,
        discrepancy,
    })
}

/// Smallest root of `Psi_n(z) = R(d_n)` where `Psi_n(z) = I(d_n + z)`;
/// monotone bisection, relative tolerance 1e-10.
pub fn solve_tau_n<T: TailFunction>(
    tail: &T,
    table: &CumulantTable,
    n: u32,
    m: f64,
) -> Result<f64, AsymptoticsError> {
    let dn = solve_d_n(tail, n, m)?;
    let r_dn = tail.eval(dn, 0)?;
    let psi = |z: f64| -> Result<f64, AsymptoticsError> {
        Ok(rate_i(tail, table, dn + z, n)?.value)
    };
    let psi0 = psi(0.0)?;
    if psi0 > r_dn * (1.0 + 1e-12) {
        return Err(AsymptoticsError::PsiAboveR {
            psi0,
            r: r_dn,
            n,
        });
    }
    let mut hi = (n as f64) * tail.eval(dn, 1)?.max(1e-12);
    let mut lo = 0.0f64;
    let mut bracketed = false;
    for _ in 0..200 {
        if psi(hi)? > r_dn {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !bracketed {
        return Err(AsymptoticsError::BracketFailure {
            target: r_dn,
            lo,
            hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi(mid)? > r_dn {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-10 * hi.abs().max(1e-6) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the `tau_n` entry of a [`CentringScaling`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TauMethod {
    /// Root of `Psi_n(tau) = R(d_n)`.
    Solved,
    /// Leading-order expansion `n R'(d_n)/2`, used when the solve fails.
    LeadingOrder,
}

/// The per-n bundle of centring, scaling and truncation sequences.
#[derive(Debug, Clone, Serialize)]
pub struct CentringScaling {
    pub n: u32,
    pub m: f64,
    pub delta: f64,
    pub d_n: f64,
    /// Gap scale `1/R'(d_n)`.
    pub a_n: f64,
    pub tau_n: f64,
    pub tau_method: TauMethod,
    /// Full centring `d_n + tau_n`.
    pub b_n: f64,
    /// Big-jump threshold `delta * d_n`.
    pub delta_n: f64,
    pub y_n: f64,
    pub w_n: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

/// Fill every sequence for one `n`. `delta` must lie in `(2^-r, 1)`.
pub fn compute_scaling<T: TailFunction>(
    tail: &T,
    table: &CumulantTable,
    n: u32,
    m: f64,
    delta: f64,
) -> Result<CentringScaling, AsymptoticsError> {
    let r = tail.index();
    let (dlo, dhi) = delta_range(r);
    assert!(
        delta > dlo && delta < dhi,
        "delta {delta} outside ({dlo}, {dhi})"
    );
    let d_n = solve_d_n(tail, n, m)?;
    let r0 = tail.eval(d_n, 0)?;
    let r1 = tail.eval(d_n, 1)?;
    let a_n = 1.0 / r1;
    let nf = n as f64;
    let lead = nf * r1 / 2.0;
    let (tau_n, tau_method) = match solve_tau_n(tail, table, n, m) {
        Ok(t) => (t, TauMethod::Solved),
        Err(_) => (lead, TauMethod::LeadingOrder),
    };
    let ln2 = (nf.ln()) * (nf.ln());
    let (y_n, w_n) = if r <= 2.0 / 3.0 {
        (
            d_n - ln2 * (d_n * d_n + nf * r0 * r0) / (d_n * r0),
            d_n + ln2 / r1,
        )
    } else {
        (d_n - nf * r1, d_n + nf * r1 / 3.0)
    };
    // H window: half-width n^q with q at 90% of the strict exponent bound
    let q = if r > 2.0 / 3.0 {
        0.9 * (2.0 - 1.0 / r)
    } else {
        0.9 * (1.0 / r - 0.5)
    };
    let z_star = nf.powf(q);
    let center = d_n + nf * r1 / 2.0;
    Ok(CentringScaling {
        n,
        m,
        delta,
        d_n,
        a_n,
        tau_n,
        tau_method,
        b_n: d_n + tau_n,
        delta_n: delta * d_n,
        y_n,
        w_n,
        h_lo: center - z_star,
        h_hi: center + z_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::{kappa_for, CumulantTable};
    use crate::displacement::StdWeibullDisplacement;
    use crate::tail::TailSpec;
    use approx::assert_relative_eq;

    fn std_table() -> CumulantTable {
        let d = StdWeibullDisplacement::new(1.0, 0.5).unwrap();
        CumulantTable::for_displacement(&d).unwrap()
    }

    #[test]
    fn d_n_closed_form_pure_weibull() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let d10 = solve_d_n(&t, 10, 2.0).unwrap();
        assert_relative_eq!(d10, (10.0 * 2f64.ln()).powi(2), max_relative = 1e-10);
        let d1 = solve_d_n(&t, 1, 2.0).unwrap();
        assert_relative_eq!(d1, 2f64.ln() * 2f64.ln(), max_relative = 1e-10);
        let t34 = TailSpec::pure_weibull(1.0, 0.75).unwrap();
        let d16 = solve_d_n(&t34, 16, 2.0).unwrap();
        assert_relative_eq!(
            d16,
            (16.0 * 2f64.ln()).powf(4.0 / 3.0),
            max_relative = 1e-10
        );
    }

    #[test]
    fn d_n_monotone_and_regularly_varying() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let mut prev = 0.0;
        for n in [1u32, 2, 5, 10, 100, 1000] {
            let d = solve_d_n(&t, n, 2.0).unwrap();
            assert!(d > prev);
            prev = d;
        }
        // d_{2n}/d_n -> 2^{1/r}
        let n = 1000u32;
        let ratio = solve_d_n(&t, 2 * n, 2.0).unwrap() / solve_d_n(&t, n, 2.0).unwrap();
        assert!((ratio - 4.0).abs() / 4.0 < 0.01, "ratio {ratio}");
        // increasing in 1/lambda
        let t2 = TailSpec::pure_weibull(0.5, 0.5).unwrap();
        assert!(solve_d_n(&t2, 10, 2.0).unwrap() > solve_d_n(&t, 10, 2.0).unwrap());
    }

    #[test]
    fn a_n_times_r_prime_is_one() {
        let d = StdWeibullDisplacement::new(1.0, 0.5).unwrap();
        let tail = d.induced_tail();
        let table = std_table();
        for n in [5u32, 10, 20, 40] {
            let s = compute_scaling(&tail, &table, n, 2.0, 0.9).unwrap();
            assert_relative_eq!(s.a_n * tail.eval(s.d_n, 1).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn s_star_spec_value_and_grid_agreement() {
        // pure-Weibull tail with the standardized-Weibull cumulant table
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = std_table();
        let x = (10.0 * 2f64.ln()).powi(2);
        let st = solve_s_star(&t, &table, x, 10).unwrap();
        assert!(st.residual < 1e-12);
        assert!((st.s - 0.0727).abs() < 2e-4, "s* {}", st.s);
        let re = rate_i(&t, &table, x, 10).unwrap();
        assert!((st.s - re.s_grid).abs() < 1e-4, "fp {} grid {}", st.s, re.s_grid);
    }

    #[test]
    fn s_star_n0_degenerates_to_r_prime() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = std_table();
        let st = solve_s_star(&t, &table, 4.0, 0).unwrap();
        assert_relative_eq!(st.s, 0.25);
    }

    #[test]
    fn s_star_monotone_in_x_over_window() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = std_table();
        let sc = compute_scaling(&t, &table, 10, 2.0, 0.9).unwrap();
        let mut prev = -1.0;
        for i in 0..=20 {
            let x = sc.h_lo + (sc.h_hi - sc.h_lo) * i as f64 / 20.0;
            let st = solve_s_star(&t, &table, x, 10).unwrap();
            assert!(st.s > prev, "s* not increasing at x={x}");
            prev = st.s;
        }
    }

    #[test]
    fn rate_collapses_to_r_for_zero_cumulants() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = CumulantTable::from_cumulants(&[0.0]);
        let x = 25.0;
        let re = rate_i(&t, &table, x, 50).unwrap();
        assert_relative_eq!(re.value, 5.0, max_relative = 1e-9);
    }

    #[test]
    fn rate_gap_shrinks_for_small_r() {
        // I(d_n) - R(d_n) -> 0 for r = 1/2 over a dyadic sweep
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = std_table();
        let mut prev = f64::INFINITY;
        for n in [10u32, 100, 1000] {
            let dn = solve_d_n(&t, n, 2.0).unwrap();
            let re = rate_i(&t, &table, dn, n).unwrap();
            let gap = (re.value - t.eval(dn, 0).unwrap()).abs();
            assert!(gap < prev, "gap {gap} at n={n}");
            prev = gap;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn rate_bounded_gap_for_large_r() {
        // r = 3/4: (I(d_n) - R(d_n))/n^{4-3/r} stays bounded; 4 - 3/r = 0
        let d = StdWeibullDisplacement::new(1.0, 0.75).unwrap();
        let tail = d.induced_tail();
        let table = CumulantTable::for_displacement(&d).unwrap();
        let mut worst = 0.0f64;
        for n in [200u32, 400, 800, 1600] {
            let dn = solve_d_n(&tail, n, 2.0).unwrap();
            let re = rate_i(&tail, &table, dn, n).unwrap();
            let gap = (re.value - tail.eval(dn, 0).unwrap()).abs();
            worst = worst.max(gap);
        }
        assert!(worst < 10.0, "unbounded-looking gap {worst}");
    }

    #[test]
    fn tau_zero_for_zero_cumulants() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = CumulantTable::from_cumulants(&[0.0]);
        let tau = solve_tau_n(&t, &table, 50, 2.0).unwrap();
        assert!(tau.abs() < 1e-8, "tau {tau}");
    }

    #[test]
    fn tau_leading_order_and_trend() {
        // pure spec, m=2: tau_n / (n R'(d_n)/2) -> 1, within 25% at n=100
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = std_table();
        let mut prev = f64::INFINITY;
        for n in [10u32, 100, 1000, 10_000] {
            let dn = solve_d_n(&t, n, 2.0).unwrap();
            let lead = n as f64 * t.eval(dn, 1).unwrap() / 2.0;
            let tau = solve_tau_n(&t, &table, n, 2.0).unwrap();
            let ratio = tau / lead;
            assert!((ratio - 1.0).abs() < prev, "ratio {ratio} at n={n}");
            if n == 100 {
                assert!((ratio - 1.0).abs() < 0.25);
            }
            prev = (ratio - 1.0).abs();
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn tau_defining_residual() {
        let t = TailSpec::pure_weibull(1.0, 0.5).unwrap();
        let table = std_table();
        let n = 100u32;
        let dn = solve_d_n(&t, n, 2.0).unwrap();
        let tau = solve_tau_n(&t, &table, n, 2.0).unwrap();
        let psi = rate_i(&t, &table, dn + tau, n).unwrap().value;
        assert_relative_eq!(psi, t.eval(dn, 0).unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn tau_falls_back_to_leading_order_when_unsolvable() {
        // X-units at n = 10, m = 2: pre-asymptotic, fixed point escapes but
        // the global Psi is still solvable; both paths must produce something
        let d = StdWeibullDisplacement::new(1.0, 0.5).unwrap();
        let tail = d.induced_tail();
        let table = std_table();
        let sc = compute_scaling(&tail, &table, 10, 2.0, 0.9).unwrap();
        assert!(sc.tau_n > 0.0);
        assert!(sc.b_n > sc.d_n);
    }

    #[test]
    fn scaling_orderings() {
        let d = StdWeibullDisplacement::new(1.0, 0.5).unwrap();
        let tail = d.induced_tail();
        let table = std_table();
        for n in [10u32, 20, 40, 100] {
            let s = compute_scaling(&tail, &table, n, 2.0, 0.9).unwrap();
            assert!(s.y_n < s.d_n, "y ordering at n={n}");
            assert!(s.d_n < s.w_n, "w ordering at n={n}");
            assert_relative_eq!(s.delta_n / s.d_n, 0.9, epsilon = 1e-12);
            assert_relative_eq!(s.b_n, s.d_n + s.tau_n);
            assert!(s.h_lo < s.h_hi);
        }
    }

    #[test]
    fn tau_small_relative_to_a_n_for_small_r() {
        // tau_n = o(a_n) for r < 2/3: the ratio decreases along a dyadic sweep
        for r in [0.5, 1.0 / 3.0] {
            let t = TailSpec::pure_weibull(1.0, r).unwrap();
            let d = StdWeibullDisplacement::new(1.0, r).unwrap();
            let table = CumulantTable::for_displacement(&d).unwrap();
            let mut prev = f64::INFINITY;
            for n in [100u32, 200, 400, 800] {
                let dn = solve_d_n(&t, n, 2.0).unwrap();
                let a_n = 1.0 / t.eval(dn, 1).unwrap();
                let tau = solve_tau_n(&t, &table, n, 2.0).unwrap();
                let ratio = tau / a_n;
                assert!(ratio < prev, "tau/a_n not decreasing at n={n}, r={r}");
                prev = ratio;
            }
        }
    }
}
