//! Adaptive Simpson quadrature.
//!
//! Small, allocation-free and accurate enough (relative ~1e-12 on smooth
//! integrands) for the truncated-moment integrals in this crate.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge on [{a}, {b}] (best error {err:.3e})")]
    NoConvergence { a: f64, b: f64, err: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub err_estimate: f64,
    pub evals: usize,
}

const MAX_DEPTH: u32 = 48;
const FORCED_SPLITS: u32 = 3;

#[inline]
fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

struct Ctx<'a, F> {
    f: &'a F,
    evals: usize,
    abs_floor: f64,
}

fn rec<F: Fn(f64) -> f64>(
    c: &mut Ctx<F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64), QuadError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = (c.f)(lm);
    let frm = (c.f)(rm);
    c.evals += 2;
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    // accept only below the forced-split depth: the Richardson estimate lies
    // on coarse grids when delta is small by cancellation
    if depth <= MAX_DEPTH - FORCED_SPLITS
        && (delta.abs() <= 15.0 * tol || delta.abs() <= c.abs_floor)
    {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    if depth == 0 {
        return Err(QuadError::NoConvergence {
            a,
            b,
            err: delta.abs(),
        });
    }
    let (vl, el) = rec(c, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let (vr, er) = rec(c, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok((vl + vr, el + er))
}

/// Integrate `f` on `[a, b]` to relative tolerance `rel_tol`.
///
/// `abs_floor` stops refinement once the local error is absolutely negligible,
/// which keeps integrals whose value is ~0 from recursing forever.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Quad, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::BadInterval { a, b });
    }
    if a == b {
        return Ok(Quad {
            value: 0.0,
            err_estimate: 0.0,
            evals: 0,
        });
    }
    // coarse scan to estimate the magnitude for the relative tolerance
    let n0 = 32;
    let h = (b - a) / n0 as f64;
    let mut scale = 0.0f64;
    for i in 0..=n0 {
        scale = scale.max((f(a + i as f64 * h)).abs());
    }
    let tol_abs = (scale * (b - a) * rel_tol).max(abs_floor);

    let mut ctx = Ctx {
        f: &f,
        evals: n0 + 1,
        abs_floor,
    };
    let mut value = 0.0;
    let mut err = 0.0;
    // integrate panel by panel so sharp features localize the refinement
    let panels = 8;
    let ph = (b - a) / panels as f64;
    for i in 0..panels {
        let pa = a + i as f64 * ph;
        let pb = pa + ph;
        let fa = f(pa);
        let fm = f(0.5 * (pa + pb));
        let fb = f(pb);
        ctx.evals += 3;
        let whole = simpson(fa, fm, fb, ph);
        let (v, e) = rec(
            &mut ctx,
            pa,
            pb,
            fa,
            fm,
            fb,
            whole,
            tol_abs / panels as f64,
            MAX_DEPTH,
        )?;
        value += v;
        err += e;
    }
    Ok(Quad {
        value,
        err_estimate: err,
        evals: ctx.evals,
    })
}
