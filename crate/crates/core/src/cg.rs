//! Matrix-free conjugate gradient for symmetric positive definite systems.

use crate::error::{Error, Result};

/// Iterations between recomputations of the true residual `b − A Δx`.
pub const RESIDUAL_REFRESH: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgFlag {
    Converged,
    MaxIters,
    /// `pᵀAp ≤ ε‖p‖²`: the operator shows no usable curvature along the search direction.
    Stagnated,
}

impl CgFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            CgFlag::Converged => "converged",
            CgFlag::MaxIters => "max_iters",
            CgFlag::Stagnated => "stagnated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub step: Vec<f64>,
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub iterations: usize,
    pub flag: CgFlag,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(v: &[f64], iteration: usize) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::NonFinite {
            context: format!("operator output entry {k} at CG iteration {iteration}"),
        }),
        None => Ok(()),
    }
}

/// Solves `A Δx = b` from `Δx₀ = 0`, stopping once `‖r‖ ≤ tol·‖b‖`.
pub fn cg_solve<F>(apply: F, b: &[f64], tol: f64, max_iters: usize) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    cg_solve_observed(apply, b, tol, max_iters, |_, _, _| {})
}

/// [`cg_solve`] with a callback receiving `(iteration, Δx_k, r_k)` after every update.
pub fn cg_solve_observed<F, O>(
    mut apply: F,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    mut observer: O,
) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    O: FnMut(usize, &[f64], &[f64]),
{
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("CG tolerance {tol} outside (0, 1)")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("CG needs at least one iteration"));
    }
    check_finite(b, 0)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let b_norm = rr.sqrt();
    let target = tol * b_norm;

    let mut outcome = CgOutcome {
        step: Vec::new(),
        residual_norm: b_norm,
        initial_residual_norm: b_norm,
        iterations: 0,
        flag: CgFlag::MaxIters,
    };
    if b_norm == 0.0 {
        outcome.flag = CgFlag::Converged;
        outcome.step = x;
        return Ok(outcome);
    }

    for k in 0..max_iters {
        apply(&p, &mut ap)?;
        check_finite(&ap, k + 1)?;
        let pap = dot(&p, &ap);
        if pap <= f64::EPSILON * dot(&p, &p) {
            outcome.flag = CgFlag::Stagnated;
            break;
        }
        let alpha = rr / pap;
        for j in 0..n {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        outcome.iterations = k + 1;
        if (k + 1) % RESIDUAL_REFRESH == 0 {
            apply(&x, &mut ap)?;
            check_finite(&ap, k + 1)?;
            for j in 0..n {
                r[j] = b[j] - ap[j];
            }
        }
        let rr_next = dot(&r, &r);
        outcome.residual_norm = rr_next.sqrt();
        observer(k + 1, &x, &r);
        if outcome.residual_norm <= target {
            outcome.flag = CgFlag::Converged;
            break;
        }
        let beta = rr_next / rr;
        for j in 0..n {
            p[j] = r[j] + beta * p[j];
        }
        rr = rr_next;
    }
    outcome.step = x;
    Ok(outcome)
}
