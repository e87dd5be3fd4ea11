//! Preconditioned conjugate gradient with a normwise backward-error stop.

use super::Preconditioner;
use crate::error::{Error, Result};
use crate::fem::LinearSystem;
use crate::sparse::{dot, norm2};

/// Outcome of one PCG solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    /// First iteration `j` with `‖A u_j - b‖₂ < ε ‖b‖₂`, or the iteration
    /// count reached when not converged.
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
    /// Centroid the preconditioner was built from, if any.
    pub preconditioner_index: Option<usize>,
    /// Relative true residual after each iteration.
    pub history: Vec<f64>,
}

/// Solves `A u = b` from `u₀ = 0`, stopping at the first iterate whose true
/// residual (recomputed as `b - A u_j`) satisfies `‖r‖₂ < eps ‖b‖₂`.
pub fn pcg(system: &LinearSystem, m: &Preconditioner, eps: f64, max_iter: usize) -> Result<(Vec<f64>, SolveRecord)> {
    pcg_observed(system, m, eps, max_iter, |_, _| {})
}

/// [`pcg`] calling `observe(j, u_j)` after every iteration.
pub fn pcg_observed<F>(
    system: &LinearSystem,
    m: &Preconditioner,
    eps: f64,
    max_iter: usize,
    mut observe: F,
) -> Result<(Vec<f64>, SolveRecord)>
where
    F: FnMut(usize, &[f64]),
{
    assert!(eps > 0.0, "eps must be positive");
    let a = &system.a;
    let b = &system.b;
    let n = system.dim();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    let mut record = SolveRecord {
        iterations: 0,
        final_relative_residual: 0.0,
        converged: true,
        preconditioner_index: m.built_from(),
        history: Vec::new(),
    };
    if b_norm == 0.0 {
        return Ok((x, record));
    }

    let mut r = b.clone();
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut true_r = vec![0.0; n];
    record.final_relative_residual = 1.0;
    record.converged = false;

    for j in 1..=max_iter {
        if !(rz > 0.0) {
            return Err(Error::PcgBreakdown { iteration: j, curvature: rz });
        }
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::PcgBreakdown { iteration: j, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observe(j, &x);

        a.mul_vec_into(&x, &mut true_r);
        true_r.iter_mut().zip(b).for_each(|(t, bi)| *t = bi - *t);
        let rel = norm2(&true_r) / b_norm;
        record.iterations = j;
        record.final_relative_residual = rel;
        record.history.push(rel);
        if rel < eps {
            record.converged = true;
            break;
        }

        m.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok((x, record))
}
