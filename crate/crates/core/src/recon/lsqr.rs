//! Damped LSQR (Paige & Saunders) over a real [`LinearOperator`].
//!
//! Minimizes `‖A x − b‖² + damp² ‖x‖²` by Golub–Kahan bidiagonalization.
//! Iterates are deterministic: no randomness and no parallel reductions.

use crate::operator::{norm2, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqrParams {
    pub damp: f64,
    /// Stop when the normal-equations residual
    /// `‖Aᵀr − damp² x‖ / (‖Ā‖ ‖r̄‖)` or the relative residual `‖r̄‖/‖b‖`
    /// drops below this.
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `b = 0`; the solution is zero.
    ZeroRhs,
    ResidualSmall,
    NormalEquationsSmall,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LsqrSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    /// Damped residual `‖[b; 0] − [A; damp I] x‖` after each iteration,
    /// relative to `‖b‖`.
    pub residual_history: Vec<f64>,
}

impl LsqrSolution {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

fn scale_in_place(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

pub fn lsqr<A: LinearOperator<Scalar = f64>>(op: &A, b: &[f64], params: &LsqrParams) -> LsqrSolution {
    let (m, n) = (op.nrows(), op.ncols());
    assert_eq!(b.len(), m, "right-hand side length");
    let damp = params.damp;
    let mut x = vec![0.0; n];

    let mut u = b.to_vec();
    let bnorm = norm2(&u);
    if bnorm == 0.0 {
        return LsqrSolution {
            x,
            iterations: 0,
            stop: StopReason::ZeroRhs,
            residual_history: vec![],
        };
    }
    let mut beta = bnorm;
    scale_in_place(&mut u, 1.0 / beta);
    let mut v = vec![0.0; n];
    op.apply_adjoint(&u, &mut v);
    let mut alpha = norm2(&v);
    if alpha > 0.0 {
        scale_in_place(&mut v, 1.0 / alpha);
    }
    let mut w = v.clone();

    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = 0.0;
    let mut psi_sq_sum = 0.0;
    let mut history = Vec::new();
    let mut stop = StopReason::IterationLimit;
    let mut iterations = 0;

    if alpha == 0.0 {
        // b is orthogonal to the range of A
        return LsqrSolution {
            x,
            iterations: 0,
            stop: StopReason::NormalEquationsSmall,
            residual_history: vec![1.0],
        };
    }

    let mut av = vec![0.0; m];
    let mut atu = vec![0.0; n];
    while iterations < params.max_iters {
        iterations += 1;

        op.apply(&v, &mut av);
        for (ui, &a) in u.iter_mut().zip(&av) {
            *ui = a - alpha * *ui;
        }
        beta = norm2(&u);
        if beta > 0.0 {
            scale_in_place(&mut u, 1.0 / beta);
        }
        anorm_sq += alpha * alpha + beta * beta + damp * damp;

        op.apply_adjoint(&u, &mut atu);
        for (vi, &a) in v.iter_mut().zip(&atu) {
            *vi = a - beta * *vi;
        }
        alpha = norm2(&v);
        if alpha > 0.0 {
            scale_in_place(&mut v, 1.0 / alpha);
        }

        // eliminate the damping row
        let rhobar1 = rhobar.hypot(damp);
        let cs1 = rhobar / rhobar1;
        let sn1 = damp / rhobar1;
        let psi = sn1 * phibar;
        phibar *= cs1;

        let rho = rhobar1.hypot(beta);
        let cs = rhobar1 / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -cs * alpha;
        let phi = cs * phibar;
        phibar *= sn;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for ((xi, wi), &vi) in x.iter_mut().zip(w.iter_mut()).zip(&v) {
            *xi += t1 * *wi;
            *wi = vi + t2 * *wi;
        }

        psi_sq_sum += psi * psi;
        let rnorm = (phibar * phibar + psi_sq_sum).sqrt();
        history.push(rnorm / bnorm);

        let arnorm = alpha * (sn * phi).abs();
        let anorm = anorm_sq.sqrt();
        if rnorm / bnorm <= params.tol {
            stop = StopReason::ResidualSmall;
            break;
        }
        if anorm * rnorm > 0.0 && arnorm / (anorm * rnorm) <= params.tol {
            stop = StopReason::NormalEquationsSmall;
            break;
        }
        if alpha == 0.0 {
            stop = StopReason::NormalEquationsSmall;
            break;
        }
    }

    LsqrSolution {
        x,
        iterations,
        stop,
        residual_history: history,
    }
}
