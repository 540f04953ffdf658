//! Ridge-regularised least squares: `min ‖Z − Cβ‖² + λ‖β‖²`.

use alloc::vec;
use alloc::vec::Vec;

use super::assemble::ConstraintSystem;
use crate::error::{Error, Result};

/// Householder QR of the stacked matrix `[C; sqrt(λ) I]`.
pub(crate) fn dense_qr(sys: &ConstraintSystem, lambda: f64) -> Vec<f64> {
    let m = sys.n_rows();
    let c = sys.n_cols();
    let rows = m + c;
    // Column-major storage.
    let mut a = vec![0.0; rows * c];
    for (r, col, v) in sys.triplets() {
        a[col * rows + r] += v;
    }
    let damp = libm::sqrt(lambda);
    for j in 0..c {
        a[j * rows + m + j] = damp;
    }
    let mut b = sys.targets().to_vec();
    b.resize(rows, 0.0);

    let mut v = vec![0.0; rows];
    for k in 0..c {
        let (done, rest) = a.split_at_mut((k + 1) * rows);
        let col = &mut done[k * rows..];
        let norm_sq: f64 = col[k..].iter().map(|x| x * x).sum();
        if norm_sq == 0.0 {
            continue;
        }
        let norm = libm::sqrt(norm_sq);
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        let head = col[k] - alpha;
        let v_sq = norm_sq - col[k] * col[k] + head * head;
        v[k] = head;
        v[k + 1..].copy_from_slice(&col[k + 1..]);
        col[k] = alpha;
        for x in &mut col[k + 1..] {
            *x = 0.0;
        }
        let hv = &v[k..];
        for other in rest.chunks_exact_mut(rows) {
            let seg = &mut other[k..];
            let dot: f64 = hv.iter().zip(seg.iter()).map(|(p, q)| p * q).sum();
            if dot != 0.0 {
                let f = 2.0 * dot / v_sq;
                for (q, p) in seg.iter_mut().zip(hv) {
                    *q -= f * p;
                }
            }
        }
        let seg = &mut b[k..];
        let dot: f64 = hv.iter().zip(seg.iter()).map(|(p, q)| p * q).sum();
        let f = 2.0 * dot / v_sq;
        for (q, p) in seg.iter_mut().zip(hv) {
            *q -= f * p;
        }
    }

    let mut x = vec![0.0; c];
    for k in (0..c).rev() {
        let diag = a[k * rows + k];
        let mut s = b[k];
        for j in k + 1..c {
            s -= a[j * rows + k] * x[j];
        }
        x[k] = if diag != 0.0 { s / diag } else { 0.0 };
    }
    x
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IterativeSolution {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradient on the normal equations (CGLS form, `CᵀC` is never
/// formed). Convergence is measured as `‖Aᵀr‖ / ‖AᵀZ‖` on the damped
/// operator `A = [C; √λ I]`.
///
/// No column scaling: started from zero, the iterates stay in the row space
/// of `C`, so a rank-deficient system converges to its minimum-norm solution
/// just like the dense path. A diagonal preconditioner would converge faster
/// but towards the minimiser of a weighted norm instead.
pub(crate) fn cgls(
    sys: &ConstraintSystem,
    lambda: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<IterativeSolution> {
    let m = sys.n_rows();
    let c = sys.n_cols();
    let damp = libm::sqrt(lambda);

    let apply = |p: &[f64], out_fit: &mut [f64], out_damp: &mut [f64]| {
        out_fit.iter_mut().for_each(|v| *v = 0.0);
        sys.mul_add(p, out_fit);
        for (o, pi) in out_damp.iter_mut().zip(p) {
            *o = damp * pi;
        }
    };
    let apply_t = |r_fit: &[f64], r_damp: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        sys.mul_transpose_add(r_fit, out);
        for (o, rd) in out.iter_mut().zip(r_damp) {
            *o += damp * rd;
        }
    };
    let norm_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();

    let mut y = vec![0.0; c];
    let mut r_fit = sys.targets().to_vec();
    let mut r_damp = vec![0.0; c];
    let mut s = vec![0.0; c];
    apply_t(&r_fit, &r_damp, &mut s);
    let s0 = libm::sqrt(norm_sq(&s));
    if s0 == 0.0 {
        return Ok(IterativeSolution {
            beta: y,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut p = s.clone();
    let mut gamma = norm_sq(&s);
    let mut q_fit = vec![0.0; m];
    let mut q_damp = vec![0.0; c];
    let mut relative = 1.0;
    for it in 1..=max_iterations {
        apply(&p, &mut q_fit, &mut q_damp);
        let qq = norm_sq(&q_fit) + norm_sq(&q_damp);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (yi, pi) in y.iter_mut().zip(&p) {
            *yi += alpha * pi;
        }
        for (ri, qi) in r_fit.iter_mut().zip(&q_fit) {
            *ri -= alpha * qi;
        }
        for (ri, qi) in r_damp.iter_mut().zip(&q_damp) {
            *ri -= alpha * qi;
        }
        apply_t(&r_fit, &r_damp, &mut s);
        let gamma_next = norm_sq(&s);
        relative = libm::sqrt(gamma_next) / s0;
        if relative <= tolerance {
            return Ok(IterativeSolution {
                beta: y,
                iterations: it,
                relative_residual: relative,
            });
        }
        let ratio = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + ratio * *pi;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual: relative,
    })
}
