// SPDX-License-Identifier: Apache-2.0

//! Matrix-free Krylov solvers for symmetric operators on flat `f64` vectors.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::dot;

/// Outcome of a MINRES solve.
#[derive(Clone, Debug)]
pub struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Estimate of `‖b − Ax‖_{M} / ‖b‖_{M}` in the preconditioner norm.
    pub relative_residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct MinresOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000 }
    }
}

/// Preconditioned MINRES (Paige–Saunders) for symmetric, possibly indefinite
/// `A` with symmetric positive definite preconditioner `M ≈ A⁻¹`.
pub fn minres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<&[f64]>,
    opts: MinresOptions,
    what: &'static str,
) -> Result<MinresOutcome> {
    let n = b.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r1 = vec![0.0; n];
    apply(&x, &mut r1);
    for (r, bi) in r1.iter_mut().zip(b) {
        *r = bi - *r;
    }
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(Error::InvalidParameter(format!("{what}: preconditioner is not positive definite")));
    }
    let mut bnorm = vec![0.0; n];
    precond(b, &mut bnorm);
    let bnorm = dot(b, &bnorm).sqrt();
    let beta1 = beta1_sq.sqrt();
    if beta1 == 0.0 || bnorm == 0.0 {
        return Ok(MinresOutcome { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0f64;
    let mut sn = 0.0f64;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for itn in 1..=opts.max_iter {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * ri;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond(&r2, &mut y);
        oldb = beta;
        let bsq = dot(&r2, &y);
        if bsq < 0.0 {
            return Err(Error::InvalidParameter(format!("{what}: preconditioner is not positive definite")));
        }
        beta = bsq.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        let rel = phibar / bnorm;
        if rel <= opts.tol || beta == 0.0 {
            return Ok(MinresOutcome { x, iterations: itn, relative_residual: rel });
        }
        if rel < 0.5 * best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 400 {
                return Err(Error::Stagnation { what, iterations: itn, residual: rel });
            }
        }
    }
    Err(Error::Stagnation {
        what,
        iterations: opts.max_iter,
        residual: phibar / bnorm,
    })
}

/// A Ritz pair estimate from [`lanczos_smallest`].
#[derive(Clone, Debug)]
pub struct RitzValue {
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Number of smallest-magnitude eigenvalues wanted.
    pub count: usize,
    pub max_steps: usize,
    /// Absolute Ritz residual required of every reported value.
    pub tol: f64,
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            count: 4,
            max_steps: 400,
            tol: 1e-7,
            check_every: 10,
        }
    }
}

/// Smallest-magnitude eigenvalues of a symmetric operator by Lanczos with
/// full reorthogonalization. `project` is applied to every new basis vector,
/// which restricts the iteration to an invariant subspace.
pub fn lanczos_smallest(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut project: impl FnMut(&mut [f64]),
    start: &[f64],
    opts: LanczosOptions,
    what: &'static str,
) -> Result<Vec<RitzValue>> {
    let n = start.len();
    let mut q = start.to_vec();
    project(&mut q);
    let nrm = dot(&q, &q).sqrt();
    if nrm == 0.0 {
        return Err(Error::InvalidParameter(format!("{what}: start vector vanishes in the subspace")));
    }
    q.iter_mut().for_each(|v| *v /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut wv = vec![0.0; n];
    let mut last: Vec<RitzValue> = Vec::new();
    for step in 0..opts.max_steps {
        let qj = &basis[step];
        apply(qj, &mut wv);
        project(&mut wv);
        let scale = dot(&wv, &wv).sqrt();
        let a = dot(qj, &wv);
        alpha.push(a);
        // classical Gram–Schmidt, repeated once when cancellation was severe
        let mut before = scale;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &wv);
                for (wi, bi) in wv.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
            let after = dot(&wv, &wv).sqrt();
            let done = after > 0.7 * before;
            before = after;
            if done {
                break;
            }
        }
        project(&mut wv);
        let bnext = dot(&wv, &wv).sqrt();
        let m = alpha.len();
        let exhausted = bnext <= 1e-10 * scale.max(before).max(f64::MIN_POSITIVE);
        if (m % opts.check_every == 0 && m >= opts.count) || exhausted || step + 1 == opts.max_steps {
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut pairs: Vec<RitzValue> = (0..m)
                .map(|i| RitzValue {
                    value: eig.eigenvalues[i],
                    residual: if exhausted { 0.0 } else { (bnext * eig.eigenvectors[(m - 1, i)]).abs() },
                })
                .collect();
            pairs.sort_by(|x, y| x.value.abs().total_cmp(&y.value.abs()));
            pairs.truncate(opts.count);
            if pairs.len() == opts.count && pairs.iter().all(|p| p.residual <= opts.tol) {
                log::debug!("{what}: converged after {m} steps");
                return Ok(pairs);
            }
            if exhausted {
                return Ok(pairs);
            }
            last = pairs;
        }
        beta.push(bnext);
        basis.push(wv.iter().map(|v| v / bnext).collect());
    }
    let worst = last.iter().map(|p| p.residual).fold(0.0, f64::max);
    Err(Error::Stagnation {
        what,
        iterations: opts.max_steps,
        residual: worst,
    })
}
