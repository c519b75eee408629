//! Box-constrained strictly convex QP:
//!
//! ```text
//! min ½xᵀHx + fᵀx   s.t.   lower ≤ x ≤ upper
//! ```
//!
//! Hildreth's dual coordinate ascent on the constraint set `[I; −I]x ≤
//! [upper; −lower]`, followed by an active-set polish to reach the KKT
//! tolerance. Projected gradient is the fallback.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct BoxQp {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpMethod {
    Unconstrained,
    Hildreth,
    ActiveSet,
    ProjectedGradient,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the upper bounds.
    pub mu_upper: DVector<f64>,
    /// Multipliers of the lower bounds.
    pub mu_lower: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub method: QpMethod,
}

impl QpSolution {
    /// Variables sitting on either bound.
    pub fn active(&self) -> Vec<bool> {
        self.mu_upper.iter().zip(self.mu_lower.iter()).map(|(u, l)| *u > 0.0 || *l > 0.0).collect()
    }
}

impl BoxQp {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.f
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.h.nrows() != n || self.h.ncols() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Shape(format!("QP of dimension {n} has mismatched blocks")));
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::Solver("QP bounds are not ordered".into()));
        }
        if self.h.iter().chain(self.f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Solver("QP data are not finite".into()));
        }
        Ok(())
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Multipliers implied by stationarity at `x`: a variable on its upper
    /// bound carries `−g`, on its lower bound `g`, interior variables none.
    pub fn multipliers(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let g = self.gradient(x);
        let n = self.dim();
        let mut mu_u = DVector::zeros(n);
        let mut mu_l = DVector::zeros(n);
        for i in 0..n {
            if x[i] >= self.upper[i] && self.lower[i] < self.upper[i] {
                mu_u[i] = -g[i];
            } else if x[i] <= self.lower[i] {
                mu_l[i] = g[i];
            }
        }
        (mu_u, mu_l)
    }

    /// Max of primal infeasibility, stationarity error on free variables and
    /// negative multipliers, relative to the gradient scale.
    pub fn kkt_residual(&self, x: &DVector<f64>) -> f64 {
        let g = self.gradient(x);
        let scale = 1.0 + self.f.amax();
        let mut r: f64 = 0.0;
        for i in 0..self.dim() {
            r = r.max((x[i] - self.upper[i]).max(self.lower[i] - x[i]).max(0.0));
            let gi = g[i] / scale;
            if x[i] >= self.upper[i] {
                r = r.max(gi.max(0.0));
            } else if x[i] <= self.lower[i] {
                r = r.max((-gi).max(0.0));
            } else {
                r = r.max(gi.abs());
            }
        }
        r
    }
}

fn factor(h: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(h.clone()).ok_or_else(|| Error::Solver("QP Hessian is not positive definite".into()))
}

fn finish(qp: &BoxQp, x: DVector<f64>, iterations: usize, method: QpMethod, tol: f64) -> QpSolution {
    let (mu_upper, mu_lower) = qp.multipliers(&x);
    let kkt_residual = qp.kkt_residual(&x);
    QpSolution {
        x,
        mu_upper,
        mu_lower,
        iterations,
        kkt_residual,
        converged: kkt_residual <= tol,
        method,
    }
}

/// Hildreth's procedure on the dual of the box QP. Returns the primal
/// iterate and the sweep count.
pub fn hildreth(qp: &BoxQp, max_sweeps: usize, tol: f64) -> Result<(DVector<f64>, usize)> {
    qp.validate()?;
    let n = qp.dim();
    let chol = factor(&qp.h)?;
    let hinv = chol.inverse();
    let x_unc = -(&hinv * &qp.f);
    // Dual data for M = [I; −I], γ = [upper; −lower]:
    //   P = M H⁻¹ Mᵀ, K = γ − M x_unc
    let m = 2 * n;
    let p = DMatrix::from_fn(m, m, |i, j| {
        let s = if (i < n) == (j < n) { 1.0 } else { -1.0 };
        s * hinv[(i % n, j % n)]
    });
    let k = DVector::from_fn(m, |i, _| {
        if i < n {
            qp.upper[i] - x_unc[i]
        } else {
            -qp.lower[i - n] + x_unc[i - n]
        }
    });
    let mut lam = DVector::<f64>::zeros(m);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 0..m {
            let w = -(k[i] + p.row(i).dot(&lam.transpose()) - p[(i, i)] * lam[i]) / p[(i, i)];
            let next = w.max(0.0);
            change = change.max((next - lam[i]).abs());
            lam[i] = next;
        }
        if change <= tol * (1.0 + lam.amax()) {
            break;
        }
    }
    let mt_lam = DVector::from_fn(n, |i, _| lam[i] - lam[i + n]);
    let x = &x_unc - &hinv * mt_lam;
    Ok((x, sweeps))
}

/// Primal active-set refinement from a starting point: fix variables on
/// their bounds, solve for the rest, release bounds with wrong-signed
/// multipliers and add violated ones until the working set repeats.
pub fn active_set_polish(qp: &BoxQp, start: &DVector<f64>, max_iterations: usize) -> Result<(DVector<f64>, usize)> {
    let n = qp.dim();
    // 0 free, 1 upper, −1 lower
    let mut set: Vec<i8> = (0..n)
        .map(|i| {
            let span = (qp.upper[i] - qp.lower[i]).abs().max(1e-300);
            if qp.upper[i] - start[i] <= 1e-9 * span {
                1
            } else if start[i] - qp.lower[i] <= 1e-9 * span {
                -1
            } else {
                0
            }
        })
        .collect();
    let mut seen: Vec<Vec<i8>> = Vec::new();
    let mut x = start.clone();
    for it in 1..=max_iterations {
        let free: Vec<usize> = (0..n).filter(|&i| set[i] == 0).collect();
        for i in 0..n {
            match set[i] {
                1 => x[i] = qp.upper[i],
                -1 => x[i] = qp.lower[i],
                _ => {}
            }
        }
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| qp.h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let i = free[a];
                -(qp.f[i] + (0..n).filter(|&j| set[j] != 0).map(|j| qp.h[(i, j)] * x[j]).sum::<f64>())
            });
            let xf = factor(&hff)?.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                x[i] = xf[a];
            }
        }
        let g = qp.gradient(&x);
        let mut next = set.clone();
        let mut changed = false;
        for i in 0..n {
            match set[i] {
                0 if x[i] > qp.upper[i] => {
                    next[i] = 1;
                    changed = true;
                }
                0 if x[i] < qp.lower[i] => {
                    next[i] = -1;
                    changed = true;
                }
                1 if g[i] > 0.0 => {
                    next[i] = 0;
                    changed = true;
                }
                -1 if g[i] < 0.0 => {
                    next[i] = 0;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return Ok((x, it));
        }
        seen.push(set);
        if seen.contains(&next) {
            return Ok((qp.project(&x), it));
        }
        set = next;
    }
    Ok((qp.project(&x), max_iterations))
}

/// Projected gradient with fixed step 1/λ_max(H).
pub fn projected_gradient(qp: &BoxQp, start: &DVector<f64>, max_iterations: usize, tol: f64) -> (DVector<f64>, usize) {
    let lmax = qp.h.clone().symmetric_eigenvalues().max().max(1e-300);
    let step = 1.0 / lmax;
    let mut x = qp.project(start);
    for it in 1..=max_iterations {
        let next = qp.project(&(&x - qp.gradient(&x) * step));
        let moved = (&next - &x).amax();
        x = next;
        if moved <= tol * (1.0 + x.amax()) && qp.kkt_residual(&x) <= tol {
            return (x, it);
        }
    }
    (x, max_iterations)
}

/// Solves the box QP. An iteration-cap exit is reported through
/// `converged = false` with the best iterate found.
pub fn solve_box_qp(qp: &BoxQp, opts: &QpOptions) -> Result<QpSolution> {
    qp.validate()?;
    let chol = factor(&qp.h)?;
    let x_unc = -chol.solve(&qp.f);
    let inside = (0..qp.dim()).all(|i| x_unc[i] >= qp.lower[i] && x_unc[i] <= qp.upper[i]);
    if inside {
        return Ok(finish(qp, x_unc, 0, QpMethod::Unconstrained, opts.tolerance));
    }
    let (xh, sweeps) = hildreth(qp, opts.max_iterations, opts.tolerance)?;
    let xh = qp.project(&xh);
    if qp.kkt_residual(&xh) <= opts.tolerance {
        return Ok(finish(qp, xh, sweeps, QpMethod::Hildreth, opts.tolerance));
    }
    let (xa, polish) = active_set_polish(qp, &xh, 4 * qp.dim() + 8)?;
    let mut best = finish(qp, xa, sweeps + polish, QpMethod::ActiveSet, opts.tolerance);
    if best.converged {
        return Ok(best);
    }
    let (xp, pg) = projected_gradient(qp, &best.x, opts.max_iterations, opts.tolerance);
    let cand = finish(qp, xp, best.iterations + pg, QpMethod::ProjectedGradient, opts.tolerance);
    if cand.kkt_residual < best.kkt_residual {
        best = cand;
    }
    Ok(best)
}
