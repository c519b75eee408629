//! Associated derivative network and the discrete LPV model built from it.
//!
//! For `y = LW·φ(p)` with Gaussian units the Jacobian is available in closed
//! form from the same centers, radii and weights:
//!
//! ```text
//! ∂y/∂p = LW·Φ(p),   row j of Φ = φ_j(p)·(−2/s_j²)·(p − c_j)ᵀ
//! ```
//!
//! The model maps `[tps, m_fi, n, λ](t)` to `[Q_eng, n, λ](t+1)`, so its
//! derivatives with respect to the state entries become columns 2–3 of A
//! (torque at t is not an input, leaving column 1 zero) and the derivatives
//! with respect to the inputs become B. C converts the state to thrust and
//! λ; D is zero.

use std::path::Path;

use nalgebra::{DMatrix, Matrix2, Matrix2x3, Matrix3, Matrix3x2, SMatrix, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::ControlInput;
use crate::fan::FanModel;
use crate::nn::rbf::{rbf_forward, rbf_phi, RbfModel};
use crate::nn::{NormStats, INPUTS, OUTPUTS};
use crate::{Error, Result};

pub type Jacobian = SMatrix<f64, OUTPUTS, INPUTS>;

/// Derivative network sharing the centers, radii and weights of an RBF model.
#[derive(Clone, Copy, Debug)]
pub struct AssociatedNetwork<'a> {
    pub rbf: &'a RbfModel,
}

impl<'a> AssociatedNetwork<'a> {
    pub fn new(rbf: &'a RbfModel) -> Self {
        Self { rbf }
    }

    /// Jacobian in normalized coordinates.
    pub fn jacobian(&self, p: &[f64]) -> Jacobian {
        let k = self.rbf.len();
        let mut phi_rows = DMatrix::<f64>::zeros(k, INPUTS);
        for j in 0..k {
            let c = self.rbf.center(j);
            let s = self.rbf.radii[j];
            let g = rbf_phi(p, &c, s) * (-2.0 / (s * s));
            for i in 0..INPUTS {
                phi_rows[(j, i)] = g * (p[i] - c[i]);
            }
        }
        let j = &self.rbf.lw * phi_rows;
        Jacobian::from_fn(|r, c| j[(r, c)])
    }

    /// Jacobian in physical units at a physical input row.
    pub fn physical_jacobian(&self, x: &[f64; INPUTS]) -> Jacobian {
        let stats_in = self.rbf.input_stats();
        let p: Vec<f64> = (0..INPUTS).map(|c| stats_in.normalize_value(c, x[c])).collect();
        rescale_jacobian(&self.jacobian(&p), &stats_in, &self.rbf.output_stats())
    }
}

pub fn assoc_jacobian(rbf: &RbfModel, p: &[f64]) -> Jacobian {
    AssociatedNetwork::new(rbf).jacobian(p)
}

/// Chain rule across the affine normalizations:
/// `J_phys[i][j] = J_norm[i][j]·halfspan_out[i] / halfspan_in[j]`.
pub fn rescale_jacobian(j: &Jacobian, stats_in: &NormStats, stats_out: &NormStats) -> Jacobian {
    Jacobian::from_fn(|r, c| j[(r, c)] * stats_out.half_span(r) / stats_in.half_span(c))
}

/// Inverse of [`rescale_jacobian`].
pub fn normalize_jacobian(j: &Jacobian, stats_in: &NormStats, stats_out: &NormStats) -> Jacobian {
    Jacobian::from_fn(|r, c| j[(r, c)] * stats_in.half_span(c) / stats_out.half_span(r))
}

/// `Δx(t+1) = A·Δx(t) + B·Δu(t)`, `Δy = C·Δx + D·Δu`, with
/// `x = [Q_eng, n, λ]`, `u = [tps, m_fi]`, `y = [T_DF, λ]` in physical units.
#[derive(Clone, Debug, PartialEq)]
pub struct LpvModel {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
    pub c: Matrix2x3<f64>,
    pub d: Matrix2<f64>,
    pub x0: [f64; 3],
    pub u0: ControlInput,
    pub time: f64,
}

impl LpvModel {
    pub fn step(&self, dx: &Vector3<f64>, du: &Vector2<f64>) -> Vector3<f64> {
        self.a * dx + self.b * du
    }

    pub fn output(&self, dx: &Vector3<f64>, du: &Vector2<f64>) -> Vector2<f64> {
        self.c * dx + self.d * du
    }
}

/// Linearizes the identified engine and the fan map at `(x0, u0)`.
pub fn build_lpv(rbf: &RbfModel, fan: &impl FanModel, x0: [f64; 3], u0: ControlInput, time: f64) -> Result<LpvModel> {
    let x = [u0.tps, u0.fuel_rate, x0[1], x0[2]];
    let j = AssociatedNetwork::new(rbf).physical_jacobian(&x);
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(format!("non-finite Jacobian at {x:?}")));
    }
    let mut a = Matrix3::zeros();
    let mut b = Matrix3x2::zeros();
    for r in 0..3 {
        a[(r, 1)] = j[(r, 2)];
        a[(r, 2)] = j[(r, 3)];
        b[(r, 0)] = j[(r, 0)];
        b[(r, 1)] = j[(r, 1)];
    }
    let (dt_dq, dt_dn) = fan.thrust_jacobian(x0[0], x0[1])?;
    let c = Matrix2x3::new(dt_dq, dt_dn, 0.0, 0.0, 0.0, 1.0);
    Ok(LpvModel {
        a,
        b,
        c,
        d: Matrix2::zeros(),
        x0,
        u0,
        time,
    })
}

pub const LPV_CSV_HEADER: &str = "time,Q0,n0,lambda0,tps0,m_fi0,\
a00,a01,a02,a10,a11,a12,a20,a21,a22,b00,b01,b10,b11,b20,b21,c00,c01,c02,c10,c11,c12,d00,d01,d10,d11";

pub fn lpv_csv_row(m: &LpvModel) -> Vec<String> {
    let mut v = vec![m.time, m.x0[0], m.x0[1], m.x0[2], m.u0.tps, m.u0.fuel_rate];
    let rows = |out: &mut Vec<f64>, r: usize, c: usize, get: &dyn Fn(usize, usize) -> f64| {
        for i in 0..r {
            for j in 0..c {
                out.push(get(i, j));
            }
        }
    };
    rows(&mut v, 3, 3, &|i, j| m.a[(i, j)]);
    rows(&mut v, 3, 2, &|i, j| m.b[(i, j)]);
    rows(&mut v, 2, 3, &|i, j| m.c[(i, j)]);
    rows(&mut v, 2, 2, &|i, j| m.d[(i, j)]);
    v.iter().map(|x| x.to_string()).collect()
}

pub fn write_lpv_csv(models: &[LpvModel], path: &Path) -> Result<()> {
    let mut s = String::from(LPV_CSV_HEADER);
    s.push('\n');
    for m in models {
        s.push_str(&lpv_csv_row(m).join(","));
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Central-difference Jacobian of the normalized network.
pub fn fd_jacobian(m: &RbfModel, p: &[f64], h: f64) -> Jacobian {
    let mut j = Jacobian::zeros();
    for c in 0..INPUTS {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[c] += h;
        minus[c] -= h;
        let d = (rbf_forward(m, &plus) - rbf_forward(m, &minus)) / (2.0 * h);
        for r in 0..OUTPUTS {
            j[(r, c)] = d[r];
        }
    }
    j
}

/// Worst relative deviation of [`assoc_jacobian`] from central differences
/// (step 1e−5) over `points` uniform draws in [−1, 1]⁴.
pub fn jacobian_audit(m: &RbfModel, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..points)
        .map(|_| {
            let p: Vec<f64> = (0..INPUTS).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let a = assoc_jacobian(m, &p);
            (a - fd_jacobian(m, &p, 1e-5)).amax() / a.amax().max(1e-12)
        })
        .fold(0.0, f64::max)
}
