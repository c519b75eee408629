//! Gaussian radial basis network, `y = LW·φ(p)` with
//! `φ_j = exp(−(‖p − c_j‖/s_j)²)`.
//!
//! Centers come from seeded k-means++ over the normalized training inputs,
//! radii from the mean distance to the nearest co-centers, and the output
//! weights from ridge-regularized least squares with optional LMS passes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::MatrixFile;
use super::{denormalize_vec, normalize_vec, Dataset, NormStats, TrainingSet, INPUTS, OUTPUTS};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfConfig {
    pub centers: usize,
    /// Co-centers averaged for each radius.
    pub neighbors: usize,
    pub ridge: f64,
    pub kmeans_iterations: usize,
    pub min_radius: f64,
    pub lms_passes: usize,
    pub lms_rate: f64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self {
            centers: 25,
            neighbors: 2,
            ridge: 1e-8,
            kmeans_iterations: 100,
            min_radius: 1e-6,
            lms_passes: 0,
            lms_rate: 0.01,
        }
    }
}

impl RbfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.centers == 0 || self.neighbors == 0 || !(self.min_radius > 0.0) || !(self.ridge >= 0.0) {
            return Err(Error::Config("rbf: centers, neighbors and min_radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbfModel {
    /// k × 4, normalized input space.
    pub centers: DMatrix<f64>,
    pub radii: DVector<f64>,
    /// 3 × k
    pub lw: DMatrix<f64>,
    /// Seven columns: the four inputs then the three outputs.
    pub stats: NormStats,
}

pub fn rbf_phi(p: &[f64], center: &[f64], radius: f64) -> f64 {
    let d2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (radius * radius)).exp()
}

impl RbfModel {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn center(&self, j: usize) -> [f64; INPUTS] {
        let r = self.centers.row(j);
        [r[0], r[1], r[2], r[3]]
    }

    pub fn activations(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.len(), |j, _| rbf_phi(p, &self.center(j), self.radii[j]))
    }

    pub fn design_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        design_matrix(&self.centers, &self.radii, x)
    }

    pub fn input_stats(&self) -> NormStats {
        self.stats.select(0..INPUTS)
    }

    pub fn output_stats(&self) -> NormStats {
        self.stats.select(INPUTS..INPUTS + OUTPUTS)
    }

    pub fn forward_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.design_matrix(x) * self.lw.transpose()
    }

    /// Physical-unit prediction for one raw input row.
    pub fn predict(&self, x: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        let p = normalize_vec(x, &self.input_stats());
        let out = denormalize_vec(&rbf_forward(self, p.as_slice()), &self.output_stats());
        [out[0], out[1], out[2]]
    }

    pub fn to_file(&self) -> MatrixFile {
        let mut f = MatrixFile::new("rbf");
        f.push("CENTERS", self.centers.clone())
            .push_vector("RADII", &self.radii)
            .push("LW", self.lw.clone())
            .push_stats(&self.stats);
        f
    }

    pub fn from_file(f: &MatrixFile) -> Result<Self> {
        f.expect_kind("rbf")?;
        let k = f.get_any("RADII")?.nrows();
        let m = Self {
            centers: f.get("CENTERS", k, INPUTS)?,
            radii: f.get_vector("RADII", k)?,
            lw: f.get("LW", OUTPUTS, k)?,
            stats: f.get_stats(INPUTS + OUTPUTS)?,
        };
        if m.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Shape("RADII must be strictly positive".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(&MatrixFile::load(path)?)
    }
}

pub fn rbf_forward(model: &RbfModel, p: &[f64]) -> DVector<f64> {
    &model.lw * model.activations(p)
}

pub fn design_matrix(centers: &DMatrix<f64>, radii: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), radii.len(), |r, j| {
        let p: Vec<f64> = x.row(r).iter().copied().collect();
        let c: Vec<f64> = centers.row(j).iter().copied().collect();
        rbf_phi(&p, &c, radii[j])
    })
}

fn dist2(x: &DMatrix<f64>, r: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    x.row(r).iter().zip(c.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Index of the nearest center to row `r` of `x`, ties to the lowest index.
pub fn nearest_center(x: &DMatrix<f64>, r: usize, centers: &DMatrix<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for j in 0..centers.nrows() {
        let d = dist2(x, r, centers, j);
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// Seeded k-means++ initialization followed by Lloyd iterations. Returns
/// the centers and the final assignment of each row.
pub fn kmeans(x: &DMatrix<f64>, k: usize, iterations: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::Shape(format!("cannot place {k} centers on {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|r| dist2(x, r, x, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    idx = i;
                    break;
                }
                t -= d;
            }
            // rounding can land on an already chosen point
            if d2[idx] == 0.0 {
                (0..n).rfind(|&i| d2[i] > 0.0).unwrap_or(idx)
            } else {
                idx
            }
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        for (r, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(x, r, x, pick));
        }
    }
    let mut centers = x.select_rows(&chosen);
    let mut assign: Vec<usize> = (0..n).map(|r| nearest_center(x, r, &centers)).collect();
    for _ in 0..iterations {
        let mut sums = DMatrix::<f64>::zeros(k, x.ncols());
        let mut counts = vec![0usize; k];
        for (r, &j) in assign.iter().enumerate() {
            let mut row = sums.row_mut(j);
            row += x.row(r);
            counts[j] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                let mean = sums.row(j) / counts[j] as f64;
                centers.row_mut(j).copy_from(&mean);
            } else {
                // re-seed an empty cluster from the worst-served point
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(x, a, &centers, assign[a]);
                        let db = dist2(x, b, &centers, assign[b]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centers.row_mut(j).copy_from(&x.row(far));
                assign[far] = j;
            }
        }
        let next: Vec<usize> = (0..n).map(|r| nearest_center(x, r, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok((centers, assign))
}

/// Mean distance from each center to its `neighbors` nearest co-centers,
/// floored at `min_radius`.
pub fn neighbor_radii(centers: &DMatrix<f64>, neighbors: usize, min_radius: f64) -> DVector<f64> {
    let k = centers.nrows();
    DVector::from_fn(k, |j, _| {
        let mut d: Vec<f64> = (0..k).filter(|&i| i != j).map(|i| dist2(centers, i, centers, j).sqrt()).collect();
        if d.is_empty() {
            return 1.0;
        }
        d.sort_by(f64::total_cmp);
        let m = neighbors.min(d.len());
        (d[..m].iter().sum::<f64>() / m as f64).max(min_radius)
    })
}

pub fn rbf_fit_centers(x: &DMatrix<f64>, cfg: &RbfConfig, seed: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (centers, _) = kmeans(x, cfg.centers, cfg.kmeans_iterations, seed)?;
    let radii = neighbor_radii(&centers, cfg.neighbors, cfg.min_radius);
    Ok((centers, radii))
}

/// Least-squares output weights from the ridge normal equations, then
/// `lms_passes` sweeps of the LMS rule.
pub fn rbf_train_weights(
    centers: &DMatrix<f64>,
    radii: &DVector<f64>,
    data: &TrainingSet,
    cfg: &RbfConfig,
) -> Result<DMatrix<f64>> {
    let phi = design_matrix(centers, radii, &data.inputs);
    let k = radii.len();
    let gram = phi.transpose() * &phi + DMatrix::identity(k, k) * cfg.ridge;
    let rhs = phi.transpose() * &data.targets;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Solver(format!("rbf weights: {e}")))?,
    };
    let mut lw = w.transpose();
    for _ in 0..cfg.lms_passes {
        for r in 0..phi.nrows() {
            let a = phi.row(r).transpose();
            let e = data.targets.row(r).transpose() - &lw * &a;
            lw += e * a.transpose() * cfg.lms_rate;
        }
    }
    Ok(lw)
}

/// Fits a network to the training split of `data`.
pub fn train_rbf(data: &Dataset, cfg: &RbfConfig, seed: u64) -> Result<RbfModel> {
    cfg.validate()?;
    let train = data.normalized().rows(&data.train);
    let (centers, radii) = rbf_fit_centers(&train.inputs, cfg, seed)?;
    let lw = rbf_train_weights(&centers, &radii, &train, cfg)?;
    Ok(RbfModel {
        centers,
        radii,
        lw,
        stats: data.stats(),
    })
}
