//! Regularized least-squares image reconstruction.
//!
//! The attenuation estimate for an RSS-change vector `y` is
//!
//! ```text
//! x̂ = (WᵀW + η·C⁻¹)⁻¹ Wᵀ y,     C[m][n] = σ²·exp(−‖c_m − c_n‖ / δ)
//! ```
//!
//! The operator `(WᵀW + η·C⁻¹)⁻¹ Wᵀ` does not depend on `y`, so it is
//! factored once per scene and parameter set and every frame costs one
//! matrix-vector product.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::weight::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtiParams {
    pub eta: f64,
    pub sigma: f64,
    pub delta_corr_m: f64,
}

impl Default for RtiParams {
    fn default() -> Self {
        Self {
            eta: 1.5,
            sigma: 0.5,
            delta_corr_m: 3.0,
        }
    }
}

impl RtiParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta", self.eta),
            ("sigma", self.sigma),
            ("delta_corr_m", self.delta_corr_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Exponential-kernel prior covariance over the grid cells.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    grid: Grid,
    sigma: f64,
    delta_corr_m: f64,
    values: DMatrix<f64>,
}

pub fn covariance_matrix(grid: &Grid, params: &RtiParams) -> Result<CovarianceMatrix> {
    params.validate()?;
    let centers = grid.centers();
    let n = centers.len();
    let var = params.sigma * params.sigma;
    let mut values = DMatrix::zeros(n, n);
    for m in 0..n {
        values[(m, m)] = var;
        for k in (m + 1)..n {
            let v = var * (-centers[m].distance(centers[k]) / params.delta_corr_m).exp();
            values[(m, k)] = v;
            values[(k, m)] = v;
        }
    }
    Ok(CovarianceMatrix {
        grid: grid.clone(),
        sigma: params.sigma,
        delta_corr_m: params.delta_corr_m,
        values,
    })
}

impl CovarianceMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Cholesky factor of `C`. On failure a diagonal jitter of `1e-10·σ²` is
    /// added once before giving up.
    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        if let Some(ch) = Cholesky::new(self.values.clone()) {
            return Ok(ch);
        }
        let jitter = 1e-10 * self.sigma * self.sigma;
        warn!("covariance not positive definite at N = {}; adding jitter {jitter:e}", self.n());
        let mut jittered = self.values.clone();
        for i in 0..self.n() {
            jittered[(i, i)] += jitter;
        }
        Cholesky::new(jittered)
            .ok_or_else(|| Error::Numeric(format!("covariance of size {} is not positive definite", self.n())))
    }
}

/// Precomputed `N × Q` reconstruction operator.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    grid: Grid,
    matrix: DMatrix<f64>,
    link_ids: Vec<usize>,
    params_hash: u64,
}

pub fn precompute_projection(w: &WeightMatrix, c: &CovarianceMatrix, eta: f64) -> Result<ProjectionOperator> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::arg(format!("eta must be positive, got {eta}")));
    }
    if w.n() != c.n() {
        return Err(Error::arg(format!(
            "weight matrix has {} cells but covariance has {}",
            w.n(),
            c.n()
        )));
    }
    if w.grid_fingerprint() != c.grid().fingerprint() {
        return Err(Error::arg("weight matrix and covariance were built on different grids"));
    }
    let c_inv = c.cholesky()?.inverse();
    let dense = w.to_dense();
    let wt = dense.transpose();
    let mut normal = &wt * &dense + c_inv * eta;
    // round-off can leave the two triangles a few ulps apart
    normal = (&normal + normal.transpose()) * 0.5;
    let chol = Cholesky::new(normal)
        .ok_or_else(|| Error::Numeric("regularized normal matrix is not positive definite".into()))?;
    let matrix = chol.solve(&wt);

    let mut h = DefaultHasher::new();
    eta.to_bits().hash(&mut h);
    c.sigma.to_bits().hash(&mut h);
    c.delta_corr_m.to_bits().hash(&mut h);
    w.link_ids().hash(&mut h);
    Ok(ProjectionOperator {
        grid: c.grid().clone(),
        matrix,
        link_ids: w.link_ids().to_vec(),
        params_hash: h.finish(),
    })
}

/// Builds the covariance and the projection in one go.
pub fn projection_for(grid: &Grid, w: &WeightMatrix, params: &RtiParams) -> Result<ProjectionOperator> {
    let c = covariance_matrix(grid, params)?;
    precompute_projection(w, &c, params.eta)
}

impl ProjectionOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn link_ids(&self) -> &[usize] {
        &self.link_ids
    }

    pub fn params_hash(&self) -> u64 {
        self.params_hash
    }

    /// Number of links the operator expects.
    pub fn q(&self) -> usize {
        self.matrix.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationImage {
    grid: Grid,
    values: Vec<f64>,
    pub timestamp: f64,
}

pub fn reconstruct(p: &ProjectionOperator, delta_y: &[f64], timestamp: f64) -> Result<AttenuationImage> {
    if delta_y.len() != p.q() {
        return Err(Error::arg(format!(
            "expected {} RSS changes, got {}",
            p.q(),
            delta_y.len()
        )));
    }
    if let Some(i) = delta_y.iter().position(|v| !v.is_finite()) {
        return Err(Error::arg(format!("RSS change for link {i} is not finite")));
    }
    let x = &p.matrix * DVector::from_column_slice(delta_y);
    Ok(AttenuationImage {
        grid: p.grid.clone(),
        values: x.as_slice().to_vec(),
        timestamp,
    })
}

impl AttenuationImage {
    pub fn new(grid: Grid, values: Vec<f64>, timestamp: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::arg(format!(
                "image has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("image values must be finite"));
        }
        Ok(Self {
            grid,
            values,
            timestamp,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// `n_v` lines of `n_u` comma-separated values; line `r` holds grid row `r`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n_u = self.grid.n_u();
        for row in self.values.chunks(n_u) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}
