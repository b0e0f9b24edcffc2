//! Euler–Maruyama integration with reproducible, path-indexed Wiener increments.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift `b` and diffusion columns `σ^1..σ^r` of `dX = b(X) dt + Σ_j σ^j(X) dW^j`.
pub trait SdeModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn noise_count(&self) -> usize;

    fn drift(&self, x: &[f64]) -> DVector<f64>;

    /// `d × r` matrix whose column `j` is `σ^j(x)`.
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64>;

    /// Jacobians `Dσ^j(x)`, with `Dσ^j[i][k] = ∂_k σ^j_i`, when known in closed form.
    fn diffusion_jacobians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    fn name(&self) -> String {
        "sde".to_string()
    }
}

impl<M: SdeModel + ?Sized> SdeModel for Arc<M> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn noise_count(&self) -> usize {
        (**self).noise_count()
    }
    fn drift(&self, x: &[f64]) -> DVector<f64> {
        (**self).drift(x)
    }
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).diffusion(x)
    }
    fn diffusion_jacobians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        (**self).diffusion_jacobians(x)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Spherical Brownian motion in Itô form: `b(x) = −(d−1)/2 x`, `σ^j(x) = e_j − x_j x`.
#[derive(Clone, Copy, Debug)]
pub struct StroockSphere {
    dimension: usize,
}

impl StroockSphere {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidArgument("sphere model needs d >= 2".into()));
        }
        Ok(Self { dimension })
    }
}

impl SdeModel for StroockSphere {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn noise_count(&self) -> usize {
        self.dimension
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x) * (-(self.dimension as f64 - 1.0) / 2.0)
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let v = DVector::from_column_slice(x);
        DMatrix::identity(self.dimension, self.dimension) - &v * v.transpose()
    }

    fn diffusion_jacobians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        let d = self.dimension;
        let v = DVector::from_column_slice(x);
        Some(
            (0..d)
                .map(|j| {
                    // ∂_k σ^j_i = −δ_jk x_i − x_j δ_ik
                    let mut m = DMatrix::identity(d, d) * (-x[j]);
                    for i in 0..d {
                        m[(i, j)] -= v[i];
                    }
                    m
                })
                .collect(),
        )
    }

    fn name(&self) -> String {
        format!("stroock-sphere d={}", self.dimension)
    }
}

/// `dX = −θ X dt + s dW` with one independent noise per coordinate.
#[derive(Clone, Copy, Debug)]
pub struct OrnsteinUhlenbeck {
    pub dimension: usize,
    pub mean_reversion: f64,
    pub volatility: f64,
}

impl SdeModel for OrnsteinUhlenbeck {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn noise_count(&self) -> usize {
        self.dimension
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x) * (-self.mean_reversion)
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dimension, self.dimension) * self.volatility
    }

    fn diffusion_jacobians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![DMatrix::zeros(self.dimension, self.dimension); self.dimension])
    }

    fn name(&self) -> String {
        "ornstein-uhlenbeck".into()
    }
}

/// `b(x) = B x + β`, `σ^j(x) = C_j x + s_j`.
#[derive(Clone, Debug)]
pub struct AffineModel {
    drift_matrix: DMatrix<f64>,
    drift_offset: DVector<f64>,
    noise_matrices: Vec<DMatrix<f64>>,
    noise_offsets: Vec<DVector<f64>>,
    label: String,
}

impl AffineModel {
    pub fn new(
        drift_matrix: DMatrix<f64>,
        drift_offset: DVector<f64>,
        noise_matrices: Vec<DMatrix<f64>>,
        noise_offsets: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let d = drift_offset.len();
        let square = |m: &DMatrix<f64>| m.nrows() == d && m.ncols() == d;
        if !square(&drift_matrix)
            || noise_matrices.len() != noise_offsets.len()
            || !noise_matrices.iter().all(square)
            || noise_offsets.iter().any(|s| s.len() != d)
        {
            return Err(Error::InvalidArgument("affine model has inconsistent shapes".into()));
        }
        Ok(Self {
            drift_matrix,
            drift_offset,
            noise_matrices,
            noise_offsets,
            label: "affine".into(),
        })
    }

    /// `b = 0`, `σ = 0` with `r` noises.
    pub fn zero(dimension: usize, noise_count: usize) -> Self {
        Self::new(
            DMatrix::zeros(dimension, dimension),
            DVector::zeros(dimension),
            vec![DMatrix::zeros(dimension, dimension); noise_count],
            vec![DVector::zeros(dimension); noise_count],
        )
        .expect("shapes agree")
        .with_label("zero")
    }

    /// `b(x) = x`, `σ = 0`.
    pub fn radial_drift(dimension: usize) -> Self {
        Self::new(
            DMatrix::identity(dimension, dimension),
            DVector::zeros(dimension),
            vec![],
            vec![],
        )
        .expect("shapes agree")
        .with_label("radial-drift")
    }

    /// One rotational noise `σ^1(x) = J x`. With `ito_corrected` the drift is
    /// `½ J² x + Ω x`, otherwise it is zero.
    pub fn rotational_noise(generator: DMatrix<f64>, extra_drift: DMatrix<f64>, ito_corrected: bool) -> Result<Self> {
        let d = generator.nrows();
        let drift = if ito_corrected {
            &generator * &generator * 0.5 + extra_drift
        } else {
            DMatrix::zeros(d, d)
        };
        let label = if ito_corrected { "rotation" } else { "uncorrected-rotation" };
        Ok(Self::new(drift, DVector::zeros(d), vec![generator], vec![DVector::zeros(d)])?.with_label(label))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl SdeModel for AffineModel {
    fn dimension(&self) -> usize {
        self.drift_offset.len()
    }

    fn noise_count(&self) -> usize {
        self.noise_offsets.len()
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        &self.drift_matrix * DVector::from_column_slice(x) + &self.drift_offset
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let v = DVector::from_column_slice(x);
        let d = self.dimension();
        let mut out = DMatrix::zeros(d, self.noise_count());
        for (j, (c, s)) in self.noise_matrices.iter().zip(&self.noise_offsets).enumerate() {
            out.set_column(j, &(c * &v + s));
        }
        out
    }

    fn diffusion_jacobians(&self, _x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        Some(self.noise_matrices.clone())
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

type VectorField = Box<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
type MatrixField = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type JacobianField = Box<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

/// Model assembled from closures.
pub struct FnModel {
    dimension: usize,
    noise_count: usize,
    drift: VectorField,
    diffusion: MatrixField,
    jacobians: Option<JacobianField>,
    label: String,
}

impl FnModel {
    pub fn new(
        dimension: usize,
        noise_count: usize,
        drift: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        diffusion: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dimension,
            noise_count,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            jacobians: None,
            label: "custom".into(),
        }
    }

    pub fn with_jacobians(
        mut self,
        jacobians: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.jacobians = Some(Box::new(jacobians));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl SdeModel for FnModel {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn noise_count(&self) -> usize {
        self.noise_count
    }
    fn drift(&self, x: &[f64]) -> DVector<f64> {
        (self.drift)(x)
    }
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        (self.diffusion)(x)
    }
    fn diffusion_jacobians(&self, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        self.jacobians.as_ref().map(|j| j(x))
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

/// `M × r` matrix of i.i.d. `N(0, dt)` increments for Monte Carlo path `path`.
///
/// Each `(seed, path)` pair owns an independent ChaCha stream, so any path can
/// be regenerated without drawing the others.
pub fn path_increments(seed: u64, path: u64, steps: usize, noise_count: usize, dt: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let scale = dt.sqrt();
    // row-major fill: step by step, component by component
    let mut m = DMatrix::zeros(steps, noise_count);
    for k in 0..steps {
        for j in 0..noise_count {
            let z: f64 = rng.sample(StandardNormal);
            m[(k, j)] = scale * z;
        }
    }
    m
}

/// Increments for path 0 of `seed`.
pub fn coupled_increments(seed: u64, steps: usize, noise_count: usize, dt: f64) -> DMatrix<f64> {
    path_increments(seed, 0, steps, noise_count, dt)
}

/// Sums consecutive blocks of `factor` rows: the same Brownian path on a grid
/// `factor` times coarser.
pub fn coarsen(increments: &DMatrix<f64>, factor: usize) -> Result<DMatrix<f64>> {
    if factor == 0 || increments.nrows() % factor != 0 {
        return Err(Error::GridMismatch(format!(
            "{} steps cannot be grouped by {factor}",
            increments.nrows()
        )));
    }
    let rows = increments.nrows() / factor;
    let mut out = DMatrix::zeros(rows, increments.ncols());
    for k in 0..rows {
        for j in 0..increments.ncols() {
            out[(k, j)] = (0..factor).map(|i| increments[(k * factor + i, j)]).sum();
        }
    }
    Ok(out)
}

/// Number of steps of size `dt` covering `[0, horizon]`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() || !horizon.is_finite() || horizon < dt {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and horizon >= dt, got dt={dt}, horizon={horizon}"
        )));
    }
    let steps = (horizon / dt).round();
    if ((steps * dt) - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::GridMismatch(format!("horizon {horizon} is not a multiple of dt {dt}")));
    }
    Ok(steps as usize)
}

/// One simulated path on a uniform grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Row `k` holds `ΔW_k` for the step `t_k → t_{k+1}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiener_increments: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    #[serde(default)]
    pub path: u64,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.times.get(1).map_or(0.0, |t| t - self.times[0])
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn increments_matrix(&self) -> Option<DMatrix<f64>> {
        let rows = self.wiener_increments.as_ref()?;
        let r = rows.first().map_or(0, Vec::len);
        Some(DMatrix::from_fn(rows.len(), r, |k, j| rows[k][j]))
    }

    pub fn without_increments(mut self) -> Self {
        self.wiener_increments = None;
        self
    }

    /// CSV with header `t,x_1,...,x_d`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Euler–Maruyama driven by the given `M × r` increment matrix.
pub fn euler_maruyama_with_increments<M: SdeModel + ?Sized>(
    model: &M,
    x0: &[f64],
    dt: f64,
    increments: &DMatrix<f64>,
) -> Result<Vec<Vec<f64>>> {
    let d = model.dimension();
    if x0.len() != d {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} components, model dimension {d}",
            x0.len()
        )));
    }
    if increments.ncols() != model.noise_count() {
        return Err(Error::GridMismatch(format!(
            "{} noise columns supplied, model uses {}",
            increments.ncols(),
            model.noise_count()
        )));
    }
    let mut states = Vec::with_capacity(increments.nrows() + 1);
    let mut x = DVector::from_column_slice(x0);
    states.push(x0.to_vec());
    for k in 0..increments.nrows() {
        let xs = x.as_slice();
        let dw = increments.row(k).transpose();
        let next = &x + model.drift(xs) * dt + model.diffusion(xs) * dw;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        x = next;
        states.push(x.as_slice().to_vec());
    }
    Ok(states)
}

/// `X_{k+1} = X_k + b(X_k) dt + Σ_j σ^j(X_k) ΔW^j_k` with increments from
/// [`path_increments`].
pub fn euler_maruyama_path<M: SdeModel + ?Sized>(
    model: &M,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
    path: u64,
) -> Result<Trajectory> {
    let steps = step_count(horizon, dt)?;
    let increments = path_increments(seed, path, steps, model.noise_count(), dt);
    let states = euler_maruyama_with_increments(model, x0, dt, &increments)?;
    Ok(Trajectory {
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        states,
        wiener_increments: Some(
            increments.row_iter().map(|r| r.iter().copied().collect()).collect(),
        ),
        seed,
        path,
    })
}

pub fn euler_maruyama<M: SdeModel + ?Sized>(
    model: &M,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    euler_maruyama_path(model, x0, horizon, dt, seed, 0)
}

/// Runs `paths` independent paths in parallel; output is ordered by path index.
pub fn simulate_paths<M: SdeModel + ?Sized>(
    model: &M,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
    paths: usize,
) -> Result<Vec<Trajectory>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|p| euler_maruyama_path(model, x0, horizon, dt, seed, p))
        .collect()
}

/// Applies `f` to every path index in parallel, preserving order.
pub fn monte_carlo<T: Send>(paths: usize, f: impl Fn(u64) -> Result<T> + Send + Sync) -> Result<Vec<T>> {
    (0..paths as u64).into_par_iter().map(f).collect()
}
