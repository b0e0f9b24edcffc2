//! The translation-type SPDE
//!
//! ```text
//! dY = L(Y) dt + Σ_j A^j(Y) dW^j,
//! L(y)   = ½ Σ_{i,k} (⟨σ, y⟩⟨σ, y⟩ᵀ)_{ik} ∂_i∂_k y − Σ_i ⟨b_i, y⟩ ∂_i y,
//! A^j(y) = −Σ_i ⟨σ^j_i, y⟩ ∂_i y,
//! ```
//!
//! in truncated coefficient space, its Galerkin Euler–Maruyama integrator and
//! the translated-profile solutions `Y_t = τ_{X_t} Φ` driven by the induced
//! finite-dimensional SDE with `b̄(x) = ⟨b, τ_x Φ⟩`, `σ̄^j(x) = ⟨σ^j, τ_x Φ⟩`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::delta_coefficients;
use crate::error::{Error, Result};
use crate::geometry::Chart;
use crate::hermite::{Projector, TruncationScheme};
use crate::invariance::AmbientFields;
use crate::operators::{derivative_matrix, translation_operator};
use crate::sde::{coarsen, euler_maruyama_with_increments, path_increments, step_count, SdeModel, Trajectory};
use crate::sobolev::CoefficientVector;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The profile `Φ` whose translates form the invariant manifold.
#[derive(Clone)]
pub enum Profile {
    /// `δ_a`; translates are evaluated exactly as `δ_{a+x}`.
    Delta(Vec<f64>),
    /// Smooth, Gaussian-dominated function; translates are shifted, then projected.
    Function(ScalarFn),
    /// Arbitrary coefficients; translates use the matrix exponential.
    Coefficients(CoefficientVector),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Delta(a) => f.debug_tuple("Delta").field(a).finish(),
            Profile::Function(_) => f.write_str("Function(..)"),
            Profile::Coefficients(c) => f.debug_tuple("Coefficients").field(&c.scheme()).finish(),
        }
    }
}

impl Profile {
    pub fn gaussian() -> Self {
        Profile::Function(Arc::new(|x: &[f64]| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()))
    }

    /// Norm index used for reporting: `−1` for deltas, `0` otherwise.
    pub fn default_regularity(&self) -> f64 {
        match self {
            Profile::Delta(_) => -1.0,
            _ => 0.0,
        }
    }
}

/// Coefficients `b_i`, `σ^j_i` and profile `Φ` of the SPDE on a fixed truncation.
#[derive(Clone, Debug)]
pub struct SpdeModel {
    scheme: TruncationScheme,
    drift_coeffs: Vec<CoefficientVector>,
    noise_coeffs: Vec<Vec<CoefficientVector>>,
    profile: Profile,
    derivatives: Vec<DMatrix<f64>>,
    second_derivatives: Vec<Vec<DMatrix<f64>>>,
    projector: Option<Arc<Projector>>,
}

impl SpdeModel {
    /// `drift_coeffs[i] = b_i`, `noise_coeffs[j][i] = σ^j_i`.
    pub fn new(
        scheme: TruncationScheme,
        drift_coeffs: Vec<CoefficientVector>,
        noise_coeffs: Vec<Vec<CoefficientVector>>,
        profile: Profile,
    ) -> Result<Self> {
        let d = scheme.dimension();
        if drift_coeffs.len() != d || noise_coeffs.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "need {d} drift components and {d} components per noise"
            )));
        }
        for v in drift_coeffs.iter().chain(noise_coeffs.iter().flatten()) {
            if v.scheme() != scheme {
                return Err(Error::SchemeMismatch {
                    left: scheme.to_string(),
                    right: v.scheme().to_string(),
                });
            }
        }
        match &profile {
            Profile::Delta(a) if a.len() != d => {
                return Err(Error::InvalidArgument("delta location has wrong dimension".into()))
            }
            Profile::Coefficients(c) if c.scheme() != scheme => {
                return Err(Error::SchemeMismatch {
                    left: scheme.to_string(),
                    right: c.scheme().to_string(),
                })
            }
            _ => {}
        }
        let derivatives: Vec<DMatrix<f64>> = (0..d)
            .map(|i| derivative_matrix(i, &scheme).map(|m| m.into_matrix()))
            .collect::<Result<_>>()?;
        let second_derivatives = (0..d)
            .map(|i| (0..d).map(|k| &derivatives[i] * &derivatives[k]).collect())
            .collect();
        let projector = match profile {
            Profile::Function(_) => Some(Arc::new(Projector::for_scheme(scheme)?)),
            _ => None,
        };
        Ok(Self {
            scheme,
            drift_coeffs,
            noise_coeffs,
            profile,
            derivatives,
            second_derivatives,
            projector,
        })
    }

    /// Projects smooth coefficient functions `b_i` and `σ^j_i` onto the basis.
    pub fn from_functions(
        scheme: TruncationScheme,
        drift: &[ScalarFn],
        noise: &[Vec<ScalarFn>],
        profile: Profile,
    ) -> Result<Self> {
        let projector = Projector::for_scheme(scheme)?;
        let drift_coeffs = drift.iter().map(|f| projector.project(|x| f(x))).collect::<Result<_>>()?;
        let noise_coeffs = noise
            .iter()
            .map(|col| col.iter().map(|f| projector.project(|x| f(x))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Self::new(scheme, drift_coeffs, noise_coeffs, profile)
    }

    pub fn scheme(&self) -> TruncationScheme {
        self.scheme
    }

    pub fn dimension(&self) -> usize {
        self.scheme.dimension()
    }

    pub fn noise_count(&self) -> usize {
        self.noise_coeffs.len()
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn drift_coeffs(&self) -> &[CoefficientVector] {
        &self.drift_coeffs
    }

    pub fn noise_coeffs(&self) -> &[Vec<CoefficientVector>] {
        &self.noise_coeffs
    }

    /// Truncated `∂_i`.
    pub fn derivative(&self, axis: usize) -> &DMatrix<f64> {
        &self.derivatives[axis]
    }

    /// Truncated `∂_i ∂_k`.
    pub fn second_derivative(&self, i: usize, k: usize) -> &DMatrix<f64> {
        &self.second_derivatives[i][k]
    }

    fn check(&self, y: &CoefficientVector) -> Result<()> {
        if y.scheme() != self.scheme {
            return Err(Error::SchemeMismatch {
                left: self.scheme.to_string(),
                right: y.scheme().to_string(),
            });
        }
        Ok(())
    }

    /// `(⟨b_1, y⟩, …, ⟨b_d, y⟩)`.
    pub fn drift_pairings(&self, y: &CoefficientVector) -> Result<DVector<f64>> {
        self.check(y)?;
        let v = y.to_dvector();
        Ok(DVector::from_iterator(
            self.dimension(),
            self.drift_coeffs.iter().map(|b| b.to_dvector().dot(&v)),
        ))
    }

    /// `d × r` matrix with entries `⟨σ^j_i, y⟩`.
    pub fn noise_pairings(&self, y: &CoefficientVector) -> Result<DMatrix<f64>> {
        self.check(y)?;
        let v = y.to_dvector();
        let mut out = DMatrix::zeros(self.dimension(), self.noise_count());
        for (j, col) in self.noise_coeffs.iter().enumerate() {
            for (i, s) in col.iter().enumerate() {
                out[(i, j)] = s.to_dvector().dot(&v);
            }
        }
        Ok(out)
    }

    fn drift_vec(&self, y: &DVector<f64>, beta: &DVector<f64>, sigma: &DMatrix<f64>) -> DVector<f64> {
        let d = self.dimension();
        let mut out = DVector::zeros(y.len());
        let a = sigma * sigma.transpose();
        for i in 0..d {
            for k in 0..d {
                if a[(i, k)] != 0.0 {
                    out += &self.second_derivatives[i][k] * y * (0.5 * a[(i, k)]);
                }
            }
            if beta[i] != 0.0 {
                out -= &self.derivatives[i] * y * beta[i];
            }
        }
        out
    }

    fn diffusion_vecs(&self, y: &DVector<f64>, sigma: &DMatrix<f64>) -> Vec<DVector<f64>> {
        let dy: Vec<DVector<f64>> = self.derivatives.iter().map(|m| m * y).collect();
        (0..self.noise_count())
            .map(|j| {
                let mut acc = DVector::zeros(y.len());
                for (i, di) in dy.iter().enumerate() {
                    acc -= di * sigma[(i, j)];
                }
                acc
            })
            .collect()
    }

    /// `L(y)`.
    pub fn drift(&self, y: &CoefficientVector) -> Result<CoefficientVector> {
        let beta = self.drift_pairings(y)?;
        let sigma = self.noise_pairings(y)?;
        CoefficientVector::from_dvector(self.scheme, &self.drift_vec(&y.to_dvector(), &beta, &sigma))
    }

    /// `A^1(y), …, A^r(y)`.
    pub fn diffusion(&self, y: &CoefficientVector) -> Result<Vec<CoefficientVector>> {
        let sigma = self.noise_pairings(y)?;
        self.diffusion_vecs(&y.to_dvector(), &sigma)
            .iter()
            .map(|v| CoefficientVector::from_dvector(self.scheme, v))
            .collect()
    }

    /// `τ_x Φ`.
    pub fn translated_profile(&self, x: &[f64]) -> Result<CoefficientVector> {
        if x.len() != self.dimension() {
            return Err(Error::InvalidArgument("shift has wrong dimension".into()));
        }
        match &self.profile {
            Profile::Delta(a) => {
                let moved: Vec<f64> = a.iter().zip(x).map(|(p, q)| p + q).collect();
                delta_coefficients(&moved, &self.scheme)
            }
            Profile::Function(f) => {
                let projector = self.projector.as_ref().expect("built with the model");
                projector.project(|y| {
                    let shifted: Vec<f64> = y.iter().zip(x).map(|(p, q)| p - q).collect();
                    f(&shifted)
                })
            }
            Profile::Coefficients(c) => translation_operator(x, &self.scheme)?.apply(c),
        }
    }

    /// `τ_x Φ` through the matrix exponential, whatever the profile kind.
    pub fn translated_profile_by_expm(&self, x: &[f64]) -> Result<CoefficientVector> {
        let phi = self.translated_profile(&vec![0.0; self.dimension()])?;
        translation_operator(x, &self.scheme)?.apply(&phi)
    }

    /// Drift and diffusion of the induced SDE on `R^d`.
    pub fn induced_sde(&self) -> InducedSde<'_> {
        InducedSde { model: self }
    }

    /// `y + L(y) dt + Σ_j A^j(y) ΔW^j`.
    pub fn galerkin_step(&self, y: &CoefficientVector, dt: f64, dw: &[f64]) -> Result<CoefficientVector> {
        if dw.len() != self.noise_count() {
            return Err(Error::GridMismatch(format!(
                "{} increments for {} noises",
                dw.len(),
                self.noise_count()
            )));
        }
        let beta = self.drift_pairings(y)?;
        let sigma = self.noise_pairings(y)?;
        let v = y.to_dvector();
        let mut next = &v + self.drift_vec(&v, &beta, &sigma) * dt;
        for (a, w) in self.diffusion_vecs(&v, &sigma).iter().zip(dw) {
            next += a * *w;
        }
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "Galerkin step".into(),
            });
        }
        CoefficientVector::from_dvector(self.scheme, &next)
    }

    /// Galerkin Euler–Maruyama over the rows of `increments`.
    pub fn galerkin_integrate(
        &self,
        y0: &CoefficientVector,
        dt: f64,
        increments: &DMatrix<f64>,
    ) -> Result<SpdeTrajectory> {
        self.check(y0)?;
        let mut states = Vec::with_capacity(increments.nrows() + 1);
        states.push(y0.clone());
        let mut y = y0.clone();
        let mut dw = vec![0.0; increments.ncols()];
        for k in 0..increments.nrows() {
            for (j, w) in dw.iter_mut().enumerate() {
                *w = increments[(k, j)];
            }
            y = self
                .galerkin_step(&y, dt, &dw)
                .map_err(|_| Error::BlowUp { step: k + 1 })?;
            states.push(y.clone());
        }
        Ok(SpdeTrajectory {
            scheme: self.scheme,
            times: (0..states.len()).map(|k| k as f64 * dt).collect(),
            states,
            regularity: self.profile.default_regularity(),
            seed: None,
            shifts: None,
        })
    }

    /// `Y_t = τ_{X_t} Φ` with `X` the Euler–Maruyama path of the induced SDE
    /// driven by `increments`.
    pub fn translated_profile_solution(
        &self,
        x0: &[f64],
        dt: f64,
        increments: &DMatrix<f64>,
    ) -> Result<SpdeTrajectory> {
        let induced = self.induced_sde();
        let path = euler_maruyama_with_increments(&induced, x0, dt, increments)?;
        let states = path
            .par_iter()
            .map(|x| self.translated_profile(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpdeTrajectory {
            scheme: self.scheme,
            times: (0..states.len()).map(|k| k as f64 * dt).collect(),
            states,
            regularity: self.profile.default_regularity(),
            seed: None,
            shifts: Some(path),
        })
    }

    /// Orbit map `x ↦ τ_x Φ` as a chart into coefficient space.
    pub fn orbit_chart(&self) -> OrbitChart<'_> {
        OrbitChart { model: self }
    }

    /// Largest `L²` mass of `τ_x Φ` lost to truncation over the given shifts,
    /// measured against a projection at `reference_degree`.
    pub fn truncation_floor(&self, shifts: &[Vec<f64>], reference_degree: usize) -> Result<f64> {
        if reference_degree <= self.scheme.max_degree() {
            return Err(Error::InvalidArgument("reference degree must exceed K".into()));
        }
        let reference = SpdeModel::new(
            self.scheme.with_max_degree(reference_degree),
            self.drift_coeffs
                .iter()
                .map(|_| CoefficientVector::zeros(self.scheme.with_max_degree(reference_degree)))
                .collect(),
            vec![],
            match &self.profile {
                Profile::Coefficients(c) => {
                    let big = self.scheme.with_max_degree(reference_degree);
                    let mut v = vec![0.0; big.basis_size()];
                    v[..c.len()].copy_from_slice(c.coefficients());
                    Profile::Coefficients(CoefficientVector::new(big, v)?)
                }
                other => other.clone(),
            },
        )?;
        let p = self.profile.default_regularity();
        let mut worst = 0.0f64;
        for x in shifts {
            let full = reference.translated_profile(x)?.norm_p(p).powi(2);
            let kept = self.translated_profile(x)?.norm_p(p).powi(2);
            worst = worst.max((full - kept).max(0.0).sqrt());
        }
        Ok(worst)
    }
}

/// `b̄(x) = ⟨b, τ_x Φ⟩`, `σ̄^j(x) = ⟨σ^j, τ_x Φ⟩`.
pub struct InducedSde<'a> {
    model: &'a SpdeModel,
}

impl SdeModel for InducedSde<'_> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn noise_count(&self) -> usize {
        self.model.noise_count()
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        let y = self.model.translated_profile(x).expect("shift has model dimension");
        self.model.drift_pairings(&y).expect("same scheme")
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let y = self.model.translated_profile(x).expect("shift has model dimension");
        self.model.noise_pairings(&y).expect("same scheme")
    }

    fn name(&self) -> String {
        "induced".into()
    }
}

/// `ψ(x) = τ_x Φ`, `dψ(x) v = −Σ_i v_i ∂_i ψ(x)`, `d²ψ(x)(v, w) = Σ_{i,k} v_i w_k ∂_i∂_k ψ(x)`.
pub struct OrbitChart<'a> {
    model: &'a SpdeModel,
}

impl Chart for OrbitChart<'_> {
    fn chart_dim(&self) -> usize {
        self.model.dimension()
    }

    fn ambient_dim(&self) -> usize {
        self.model.scheme.basis_size()
    }

    fn map(&self, x: &[f64]) -> DVector<f64> {
        self.model.translated_profile(x).expect("valid shift").to_dvector()
    }

    fn differential(&self, x: &[f64]) -> DMatrix<f64> {
        let psi = self.map(x);
        let d = self.model.dimension();
        let mut out = DMatrix::zeros(psi.len(), d);
        for i in 0..d {
            out.set_column(i, &(-(&self.model.derivatives[i] * &psi)));
        }
        out
    }

    fn second_differential(&self, x: &[f64], v: &[f64], w: &[f64]) -> DVector<f64> {
        let psi = self.map(x);
        let mut out = DVector::zeros(psi.len());
        for (i, vi) in v.iter().enumerate() {
            for (k, wk) in w.iter().enumerate() {
                if vi * wk != 0.0 {
                    out += &self.model.second_derivatives[i][k] * &psi * (vi * wk);
                }
            }
        }
        out
    }
}

impl AmbientFields for SpdeModel {
    fn drift(&self, y: &DVector<f64>) -> DVector<f64> {
        let y = CoefficientVector::from_dvector(self.scheme, y).expect("finite coefficients");
        self.drift(&y).expect("same scheme").to_dvector()
    }

    fn diffusions(&self, y: &DVector<f64>) -> Vec<DVector<f64>> {
        let y = CoefficientVector::from_dvector(self.scheme, y).expect("finite coefficients");
        self.diffusion(&y)
            .expect("same scheme")
            .iter()
            .map(CoefficientVector::to_dvector)
            .collect()
    }
}

/// Coefficient states on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdeTrajectory {
    pub scheme: TruncationScheme,
    pub times: Vec<f64>,
    pub states: Vec<CoefficientVector>,
    /// Norm index used when reporting distances.
    pub regularity: f64,
    pub seed: Option<u64>,
    /// Shifts `X_t` for translated-profile solutions.
    pub shifts: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct SpdeTrajectoryFile {
    dimension: usize,
    max_degree: usize,
    order: String,
    regularity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    times: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shifts: Option<Vec<Vec<f64>>>,
}

impl SpdeTrajectory {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SpdeTrajectoryFile {
            dimension: self.scheme.dimension(),
            max_degree: self.scheme.max_degree(),
            order: "graded-lex".into(),
            regularity: self.regularity,
            seed: self.seed,
            times: self.times.clone(),
            coefficients: self.states.iter().map(|s| s.coefficients().to_vec()).collect(),
            shifts: self.shifts.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpdeTrajectoryFile = serde_json::from_str(text)?;
        if file.order != "graded-lex" {
            return Err(Error::InvalidArgument(format!("unsupported basis order {}", file.order)));
        }
        let scheme = TruncationScheme::new(file.dimension, file.max_degree)?;
        if file.times.len() != file.coefficients.len() {
            return Err(Error::GridMismatch("times and states differ in length".into()));
        }
        Ok(Self {
            scheme,
            times: file.times,
            states: file
                .coefficients
                .into_iter()
                .map(|c| CoefficientVector::new(scheme, c))
                .collect::<Result<_>>()?,
            regularity: file.regularity,
            seed: file.seed,
            shifts: file.shifts,
        })
    }
}

/// `(t, ‖a_t − b_t‖_p)` for each grid time.
pub fn compare_trajectories(a: &SpdeTrajectory, b: &SpdeTrajectory, p: f64) -> Result<Vec<(f64, f64)>> {
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-12 * s.abs().max(1.0))
    {
        return Err(Error::GridMismatch(format!(
            "{} vs {} time points",
            a.times.len(),
            b.times.len()
        )));
    }
    a.states
        .iter()
        .zip(&b.states)
        .zip(&a.times)
        .map(|((x, y), t)| Ok((*t, x.distance_p(y, p)?)))
        .collect()
}

/// CSV with header `t,distance`.
pub fn write_distance_csv<W: Write>(series: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "distance"])?;
    for (t, d) in series {
        w.write_record([t.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub dt: f64,
    /// Mean over paths of `sup_t ‖Y^{profile}_t − Y^{Galerkin}_t‖_p`.
    pub mean_sup_distance: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingExperiment {
    pub rows: Vec<CouplingRow>,
    pub truncation_floor: f64,
    pub regularity: f64,
    pub paths: usize,
    pub seed: u64,
    /// Successive ratios of `(distance − floor)` as `dt` decreases.
    pub ratios: Vec<f64>,
}

/// Runs the translated-profile and Galerkin integrators from `τ_{x0} Φ` under
/// common noise for each `dt` (increments drawn at the finest `dt` and summed
/// onto coarser grids) and records the mean sup-in-time distance.
pub fn common_noise_experiment(
    model: &SpdeModel,
    x0: &[f64],
    horizon: f64,
    dts: &[f64],
    paths: usize,
    seed: u64,
    p: f64,
) -> Result<CouplingExperiment> {
    if dts.is_empty() || paths == 0 {
        return Err(Error::InvalidArgument("need at least one dt and one path".into()));
    }
    let mut sorted = dts.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite dt"));
    let finest = *sorted.last().expect("nonempty");
    let fine_steps = step_count(horizon, finest)?;
    let factors: Vec<usize> = sorted
        .iter()
        .map(|dt| {
            let f = (dt / finest).round();
            if (f * finest - dt).abs() > 1e-9 * dt || fine_steps % f as usize != 0 {
                Err(Error::GridMismatch(format!("dt {dt} is not a multiple of {finest}")))
            } else {
                Ok(f as usize)
            }
        })
        .collect::<Result<_>>()?;
    let y0 = model.translated_profile(x0)?;
    let per_path: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..paths as u64)
        .into_par_iter()
        .map(|path| {
            let fine = path_increments(seed, path, fine_steps, model.noise_count(), finest);
            let mut sups = Vec::with_capacity(sorted.len());
            let mut visited = Vec::new();
            for (&factor, &dt) in factors.iter().zip(&sorted) {
                let inc = if factor == 1 { fine.clone() } else { coarsen(&fine, factor)? };
                let profile = model.translated_profile_solution(x0, dt, &inc)?;
                let galerkin = model.galerkin_integrate(&y0, dt, &inc)?;
                let series = compare_trajectories(&profile, &galerkin, p)?;
                sups.push(series.iter().map(|s| s.1).fold(0.0, f64::max));
                visited.extend(profile.shifts.unwrap_or_default());
            }
            Ok((sups, visited))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<CouplingRow> = sorted
        .iter()
        .enumerate()
        .map(|(i, &dt)| {
            let v: Vec<f64> = per_path.iter().map(|(s, _)| s[i]).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            CouplingRow {
                dt,
                mean_sup_distance: mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect();
    // floor measured on a thinned set of visited shifts
    let mut visited: Vec<Vec<f64>> = per_path.into_iter().flat_map(|(_, v)| v).collect();
    let stride = (visited.len() / 200).max(1);
    visited = visited.into_iter().step_by(stride).collect();
    let truncation_floor = model.truncation_floor(&visited, 2 * model.scheme().max_degree())?;
    let ratios = rows
        .windows(2)
        .map(|w| (w[0].mean_sup_distance - truncation_floor) / (w[1].mean_sup_distance - truncation_floor))
        .collect();
    Ok(CouplingExperiment {
        rows,
        truncation_floor,
        regularity: p,
        paths,
        seed,
        ratios,
    })
}

/// Gaussian profile in one dimension with `b_1 = ½ h_1` and `σ^1_1 = 0.8 h_0`.
pub fn gaussian_profile_model(max_degree: usize) -> Result<SpdeModel> {
    let scheme = TruncationScheme::new(1, max_degree)?;
    if max_degree < 1 {
        return Err(Error::InvalidArgument("need K >= 1".into()));
    }
    let b = CoefficientVector::unit(scheme, 1).scale(0.5);
    let s = CoefficientVector::unit(scheme, 0).scale(0.8);
    SpdeModel::new(scheme, vec![b], vec![vec![s]], Profile::gaussian())
}

/// `Φ = δ_0` in one dimension with smooth `b(x) = ½ cos(x) e^{-x²/8}` and
/// `σ(x) = 0.8 e^{-x²/8}`.
pub fn delta_profile_model(max_degree: usize) -> Result<SpdeModel> {
    let scheme = TruncationScheme::new(1, max_degree)?;
    SpdeModel::from_functions(
        scheme,
        &[Arc::new(|x: &[f64]| 0.5 * x[0].cos() * (-x[0] * x[0] / 8.0).exp())],
        &[vec![Arc::new(|x: &[f64]| 0.8 * (-x[0] * x[0] / 8.0).exp())]],
        Profile::Delta(vec![0.0]),
    )
}

/// Attaches the driving increments of a translated-profile solution to its
/// shift path, as an SDE trajectory.
pub fn shift_trajectory(solution: &SpdeTrajectory, increments: &DMatrix<f64>, seed: u64) -> Option<Trajectory> {
    Some(Trajectory {
        times: solution.times.clone(),
        states: solution.shifts.clone()?,
        wiener_increments: Some(increments.row_iter().map(|r| r.iter().copied().collect()).collect()),
        seed,
        path: 0,
    })
}
