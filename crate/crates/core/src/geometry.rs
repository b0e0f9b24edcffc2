//! Level-set and chart descriptions of submanifolds, tangent projectors, the
//! Itô generator and the Stratonovich correction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sde::SdeModel;

/// Feasibility tolerance for points produced by closed-form samplers.
pub const ANALYTIC_FEAS_TOL: f64 = 1e-10;
/// Feasibility tolerance for points produced by Newton projection.
pub const PROJECTED_FEAS_TOL: f64 = 1e-6;
pub const MAX_PROJECTION_ITERATIONS: usize = 50;
/// Condition numbers of `Df Dfᵀ` above this are treated as rank loss.
pub const RANK_CONDITION_LIMIT: f64 = 1e12;

/// Central-difference step `ε^{1/3} (1 + |x|)`.
pub fn fd_step(x: &[f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    f64::EPSILON.cbrt() * (1.0 + norm)
}

type VectorMap = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
type MatrixMap = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type HessianMap = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum ManifoldKind {
    Sphere { radius: f64 },
    Hyperplane { normal: Vec<f64>, offset: f64 },
    /// Torus of revolution around the third axis in R³.
    Torus { major: f64, minor: f64 },
    Custom,
}

/// `N = {x : f(x) = 0}` for `f : R^d → R^n`.
#[derive(Clone)]
pub struct LevelSetManifold {
    ambient_dim: usize,
    codim: usize,
    f: VectorMap,
    jacobian: MatrixMap,
    hessians: Option<HessianMap>,
    kind: ManifoldKind,
}

impl fmt::Debug for LevelSetManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSetManifold")
            .field("ambient_dim", &self.ambient_dim)
            .field("codim", &self.codim)
            .field("kind", &self.kind)
            .field("analytic_hessians", &self.hessians.is_some())
            .finish()
    }
}

impl LevelSetManifold {
    /// User-supplied level set. Without `hessians`, second derivatives come
    /// from central differences of the Jacobian.
    pub fn custom(
        ambient_dim: usize,
        codim: usize,
        f: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        hessians: Option<HessianMap>,
    ) -> Result<Self> {
        if codim == 0 || codim >= ambient_dim {
            return Err(Error::InvalidArgument(format!(
                "codimension {codim} must lie in 1..{ambient_dim}"
            )));
        }
        Ok(Self {
            ambient_dim,
            codim,
            f: Arc::new(f),
            jacobian: Arc::new(jacobian),
            hessians,
            kind: ManifoldKind::Custom,
        })
    }

    /// `‖x‖² − radius² = 0`.
    pub fn sphere(ambient_dim: usize, radius: f64) -> Result<Self> {
        if ambient_dim < 2 || !(radius > 0.0) {
            return Err(Error::InvalidArgument("sphere needs d >= 2 and radius > 0".into()));
        }
        let r2 = radius * radius;
        let mut m = Self::custom(
            ambient_dim,
            1,
            move |x| DVector::from_element(1, x.iter().map(|v| v * v).sum::<f64>() - r2),
            |x| DMatrix::from_row_slice(1, x.len(), &x.iter().map(|v| 2.0 * v).collect::<Vec<_>>()),
            Some(Arc::new(move |_: &[f64]| {
                vec![DMatrix::identity(ambient_dim, ambient_dim) * 2.0]
            })),
        )?;
        m.kind = ManifoldKind::Sphere { radius };
        Ok(m)
    }

    pub fn unit_sphere(ambient_dim: usize) -> Result<Self> {
        Self::sphere(ambient_dim, 1.0)
    }

    /// `⟨x, η⟩ − offset = 0`.
    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let d = normal.len();
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument("hyperplane normal must be nonzero".into()));
        }
        let eta = normal.clone();
        let eta_row = normal.clone();
        let mut m = Self::custom(
            d,
            1,
            move |x| DVector::from_element(1, x.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>() - offset),
            move |_| DMatrix::from_row_slice(1, d, &eta_row),
            Some(Arc::new(move |_: &[f64]| vec![DMatrix::zeros(d, d)])),
        )?;
        m.kind = ManifoldKind::Hyperplane { normal, offset };
        Ok(m)
    }

    /// `(√(x²+y²) − major)² + z² − minor² = 0` in R³. Second derivatives use
    /// finite differences.
    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        if !(major > minor && minor > 0.0) {
            return Err(Error::InvalidArgument("torus needs major > minor > 0".into()));
        }
        let mut m = Self::custom(
            3,
            1,
            move |x| {
                let rho = x[0].hypot(x[1]);
                DVector::from_element(1, (rho - major).powi(2) + x[2] * x[2] - minor * minor)
            },
            move |x| {
                let rho = x[0].hypot(x[1]);
                let s = 2.0 * (rho - major) / rho;
                DMatrix::from_row_slice(1, 3, &[s * x[0], s * x[1], 2.0 * x[2]])
            },
            None,
        )?;
        m.kind = ManifoldKind::Torus { major, minor };
        Ok(m)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn has_analytic_hessians(&self) -> bool {
        self.hessians.is_some()
    }

    pub fn value(&self, x: &[f64]) -> DVector<f64> {
        (self.f)(x)
    }

    /// `n × d` Jacobian `Df(x)`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(x)
    }

    /// Hessians of `f_1..f_n`, analytic when available.
    pub fn hessians(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        match &self.hessians {
            Some(h) => h(x),
            None => self.fd_hessians(x),
        }
    }

    fn fd_hessians(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let d = self.ambient_dim;
        let h = fd_step(x);
        let mut out = vec![DMatrix::zeros(d, d); self.codim];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for l in 0..d {
            xp[l] = x[l] + h;
            xm[l] = x[l] - h;
            let diff = (self.jacobian(&xp) - self.jacobian(&xm)) / (2.0 * h);
            for (k, hk) in out.iter_mut().enumerate() {
                for i in 0..d {
                    hk[(i, l)] = diff[(k, i)];
                }
            }
            xp[l] = x[l];
            xm[l] = x[l];
        }
        for hk in &mut out {
            let sym = (&*hk + hk.transpose()) * 0.5;
            *hk = sym;
        }
        out
    }

    /// Newton projection `x ← x − Dfᵀ (Df Dfᵀ)^{-1} f(x)`; `None` when it does
    /// not reach `tol` within [`MAX_PROJECTION_ITERATIONS`].
    pub fn project(&self, start: &[f64], tol: f64) -> Option<Vec<f64>> {
        let mut x = DVector::from_column_slice(start);
        for _ in 0..MAX_PROJECTION_ITERATIONS {
            let fx = self.value(x.as_slice());
            if fx.amax() <= tol {
                return Some(x.as_slice().to_vec());
            }
            let j = self.jacobian(x.as_slice());
            let step = (&j * j.transpose()).lu().solve(&fx)?;
            x -= j.transpose() * step;
            if x.iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        (self.value(x.as_slice()).amax() <= tol).then(|| x.as_slice().to_vec())
    }

    /// `n` feasible points. Spheres use normalised Gaussians; hyperplanes and
    /// other level sets use Newton projection of Gaussian proposals.
    pub fn sample(&self, n: usize, seed: u64) -> PointSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.ambient_dim;
        let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
        let mut points = Vec::with_capacity(n);
        let mut rejected = 0;
        match &self.kind {
            ManifoldKind::Sphere { radius } => {
                while points.len() < n {
                    let g = gaussian(&mut rng);
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    points.push(g.iter().map(|v| radius * v / norm).collect());
                }
                PointSample {
                    points,
                    feas_tol: ANALYTIC_FEAS_TOL,
                    seed: Some(seed),
                    rejected,
                }
            }
            kind => {
                let scale = match kind {
                    ManifoldKind::Torus { major, .. } => *major,
                    _ => 1.0,
                };
                // a bounded number of proposals so a bad manifold cannot loop forever
                let mut budget = 100 * n.max(1);
                while points.len() < n && budget > 0 {
                    budget -= 1;
                    let g: Vec<f64> = gaussian(&mut rng).iter().map(|v| v * scale).collect();
                    match self.project(&g, ANALYTIC_FEAS_TOL) {
                        Some(p) => points.push(p),
                        None => rejected += 1,
                    }
                }
                PointSample {
                    points,
                    feas_tol: PROJECTED_FEAS_TOL,
                    seed: Some(seed),
                    rejected,
                }
            }
        }
    }

    /// Wraps caller-provided points, rejecting any with `|f| > feas_tol`.
    pub fn sample_from_points(&self, points: Vec<Vec<f64>>, feas_tol: f64) -> Result<PointSample> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != self.ambient_dim {
                return Err(Error::InvalidArgument(format!("point {i} has wrong dimension")));
            }
            let res = self.value(p).amax();
            if !(res <= feas_tol) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} is infeasible: |f| = {res:e} > {feas_tol:e}"
                )));
            }
        }
        Ok(PointSample {
            points,
            feas_tol,
            seed: None,
            rejected: 0,
        })
    }
}

/// Points on a manifold, each satisfying `|f| ≤ feas_tol` for level sets.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSample {
    pub points: Vec<Vec<f64>>,
    pub feas_tol: f64,
    pub seed: Option<u64>,
    /// Proposals discarded because projection did not converge.
    pub rejected: usize,
}

impl PointSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn condition_of_gram(j: &DMatrix<f64>) -> f64 {
    let sv = (j * j.transpose()).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthogonal projector onto `ker Df(x)`: `I − Dfᵀ (Df Dfᵀ)^{-1} Df`.
pub fn tangent_projector(m: &LevelSetManifold, x: &[f64]) -> Result<DMatrix<f64>> {
    projector_from_jacobian(&m.jacobian(x)).map_err(|condition| Error::RankDeficient { index: 0, condition })
}

pub(crate) fn projector_from_jacobian(j: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, f64> {
    let condition = condition_of_gram(j);
    if !(condition <= RANK_CONDITION_LIMIT) {
        return Err(condition);
    }
    let gram = j * j.transpose();
    let inv = gram.try_inverse().ok_or(f64::INFINITY)?;
    let d = j.ncols();
    Ok(DMatrix::identity(d, d) - j.transpose() * inv * j)
}

/// Scalar function with gradient and Hessian.
pub trait TestFunction {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// Component `k` of a level-set map.
pub struct LevelSetComponent<'a> {
    pub manifold: &'a LevelSetManifold,
    pub component: usize,
}

impl TestFunction for LevelSetComponent<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.manifold.value(x)[self.component]
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.manifold.jacobian(x).row(self.component).transpose()
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.manifold.hessians(x).swap_remove(self.component)
    }
}

/// Test function from closures; the Hessian falls back to central differences
/// of the gradient.
pub struct FnTestFunction<F, G> {
    pub value: F,
    pub gradient: G,
    pub hessian: Option<Box<dyn Fn(&[f64]) -> DMatrix<f64>>>,
}

impl<F, G> TestFunction for FnTestFunction<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> DVector<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let d = x.len();
        let h = fd_step(x);
        let mut out = DMatrix::zeros(d, d);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for l in 0..d {
            xp[l] = x[l] + h;
            xm[l] = x[l] - h;
            out.set_column(l, &(((self.gradient)(&xp) - (self.gradient)(&xm)) / (2.0 * h)));
            xp[l] = x[l];
            xm[l] = x[l];
        }
        (&out + out.transpose()) * 0.5
    }
}

/// First- and second-order parts of `ℒg(x)`: `(Σ b_i ∂_i g, ½ Σ (σσᵀ)_{ij} ∂²_{ij} g)`.
pub fn generator_parts<M: SdeModel + ?Sized>(model: &M, g: &dyn TestFunction, x: &[f64]) -> (f64, f64) {
    let b = model.drift(x);
    let s = model.diffusion(x);
    let grad = g.gradient(x);
    let hess = g.hessian(x);
    let first = b.dot(&grad);
    let second = 0.5 * (&s * s.transpose()).component_mul(&hess).sum();
    (first, second)
}

/// Itô generator `ℒg(x) = Σ b_i ∂_i g + ½ Σ (σσᵀ)_{ij} ∂²_{ij} g`.
pub fn apply_generator<M: SdeModel + ?Sized>(model: &M, g: &dyn TestFunction, x: &[f64]) -> f64 {
    let (a, b) = generator_parts(model, g, x);
    a + b
}

/// `(𝒜^j g)(x) = Σ_i σ^j_i ∂_i g` for every noise `j`.
pub fn apply_first_order<M: SdeModel + ?Sized>(model: &M, g: &dyn TestFunction, x: &[f64]) -> DVector<f64> {
    model.diffusion(x).transpose() * g.gradient(x)
}

/// `Dσ^j(x)` by central differences of the diffusion columns.
pub fn fd_diffusion_jacobians<M: SdeModel + ?Sized>(model: &M, x: &[f64]) -> Vec<DMatrix<f64>> {
    let d = model.dimension();
    let r = model.noise_count();
    let h = fd_step(x);
    let mut out = vec![DMatrix::zeros(d, d); r];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for k in 0..d {
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        let diff = (model.diffusion(&xp) - model.diffusion(&xm)) / (2.0 * h);
        for (j, jac) in out.iter_mut().enumerate() {
            for i in 0..d {
                jac[(i, k)] = diff[(i, j)];
            }
        }
        xp[k] = x[k];
        xm[k] = x[k];
    }
    out
}

fn correction_from(jacobians: &[DMatrix<f64>], sigma: &DMatrix<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(sigma.nrows());
    for (j, jac) in jacobians.iter().enumerate() {
        acc += jac * sigma.column(j);
    }
    acc * 0.5
}

/// `½ Σ_j Dσ^j(x) σ^j(x)`, with analytic Jacobians when the model has them.
pub fn stratonovich_correction<M: SdeModel + ?Sized>(model: &M, x: &[f64]) -> DVector<f64> {
    let jac = model
        .diffusion_jacobians(x)
        .unwrap_or_else(|| fd_diffusion_jacobians(model, x));
    correction_from(&jac, &model.diffusion(x))
}

/// Same as [`stratonovich_correction`] but always via finite differences.
pub fn stratonovich_correction_fd<M: SdeModel + ?Sized>(model: &M, x: &[f64]) -> DVector<f64> {
    correction_from(&fd_diffusion_jacobians(model, x), &model.diffusion(x))
}

/// Stratonovich drift `c(x) = b(x) − ½ Σ_j Dσ^j(x) σ^j(x)`.
pub fn corrected_drift<M: SdeModel + ?Sized>(model: &M, x: &[f64]) -> DVector<f64> {
    model.drift(x) - stratonovich_correction(model, x)
}

/// Local parametrisation `φ : V ⊂ R^m → R^D` with first and second derivatives.
pub trait Chart: Send + Sync {
    fn chart_dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn map(&self, x: &[f64]) -> DVector<f64>;
    /// `D × m` differential.
    fn differential(&self, x: &[f64]) -> DMatrix<f64>;
    /// Second differential applied to `(v, w)`.
    fn second_differential(&self, x: &[f64], v: &[f64], w: &[f64]) -> DVector<f64>;
}

/// `φ(x) = x` on all of `R^d`.
#[derive(Clone, Copy, Debug)]
pub struct IdentityChart(pub usize);

impl Chart for IdentityChart {
    fn chart_dim(&self) -> usize {
        self.0
    }
    fn ambient_dim(&self) -> usize {
        self.0
    }
    fn map(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }
    fn differential(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.0, self.0)
    }
    fn second_differential(&self, _x: &[f64], _v: &[f64], _w: &[f64]) -> DVector<f64> {
        DVector::zeros(self.0)
    }
}

/// `(θ, ϕ) ↦ radius (sin θ cos ϕ, sin θ sin ϕ, cos θ)`, regular for `0 < θ < π`.
#[derive(Clone, Copy, Debug)]
pub struct SphericalChart {
    pub radius: f64,
}

impl Default for SphericalChart {
    fn default() -> Self {
        Self { radius: 1.0 }
    }
}

impl SphericalChart {
    fn hessian_components(&self, x: &[f64]) -> [DMatrix<f64>; 3] {
        let (t, p) = (x[0], x[1]);
        let (st, ct, sp, cp) = (t.sin(), t.cos(), p.sin(), p.cos());
        let r = self.radius;
        [
            DMatrix::from_row_slice(2, 2, &[-st * cp, -ct * sp, -ct * sp, -st * cp]) * r,
            DMatrix::from_row_slice(2, 2, &[-st * sp, ct * cp, ct * cp, -st * sp]) * r,
            DMatrix::from_row_slice(2, 2, &[-ct, 0.0, 0.0, 0.0]) * r,
        ]
    }
}

impl Chart for SphericalChart {
    fn chart_dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn map(&self, x: &[f64]) -> DVector<f64> {
        let (t, p) = (x[0], x[1]);
        DVector::from_vec(vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]) * self.radius
    }
    fn differential(&self, x: &[f64]) -> DMatrix<f64> {
        let (t, p) = (x[0], x[1]);
        DMatrix::from_row_slice(
            3,
            2,
            &[
                t.cos() * p.cos(),
                -t.sin() * p.sin(),
                t.cos() * p.sin(),
                t.sin() * p.cos(),
                -t.sin(),
                0.0,
            ],
        ) * self.radius
    }
    fn second_differential(&self, x: &[f64], v: &[f64], w: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(v);
        let w = DVector::from_column_slice(w);
        let comps = self.hessian_components(x);
        DVector::from_iterator(3, comps.iter().map(|h| v.dot(&(h * &w))))
    }
}
