//! Residual checks of the invariance conditions for SDEs on submanifolds, plus
//! an empirical deviation study under coupled noise.
//!
//! Every check evaluates one residual per sample point and summarises it in an
//! [`InvarianceReport`]. Points where the Jacobian or chart differential loses
//! rank are listed in `flagged` and force a failing verdict.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_first_order, corrected_drift, generator_parts, projector_from_jacobian, Chart, LevelSetComponent,
    LevelSetManifold, PointSample, RANK_CONDITION_LIMIT,
};
use crate::sde::{coarsen, euler_maruyama_with_increments, path_increments, step_count, SdeModel};

/// Default tolerance when all derivatives are analytic.
pub const ANALYTIC_TOLERANCE: f64 = 1e-8;
/// Default tolerance when any derivative comes from finite differences.
pub const FD_TOLERANCE: f64 = 1e-5;
/// Chart differentials with condition number above this are rejected.
pub const CHART_CONDITION_LIMIT: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPoint {
    pub index: usize,
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub condition: String,
    pub tolerance: f64,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub n_points: usize,
    pub verdict: Verdict,
    pub worst_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<FlaggedPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl InvarianceReport {
    /// Summarises per-point residuals; `points[i]` is the location of `residuals[i]`.
    pub fn from_residuals(
        condition: impl Into<String>,
        tolerance: f64,
        points: &[Vec<f64>],
        residuals: Vec<f64>,
        flagged: Vec<FlaggedPoint>,
    ) -> Self {
        debug_assert_eq!(points.len(), residuals.len());
        let mut max_abs = 0.0f64;
        let mut worst = None;
        for (i, r) in residuals.iter().enumerate() {
            if r.abs() > max_abs || worst.is_none() {
                max_abs = max_abs.max(r.abs());
                worst = Some(i);
            }
        }
        let n = residuals.len();
        let mean_abs = if n == 0 {
            0.0
        } else {
            residuals.iter().map(|r| r.abs()).sum::<f64>() / n as f64
        };
        let verdict = if max_abs <= tolerance && flagged.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            condition: condition.into(),
            tolerance,
            max_abs,
            mean_abs,
            n_points: n,
            verdict,
            worst_point: worst.map(|i| points[i].clone()),
            flagged,
            seed: None,
            residuals,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Pass only when every report passes.
pub fn overall_verdict(reports: &[InvarianceReport]) -> Verdict {
    if reports.iter().all(InvarianceReport::passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn rank_flag(m: &LevelSetManifold, index: usize, x: &[f64]) -> Option<FlaggedPoint> {
    projector_from_jacobian(&m.jacobian(x)).err().map(|condition| FlaggedPoint {
        index,
        point: x.to_vec(),
        reason: format!("Df Dfᵀ condition number {condition:e} above {RANK_CONDITION_LIMIT:e}"),
    })
}

/// Splits points into evaluated ones and rank-deficient ones, preserving order.
fn partition_points(m: &LevelSetManifold, sample: &PointSample) -> (Vec<Vec<f64>>, Vec<FlaggedPoint>) {
    let mut good = Vec::with_capacity(sample.len());
    let mut flagged = Vec::new();
    for (i, x) in sample.points.iter().enumerate() {
        match rank_flag(m, i, x) {
            Some(f) => flagged.push(f),
            None => good.push(x.clone()),
        }
    }
    (good, flagged)
}

/// Residuals `|ℒf_k(x)|` (max over `k`) and `|𝒜^j f_k(x)|` (max over `k, j`).
pub fn check_levelset<M: SdeModel + ?Sized>(
    model: &M,
    m: &LevelSetManifold,
    sample: &PointSample,
    tolerance: f64,
) -> Result<Vec<InvarianceReport>> {
    check_dims(model, m)?;
    let (points, flagged) = partition_points(m, sample);
    let evals: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let mut gen = 0.0f64;
            let mut first = 0.0f64;
            for k in 0..m.codim() {
                let g = LevelSetComponent {
                    manifold: m,
                    component: k,
                };
                let (a, b) = generator_parts(model, &g, x);
                gen = gen.max((a + b).abs());
                first = first.max(apply_first_order(model, &g, x).amax());
            }
            (gen, first)
        })
        .collect();
    Ok(vec![
        InvarianceReport::from_residuals(
            "levelset-generator",
            tolerance,
            &points,
            evals.iter().map(|e| e.0).collect(),
            flagged.clone(),
        )
        .with_seed(sample.seed),
        InvarianceReport::from_residuals(
            "levelset-first-order",
            tolerance,
            &points,
            evals.iter().map(|e| e.1).collect(),
            flagged,
        )
        .with_seed(sample.seed),
    ])
}

fn check_dims<M: SdeModel + ?Sized>(model: &M, m: &LevelSetManifold) -> Result<()> {
    if model.dimension() != m.ambient_dim() {
        return Err(Error::InvalidArgument(format!(
            "model dimension {} differs from ambient dimension {}",
            model.dimension(),
            m.ambient_dim()
        )));
    }
    Ok(())
}

/// Unit-sphere conditions `⟨x, b⟩ + ½ tr(σσᵀ) = 0` and `⟨x, σ^j⟩ = 0`.
pub fn check_sphere<M: SdeModel + ?Sized>(model: &M, sample: &PointSample, tolerance: f64) -> Vec<InvarianceReport> {
    let evals: Vec<(f64, f64)> = sample
        .points
        .par_iter()
        .map(|x| {
            let v = DVector::from_column_slice(x);
            let s = model.diffusion(x);
            let drift = v.dot(&model.drift(x)) + 0.5 * (&s * s.transpose()).trace();
            let noise = (s.transpose() * &v).amax();
            (drift.abs(), noise)
        })
        .collect();
    vec![
        InvarianceReport::from_residuals(
            "sphere-drift",
            tolerance,
            &sample.points,
            evals.iter().map(|e| e.0).collect(),
            vec![],
        )
        .with_seed(sample.seed),
        InvarianceReport::from_residuals(
            "sphere-diffusion",
            tolerance,
            &sample.points,
            evals.iter().map(|e| e.1).collect(),
            vec![],
        )
        .with_seed(sample.seed),
    ]
}

/// `‖(I − P(x)) field(x)‖` at every sample point.
pub fn check_tangency(
    field: &(dyn Fn(&[f64]) -> DVector<f64> + Sync),
    m: &LevelSetManifold,
    sample: &PointSample,
    tolerance: f64,
) -> InvarianceReport {
    named_tangency("tangency", field, m, sample, tolerance)
}

fn named_tangency(
    name: &str,
    field: &(dyn Fn(&[f64]) -> DVector<f64> + Sync),
    m: &LevelSetManifold,
    sample: &PointSample,
    tolerance: f64,
) -> InvarianceReport {
    let (points, flagged) = partition_points(m, sample);
    let residuals = points
        .par_iter()
        .map(|x| {
            let p = projector_from_jacobian(&m.jacobian(x)).expect("rank checked");
            let v = field(x);
            (&v - p * &v).norm()
        })
        .collect();
    InvarianceReport::from_residuals(name, tolerance, &points, residuals, flagged).with_seed(sample.seed)
}

/// Tangency of the drift and of each diffusion column.
pub fn check_model_tangency<M: SdeModel + ?Sized>(
    model: &M,
    m: &LevelSetManifold,
    sample: &PointSample,
    tolerance: f64,
) -> Vec<InvarianceReport> {
    let mut out = vec![named_tangency("drift-tangency", &|x| model.drift(x), m, sample, tolerance)];
    for j in 0..model.noise_count() {
        out.push(named_tangency(
            &format!("diffusion-{}-tangency", j + 1),
            &|x| model.diffusion(x).column(j).into_owned(),
            m,
            sample,
            tolerance,
        ));
    }
    out
}

/// Stratonovich form of the invariance criterion: every `σ^j` and the corrected
/// drift `c = b − ½ Σ Dσ^j σ^j` are tangent.
pub fn check_stratonovich<M: SdeModel + ?Sized>(
    model: &M,
    m: &LevelSetManifold,
    sample: &PointSample,
    tolerance: f64,
) -> Vec<InvarianceReport> {
    let mut out = vec![named_tangency(
        "corrected-drift-tangency",
        &|x| corrected_drift(model, x),
        m,
        sample,
        tolerance,
    )];
    out.extend(check_model_tangency(model, m, sample, tolerance).into_iter().skip(1));
    out
}

/// For every base point `y` and every sample point `z` with `‖z − y‖ ≤ radius`,
/// the residual `‖(I − P(z)) field_j(y)‖`; reported per base point as the max
/// over neighbours and fields.
pub fn check_simultaneous(
    fields: &[&(dyn Fn(&[f64]) -> DVector<f64> + Sync)],
    m: &LevelSetManifold,
    sample: &PointSample,
    radius: f64,
    tolerance: f64,
) -> Result<InvarianceReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("neighbourhood radius must be positive".into()));
    }
    let (points, flagged) = partition_points(m, sample);
    let projectors: Vec<DMatrix<f64>> = points
        .iter()
        .map(|z| projector_from_jacobian(&m.jacobian(z)).expect("rank checked"))
        .collect();
    let residuals = points
        .par_iter()
        .map(|y| {
            let values: Vec<DVector<f64>> = fields.iter().map(|f| f(y)).collect();
            let mut worst = 0.0f64;
            for (z, p) in points.iter().zip(&projectors) {
                let dist = y.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if dist > radius {
                    continue;
                }
                for v in &values {
                    worst = worst.max((v - p * v).norm());
                }
            }
            worst
        })
        .collect();
    Ok(
        InvarianceReport::from_residuals("locally-simultaneous", tolerance, &points, residuals, flagged)
            .with_seed(sample.seed),
    )
}

/// Second-order drift `L` and first-order fields `A^j` on the ambient space of
/// a chart, either `R^d` or coefficient space.
pub trait AmbientFields: Sync {
    fn drift(&self, y: &DVector<f64>) -> DVector<f64>;
    fn diffusions(&self, y: &DVector<f64>) -> Vec<DVector<f64>>;
}

/// SDE coefficients viewed as ambient fields: `L = b`, `A^j = σ^j`.
pub struct SdeFields<'a, M: ?Sized>(pub &'a M);

impl<M: SdeModel + ?Sized> AmbientFields for SdeFields<'_, M> {
    fn drift(&self, y: &DVector<f64>) -> DVector<f64> {
        self.0.drift(y.as_slice())
    }
    fn diffusions(&self, y: &DVector<f64>) -> Vec<DVector<f64>> {
        let s = self.0.diffusion(y.as_slice());
        s.column_iter().map(|c| c.into_owned()).collect()
    }
}

/// Chart residuals together with the recovered local coefficients.
#[derive(Clone, Debug)]
pub struct ChartCheck {
    pub diffusion_report: InvarianceReport,
    pub drift_report: InvarianceReport,
    /// `a^j(x)` per sample point.
    pub local_diffusions: Vec<Vec<DVector<f64>>>,
    /// `ℓ(x)` per sample point.
    pub local_drift: Vec<DVector<f64>>,
}

impl ChartCheck {
    pub fn reports(&self) -> Vec<InvarianceReport> {
        vec![self.diffusion_report.clone(), self.drift_report.clone()]
    }

    pub fn passed(&self) -> bool {
        self.diffusion_report.passed() && self.drift_report.passed()
    }
}

/// Least-squares lift of ambient fields through a chart.
///
/// For each chart point `x`: `a^j = dφ⁺ A^j(φ(x))`, residual `‖A^j − dφ a^j‖`;
/// then `R = L(φ(x)) − ½ Σ_j d²φ(a^j, a^j)`, `ℓ = dφ⁺ R`, residual `‖R − dφ ℓ‖`.
pub fn check_chart(
    fields: &dyn AmbientFields,
    chart: &dyn Chart,
    chart_points: &[Vec<f64>],
    tolerance: f64,
) -> Result<ChartCheck> {
    let results: Vec<Result<(f64, f64, Vec<DVector<f64>>, DVector<f64>)>> = chart_points
        .par_iter()
        .enumerate()
        .map(|(index, x)| {
            let y = chart.map(x);
            let dphi = chart.differential(x);
            let svd = dphi.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !(condition <= CHART_CONDITION_LIMIT) {
                return Err(Error::IllConditioned { index, condition });
            }
            let solve = |rhs: &DVector<f64>| -> DVector<f64> {
                svd.solve(rhs, 0.0).expect("singular vectors were computed")
            };
            let mut res_a = 0.0f64;
            let mut local_a = Vec::new();
            let mut curvature = DVector::zeros(y.len());
            for aj in fields.diffusions(&y) {
                let a = solve(&aj);
                res_a = res_a.max((&aj - &dphi * &a).norm());
                curvature += chart.second_differential(x, a.as_slice(), a.as_slice());
                local_a.push(a);
            }
            let r = fields.drift(&y) - curvature * 0.5;
            let ell = solve(&r);
            let res_l = (&r - &dphi * &ell).norm();
            Ok((res_a, res_l, local_a, ell))
        })
        .collect();
    let mut res_a = Vec::with_capacity(results.len());
    let mut res_l = Vec::with_capacity(results.len());
    let mut local_diffusions = Vec::with_capacity(results.len());
    let mut local_drift = Vec::with_capacity(results.len());
    for r in results {
        let (a, l, la, ld) = r?;
        res_a.push(a);
        res_l.push(l);
        local_diffusions.push(la);
        local_drift.push(ld);
    }
    Ok(ChartCheck {
        diffusion_report: InvarianceReport::from_residuals("chart-diffusion", tolerance, chart_points, res_a, vec![]),
        drift_report: InvarianceReport::from_residuals("chart-drift", tolerance, chart_points, res_l, vec![]),
        local_diffusions,
        local_drift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub dt: f64,
    /// Mean over paths of `max_t ‖f(X_t)‖`.
    pub deviation: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// Mean maximal distance from the level set along Euler–Maruyama paths, for
/// each step size. All step sizes share one Brownian path per Monte Carlo
/// sample: increments are drawn on the finest grid and summed onto coarser ones.
pub fn empirical_invariance<M: SdeModel + ?Sized>(
    model: &M,
    m: &LevelSetManifold,
    x0: &[f64],
    horizon: f64,
    dts: &[f64],
    paths: usize,
    seed: u64,
) -> Result<Vec<DeviationRow>> {
    check_dims(model, m)?;
    if dts.is_empty() || paths == 0 {
        return Err(Error::InvalidArgument("need at least one dt and one path".into()));
    }
    let start = m.value(x0).amax();
    if start > crate::geometry::PROJECTED_FEAS_TOL {
        return Err(Error::InvalidArgument(format!("initial point is off the manifold by {start:e}")));
    }
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let fine_steps = step_count(horizon, finest)?;
    let mut factors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let ratio = (dt / finest).round();
        if ((ratio * finest) - dt).abs() > 1e-9 * dt || fine_steps % ratio as usize != 0 {
            return Err(Error::GridMismatch(format!("dt {dt} is not a multiple of the finest dt {finest}")));
        }
        factors.push(ratio as usize);
    }
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let fine = path_increments(seed, p, fine_steps, model.noise_count(), finest);
            factors
                .iter()
                .zip(dts)
                .map(|(&factor, &dt)| {
                    let inc = if factor == 1 { fine.clone() } else { coarsen(&fine, factor)? };
                    let states = euler_maruyama_with_increments(model, x0, dt, &inc)?;
                    Ok(states.iter().map(|x| m.value(x).norm()).fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(dts
        .iter()
        .enumerate()
        .map(|(i, &dt)| {
            let values: Vec<f64> = per_path.iter().map(|v| v[i]).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            DeviationRow {
                dt,
                deviation: mean,
                std_error: (var / n).sqrt(),
                paths,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{IdentityChart, SphericalChart};
    use crate::sde::{AffineModel, StroockSphere};
    use approx::assert_abs_diff_eq;

    fn sphere_sample(n: usize) -> (LevelSetManifold, PointSample) {
        let m = LevelSetManifold::unit_sphere(3).unwrap();
        let s = m.sample(n, 4);
        (m, s)
    }

    fn constant_drift(v: [f64; 3]) -> AffineModel {
        AffineModel::new(DMatrix::zeros(3, 3), DVector::from_row_slice(&v), vec![], vec![]).unwrap()
    }

    #[test]
    fn stroock_passes_levelset_and_sphere() {
        let (m, s) = sphere_sample(100);
        let model = StroockSphere::new(3).unwrap();
        let lv = check_levelset(&model, &m, &s, 1e-10).unwrap();
        assert!(lv.iter().all(|r| r.passed()), "{lv:?}");
        let sp = check_sphere(&model, &s, 1e-12);
        assert!(sp.iter().all(|r| r.passed()), "{sp:?}");
        assert_eq!(lv[0].n_points, 100);
    }

    #[test]
    fn transversal_drift_fails() {
        let (m, s) = sphere_sample(30);
        let r = check_levelset(&constant_drift([1.0, 0.0, 0.0]), &m, &s, 1e-8).unwrap();
        assert!(!r[0].passed());
        // |ℒf(x)| = |2 x_1|
        for (x, res) in s.points.iter().zip(&r[0].residuals) {
            assert_abs_diff_eq!(*res, 2.0 * x[0].abs(), epsilon = 1e-14);
        }
        let worst = r[0].worst_point.as_ref().unwrap();
        assert_abs_diff_eq!(2.0 * worst[0].abs(), r[0].max_abs, epsilon = 1e-14);
    }

    #[test]
    fn hyperplane_with_orthogonal_fields_passes() {
        let eta = [1.0, 1.0, 0.0];
        let m = LevelSetManifold::hyperplane(eta.to_vec(), 0.0).unwrap();
        let s = m.sample(20, 2);
        let model = AffineModel::new(
            DMatrix::zeros(3, 3),
            DVector::from_row_slice(&[1.0, -1.0, 2.0]),
            vec![DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0])],
            vec![DVector::from_row_slice(&[0.0, 0.0, 1.0])],
        )
        .unwrap();
        let r = check_levelset(&model, &m, &s, ANALYTIC_TOLERANCE).unwrap();
        assert!(r.iter().all(|r| r.passed()), "{r:?}");
    }

    #[test]
    fn sphere_report_values() {
        let (_, s) = sphere_sample(20);
        assert!(check_sphere(&AffineModel::zero(3, 1), &s, 1e-14).iter().all(|r| r.max_abs == 0.0));
        let radial = check_sphere(&AffineModel::radial_drift(3), &s, 1e-8);
        assert!(!radial[0].passed());
        assert_abs_diff_eq!(radial[0].max_abs, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(radial[0].mean_abs, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tangency_examples() {
        let (m, s) = sphere_sample(40);
        let tangent = |x: &[f64]| DVector::from_row_slice(&[1.0 - x[0] * x[0], -x[0] * x[1], -x[0] * x[2]]);
        assert!(check_tangency(&tangent, &m, &s, 1e-12).passed());
        let radial = check_tangency(&|x: &[f64]| DVector::from_row_slice(x), &m, &s, 1e-8);
        assert_abs_diff_eq!(radial.max_abs, 1.0, epsilon = 1e-12);
        assert_eq!(check_tangency(&|_: &[f64]| DVector::zeros(3), &m, &s, 0.0).max_abs, 0.0);
    }

    #[test]
    fn simultaneous_examples() {
        let plane = LevelSetManifold::hyperplane(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let ps = plane.sample(25, 1);
        let constant = |_: &[f64]| DVector::from_row_slice(&[1.0, 2.0, 0.0]);
        assert!(check_simultaneous(&[&constant], &plane, &ps, 10.0, 1e-12).unwrap().passed());

        let (m, s) = sphere_sample(200);
        let tangent = |x: &[f64]| DVector::from_row_slice(&[1.0 - x[0] * x[0], -x[0] * x[1], -x[0] * x[2]]);
        assert!(!check_simultaneous(&[&tangent], &m, &s, 0.5, 1e-8).unwrap().passed());
        let zero = |_: &[f64]| DVector::zeros(3);
        assert!(check_simultaneous(&[&zero], &m, &s, 0.5, 0.0).unwrap().passed());
        assert!(check_simultaneous(&[&zero], &m, &s, 0.0, 0.0).is_err());
    }

    #[test]
    fn rank_deficient_points_are_flagged() {
        let m = LevelSetManifold::unit_sphere(3).unwrap();
        let sample = PointSample {
            points: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            feas_tol: 1.0,
            seed: None,
            rejected: 0,
        };
        let r = check_levelset(&AffineModel::zero(3, 1), &m, &sample, 1e-8).unwrap();
        assert_eq!(r[0].flagged.len(), 1);
        assert_eq!(r[0].flagged[0].index, 1);
        assert!(!r[0].passed());
    }

    #[test]
    fn tangent_coefficients_leave_only_second_order_part() {
        let (m, s) = sphere_sample(50);
        let j = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let omega = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.5, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0]);
        let rotation = AffineModel::rotational_noise(j.clone(), DMatrix::zeros(3, 3), false).unwrap();
        let spinning = AffineModel::new(omega, DVector::zeros(3), vec![j], vec![DVector::zeros(3)]).unwrap();
        for model in [&rotation as &dyn SdeModel, &spinning] {
            assert!(check_model_tangency(model, &m, &s, 1e-12).iter().all(|r| r.passed()));
            let lv = check_levelset(model, &m, &s, f64::INFINITY).unwrap();
            for (x, res) in s.points.iter().zip(&lv[0].residuals) {
                let g = LevelSetComponent {
                    manifold: &m,
                    component: 0,
                };
                let (_, second) = generator_parts(model, &g, x);
                assert_abs_diff_eq!(*res, second.abs(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn identity_chart_recovers_coefficients() {
        let model = StroockSphere::new(3).unwrap();
        let pts = vec![vec![0.3, -0.2, 0.5], vec![1.0, 2.0, -1.0]];
        let c = check_chart(&SdeFields(&model), &IdentityChart(3), &pts, 1e-12).unwrap();
        assert!(c.passed());
        for (x, (a, l)) in pts.iter().zip(c.local_diffusions.iter().zip(&c.local_drift)) {
            assert!((l - model.drift(x)).amax() < 1e-12);
            let s = model.diffusion(x);
            for (j, aj) in a.iter().enumerate() {
                assert!((aj - s.column(j)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn spherical_chart_with_stroock() {
        let model = StroockSphere::new(3).unwrap();
        let pts: Vec<Vec<f64>> = (0..25)
            .map(|i| vec![0.4 + 0.1 * (i / 5) as f64, -1.0 + 0.4 * (i % 5) as f64])
            .collect();
        let c = check_chart(&SdeFields(&model), &SphericalChart::default(), &pts, 1e-8).unwrap();
        assert!(c.passed(), "{:?}", c.reports());
        // radial drift cannot be lifted
        let bad = check_chart(&SdeFields(&AffineModel::radial_drift(3)), &SphericalChart::default(), &pts, 1e-8).unwrap();
        assert!(!bad.drift_report.passed());
        // the pole is singular for spherical coordinates
        assert!(matches!(
            check_chart(&SdeFields(&model), &SphericalChart::default(), &[vec![0.0, 0.3]], 1e-8),
            Err(Error::IllConditioned { index: 0, .. })
        ));
    }

    #[test]
    fn empirical_deviation_zero_model_and_validation() {
        let m = LevelSetManifold::unit_sphere(3).unwrap();
        let rows = empirical_invariance(&AffineModel::zero(3, 2), &m, &[0.0, 1.0, 0.0], 1.0, &[0.1, 0.05], 4, 1).unwrap();
        assert!(rows.iter().all(|r| r.deviation == 0.0));
        assert!(empirical_invariance(&AffineModel::zero(3, 2), &m, &[0.0, 2.0, 0.0], 1.0, &[0.1], 4, 1).is_err());
        assert!(empirical_invariance(&AffineModel::zero(3, 2), &m, &[0.0, 1.0, 0.0], 1.0, &[0.1, 0.03], 4, 1).is_err());
    }

    #[test]
    fn deterministic_tangent_flow_has_first_order_deviation() {
        // rotation about the third axis without noise: Euler leaves the sphere at O(dt)
        let m = LevelSetManifold::unit_sphere(3).unwrap();
        let flow = AffineModel::new(
            DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DVector::zeros(3),
            vec![DMatrix::zeros(3, 3)],
            vec![DVector::zeros(3)],
        )
        .unwrap();
        let rows = empirical_invariance(&flow, &m, &[1.0, 0.0, 0.0], 1.0, &[1e-2, 5e-3], 1, 0).unwrap();
        let ratio = rows[0].deviation / rows[1].deviation;
        assert!((1.9..=2.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn report_json_layout() {
        let (_, s) = sphere_sample(5);
        let r = &check_sphere(&StroockSphere::new(3).unwrap(), &s, 1e-8)[0];
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["condition", "tolerance", "max_abs", "mean_abs", "n_points", "verdict", "worst_point"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["verdict"], "pass");
    }
}
