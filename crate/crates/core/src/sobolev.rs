//! Truncated elements of the Hermite–Sobolev scale `S_p(R^d)`.
//!
//! A [`CoefficientVector`] stores `⟨Φ, h_n⟩` for every retained multi-index
//! in graded-lex order. Every truncated vector lies in every `S_p`, so the
//! regularity is an advisory label and norms are computed for any `p` on demand.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hermite::{Basis, TruncationScheme};

/// Index `p` of the scale `S_p(R^d)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RegularityIndex(f64);

impl RegularityIndex {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidArgument(format!("regularity index {p} is not finite")));
        }
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for RegularityIndex {
    fn from(p: f64) -> Self {
        assert!(p.is_finite(), "regularity index must be finite");
        Self(p)
    }
}

impl fmt::Display for RegularityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Hermite coefficients of a tempered distribution, truncated by total degree.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    scheme: TruncationScheme,
    coefficients: Vec<f64>,
    regularity_label: Option<f64>,
}

impl CoefficientVector {
    pub fn new(scheme: TruncationScheme, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != scheme.basis_size() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients given, scheme {} needs {}",
                coefficients.len(),
                scheme,
                scheme.basis_size()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "coefficient vector".into(),
            });
        }
        Ok(Self {
            scheme,
            coefficients,
            regularity_label: None,
        })
    }

    pub fn zeros(scheme: TruncationScheme) -> Self {
        Self {
            scheme,
            coefficients: vec![0.0; scheme.basis_size()],
            regularity_label: None,
        }
    }

    /// Unit vector at basis position `position`.
    pub fn unit(scheme: TruncationScheme, position: usize) -> Self {
        let mut v = Self::zeros(scheme);
        v.coefficients[position] = 1.0;
        v
    }

    pub fn from_dvector(scheme: TruncationScheme, v: &DVector<f64>) -> Result<Self> {
        Self::new(scheme, v.iter().copied().collect())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coefficients)
    }

    pub fn scheme(&self) -> TruncationScheme {
        self.scheme
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn regularity_label(&self) -> Option<f64> {
        self.regularity_label
    }

    pub fn with_regularity_label(mut self, p: f64) -> Self {
        self.regularity_label = Some(p);
        self
    }

    /// `‖v‖_p = ( Σ_k (2k+d)^{2p} Σ_{|n|=k} c_n² )^{1/2}`.
    pub fn norm_p(&self, p: impl Into<RegularityIndex>) -> f64 {
        let p = p.into().value();
        let d = self.scheme.dimension() as f64;
        self.scheme
            .degrees()
            .into_iter()
            .zip(&self.coefficients)
            .map(|(k, c)| (2.0 * k as f64 + d).powf(2.0 * p) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// `Σ_n u_n v_n`, the truncated pairing of `S_{-p}` with `S_p`.
    pub fn dual_pair(&self, other: &Self) -> Result<f64> {
        self.check_scheme(other)?;
        Ok(self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// `c_n ↦ (2|n| + d)^l c_n`; negative `l` applies the inverse.
    pub fn apply_hermite_operator(&self, l: i32) -> Self {
        let d = self.scheme.dimension() as f64;
        let coefficients = self
            .scheme
            .degrees()
            .into_iter()
            .zip(&self.coefficients)
            .map(|(k, c)| (2.0 * k as f64 + d).powi(l) * c)
            .collect();
        Self {
            scheme: self.scheme,
            coefficients,
            regularity_label: self.regularity_label.map(|p| p + l as f64),
        }
    }

    /// Partial sum `Σ_n c_n h_n(x)`.
    pub fn reconstruct(&self, x: &[f64]) -> f64 {
        self.reconstruct_with(&self.scheme.basis(), x)
    }

    /// As [`reconstruct`](Self::reconstruct) with a prebuilt basis.
    pub fn reconstruct_with(&self, basis: &Basis, x: &[f64]) -> f64 {
        assert_eq!(basis.scheme(), self.scheme);
        basis
            .evaluate(x)
            .iter()
            .zip(&self.coefficients)
            .map(|(h, c)| h * c)
            .sum()
    }

    /// `‖self − other‖_p`.
    pub fn distance_p(&self, other: &Self, p: impl Into<RegularityIndex>) -> Result<f64> {
        Ok(self.sub(other)?.norm_p(p))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_scheme(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_scheme(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            scheme: self.scheme,
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            regularity_label: self.regularity_label,
        }
    }

    /// Copy keeping only coefficients of total degree `≤ max_degree`; the
    /// others are zeroed.
    pub fn restrict_degree(&self, max_degree: usize) -> Self {
        let coefficients = self
            .scheme
            .degrees()
            .into_iter()
            .zip(&self.coefficients)
            .map(|(k, &c)| if k <= max_degree { c } else { 0.0 })
            .collect();
        Self {
            scheme: self.scheme,
            coefficients,
            regularity_label: self.regularity_label,
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            scheme: self.scheme,
            coefficients: self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            regularity_label: self.regularity_label,
        }
    }

    fn check_scheme(&self, other: &Self) -> Result<()> {
        if self.scheme != other.scheme {
            return Err(Error::SchemeMismatch {
                left: self.scheme.to_string(),
                right: other.scheme.to_string(),
            });
        }
        Ok(())
    }
}

pub fn norm_p(v: &CoefficientVector, p: impl Into<RegularityIndex>) -> f64 {
    v.norm_p(p)
}

pub fn dual_pair(u: &CoefficientVector, v: &CoefficientVector) -> Result<f64> {
    u.dual_pair(v)
}

pub fn apply_hermite_operator(v: &CoefficientVector, l: i32) -> CoefficientVector {
    v.apply_hermite_operator(l)
}

/// Sharp constant `C` in `sup_{x ∈ grid} |Σ c_n h_n(x)| ≤ C ‖c‖_p` over the
/// truncated space: the largest `S_{-p}` norm of a point evaluation on the grid.
pub fn embedding_constant(scheme: &TruncationScheme, p: impl Into<RegularityIndex>, grid: &[Vec<f64>]) -> f64 {
    let p = p.into();
    let basis = scheme.basis();
    grid.iter()
        .map(|x| {
            let evals = CoefficientVector {
                scheme: *scheme,
                coefficients: basis.evaluate(x),
                regularity_label: None,
            };
            evals.norm_p(-p.value())
        })
        .fold(0.0, f64::max)
}

#[derive(Serialize, Deserialize)]
struct CoefficientJson {
    dimension: usize,
    max_degree: usize,
    order: String,
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regularity_label: Option<f64>,
}

const ORDER_TAG: &str = "graded-lex";

impl Serialize for CoefficientVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CoefficientJson {
            dimension: self.scheme.dimension(),
            max_degree: self.scheme.max_degree(),
            order: ORDER_TAG.to_string(),
            coefficients: self.coefficients.clone(),
            regularity_label: self.regularity_label,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoefficientVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = CoefficientJson::deserialize(deserializer)?;
        if raw.order != ORDER_TAG {
            return Err(D::Error::custom(format!("unsupported basis order {:?}", raw.order)));
        }
        let scheme = TruncationScheme::new(raw.dimension, raw.max_degree).map_err(D::Error::custom)?;
        let mut v = CoefficientVector::new(scheme, raw.coefficients).map_err(D::Error::custom)?;
        v.regularity_label = raw.regularity_label;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scheme(d: usize, k: usize) -> TruncationScheme {
        TruncationScheme::new(d, k).unwrap()
    }

    #[test]
    fn unit_vector_norm() {
        let s = scheme(2, 6);
        let basis = s.basis();
        for (pos, n) in basis.indices().iter().enumerate() {
            let v = CoefficientVector::unit(s, pos);
            let k = n.total_degree() as f64;
            for &p in &[-1.5, -0.5, 0.0, 0.75, 2.0] {
                let want = (2.0 * k + 2.0).powf(p);
                assert!((v.norm_p(p) - want).abs() <= 1e-13 * want);
            }
        }
    }

    #[test]
    fn zero_index_is_euclidean() {
        let v = CoefficientVector::new(scheme(1, 3), vec![3.0, 0.0, -4.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v.norm_p(0.0), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn pairing_requires_same_scheme() {
        let a = CoefficientVector::zeros(scheme(1, 3));
        let b = CoefficientVector::zeros(scheme(1, 4));
        assert!(matches!(a.dual_pair(&b), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(CoefficientVector::new(scheme(1, 3), vec![0.0; 3]).is_err());
        assert!(CoefficientVector::new(scheme(1, 1), vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn hermite_operator_inverse_pair() {
        let v = CoefficientVector::new(scheme(2, 3), (0..10).map(|i| (i as f64).sin()).collect()).unwrap();
        let back = v.apply_hermite_operator(1).apply_hermite_operator(-1);
        for (a, b) in v.coefficients().iter().zip(back.coefficients()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        assert_eq!(v.apply_hermite_operator(0), v);
    }

    #[test]
    fn json_layout() {
        let v = CoefficientVector::new(scheme(1, 2), vec![0.5, -0.25, 0.1]).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["dimension"], 1);
        assert_eq!(json["max_degree"], 2);
        assert_eq!(json["order"], "graded-lex");
        assert_eq!(json["coefficients"][2], 0.1);
        let back: CoefficientVector = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);
        let bad = serde_json::json!({"dimension": 1, "max_degree": 0, "order": "lex", "coefficients": [1.0]});
        assert!(serde_json::from_value::<CoefficientVector>(bad).is_err());
    }

    fn vector_strategy() -> impl Strategy<Value = CoefficientVector> {
        (1usize..=2, 0usize..=12).prop_flat_map(|(d, k)| {
            let s = scheme(d, k);
            prop::collection::vec(-5.0f64..5.0, s.basis_size())
                .prop_map(move |c| CoefficientVector::new(s, c).unwrap())
        })
    }

    proptest! {
        #[test]
        fn scale_monotonicity(v in vector_strategy(), p in -3.0f64..3.0, dq in 0.0f64..2.0) {
            prop_assert!(v.norm_p(p) <= v.norm_p(p + dq) * (1.0 + 1e-12));
        }

        #[test]
        fn hermite_isometry(v in vector_strategy(), p in -2.0f64..2.0, l in -2i32..=2) {
            let lhs = v.apply_hermite_operator(l).norm_p(p);
            let rhs = v.norm_p(p + l as f64);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn pairing_symmetric_bilinear(
            (u, v, w) in (0usize..=10).prop_flat_map(|k| {
                let s = scheme(1, k);
                let n = s.basis_size();
                (
                    prop::collection::vec(-3.0f64..3.0, n),
                    prop::collection::vec(-3.0f64..3.0, n),
                    prop::collection::vec(-3.0f64..3.0, n),
                ).prop_map(move |(a, b, c)| (
                    CoefficientVector::new(s, a).unwrap(),
                    CoefficientVector::new(s, b).unwrap(),
                    CoefficientVector::new(s, c).unwrap(),
                ))
            }),
            alpha in -2.0f64..2.0,
        ) {
            let uv = u.dual_pair(&v).unwrap();
            prop_assert!((uv - v.dual_pair(&u).unwrap()).abs() <= 1e-12);
            let lhs = u.scale(alpha).add(&w).unwrap().dual_pair(&v).unwrap();
            let rhs = alpha * uv + w.dual_pair(&v).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn pairing_bounded_by_dual_norms(v in vector_strategy(), seed in 0u64..1000, p in prop::sample::select(vec![0.5, 1.0, 2.0])) {
            let u = CoefficientVector::new(
                v.scheme(),
                (0..v.len()).map(|i| ((i as u64 * 7919 + seed) as f64).sin()).collect(),
            ).unwrap();
            let pair = u.dual_pair(&v).unwrap().abs();
            prop_assert!(pair <= u.norm_p(-p) * v.norm_p(p) * (1.0 + 1e-12) + 1e-300);
        }
    }
}
