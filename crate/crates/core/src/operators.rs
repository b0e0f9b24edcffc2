//! Matrices of `∂_i`, `M_i`, the Hermite operator and the translation group
//! acting on truncated coefficient vectors.
//!
//! Axes are zero-based. All matrices act on coefficient columns in basis order,
//! `(A c)_m = Σ_n A[m, n] c_n`, and simply drop contributions whose target
//! degree exceeds the truncation (Galerkin projection).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermite::TruncationScheme;
use crate::sobolev::{CoefficientVector, RegularityIndex};

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    Derivative(usize),
    Multiplication(usize),
    Hermite,
    Translation(Vec<f64>),
    Composite,
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    scheme: TruncationScheme,
    matrix: DMatrix<f64>,
    kind: OperatorKind,
}

impl OperatorMatrix {
    pub fn new(scheme: TruncationScheme, matrix: DMatrix<f64>, kind: OperatorKind) -> Result<Self> {
        let n = scheme.basis_size();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "operator matrix is {}x{}, scheme {} needs {n}x{n}",
                matrix.nrows(),
                matrix.ncols(),
                scheme
            )));
        }
        Ok(Self { scheme, matrix, kind })
    }

    pub fn identity(scheme: TruncationScheme) -> Self {
        let n = scheme.basis_size();
        Self {
            scheme,
            matrix: DMatrix::identity(n, n),
            kind: OperatorKind::Composite,
        }
    }

    pub fn scheme(&self) -> TruncationScheme {
        self.scheme
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn apply(&self, v: &CoefficientVector) -> Result<CoefficientVector> {
        if v.scheme() != self.scheme {
            return Err(Error::SchemeMismatch {
                left: self.scheme.to_string(),
                right: v.scheme().to_string(),
            });
        }
        CoefficientVector::from_dvector(self.scheme, &(&self.matrix * v.to_dvector()))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.scheme != other.scheme {
            return Err(Error::SchemeMismatch {
                left: self.scheme.to_string(),
                right: other.scheme.to_string(),
            });
        }
        Ok(Self {
            scheme: self.scheme,
            matrix: &self.matrix * &other.matrix,
            kind: OperatorKind::Composite,
        })
    }
}

fn check_axis(axis: usize, scheme: &TruncationScheme) -> Result<()> {
    if axis >= scheme.dimension() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for dimension {}",
            scheme.dimension()
        )));
    }
    Ok(())
}

/// Builds a matrix from the one-dimensional ladder action
/// `h_k ↦ lower(k) h_{k-1} + upper(k) h_{k+1}` along `axis`.
fn ladder_matrix(
    axis: usize,
    scheme: &TruncationScheme,
    lower: impl Fn(f64) -> f64,
    upper: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let basis = scheme.basis();
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (col, idx) in basis.indices().iter().enumerate() {
        let k = idx.entries()[axis] as f64;
        if let Some(down) = idx.lowered(axis) {
            let row = basis.position(&down).expect("lowered index is retained");
            m[(row, col)] = lower(k);
        }
        if let Some(row) = basis.position(&idx.raised(axis)) {
            m[(row, col)] = upper(k);
        }
    }
    m
}

/// `∂_i h_k = sqrt(k/2) h_{k-1} − sqrt((k+1)/2) h_{k+1}` along `axis`.
pub fn derivative_matrix(axis: usize, scheme: &TruncationScheme) -> Result<OperatorMatrix> {
    check_axis(axis, scheme)?;
    let m = ladder_matrix(axis, scheme, |k| (k / 2.0).sqrt(), |k| -((k + 1.0) / 2.0).sqrt());
    OperatorMatrix::new(*scheme, m, OperatorKind::Derivative(axis))
}

/// `x_i h_k = sqrt(k/2) h_{k-1} + sqrt((k+1)/2) h_{k+1}` along `axis`.
pub fn multiplication_matrix(axis: usize, scheme: &TruncationScheme) -> Result<OperatorMatrix> {
    check_axis(axis, scheme)?;
    let m = ladder_matrix(axis, scheme, |k| (k / 2.0).sqrt(), |k| ((k + 1.0) / 2.0).sqrt());
    OperatorMatrix::new(*scheme, m, OperatorKind::Multiplication(axis))
}

/// `Σ_i (M_i² − ∂_i²)`, assembled from the truncated ladder matrices.
///
/// Agrees with `diag(2|n| + d)` on rows with `|n| ≤ K − 2`.
pub fn hermite_matrix(scheme: &TruncationScheme) -> Result<OperatorMatrix> {
    let n = scheme.basis_size();
    let mut acc = DMatrix::zeros(n, n);
    for axis in 0..scheme.dimension() {
        let m = multiplication_matrix(axis, scheme)?.matrix;
        let d = derivative_matrix(axis, scheme)?.matrix;
        acc += &m * &m - &d * &d;
    }
    OperatorMatrix::new(*scheme, acc, OperatorKind::Hermite)
}

// Padé [13/13] numerator coefficients.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with a fixed [13/13] Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &scaled * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// `τ_x = exp(−Σ_i x_i ∂_i)` on the truncated space.
pub fn translation_operator(x: &[f64], scheme: &TruncationScheme) -> Result<OperatorMatrix> {
    if x.len() != scheme.dimension() {
        return Err(Error::InvalidArgument(format!(
            "shift has {} components, scheme {}",
            x.len(),
            scheme
        )));
    }
    let n = scheme.basis_size();
    let mut generator = DMatrix::zeros(n, n);
    for (axis, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            generator -= derivative_matrix(axis, scheme)?.matrix * xi;
        }
    }
    OperatorMatrix::new(*scheme, expm(&generator), OperatorKind::Translation(x.to_vec()))
}

/// `‖(τ_{h e_i} v − v)/h + ∂_i v‖_p`, which vanishes like `O(h)` for smooth `v`.
pub fn generator_residual(
    v: &CoefficientVector,
    axis: usize,
    h: f64,
    p: impl Into<RegularityIndex>,
) -> Result<f64> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument("step h must be finite and nonzero".into()));
    }
    let scheme = v.scheme();
    check_axis(axis, &scheme)?;
    let mut shift = vec![0.0; scheme.dimension()];
    shift[axis] = h;
    let translated = translation_operator(&shift, &scheme)?.apply(v)?;
    let derivative = derivative_matrix(axis, &scheme)?.apply(v)?;
    let residual = translated.sub(v)?.scale(1.0 / h).add(&derivative)?;
    Ok(residual.norm_p(p))
}
