//! Hermite functions, graded multi-index bases and Gauss–Hermite quadrature.
//!
//! All evaluation happens in the L²-normalised *function* form
//! `h_k(t) = (2^k k! √π)^{-1/2} H_k(t) e^{-t²/2}` so that nothing overflows for
//! large `k`. The quadrature rules carry two weight sets: the classical weights
//! for `∫ g(x) e^{-|x|²} dx` and "function" weights for `∫ f(x) dx`, the latter
//! computed directly from the Hermite functions so that tiny outer weights keep
//! their relative accuracy.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sobolev::CoefficientVector;

/// `π^{-1/4}`, the value of `h_0` at the origin.
pub const PI_POW_MINUS_QUARTER: f64 = 0.751_125_544_464_942_5;

/// Upper bound on the number of nodes of a tensor-product rule.
pub const MAX_QUADRATURE_NODES: usize = 1_000_000;

/// Values `h_0(t), …, h_max(t)` of the normalised Hermite functions.
///
/// Uses `h_{k+1} = sqrt(2/(k+1)) t h_k − sqrt(k/(k+1)) h_{k−1}`. Values below
/// the smallest positive double (roughly `|t| > 37`) flush to zero.
pub fn hermite_functions(max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let h0 = PI_POW_MINUS_QUARTER * (-0.5 * t * t).exp();
    out.push(h0);
    if max == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * t * h0);
    for k in 1..max {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * t * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Single normalised Hermite function `h_k(t)`.
pub fn hermite_function(k: usize, t: f64) -> f64 {
    hermite_functions(k, t)[k]
}

/// `h_n(x) = ∏_i h_{n_i}(x_i)`.
pub fn eval_hermite(n: &MultiIndex, x: &[f64]) -> f64 {
    assert_eq!(n.dimension(), x.len(), "multi-index and point dimensions differ");
    n.entries()
        .iter()
        .zip(x)
        .map(|(&k, &t)| hermite_function(k, t))
        .product()
}

/// Element of `N_0^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn zero(dimension: usize) -> Self {
        Self(vec![0; dimension])
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// Index shifted by `+1` in coordinate `axis`.
    pub fn raised(&self, axis: usize) -> Self {
        let mut e = self.0.clone();
        e[axis] += 1;
        Self(e)
    }

    /// Index shifted by `-1` in coordinate `axis`, if that stays non-negative.
    pub fn lowered(&self, axis: usize) -> Option<Self> {
        if self.0[axis] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[axis] -= 1;
        Some(Self(e))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Total-degree truncation: all `n ∈ N_0^d` with `|n| ≤ max_degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationScheme {
    dimension: usize,
    max_degree: usize,
}

impl TruncationScheme {
    pub fn new(dimension: usize, max_degree: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Self {
            dimension,
            max_degree,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `binomial(K + d, d)`.
    pub fn basis_size(&self) -> usize {
        binomial(self.max_degree + self.dimension, self.dimension)
    }

    /// Number of multi-indices of total degree strictly below `degree`.
    pub fn degree_offset(&self, degree: usize) -> usize {
        if degree == 0 {
            0
        } else {
            binomial(degree - 1 + self.dimension, self.dimension)
        }
    }

    /// Total degree of each basis position, in basis order.
    pub fn degrees(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.basis_size());
        for k in 0..=self.max_degree {
            let count = self.degree_offset(k + 1) - self.degree_offset(k);
            out.extend(std::iter::repeat_n(k, count));
        }
        out
    }

    /// Same dimension, different truncation degree.
    pub fn with_max_degree(&self, max_degree: usize) -> Self {
        Self {
            dimension: self.dimension,
            max_degree,
        }
    }

    pub fn basis(&self) -> Basis {
        Basis::new(*self)
    }
}

impl fmt::Display for TruncationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} K={}", self.dimension, self.max_degree)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Graded lexicographic enumeration: by total degree, and within a degree by
/// decreasing first entry, then recursively on the remaining entries.
pub fn enumerate_basis(scheme: &TruncationScheme) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(scheme.basis_size());
    let mut buf = vec![0usize; scheme.dimension];
    for k in 0..=scheme.max_degree {
        fill_degree(&mut buf, 0, k, &mut out);
    }
    out
}

fn fill_degree(buf: &mut [usize], axis: usize, remaining: usize, out: &mut Vec<MultiIndex>) {
    if axis + 1 == buf.len() {
        buf[axis] = remaining;
        out.push(MultiIndex(buf.to_vec()));
        return;
    }
    for first in (0..=remaining).rev() {
        buf[axis] = first;
        fill_degree(buf, axis + 1, remaining - first, out);
    }
}

/// Enumerated basis with position lookup.
#[derive(Clone, Debug)]
pub struct Basis {
    scheme: TruncationScheme,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl Basis {
    pub fn new(scheme: TruncationScheme) -> Self {
        let indices = enumerate_basis(&scheme);
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self {
            scheme,
            indices,
            lookup,
        }
    }

    pub fn scheme(&self) -> TruncationScheme {
        self.scheme
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, n: &MultiIndex) -> Option<usize> {
        self.lookup.get(n).copied()
    }

    /// Values `h_n(x)` for every retained `n`, in basis order.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.scheme.dimension);
        let tables: Vec<Vec<f64>> = x
            .iter()
            .map(|&t| hermite_functions(self.scheme.max_degree, t))
            .collect();
        self.indices
            .iter()
            .map(|n| {
                n.entries()
                    .iter()
                    .enumerate()
                    .map(|(a, &k)| tables[a][k])
                    .product()
            })
            .collect()
    }
}

/// Gauss–Hermite rule, tensorised over `dimension` axes.
///
/// `weights` integrate `g(x) e^{-|x|²}`; `function_weights = weights · e^{|x|²}`
/// integrate `f(x)` directly and are exact when `f` is a Hermite function times
/// a polynomial of low enough degree.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    dimension: usize,
    order: usize,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    axis_function_weights: Vec<f64>,
}

impl QuadratureRule {
    /// One-dimensional `order`-point rule.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        Self::tensor(order, 1)
    }

    /// Tensor-product rule with `order` points per axis.
    pub fn tensor(order: usize, dimension: usize) -> Result<Self> {
        if order == 0 || dimension == 0 {
            return Err(Error::InvalidArgument(
                "quadrature order and dimension must be positive".into(),
            ));
        }
        let nodes = (order as f64).powi(dimension as i32);
        if nodes > MAX_QUADRATURE_NODES as f64 {
            return Err(Error::QuadratureTooLarge {
                nodes: nodes.min(usize::MAX as f64) as usize,
                limit: MAX_QUADRATURE_NODES,
            });
        }
        let (axis_nodes, axis_function_weights) = gauss_hermite_1d(order);
        let axis_weights = axis_nodes
            .iter()
            .zip(&axis_function_weights)
            .map(|(x, w)| w * (-x * x).exp())
            .collect();
        Ok(Self {
            dimension,
            order,
            axis_nodes,
            axis_weights,
            axis_function_weights,
        })
    }

    /// Default rule for a truncation scheme: `2K + 16` points per axis.
    pub fn for_scheme(scheme: &TruncationScheme) -> Result<Self> {
        Self::tensor(default_order(scheme.max_degree), scheme.dimension)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    pub fn axis_function_weights(&self) -> &[f64] {
        &self.axis_function_weights
    }

    /// All tensor nodes, first axis varying slowest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.node_indices()
            .map(|idx| idx.iter().map(|&i| self.axis_nodes[i]).collect())
            .collect()
    }

    /// Weights for `∫ g(x) e^{-|x|²} dx`, aligned with [`nodes`](Self::nodes).
    pub fn weights(&self) -> Vec<f64> {
        self.node_indices()
            .map(|idx| idx.iter().map(|&i| self.axis_weights[i]).product())
            .collect()
    }

    /// Weights for `∫ f(x) dx`, aligned with [`nodes`](Self::nodes).
    pub fn function_weights(&self) -> Vec<f64> {
        self.node_indices()
            .map(|idx| idx.iter().map(|&i| self.axis_function_weights[i]).product())
            .collect()
    }

    /// `Σ w_i g(x_i) ≈ ∫ g(x) e^{-|x|²} dx`.
    pub fn integrate_weighted<G: Fn(&[f64]) -> f64>(&self, g: G) -> f64 {
        let mut x = vec![0.0; self.dimension];
        self.node_indices()
            .map(|idx| {
                let mut w = 1.0;
                for (a, &i) in idx.iter().enumerate() {
                    x[a] = self.axis_nodes[i];
                    w *= self.axis_weights[i];
                }
                w * g(&x)
            })
            .sum()
    }

    /// `Σ W_i f(x_i) ≈ ∫ f(x) dx` for Gaussian-dominated `f`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let mut x = vec![0.0; self.dimension];
        self.node_indices()
            .map(|idx| {
                let mut w = 1.0;
                for (a, &i) in idx.iter().enumerate() {
                    x[a] = self.axis_nodes[i];
                    w *= self.axis_function_weights[i];
                }
                w * f(&x)
            })
            .sum()
    }

    fn node_indices(&self) -> NodeIndices {
        NodeIndices {
            order: self.order,
            current: Some(vec![0; self.dimension]),
        }
    }
}

pub(crate) fn default_order(max_degree: usize) -> usize {
    2 * max_degree + 16
}

struct NodeIndices {
    order: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for NodeIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut axis = next.len();
        loop {
            if axis == 0 {
                self.current = None;
                break;
            }
            axis -= 1;
            next[axis] += 1;
            if next[axis] < self.order {
                self.current = Some(next);
                break;
            }
            next[axis] = 0;
        }
        Some(out)
    }
}

/// Nodes and function weights of the `n`-point rule.
///
/// Golub–Welsch for the initial nodes, Newton polishing on `h_n`, then
/// `W_i = 1 / (n h_{n-1}(x_i)²)` (Christoffel numbers in function form).
fn gauss_hermite_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        let off = ((i + 1) as f64 / 2.0).sqrt();
        jacobi[(i, i + 1)] = off;
        jacobi[(i + 1, i)] = off;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let scale = (2.0 * n as f64).sqrt();
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_functions(n, *x);
            let deriv = scale * h[n - 1] - *x * h[n];
            if deriv == 0.0 {
                break;
            }
            let step = h[n] / deriv;
            *x -= step;
            if step.abs() < 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
    }
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let weights = nodes
        .iter()
        .map(|&x| {
            let h = hermite_function(n - 1, x);
            1.0 / (n as f64 * h * h)
        })
        .collect();
    (nodes, weights)
}

/// Reusable projector onto the Hermite basis of a scheme.
///
/// Caches the per-axis tables `h_k(x_i)` so repeated projections (e.g. a
/// profile shifted at every time step) cost one pass over the nodes.
#[derive(Clone, Debug)]
pub struct Projector {
    scheme: TruncationScheme,
    rule: QuadratureRule,
    basis: Basis,
    axis_tables: Vec<Vec<f64>>,
}

impl Projector {
    pub fn new(scheme: TruncationScheme, rule: QuadratureRule) -> Result<Self> {
        if rule.dimension() != scheme.dimension() {
            return Err(Error::InvalidArgument(format!(
                "quadrature dimension {} does not match scheme {}",
                rule.dimension(),
                scheme
            )));
        }
        if rule.order() <= scheme.max_degree() {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {} cannot resolve degree {}",
                rule.order(),
                scheme.max_degree()
            )));
        }
        let axis_tables = rule
            .axis_nodes()
            .iter()
            .map(|&t| hermite_functions(scheme.max_degree(), t))
            .collect();
        Ok(Self {
            basis: scheme.basis(),
            scheme,
            rule,
            axis_tables,
        })
    }

    /// Projector with the default `2K + 16` rule.
    pub fn for_scheme(scheme: TruncationScheme) -> Result<Self> {
        Self::new(scheme, QuadratureRule::for_scheme(&scheme)?)
    }

    pub fn scheme(&self) -> TruncationScheme {
        self.scheme
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Coefficients `c_n ≈ ∫ f(x) h_n(x) dx`.
    pub fn project<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<CoefficientVector> {
        let d = self.scheme.dimension();
        let mut coeffs = vec![0.0; self.basis.len()];
        let mut x = vec![0.0; d];
        for idx in self.rule.node_indices() {
            let mut w = 1.0;
            for (a, &i) in idx.iter().enumerate() {
                x[a] = self.rule.axis_nodes[i];
                w *= self.rule.axis_function_weights[i];
            }
            let value = w * f(&x);
            if value == 0.0 {
                continue;
            }
            for (c, n) in coeffs.iter_mut().zip(self.basis.indices()) {
                let mut prod = value;
                for (a, &k) in n.entries().iter().enumerate() {
                    prod *= self.axis_tables[idx[a]][k];
                }
                *c += prod;
            }
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "quadrature projection (integrand grows faster than a Gaussian?)".into(),
            });
        }
        CoefficientVector::new(self.scheme, coeffs)
    }
}

/// `c_n ≈ ∫ f(x) h_n(x) dx` for every retained `n`.
pub fn project_function<F: Fn(&[f64]) -> f64>(
    f: F,
    scheme: &TruncationScheme,
    rule: &QuadratureRule,
) -> Result<CoefficientVector> {
    Projector::new(*scheme, rule.clone())?.project(f)
}
