//! Coefficient vectors of Dirac deltas, finite atomic measures and low-degree
//! polynomials.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hermite::{QuadratureRule, TruncationScheme};
use crate::sobolev::CoefficientVector;

pub const MAX_POLYNOMIAL_DEGREE: usize = 3;

fn check_point(x: &[f64], scheme: &TruncationScheme) -> Result<()> {
    if x.len() != scheme.dimension() {
        return Err(Error::InvalidArgument(format!(
            "point has {} components, scheme {}",
            x.len(),
            scheme
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "distribution location".into(),
        });
    }
    Ok(())
}

/// `c_n = h_n(x)`.
pub fn delta_coefficients(x: &[f64], scheme: &TruncationScheme) -> Result<CoefficientVector> {
    check_point(x, scheme)?;
    CoefficientVector::new(*scheme, scheme.basis().evaluate(x))
}

/// `τ_shift δ_x = δ_{x + shift}`, evaluated directly rather than through the
/// matrix exponential.
pub fn translated_delta(x: &[f64], shift: &[f64], scheme: &TruncationScheme) -> Result<CoefficientVector> {
    if x.len() != shift.len() {
        return Err(Error::InvalidArgument("shift and location differ in length".into()));
    }
    let moved: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a + b).collect();
    delta_coefficients(&moved, scheme)
}

/// `Σ_i w_i δ_{x_i}` for atoms `(w_i, x_i)`.
pub fn atomic_measure_coefficients(
    atoms: &[(f64, Vec<f64>)],
    scheme: &TruncationScheme,
) -> Result<CoefficientVector> {
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("atomic measure needs at least one atom".into()));
    }
    let basis = scheme.basis();
    let mut acc = vec![0.0; basis.len()];
    for (weight, x) in atoms {
        check_point(x, scheme)?;
        for (c, h) in acc.iter_mut().zip(basis.evaluate(x)) {
            *c += weight * h;
        }
    }
    CoefficientVector::new(*scheme, acc)
}

/// Polynomial in `dimension` variables, stored as exponent vector → coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dimension: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl Polynomial {
    pub fn zero(dimension: usize) -> Self {
        Self {
            dimension,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dimension: usize, value: f64) -> Self {
        Self::zero(dimension).with_term(vec![0; dimension], value)
    }

    /// `constant + Σ_i linear[i] x_i`.
    pub fn affine(constant: f64, linear: &[f64]) -> Self {
        let d = linear.len();
        let mut p = Self::constant(d, constant);
        for (i, &c) in linear.iter().enumerate() {
            let mut e = vec![0; d];
            e[i] = 1;
            p = p.with_term(e, c);
        }
        p
    }

    /// Adds `coefficient · x^exponents`.
    pub fn with_term(mut self, exponents: Vec<usize>, coefficient: f64) -> Self {
        assert_eq!(exponents.len(), self.dimension, "exponent vector length");
        if coefficient != 0.0 {
            let entry = self.terms.entry(exponents).or_insert(0.0);
            *entry += coefficient;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.terms
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// `y ↦ p(y − shift)`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.dimension, "shift length");
        let mut out = Self::zero(self.dimension);
        for (exps, &c) in &self.terms {
            // expand ∏_i (y_i − s_i)^{a_i}
            let mut partial: Vec<(Vec<usize>, f64)> = vec![(vec![0; self.dimension], c)];
            for (axis, &a) in exps.iter().enumerate() {
                let mut next = Vec::with_capacity(partial.len() * (a + 1));
                for (e, v) in &partial {
                    for b in 0..=a {
                        let mut e2 = e.clone();
                        e2[axis] = b;
                        let factor = binomial_f64(a, b) * (-shift[axis]).powi((a - b) as i32);
                        next.push((e2, v * factor));
                    }
                }
                partial = next;
            }
            for (e, v) in partial {
                out = out.with_term(e, v);
            }
        }
        out
    }
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    crate::hermite::binomial(n, k) as f64
}

/// Hermite coefficients `∫ p(x) h_n(x) dx` of a polynomial of degree at most 3.
///
/// Substituting `x = √2 y` turns each integrand into a polynomial times
/// `e^{-|y|²}`, so a Gauss–Hermite rule with `K/2 + 4` points per axis is exact.
pub fn polynomial_coefficients(poly: &Polynomial, scheme: &TruncationScheme) -> Result<CoefficientVector> {
    if poly.dimension() != scheme.dimension() {
        return Err(Error::InvalidArgument(format!(
            "polynomial in {} variables, scheme {}",
            poly.dimension(),
            scheme
        )));
    }
    let degree = poly.degree();
    if degree > MAX_POLYNOMIAL_DEGREE {
        return Err(Error::DegreeAboveCap {
            degree,
            cap: MAX_POLYNOMIAL_DEGREE,
        });
    }
    let d = scheme.dimension();
    let rule = QuadratureRule::tensor(scheme.max_degree() / 2 + 4, d)?;
    let basis = scheme.basis();
    let jacobian = 2f64.sqrt().powi(d as i32);
    let mut acc = vec![0.0; basis.len()];
    for (y, w) in rule.nodes().iter().zip(rule.weights()) {
        let x: Vec<f64> = y.iter().map(|v| v * 2f64.sqrt()).collect();
        let value = poly.evaluate(&x);
        if value == 0.0 {
            continue;
        }
        // h_n(√2 y) e^{|y|²} stays bounded by a polynomial in y
        let gauss = y.iter().map(|v| v * v).sum::<f64>().exp();
        for (c, h) in acc.iter_mut().zip(basis.evaluate(&x)) {
            *c += jacobian * w * value * h * gauss;
        }
    }
    CoefficientVector::new(*scheme, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_function, Projector};
    use approx::assert_abs_diff_eq;

    fn scheme(d: usize, k: usize) -> TruncationScheme {
        TruncationScheme::new(d, k).unwrap()
    }

    fn gaussian(x: &[f64]) -> f64 {
        (-(x[0] - 0.3) * (x[0] - 0.3) / 1.5).exp()
    }

    #[test]
    fn delta_at_origin_has_no_odd_modes() {
        let c = delta_coefficients(&[0.0], &scheme(1, 20)).unwrap();
        for (k, v) in c.coefficients().iter().enumerate() {
            if k % 2 == 1 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn delta_evaluates_test_functions() {
        let s = scheme(1, 60);
        let phi = Projector::for_scheme(s).unwrap().project(gaussian).unwrap();
        for &x in &[-1.0, -0.4, 0.0, 0.7, 1.0] {
            let got = delta_coefficients(&[x], &s).unwrap().dual_pair(&phi).unwrap();
            assert_abs_diff_eq!(got, gaussian(&[x]), epsilon = 1e-6);
        }
    }

    #[test]
    fn delta_norm_matches_direct_sum() {
        let s = scheme(1, 60);
        let got = delta_coefficients(&[0.0], &s).unwrap().norm_p(-0.5);
        let mut sum = 0.0;
        for k in 0..=60 {
            let h = hermite_function(k, 0.0);
            sum += h * h / (2.0 * k as f64 + 1.0);
        }
        assert_abs_diff_eq!(got, sum.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn delta_norm_decays_away_from_origin() {
        let s = scheme(1, 120);
        let norms: Vec<f64> = [2.0, 3.0, 4.0]
            .iter()
            .map(|&x| delta_coefficients(&[x], &s).unwrap().norm_p(-0.5))
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    }

    #[test]
    fn delta_partial_sums_by_regularity() {
        // below the threshold p = -1/4 the increments shrink much faster than above it
        let sq = |p: f64, k: usize| delta_coefficients(&[0.0], &scheme(1, k)).unwrap().norm_p(p).powi(2);
        let above = sq(-0.2, 120) - sq(-0.2, 100);
        let below = sq(-0.5, 120) - sq(-0.5, 100);
        assert!(above > 10.0 * below, "{above} vs {below}");
        // the p = -0.2 partial sums keep growing by a visible amount per 20 degrees
        assert!(above > 0.04);
        assert!(below < 2e-3);
    }

    #[test]
    fn atomic_measures() {
        let s = scheme(2, 8);
        let single = atomic_measure_coefficients(&[(1.0, vec![0.5, -0.2])], &s).unwrap();
        assert_eq!(single, delta_coefficients(&[0.5, -0.2], &s).unwrap());
        let cancel = atomic_measure_coefficients(&[(1.0, vec![0.5, -0.2]), (-1.0, vec![0.5, -0.2])], &s).unwrap();
        assert!(cancel.coefficients().iter().all(|&c| c == 0.0));
        assert!(atomic_measure_coefficients(&[], &s).is_err());
    }

    #[test]
    fn translated_measure_pairs_with_shifted_points() {
        let s = scheme(1, 60);
        let phi = Projector::for_scheme(s).unwrap().project(gaussian).unwrap();
        let atoms = [(0.7, vec![-0.4]), (-1.2, vec![0.1]), (0.5, vec![0.6])];
        let shift = 0.35;
        let moved: Vec<(f64, Vec<f64>)> = atoms.iter().map(|(w, x)| (*w, vec![x[0] + shift])).collect();
        let mu = atomic_measure_coefficients(&moved, &s).unwrap();
        let want: f64 = atoms.iter().map(|(w, x)| w * gaussian(&[x[0] + shift])).sum();
        assert_abs_diff_eq!(mu.dual_pair(&phi).unwrap(), want, epsilon = 1e-6);
    }

    #[test]
    fn polynomial_cap_and_zero() {
        let s = scheme(1, 10);
        assert!(polynomial_coefficients(&Polynomial::zero(1), &s)
            .unwrap()
            .coefficients()
            .iter()
            .all(|&c| c == 0.0));
        let quartic = Polynomial::zero(1).with_term(vec![4], 1.0);
        assert!(matches!(
            polynomial_coefficients(&quartic, &s),
            Err(Error::DegreeAboveCap { degree: 4, cap: 3 })
        ));
    }

    #[test]
    fn constant_polynomial_matches_quadrature() {
        // ∫ h_k computed with a large independent quadrature rule
        let s = scheme(1, 30);
        let c = polynomial_coefficients(&Polynomial::constant(1, 1.0), &s).unwrap();
        let rule = QuadratureRule::gauss_hermite(120).unwrap();
        for k in 0..=30 {
            if k % 2 == 1 {
                assert_abs_diff_eq!(c.coefficients()[k], 0.0, epsilon = 1e-12);
            } else {
                let want = rule.integrate(|x| hermite_function(k, x[0]));
                assert_abs_diff_eq!(c.coefficients()[k], want, epsilon = 1e-9);
            }
        }
        // ∫ h_0 = √2 π^{1/4}
        assert_abs_diff_eq!(
            c.coefficients()[0],
            2f64.sqrt() * std::f64::consts::PI.powf(0.25),
            epsilon = 1e-13
        );
    }

    #[test]
    fn cubic_in_two_variables_matches_quadrature() {
        let s = scheme(2, 8);
        let p = Polynomial::affine(0.5, &[1.0, -2.0])
            .with_term(vec![2, 1], 0.3)
            .with_term(vec![0, 3], -0.1);
        let got = polynomial_coefficients(&p, &s).unwrap();
        let rule = QuadratureRule::tensor(60, 2).unwrap();
        let basis = s.basis();
        for (pos, n) in basis.indices().iter().enumerate() {
            let want = rule.integrate(|x| p.evaluate(x) * crate::hermite::eval_hermite(n, x));
            assert_abs_diff_eq!(got.coefficients()[pos], want, epsilon = 1e-9);
        }
    }

    #[test]
    fn translating_an_affine_function_subtracts_a_constant() {
        let s = scheme(2, 20);
        let linear = [1.5, -0.8];
        let f = Polynomial::affine(0.4, &linear);
        let one = polynomial_coefficients(&Polynomial::constant(2, 1.0), &s).unwrap();
        let base = polynomial_coefficients(&f, &s).unwrap();
        for shift in [[0.3, 0.0], [-1.0, 2.0], [2.5, 0.7]] {
            let lhs = polynomial_coefficients(&f.translated(&shift), &s).unwrap();
            let offset: f64 = linear.iter().zip(&shift).map(|(c, x)| c * x).sum();
            let rhs = base.sub(&one.scale(offset)).unwrap();
            for (a, b) in lhs.coefficients().iter().zip(rhs.coefficients()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn affine_translates_grow_at_most_linearly() {
        let s = scheme(1, 40);
        let f = Polynomial::affine(0.4, &[1.5]);
        let f_norm = polynomial_coefficients(&f, &s).unwrap().norm_p(-1.0);
        let one_norm = polynomial_coefficients(&Polynomial::constant(1, 1.0), &s).unwrap().norm_p(-1.0);
        let bound = f_norm.max(1.5 * one_norm);
        for i in 0..=60 {
            let x = -3.0 + 0.1 * i as f64;
            let n = polynomial_coefficients(&f.translated(&[x]), &s).unwrap().norm_p(-1.0);
            assert!(n <= bound * (1.0 + x.abs()) + 1e-12, "x={x}: {n}");
        }
    }

    #[test]
    fn polynomial_translation_is_a_shift() {
        let p = Polynomial::zero(2).with_term(vec![2, 1], 1.0).with_term(vec![0, 1], -3.0);
        let q = p.translated(&[0.5, -1.0]);
        for y in [[0.0, 0.0], [1.0, 2.0], [-0.3, 0.9]] {
            assert_abs_diff_eq!(q.evaluate(&y), p.evaluate(&[y[0] - 0.5, y[1] + 1.0]), epsilon = 1e-12);
        }
    }
}
