//! Long-term voltage stability of operating points and the parametrization
//! of semi-stable points by a direction `λ` and a Perron root `r`.
//!
//! A positive voltage vector is stable when the negated Jacobian of the
//! demand map is a nonsingular M-matrix and semi-stable on the boundary
//! when it is a singular M-matrix. Every semi-stable point is
//! `½ h(λ)⁻¹ [λ](I* + r·1)` for a unique `λ` in the normalized cone where
//! `h(λ) = ½([λ]Y_LL + Y_LL[λ])` is positive definite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::powerflow::{check_dim, check_positive, jacobian};
use crate::specmat::{self, MClass, PerronData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    Stable,
    SemiStableBoundary,
    Unstable,
}

impl StabilityClass {
    pub fn is_semi_stable(self) -> bool {
        matches!(self, Self::Stable | Self::SemiStableBoundary)
    }
}

/// A point of `Λ₁ × [0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityParam {
    lambda: DVector<f64>,
    r: f64,
}

impl StabilityParam {
    /// Normalizes `lambda` to unit 1-norm. Membership of `Λ₁` is checked
    /// where the parameter is used, since it depends on the grid.
    pub fn new(lambda: DVector<f64>, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::LambdaNotInLambda1);
        }
        if lambda.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::LambdaNotInLambda1);
        }
        let norm = lambda.sum();
        Ok(Self {
            lambda: lambda / norm,
            r,
        })
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lambda1Membership {
    Interior,
    Boundary,
    Outside,
}

/// `h(λ) = ½([λ]Y_LL + Y_LL[λ])`.
pub fn h_of(model: &GridModel, lambda: &DVector<f64>) -> DMatrix<f64> {
    let y = model.y_ll();
    let n = y.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (lambda[i] + lambda[j]) * y[(i, j)])
}

pub fn in_lambda1(model: &GridModel, lambda: &DVector<f64>) -> Lambda1Membership {
    if lambda.len() != model.n() || lambda.iter().any(|&x| !(x > 0.0)) {
        return Lambda1Membership::Outside;
    }
    let h = h_of(model, lambda);
    let tol = specmat::default_tolerance(&h);
    let lowest = SymmetricEigen::new(h.clone()).eigenvalues.min();
    if lowest > tol && h.cholesky().is_some() {
        Lambda1Membership::Interior
    } else if lowest >= -tol {
        Lambda1Membership::Boundary
    } else {
        Lambda1Membership::Outside
    }
}

/// Perron data of `-∂P_c/∂V_Lᵀ = Y_LL[V] + D`, `D = [Y_LL(V - V*)]`.
///
/// With `V > 0` the matrix is diagonally similar to the symmetric
/// `S = [√V] Y_LL [√V] + D`: if `S u = r u` then `λ ∝ [√V]⁻¹ u`. For a
/// reducible load block the returned vector is only nonnegative.
pub fn jacobian_perron(model: &GridModel, v: &DVector<f64>) -> Result<PerronData> {
    check_dim(model, v)?;
    check_positive(v)?;
    let sqrt_v = v.map(f64::sqrt);
    let y = model.y_ll();
    let d = y * (v - model.v_star());
    let n = v.len();
    let s = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { d[i] } else { 0.0 };
        sqrt_v[i] * y[(i, j)] * sqrt_v[j] + diag
    });
    let eig = SymmetricEigen::new(s);
    let k = eig.eigenvalues.imin();
    let root = eig.eigenvalues[k];
    let u = eig.eigenvectors.column(k).component_div(&sqrt_v);
    let u = if u.sum() < 0.0 { -u } else { u };

    if model.loads_irreducible() {
        if u.iter().all(|&x| x > 0.0) {
            let norm = u.sum();
            return Ok(PerronData { root, vector: u / norm });
        }
        // ill-conditioned eigenvector; use the direct solver on the transpose
        return specmat::perron(&-jacobian(model, v).transpose());
    }
    let u = u.map(|x| x.max(0.0));
    let norm = u.sum();
    Ok(PerronData { root, vector: u / norm })
}

/// Tolerance used to separate stable, boundary and unstable points.
pub fn point_tolerance(model: &GridModel, v: &DVector<f64>) -> f64 {
    specmat::default_tolerance(&jacobian(model, v))
}

pub fn class_from_root(root: f64, tol: f64) -> StabilityClass {
    match specmat::m_class_from_root(root, tol) {
        MClass::NonsingularM => StabilityClass::Stable,
        MClass::SingularM => StabilityClass::SemiStableBoundary,
        _ => StabilityClass::Unstable,
    }
}

/// Stability class together with the Perron root it was derived from.
pub fn classify_point_with_root(model: &GridModel, v: &DVector<f64>) -> Result<(StabilityClass, f64)> {
    let perron = jacobian_perron(model, v)?;
    Ok((class_from_root(perron.root, point_tolerance(model, v)), perron.root))
}

pub fn classify_point(model: &GridModel, v: &DVector<f64>) -> Result<StabilityClass> {
    classify_point_with_root(model, v).map(|(class, _)| class)
}

/// `½ h(λ)⁻¹ [λ](I* + r·1)`.
pub fn param_to_voltage(model: &GridModel, p: &StabilityParam) -> Result<DVector<f64>> {
    check_dim(model, p.lambda())?;
    let chol = h_of(model, p.lambda())
        .cholesky()
        .ok_or(Error::LambdaNotInLambda1)?;
    let rhs = p
        .lambda()
        .component_mul(&model.i_star().add_scalar(p.r()))
        * 0.5;
    Ok(chol.solve(&rhs))
}

/// Inverse of [`param_to_voltage`] on the closure of the stable set.
pub fn voltage_to_param(model: &GridModel, v: &DVector<f64>) -> Result<StabilityParam> {
    let perron = jacobian_perron(model, v)?;
    let class = class_from_root(perron.root, point_tolerance(model, v));
    if !class.is_semi_stable() {
        return Err(Error::NotSemiStable);
    }
    Ok(StabilityParam {
        lambda: perron.vector,
        r: perron.root.max(0.0),
    })
}

/// Boundary operating point `½ h(λ)⁻¹ [λ] I*` for a direction in `Λ`.
/// Invariant under positive scaling of `λ`.
pub fn phi(model: &GridModel, lambda: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(model, lambda)?;
    let chol = h_of(model, lambda)
        .cholesky()
        .ok_or(Error::LambdaNotInLambda)?;
    Ok(chol.solve(&(lambda.component_mul(model.i_star()) * 0.5)))
}

/// Uniform sample of the unit simplex.
pub fn sample_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    let e = DVector::from_fn(n, |_, _| -(1.0 - rng.random::<f64>()).ln());
    let total = e.sum();
    e / total
}

/// Rejection sample of `Λ₁`: simplex draws are kept only when `h(λ)` is
/// positive definite. Returns `None` after `max_tries` rejections.
pub fn sample_lambda1<R: Rng + ?Sized>(model: &GridModel, rng: &mut R, max_tries: usize) -> Option<DVector<f64>> {
    (0..max_tries)
        .map(|_| sample_simplex(model.n(), rng))
        .find(|lambda| in_lambda1(model, lambda) == Lambda1Membership::Interior)
}
