//! Structural matrix analysis: Z-matrix and irreducibility tests, Perron
//! data of irreducible Z-matrices, M-matrix classification and definiteness
//! checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Iteration cap of the nonsymmetric Perron solver.
pub const PERRON_MAX_ITER: usize = 10_000;
/// Convergence threshold on the 1-norm change of successive iterates.
pub const PERRON_VECTOR_TOL: f64 = 1e-13;

/// Perron root and the positive, 1-norm normalized Perron vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub root: f64,
    pub vector: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MClass {
    NotM,
    SingularM,
    NonsingularM,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixClass {
    pub is_z: bool,
    pub is_irreducible: bool,
    pub m_class: MClass,
    /// Smallest real eigenvalue, when the matrix is a Z-matrix.
    pub perron_root: Option<f64>,
}

/// Largest absolute row sum.
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Default M-matrix tolerance `1e-9 (1 + ‖A‖∞)`.
pub fn default_tolerance(a: &DMatrix<f64>) -> f64 {
    1e-9 * (1.0 + inf_norm(a))
}

/// Off-diagonal entries compared against exactly zero.
pub fn is_z_matrix(a: &DMatrix<f64>) -> bool {
    assert!(a.is_square(), "matrix must be square");
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] <= 0.0))
}

fn reachable(a: &DMatrix<f64>, start: usize, transpose: bool) -> Vec<bool> {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let entry = if transpose { a[(v, u)] } else { a[(u, v)] };
            if v != u && entry != 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Strong connectivity of the directed graph of nonzero off-diagonal entries.
pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    assert!(a.is_square(), "matrix must be square");
    if a.nrows() <= 1 {
        return true;
    }
    reachable(a, 0, false).into_iter().all(|x| x) && reachable(a, 0, true).into_iter().all(|x| x)
}

/// Strongly connected components of the off-diagonal pattern, each sorted,
/// ordered by smallest member.
pub fn strongly_connected_components(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut assigned = vec![false; n];
    let mut components = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let forward = reachable(a, i, false);
        let backward = reachable(a, i, true);
        let members: Vec<usize> = (0..n)
            .filter(|&j| !assigned[j] && forward[j] && backward[j])
            .collect();
        for &j in &members {
            assigned[j] = true;
        }
        components.push(members);
    }
    components
}

pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= rel_tol * scale))
}

fn normalized_positive(v: DVector<f64>) -> Option<DVector<f64>> {
    let v = if v.sum() < 0.0 { -v } else { v };
    if v.iter().all(|&x| x > 0.0) {
        let norm = v.sum();
        Some(v / norm)
    } else {
        None
    }
}

/// Perron root and vector of an irreducible Z-matrix.
///
/// Symmetric input goes through a full symmetric eigensolve. Otherwise the
/// root is found by power iteration on `(A - μI)⁻¹`, which is a positive
/// matrix whenever the shift `μ` lies below the Perron root. The shift is
/// refreshed each sweep from the Collatz-Wielandt lower bound
/// `min_i (Av)_i / v_i`, so it stays below the root while closing in on it.
pub fn perron(a: &DMatrix<f64>) -> Result<PerronData> {
    if !is_z_matrix(a) {
        return Err(Error::NotZMatrix);
    }
    if !is_irreducible(a) {
        return Err(Error::NotIrreducible);
    }
    let n = a.nrows();
    if n == 1 {
        return Ok(PerronData {
            root: a[(0, 0)],
            vector: DVector::from_element(1, 1.0),
        });
    }
    if is_symmetric(a, 0.0) {
        let eig = SymmetricEigen::new(a.clone());
        let k = eig.eigenvalues.imin();
        if let Some(vector) = normalized_positive(eig.eigenvectors.column(k).into_owned()) {
            return Ok(PerronData {
                root: eig.eigenvalues[k],
                vector,
            });
        }
    }
    perron_iterative(a)
}

fn collatz_wielandt(a: &DMatrix<f64>, v: &DVector<f64>) -> (f64, f64) {
    let av = a * v;
    av.iter()
        .zip(v.iter())
        .map(|(x, y)| x / y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
            (lo.min(q), hi.max(q))
        })
}

fn perron_iterative(a: &DMatrix<f64>) -> Result<PerronData> {
    let n = a.nrows();
    let scale = inf_norm(a).max(f64::MIN_POSITIVE);
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    // Gershgorin lower bound for the spectrum, strictly below the root.
    let gershgorin = (0..n)
        .map(|i| a[(i, i)] - (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut shift = gershgorin - 1e-3 * scale;

    for _ in 0..PERRON_MAX_ITER {
        let shifted = a - DMatrix::identity(n, n) * shift;
        let next = match shifted.lu().solve(&v) {
            Some(y) => y,
            None => break,
        };
        let next = match normalized_positive(next) {
            Some(y) => y,
            None => break,
        };
        let diff = (&next - &v).lp_norm(1);
        v = next;
        let (lo, hi) = collatz_wielandt(a, &v);
        if diff < PERRON_VECTOR_TOL || hi - lo <= 1e-15 * scale {
            let root = (a * &v).sum();
            return Ok(PerronData { root, vector: v });
        }
        let gap = (hi - lo).max(1e-14 * scale);
        shift = shift.max(lo - 1e-3 * gap);
    }

    // A singular shifted solve means the shift hit the root exactly.
    let (lo, hi) = collatz_wielandt(a, &v);
    if v.iter().all(|&x| x > 0.0) && hi - lo <= 1e-9 * scale {
        let root = (a * &v).sum();
        return Ok(PerronData { root, vector: v });
    }
    Err(Error::NoConvergence {
        iterations: PERRON_MAX_ITER,
    })
}

/// Smallest real eigenvalue of a Z-matrix, reducible or not. The spectrum
/// of a Z-matrix is the union of the spectra of its strongly connected
/// diagonal blocks, each of which is irreducible.
pub fn spectral_floor(a: &DMatrix<f64>) -> Result<f64> {
    if !is_z_matrix(a) {
        return Err(Error::NotZMatrix);
    }
    let mut floor = f64::INFINITY;
    for block in strongly_connected_components(a) {
        let sub = a.select_rows(&block).select_columns(&block);
        floor = floor.min(perron(&sub)?.root);
    }
    Ok(floor)
}

/// M-class of a Z-matrix from its Perron root.
pub fn m_class_from_root(root: f64, tol: f64) -> MClass {
    if root > tol {
        MClass::NonsingularM
    } else if root >= -tol {
        MClass::SingularM
    } else {
        MClass::NotM
    }
}

pub fn classify(a: &DMatrix<f64>, tol: f64) -> MatrixClass {
    assert!(a.is_square(), "matrix must be square");
    let is_z = is_z_matrix(a);
    let is_irreducible = is_irreducible(a);
    if !is_z {
        return MatrixClass {
            is_z,
            is_irreducible,
            m_class: MClass::NotApplicable,
            perron_root: None,
        };
    }
    let root = spectral_floor(a).unwrap_or_else(|_| {
        a.complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    });
    MatrixClass {
        is_z,
        is_irreducible,
        m_class: m_class_from_root(root, tol),
        perron_root: Some(root),
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

pub fn is_positive_definite(a: &DMatrix<f64>) -> Result<bool> {
    if !is_symmetric(a, SYMMETRY_TOL) {
        return Err(Error::NotSymmetric);
    }
    Ok(a.clone().cholesky().is_some())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    if !is_symmetric(a, SYMMETRY_TOL) {
        return Err(Error::NotSymmetric);
    }
    let sym = (a + a.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.min())
}

/// PSD when the smallest eigenvalue is at least `-tol ‖A‖∞`.
pub fn is_positive_semidefinite(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let lowest = min_eigenvalue(a)?;
    Ok(lowest >= -tol * inf_norm(a))
}
