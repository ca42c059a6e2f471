//! Feasibility decisions, boundary tracing and infeasibility certificates.

mod boundary;
mod continuation;

pub use boundary::{boundary_scan, ray_boundary, ray_boundary_from, BoundaryVertex, RayCrossing, RAY_CAP};
pub use continuation::ContinuationConfig;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::powerflow::{check_dim, demand_unchecked, DemandVector, OperatingPoint};
use crate::specmat;
use crate::stability::{h_of, jacobian_perron, phi, StabilityClass};
use continuation::{FoldPoint, Segment, SegmentEnd};

/// A supporting half-space `{y : λᵀy ≤ s}` of the feasible set together
/// with its unique point of support.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceCertificate {
    pub lambda: DVector<f64>,
    pub s: f64,
    pub support: DemandVector,
}

impl HalfspaceCertificate {
    /// `λᵀ p - s`; positive means `p` lies outside the half-space.
    pub fn excess(&self, p: &DVector<f64>) -> f64 {
        self.lambda.dot(p) - self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmiVerdict {
    PositiveDefinite,
    PsdSingular,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiCertificate {
    pub nu: DVector<f64>,
    pub matrix: DMatrix<f64>,
    pub verdict: LmiVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub theta: f64,
    pub voltage: DVector<f64>,
    pub perron_root: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContinuationTrace {
    pub samples: Vec<TraceSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityVerdict {
    Interior {
        point: OperatingPoint,
        perron_root: f64,
    },
    Boundary {
        point: OperatingPoint,
        lambda: DVector<f64>,
    },
    Infeasible {
        theta_star: f64,
        boundary_demand: DemandVector,
        boundary_voltage: DVector<f64>,
        certificate: HalfspaceCertificate,
    },
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, Self::Infeasible { .. })
    }

    pub fn operating_point(&self) -> Option<&OperatingPoint> {
        match self {
            Self::Interior { point, .. } | Self::Boundary { point, .. } => Some(point),
            Self::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub verdict: FeasibilityVerdict,
    pub trace: ContinuationTrace,
}

pub fn solve_operating_point(model: &GridModel, target: &DemandVector) -> Result<Solution> {
    solve_operating_point_with(model, target, &ContinuationConfig::default())
}

/// Follows the stable branch from the open-circuit point along `θ·target`.
pub fn solve_operating_point_with(model: &GridModel, target: &DemandVector, cfg: &ContinuationConfig) -> Result<Solution> {
    target.check_len(model.n())?;
    let segment = Segment {
        model,
        start_voltage: model.v_star().clone(),
        start_demand: DVector::zeros(model.n()),
        end_demand: target.values().clone(),
    };
    let mut trace = ContinuationTrace::default();
    let end = segment.run(cfg, &mut trace)?;
    let verdict = match end {
        SegmentEnd::Reached { voltage, root } => FeasibilityVerdict::Interior {
            point: OperatingPoint {
                voltages: voltage,
                demand: target.clone(),
                stability: StabilityClass::Stable,
            },
            perron_root: root,
        },
        SegmentEnd::Fold(fold) if fold.theta >= 1.0 - cfg.boundary_tol => FeasibilityVerdict::Boundary {
            point: OperatingPoint {
                voltages: fold.voltage,
                demand: target.clone(),
                stability: StabilityClass::SemiStableBoundary,
            },
            lambda: fold.lambda,
        },
        SegmentEnd::Fold(fold) => infeasible(model, target.values(), fold)?,
    };
    Ok(Solution { verdict, trace })
}

fn infeasible(model: &GridModel, target: &DVector<f64>, fold: FoldPoint) -> Result<FeasibilityVerdict> {
    let certificate = certificate_at(model, &fold.lambda, &fold.voltage)?;
    Ok(FeasibilityVerdict::Infeasible {
        theta_star: fold.theta,
        boundary_demand: DemandVector::new(target * fold.theta)?,
        boundary_voltage: fold.voltage,
        certificate,
    })
}

/// Half-space through a boundary point `v` with normal `λ`. Uses `φ(λ)`
/// when `h(λ)` is positive definite and the boundary point itself
/// otherwise (a direction with zero entries on a reducible grid).
pub(crate) fn certificate_at(model: &GridModel, lambda: &DVector<f64>, v: &DVector<f64>) -> Result<HalfspaceCertificate> {
    match halfspace_value(model, lambda) {
        Ok(cert) => Ok(cert),
        Err(Error::LambdaNotInLambda) => {
            let support = DemandVector::new(demand_unchecked(model, v))?;
            Ok(HalfspaceCertificate {
                lambda: lambda.clone(),
                s: lambda.dot(support.values()),
                support,
            })
        }
        Err(e) => Err(e),
    }
}

/// `s = φ(λ)ᵀ h(λ) φ(λ)` and the point of support `P_c(φ(λ))`.
pub fn halfspace_value(model: &GridModel, lambda: &DVector<f64>) -> Result<HalfspaceCertificate> {
    let x = phi(model, lambda)?;
    let s = x.dot(&(h_of(model, lambda) * &x));
    Ok(HalfspaceCertificate {
        lambda: lambda.clone(),
        s,
        support: DemandVector::new(demand_unchecked(model, &x))?,
    })
}

/// The block matrix `[[2h(ν), [ν]I*], [([ν]I*)ᵀ, 2νᵀP]]`.
pub fn assemble_lmi(model: &GridModel, nu: &DVector<f64>, target: &DemandVector) -> Result<LmiCertificate> {
    check_dim(model, nu)?;
    target.check_len(model.n())?;
    if nu.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::NonPositiveNu);
    }
    let n = model.n();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&(h_of(model, nu) * 2.0));
    let coupling = nu.component_mul(model.i_star());
    for i in 0..n {
        m[(i, n)] = coupling[i];
        m[(n, i)] = coupling[i];
    }
    m[(n, n)] = 2.0 * nu.dot(target.values());
    let verdict = lmi_verdict(&m);
    Ok(LmiCertificate {
        nu: nu.clone(),
        matrix: m,
        verdict,
    })
}

/// Definiteness of a symmetric matrix at tolerance `1e-9 (1 + ‖M‖∞)`.
pub fn lmi_verdict(m: &DMatrix<f64>) -> LmiVerdict {
    let tol = specmat::default_tolerance(m);
    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min > tol {
        LmiVerdict::PositiveDefinite
    } else if min >= -tol {
        LmiVerdict::PsdSingular
    } else {
        LmiVerdict::Indefinite
    }
}

/// LMI evidence that `target` is not an interior demand, or `None` when the
/// continuation reaches it at a stable point.
pub fn certify_infeasible(model: &GridModel, target: &DemandVector) -> Result<Option<LmiCertificate>> {
    let solution = solve_operating_point(model, target)?;
    certify_from_verdict(model, target, &solution.verdict)
}

pub fn certify_from_verdict(model: &GridModel, target: &DemandVector, verdict: &FeasibilityVerdict) -> Result<Option<LmiCertificate>> {
    let lambda = match verdict {
        FeasibilityVerdict::Interior { .. } => return Ok(None),
        FeasibilityVerdict::Boundary { lambda, .. } => lambda,
        FeasibilityVerdict::Infeasible { certificate, .. } => &certificate.lambda,
    };
    // Zero entries are possible on reducible grids; the LMI needs ν > 0.
    let floor = 1e-12 * lambda.amax();
    let nu = lambda.map(|x| x.max(floor));
    assemble_lmi(model, &nu, target).map(Some)
}

/// Perron vector of `-Jᵀ` at a boundary voltage, as a supporting normal.
pub fn supporting_direction(model: &GridModel, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(jacobian_perron(model, v)?.vector)
}
