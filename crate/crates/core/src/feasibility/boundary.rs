//! Ray casting against the feasible set and polyline scans of its boundary
//! for two-load grids.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DVector;
use rayon::prelude::*;

use super::continuation::{ContinuationConfig, Segment, SegmentEnd};
use super::{solve_operating_point, ContinuationTrace, FeasibilityVerdict};
use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::powerflow::{p_max, DemandVector};

/// Largest ray scale tried before giving up.
pub const RAY_CAP: f64 = 4_294_967_296.0;

/// Margin kept from the two asymptotic directions of the main sweep.
const SWEEP_MARGIN: f64 = 0.02;
const TAIL_GROWTH: f64 = 1.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RayCrossing {
    /// Scale `t*` with `anchor + t* d` on the boundary.
    pub theta_star: f64,
    pub boundary_demand: DemandVector,
    pub boundary_voltage: DVector<f64>,
    pub lambda: DVector<f64>,
    pub perron_root: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVertex {
    /// Polar angle of the boundary demand.
    pub alpha: f64,
    pub demand: DemandVector,
    pub voltage: DVector<f64>,
    pub lambda: DVector<f64>,
    pub perron_root: f64,
}

/// First boundary crossing of `{t d : t ≥ 0}`.
pub fn ray_boundary(model: &GridModel, direction: &DVector<f64>) -> Result<RayCrossing> {
    ray_boundary_from(model, &DemandVector::zeros(model.n()), direction)
}

/// First boundary crossing of `{a + t d : t ≥ 0}` for an interior anchor `a`.
pub fn ray_boundary_from(model: &GridModel, anchor: &DemandVector, direction: &DVector<f64>) -> Result<RayCrossing> {
    anchor.check_len(model.n())?;
    let d = DemandVector::new(direction.clone())?;
    d.check_len(model.n())?;
    if d.values().amax() == 0.0 {
        return Err(Error::ZeroDirection);
    }

    let start_voltage = if anchor.values().amax() == 0.0 {
        model.v_star().clone()
    } else {
        match solve_operating_point(model, anchor)?.verdict {
            FeasibilityVerdict::Interior { point, .. } => point.voltages,
            _ => return Err(Error::NotSemiStable),
        }
    };

    let a = anchor.values();
    let eps = 1e-6 * direction.lp_norm(1);
    let headroom = (p_max(model).demand.total() - a.sum()).max(eps);
    let mut t = headroom / direction.sum().max(eps);
    let mut t_prev = 0.0;
    let mut v = start_voltage;
    let cfg = ContinuationConfig::default();

    loop {
        let segment = Segment {
            model,
            start_voltage: v.clone(),
            start_demand: a + direction * t_prev,
            end_demand: a + direction * t,
        };
        let mut trace = ContinuationTrace::default();
        match segment.run(&cfg, &mut trace)? {
            SegmentEnd::Reached { voltage, .. } => {
                if t >= RAY_CAP {
                    return Err(Error::NoCrossingFound { cap: RAY_CAP });
                }
                v = voltage;
                t_prev = t;
                t = (2.0 * t).min(RAY_CAP);
            }
            SegmentEnd::Fold(fold) => {
                let t_star = t_prev + fold.theta * (t - t_prev);
                return Ok(RayCrossing {
                    theta_star: t_star,
                    boundary_demand: DemandVector::new(a + direction * t_star)?,
                    boundary_voltage: fold.voltage,
                    lambda: fold.lambda,
                    perron_root: fold.root,
                });
            }
        }
    }
}

fn vertex(c: RayCrossing) -> BoundaryVertex {
    let p = c.boundary_demand.values();
    BoundaryVertex {
        alpha: p[1].atan2(p[0]),
        demand: c.boundary_demand,
        voltage: c.boundary_voltage,
        lambda: c.lambda,
        perron_root: c.perron_root,
    }
}

/// Boundary polyline of a two-load grid, ordered by polar angle.
///
/// Rays from the origin cover angles in `[-π/4 + ε, 3π/4 - ε]`. With
/// `rays ≥ 8`, `rays / 8` extra rays per side start from anchors on the
/// negative axes, beyond the outermost main crossings, to follow the
/// unbounded tails.
pub fn boundary_scan(model: &GridModel, rays: usize) -> Result<Vec<BoundaryVertex>> {
    if model.n() != 2 {
        return Err(Error::NotTwoLoads { n: model.n() });
    }
    if rays == 0 {
        return Err(Error::InvalidRayCount);
    }
    let n_tail = rays / 8;
    let n_main = rays - 2 * n_tail;
    let lo = -FRAC_PI_4 + SWEEP_MARGIN;
    let hi = 3.0 * FRAC_PI_4 - SWEEP_MARGIN;
    let angles: Vec<f64> = if n_main == 1 {
        vec![FRAC_PI_4]
    } else {
        (0..n_main)
            .map(|i| lo + (hi - lo) * i as f64 / (n_main - 1) as f64)
            .collect()
    };

    let mut vertices = angles
        .par_iter()
        .map(|&alpha| {
            let dir = DVector::from_column_slice(&[alpha.cos(), alpha.sin()]);
            ray_boundary(model, &dir).map(vertex)
        })
        .collect::<Result<Vec<_>>>()?;

    if n_tail > 0 {
        let y_base = vertices.iter().map(|v| -v.demand.values()[1]).fold(0.0, f64::max);
        let x_base = vertices.iter().map(|v| -v.demand.values()[0]).fold(0.0, f64::max);
        let scale = p_max(model).demand.values().amax();
        let y_base = y_base.max(scale);
        let x_base = x_base.max(scale);
        let tails: Vec<(DVector<f64>, DVector<f64>)> = (1..=n_tail)
            .flat_map(|j| {
                let g = TAIL_GROWTH.powi(j as i32);
                [
                    (
                        DVector::from_column_slice(&[0.0, -y_base * g]),
                        DVector::from_column_slice(&[1.0, 0.0]),
                    ),
                    (
                        DVector::from_column_slice(&[-x_base * g, 0.0]),
                        DVector::from_column_slice(&[0.0, 1.0]),
                    ),
                ]
            })
            .collect();
        let extra = tails
            .par_iter()
            .map(|(anchor, dir)| {
                let anchor = DemandVector::new(anchor.clone())?;
                ray_boundary_from(model, &anchor, dir).map(vertex)
            })
            .collect::<Result<Vec<_>>>()?;
        vertices.extend(extra);
    }
    vertices.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(vertices)
}
