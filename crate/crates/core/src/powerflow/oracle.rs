//! Brute-force solution enumeration for desk-scale grids: damped Newton
//! from every node of a uniform start grid, then deduplication.

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_dim, demand_unchecked, jacobian, DemandVector};
use crate::error::{Error, Result};
use crate::grid::GridModel;

pub const ORACLE_MAX_LOADS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Start points per axis over `(0, 2 max V*]`.
    pub points_per_axis: usize,
    pub max_newton_iter: usize,
    /// Solutions closer than this (∞-norm) are merged.
    pub dedup_distance: f64,
    /// Required residual, relative to `1 + ‖P_c‖∞`.
    pub residual_tol: f64,
    /// Coordinates at or below this are non-physical.
    pub min_voltage: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            points_per_axis: 15,
            max_newton_iter: 100,
            dedup_distance: 1e-6,
            residual_tol: 1e-10,
            min_voltage: 1e-10,
        }
    }
}

fn newton(model: &GridModel, target: &DVector<f64>, start: DVector<f64>, cfg: &OracleConfig) -> Option<DVector<f64>> {
    let tol = cfg.residual_tol * (1.0 + target.amax());
    let mut x = start;
    let mut f = demand_unchecked(model, &x) - target;
    let mut norm = f.amax();
    for _ in 0..cfg.max_newton_iter {
        if norm <= tol {
            return Some(x);
        }
        let step = jacobian(model, &x).lu().solve(&(-&f))?;
        let mut t = 1.0;
        loop {
            let trial = &x + &step * t;
            let f_trial = demand_unchecked(model, &trial) - target;
            let trial_norm = f_trial.amax();
            if trial_norm < norm || t < 1e-4 {
                x = trial;
                f = f_trial;
                norm = trial_norm;
                break;
            }
            t *= 0.5;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    (norm <= tol).then_some(x)
}

/// All positive solutions found from the start grid, sorted by decreasing
/// `V_Lᵀ I*`. No completeness claim is made beyond the grid density.
pub fn enumerate_solutions(model: &GridModel, demand: &DemandVector, cfg: &OracleConfig) -> Result<Vec<DVector<f64>>> {
    let n = model.n();
    if n > ORACLE_MAX_LOADS {
        return Err(Error::OracleScaleExceeded {
            n,
            limit: ORACLE_MAX_LOADS,
        });
    }
    check_dim(model, demand.values())?;
    let k = cfg.points_per_axis.max(1);
    let upper = 2.0 * model.v_star().max();
    let total = k.pow(n as u32);
    let target = demand.values();

    let found: Vec<Option<DVector<f64>>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let start = DVector::from_fn(n, |_, _| {
                let digit = idx % k;
                idx /= k;
                upper * (digit + 1) as f64 / k as f64
            });
            newton(model, target, start, cfg)
                .filter(|x| x.iter().all(|&v| v > cfg.min_voltage))
        })
        .collect();

    let mut unique: Vec<DVector<f64>> = Vec::new();
    for x in found.into_iter().flatten() {
        if unique.iter().all(|u| (u - &x).amax() > cfg.dedup_distance) {
            unique.push(x);
        }
    }
    let i_star = model.i_star();
    unique.sort_by(|a, b| b.dot(i_star).total_cmp(&a.dot(i_star)));
    Ok(unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_model, GridSpec};
    use crate::powerflow::solve_single_load;

    fn example_one() -> GridModel {
        let mut spec = GridSpec::default();
        spec.load("1").source("2", 1.0).line("1", "2", 3.0);
        build_model(&spec).unwrap()
    }

    #[test]
    fn single_load_matches_analytic_branches() {
        let model = example_one();
        let demand = DemandVector::from_slice(&[0.5]).unwrap();
        let found = enumerate_solutions(&model, &demand, &OracleConfig::default()).unwrap();
        let analytic = solve_single_load(&model, 0.5).unwrap();
        assert_eq!(found.len(), 2);
        for (f, a) in found.iter().zip(&analytic) {
            assert!((f[0] - a).abs() < 1e-9);
        }
    }

    #[test]
    fn open_circuit_is_the_only_positive_zero_demand_solution() {
        let model = example_one();
        let found = enumerate_solutions(&model, &DemandVector::zeros(1), &OracleConfig::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert!((found[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_grids() {
        let mut spec = GridSpec::default();
        spec.source("s", 1.0);
        for i in 0..5 {
            spec.load(&format!("l{i}"));
            spec.line(&format!("l{i}"), "s", 1.0);
            if i > 0 {
                spec.line(&format!("l{i}"), &format!("l{}", i - 1), 1.0);
            }
        }
        let model = build_model(&spec).unwrap();
        assert_eq!(
            enumerate_solutions(&model, &DemandVector::zeros(5), &OracleConfig::default()),
            Err(Error::OracleScaleExceeded { n: 5, limit: 4 })
        );
    }
}
