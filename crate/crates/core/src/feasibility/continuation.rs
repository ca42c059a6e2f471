//! Predictor-corrector continuation along a straight demand segment
//! `P(θ) = P₀ + θ (P₁ - P₀)`, starting from a stable operating point of `P₀`.
//!
//! The predictor integrates `γ' = J(γ)⁻¹ (P₁ - P₀)` with classical RK4 over
//! one step; the corrector runs Newton on the algebraic condition
//! `P_c(γ) = P(θ)`. The Perron root of `-Jᵀ` is monitored at every accepted
//! point and must stay positive. Step failures halve the step, which
//! bisects the bracket towards the fold; from each newly accepted point a
//! Newton solve on the fold system
//!
//! ```text
//! P_c(x) - P₀ - θ d = 0,   J(x)ᵀ w = 0,   1ᵀ w = 1
//! ```
//!
//! pins the crossing of the segment with the boundary.

use nalgebra::{DMatrix, DVector};

use super::{ContinuationTrace, TraceSample};
use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::powerflow::{demand_unchecked, jacobian};
use crate::stability::{class_from_root, h_of, jacobian_perron, point_tolerance, StabilityClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationConfig {
    pub initial_step: f64,
    /// Step floor; falling below it is reported as a stall.
    pub min_step: f64,
    pub max_step: f64,
    /// Corrector residual, relative to `1 + ‖P(θ)‖∞`.
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
    /// Crossings within this distance of `θ = 1` count as boundary hits.
    pub boundary_tol: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            initial_step: 1e-2,
            min_step: 1e-12,
            max_step: 0.1,
            corrector_tol: 1e-10,
            corrector_max_iter: 12,
            boundary_tol: 1e-9,
        }
    }
}

/// Where a segment run ended.
#[derive(Debug, Clone)]
pub(crate) enum SegmentEnd {
    /// `θ = 1` reached at a stable point.
    Reached { voltage: DVector<f64>, root: f64 },
    /// The segment leaves the feasible set at `theta` (possibly `≈ 1`).
    Fold(FoldPoint),
}

#[derive(Debug, Clone)]
pub(crate) struct FoldPoint {
    pub theta: f64,
    pub voltage: DVector<f64>,
    /// Nonnegative left null vector of `J`, unit 1-norm.
    pub lambda: DVector<f64>,
    pub root: f64,
}

pub(crate) struct Segment<'a> {
    pub model: &'a GridModel,
    pub start_voltage: DVector<f64>,
    pub start_demand: DVector<f64>,
    pub end_demand: DVector<f64>,
}

impl Segment<'_> {
    fn direction(&self) -> DVector<f64> {
        &self.end_demand - &self.start_demand
    }

    fn demand_at(&self, theta: f64) -> DVector<f64> {
        &self.start_demand + self.direction() * theta
    }

    fn residual_tol(&self, cfg: &ContinuationConfig, theta: f64) -> f64 {
        cfg.corrector_tol * (1.0 + self.demand_at(theta).amax()) + 1e-14 * self.model.power_scale()
    }

    fn tangent(&self, x: &DVector<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
        if x.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        jacobian(self.model, x).lu().solve(d)
    }

    fn predict(&self, x: &DVector<f64>, step: f64) -> Option<DVector<f64>> {
        let d = self.direction();
        let k1 = self.tangent(x, &d)?;
        let k2 = self.tangent(&(x + &k1 * (0.5 * step)), &d)?;
        let k3 = self.tangent(&(x + &k2 * (0.5 * step)), &d)?;
        let k4 = self.tangent(&(x + &k3 * step), &d)?;
        Some(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0))
    }

    /// Newton on `P_c(x) = P(θ)`. Returns the point and the iteration count.
    fn correct(&self, cfg: &ContinuationConfig, guess: DVector<f64>, theta: f64) -> Option<(DVector<f64>, usize)> {
        let target = self.demand_at(theta);
        let tol = self.residual_tol(cfg, theta);
        let mut x = guess;
        for iter in 0..=cfg.corrector_max_iter {
            let f = demand_unchecked(self.model, &x) - &target;
            if !f.iter().all(|v| v.is_finite()) {
                return None;
            }
            if f.amax() <= tol {
                return Some((x, iter));
            }
            if iter == cfg.corrector_max_iter {
                break;
            }
            let step = jacobian(self.model, &x).lu().solve(&f)?;
            x -= step;
        }
        None
    }

    /// Newton on the fold system from `(x, θ, w)`.
    fn polish_fold(&self, cfg: &ContinuationConfig, x0: &DVector<f64>, theta0: f64, w0: &DVector<f64>) -> Option<FoldPoint> {
        let model = self.model;
        let n = model.n();
        let d = self.direction();
        let residual = |x: &DVector<f64>, theta: f64, w: &DVector<f64>| {
            let f1 = demand_unchecked(model, x) - self.demand_at(theta);
            let f2 = jacobian(model, x).transpose() * w;
            let f3 = w.sum() - 1.0;
            let mut f = DVector::zeros(2 * n + 1);
            f.rows_mut(0, n).copy_from(&f1);
            f.rows_mut(n, n).copy_from(&f2);
            f[2 * n] = f3;
            f
        };
        let jscale = model.jacobian_scale().max(f64::MIN_POSITIVE);
        let weights = |f: &DVector<f64>, theta: f64| {
            let p_tol = self.residual_tol(cfg, theta) * 1e-2;
            let a = f.rows(0, n).amax() / p_tol;
            let b = f.rows(n, n).amax() / (1e-12 * jscale);
            let c = f[2 * n].abs() / 1e-12;
            a.max(b).max(c)
        };

        let mut x = x0.clone();
        let mut theta = theta0;
        let mut w = w0.clone();
        let mut f = residual(&x, theta, &w);
        let mut merit = f.norm();
        let mut converged = false;
        for _ in 0..60 {
            if weights(&f, theta) <= 1.0 {
                converged = true;
                break;
            }
            let j = jacobian(model, &x);
            let mut big = DMatrix::zeros(2 * n + 1, 2 * n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&j);
            big.view_mut((0, n), (n, 1)).copy_from(&(-&d));
            big.view_mut((n, 0), (n, n)).copy_from(&(h_of(model, &w) * -2.0));
            big.view_mut((n, n + 1), (n, n)).copy_from(&j.transpose());
            for k in 0..n {
                big[(2 * n, n + 1 + k)] = 1.0;
            }
            let delta = big.lu().solve(&(-&f))?;
            let mut t = 1.0;
            loop {
                let xt = &x + delta.rows(0, n) * t;
                let tt = theta + delta[n] * t;
                let wt = &w + delta.rows(n + 1, n) * t;
                let ft = residual(&xt, tt, &wt);
                let mt = ft.norm();
                if mt.is_finite() && (mt < merit || t < 1e-3) {
                    x = xt;
                    theta = tt;
                    w = wt;
                    f = ft;
                    merit = mt;
                    break;
                }
                t *= 0.5;
            }
            if !merit.is_finite() {
                return None;
            }
        }
        if !converged && weights(&f, theta) > 1.0 {
            return None;
        }
        if x.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let positive_tol = 1e-9;
        if w.iter().any(|&v| v < -positive_tol) {
            return None;
        }
        if model.loads_irreducible() && w.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let perron = jacobian_perron(model, &x).ok()?;
        if class_from_root(perron.root, point_tolerance(model, &x)) != StabilityClass::SemiStableBoundary {
            return None;
        }
        let w = w.map(|v| v.max(0.0));
        let norm = w.sum();
        Some(FoldPoint {
            theta,
            voltage: x,
            lambda: w / norm,
            root: perron.root,
        })
    }

    /// Runs the continuation. `trace` receives every accepted sample,
    /// starting with `θ = 0`.
    pub fn run(&self, cfg: &ContinuationConfig, trace: &mut ContinuationTrace) -> Result<SegmentEnd> {
        let model = self.model;
        let mut x = self.start_voltage.clone();
        let mut theta = 0.0;
        let mut root = jacobian_perron(model, &x)?.root;
        trace.samples.push(TraceSample {
            theta,
            voltage: x.clone(),
            perron_root: root,
        });
        if self.direction().amax() == 0.0 {
            return Ok(SegmentEnd::Reached { voltage: x, root });
        }

        let mut step = cfg.initial_step;
        let mut fold_beyond_end = false;
        let mut polished_at: Option<usize> = None;

        let try_polish = |x: &DVector<f64>, theta: f64| -> Option<FoldPoint> {
            let lambda = jacobian_perron(model, x).ok()?.vector;
            self.polish_fold(cfg, x, theta, &lambda)
        };

        while theta < 1.0 {
            let remaining = 1.0 - theta;
            let h = step.min(remaining);
            let next_theta = if remaining - h <= 1e-15 { 1.0 } else { theta + h };

            let accepted = self
                .predict(&x, next_theta - theta)
                .and_then(|guess| self.correct(cfg, guess, next_theta))
                .and_then(|(candidate, iters)| {
                    if candidate.iter().any(|&v| !(v > 0.0)) {
                        return None;
                    }
                    let r = jacobian_perron(model, &candidate).ok()?.root;
                    (r > 0.0).then_some((candidate, r, iters))
                });

            match accepted {
                Some((candidate, r, iters)) => {
                    theta = next_theta;
                    x = candidate;
                    root = r;
                    trace.samples.push(TraceSample {
                        theta,
                        voltage: x.clone(),
                        perron_root: root,
                    });
                    if iters <= 3 {
                        step = (step * 2.0).min(cfg.max_step);
                    }
                }
                None => {
                    let sample = trace.samples.len() - 1;
                    if !fold_beyond_end && polished_at != Some(sample) {
                        polished_at = Some(sample);
                        if let Some(fold) = try_polish(&x, theta) {
                            if fold.theta > theta - cfg.boundary_tol {
                                if fold.theta <= 1.0 + cfg.boundary_tol {
                                    self.push_fold(trace, &fold);
                                    return Ok(SegmentEnd::Fold(fold));
                                }
                                fold_beyond_end = true;
                            }
                        }
                    }
                    step *= 0.5;
                    if step < cfg.min_step {
                        return Err(Error::StepSizeUnderflow { theta });
                    }
                }
            }
        }

        let tol = point_tolerance(model, &x);
        match class_from_root(root, tol) {
            StabilityClass::Stable => {
                // A small root at the end may still sit within the boundary
                // tolerance of the fold.
                if !fold_beyond_end && root < 1e-3 * model.jacobian_scale() {
                    if let Some(fold) = try_polish(&x, theta) {
                        if (fold.theta - 1.0).abs() <= cfg.boundary_tol {
                            return Ok(SegmentEnd::Fold(fold));
                        }
                    }
                }
                Ok(SegmentEnd::Reached { voltage: x, root })
            }
            _ => {
                let lambda = jacobian_perron(model, &x)?.vector;
                Ok(SegmentEnd::Fold(FoldPoint {
                    theta: 1.0,
                    voltage: x,
                    lambda,
                    root,
                }))
            }
        }
    }

    fn push_fold(&self, trace: &mut ContinuationTrace, fold: &FoldPoint) {
        let last = trace.samples.last().map_or(0.0, |s| s.theta);
        let theta = fold.theta.min(1.0);
        if theta > last {
            trace.samples.push(TraceSample {
                theta,
                voltage: fold.voltage.clone(),
                perron_root: fold.root,
            });
        }
    }
}
