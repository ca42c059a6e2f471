//! The power-flow map `P_c(V_L) = [V_L] Y_LL (V* - V_L)`, its Jacobian and
//! the closed-form quantities built on it.

mod oracle;

pub use oracle::{enumerate_solutions, OracleConfig, ORACLE_MAX_LOADS};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::stability::StabilityClass;

/// Constant power demands at the loads (watts). Any sign is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector(DVector<f64>);

impl DemandVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().all(|x| x.is_finite()) {
            Ok(Self(values))
        } else {
            Err(Error::NonFiniteDemand)
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                found: self.len(),
            })
        }
    }
}

/// A positive voltage vector satisfying the power-flow equation for `demand`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub voltages: DVector<f64>,
    pub demand: DemandVector,
    pub stability: StabilityClass,
}

impl OperatingPoint {
    /// `‖[V]Y_LL(V - V*) + P_c‖∞`.
    pub fn residual(&self, model: &GridModel) -> f64 {
        (demand_unchecked(model, &self.voltages) - self.demand.values()).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoltageMode {
    /// Reject vectors with a nonpositive entry.
    #[default]
    Strict,
    /// Evaluate the quadratic map on all of Rⁿ.
    Unrestricted,
}

pub(crate) fn check_dim(model: &GridModel, v: &DVector<f64>) -> Result<()> {
    if v.len() == model.n() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: model.n(),
            found: v.len(),
        })
    }
}

pub(crate) fn check_positive(v: &DVector<f64>) -> Result<()> {
    match v.iter().position(|&x| !(x > 0.0)) {
        Some(index) => Err(Error::NonPositiveVoltage { index }),
        None => Ok(()),
    }
}

/// The demand satisfied by `v`, without any checks.
pub fn demand_unchecked(model: &GridModel, v: &DVector<f64>) -> DVector<f64> {
    let drop = model.y_ll() * (model.v_star() - v);
    v.component_mul(&drop)
}

/// Demand served by the positive voltage vector `v`.
pub fn demand_of(model: &GridModel, v: &DVector<f64>) -> Result<DemandVector> {
    demand_of_with(model, v, VoltageMode::Strict)
}

pub fn demand_of_with(model: &GridModel, v: &DVector<f64>, mode: VoltageMode) -> Result<DemandVector> {
    check_dim(model, v)?;
    if mode == VoltageMode::Strict {
        check_positive(v)?;
    }
    DemandVector::new(demand_unchecked(model, v))
}

/// Power injected at the loads, `P_L = -P_c`.
pub fn eval_injection(model: &GridModel, v: &DVector<f64>) -> DVector<f64> {
    -demand_unchecked(model, v)
}

/// `∂P_c/∂V_L = [Y_LL (V* - V)] - [V] Y_LL`.
pub fn jacobian(model: &GridModel, v: &DVector<f64>) -> DMatrix<f64> {
    let drop = model.y_ll() * (model.v_star() - v);
    let mut j = -DMatrix::from_diagonal(v) * model.y_ll();
    for i in 0..v.len() {
        j[(i, i)] += drop[i];
    }
    j
}

/// The maximizing feasible demand and its unique operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct PMax {
    pub demand: DemandVector,
    pub voltage: DVector<f64>,
}

/// `P_max = ¼ [V*] I*`, attained only at `½ V*`.
pub fn p_max(model: &GridModel) -> PMax {
    let demand = model.v_star().component_mul(model.i_star()) * 0.25;
    PMax {
        demand: DemandVector(demand),
        voltage: model.v_star() * 0.5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `VᵀYV` over all nodes.
    pub full: f64,
    /// `-1ᵀP_c + V_SᵀY_SS V_S - V_Lᵀ I*`, available when a demand is given.
    pub reduced: Option<f64>,
}

/// Total line losses at `v`. The reduced form only equals the full form
/// when `v` is an operating point of `demand`.
pub fn dissipation(model: &GridModel, v: &DVector<f64>, demand: Option<&DemandVector>) -> Result<Dissipation> {
    check_dim(model, v)?;
    check_positive(v)?;
    let full_v = DVector::from_iterator(
        model.n() + model.m(),
        v.iter().chain(model.v_s().iter()).copied(),
    );
    let full = full_v.dot(&(model.y() * &full_v));
    let reduced = match demand {
        Some(p) => {
            p.check_len(model.n())?;
            let vs = model.v_s();
            Some(-p.total() + vs.dot(&(model.y_ss() * vs)) - v.dot(model.i_star()))
        }
        None => None,
    };
    Ok(Dissipation { full, reduced })
}

/// Both roots `½V* ± sqrt(Y⁻¹(¼ Y V*² - P))` of the scalar equation, keeping
/// the positive ones, highest first. Empty when the discriminant is negative.
pub fn solve_single_load(model: &GridModel, demand: f64) -> Result<Vec<f64>> {
    if model.n() != 1 {
        return Err(Error::NotSingleLoad { n: model.n() });
    }
    let y = model.y_ll()[(0, 0)];
    let v_star = model.v_star()[0];
    let peak = 0.25 * y * v_star * v_star;
    // a discriminant within rounding of zero is a double root
    if (peak - demand).abs() <= 8.0 * f64::EPSILON * peak.max(demand.abs()) {
        return Ok(vec![0.5 * v_star]);
    }
    let disc = (peak - demand) / y;
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    let root = disc.sqrt();
    Ok([0.5 * v_star + root, 0.5 * v_star - root]
        .into_iter()
        .filter(|&v| v > 0.0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_model, GridSpec};

    pub(crate) fn example_one() -> GridModel {
        let mut spec = GridSpec::default();
        spec.load("1").source("2", 1.0).line("1", "2", 3.0);
        build_model(&spec).unwrap()
    }

    fn example_two() -> GridModel {
        let mut spec = GridSpec::default();
        spec.load("1").load("2").source("3", 1.0);
        spec.line("1", "3", 3.0).line("2", "3", 2.0).line("1", "2", 2.0);
        build_model(&spec).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn demand_examples() {
        let one = example_one();
        assert!((demand_of(&one, &v(&[0.5])).unwrap().values()[0] - 0.75).abs() < 1e-15);
        assert!(demand_of(&one, &v(&[1.0])).unwrap().values()[0].abs() < 1e-15);
        let two = example_two();
        let p = demand_of(&two, &v(&[0.5, 0.5])).unwrap();
        assert!((p.values() - v(&[0.75, 0.5])).amax() < 1e-15);
    }

    #[test]
    fn strict_mode_rejects_nonpositive() {
        let one = example_one();
        assert_eq!(
            demand_of(&one, &v(&[0.0])),
            Err(Error::NonPositiveVoltage { index: 0 })
        );
        let p = demand_of_with(&one, &v(&[-1.0]), VoltageMode::Unrestricted).unwrap();
        assert_eq!(p.values()[0], -6.0);
    }

    #[test]
    fn injection_is_negated_demand() {
        let one = example_one();
        assert!((eval_injection(&one, &v(&[0.5]))[0] + 0.75).abs() < 1e-15);
        assert!(eval_injection(&one, &v(&[1.0]))[0].abs() < 1e-15);
    }

    #[test]
    fn jacobian_examples() {
        let one = example_one();
        assert!(jacobian(&one, &v(&[0.5]))[(0, 0)].abs() < 1e-15);
        assert!((jacobian(&one, &v(&[1.0]))[(0, 0)] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn p_max_examples() {
        let one = p_max(&example_one());
        assert!((one.demand.values()[0] - 0.75).abs() < 1e-15);
        assert!((one.voltage[0] - 0.5).abs() < 1e-15);
        let two = p_max(&example_two());
        assert!((two.demand.values() - v(&[0.75, 0.5])).amax() < 1e-14);
    }

    #[test]
    fn dissipation_examples() {
        let one = example_one();
        assert_eq!(dissipation(&one, &v(&[1.0]), None).unwrap().full, 0.0);
        // V = (0.5, 1): VᵀYV = 3 (0.5 - 1)^2
        let d = dissipation(&one, &v(&[0.5]), Some(&DemandVector::from_slice(&[0.75]).unwrap()))
            .unwrap();
        assert!((d.full - 0.75).abs() < 1e-15);
        assert!((d.reduced.unwrap() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn single_load_branches() {
        let one = example_one();
        let r = solve_single_load(&one, 0.5).unwrap();
        let d = (1.0f64 / 12.0).sqrt();
        assert_eq!(r.len(), 2);
        assert!((r[0] - (0.5 + d)).abs() < 1e-15 && (r[1] - (0.5 - d)).abs() < 1e-15);
        let double = solve_single_load(&one, 0.75).unwrap();
        assert_eq!(double.len(), 1);
        assert!((double[0] - 0.5).abs() < 1e-15);
        assert!(solve_single_load(&one, 1.0).unwrap().is_empty());
        // negative demand: the lower root is negative and dropped
        assert_eq!(solve_single_load(&one, -2.0).unwrap().len(), 1);
        assert_eq!(
            solve_single_load(&example_two(), 0.1),
            Err(Error::NotSingleLoad { n: 2 })
        );
    }

    #[test]
    fn demand_rejects_nan() {
        assert_eq!(
            DemandVector::from_slice(&[f64::NAN]),
            Err(Error::NonFiniteDemand)
        );
    }
}
