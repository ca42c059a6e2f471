mod common;

use gridfeas::powerflow::{
    demand_of_with, enumerate_solutions, jacobian, p_max, DemandVector, OracleConfig, VoltageMode,
};
use gridfeas::specmat::{is_irreducible, is_z_matrix};
use gridfeas::synth::{random_model, SynthConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn unrestricted(model: &gridfeas::GridModel, x: &DVector<f64>) -> DVector<f64> {
    demand_of_with(model, x, VoltageMode::Unrestricted).unwrap().into_inner()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn quadratic_taylor_identity(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let model = gridfeas::synth::random_small_model(6, 3, &mut rng);
        let n = model.n();
        let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..3.0));
        let z = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let lhs = unrestricted(&model, &(&x + &z));
        let quad = z.component_mul(&(model.y_ll() * &z));
        let rhs = unrestricted(&model, &x) + jacobian(&model, &x) * &z - quad;
        let scale = 1.0 + lhs.amax().max(rhs.amax());
        prop_assert!((lhs - rhs).amax() <= 1e-10 * scale);
    }

    #[test]
    fn negated_jacobian_structure_tracks_positivity(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let model = random_model(&SynthConfig::new(rng.random_range(2..=6), 2), &mut rng);
        let n = model.n();
        let mut x = DVector::from_fn(n, |_, _| rng.random_range(0.01..2.0));
        let neg = -jacobian(&model, &x);
        prop_assert!(is_z_matrix(&neg) && is_irreducible(&neg));
        let k = rng.random_range(0..n);
        x[k] = if rng.random::<bool>() { 0.0 } else { -rng.random_range(0.01..1.0) };
        let neg = -jacobian(&model, &x);
        prop_assert!(!(is_z_matrix(&neg) && is_irreducible(&neg)));
    }

    #[test]
    fn distinct_voltages_have_distinct_jacobians(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let model = gridfeas::synth::random_small_model(6, 3, &mut rng);
        let n = model.n();
        let x = DVector::from_fn(n, |_, _| rng.random_range(0.01..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(0.01..2.0));
        prop_assume!((&x - &y).amax() > 1e-6);
        let gap: DMatrix<f64> = jacobian(&model, &x) - jacobian(&model, &y);
        prop_assert!(gap.amax() > 0.0);
    }
}

#[test]
fn oracle_solutions_respect_total_demand_bound() {
    let mut rng = common::rng(77);
    for _ in 0..30 {
        let model = gridfeas::synth::random_small_model(2, 2, &mut rng);
        let pm = p_max(&model).demand.total();
        let p = DemandVector::new(DVector::from_fn(model.n(), |_, _| rng.random_range(-0.5..0.6) * pm)).unwrap();
        let found = enumerate_solutions(&model, &p, &OracleConfig::default()).unwrap();
        for v in &found {
            assert!(unrestricted(&model, v).sum() <= pm * (1.0 + 1e-9));
        }
    }
}
