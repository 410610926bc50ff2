use mixbound::chaining::{gamma_exact, FunctionClass, NormFamily, Seminorm};
use mixbound::processes::{self, mc_expected_sup, simulate, ProcessModel, TestClass, TestFn};
use mixbound::{rates, stats};
use proptest::prelude::*;

fn model(spec: &str) -> ProcessModel {
    ProcessModel::parse_spec(spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identical_inputs_give_bit_identical_paths(seed in any::<u64>(), which in 0usize..4, n in 1usize..300) {
        let m = model(["iid", "ar1:rho=0.8", "ma:m=3", "lazy_renewal:m=1.5"][which]);
        let a = simulate(&m, n, seed, 4).unwrap();
        let b = simulate(&m, n, seed, 4).unwrap();
        let bits = |p: &processes::PathBundle| p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(a.values().len(), n);
    }
}

#[test]
fn different_seeds_give_different_paths() {
    let m = model("ar1:rho=0.5");
    assert_ne!(simulate(&m, 50, 1, 0).unwrap().values(), simulate(&m, 50, 2, 0).unwrap().values());
}

#[test]
fn ar1_autocorrelation_matches_rho() {
    let path = simulate(&model("ar1:rho=0.6"), 200_000, 4, 0).unwrap();
    for k in 1..4 {
        let r = processes::autocorrelation(path.values(), k);
        assert!((r - 0.6f64.powi(k as i32)).abs() < 0.01, "lag {k}: {r}");
    }
}

#[test]
fn ma_is_uncorrelated_beyond_memory() {
    let path = simulate(&model("ma:m=3"), 200_000, 4, 0).unwrap();
    assert!((processes::autocorrelation(path.values(), 1) - 0.75).abs() < 0.01);
    assert!(processes::autocorrelation(path.values(), 4).abs() < 0.01);
}

/// `E sup |G_n|` for an i.i.d. sample does not grow with `n`.
#[test]
fn iid_expected_sup_is_flat_in_n() {
    let class = TestClass::builtin("lipschitz4").unwrap();
    let ns = [384usize, 1536, 6144];
    let est: Vec<f64> =
        ns.iter().map(|n| mc_expected_sup(&model("iid"), &class, *n, 4000, 21, 4).unwrap().0.value).collect();
    let x: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let y: Vec<f64> = est.iter().map(|e| e.ln()).collect();
    let slope = stats::ols_slope(&x, &y);
    assert!(slope.abs() <= 0.05, "slope {slope}, estimates {est:?}");
}

/// Class evaluated at `k` standard normal quantile points scaled to the marginal sd.
fn discretized(class: &TestClass, sd: f64, k: usize) -> FunctionClass {
    let points: Vec<f64> = (0..k).map(|i| sd * stats::normal_quantile((i as f64 + 0.5) / k as f64)).collect();
    FunctionClass::from_test_class(class, &points, &vec![1.0 / k as f64; k]).unwrap()
}

#[test]
fn expected_sup_below_maximal_bound() {
    let class = TestClass::builtin("lipschitz4").unwrap();
    let r = 4.0;
    for spec in ["ar1:rho=0.5", "ma:m=3", "iid"] {
        let m = model(spec);
        let profile = m.calibrated_profile();
        let fc = discretized(&class, m.gaussian_variance().unwrap().sqrt(), 400);
        let complexity = gamma_exact(&fc, &NormFamily::constant(Seminorm::Lr { r })).unwrap().value;
        for n in [384u64, 1536, 6144] {
            let (est, _) = mc_expected_sup(&m, &class, n as usize, 300, 5, 4).unwrap();
            let bound = rates::maximal_bound(complexity, n, r, &profile).unwrap();
            assert!(est.value <= bound, "{spec} n={n}: {} > {bound}", est.value);
        }
    }
}

#[test]
fn singleton_and_constant_classes_have_zero_sup() {
    for name in ["identity", "constant"] {
        let class = TestClass::builtin(name).unwrap();
        let (est, sups) = mc_expected_sup(&model("ar1:rho=0.5"), &class, 96, 30, 1, 1).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(sups.iter().all(|s| *s == 0.0));
    }
    let pm = TestClass::builtin("pm_identity").unwrap();
    assert!(mc_expected_sup(&model("iid"), &pm, 96, 30, 1, 1).unwrap().0.value > 0.0);
}

#[test]
fn class_json_round_trip_and_errors() {
    let c = TestClass::from_json(r#"{"members": [{"kind": "linear", "slope": 2, "intercept": 1}]}"#).unwrap();
    assert_eq!(c.members, vec![TestFn::Linear { slope: 2.0, intercept: 1.0 }]);
    assert!(TestClass::from_json(r#"{"members": []}"#).is_err());
    assert!(TestClass::from_spec("no_such_class").is_err());
    assert!(ProcessModel::parse_spec("ar1:rho=1.0").is_err());
    assert!(ProcessModel::parse_spec("ma:m=1.5").is_err());
}
