use mixbound::mixing::MixingProfile;
use mixbound::norms::{self, b_r, mu_q, q_norm, QuantileCurve};
use mixbound::processes::{ProcessModel, TestFn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_curve(rng: &mut ChaCha8Rng) -> QuantileCurve {
    let k = rng.random_range(1..12);
    let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    QuantileCurve::from_discrete(&values, &probs).unwrap()
}

fn profiles() -> Vec<MixingProfile> {
    vec![
        MixingProfile::Iid,
        MixingProfile::m_dependent(3).unwrap(),
        MixingProfile::polynomial(0.5).unwrap(),
        MixingProfile::polynomial(2.0).unwrap(),
        MixingProfile::exponential(0.8).unwrap(),
    ]
}

#[test]
fn two_point_norm_matches_grid_integration() {
    // |f| in {0, 1}, P(|f| = 1) = p; mu = 1 on (0, 1/2] under independence.
    for p in [0.1, 0.3, 0.5, 0.8] {
        let curve = QuantileCurve::from_discrete(&[0.0, 1.0], &[1.0 - p, p]).unwrap();
        let exact = q_norm(&curve, 5, &MixingProfile::Iid);
        let m = 1_000_000;
        let riemann: f64 = (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) / m as f64;
                mu_q(u, 5, &MixingProfile::Iid).unwrap() as f64 * curve.eval(u).powi(2)
            })
            .sum::<f64>()
            / m as f64;
        assert!((exact - (2.0 * riemann).sqrt()).abs() < 1e-5, "p={p}");
        assert!((exact - (2.0 * p.min(0.5)).sqrt()).abs() < 1e-12, "p={p}");
    }
}

#[test]
fn variance_bound_for_moving_averages() {
    let f = TestFn::Linear { slope: 1.0, intercept: 0.0 };
    for memory in [1usize, 3, 6] {
        let model = ProcessModel::moving_average(memory);
        let profile = model.calibrated_profile();
        // |X| for X ~ N(0, 1): dense discrete approximation from below.
        let atoms = 20_000;
        let values: Vec<f64> = (1..=atoms)
            .map(|i| mixbound::stats::normal_quantile(1.0 - i as f64 / (2.0 * atoms as f64)).max(0.0))
            .collect();
        let curve = QuantileCurve::from_discrete(&values, &vec![1.0 / atoms as f64; atoms]).unwrap();
        for q in [2u64, 4, 8, 16] {
            let s2 = norms::analytic_sigma2(&f, q, &model).unwrap();
            let qn = q_norm(&curve, q, &profile);
            assert!(s2 * s2 <= 2.0 * qn * qn, "memory {memory} q {q}: {s2} vs {qn}");
        }
    }
}

#[test]
fn tail_truncation_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1536u64;
    for _ in 0..200 {
        let curve = random_curve(&mut rng);
        for p in profiles() {
            let sched = mixbound::grid::block_schedule(n, &p).unwrap();
            for (k, q) in sched.q_seq.iter().enumerate() {
                let norm = q_norm(&curve, *q, &p);
                let b = 2.0 * (n as f64).sqrt() * norm / 2f64.powi(k as i32 + 2).sqrt();
                let lhs = curve.tail_mean(b / *q as f64);
                let rhs = 2f64.sqrt() * norm * (2f64.powi(k as i32 + 1) / n as f64).sqrt();
                assert!(lhs <= rhs * (1.0 + 1e-12), "k={k} q={q}: {lhs} > {rhs}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn holder_step(seed in any::<u64>(), q in 0u64..2000, which in 0usize..5, r in 2.1f64..8.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve = random_curve(&mut rng);
        let p = &profiles()[which];
        let lhs = q_norm(&curve, q, p);
        let rhs = b_r(q, r, p).unwrap() * curve.lr_norm(r);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{} > {}", lhs, rhs);
    }

    #[test]
    fn q_norm_non_decreasing_in_q(seed in any::<u64>(), q in 0u64..1000, dq in 1u64..100, which in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve = random_curve(&mut rng);
        let p = &profiles()[which];
        prop_assert!(q_norm(&curve, q, p) <= q_norm(&curve, q + dq, p) * (1.0 + 1e-12));
    }

    #[test]
    fn mu_sandwich_off_ties(j in 1usize..1000, q in 0u64..500, which in 0usize..5) {
        let u = (j as f64 - 0.5) / 2000.0;
        let p = &profiles()[which];
        let mu = mu_q(u, q, p).unwrap();
        let inv = p.theta_inverse(2.0 * u).unwrap();
        prop_assert!(inv.min(q + 1) <= mu && mu <= (inv + 1).min(q + 1));
    }

    #[test]
    fn iid_q_norm_is_root_two_times_upper_half(seed in any::<u64>(), q in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve = random_curve(&mut rng);
        let upper: f64 = curve.segments().map(|(a, b, v)| (b.min(0.5) - a.min(0.5)).max(0.0) * v * v).sum();
        prop_assert!((q_norm(&curve, q, &MixingProfile::Iid) - (2.0 * upper).sqrt()).abs() < 1e-12);
    }
}
