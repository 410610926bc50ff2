use mixbound::mixing::MixingProfile;
use mixbound::rates::{self, maximal_bound, rate_sweep, regime_classify, Regime};
use mixbound::stats;
use proptest::prelude::*;

fn poly(m: f64) -> MixingProfile {
    MixingProfile::polynomial(m).unwrap()
}

fn sweep(m: f64, r: f64) -> Vec<rates::RateRow> {
    rate_sweep(1000, 10_000_000, r, &poly(m)).unwrap()
}

#[test]
fn effective_sample_size_diverges() {
    for (m, r) in [(0.5, 4.0), (2.0, 4.0), (3.0, 4.0), (1.5, 6.0), (0.3, 3.0)] {
        let rows = sweep(m, r);
        let e: Vec<f64> = rows.iter().map(|x| x.effective_n).collect();
        let early = e[..e.len() / 4].iter().copied().fold(0.0, f64::max);
        let late = e[e.len() / 2..].iter().copied().fold(f64::INFINITY, f64::min);
        assert!(late > early, "m={m} r={r}: {late} <= {early}");
        let x: Vec<f64> = rows.iter().map(|x| (x.n as f64).ln()).collect();
        let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
        assert!(stats::ols_slope(&x, &y) > 0.2, "m={m} r={r}");
    }
}

#[test]
fn critical_rate_is_log_power() {
    // m = r/(r-2): frak_n / (log n)^{1/m} stays within fixed positive bounds.
    for (m, r) in [(2.0, 4.0), (1.5, 6.0)] {
        assert_eq!(regime_classify(m, r).unwrap().regime, Regime::Critical);
        let ratio: Vec<f64> = sweep(m, r).iter().map(|x| x.frak_n / (x.n as f64).ln().powf(1.0 / m)).collect();
        let (lo, hi) = ratio.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(lo > 0.5 && hi < 2.0 && hi / lo < 1.5, "m={m} r={r}: [{lo}, {hi}]");
    }
}

#[test]
fn maximal_bound_scaling() {
    assert_eq!(maximal_bound(0.0, 1536, 4.0, &poly(0.5)).unwrap(), 0.0);
    let iid: Vec<f64> = [96u64, 1536, 98304].iter().map(|n| maximal_bound(2.0, *n, 4.0, &MixingProfile::Iid).unwrap()).collect();
    assert!(iid.windows(2).all(|w| w[0] == w[1]));
    let l = rates::universal_constants().l;
    assert!((iid[0] - (2.0 * 0.5f64.powf(0.5)).sqrt() * l * 2.0).abs() < 1e-9 * iid[0]);
    // Slow regime: the bound grows like n^{exponent / 2}.
    for (m, r) in [(0.5, 4.0), (0.3, 3.0)] {
        let exponent = regime_classify(m, r).unwrap().exponent;
        let rows = sweep(m, r);
        let x: Vec<f64> = rows.iter().map(|x| (x.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|x| maximal_bound(1.0, x.n, r, &poly(m)).unwrap().ln()).collect();
        let slope = stats::ols_slope(&x, &y);
        assert!((slope - exponent / 2.0).abs() < 0.025, "m={m} r={r}: slope {slope}");
    }
}

#[test]
fn sweep_rows_are_consistent() {
    let rows = rate_sweep(1000, 100_000, 4.0, &poly(0.5)).unwrap();
    assert!(!rows.is_empty());
    for row in &rows {
        assert!(row.n >= 1000 && row.n <= 100_000);
        assert_eq!(row.regime, Regime::Slow);
        assert_eq!(row.n % row.q_n0, 0);
        assert!((row.frak_n - row.b_r * row.b_r).abs() <= 1e-12 * row.frak_n);
        assert!((row.effective_n - row.n as f64 / row.frak_n).abs() <= 1e-9 * row.effective_n);
        assert_eq!(row.frak_n, rates::frak_n(row.n, 4.0, &poly(0.5)).unwrap());
    }
}

proptest! {
    #[test]
    fn regime_partition(m in 0.05f64..6.0, r in 2.1f64..10.0) {
        let c = regime_classify(m, r).unwrap();
        let crit = r / (r - 2.0);
        let expected = if (m - crit).abs() < 1e-12 { Regime::Critical } else if m > crit { Regime::Fast } else { Regime::Slow };
        prop_assert_eq!(c.regime, expected);
        if expected == Regime::Slow {
            prop_assert!(c.exponent > 0.0 && c.exponent < 1.0);
        }
    }

    #[test]
    fn strong_rate_exponent(n in 2.0f64..1e9, m in 0.05f64..5.0) {
        prop_assume!((m - 1.0).abs() > 1e-6);
        let v = rates::strong_rate(n, m).unwrap();
        prop_assert!((v.ln() - (1.0 - m) / (2.0 * (m + 1.0)) * n.ln()).abs() < 1e-9 * (1.0 + n.ln()));
    }
}
