//! Small statistical helpers shared by the Monte Carlo experiments.

use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    /// Two-sided 95% normal interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.value - 1.96 * self.std_error, self.value + 1.96 * self.std_error)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Sample mean with standard error `s / sqrt(n)`. For the mean this is the
/// jackknife standard error as well.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let value = mean(xs);
    let std_error = if n < 2 { 0.0 } else { (variance(xs) / n as f64).sqrt() };
    Estimate { value, std_error }
}

/// Pearson correlation of paired samples. Returns 0 when either side is
/// constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Ordinary least squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Exact one-sided upper confidence limit for a binomial proportion
/// (Clopper-Pearson) with `successes` out of `trials`.
pub fn clopper_pearson_upper(successes: u64, trials: u64, level: f64) -> f64 {
    assert!(trials > 0);
    if successes >= trials {
        return 1.0;
    }
    if successes == 0 {
        return 1.0 - (1.0 - level).powf(1.0 / trials as f64);
    }
    let beta = Beta::new(successes as f64 + 1.0, (trials - successes) as f64)
        .expect("positive beta shape parameters");
    beta.inverse_cdf(level)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `E|Z|^m` for a standard normal `Z`.
pub fn normal_abs_moment(m: f64) -> f64 {
    2f64.powf(m / 2.0) * statrs::function::gamma::gamma((m + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 5% critical value of the two-sample KS statistic.
pub fn ks_critical_05(na: usize, nb: usize) -> f64 {
    1.358 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// Empirical quantile (type 7, linear interpolation) of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_zero_successes_closed_form() {
        let u = clopper_pearson_upper(0, 5000, 0.95);
        let closed = 1.0 - 0.05f64.powf(1.0 / 5000.0);
        assert!((u - closed).abs() < 1e-12, "{u} vs {closed}");
    }

    #[test]
    fn clopper_pearson_brackets_the_proportion() {
        let u = clopper_pearson_upper(30, 1000, 0.95);
        assert!(u > 0.03 && u < 0.045);
    }

    #[test]
    fn abs_moments() {
        assert!((normal_abs_moment(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((normal_abs_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((normal_abs_moment(4.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn slope_and_correlation() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        assert!((ols_slope(&x, &y) - 2.0).abs() < 1e-15);
        assert!((correlation(&x, &y) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ks_identical_samples() {
        let a = [0.1, 0.5, 0.9];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }
}
