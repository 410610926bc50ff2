//! Stationary process generators, test-function classes and empirical
//! process evaluation.
//!
//! Paths keep a pre-sample history and every innovation they consumed, so
//! replicas can be rebuilt from the same randomness later.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Zeta};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mixing::MixingProfile;
use crate::seed::{self, Purpose};
use crate::stats::{self, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessModel {
    /// Independent `N(0, sd^2)` draws.
    Iid { sd: f64 },
    /// `X_t = sd * sum_j weights[j] eps_{t-j}`, memory `weights.len() - 1`.
    MovingAverage { weights: Vec<f64>, sd: f64 },
    /// `X_t = rho X_{t-1} + sd eps_t` with a stationary start.
    Ar1 { rho: f64, sd: f64 },
    /// Counts down to zero, then jumps to `floor(U^{-1/(m+1)}) - 1`.
    LazyRenewal { m: f64 },
}

impl ProcessModel {
    /// Moving average with `memory + 1` equal weights and unit variance.
    pub fn moving_average(memory: usize) -> Self {
        let w = 1.0 / ((memory + 1) as f64).sqrt();
        Self::MovingAverage { weights: vec![w; memory + 1], sd: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Iid { sd } | Self::MovingAverage { sd, .. } | Self::Ar1 { sd, .. } if !(*sd > 0.0 && sd.is_finite()) => {
                Err(invalid(format!("innovation sd must be positive, got {sd}")))
            }
            Self::MovingAverage { weights, .. } if weights.is_empty() => Err(invalid("moving average needs weights")),
            Self::Ar1 { rho, .. } if !(rho.abs() < 1.0) => Err(invalid(format!("ar1 needs |rho| < 1, got {rho}"))),
            Self::LazyRenewal { m } if !(*m > 0.0 && m.is_finite()) => {
                Err(invalid(format!("lazy_renewal needs a tail exponent m > 0, got {m}")))
            }
            _ => Ok(()),
        }
    }

    /// Parse `iid[:sd=s]`, `ma:m=<int>[,sd=s]`, `ar1:rho=r[,sd=s]`, `lazy_renewal:m=x`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut params = std::collections::BTreeMap::new();
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("`{spec}`: expected key=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("`{spec}`: bad number `{v}`")))?;
            params.insert(k.trim().to_string(), v);
        }
        let take = |params: &mut std::collections::BTreeMap<String, f64>, key: &str| {
            params.remove(key).ok_or_else(|| Error::Parse(format!("`{spec}`: missing `{key}=`")))
        };
        let sd = params.remove("sd").unwrap_or(1.0);
        let model = match head {
            "iid" => Self::Iid { sd },
            "ma" => {
                let m = take(&mut params, "m")?;
                if m < 0.0 || m.fract() != 0.0 {
                    return Err(Error::Parse(format!("`{spec}`: memory must be a non-negative integer")));
                }
                let w = 1.0 / (m + 1.0).sqrt();
                Self::MovingAverage { weights: vec![w; m as usize + 1], sd }
            }
            "ar1" => Self::Ar1 { rho: take(&mut params, "rho")?, sd },
            "lazy_renewal" | "renewal" => Self::LazyRenewal { m: take(&mut params, "m")? },
            _ => {
                return Err(Error::Parse(format!(
                    "unknown process `{spec}`; expected iid, ma:m=<int>, ar1:rho=<float> or lazy_renewal:m=<float>"
                )))
            }
        };
        if let Some(k) = params.keys().next() {
            return Err(Error::Parse(format!("`{spec}`: unknown parameter `{k}`")));
        }
        model.validate()?;
        Ok(model)
    }

    /// Whether the law of `X_t` given the past depends on `X_{t-1}` only.
    pub fn is_markov(&self) -> bool {
        !matches!(self, Self::MovingAverage { weights, .. } if weights.len() > 1)
    }

    /// Number of pre-sample innovations the recursion needs.
    fn pad(&self) -> usize {
        match self {
            Self::MovingAverage { weights, .. } => weights.len() - 1,
            _ => 0,
        }
    }

    /// Marginal variance when the marginal is Gaussian.
    pub fn gaussian_variance(&self) -> Option<f64> {
        match self {
            Self::Iid { sd } => Some(sd * sd),
            Self::MovingAverage { weights, sd } => Some(sd * sd * weights.iter().map(|w| w * w).sum::<f64>()),
            Self::Ar1 { rho, sd } => Some(sd * sd / (1.0 - rho * rho)),
            Self::LazyRenewal { .. } => None,
        }
    }

    /// Lag-`k` autocovariance of the Gaussian linear models.
    pub fn autocovariance(&self, k: u64) -> Option<f64> {
        match self {
            Self::Iid { sd } => Some(if k == 0 { sd * sd } else { 0.0 }),
            Self::MovingAverage { weights, sd } => {
                let k = k as usize;
                Some(sd * sd * weights.iter().zip(weights.iter().skip(k)).map(|(a, b)| a * b).sum::<f64>())
            }
            Self::Ar1 { rho, sd } => Some(sd * sd / (1.0 - rho * rho) * rho.powi(k.min(i32::MAX as u64) as i32)),
            Self::LazyRenewal { .. } => None,
        }
    }

    /// The dependence profile the model is checked against.
    pub fn calibrated_profile(&self) -> MixingProfile {
        match self {
            Self::Iid { .. } => MixingProfile::Iid,
            Self::MovingAverage { weights, .. } if weights.len() == 1 => MixingProfile::Iid,
            Self::MovingAverage { weights, .. } => MixingProfile::MDependent { m: weights.len() as u64 },
            Self::Ar1 { rho, .. } if *rho == 0.0 => MixingProfile::Iid,
            Self::Ar1 { rho, .. } => MixingProfile::Exponential { l: rho.abs() },
            Self::LazyRenewal { m } => MixingProfile::Polynomial { m: *m },
        }
    }

    pub fn innovation(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::LazyRenewal { .. } => 1.0 - rng.random::<f64>(),
            _ => StandardNormal.sample(rng),
        }
    }

    /// One draw of `X_t` from the stationary law (Markov models).
    pub fn stationary_draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Iid { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            Self::Ar1 { .. } | Self::MovingAverage { .. } => {
                let z: f64 = StandardNormal.sample(rng);
                z * self.gaussian_variance().expect("gaussian model").sqrt()
            }
            Self::LazyRenewal { m } => Zeta::new(m + 1.0).expect("exponent above one").sample(rng) - 1.0,
        }
    }

    /// Markov transition `X_t = F(X_{t-1}, innovation_t)`.
    pub fn step(&self, prev: f64, innovation: f64) -> f64 {
        match self {
            Self::Iid { sd } => sd * innovation,
            Self::Ar1 { rho, sd } => rho * prev + sd * innovation,
            Self::LazyRenewal { m } => {
                if prev >= 1.0 {
                    prev - 1.0
                } else {
                    (innovation.powf(-1.0 / (m + 1.0))).floor() - 1.0
                }
            }
            Self::MovingAverage { .. } => unreachable!("moving averages are not stepped"),
        }
    }

    /// Value of a moving average at the end of a window of innovations
    /// (oldest first, length `weights.len()`).
    pub(crate) fn ma_value(weights: &[f64], sd: f64, window: &[f64]) -> f64 {
        let m = weights.len();
        (0..m).map(|j| weights[j] * window[m - 1 - j]).sum::<f64>() * sd
    }
}

impl FromStr for ProcessModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_spec(s)
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iid { sd } => write!(f, "iid:sd={sd}"),
            Self::MovingAverage { weights, sd } => write!(f, "ma:m={},sd={sd}", weights.len() - 1),
            Self::Ar1 { rho, sd } => write!(f, "ar1:rho={rho},sd={sd}"),
            Self::LazyRenewal { m } => write!(f, "lazy_renewal:m={m}"),
        }
    }
}

/// A simulated path `X_1..X_n` plus `lead` pre-sample values and all the
/// innovations used.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub model: ProcessModel,
    pub seed: u64,
    pub n: usize,
    pub lead: usize,
    /// State at time `-lead` (Markov models).
    pub start: f64,
    /// Innovations before time `1 - lead` that a moving average needs.
    pub pad: Vec<f64>,
    /// Innovation at time `t` is `innovations[t + lead - 1]`, `t = 1-lead..=n`.
    pub innovations: Vec<f64>,
    /// `X_t` at `full[t + lead - 1]`.
    full: Vec<f64>,
}

impl PathBundle {
    pub fn values(&self) -> &[f64] {
        &self.full[self.lead..]
    }

    pub fn history(&self) -> &[f64] {
        &self.full[..self.lead]
    }

    /// Innovation at time `t` (may be negative).
    pub fn innovation_at(&self, t: i64) -> f64 {
        let idx = t + self.lead as i64 - 1;
        if idx >= 0 {
            self.innovations[idx as usize]
        } else {
            self.pad[(self.pad.len() as i64 + idx) as usize]
        }
    }

    /// `X_t` for `1 - lead <= t <= n`.
    pub fn value_at(&self, t: i64) -> f64 {
        self.full[(t + self.lead as i64 - 1) as usize]
    }
}

/// Simulate a stationary path of length `n` with `burn_in` stored
/// pre-sample points. Every model here starts exactly stationary, so the
/// pre-sample points are kept rather than discarded.
pub fn simulate(model: &ProcessModel, n: usize, seed: u64, burn_in: usize) -> Result<PathBundle> {
    model.validate()?;
    if n == 0 {
        return Err(invalid("path length must be at least 1"));
    }
    let mut rng = seed::rng_for(seed, Purpose::Path, 0);
    simulate_with(model, n, burn_in, seed, &mut rng)
}

pub(crate) fn simulate_with(
    model: &ProcessModel,
    n: usize,
    lead: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<PathBundle> {
    let start = if model.is_markov() { model.stationary_draw(rng) } else { 0.0 };
    let pad: Vec<f64> = (0..model.pad()).map(|_| model.innovation(rng)).collect();
    let total = lead + n;
    let innovations: Vec<f64> = (0..total).map(|_| model.innovation(rng)).collect();
    let full = match model {
        ProcessModel::MovingAverage { weights, sd } => {
            let all: Vec<f64> = pad.iter().chain(innovations.iter()).copied().collect();
            let m = weights.len();
            (0..total).map(|i| ProcessModel::ma_value(weights, *sd, &all[i..i + m])).collect()
        }
        _ => {
            let mut x = start;
            innovations
                .iter()
                .map(|e| {
                    x = model.step(x, *e);
                    x
                })
                .collect()
        }
    };
    Ok(PathBundle { model: model.clone(), seed, n, lead, start, pad, innovations, full })
}

/// A real test function of the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFn {
    Sin { omega: f64, phi: f64 },
    Linear { slope: f64, intercept: f64 },
    Constant { value: f64 },
}

impl TestFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Sin { omega, phi } => (omega * x + phi).sin(),
            Self::Linear { slope, intercept } => slope * x + intercept,
            Self::Constant { value } => *value,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Sin { .. } => 1.0,
            Self::Linear { slope, intercept } => {
                if *slope == 0.0 {
                    intercept.abs()
                } else {
                    f64::INFINITY
                }
            }
            Self::Constant { value } => value.abs(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Sin { omega, .. } => omega.abs(),
            Self::Linear { slope, .. } => slope.abs(),
            Self::Constant { .. } => 0.0,
        }
    }

    /// Mean under `N(0, v)`.
    pub fn gaussian_mean(&self, v: f64) -> f64 {
        match self {
            Self::Sin { omega, phi } => phi.sin() * (-0.5 * omega * omega * v).exp(),
            Self::Linear { intercept, .. } => *intercept,
            Self::Constant { value } => *value,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, Self::Sin { .. })
    }
}

/// Frequencies and phases of the built-in Lipschitz class.
pub const LIPSCHITZ_WAVES: [(f64, f64); 5] =
    [(0.25, 0.0), (0.25, std::f64::consts::FRAC_PI_2), (0.5, 0.3), (0.5, 1.2), (1.0, 0.0)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestClass {
    pub name: String,
    pub members: Vec<TestFn>,
}

pub const BUILTIN_CLASSES: &[&str] = &["lipschitz5", "lipschitz4", "identity", "pm_identity", "constant"];

impl TestClass {
    pub fn builtin(name: &str) -> Result<Self> {
        let waves = |k: usize| LIPSCHITZ_WAVES[..k].iter().map(|(omega, phi)| TestFn::Sin { omega: *omega, phi: *phi }).collect();
        let members = match name {
            "lipschitz5" => waves(5),
            "lipschitz4" => waves(4),
            "identity" => vec![TestFn::Linear { slope: 1.0, intercept: 0.0 }],
            "pm_identity" => {
                vec![TestFn::Linear { slope: 1.0, intercept: 0.0 }, TestFn::Linear { slope: -1.0, intercept: 0.0 }]
            }
            "constant" => vec![TestFn::Constant { value: 1.0 }],
            _ => {
                return Err(Error::Parse(format!("unknown class `{name}`; built-ins: {}", BUILTIN_CLASSES.join(", "))))
            }
        };
        Ok(Self { name: name.to_string(), members })
    }

    pub fn new(name: &str, members: Vec<TestFn>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("function class must be non-empty"));
        }
        Ok(Self { name: name.into(), members })
    }

    /// `{"name": ..., "members": [{"kind": "sin", "omega": 1, "phi": 0}, ...]}`;
    /// the name is optional.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            name: Option<String>,
            members: Vec<TestFn>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::new(raw.name.as_deref().unwrap_or("custom"), raw.members)
    }

    /// A built-in name, or a path to a JSON class file.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if BUILTIN_CLASSES.contains(&spec) {
            return Self::builtin(spec);
        }
        let path = std::path::Path::new(spec);
        if path.is_file() {
            return Self::from_json(&std::fs::read_to_string(path)?);
        }
        Err(Error::Parse(format!("`{spec}` is neither a built-in class ({}) nor a readable file", BUILTIN_CLASSES.join(", "))))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `sup_f ||f||_inf` (infinite for unbounded members).
    pub fn envelope(&self) -> f64 {
        self.members.iter().map(TestFn::sup_norm).fold(0.0, f64::max)
    }
}

/// Sample size of the Monte Carlo pass used for means without a closed form.
pub const MEAN_MC_SAMPLES: usize = 10_000_000;
const MEAN_MC_SEED: u64 = 0x6d65_616e;

/// `E_P[f]` for every member: closed form under Gaussian marginals,
/// otherwise a seeded Monte Carlo pass over the stationary law.
pub fn class_means(model: &ProcessModel, class: &TestClass) -> Result<Vec<f64>> {
    class_means_with(model, class, MEAN_MC_SAMPLES)
}

pub fn class_means_with(model: &ProcessModel, class: &TestClass, samples: usize) -> Result<Vec<f64>> {
    if let Some(v) = model.gaussian_variance() {
        return Ok(class.members.iter().map(|f| f.gaussian_mean(v)).collect());
    }
    if let ProcessModel::LazyRenewal { m } = model {
        if *m <= 1.0 && class.members.iter().any(|f| f.sup_norm().is_infinite()) {
            return Err(Error::UnknownMeans(format!(
                "{model} has an infinite mean for m <= 1; use bounded test functions (e.g. lipschitz5)"
            )));
        }
    }
    const CHUNKS: usize = 16;
    let per = samples.div_ceil(CHUNKS);
    let partial = seed::replicate(1, CHUNKS, |c| {
        let mut rng = seed::rng_for(MEAN_MC_SEED, Purpose::Means, c as u64);
        let mut acc = vec![0.0; class.len()];
        for _ in 0..per {
            let x = model.stationary_draw(&mut rng);
            for (a, f) in acc.iter_mut().zip(&class.members) {
                *a += f.eval(x);
            }
        }
        acc
    });
    let total = (per * CHUNKS) as f64;
    Ok((0..class.len()).map(|i| partial.iter().map(|p| p[i]).sum::<f64>() / total).collect())
}

/// `G_n[f] = n^{-1/2} sum_i (f(X_i) - E f)` for every member.
pub fn empirical_process(values: &[f64], class: &TestClass, means: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (values.len() as f64).sqrt();
    class
        .members
        .iter()
        .zip(means)
        .map(|(f, mu)| values.iter().map(|x| f.eval(*x) - mu).sum::<f64>() * scale)
        .collect()
}

/// `sup_{f, f0} |G_n[f] - G_n[f0]|`, i.e. the range of the process.
pub fn sup_pair(g: &[f64]) -> f64 {
    let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Monte Carlo estimate of `E sup_{f,f0} |G_n[f - f0]|`.
pub fn mc_expected_sup(
    model: &ProcessModel,
    class: &TestClass,
    n: usize,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<(Estimate, Vec<f64>)> {
    if reps < 30 {
        return Err(invalid(format!("mc_expected_sup needs reps >= 30, got {reps}")));
    }
    let means = class_means(model, class)?;
    let sups = seed::replicate(workers, reps, |r| {
        let mut rng = seed::rng_for(seed, Purpose::Path, r as u64);
        let path = simulate_with(model, n, 0, seed, &mut rng).expect("validated model");
        sup_pair(&empirical_process(path.values(), class, &means))
    });
    Ok((stats::mean_se(&sups), sups))
}

/// Simulate `reps` independent paths with per-replication streams.
pub fn simulate_reps(model: &ProcessModel, n: usize, lead: usize, reps: usize, seed: u64, workers: usize) -> Result<Vec<PathBundle>> {
    model.validate()?;
    Ok(seed::replicate(workers, reps, |r| {
        let mut rng = seed::rng_for(seed, Purpose::Path, r as u64);
        simulate_with(model, n, lead, seed, &mut rng).expect("validated model")
    }))
}

/// Sample autocorrelation at lag `k`.
pub fn autocorrelation(x: &[f64], k: usize) -> f64 {
    let m = stats::mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let num: f64 = x.iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum();
    num / denom
}
