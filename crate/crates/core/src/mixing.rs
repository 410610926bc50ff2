//! Dependence profiles `q -> theta(q)` and empirical mixing estimators.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::processes::{self, ProcessModel, TestClass};
use crate::seed::{self, Purpose};
use crate::stats;

/// How a tabulated profile continues past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// Keep the last value forever.
    Hold,
    /// Zero after the table.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingProfile {
    Iid,
    MDependent { m: u64 },
    Polynomial { m: f64 },
    Exponential { l: f64 },
    Tabulated { values: Vec<f64>, tail: TailRule },
}

impl MixingProfile {
    pub fn m_dependent(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m-dependent profile needs m >= 1"));
        }
        Ok(Self::MDependent { m })
    }

    pub fn polynomial(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid(format!("polynomial profile needs m > 0, got {m}")));
        }
        Ok(Self::Polynomial { m })
    }

    pub fn exponential(l: f64) -> Result<Self> {
        if !(l > 0.0 && l < 1.0) {
            return Err(invalid(format!("exponential profile needs l in (0,1), got {l}")));
        }
        Ok(Self::Exponential { l })
    }

    /// Tabulated profile from raw values indexed from `q = 0`. The values
    /// are replaced by their monotone envelope and entry 0 is set to 1.
    pub fn tabulated(raw: &[f64], tail: TailRule) -> Result<Self> {
        let mut values = monotone_envelope(raw)?;
        values[0] = 1.0;
        Ok(Self::Tabulated { values, tail })
    }

    /// Read a tabulated profile: one value per line or comma separated,
    /// an optional non-numeric header line is skipped.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut raw = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            for field in line.split(',') {
                let field = field.trim();
                if field.is_empty() {
                    continue;
                }
                match field.parse::<f64>() {
                    Ok(v) => raw.push(v),
                    Err(_) if lineno == 0 => break,
                    Err(_) => {
                        return Err(Error::Parse(format!(
                            "{}:{}: not a number: {field}",
                            path.display(),
                            lineno + 1
                        )))
                    }
                }
            }
        }
        Self::tabulated(&raw, TailRule::Hold)
    }

    /// `theta(q)`, with `theta(0) = 1` for every profile.
    pub fn theta(&self, q: u64) -> f64 {
        if q == 0 {
            return 1.0;
        }
        match self {
            Self::Iid => 0.0,
            Self::MDependent { m } => {
                if q < *m {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Polynomial { m } => (1.0 + q as f64).powf(-m),
            Self::Exponential { l } => {
                if q <= i32::MAX as u64 {
                    l.powi(q as i32)
                } else {
                    l.powf(q as f64)
                }
            }
            Self::Tabulated { values, tail } => match values.get(q as usize) {
                Some(v) => *v,
                None => match tail {
                    TailRule::Hold => *values.last().expect("non-empty table"),
                    TailRule::Zero => 0.0,
                },
            },
        }
    }

    /// Smallest `q` at which the profile is exactly zero, if any.
    pub fn zero_from(&self) -> Option<u64> {
        match self {
            Self::Iid => Some(1),
            Self::MDependent { m } => Some(*m),
            Self::Polynomial { .. } | Self::Exponential { .. } => None,
            Self::Tabulated { values, tail } => match values.iter().position(|v| *v == 0.0) {
                Some(i) => Some(i as u64),
                None if *tail == TailRule::Zero => Some(values.len() as u64),
                None => None,
            },
        }
    }

    /// Generalized inverse `min{s : theta(s) <= u}`.
    pub fn theta_inverse(&self, u: f64) -> Result<u64> {
        if !(u >= 0.0) {
            return Err(invalid(format!("theta_inverse needs u >= 0, got {u}")));
        }
        if u >= 1.0 {
            return Ok(0);
        }
        let undefined = || Error::InverseUndefined(format!("theta never drops to {u} for {self}"));
        match self {
            Self::Iid => Ok(1),
            Self::MDependent { m } => Ok(*m),
            Self::Polynomial { m } => {
                if u == 0.0 {
                    return Err(undefined());
                }
                let guess = (u.powf(-1.0 / m) - 1.0).ceil().max(1.0);
                self.refine_inverse(guess, u).ok_or_else(undefined)
            }
            Self::Exponential { l } => {
                if u == 0.0 {
                    return Err(undefined());
                }
                let guess = (u.ln() / l.ln()).ceil().max(1.0);
                self.refine_inverse(guess, u).ok_or_else(undefined)
            }
            Self::Tabulated { values, tail } => {
                if let Some(i) = values.iter().position(|v| *v <= u) {
                    return Ok(i as u64);
                }
                match tail {
                    TailRule::Zero => Ok(values.len() as u64),
                    TailRule::Hold => Err(undefined()),
                }
            }
        }
    }

    /// Fix up a floating-point guess so that it is exactly the minimal `s`.
    fn refine_inverse(&self, guess: f64, u: f64) -> Option<u64> {
        if !(guess < 9.0e15) {
            return None;
        }
        let mut s = guess as u64;
        while s > 1 && self.theta(s - 1) <= u {
            s -= 1;
        }
        while self.theta(s) > u {
            s += 1;
        }
        Some(s)
    }

    /// Parse the CLI profile grammar: `iid`, `mdep:m=<int>`, `poly:m=<float>`,
    /// `expo:l=<float>`, `table:<path>`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (spec, None),
        };
        let param = |key: &str| -> Result<&str> {
            let rest = rest.ok_or_else(|| Error::Parse(format!("`{spec}`: missing `{key}=`")))?;
            rest.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| Error::Parse(format!("`{spec}`: expected `{key}=<value>`")))
        };
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("`{spec}`: bad number `{s}`")))
        };
        match head {
            "iid" if rest.is_none() => Ok(Self::Iid),
            "mdep" => {
                let m = param("m")?;
                let m = m.trim().parse::<u64>().map_err(|_| Error::Parse(format!("`{spec}`: m must be a positive integer")))?;
                Self::m_dependent(m)
            }
            "poly" => Self::polynomial(num(param("m")?)?),
            "expo" => Self::exponential(num(param("l")?)?),
            "table" => {
                let path = rest.filter(|p| !p.is_empty()).ok_or_else(|| Error::Parse("`table:` needs a path".into()))?;
                Self::from_table_file(Path::new(path))
            }
            _ => Err(Error::Parse(format!(
                "unknown profile `{spec}`; expected iid, mdep:m=<int>, poly:m=<float>, expo:l=<float> or table:<path>"
            ))),
        }
    }
}

impl FromStr for MixingProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_spec(s)
    }
}

impl fmt::Display for MixingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iid => write!(f, "iid"),
            Self::MDependent { m } => write!(f, "mdep:m={m}"),
            Self::Polynomial { m } => write!(f, "poly:m={m}"),
            Self::Exponential { l } => write!(f, "expo:l={l}"),
            Self::Tabulated { values, .. } => write!(f, "table[{}]", values.len()),
        }
    }
}

/// Running maximum from the right: `q -> max_{q' >= q} raw(q')`.
pub fn monotone_envelope(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(invalid("empty profile table"));
    }
    if let Some(v) = raw.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("profile values must lie in [0,1], got {v}")));
    }
    let mut out = raw.to_vec();
    for i in (0..out.len() - 1).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    AlphaEmpirical,
    TauNestedMc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingEstimate {
    pub q: u64,
    pub value: f64,
    pub std_error: f64,
    pub method: EstimateMethod,
}

/// Empirical deciles of a path, the default threshold grid for [`estimate_alpha`].
pub fn decile_thresholds(path: &[f64]) -> Vec<f64> {
    let mut sorted = path.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..10).map(|i| crate::stats::quantile_sorted(&sorted, i as f64 / 10.0)).collect()
}

/// Plug-in estimate of the half-line mixing coefficient at lag `q`:
/// the largest `|P(X_0 >= t, X_{-q} >= s) - P(X_0 >= t) P(X_{-q} >= s)|`
/// over the threshold grid, using every lag-`q` pair of the path.
///
/// The standard error is left at zero; replicate over paths for one.
pub fn estimate_alpha(path: &[f64], q: usize, thresholds: &[f64]) -> Result<MixingEstimate> {
    if path.len() <= q + 1 {
        return Err(invalid(format!("path of length {} too short for lag {q}", path.len())));
    }
    if thresholds.is_empty() {
        return Err(invalid("empty threshold grid"));
    }
    let pairs = path.len() - q;
    let past = &path[..pairs];
    let now = &path[q..];
    let n = pairs as f64;
    let mut best = 0.0f64;
    for &s in thresholds {
        let p_past = past.iter().filter(|x| **x >= s).count() as f64 / n;
        for &t in thresholds {
            let p_now = now.iter().filter(|x| **x >= t).count() as f64 / n;
            let joint = past.iter().zip(now).filter(|(a, b)| **a >= s && **b >= t).count() as f64 / n;
            best = best.max((joint - p_now * p_past).abs());
        }
    }
    Ok(MixingEstimate { q: q as u64, value: best, std_error: 0.0, method: EstimateMethod::AlphaEmpirical })
}

/// Nested Monte Carlo estimate of
/// `E sup_f |E[f(X_0) | X_{-q}] - E f|` for a Markov model.
///
/// The outer loop draws `X_{-q}` from the stationary law; the inner loop
/// pushes `inner_reps` independent continuations `q` steps forward. When the
/// class envelope is finite the functions are divided by it first, so the
/// value lives on the unit-bounded cone. The inner average adds a positive
/// bias of order `inner_reps^{-1/2}`.
pub fn estimate_tau(
    model: &ProcessModel,
    class: &TestClass,
    q: u64,
    outer_reps: usize,
    inner_reps: usize,
    seed: u64,
    workers: usize,
) -> Result<MixingEstimate> {
    model.validate()?;
    if !model.is_markov() {
        return Err(Error::Unsupported(format!("tau estimation needs a Markov model, got {model}")));
    }
    if inner_reps < 2 {
        return Err(invalid("inner_reps must be at least 2"));
    }
    if outer_reps < 2 || class.is_empty() {
        return Err(invalid("outer_reps must be at least 2 and the class non-empty"));
    }
    let means = processes::class_means(model, class)?;
    let envelope = class.envelope();
    let scale = if envelope.is_finite() && envelope > 0.0 { 1.0 / envelope } else { 1.0 };
    let draws = seed::replicate(workers, outer_reps, |r| {
        let mut rng = seed::rng_for(seed, Purpose::Tau, r as u64);
        let x0 = model.stationary_draw(&mut rng);
        let mut acc = vec![0.0; class.len()];
        for _ in 0..inner_reps {
            let mut x = x0;
            for _ in 0..q {
                let e = model.innovation(&mut rng);
                x = model.step(x, e);
            }
            for (a, f) in acc.iter_mut().zip(&class.members) {
                *a += f.eval(x);
            }
        }
        acc.iter().zip(&means).map(|(a, mu)| (a / inner_reps as f64 - mu).abs()).fold(0.0, f64::max) * scale
    });
    let est = stats::mean_se(&draws);
    Ok(MixingEstimate { q, value: est.value, std_error: est.std_error, method: EstimateMethod::TauNestedMc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profiles() -> Vec<MixingProfile> {
        vec![
            MixingProfile::Iid,
            MixingProfile::m_dependent(3).unwrap(),
            MixingProfile::polynomial(0.7).unwrap(),
            MixingProfile::polynomial(2.0).unwrap(),
            MixingProfile::exponential(0.9).unwrap(),
            MixingProfile::tabulated(&[1.0, 0.6, 0.7, 0.2, 0.05], TailRule::Zero).unwrap(),
        ]
    }

    #[test]
    fn theta_examples() {
        let md = MixingProfile::m_dependent(3).unwrap();
        assert_eq!(md.theta(2), 1.0);
        assert_eq!(md.theta(3), 0.0);
        assert_eq!(MixingProfile::polynomial(2.0).unwrap().theta(1), 0.25);
        assert_eq!(MixingProfile::Iid.theta(7), 0.0);
        assert_eq!(MixingProfile::Iid.theta(0), 1.0);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(MixingProfile::polynomial(1.0).unwrap().theta_inverse(0.2).unwrap(), 4);
        for p in profiles() {
            assert_eq!(p.theta_inverse(1.0).unwrap(), 0);
        }
        assert_eq!(MixingProfile::m_dependent(5).unwrap().theta_inverse(0.5).unwrap(), 5);
    }

    #[test]
    fn inverse_undefined_for_held_table() {
        let p = MixingProfile::tabulated(&[1.0, 0.5, 0.3], TailRule::Hold).unwrap();
        assert_eq!(p.theta_inverse(0.3).unwrap(), 2);
        assert!(matches!(p.theta_inverse(0.1), Err(Error::InverseUndefined(_))));
        let z = MixingProfile::tabulated(&[1.0, 0.5, 0.3], TailRule::Zero).unwrap();
        assert_eq!(z.theta_inverse(0.1).unwrap(), 3);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(monotone_envelope(&[1.0, 0.2, 0.5, 0.1]).unwrap(), vec![1.0, 0.5, 0.5, 0.1]);
        let mono = [1.0, 0.7, 0.7, 0.0];
        assert_eq!(monotone_envelope(&mono).unwrap(), mono.to_vec());
        assert_eq!(monotone_envelope(&[0.3, 0.0, 0.0]).unwrap()[1..], [0.0, 0.0]);
        assert!(monotone_envelope(&[1.0, 1.5]).is_err());
        assert!(monotone_envelope(&[-0.1]).is_err());
    }

    #[test]
    fn spec_grammar_round_trip() {
        for s in ["iid", "mdep:m=4", "poly:m=0.5", "expo:l=0.9"] {
            let p: MixingProfile = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("poly:m=-1".parse::<MixingProfile>().is_err());
        assert!("expo:l=1".parse::<MixingProfile>().is_err());
        assert!("mdep:m=1.5".parse::<MixingProfile>().is_err());
        assert!("gauss".parse::<MixingProfile>().is_err());
    }

    #[test]
    fn table_file_parsing() {
        let dir = std::env::temp_dir().join(format!("mixbound-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("theta.csv");
        std::fs::write(&path, "theta\n0.9\n0.4\n0.5\n0.1\n").unwrap();
        let p = MixingProfile::parse_spec(&format!("table:{}", path.display())).unwrap();
        assert_eq!(p.theta(0), 1.0);
        assert_eq!(p.theta(1), 0.5);
        assert_eq!(p.theta(2), 0.5);
        assert_eq!(p.theta(9), 0.1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn profiles_are_monotone_from_one() {
        for p in profiles() {
            assert_eq!(p.theta(0), 1.0);
            let mut prev = 1.0;
            for q in 0..500 {
                let t = p.theta(q);
                assert!((0.0..=1.0).contains(&t));
                assert!(t <= prev, "{p} not monotone at {q}");
                prev = t;
            }
        }
    }

    proptest! {
        #[test]
        fn inverse_consistency(u in 1e-6f64..=1.0, q in 0u64..2000, which in 0usize..6) {
            let p = &profiles()[which];
            if let Ok(s) = p.theta_inverse(u) {
                prop_assert!(p.theta(s) <= u);
                if s > 0 {
                    prop_assert!(p.theta(s - 1) > u);
                }
            }
            let s = p.theta_inverse(p.theta(q)).unwrap();
            prop_assert!(s <= q);
        }

        #[test]
        fn envelope_dominates(raw in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let env = monotone_envelope(&raw).unwrap();
            for i in 0..raw.len() {
                prop_assert!(env[i] >= raw[i]);
                if i + 1 < raw.len() {
                    prop_assert!(env[i] >= env[i + 1]);
                }
            }
        }
    }
}
