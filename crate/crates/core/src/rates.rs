//! The rate factor `frak_n(n) = B_r(q_{n,0})^2`, its envelopes and regimes,
//! the strong-approximation rate and the universal constants.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{self, DivisorChain};
use crate::mixing::MixingProfile;
use crate::norms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Fast,
    Critical,
    Slow,
    MDependent,
    Iid,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Fast => "fast",
            Self::Critical => "critical",
            Self::Slow => "slow",
            Self::MDependent => "m_dependent",
            Self::Iid => "iid",
        }
    }
}

/// Growth of `frak_n(n)` for `theta(q) = (1+q)^{-m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeClass {
    pub regime: Regime,
    /// Power of `n` for slow mixing, power of `log n` for the critical case,
    /// zero for fast mixing.
    pub exponent: f64,
}

/// Compare `m` with `r/(r-2)`.
pub fn regime_classify(m: f64, r: f64) -> Result<RegimeClass> {
    if !(m > 0.0) || !(r > 2.0) {
        return Err(invalid(format!("need m > 0 and r > 2, got m={m}, r={r}")));
    }
    let crit = r / (r - 2.0);
    Ok(if (m - crit).abs() <= 1e-12 * crit {
        RegimeClass { regime: Regime::Critical, exponent: 1.0 / m }
    } else if m > crit {
        RegimeClass { regime: Regime::Fast, exponent: 0.0 }
    } else {
        RegimeClass { regime: Regime::Slow, exponent: (r - m * (r - 2.0)) / (r * (m + 1.0)) }
    })
}

/// Regime of a profile (non-polynomial profiles are classified by kind).
pub fn profile_regime(profile: &MixingProfile, r: f64) -> Result<RegimeClass> {
    match profile {
        MixingProfile::Iid => Ok(RegimeClass { regime: Regime::Iid, exponent: 0.0 }),
        MixingProfile::MDependent { .. } => Ok(RegimeClass { regime: Regime::MDependent, exponent: 0.0 }),
        MixingProfile::Polynomial { m } => regime_classify(*m, r),
        MixingProfile::Exponential { .. } => Ok(RegimeClass { regime: Regime::Fast, exponent: 0.0 }),
        MixingProfile::Tabulated { .. } => {
            if profile.zero_from().is_some() {
                Ok(RegimeClass { regime: Regime::MDependent, exponent: 0.0 })
            } else {
                Err(invalid("regime of a tabulated profile without a zero tail is not determined"))
            }
        }
    }
}

/// Which closed-form envelope pair applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeCase {
    /// `theta = 1{q < m}`.
    MDependent = 1,
    /// Polynomial, `m > r/(r-2)`.
    Fast = 2,
    /// Polynomial, `m = r/(r-2)`.
    Critical = 3,
    /// Polynomial, `m < r/(r-2)`.
    Slow = 4,
}

impl EnvelopeCase {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::MDependent),
            2 => Ok(Self::Fast),
            3 => Ok(Self::Critical),
            4 => Ok(Self::Slow),
            _ => Err(invalid(format!("envelope case must be 1..4, got {i}"))),
        }
    }

    pub fn for_profile(profile: &MixingProfile, r: f64) -> Option<Self> {
        match profile {
            MixingProfile::MDependent { .. } => Some(Self::MDependent),
            MixingProfile::Polynomial { m } => regime_classify(*m, r).ok().map(|c| match c.regime {
                Regime::Fast => Self::Fast,
                Regime::Critical => Self::Critical,
                _ => Self::Slow,
            }),
            _ => None,
        }
    }
}

/// Closed-form `(lower, upper)` bounds on `B_r(q)`.
///
/// Case 2 carries the `sqrt(2)` prefactor of `B_r` on both sides. Negative
/// bases in the lower forms are clamped to zero.
pub fn closed_form_envelopes(q: u64, m: f64, r: f64, case: EnvelopeCase) -> Result<(f64, f64)> {
    if !(r > 2.0) || !(m > 0.0) {
        return Err(invalid(format!("need m > 0 and r > 2, got m={m}, r={r}")));
    }
    let a = r / (r - 2.0);
    let e = (r - 2.0) / (2.0 * r);
    let s2 = 2f64.sqrt();
    let qf = q as f64;
    let pos = |x: f64| x.max(0.0);
    let mismatch = |want: &str| invalid(format!("m={m}, r={r} is not in the {want} regime"));
    let crit = (m - a).abs() <= 1e-12 * a;
    match case {
        EnvelopeCase::MDependent => {
            if m.fract() != 0.0 {
                return Err(invalid("m-dependent envelopes need an integer m"));
            }
            let c = 2f64.powf(1.0 / r);
            Ok((c * (1.0 + qf).min(m).sqrt(), c * (1.0 + qf).min(1.0 + m).sqrt()))
        }
        EnvelopeCase::Fast => {
            if crit || m < a {
                return Err(mismatch("fast"));
            }
            let k = 0.5 / (1.0 - a / m);
            let upper = s2 * (2f64.powf(1.0 + a - m) + k).powf(e);
            let lower = s2 * pos(k * (1.0 - 2f64.powf(a - m)) - 0.5).powf(e);
            Ok((lower, upper))
        }
        EnvelopeCase::Critical => {
            if !crit {
                return Err(mismatch("critical"));
            }
            let upper = s2 * (2.0 + 0.5 * m * (1.0 + qf).ln()).powf(1.0 / (2.0 * m));
            let lower = s2 * pos(0.5 * m * (2.0 + qf).ln() - 0.5).powf(1.0 / (2.0 * m));
            Ok((lower, upper))
        }
        EnvelopeCase::Slow => {
            if crit || m > a {
                return Err(mismatch("slow"));
            }
            let k = 0.5 / (a / m - 1.0);
            let upper = s2 * (2.0 * (1.0 + qf).powf(a - m) + k * (1.0 + qf).powf(a - m)).powf(e);
            let lower = s2 * pos(k * (2.0 + qf).powf(a - m) - 0.5).powf(e);
            Ok((lower, upper))
        }
    }
}

/// `q_{n,0}` for admissible `n`.
pub fn first_block(n: u64, profile: &MixingProfile) -> Result<u64> {
    let chain = grid::divisor_chain(n)?;
    Ok(grid::schedule_entry(&chain, profile, 0))
}

/// `frak_n(n) = B_r(q_{n,0})^2`.
pub fn frak_n(n: u64, r: f64, profile: &MixingProfile) -> Result<f64> {
    let q0 = first_block(n, profile)?;
    Ok(norms::b_r(q0, r, profile)?.powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: u64,
    pub q_n0: u64,
    /// `B_r(q_{n,0})`, i.e. `sqrt(frak_n)`.
    pub b_r: f64,
    pub frak_n: f64,
    pub effective_n: f64,
    pub regime: Regime,
    pub lower_env: Option<f64>,
    pub upper_env: Option<f64>,
    pub strong_rate: Option<f64>,
}

/// Rate rows for every admissible `n` in `[n_min, n_max]`, sharing one
/// `B_r` prefix table.
pub fn rate_sweep(n_min: u64, n_max: u64, r: f64, profile: &MixingProfile) -> Result<Vec<RateRow>> {
    let members: Vec<u64> = grid::lattice_members(grid::DEFAULT_BASIS_SIZE, n_max.max(6))?
        .into_iter()
        .filter(|n| *n >= n_min)
        .collect();
    let q0s: Vec<u64> = members
        .iter()
        .map(|n| grid::schedule_entry(&DivisorChain::new(*n), profile, 0))
        .collect();
    let q_max = q0s.iter().copied().max().unwrap_or(0);
    let table = norms::BrTable::new(q_max, r, profile)?;
    let regime = profile_regime(profile, r)?.regime;
    let case = EnvelopeCase::for_profile(profile, r);
    let m = match profile {
        MixingProfile::Polynomial { m } => Some(*m),
        MixingProfile::MDependent { m } => Some(*m as f64),
        _ => None,
    };
    members
        .iter()
        .zip(q0s)
        .map(|(n, q0)| {
            let b = table.get(q0);
            let (lower_env, upper_env) = match (case, m) {
                (Some(c), Some(m)) => {
                    let (lo, up) = closed_form_envelopes(q0, m, r, c)?;
                    (Some(lo), Some(up))
                }
                _ => (None, None),
            };
            let strong_rate = match profile {
                MixingProfile::Polynomial { m } => Some(strong_rate(*n as f64, *m)?),
                _ => None,
            };
            Ok(RateRow {
                n: *n,
                q_n0: q0,
                b_r: b,
                frak_n: b * b,
                effective_n: *n as f64 / (b * b),
                regime,
                lower_env,
                upper_env,
                strong_rate,
            })
        })
        .collect()
}

/// `n^{(1-m)/(2(m+1))}` for `m != 1`, `sqrt(log n)` for `m = 1`.
pub fn strong_rate(n: f64, m: f64) -> Result<f64> {
    if !(n >= 2.0) || !(m > 0.0) {
        return Err(invalid(format!("need n >= 2 and m > 0, got n={n}, m={m}")));
    }
    Ok(if m == 1.0 { n.ln().powf(1.0 / (2.0 * m)) } else { n.powf((1.0 - m) / (2.0 * (m + 1.0))) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniversalConstants {
    pub c0: f64,
    pub l0: f64,
    pub l: f64,
}

/// `C0 = 2 sum_{j>=1} (2/e)^{2^{j-1}}`, `L0 = (16/3) C0 + 2`, `L = 2 L0 + 2^{5/2}`.
pub fn universal_constants() -> UniversalConstants {
    let base = 2.0 / std::f64::consts::E;
    let mut c0 = 0.0;
    let mut term = base;
    loop {
        c0 += 2.0 * term;
        if 2.0 * term < 1e-17 * c0 {
            break;
        }
        term *= term;
    }
    let l0 = 16.0 / 3.0 * c0 + 2.0;
    UniversalConstants { c0, l0, l: 2.0 * l0 + 2f64.powf(2.5) }
}

/// `sqrt(frak_n(n)) L complexity`.
pub fn maximal_bound(complexity: f64, n: u64, r: f64, profile: &MixingProfile) -> Result<f64> {
    if !(complexity >= 0.0) {
        return Err(invalid("complexity must be non-negative"));
    }
    Ok(frak_n(n, r, profile)?.sqrt() * universal_constants().l * complexity)
}
