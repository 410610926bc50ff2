//! Admissible sample sizes, divisor sets and block-length schedules.
//!
//! A sample size is admissible when it factors over the first `I` primes
//! with the exponents of 2 and 3 both at least one. On these sizes the
//! divisor set has no gap wider than a factor of two.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mixing::MixingProfile;

pub const DEFAULT_BASIS_SIZE: usize = 3;

/// The first `count` primes.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut c = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleLattice {
    pub prime_basis: Vec<u64>,
    pub limit: u64,
}

impl SampleLattice {
    pub fn new(basis_size: usize, limit: u64) -> Result<Self> {
        if basis_size < 2 {
            return Err(invalid(format!("prime basis needs at least 2 primes, got {basis_size}")));
        }
        if limit < 6 {
            return Err(invalid(format!("no admissible sample size <= {limit} (the smallest is 6)")));
        }
        Ok(Self { prime_basis: first_primes(basis_size), limit })
    }

    /// All members up to `limit`, ascending.
    pub fn members(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.enumerate(0, 6, &mut out);
        out.sort_unstable();
        out
    }

    fn enumerate(&self, idx: usize, value: u64, out: &mut Vec<u64>) {
        if idx == self.prime_basis.len() {
            out.push(value);
            return;
        }
        let p = self.prime_basis[idx];
        let mut v = value;
        loop {
            self.enumerate(idx + 1, v, out);
            match v.checked_mul(p) {
                Some(next) if next <= self.limit => v = next,
                _ => break,
            }
        }
    }

    /// Membership test, independent of `limit`.
    pub fn contains(&self, n: u64) -> bool {
        if n == 0 || n % 6 != 0 {
            return false;
        }
        let mut rest = n;
        for p in &self.prime_basis {
            while rest % p == 0 {
                rest /= p;
            }
        }
        rest == 1
    }

    /// The member closest to `n` (ties go to the smaller one).
    pub fn nearest(&self, n: u64) -> u64 {
        if n <= 6 {
            return 6;
        }
        let mut below = n;
        while !self.contains(below) {
            below -= 1;
        }
        let mut above = n;
        while !self.contains(above) {
            above += 1;
        }
        if n - below <= above - n {
            below
        } else {
            above
        }
    }

    pub fn check(&self, n: u64) -> Result<()> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(Error::NotInLattice { n, nearest: self.nearest(n) })
        }
    }

    pub fn divisor_chain(&self, n: u64) -> Result<DivisorChain> {
        self.check(n)?;
        Ok(DivisorChain::new(n))
    }
}

/// Members of the lattice over the first `basis_size` primes up to `limit`.
pub fn lattice_members(basis_size: usize, limit: u64) -> Result<Vec<u64>> {
    Ok(SampleLattice::new(basis_size, limit)?.members())
}

fn default_lattice() -> SampleLattice {
    SampleLattice { prime_basis: first_primes(DEFAULT_BASIS_SIZE), limit: u64::MAX }
}

/// Whether `n` is admissible under the default basis {2, 3, 5}.
pub fn is_admissible(n: u64) -> bool {
    default_lattice().contains(n)
}

/// `Ok` for admissible `n`, otherwise [`Error::NotInLattice`] naming the
/// nearest admissible size.
pub fn check_admissible(n: u64) -> Result<()> {
    default_lattice().check(n)
}

pub fn nearest_admissible(n: u64) -> u64 {
    default_lattice().nearest(n)
}

/// Sorted divisors of `n`.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivisorChain {
    pub n: u64,
    pub divisors: Vec<u64>,
    /// First consecutive pair `(q, q')` with `q' > 2q`, if any.
    pub gap_violation: Option<(u64, u64)>,
}

impl DivisorChain {
    /// Divisors of an arbitrary positive `n` with the gap check recorded.
    pub fn new(n: u64) -> Self {
        let divisors = divisors(n);
        let gap_violation = divisors.windows(2).find(|w| w[1] > 2 * w[0]).map(|w| (w[0], w[1]));
        Self { n, divisors, gap_violation }
    }

    pub fn gap_ok(&self) -> bool {
        self.gap_violation.is_none()
    }

    /// Smallest divisor `>= x`.
    pub fn ceil(&self, x: f64) -> u64 {
        *self.divisors.iter().find(|d| **d as f64 >= x).unwrap_or(&self.n)
    }

    /// Divisor nearest to `x` on a log scale (ties go to the smaller one).
    pub fn nearest(&self, x: f64) -> u64 {
        let lx = x.ln();
        *self
            .divisors
            .iter()
            .min_by(|a, b| {
                let da = ((**a as f64).ln() - lx).abs();
                let db = ((**b as f64).ln() - lx).abs();
                da.total_cmp(&db)
            })
            .expect("divisor list is non-empty")
    }
}

/// Divisor set of an admissible `n` (default basis).
pub fn divisor_chain(n: u64) -> Result<DivisorChain> {
    default_lattice().divisor_chain(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSchedule {
    pub n: u64,
    pub profile: MixingProfile,
    /// `q_{n,0}, q_{n,1}, ...`, ending at the first entry equal to 1.
    pub q_seq: Vec<u64>,
}

impl BlockSchedule {
    /// Truncation depth: index of the last stored entry.
    pub fn depth(&self) -> usize {
        self.q_seq.len() - 1
    }

    /// `q_{n,k}`; entries past the truncation are 1.
    pub fn q(&self, k: usize) -> u64 {
        self.q_seq.get(k).copied().unwrap_or(1)
    }
}

/// Whether block length `s` satisfies the level-`k` balance
/// `0.5 theta(s) n <= s 2^{k+1}`.
pub fn balances(profile: &MixingProfile, n: u64, s: u64, k: usize) -> bool {
    0.5 * profile.theta(s) * n as f64 <= s as f64 * 2f64.powi(k as i32 + 1)
}

/// Smallest divisor of `n` satisfying the level-`k` balance.
pub fn schedule_entry(chain: &DivisorChain, profile: &MixingProfile, k: usize) -> u64 {
    *chain
        .divisors
        .iter()
        .find(|s| balances(profile, chain.n, **s, k))
        .expect("s = n always balances since theta <= 1")
}

/// Block-length schedule for an admissible `n`.
pub fn block_schedule(n: u64, profile: &MixingProfile) -> Result<BlockSchedule> {
    let chain = divisor_chain(n)?;
    Ok(schedule_on(&chain, profile))
}

/// Block-length schedule over a precomputed divisor set.
pub fn schedule_on(chain: &DivisorChain, profile: &MixingProfile) -> BlockSchedule {
    let mut q_seq = Vec::new();
    for k in 0.. {
        let q = schedule_entry(chain, profile, k);
        q_seq.push(q);
        if q == 1 {
            break;
        }
    }
    BlockSchedule { n: chain.n, profile: profile.clone(), q_seq }
}
