//! Finite function classes, seminorm families, admissible partition
//! sequences, the complexity functional `gamma`, covering numbers and the
//! chain decomposition.

mod cover;
mod decompose;
mod gamma;

pub use cover::{covering_number, covering_number_greedy, entropy_integral};
pub use decompose::{chain_decomposition, ChainDecomposition};
pub use gamma::{gamma_exact, gamma_greedy, sequence_value, GammaResult, EXACT_MAX_CLASS};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{self, BlockSchedule};
use crate::mixing::MixingProfile;
use crate::norms::{self, QuantileCurve};
use crate::processes::TestClass;

/// Finite class of functions given by their values on a shared set of
/// weighted support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    pub members: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl FunctionClass {
    pub fn new(members: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let c = Self { members, weights, sup_bound: None, lipschitz: None };
        c.validate()?;
        Ok(c)
    }

    /// Uniform weights over the support points.
    pub fn uniform(members: Vec<Vec<f64>>) -> Result<Self> {
        let len = members.first().map(Vec::len).unwrap_or(0);
        Self::new(members, vec![1.0 / len.max(1) as f64; len])
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(invalid("function class must be non-empty"));
        }
        let len = self.weights.len();
        if len == 0 {
            return Err(invalid("function class needs at least one support point"));
        }
        if let Some(i) = self.members.iter().position(|m| m.len() != len) {
            return Err(invalid(format!("member {i} has {} values, expected {len}", self.members[i].len())));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("weights must be non-negative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        if self.members.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("member values must be finite"));
        }
        Ok(())
    }

    /// Evaluate a test class on weighted support points.
    pub fn from_test_class(class: &TestClass, points: &[f64], weights: &[f64]) -> Result<Self> {
        let members = class.members.iter().map(|f| points.iter().map(|x| f.eval(*x)).collect()).collect();
        let mut c = Self::new(members, weights.to_vec())?;
        c.sup_bound = Some(class.envelope()).filter(|b| b.is_finite());
        c.lipschitz = Some(class.members.iter().map(|f| f.lipschitz()).fold(0.0, f64::max));
        Ok(c)
    }

    /// Read `{"members": [[..], ..], "weights": [..]}`; weights default to uniform.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            members: Vec<Vec<f64>>,
            weights: Option<Vec<f64>>,
            sup_bound: Option<f64>,
            lipschitz: Option<f64>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let mut c = match raw.weights {
            Some(w) => Self::new(raw.members, w)?,
            None => Self::uniform(raw.members)?,
        };
        c.sup_bound = raw.sup_bound;
        c.lipschitz = raw.lipschitz;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.members {
            for v in m.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Sub-class with the given member indices.
    pub fn subclass(&self, idx: &[usize]) -> Self {
        let mut out = self.clone();
        out.members = idx.iter().map(|i| self.members[*i].clone()).collect();
        out
    }

    pub fn difference(&self, i: usize, j: usize) -> Vec<f64> {
        self.members[i].iter().zip(&self.members[j]).map(|(a, b)| a - b).collect()
    }
}

/// `x -> sup_{f1, f2 in cell} |f1(x) - f2(x)|`.
pub fn cell_diameter(class: &FunctionClass, cell: &[usize]) -> Vec<f64> {
    let len = class.weights.len();
    let mut out = vec![0.0; len];
    if cell.len() < 2 {
        return out;
    }
    for (x, o) in out.iter_mut().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in cell {
            let v = class.members[i][x];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        *o = hi - lo;
    }
    out
}

/// A seminorm on evaluation vectors, weighted by the class weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seminorm {
    /// `(sum_x w_x |v_x|^r)^{1/r}`.
    Lr { r: f64 },
    /// Largest `|v_x|` over points with positive weight.
    Sup,
    /// The dependence-adapted norm `||.||_q` under a profile.
    Q { q: u64, profile: MixingProfile },
}

impl Seminorm {
    pub fn eval(&self, v: &[f64], weights: &[f64]) -> f64 {
        match self {
            Self::Lr { r } => {
                let s: f64 = v.iter().zip(weights).map(|(x, w)| w * x.abs().powf(*r)).sum();
                s.powf(1.0 / r)
            }
            Self::Sup => v.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(x, _)| x.abs()).fold(0.0, f64::max),
            Self::Q { q, profile } => match QuantileCurve::from_weighted(v, weights) {
                Ok(c) => norms::q_norm(&c, *q, profile),
                Err(_) => 0.0,
            },
        }
    }
}

/// Per-level seminorms `d_0, d_1, ...`; the last one repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormFamily {
    pub levels: Vec<Seminorm>,
}

impl NormFamily {
    pub fn constant(norm: Seminorm) -> Self {
        Self { levels: vec![norm] }
    }

    pub fn per_level(levels: Vec<Seminorm>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("norm family needs at least one level"));
        }
        Ok(Self { levels })
    }

    /// `d_l = ||.||_{q_{n,l}}`; past the schedule's truncation `q = 1`.
    pub fn schedule(schedule: &BlockSchedule) -> Self {
        let levels = schedule
            .q_seq
            .iter()
            .map(|q| Seminorm::Q { q: *q, profile: schedule.profile.clone() })
            .collect();
        Self { levels }
    }

    pub fn level(&self, l: usize) -> &Seminorm {
        &self.levels[l.min(self.levels.len() - 1)]
    }

    /// Parse `constant:l2`, `constant:lr=<r>`, `constant:sup`,
    /// `constant:q=<int>,profile=<spec>` or `schedule:n=<int>,profile=<spec>`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown norm family `{spec}`"));
        if let Some(rest) = spec.strip_prefix("constant:") {
            let norm = match rest {
                "l2" => Seminorm::Lr { r: 2.0 },
                "sup" | "linf" => Seminorm::Sup,
                _ if rest.starts_with("lr=") => {
                    let r: f64 = rest[3..].parse().map_err(|_| bad())?;
                    if !(r >= 1.0) {
                        return Err(invalid("lr norms need r >= 1"));
                    }
                    Seminorm::Lr { r }
                }
                _ if rest.starts_with("q=") => {
                    let (q, profile) = rest[2..].split_once(",profile=").ok_or_else(bad)?;
                    Seminorm::Q { q: q.parse().map_err(|_| bad())?, profile: MixingProfile::parse_spec(profile)? }
                }
                _ => return Err(bad()),
            };
            return Ok(Self::constant(norm));
        }
        if let Some(rest) = spec.strip_prefix("schedule:") {
            let (n, profile) = rest.strip_prefix("n=").and_then(|r| r.split_once(",profile=")).ok_or_else(bad)?;
            let n: u64 = n.parse().map_err(|_| bad())?;
            let profile = MixingProfile::parse_spec(profile)?;
            return Ok(Self::schedule(&grid::block_schedule(n, &profile)?));
        }
        Err(bad())
    }
}

/// Nested partitions `T_0, T_1, ...` of the index set `0..size`, each cell
/// sorted ascending and cells ordered by their first index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionSequence {
    pub size: usize,
    pub levels: Vec<Vec<Vec<usize>>>,
}

/// `2^{2^l}`, saturating.
pub fn level_cap(l: usize) -> usize {
    if l >= 6 {
        usize::MAX
    } else {
        1usize.checked_shl(1u32 << l).unwrap_or(usize::MAX)
    }
}

impl PartitionSequence {
    pub fn new(size: usize, levels: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let mut levels = levels;
        for level in &mut levels {
            for cell in level.iter_mut() {
                cell.sort_unstable();
            }
            level.sort_by_key(|c| c.first().copied().unwrap_or(usize::MAX));
        }
        let s = Self { size, levels };
        s.check()?;
        Ok(s)
    }

    /// Verify partition, cardinality and nesting properties.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("not admissible: {msg}")));
        if self.levels.is_empty() {
            return bad("no levels".into());
        }
        for (l, level) in self.levels.iter().enumerate() {
            let mut seen = vec![false; self.size];
            for cell in level {
                if cell.is_empty() {
                    return bad(format!("empty cell at level {l}"));
                }
                for &i in cell {
                    if i >= self.size || seen[i] {
                        return bad(format!("level {l} is not a partition"));
                    }
                    seen[i] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return bad(format!("level {l} does not cover the class"));
            }
            if l == 0 && level.len() != 1 {
                return bad("level 0 must be the whole class".into());
            }
            if level.len() > level_cap(l) {
                return bad(format!("level {l} has {} cells, cap is {}", level.len(), level_cap(l)));
            }
            if l > 0 {
                let parent = self.cell_index(l - 1);
                for cell in level {
                    if cell.iter().any(|i| parent[*i] != parent[cell[0]]) {
                        return bad(format!("level {l} does not refine level {}", l - 1));
                    }
                }
            }
        }
        if self.levels.last().map(|lv| lv.len()) != Some(self.size) {
            return bad("last level must separate every member".into());
        }
        Ok(())
    }

    /// For each member, the index of its cell at level `l` (the last level
    /// repeats).
    pub fn cell_index(&self, l: usize) -> Vec<usize> {
        let level = &self.levels[l.min(self.levels.len() - 1)];
        let mut out = vec![0; self.size];
        for (c, cell) in level.iter().enumerate() {
            for &i in cell {
                out[i] = c;
            }
        }
        out
    }

    pub fn cell_of(&self, f: usize, l: usize) -> &[usize] {
        let level = &self.levels[l.min(self.levels.len() - 1)];
        level.iter().find(|c| c.contains(&f)).expect("member is covered")
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
}
