//! Chain decomposition of `f - f0` along an admissible partition sequence
//! with truncation at the thresholds
//! `a_k = sqrt(n) 2 ||D_k f||_{q_{n,k}} / (q_{n,k} sqrt(2^{k+1}))`.

use serde::Serialize;

use super::{cell_diameter, FunctionClass, PartitionSequence};
use crate::error::{invalid, Result};
use crate::grid::BlockSchedule;
use crate::norms::{self, QuantileCurve};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDecomposition {
    /// `pi_k f` as member indices, `k = 0..=L`; `pi_0 f = f0`.
    pub centers: Vec<usize>,
    /// `Delta_k f = pi_k f - pi_{k-1} f` for `k = 1..=L` (index `k - 1`).
    pub delta: Vec<Vec<f64>>,
    /// `Xi_k f = pi_k f - f` for `k = 0..=L`.
    pub xi: Vec<Vec<f64>>,
    /// `D_k f = D(f, T_k)` for `k = 0..=L`, with `D_0 = 0`.
    pub diam: Vec<Vec<f64>>,
    /// `a_k` for `k = 0..=L`.
    pub thresholds: Vec<f64>,
    /// Pointwise `m(f) = min{k : |D_k f| > a_k}`; `None` when no level binds.
    pub stop: Vec<Option<usize>>,
    /// `sum_k Delta_k f 1{m >= k, |D_k f| <= a_k}`.
    pub kept_links: Vec<f64>,
    /// `sum_k Xi_{k-1} f 1{m = k, |D_k f| > a_k}`.
    pub cut_links: Vec<f64>,
    /// `Xi_0 f 1{m = 0}`.
    pub origin: Vec<f64>,
    /// Sup-norm of `(f - f0) - (kept - cut - origin)`.
    pub residual: f64,
}

/// Decompose `f - f0` along `partitions`. The level-0 centre is `f0`;
/// deeper centres are the lowest-index member of each cell.
pub fn chain_decomposition(
    class: &FunctionClass,
    f: usize,
    f0: usize,
    partitions: &PartitionSequence,
    schedule: &BlockSchedule,
) -> Result<ChainDecomposition> {
    partitions.check()?;
    if partitions.size != class.len() {
        return Err(invalid("partition sequence does not match the class size"));
    }
    if f >= class.len() || f0 >= class.len() {
        return Err(invalid("member index out of range"));
    }
    let depth = partitions.depth();
    let len = class.weights.len();
    let n = schedule.n as f64;
    let member = |i: usize| &class.members[i];

    let centers: Vec<usize> =
        (0..=depth).map(|k| if k == 0 { f0 } else { partitions.cell_of(f, k)[0] }).collect();
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let delta: Vec<Vec<f64>> = (1..=depth).map(|k| sub(member(centers[k]), member(centers[k - 1]))).collect();
    let xi: Vec<Vec<f64>> = (0..=depth).map(|k| sub(member(centers[k]), member(f))).collect();
    let diam: Vec<Vec<f64>> =
        (0..=depth).map(|k| if k == 0 { vec![0.0; len] } else { cell_diameter(class, partitions.cell_of(f, k)) }).collect();
    let thresholds: Vec<f64> = (0..=depth)
        .map(|k| {
            let q = schedule.q(k);
            let norm = QuantileCurve::from_weighted(&diam[k], &class.weights)
                .map(|c| norms::q_norm(&c, q, &schedule.profile))
                .unwrap_or(0.0);
            n.sqrt() * 2.0 * norm / (q as f64 * 2f64.powi(k as i32 + 1).sqrt())
        })
        .collect();

    let mut stop = vec![None; len];
    let mut kept = vec![0.0; len];
    let mut cut = vec![0.0; len];
    let mut origin = vec![0.0; len];
    for x in 0..len {
        let m = (0..=depth).find(|k| diam[*k][x].abs() > thresholds[*k]);
        stop[x] = m;
        for k in 1..=depth {
            let binds = diam[k][x].abs() > thresholds[k];
            if m.is_none_or(|m| m >= k) && !binds {
                kept[x] += delta[k - 1][x];
            }
            if m == Some(k) && binds {
                cut[x] += xi[k - 1][x];
            }
        }
        if m == Some(0) {
            origin[x] = xi[0][x];
        }
    }
    let residual = (0..len)
        .map(|x| ((member(f)[x] - member(f0)[x]) - (kept[x] - cut[x] - origin[x])).abs())
        .fold(0.0, f64::max);
    Ok(ChainDecomposition { centers, delta, xi, diam, thresholds, stop, kept_links: kept, cut_links: cut, origin, residual })
}
