//! The complexity functional
//! `gamma = inf_T sup_f sqrt(2) sum_l 2^{l/2} d_l(D(f, T_l))`.
//!
//! Once the level cap `2^{2^l}` reaches the class size, splitting into
//! singletons zeroes every later term without constraining earlier
//! levels. For classes of at most 16 members that happens at level 2, so
//! the infimum is a minimum over level-1 partitions into at most 4 cells.

use serde::Serialize;

use super::{cell_diameter, level_cap, FunctionClass, NormFamily, PartitionSequence};
use crate::error::{Error, Result};

/// Largest class accepted by [`gamma_exact`].
pub const EXACT_MAX_CLASS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaResult {
    pub value: f64,
    pub witness: PartitionSequence,
}

fn level_weight(l: usize) -> f64 {
    2f64.powf(l as f64 / 2.0)
}

fn cell_cost(class: &FunctionClass, family: &NormFamily, l: usize, cell: &[usize]) -> f64 {
    if cell.len() < 2 {
        return 0.0;
    }
    family.level(l).eval(&cell_diameter(class, cell), &class.weights)
}

/// `sup_f sqrt(2) sum_l 2^{l/2} d_l(D(f, T_l))` for one admissible sequence.
/// Levels past the last are singletons and contribute nothing.
pub fn sequence_value(class: &FunctionClass, family: &NormFamily, seq: &PartitionSequence) -> f64 {
    let costs: Vec<Vec<f64>> = seq
        .levels
        .iter()
        .enumerate()
        .map(|(l, level)| level.iter().map(|cell| cell_cost(class, family, l, cell)).collect())
        .collect();
    let index: Vec<Vec<usize>> = (0..seq.levels.len()).map(|l| seq.cell_index(l)).collect();
    let mut best = 0.0f64;
    for f in 0..seq.size {
        let mut acc = 0.0;
        for l in 0..seq.levels.len() {
            acc += level_weight(l) * costs[l][index[l][f]];
        }
        best = best.max(2f64.sqrt() * acc);
    }
    best
}

/// Visit every set partition of `0..size` into at most `max_blocks` cells
/// as a restricted growth string.
pub(crate) fn for_each_partition(size: usize, max_blocks: usize, mut visit: impl FnMut(&[usize], usize)) {
    let mut labels = vec![0usize; size];
    fn rec(i: usize, blocks: usize, labels: &mut [usize], max_blocks: usize, visit: &mut dyn FnMut(&[usize], usize)) {
        if i == labels.len() {
            visit(labels, blocks);
            return;
        }
        for b in 0..=blocks.min(max_blocks - 1) {
            labels[i] = b;
            rec(i + 1, blocks.max(b + 1), labels, max_blocks, visit);
        }
    }
    if size == 0 {
        return;
    }
    labels[0] = 0;
    rec(1, 1, &mut labels, max_blocks, &mut visit);
}

pub(crate) fn labels_to_cells(labels: &[usize], blocks: usize) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new(); blocks];
    for (i, b) in labels.iter().enumerate() {
        cells[*b].push(i);
    }
    cells
}

/// Exact `gamma` for classes of at most [`EXACT_MAX_CLASS`] members, with
/// an optimal partition sequence.
pub fn gamma_exact(class: &FunctionClass, family: &NormFamily) -> Result<GammaResult> {
    let size = class.len();
    if size > EXACT_MAX_CLASS {
        return Err(Error::ClassTooLarge { size, max: EXACT_MAX_CLASS });
    }
    let all: Vec<usize> = (0..size).collect();
    let singletons: Vec<Vec<usize>> = (0..size).map(|i| vec![i]).collect();
    if size == 1 {
        let witness = PartitionSequence::new(1, vec![vec![all]])?;
        return Ok(GammaResult { value: 0.0, witness });
    }
    // Level-1 cost of every subset, keyed by bitmask.
    let mut subset_cost = vec![0.0; 1 << size];
    for (mask, cost) in subset_cost.iter_mut().enumerate() {
        let cell: Vec<usize> = (0..size).filter(|i| mask & (1 << i) != 0).collect();
        *cost = cell_cost(class, family, 1, &cell);
    }
    let top = cell_cost(class, family, 0, &all);
    let w1 = level_weight(1);
    let mut best: Option<(f64, Vec<usize>, usize)> = None;
    for_each_partition(size, level_cap(1), |labels, blocks| {
        let mut masks = vec![0usize; blocks];
        for (i, b) in labels.iter().enumerate() {
            masks[*b] |= 1 << i;
        }
        let mut worst = 0.0f64;
        for b in &masks {
            let acc = top + w1 * subset_cost[*b];
            worst = worst.max(2f64.sqrt() * acc);
        }
        if best.as_ref().is_none_or(|(v, _, _)| worst < *v) {
            best = Some((worst, labels.to_vec(), blocks));
        }
    });
    let (_, labels, blocks) = best.expect("at least one partition");
    let level1 = labels_to_cells(&labels, blocks);
    let levels = if level1.len() == size { vec![vec![all], singletons] } else { vec![vec![all], level1, singletons] };
    let witness = PartitionSequence::new(size, levels)?;
    let value = sequence_value(class, family, &witness);
    Ok(GammaResult { value, witness })
}

/// Upper bound on `gamma` from furthest-point-first nested splitting: at
/// each level the most expensive cell is split in two until the cap is
/// reached. The last level is all singletons, placed at the first level
/// whose cap allows it (or later, up to `max_depth`, if that is larger).
pub fn gamma_greedy(class: &FunctionClass, family: &NormFamily, max_depth: usize) -> Result<GammaResult> {
    let size = class.len();
    let all: Vec<usize> = (0..size).collect();
    let mut levels = vec![vec![all]];
    let mut l = 1;
    loop {
        let cap = level_cap(l);
        if size <= cap && (l >= max_depth || levels.last().map(|lv: &Vec<Vec<usize>>| lv.len()) == Some(size)) {
            levels.push((0..size).map(|i| vec![i]).collect());
            break;
        }
        let mut cells = levels.last().cloned().expect("level 0 exists");
        while cells.len() < cap {
            let target = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.len() > 1)
                .map(|(i, c)| (i, cell_cost(class, family, l, c)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            let Some((i, _)) = target else { break };
            let (a, b) = split_furthest(class, family, l, &cells[i]);
            cells[i] = a;
            cells.push(b);
        }
        levels.push(cells);
        l += 1;
        if levels.last().map(Vec::len) == Some(size) {
            break;
        }
    }
    while levels.len() > 1 && levels[levels.len() - 2].len() == size {
        levels.pop();
    }
    let witness = PartitionSequence::new(size, levels)?;
    let value = sequence_value(class, family, &witness);
    Ok(GammaResult { value, witness })
}

fn split_furthest(class: &FunctionClass, family: &NormFamily, l: usize, cell: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let d = family.level(l);
    let dist = |i: usize, j: usize| d.eval(&class.difference(i, j), &class.weights);
    let furthest = |from: usize| {
        cell.iter()
            .copied()
            .filter(|j| *j != from)
            .map(|j| (j, dist(from, j)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j)
            .expect("cell has at least two members")
    };
    let b = furthest(cell[0]);
    let a = furthest(b);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &i in cell {
        if i == a || (i != b && dist(i, a) <= dist(i, b)) {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::super::Seminorm;
    use super::*;

    fn l2() -> NormFamily {
        NormFamily::constant(Seminorm::Lr { r: 2.0 })
    }

    #[test]
    fn singleton_and_pair() {
        let one = FunctionClass::uniform(vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(gamma_exact(&one, &l2()).unwrap().value, 0.0);
        assert_eq!(gamma_greedy(&one, &l2(), 3).unwrap().value, 0.0);
        let two = FunctionClass::uniform(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let expected = 2f64.sqrt() * Seminorm::Lr { r: 2.0 }.eval(&[3.0, 4.0], &two.weights);
        let exact = gamma_exact(&two, &l2()).unwrap();
        assert!((exact.value - expected).abs() < 1e-15);
        assert_eq!(gamma_greedy(&two, &l2(), 3).unwrap().value, exact.value);
    }

    #[test]
    fn too_large_is_refused() {
        let c = FunctionClass::uniform((0..9).map(|i| vec![i as f64]).collect()).unwrap();
        assert!(matches!(gamma_exact(&c, &l2()), Err(Error::ClassTooLarge { size: 9, max: 8 })));
        assert!(gamma_greedy(&c, &l2(), 2).is_ok());
    }

    #[test]
    fn partitions_are_counted() {
        // Stirling numbers S(6,1..4) = 1, 31, 90, 65.
        let mut count = 0;
        for_each_partition(6, 4, |_, _| count += 1);
        assert_eq!(count, 187);
        let mut bell = 0;
        for_each_partition(5, 5, |_, _| bell += 1);
        assert_eq!(bell, 52);
    }
}
