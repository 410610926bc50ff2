//! Covering numbers with closed balls centred at class members, and the
//! entropy integral.

use super::{FunctionClass, Seminorm};

fn distances(class: &FunctionClass, norm: &Seminorm) -> Vec<Vec<f64>> {
    let n = class.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = norm.eval(&class.difference(i, j), &class.weights);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn ball_masks(d: &[Vec<f64>], eps: f64) -> Vec<u64> {
    d.iter()
        .map(|row| row.iter().enumerate().filter(|(_, v)| **v <= eps).fold(0u64, |m, (j, _)| m | (1 << j)))
        .collect()
}

/// Greedy cover: repeatedly take the member whose ball covers most of what
/// is still uncovered.
pub fn covering_number_greedy(class: &FunctionClass, norm: &Seminorm, eps: f64) -> usize {
    let d = distances(class, norm);
    let n = class.len();
    let mut covered = vec![false; n];
    let mut count = 0;
    while covered.iter().any(|c| !c) {
        let best = (0..n)
            .max_by_key(|i| (d[*i].iter().zip(&covered).filter(|(v, c)| **v <= eps && !**c).count(), std::cmp::Reverse(*i)))
            .expect("non-empty class");
        for j in 0..n {
            if d[best][j] <= eps {
                covered[j] = true;
            }
        }
        count += 1;
    }
    count
}

/// Covering number at radius `eps`: exact (smallest set of centres) for
/// classes of at most 16 members, greedy above that.
pub fn covering_number(class: &FunctionClass, norm: &Seminorm, eps: f64) -> usize {
    let n = class.len();
    if n > 16 {
        return covering_number_greedy(class, norm, eps);
    }
    let balls = ball_masks(&distances(class, norm), eps);
    let full = (1u64 << n) - 1;
    let mut best = n;
    for centres in 1u64..(1 << n) {
        let k = centres.count_ones() as usize;
        if k >= best {
            continue;
        }
        let mut cover = 0u64;
        let mut c = centres;
        while c != 0 {
            cover |= balls[c.trailing_zeros() as usize];
            c &= c - 1;
        }
        if cover == full {
            best = k;
        }
    }
    best
}

/// `int_0^delta sqrt(log N(eps)) d eps` by the trapezoid rule on a
/// log-spaced grid from `delta * 1e-6`; the piece below the grid uses the
/// value at its left end.
pub fn entropy_integral(class: &FunctionClass, norm: &Seminorm, delta: f64) -> f64 {
    const POINTS: usize = 200;
    if !(delta > 0.0) {
        return 0.0;
    }
    let lo = delta * 1e-6;
    let ratio = (delta / lo).ln() / (POINTS - 1) as f64;
    let grid: Vec<f64> = (0..POINTS).map(|i| lo * (ratio * i as f64).exp()).collect();
    let h: Vec<f64> = grid.iter().map(|e| (covering_number(class, norm, *e) as f64).ln().sqrt()).collect();
    let mut acc = lo * h[0];
    for i in 1..POINTS {
        acc += 0.5 * (h[i] + h[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}
