//! Block-independent replicas, coupling gaps, the Bernstein tail check and
//! the Gaussian strong-approximation experiment.
//!
//! Replica block `j` (times `qj+1..=qj+q`) is produced by starting the model
//! afresh at time `q(j-1)` from an independent stationary state and driving
//! it with the path's own innovations through blocks `j-1` and `j`. Block `j`
//! therefore depends only on its own fresh state and on the innovations in
//! `(q(j-1), qj+q]`, so blocks of the same parity use disjoint randomness.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::DivisorChain;
use crate::mixing::{self, MixingProfile};
use crate::norms::{self, QuantileCurve};
use crate::processes::{self, PathBundle, ProcessModel, TestClass, TestFn};
use crate::rates;
use crate::seed::{self, Purpose};
use crate::stats::{self, Estimate};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaPath {
    pub base: PathBundle,
    pub q: usize,
    /// `X*_1..X*_n`.
    pub values: Vec<f64>,
    /// Fresh state each block was started from: the stationary draw for
    /// Markov models, the fresh innovation window for moving averages.
    pub lead_in: Vec<Vec<f64>>,
}

impl ReplicaPath {
    pub fn blocks(&self) -> usize {
        self.values.len() / self.q
    }
}

fn check_block(n: usize, q: usize) -> Result<()> {
    if q == 0 || n % q != 0 {
        return Err(Error::NotADivisor { n: n as u64, q: q as u64 });
    }
    Ok(())
}

/// Build the block-independent replica of `path` for block length `q`.
/// The path must carry at least `q` pre-sample points.
pub fn build_replica(path: &PathBundle, q: usize, seed: u64) -> Result<ReplicaPath> {
    check_block(path.n, q)?;
    if path.lead < q {
        return Err(invalid(format!(
            "replica for q={q} needs a path simulated with at least {q} pre-sample points, got {}",
            path.lead
        )));
    }
    let model = &path.model;
    let blocks = path.n / q;
    let mut values = Vec::with_capacity(path.n);
    let mut lead_in = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let mut rng = seed::rng_for(seed, Purpose::Replica, j as u64);
        let t0 = (q * j) as i64 - q as i64;
        let block_start = (q * j) as i64;
        match model {
            ProcessModel::MovingAverage { weights, sd } => {
                let memory = weights.len() - 1;
                let fresh: Vec<f64> = (0..memory).map(|_| model.innovation(&mut rng)).collect();
                // Innovation at time t: fresh before t0 + 1, stored afterwards.
                let inn = |t: i64| -> f64 {
                    if t > t0 {
                        path.innovation_at(t)
                    } else {
                        fresh[(memory as i64 - 1 - (t0 - t)) as usize]
                    }
                };
                for t in block_start + 1..=block_start + q as i64 {
                    let window: Vec<f64> = (t - memory as i64..=t).map(inn).collect();
                    values.push(ProcessModel::ma_value(weights, *sd, &window));
                }
                lead_in.push(fresh);
            }
            _ => {
                let start = model.stationary_draw(&mut rng);
                let mut x = start;
                for t in t0 + 1..=block_start + q as i64 {
                    x = model.step(x, path.innovation_at(t));
                    if t > block_start {
                        values.push(x);
                    }
                }
                lead_in.push(vec![start]);
            }
        }
    }
    Ok(ReplicaPath { base: path.clone(), q, values, lead_in })
}

/// Centred sums of `f` over consecutive blocks of length `q`.
pub fn block_sums(values: &[f64], q: usize, f: &TestFn, mean: f64) -> Vec<f64> {
    values.chunks_exact(q).map(|b| b.iter().map(|x| f.eval(*x) - mean).sum()).collect()
}

/// `sup_f |G_n[f] - G*_n[f]|` over the finite class.
pub fn coupling_gap(path: &PathBundle, replica: &ReplicaPath, class: &TestClass, means: &[f64]) -> f64 {
    let g = processes::empirical_process(path.values(), class, means);
    let g_star = processes::empirical_process(&replica.values, class, means);
    g.iter().zip(&g_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `tau_F(q)` on the class itself (not the unit cone): zero where the model
/// makes `X_0` independent of `X_{-q}`, nested Monte Carlo for Markov models.
pub fn class_tau(
    model: &ProcessModel,
    class: &TestClass,
    q: u64,
    outer: usize,
    inner: usize,
    seed: u64,
    workers: usize,
) -> Result<Estimate> {
    match model {
        ProcessModel::Iid { .. } => return Ok(Estimate::exact(0.0)),
        ProcessModel::MovingAverage { weights, .. } if q as usize >= weights.len() => return Ok(Estimate::exact(0.0)),
        _ => {}
    }
    let est = mixing::estimate_tau(model, class, q, outer, inner, seed, workers)?;
    let env = class.envelope();
    let scale = if env.is_finite() && env > 0.0 { env } else { 1.0 };
    Ok(Estimate { value: est.value * scale, std_error: est.std_error * scale })
}

fn simulate_rep(model: &ProcessModel, n: usize, lead: usize, seed: u64, rep: usize) -> PathBundle {
    let mut rng: ChaCha8Rng = seed::rng_for(seed, Purpose::Path, rep as u64);
    processes::simulate_with(model, n, lead, seed, &mut rng).expect("validated model")
}

fn replica_seed(seed: u64, rep: usize) -> u64 {
    seed::derive(seed, rep as u64)
}

#[derive(Debug, Clone)]
pub struct CouplingConfig {
    pub model: ProcessModel,
    pub class: TestClass,
    pub n: usize,
    pub qs: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    /// Outer and inner replications for the tau estimate; `None` skips it.
    pub tau_reps: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRow {
    pub q: usize,
    pub mean_gap: Estimate,
    pub median_gap: f64,
    pub max_gap: f64,
    pub tau: Option<Estimate>,
    /// `sqrt(n) tau(q)`.
    pub tau_bound: Option<f64>,
    /// `mean_gap / tau_bound`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub model: String,
    pub class: String,
    pub n: usize,
    pub reps: usize,
    pub rows: Vec<CouplingRow>,
    /// OLS slope of `log(mean gap)` against `q`; absent when a gap is zero.
    pub log_gap_slope: Option<f64>,
}

pub fn coupling_experiment(cfg: &CouplingConfig) -> Result<CouplingReport> {
    cfg.model.validate()?;
    if cfg.qs.is_empty() || cfg.reps < 2 {
        return Err(invalid("need at least one q and reps >= 2"));
    }
    for &q in &cfg.qs {
        check_block(cfg.n, q)?;
    }
    let means = processes::class_means(&cfg.model, &cfg.class)?;
    let lead = *cfg.qs.iter().max().expect("non-empty");
    let gaps: Vec<Vec<f64>> = seed::replicate(cfg.workers, cfg.reps, |r| {
        let path = simulate_rep(&cfg.model, cfg.n, lead, cfg.seed, r);
        cfg.qs
            .iter()
            .map(|&q| {
                let rep = build_replica(&path, q, replica_seed(cfg.seed, r)).expect("checked block length");
                coupling_gap(&path, &rep, &cfg.class, &means)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(cfg.qs.len());
    for (i, &q) in cfg.qs.iter().enumerate() {
        let mut g: Vec<f64> = gaps.iter().map(|v| v[i]).collect();
        let mean_gap = stats::mean_se(&g);
        g.sort_by(f64::total_cmp);
        let tau = match cfg.tau_reps {
            Some((outer, inner)) => Some(class_tau(
                &cfg.model,
                &cfg.class,
                q as u64,
                outer,
                inner,
                seed::derive(cfg.seed, 1000 + q as u64),
                cfg.workers,
            )?),
            None => None,
        };
        let tau_bound = tau.map(|t| (cfg.n as f64).sqrt() * t.value);
        let ratio = tau_bound.map(|b| if b > 0.0 { mean_gap.value / b } else if mean_gap.value == 0.0 { 0.0 } else { f64::INFINITY });
        rows.push(CouplingRow {
            q,
            mean_gap,
            median_gap: stats::quantile_sorted(&g, 0.5),
            max_gap: *g.last().expect("reps >= 2"),
            tau,
            tau_bound,
            ratio,
        });
    }
    let log_gap_slope = if rows.len() >= 2 && rows.iter().all(|r| r.mean_gap.value > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.q as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_gap.value.ln()).collect();
        Some(stats::ols_slope(&x, &y))
    } else {
        None
    };
    Ok(CouplingReport {
        model: cfg.model.to_string(),
        class: cfg.class.name.clone(),
        n: cfg.n,
        reps: cfg.reps,
        rows,
        log_gap_slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub q: usize,
    pub pairs_even: usize,
    pub pairs_odd: usize,
    pub corr_even: f64,
    pub corr_odd: f64,
    pub max_abs_corr: f64,
    /// `3 / sqrt(pairs)` with the smaller family's pair count.
    pub threshold: f64,
    pub pass: bool,
}

/// Correlation test on adjacent same-parity block sums `(S_j, S_{j+2})`,
/// pooled over all series. Each parity family is tested against
/// `3 / sqrt(#pairs)` and both must pass.
pub fn block_independence_test(series: &[Vec<f64>], q: usize) -> Result<IndependenceReport> {
    if q == 0 {
        return Err(invalid("block length must be positive"));
    }
    let id = TestFn::Linear { slope: 1.0, intercept: 0.0 };
    let sums: Vec<Vec<f64>> = series.iter().map(|s| block_sums(s, q, &id, 0.0)).collect();
    let even_blocks: usize = sums.iter().map(|s| s.len().div_ceil(2)).sum();
    if even_blocks < 30 {
        return Err(invalid(format!("independence test needs at least 30 even blocks, got {even_blocks}")));
    }
    let family = |parity: usize| {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in &sums {
            let mut j = parity;
            while j + 2 < s.len() {
                a.push(s[j]);
                b.push(s[j + 2]);
                j += 2;
            }
        }
        (stats::correlation(&a, &b), a.len())
    };
    let (corr_even, pairs_even) = family(0);
    let (corr_odd, pairs_odd) = family(1);
    let pairs = pairs_even.min(pairs_odd);
    if pairs < 2 {
        return Err(invalid("too few block pairs for the independence test"));
    }
    let threshold = 3.0 / (pairs as f64).sqrt();
    let pass_even = corr_even.abs() < 3.0 / (pairs_even as f64).sqrt();
    let pass_odd = corr_odd.abs() < 3.0 / (pairs_odd as f64).sqrt();
    Ok(IndependenceReport {
        q,
        pairs_even,
        pairs_odd,
        corr_even,
        corr_odd,
        max_abs_corr: corr_even.abs().max(corr_odd.abs()),
        threshold,
        pass: pass_even && pass_odd,
    })
}

/// Simulate `reps` paths and run the independence test on their replicas
/// (`replica = true`) or on the raw paths.
#[allow(clippy::too_many_arguments)]
pub fn independence_experiment(
    model: &ProcessModel,
    n: usize,
    q: usize,
    reps: usize,
    replica: bool,
    seed: u64,
    workers: usize,
) -> Result<IndependenceReport> {
    model.validate()?;
    check_block(n, q)?;
    let series = seed::replicate(workers, reps, |r| {
        let path = simulate_rep(model, n, q, seed, r);
        if replica {
            build_replica(&path, q, replica_seed(seed, r)).expect("checked block length").values
        } else {
            path.values().to_vec()
        }
    });
    block_independence_test(&series, q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalKs {
    pub coordinate: usize,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Two-sample KS distance between `X_t` and `X*_t` across replications at
/// the first, a middle and the last coordinate.
pub fn replica_marginal_ks(
    model: &ProcessModel,
    n: usize,
    q: usize,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<MarginalKs>> {
    model.validate()?;
    check_block(n, q)?;
    let coords = [0, n / 2, n - 1];
    let pairs: Vec<Vec<(f64, f64)>> = seed::replicate(workers, reps, |r| {
        let path = simulate_rep(model, n, q, seed, r);
        let rep = build_replica(&path, q, replica_seed(seed, r)).expect("checked block length");
        coords.iter().map(|&c| (path.values()[c], rep.values[c])).collect()
    });
    let critical = stats::ks_critical_05(reps, reps);
    Ok(coords
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let a: Vec<f64> = pairs.iter().map(|p| p[i].0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p[i].1).collect();
            let statistic = stats::ks_statistic(&a, &b);
            MarginalKs { coordinate: c + 1, statistic, critical, pass: statistic < critical }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct BernsteinConfig {
    pub model: ProcessModel,
    pub f: TestFn,
    pub n: usize,
    pub q: usize,
    pub profile: MixingProfile,
    pub us: Vec<f64>,
    pub ks: Vec<u32>,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    /// Stationary draws used for the empirical quantile curve of `|f - E f|`.
    pub norm_sample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailStatus {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheck {
    pub u: f64,
    pub k: u32,
    /// `u sqrt(2^k) b 16/3`.
    pub threshold: f64,
    /// `2 exp(-u 2^k)`.
    pub bound: f64,
    /// Largest `||f||_inf` the truncation step allows: `2 sqrt(n) b / (q sqrt(2^k))`.
    pub sup_limit: f64,
    pub exceedances: u64,
    pub frequency: f64,
    /// One-sided 95% Clopper-Pearson upper limit of the frequency.
    pub ucl: f64,
    pub status: TailStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinReport {
    pub model: String,
    pub n: usize,
    pub q: usize,
    pub reps: usize,
    pub profile: String,
    /// `||f - E f||_q` from the empirical quantile curve.
    pub b: f64,
    pub sup_norm: f64,
    pub checks: Vec<TailCheck>,
}

/// Exceedance frequencies of `|G*_n[f]|` on the replica against the
/// Bernstein-type bound `2 exp(-u 2^k)`.
pub fn bernstein_check(cfg: &BernsteinConfig) -> Result<BernsteinReport> {
    cfg.model.validate()?;
    check_block(cfg.n, cfg.q)?;
    if cfg.reps == 0 || cfg.norm_sample < 2 {
        return Err(invalid("need reps >= 1 and norm_sample >= 2"));
    }
    let class = TestClass::new("bernstein", vec![cfg.f])?;
    let mean = processes::class_means(&cfg.model, &class)?[0];
    let mut rng = seed::rng_for(cfg.seed, Purpose::Moment, 0);
    let sample: Vec<f64> = (0..cfg.norm_sample).map(|_| cfg.f.eval(cfg.model.stationary_draw(&mut rng)) - mean).collect();
    let b = norms::q_norm(&QuantileCurve::from_sample(&sample)?, cfg.q as u64, &cfg.profile);
    let sup_norm = cfg.f.sup_norm() + mean.abs();

    let g_star: Vec<f64> = seed::replicate(cfg.workers, cfg.reps, |r| {
        let path = simulate_rep(&cfg.model, cfg.n, cfg.q, cfg.seed, r);
        let rep = build_replica(&path, cfg.q, replica_seed(cfg.seed, r)).expect("checked block length");
        processes::empirical_process(&rep.values, &class, &[mean])[0].abs()
    });
    let n = cfg.n as f64;
    let mut checks = Vec::new();
    for &k in &cfg.ks {
        let scale = 2f64.powi(k as i32).sqrt();
        let sup_limit = 2.0 * n.sqrt() * b / (cfg.q as f64 * scale);
        for &u in &cfg.us {
            let threshold = u * scale * b * 16.0 / 3.0;
            let bound = 2.0 * (-u * 2f64.powi(k as i32)).exp();
            let exceedances = g_star.iter().filter(|g| **g >= threshold).count() as u64;
            let ucl = stats::clopper_pearson_upper(exceedances, cfg.reps as u64, 0.95);
            let status = if sup_norm > sup_limit {
                TailStatus::Inapplicable
            } else if ucl <= bound {
                TailStatus::Pass
            } else {
                TailStatus::Fail
            };
            checks.push(TailCheck {
                u,
                k,
                threshold,
                bound,
                sup_limit,
                exceedances,
                frequency: exceedances as f64 / cfg.reps as f64,
                ucl,
                status,
            });
        }
    }
    Ok(BernsteinReport {
        model: cfg.model.to_string(),
        n: cfg.n,
        q: cfg.q,
        reps: cfg.reps,
        profile: cfg.profile.to_string(),
        b,
        sup_norm,
        checks,
    })
}

/// Gaussian partner of one class member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianCouple {
    pub member: usize,
    pub q: usize,
    /// Estimated `sigma_2(f, q)`: standard deviation of a block sum over `sqrt(q)`.
    pub sigma2: f64,
    /// `Z_n[f]` per replication.
    pub z_draws: Vec<f64>,
    pub method: CoupleMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoupleMethod {
    /// Block sums are exactly `N(0, q sigma2^2)`; `Z_j = S_j / (sigma2 sqrt(q))`.
    Exact,
    /// Pooled rank normal scores.
    Rank,
}

/// Couple the replica block sums of one member (`block_sums[rep][block]`)
/// with Gaussians. Every block sum is mapped to the normal score of its rank
/// in the pooled sample, so `Z_j` is standard normal and monotone in `S_j`;
/// then `Z_n[f] = sigma2 sqrt(q/n) sum_j Z_j`.
pub fn gaussian_couple(block_sums: &[Vec<f64>], member: usize, q: usize) -> Result<GaussianCouple> {
    let blocks = block_sums.first().map_or(0, Vec::len);
    if blocks == 0 || q == 0 || block_sums.iter().any(|b| b.len() != blocks) {
        return Err(invalid("block sums must be a non-empty rectangular table"));
    }
    let pooled: Vec<f64> = block_sums.iter().flatten().copied().collect();
    let total = pooled.len();
    if total < 2 {
        return Err(invalid("need at least two block sums"));
    }
    let sigma2 = stats::variance(&pooled).sqrt() / (q as f64).sqrt();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|a, b| pooled[*a].total_cmp(&pooled[*b]));
    let mut scores = vec![0.0; total];
    for (rank, idx) in order.into_iter().enumerate() {
        scores[idx] = stats::normal_quantile((rank as f64 + 0.5) / total as f64);
    }
    let n = (blocks * q) as f64;
    let z_draws = scores.chunks_exact(blocks).map(|z| sigma2 * (q as f64 / n).sqrt() * z.iter().sum::<f64>()).collect();
    Ok(GaussianCouple { member, q, sigma2, z_draws, method: CoupleMethod::Rank })
}

/// Tail of the coupled difference `D = n^{-1/2} sum_j S_j - Z_n` for one
/// function, on replica block sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSlope {
    pub gamma: f64,
    /// Root mean square of `D` (not centered: the pooled rank coupling can
    /// leave a mean offset); the `t` grid is in these units.
    pub scale: f64,
    pub t_grid: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// OLS slope of `log P(|D| >= t)` against `log t` over grid points with
    /// at least [`TAIL_MIN_EXCEEDANCES`] exceedances.
    pub slope: f64,
    pub slope_se: f64,
    /// `slope - 1.96 se <= -gamma`: no significant evidence of a tail
    /// heavier than `t^{-gamma}`.
    pub pass: bool,
}

pub const TAIL_MIN_EXCEEDANCES: usize = 5;

/// Grid in units of `rms(D)`. A centered Gaussian tail has local log-log slope
/// about `-(t^2 + 1)` here, so orders up to ~5 are distinguishable.
const TAIL_GRID: [f64; 5] = [2.0, 2.25, 2.5, 2.75, 3.0];

/// Polynomial tail check for the block-level Gaussian coupling of `f`:
/// the frequency of `|D| >= t` should fall at least like `t^{-gamma}`
/// when the block sums have a finite `gamma`-th moment.
#[allow(clippy::too_many_arguments)]
pub fn yurinskii_tail(
    model: &ProcessModel,
    f: &TestFn,
    n: usize,
    q: usize,
    gamma: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<TailSlope> {
    model.validate()?;
    check_block(n, q)?;
    if !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(invalid(format!("tail order must be finite and >= 2, got {gamma}")));
    }
    let class = TestClass::new("tail", vec![f.clone()])?;
    let mean = processes::class_means(model, &class)?[0];
    let sums: Vec<Vec<f64>> = seed::replicate(workers, reps, |r| {
        let path = simulate_rep(model, n, q, seed, r);
        let rep = build_replica(&path, q, replica_seed(seed, r)).expect("checked block length");
        block_sums(&rep.values, q, f, mean)
    });
    let couple = gaussian_couple(&sums, 0, q)?;
    let diffs: Vec<f64> =
        sums.iter().zip(&couple.z_draws).map(|(s, z)| s.iter().sum::<f64>() / (n as f64).sqrt() - z).collect();
    let scale = (diffs.iter().map(|d| d * d).sum::<f64>() / reps as f64).sqrt();
    if !(scale > 0.0) {
        return Err(invalid("coupled difference is identically zero"));
    }
    let t_grid: Vec<f64> = TAIL_GRID.iter().map(|c| c * scale).collect();
    let counts: Vec<usize> = t_grid.iter().map(|t| diffs.iter().filter(|d| d.abs() >= *t).count()).collect();
    let frequencies: Vec<f64> = counts.iter().map(|c| *c as f64 / reps as f64).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&counts)
        .filter(|(_, c)| **c >= TAIL_MIN_EXCEEDANCES)
        .map(|(t, c)| (t.ln(), (*c as f64 / reps as f64).ln()))
        .unzip();
    if x.len() < 3 {
        return Err(invalid(format!(
            "only {} tail grid points have {TAIL_MIN_EXCEEDANCES}+ exceedances; increase reps",
            x.len()
        )));
    }
    let slope = stats::ols_slope(&x, &y);
    let (mx, my) = (stats::mean(&x), stats::mean(&y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let slope_se = (rss / (x.len() - 2) as f64 / sxx).sqrt();
    Ok(TailSlope { gamma, scale, t_grid, frequencies, slope, slope_se, pass: slope - 1.96 * slope_se <= -gamma })
}

/// Coupling for block sums with a known Gaussian law `N(0, q sigma2^2)`:
/// `Z_j` is the standardized block sum itself, so replications stay
/// independent and no pooled estimate enters `Z_n`.
pub fn exact_gaussian_couple(block_sums: &[Vec<f64>], member: usize, q: usize, sigma2: f64) -> Result<GaussianCouple> {
    let blocks = block_sums.first().map_or(0, Vec::len);
    if blocks == 0 || q == 0 || block_sums.iter().any(|b| b.len() != blocks) {
        return Err(invalid("block sums must be a non-empty rectangular table"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid(format!("exact coupling needs sigma2 > 0, got {sigma2}")));
    }
    let n = (blocks * q) as f64;
    let z_draws = block_sums.iter().map(|b| b.iter().sum::<f64>() / n.sqrt()).collect();
    Ok(GaussianCouple { member, q, sigma2, z_draws, method: CoupleMethod::Exact })
}

#[derive(Debug, Clone)]
pub struct StrongApproxConfig {
    pub model: ProcessModel,
    pub class: TestClass,
    pub n_grid: Vec<usize>,
    /// Block length per grid point; `None` picks the divisor nearest `sqrt(n)`.
    pub qs: Option<Vec<usize>>,
    /// Moment order `gamma` in `[2, inf]`.
    pub gamma: f64,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub tau_reps: (usize, usize),
    /// Replications for Monte Carlo block moments (finite `gamma`).
    pub moment_reps: usize,
    /// Exponent `m` for the reported `f_m(n)` trend; `None` omits it.
    pub rate_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongApproxRow {
    pub n: usize,
    pub q: usize,
    /// `E sup_f |G_n[f] - Z_n[f]|`.
    pub gap: Estimate,
    pub sigma2: Vec<f64>,
    pub coupling: Vec<CoupleMethod>,
    pub sigma_gamma: Vec<f64>,
    /// `(q/n)^{(gamma-2)/(2 gamma)} sum_f sigma_gamma(f, q)`.
    pub moment_term: f64,
    pub tau: Estimate,
    /// `sqrt(n) tau(q)`.
    pub tau_term: f64,
    /// The class is its own cover, so the chaining terms vanish.
    pub chaining_term: f64,
    pub rhs: f64,
    /// `gap / rhs`: the smallest constant for which the bound holds here.
    pub implied_constant: f64,
    pub strong_rate: Option<f64>,
    /// Largest `|mean(Z) / sd|` and `|var(Z) / sigma2^2 - 1|` over members.
    pub z_mean_dev: f64,
    pub z_var_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongApproxReport {
    pub model: String,
    pub class: String,
    pub gamma: f64,
    pub reps: usize,
    pub rows: Vec<StrongApproxRow>,
    /// Every consecutive pair satisfies `gap_{i+1} - gap_i <= 1.96 sqrt(se_i^2 + se_{i+1}^2)`.
    pub non_increasing: bool,
    /// `gap <= rhs` at every grid point with the constant set to one.
    pub below_rhs: bool,
    /// OLS slope of `log gap` against `log n`.
    pub gap_slope: Option<f64>,
}

pub fn strong_approx_experiment(cfg: &StrongApproxConfig) -> Result<StrongApproxReport> {
    cfg.model.validate()?;
    if !(cfg.gamma >= 2.0) {
        return Err(invalid(format!("gamma must be in [2, inf], got {}", cfg.gamma)));
    }
    if cfg.n_grid.is_empty() || cfg.reps < 2 || cfg.class.is_empty() {
        return Err(invalid("need a non-empty n grid, a non-empty class and reps >= 2"));
    }
    if let Some(qs) = &cfg.qs {
        if qs.len() != cfg.n_grid.len() {
            return Err(invalid("one q per grid point"));
        }
    }
    let means = processes::class_means(&cfg.model, &cfg.class)?;
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let q = match &cfg.qs {
            Some(qs) => qs[gi],
            None => DivisorChain::new(n as u64).nearest((n as f64).sqrt()) as usize,
        };
        check_block(n, q)?;
        let seed = seed::derive(cfg.seed, gi as u64);
        let members = cfg.class.len();
        // Per rep: G_n[f] on the path and the replica block sums of every member.
        let draws: Vec<(Vec<f64>, Vec<Vec<f64>>)> = seed::replicate(cfg.workers, cfg.reps, |r| {
            let path = simulate_rep(&cfg.model, n, q, seed, r);
            let rep = build_replica(&path, q, replica_seed(seed, r)).expect("checked block length");
            let g = processes::empirical_process(path.values(), &cfg.class, &means);
            let sums = cfg.class.members.iter().zip(&means).map(|(f, mu)| block_sums(&rep.values, q, f, *mu)).collect();
            (g, sums)
        });
        let mut couples = Vec::with_capacity(members);
        for i in 0..members {
            let table: Vec<Vec<f64>> = draws.iter().map(|d| d.1[i].clone()).collect();
            let exact = norms::analytic_sigma2(&cfg.class.members[i], q as u64, &cfg.model).filter(|s| *s > 0.0);
            couples.push(match exact {
                Some(s) => exact_gaussian_couple(&table, i, q, s)?,
                None => gaussian_couple(&table, i, q)?,
            });
        }
        let gaps: Vec<f64> = (0..cfg.reps)
            .map(|r| (0..members).map(|i| (draws[r].0[i] - couples[i].z_draws[r]).abs()).fold(0.0, f64::max))
            .collect();
        let gap = stats::mean_se(&gaps);

        let mut sigma_gamma = Vec::with_capacity(members);
        for (i, f) in cfg.class.members.iter().enumerate() {
            let m = norms::sigma_m(f, q as u64, &cfg.model, cfg.gamma, cfg.moment_reps, seed::derive(seed, 100 + i as u64))?;
            sigma_gamma.push(m.value);
        }
        let exponent = if cfg.gamma.is_infinite() { 0.5 } else { (cfg.gamma - 2.0) / (2.0 * cfg.gamma) };
        let moment_term = (q as f64 / n as f64).powf(exponent) * sigma_gamma.iter().sum::<f64>();
        let (outer, inner) = cfg.tau_reps;
        let tau = class_tau(&cfg.model, &cfg.class, q as u64, outer, inner, seed::derive(seed, 200), cfg.workers)?;
        let tau_term = (n as f64).sqrt() * tau.value;
        let rhs = moment_term + tau_term;
        let (mut z_mean_dev, mut z_var_dev) = (0.0f64, 0.0f64);
        for c in &couples {
            if c.sigma2 > 0.0 {
                let var = stats::variance(&c.z_draws);
                z_mean_dev = z_mean_dev.max((stats::mean(&c.z_draws) / var.sqrt()).abs());
                z_var_dev = z_var_dev.max((var / (c.sigma2 * c.sigma2) - 1.0).abs());
            }
        }
        rows.push(StrongApproxRow {
            n,
            q,
            gap,
            sigma2: couples.iter().map(|c| c.sigma2).collect(),
            coupling: couples.iter().map(|c| c.method).collect(),
            sigma_gamma,
            moment_term,
            tau,
            tau_term,
            chaining_term: 0.0,
            rhs,
            implied_constant: if rhs > 0.0 { gap.value / rhs } else { 0.0 },
            strong_rate: cfg.rate_m.map(|m| rates::strong_rate(n as f64, m)).transpose()?,
            z_mean_dev,
            z_var_dev,
        });
    }
    let non_increasing = rows.windows(2).all(|w| {
        let (a, b) = (&w[0].gap, &w[1].gap);
        b.value - a.value <= 1.96 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
    });
    let below_rhs = rows.iter().all(|r| r.gap.value <= r.rhs);
    let gap_slope = if rows.len() >= 2 && rows.iter().all(|r| r.gap.value > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.gap.value.ln()).collect();
        Some(stats::ols_slope(&x, &y))
    } else {
        None
    };
    Ok(StrongApproxReport {
        model: cfg.model.to_string(),
        class: cfg.class.name.clone(),
        gamma: cfg.gamma,
        reps: cfg.reps,
        rows,
        non_increasing,
        below_rhs,
        gap_slope,
    })
}
