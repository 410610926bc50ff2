//! End-to-end acceptance checks, grouped into suites. Every check is
//! seeded from the master seed and the criterion id, so a suite report is
//! reproducible bit for bit regardless of the worker count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::chaining::{
    self, gamma_exact, gamma_greedy, level_cap, sequence_value, FunctionClass, NormFamily, PartitionSequence,
    Seminorm,
};
use crate::coupling::{self, BernsteinConfig, CouplingConfig, StrongApproxConfig, TailStatus};
use crate::error::{Error, Result};
use crate::grid;
use crate::mixing::MixingProfile;
use crate::norms::{self, QuantileCurve};
use crate::processes::{self, ProcessModel, TestClass, TestFn};
use crate::rates::{self, EnvelopeCase};
use crate::report::{CriterionResult, ExperimentReport, Status};
use crate::seed::{self, Purpose};
use crate::stats;

pub const SUITES: &[&str] = &["grid", "norms", "rates", "chaining", "coupling", "all"];

/// Criterion ids run by a suite.
pub fn suite_criteria(name: &str) -> Result<Vec<u32>> {
    Ok(match name {
        "grid" => vec![1, 2],
        "norms" => vec![3, 6, 13],
        "rates" => vec![4, 5],
        "chaining" => vec![7, 8],
        "coupling" => vec![9, 10, 11, 12, 14],
        "all" => (1..=14).collect(),
        _ => {
            return Err(Error::UnknownSuite {
                name: name.to_string(),
                available: SUITES.join(", "),
            })
        }
    })
}

/// Run every criterion of a suite and collect the results.
pub fn verify_suite(name: &str, seed: u64, workers: usize) -> Result<ExperimentReport> {
    let ids = suite_criteria(name)?;
    let criteria = ids.into_iter().map(|id| run_criterion(id, seed, workers)).collect::<Result<Vec<_>>>()?;
    suite_report(name, seed, criteria)
}

/// Wrap criterion results into the suite report.
pub fn suite_report(name: &str, seed: u64, criteria: Vec<CriterionResult>) -> Result<ExperimentReport> {
    let passed = criteria.iter().filter(|c| c.status == Status::Pass).count();
    let results = json!({ "passed": passed, "total": criteria.len() });
    let mut report = ExperimentReport::new("verify", &json!({ "suite": name, "seed": seed }), &results)?;
    report.criteria = criteria;
    Ok(report)
}

pub fn run_criterion(id: u32, seed: u64, workers: usize) -> Result<CriterionResult> {
    let s = seed::derive(seed, id as u64);
    let workers = workers.max(1);
    let (name, (ok, summary, details)) = match id {
        1 => ("lattice gap", lattice_gap()?),
        2 => ("schedule correctness", schedule_correctness()?),
        3 => ("mu_q sandwich", mu_sandwich()?),
        4 => ("B_r envelopes", br_envelopes()?),
        5 => ("rate regimes", rate_regimes()?),
        6 => ("iid norm identity", iid_norm_identity(s)?),
        7 => ("gamma oracle", gamma_oracle(s)?),
        8 => ("chain identity", chain_identity(s)?),
        9 => ("half-normal calibration", half_normal(s, workers)?),
        10 => ("coupling exactness", coupling_exactness(s, workers)?),
        11 => ("block independence", block_independence(s, workers)?),
        12 => ("bernstein tail", bernstein_tail(s, workers)?),
        13 => ("variance bound", variance_bound()?),
        14 => ("strong approximation trend", strong_approximation(s, workers)?),
        _ => return Err(crate::error::invalid(format!("no criterion {id}; ids run 1..=14"))),
    };
    Ok(CriterionResult {
        id,
        name: name.to_string(),
        status: Status::from_bool(ok),
        summary,
        details: crate::report::to_value(&details)?,
    })
}

type Outcome = (bool, String, serde_json::Value);

fn rng(seed: u64) -> ChaCha8Rng {
    seed::rng_for(seed, Purpose::Experiment, 0)
}

fn lattice_gap() -> Result<Outcome> {
    let members = grid::lattice_members(grid::DEFAULT_BASIS_SIZE, 1_000_000)?;
    let mut pairs = 0usize;
    let mut violations = Vec::new();
    for &n in &members {
        let chain = grid::divisor_chain(n)?;
        pairs += chain.divisors.len() - 1;
        if let Some(v) = chain.gap_violation {
            violations.push(json!({ "n": n, "pair": [v.0, v.1] }));
        }
    }
    let ok = violations.is_empty();
    Ok((
        ok,
        format!("{} lattice members up to 1e6, {pairs} consecutive divisor pairs, {} violations", members.len(), violations.len()),
        json!({ "members": members.len(), "pairs": pairs, "violations": violations }),
    ))
}

fn smallest_divisor_at_least(n: u64, pred: impl Fn(u64) -> bool) -> u64 {
    grid::divisors(n).into_iter().find(|d| pred(*d)).unwrap_or(n)
}

fn schedule_correctness() -> Result<Outcome> {
    let members = grid::lattice_members(grid::DEFAULT_BASIS_SIZE, 1_000_000)?;
    let picks: Vec<u64> = (0..50).map(|i| members[i * (members.len() - 1) / 49]).collect();
    let mut failures = Vec::new();
    let shapes = [
        MixingProfile::Iid,
        MixingProfile::m_dependent(3)?,
        MixingProfile::polynomial(0.5)?,
        MixingProfile::polynomial(2.0)?,
        MixingProfile::exponential(0.9)?,
    ];
    for &n in &picks {
        let iid = grid::block_schedule(n, &MixingProfile::Iid)?;
        if iid.q_seq.iter().any(|q| *q != 1) {
            failures.push(json!({ "n": n, "check": "iid", "q_seq": iid.q_seq }));
        }
        let quarter = smallest_divisor_at_least(n, |d| 4 * d >= n);
        for m in [n.div_ceil(4), n / 2, n] {
            let q0 = grid::block_schedule(n, &MixingProfile::m_dependent(m)?)?.q(0);
            if q0 != quarter {
                failures.push(json!({ "n": n, "m": m, "check": "quarter", "q0": q0, "want": quarter }));
            }
        }
        for m in [2u64, 3, 7] {
            let q0 = grid::block_schedule(n, &MixingProfile::m_dependent(m)?)?.q(0);
            let want = smallest_divisor_at_least(n, |d| d >= m || 4 * d >= n);
            if q0 != want {
                failures.push(json!({ "n": n, "m": m, "check": "min(m, n/4)", "q0": q0, "want": want }));
            }
        }
        for p in &shapes {
            let s = grid::block_schedule(n, p)?;
            if s.q_seq.windows(2).any(|w| w[1] > w[0]) {
                failures.push(json!({ "n": n, "profile": p.to_string(), "check": "monotone", "q_seq": s.q_seq }));
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!("50 lattice n from {} to {}; {} failures", picks[0], picks[49], failures.len()),
        json!({ "n": picks, "failures": failures }),
    ))
}

fn mu_sandwich() -> Result<Outcome> {
    let profiles =
        [MixingProfile::Iid, MixingProfile::m_dependent(5)?, MixingProfile::polynomial(1.0)?, MixingProfile::exponential(0.5)?];
    let mut checked = 0usize;
    let mut violations = Vec::new();
    for p in &profiles {
        for q in [1u64, 10, 100, 1000] {
            for j in 1..=1000 {
                let u = (j as f64 - 0.5) / 2000.0;
                let mu = norms::mu_q(u, q, p)?;
                let inv = p.theta_inverse(2.0 * u)?;
                let lower = inv.min(q + 1);
                let upper = (inv + 1).min(q + 1);
                checked += 1;
                if mu < lower || mu > upper {
                    violations.push(json!({ "profile": p.to_string(), "q": q, "u": u, "mu": mu, "lower": lower, "upper": upper }));
                }
            }
        }
    }
    Ok((
        violations.is_empty(),
        format!("{checked} (profile, q, u) points, {} violations", violations.len()),
        json!({ "points": checked, "grid": "u_j = (j - 1/2)/2000, j = 1..1000", "violations": violations }),
    ))
}

fn log_spaced(max: u64, count: usize) -> Vec<u64> {
    let mut qs: Vec<u64> =
        (0..=count).map(|i| (max as f64).powf(i as f64 / count as f64).round() as u64).collect();
    qs.dedup();
    qs
}

fn br_envelopes() -> Result<Outcome> {
    let cases: [(EnvelopeCase, f64, f64); 11] = [
        (EnvelopeCase::MDependent, 3.0, 4.0),
        (EnvelopeCase::MDependent, 10.0, 3.0),
        (EnvelopeCase::Fast, 3.0, 4.0),
        (EnvelopeCase::Fast, 2.0, 6.0),
        (EnvelopeCase::Critical, 2.0, 4.0),
        (EnvelopeCase::Critical, 1.5, 6.0),
        (EnvelopeCase::Slow, 0.5, 4.0),
        (EnvelopeCase::Slow, 0.45, 6.0),
        (EnvelopeCase::Slow, 0.3, 3.0),
        (EnvelopeCase::Fast, 4.0, 3.0),
        (EnvelopeCase::Slow, 1.0, 4.0),
    ];
    let qs = log_spaced(1_000_000, 60);
    let mut rows = Vec::new();
    let mut ok = true;
    for (case, m, r) in cases {
        let profile = match case {
            EnvelopeCase::MDependent => MixingProfile::m_dependent(m as u64)?,
            _ => MixingProfile::polynomial(m)?,
        };
        let table = norms::BrTable::new(*qs.last().expect("non-empty"), r, &profile)?;
        let mut bad = Vec::new();
        for &q in &qs {
            let b = table.get(q);
            let (lo, up) = rates::closed_form_envelopes(q, m, r, case)?;
            // Both sides coincide in the m-dependent case; allow rounding.
            if b < lo * (1.0 - 1e-12) || b > up * (1.0 + 1e-12) {
                bad.push(json!({ "q": q, "b_r": b, "lower": lo, "upper": up }));
            }
        }
        ok &= bad.is_empty();
        rows.push(json!({ "case": case as u8, "m": m, "r": r, "violations": bad }));
    }
    Ok((ok, format!("{} (case, m, r) settings over {} log-spaced q up to 1e6", rows.len(), qs.len()), json!({ "settings": rows })))
}

fn rate_regimes() -> Result<Outcome> {
    let r = 4.0;
    let slope_of = |m: f64| -> Result<(f64, Vec<rates::RateRow>)> {
        let rows = rates::rate_sweep(1000, 10_000_000, r, &MixingProfile::polynomial(m)?)?;
        let x: Vec<f64> = rows.iter().map(|row| (row.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|row| row.frak_n.ln()).collect();
        Ok((stats::ols_slope(&x, &y), rows))
    };
    let mut checks = Vec::new();
    let mut ok = true;
    for m in [3.0, 4.0] {
        let (slope, rows) = slope_of(m)?;
        let pass = slope.abs() <= 0.05;
        ok &= pass;
        checks.push(json!({ "regime": "fast", "m": m, "points": rows.len(), "slope": slope, "predicted": 0.0, "pass": pass }));
    }
    for m in [0.5, 0.3] {
        let (slope, rows) = slope_of(m)?;
        let predicted = rates::regime_classify(m, r)?.exponent;
        let pass = (slope - predicted).abs() <= 0.05;
        ok &= pass;
        checks.push(json!({ "regime": "slow", "m": m, "points": rows.len(), "slope": slope, "predicted": predicted, "pass": pass }));
    }
    let m = 2.0;
    let (_, rows) = slope_of(m)?;
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|row| row.n >= 100_000)
        .map(|row| row.frak_n / (row.n as f64).ln().powf(1.0 / m))
        .collect();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = hi / lo <= 3.0;
    ok &= pass;
    checks.push(json!({ "regime": "critical", "m": m, "tail_points": ratios.len(), "ratio_min": lo, "ratio_max": hi, "band": hi / lo, "pass": pass }));
    Ok((ok, "log-log slopes of frak_n over lattice n in [1e3, 1e7], r = 4".into(), json!({ "r": r, "checks": checks })))
}

fn random_curve(rng: &mut ChaCha8Rng) -> Result<QuantileCurve> {
    let k = rng.random_range(2..12);
    let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    QuantileCurve::from_discrete(&values, &probs)
}

fn iid_norm_identity(seed: u64) -> Result<Outcome> {
    let mut rng = rng(seed);
    let mut rows = Vec::new();
    let mut identity = true;
    let mut bracket = true;
    for _ in 0..20 {
        let curve = random_curve(&mut rng)?;
        let qn = norms::q_norm(&curve, 10, &MixingProfile::Iid);
        let l2 = curve.l2_norm();
        let rel = (qn - l2).abs() / l2;
        identity &= rel <= 1e-12;
        let inside = l2 <= qn * (1.0 + 1e-12) && qn <= 2f64.sqrt() * l2 * (1.0 + 1e-12);
        bracket &= inside;
        rows.push(json!({ "q_norm": qn, "l2": l2, "ratio": qn / l2, "relative_gap": rel }));
    }
    Ok((
        identity,
        format!(
            "||f||_q = ||f||_L2 within 1e-12 on 20 curves: {}; bracket ||f||_L2 <= ||f||_q <= sqrt(2)||f||_L2: {}",
            if identity { "holds" } else { "does not hold (q-norm integrates Q^2 over (0, 1/2] only)" },
            if bracket { "holds" } else { "fails" }
        ),
        json!({ "curves": rows, "identity_holds": identity, "bracket_holds": bracket }),
    ))
}

fn random_class(rng: &mut ChaCha8Rng, size: usize, points: usize) -> Result<FunctionClass> {
    let members = (0..size).map(|_| (0..points).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let raw: Vec<f64> = (0..points).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    FunctionClass::new(members, raw.iter().map(|w| w / total).collect())
}

fn random_seminorm(rng: &mut ChaCha8Rng) -> Seminorm {
    match rng.random_range(0..5) {
        0 => Seminorm::Lr { r: 1.0 },
        1 => Seminorm::Lr { r: 2.0 },
        2 => Seminorm::Lr { r: 3.0 },
        3 => Seminorm::Sup,
        _ => Seminorm::Q { q: rng.random_range(1..5), profile: MixingProfile::Polynomial { m: 1.0 } },
    }
}

fn random_family(rng: &mut ChaCha8Rng) -> NormFamily {
    NormFamily { levels: (0..3).map(|_| random_seminorm(rng)).collect() }
}

/// All set partitions of `items`.
fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let Some((&first, rest)) = items.split_first() else { return vec![vec![]] };
    let mut out = Vec::new();
    for p in set_partitions(rest) {
        for b in 0..=p.len() {
            let mut q = p.clone();
            if b == p.len() {
                q.push(vec![first]);
            } else {
                q[b].push(first);
            }
            out.push(q);
        }
    }
    out
}

fn refinements(level: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    let mut acc: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for cell in level {
        let parts = set_partitions(cell);
        acc = acc.iter().flat_map(|a| parts.iter().map(move |p| a.iter().chain(p).cloned().collect())).collect();
    }
    acc
}

/// Exhaustive search over chains `whole -> T1 -> T2 -> singletons`. For at
/// most 16 members level 2 may already separate everything, and deeper
/// non-singleton levels can only add non-negative terms.
fn brute_force_gamma(class: &FunctionClass, family: &NormFamily) -> Result<f64> {
    let size = class.len();
    let whole = vec![(0..size).collect::<Vec<_>>()];
    let singletons: Vec<Vec<usize>> = (0..size).map(|i| vec![i]).collect();
    let mut best = f64::INFINITY;
    for t1 in refinements(&whole).into_iter().filter(|t| t.len() <= level_cap(1)) {
        for t2 in refinements(&t1).into_iter().filter(|t| t.len() <= level_cap(2)) {
            let mut levels = vec![whole.clone(), t1.clone(), t2.clone()];
            if t2.len() < size {
                levels.push(singletons.clone());
            }
            best = best.min(sequence_value(class, family, &PartitionSequence::new(size, levels)?));
        }
    }
    Ok(best)
}

fn gamma_oracle(seed: u64) -> Result<Outcome> {
    let mut rng = rng(seed);
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for size in 1..=6 {
        for _ in 0..6 {
            let class = random_class(&mut rng, size, 5)?;
            let family = random_family(&mut rng);
            let exact = gamma_exact(&class, &family)?;
            let brute = brute_force_gamma(&class, &family)?;
            compared += 1;
            if exact.value != brute {
                mismatches.push(json!({ "size": size, "exact": exact.value, "brute_force": brute }));
            }
        }
    }
    let mut below = Vec::new();
    let mut min_margin = f64::INFINITY;
    for _ in 0..100 {
        let class = random_class(&mut rng, 8, 6)?;
        let family = random_family(&mut rng);
        let exact = gamma_exact(&class, &family)?.value;
        let greedy = gamma_greedy(&class, &family, 3)?.value;
        min_margin = min_margin.min(greedy - exact);
        if greedy < exact {
            below.push(json!({ "exact": exact, "greedy": greedy }));
        }
    }
    let ok = mismatches.is_empty() && below.is_empty();
    Ok((
        ok,
        format!("{compared} classes of size 1..6 matched exactly: {}; greedy >= exact on 100 size-8 classes: {}", mismatches.is_empty(), below.is_empty()),
        json!({ "compared": compared, "mismatches": mismatches, "greedy_below_exact": below, "min_greedy_margin": min_margin }),
    ))
}

fn random_sequence(rng: &mut ChaCha8Rng, size: usize) -> Result<PartitionSequence> {
    let mut levels = vec![vec![(0..size).collect::<Vec<_>>()]];
    let mut l = 1;
    loop {
        let prev = levels.last().expect("non-empty");
        if prev.len() == size {
            break;
        }
        let cap = level_cap(l);
        let next: Vec<Vec<usize>> = if cap >= size && rng.random_bool(0.5) {
            (0..size).map(|i| vec![i]).collect()
        } else {
            let mut out = Vec::new();
            for cell in prev {
                let k = rng.random_range(1..=cell.len().min(2));
                let mut blocks = vec![Vec::new(); k];
                for &i in cell {
                    blocks[rng.random_range(0..k)].push(i);
                }
                out.extend(blocks.into_iter().filter(|b| !b.is_empty()));
            }
            if out.len() > cap {
                prev.clone()
            } else {
                out
            }
        };
        levels.push(next);
        l += 1;
    }
    PartitionSequence::new(size, levels)
}

fn chain_identity(seed: u64) -> Result<Outcome> {
    let mut rng = rng(seed);
    let profiles = [
        MixingProfile::Iid,
        MixingProfile::m_dependent(2)?,
        MixingProfile::polynomial(1.0)?,
        MixingProfile::exponential(0.5)?,
    ];
    let ns = [6u64, 12, 18, 24, 36, 48, 96, 384, 1536];
    let mut worst = 0.0f64;
    let mut binding = 0;
    for _ in 0..100 {
        let size = rng.random_range(2..=8);
        let points = rng.random_range(3..=10);
        let mut class = random_class(&mut rng, size, points)?;
        // A light point carrying a large spike makes thresholds bind.
        if rng.random_bool(0.5) {
            let x = rng.random_range(0..points);
            for m in class.members.iter_mut() {
                m[x] *= rng.random_range(5.0..50.0);
            }
            let mut w = class.weights.clone();
            w[x] *= 0.01;
            let total: f64 = w.iter().sum();
            class = FunctionClass::new(class.members, w.iter().map(|v| v / total).collect())?;
        }
        let seq = random_sequence(&mut rng, size)?;
        let profile = &profiles[rng.random_range(0..profiles.len())];
        let n = ns[rng.random_range(0..ns.len())];
        let schedule = grid::block_schedule(n, profile)?;
        let f = rng.random_range(0..size);
        let f0 = rng.random_range(0..size);
        let d = chaining::chain_decomposition(&class, f, f0, &seq, &schedule)?;
        worst = worst.max(d.residual);
        if d.stop.iter().any(Option::is_some) {
            binding += 1;
        }
    }
    let ok = worst < 1e-12 && binding >= 10;
    Ok((
        ok,
        format!("100 random tuples, {binding} with a binding threshold, worst residual {worst:e}"),
        json!({ "tuples": 100, "binding": binding, "max_residual": worst }),
    ))
}

fn half_normal(seed: u64, workers: usize) -> Result<Outcome> {
    let model = ProcessModel::Iid { sd: 1.0 };
    let class = TestClass::builtin("identity")?;
    let (n, reps) = (384, 2000);
    let abs: Vec<f64> = seed::replicate(workers, reps, |r| {
        let mut rng = seed::rng_for(seed, Purpose::Path, r as u64);
        let path = processes::simulate_with(&model, n, 0, seed, &mut rng).expect("valid model");
        processes::empirical_process(path.values(), &class, &[0.0])[0].abs()
    });
    let est = stats::mean_se(&abs);
    let want = (2.0 / std::f64::consts::PI).sqrt();
    let z = (est.value - want) / est.std_error;
    Ok((
        z.abs() <= 3.0,
        format!("mean |G_n| = {:.4} +- {:.4} vs sqrt(2/pi) = {want:.4} ({z:.2} SE)", est.value, est.std_error),
        json!({ "n": n, "reps": reps, "estimate": est, "target": want, "z": z }),
    ))
}

fn coupling_exactness(seed: u64, workers: usize) -> Result<Outcome> {
    let lip = TestClass::builtin("lipschitz5")?;
    let n = 1536;
    let mut exact_rows = Vec::new();
    let mut exact_ok = true;
    for (i, model) in [ProcessModel::Iid { sd: 1.0 }, ProcessModel::moving_average(3)].into_iter().enumerate() {
        let rep = coupling::coupling_experiment(&CouplingConfig {
            model: model.clone(),
            class: lip.clone(),
            n,
            qs: vec![6, 12],
            reps: 50,
            seed: seed::derive(seed, i as u64),
            workers,
            tau_reps: None,
        })?;
        for row in &rep.rows {
            exact_ok &= row.max_gap == 0.0;
            exact_rows.push(json!({ "model": rep.model, "q": row.q, "max_gap": row.max_gap }));
        }
    }
    let rho: f64 = 0.9;
    let ar = coupling::coupling_experiment(&CouplingConfig {
        model: ProcessModel::Ar1 { rho, sd: 1.0 },
        class: lip,
        n,
        qs: vec![8, 16, 32],
        reps: 200,
        seed: seed::derive(seed, 2),
        workers,
        tau_reps: Some((400, 100)),
    })?;
    let decreasing = ar.rows.windows(2).all(|w| w[1].mean_gap.value < w[0].mean_gap.value);
    let slope = ar.log_gap_slope.unwrap_or(f64::NAN);
    let slope_ok = (slope / rho.ln() - 1.0).abs() <= 0.3;
    let ok = exact_ok && decreasing && slope_ok;
    Ok((
        ok,
        format!(
            "zero gap for iid and ma(3): {exact_ok}; ar1(0.9) mean gap decreasing: {decreasing}; log-gap slope {slope:.4} vs log 0.9 = {:.4}",
            rho.ln()
        ),
        json!({ "exact": exact_rows, "ar1": ar, "slope_target": rho.ln(), "slope_ok": slope_ok, "decreasing": decreasing }),
    ))
}

fn block_independence(seed: u64, workers: usize) -> Result<Outcome> {
    let model = ProcessModel::Ar1 { rho: 0.9, sd: 1.0 };
    let n = 1536;
    let replica = coupling::independence_experiment(&model, n, 8, 200, true, seed, workers)?;
    let raw = coupling::independence_experiment(&model, n, 2, 200, false, seed::derive(seed, 1), workers)?;
    let ks = coupling::replica_marginal_ks(&model, n, 8, 1000, seed::derive(seed, 2), workers)?;
    let ok = replica.pass && !raw.pass;
    Ok((
        ok,
        format!(
            "replica q=8 max |corr| {:.4} < {:.4}: {}; raw q=2 max |corr| {:.4} fails as expected: {}",
            replica.max_abs_corr,
            replica.threshold,
            replica.pass,
            raw.max_abs_corr,
            !raw.pass
        ),
        json!({ "replica": replica, "raw_control": raw, "marginal_ks": ks }),
    ))
}

fn bernstein_tail(seed: u64, workers: usize) -> Result<Outcome> {
    let rep = coupling::bernstein_check(&BernsteinConfig {
        model: ProcessModel::Ar1 { rho: 0.5, sd: 1.0 },
        f: TestFn::Sin { omega: 1.0, phi: 0.0 },
        n: 1536,
        q: 8,
        profile: MixingProfile::exponential(0.5)?,
        us: vec![1.0, 1.5, 2.0],
        ks: vec![2, 3],
        reps: 5000,
        seed,
        workers,
        norm_sample: 200_000,
    })?;
    let failed: Vec<String> =
        rep.checks.iter().filter(|c| c.status == TailStatus::Fail).map(|c| format!("(u={}, k={})", c.u, c.k)).collect();
    let inapplicable = rep.checks.iter().filter(|c| c.status == TailStatus::Inapplicable).count();
    let ok = failed.is_empty();
    let summary = if ok {
        format!("all applicable (u, k) pass; {inapplicable} inapplicable")
    } else {
        format!(
            "UCL above 2exp(-u 2^k) at {}; with 5000 reps the smallest attainable UCL is {:.2e}",
            failed.join(", "),
            stats::clopper_pearson_upper(0, 5000, 0.95)
        )
    };
    Ok((ok, summary, serde_json::to_value(&rep)?))
}

/// Lower step approximation of the quantile curve of `|X|`, `X ~ N(0, v)`:
/// atoms at `Q((i+1)/N)`, each with mass `1/N`.
fn gaussian_abs_curve(v: f64, atoms: usize) -> Result<QuantileCurve> {
    let values: Vec<f64> =
        (1..=atoms).map(|i| v.sqrt() * stats::normal_quantile(1.0 - i as f64 / (2.0 * atoms as f64)).max(0.0)).collect();
    QuantileCurve::from_discrete(&values, &vec![1.0 / atoms as f64; atoms])
}

fn variance_bound() -> Result<Outcome> {
    let f = TestFn::Linear { slope: 1.0, intercept: 0.0 };
    let mut rows = Vec::new();
    let mut ok = true;
    let mut sharp = true;
    for rho in [0.5, 0.9] {
        let model = ProcessModel::Ar1 { rho, sd: 1.0 };
        let profile = model.calibrated_profile();
        let curve = gaussian_abs_curve(model.gaussian_variance().expect("gaussian"), 20_000)?;
        for q in [4u64, 8, 16, 32] {
            let s2 = norms::analytic_sigma2(&f, q, &model).expect("linear f");
            let qn = norms::q_norm(&curve, q, &profile);
            let pass = s2 * s2 <= 2.0 * qn * qn;
            ok &= pass;
            sharp &= s2 <= qn;
            rows.push(json!({ "rho": rho, "q": q, "sigma2": s2, "q_norm": qn, "ratio_sq": s2 * s2 / (qn * qn), "pass": pass }));
        }
    }
    Ok((
        ok,
        format!("sigma_2^2 <= 2||f||_q^2 on AR(1) rho in {{0.5, 0.9}}, q in {{4, 8, 16, 32}}: {ok}; sharper sigma_2 <= ||f||_q: {sharp}"),
        json!({ "rows": rows, "sharper_holds": sharp, "curve": "lower step approximation with 20000 atoms" }),
    ))
}

fn strong_approximation(seed: u64, workers: usize) -> Result<Outcome> {
    let rep = coupling::strong_approx_experiment(&StrongApproxConfig {
        model: ProcessModel::Ar1 { rho: 0.5, sd: 1.0 },
        class: TestClass::builtin("lipschitz4")?,
        n_grid: vec![384, 1536, 6144],
        qs: None,
        gamma: f64::INFINITY,
        reps: 1000,
        seed,
        workers,
        tau_reps: (500, 200),
        moment_reps: 2000,
        rate_m: None,
    })?;
    let ok = rep.non_increasing && rep.below_rhs;
    let gaps: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.gap.value)).collect();
    let consts: Vec<String> = rep.rows.iter().map(|r| format!("{:.3}", r.implied_constant)).collect();
    Ok((
        ok,
        format!(
            "E sup|G_n - Z_n| = [{}] non-increasing: {}; below right side: {} (implied constants [{}])",
            gaps.join(", "),
            rep.non_increasing,
            rep.below_rhs,
            consts.join(", ")
        ),
        serde_json::to_value(&rep)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_lists_available() {
        match suite_criteria("nope") {
            Err(Error::UnknownSuite { available, .. }) => assert!(available.contains("coupling")),
            other => panic!("{other:?}"),
        }
        assert_eq!(suite_criteria("all").unwrap().len(), 14);
    }

    #[test]
    fn brute_force_matches_pair_formula() {
        let class = FunctionClass::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let fam = NormFamily::constant(Seminorm::Sup);
        assert_eq!(brute_force_gamma(&class, &fam).unwrap(), 2f64.sqrt() * 2.0);
    }

    #[test]
    fn gaussian_curve_approaches_l2() {
        let c = gaussian_abs_curve(4.0, 20_000).unwrap();
        let l2 = c.l2_norm();
        assert!(l2 < 2.0 && l2 > 1.98, "{l2}");
    }
}
