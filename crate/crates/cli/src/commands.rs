//! Subcommand arguments and handlers. Every argument struct doubles as the
//! config-file schema for its subcommand.

use std::path::{Path, PathBuf};

use clap::Args;
use mixbound::chaining::{self, FunctionClass, NormFamily};
use mixbound::coupling::{self, CouplingConfig, StrongApproxConfig};
use mixbound::mixing::MixingProfile;
use mixbound::norms::{self, QuantileCurve};
use mixbound::processes::{self, ProcessModel, TestClass};
use mixbound::report::ExperimentReport;
use mixbound::{grid, rates, stats, verify};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{required, Format};
use crate::output::{float, opt_float, Output, Table};
use crate::CliError;

pub struct Context {
    pub seed: u64,
    pub workers: usize,
}

fn output(report: ExperimentReport, table: Table, default_format: Format) -> Output {
    Output { report, table, default_format, summary_on_stderr: false }
}

fn profile(spec: &Option<String>) -> Result<MixingProfile, CliError> {
    Ok(MixingProfile::parse_spec(&required(spec, "profile")?)?)
}

fn model(spec: &Option<String>) -> Result<ProcessModel, CliError> {
    Ok(ProcessModel::parse_spec(&required(spec, "process")?)?)
}

fn class(spec: &Option<String>) -> Result<TestClass, CliError> {
    Ok(TestClass::from_spec(&required(spec, "class")?)?)
}

fn positive(value: usize, field: &str) -> Result<usize, CliError> {
    if value == 0 {
        return Err(CliError::Config(format!("field `{field}` must be at least 1")));
    }
    Ok(value)
}

/// Numeric cells of the first column; a non-numeric first row is a header.
fn read_column(path: &Path) -> Result<Vec<f64>, CliError> {
    read_rows(path).map(|rows| rows.into_iter().filter_map(|r| r.first().copied()).collect())
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().filter(|c| !c.is_empty()).map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) if !row.is_empty() => rows.push(row),
            Ok(_) => {}
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::Config(format!("{}: line {} is not numeric", path.display(), i + 1)));
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScheduleArgs {
    /// Sample size (must lie in the lattice).
    #[arg(long)]
    pub n: Option<u64>,
    /// iid | mdep:m=<int> | poly:m=<float> | expo:l=<float> | table:<path>
    #[arg(long)]
    pub profile: Option<String>,
}

pub fn schedule(a: &ScheduleArgs, _: &Context) -> Result<Output, CliError> {
    let n = required(&a.n, "n")?;
    let p = profile(&a.profile)?;
    let chain = grid::divisor_chain(n)?;
    let sched = grid::schedule_on(&chain, &p);
    let results = json!({ "n": n, "divisors": chain.divisors, "q_seq": sched.q_seq });
    let mut table = Table::new(vec!["k", "q"]);
    for (k, q) in sched.q_seq.iter().enumerate() {
        table.push(vec![k.to_string(), q.to_string()]);
    }
    Ok(output(ExperimentReport::new("schedule", a, &results)?, table, Format::Json))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RatesArgs {
    #[arg(long)]
    pub profile: Option<String>,
    /// Moment order r > 2.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub n_min: Option<u64>,
    #[arg(long)]
    pub n_max: Option<u64>,
}

pub fn rates(a: &RatesArgs, _: &Context) -> Result<Output, CliError> {
    let p = profile(&a.profile)?;
    let r = required(&a.r, "r")?;
    let n_min = a.n_min.unwrap_or(6);
    let n_max = required(&a.n_max, "n-max")?;
    if n_min > n_max {
        return Err(CliError::Config(format!("field `n-min` ({n_min}) exceeds `n-max` ({n_max})")));
    }
    let rows = rates::rate_sweep(n_min, n_max, r, &p)?;
    let regime = rates::profile_regime(&p, r)?;
    let mut table =
        Table::new(vec!["n", "q_n0", "frak_n", "effective_n", "regime", "lower_env", "upper_env", "strong_rate"]);
    for row in &rows {
        table.push(vec![
            row.n.to_string(),
            row.q_n0.to_string(),
            float(row.frak_n),
            float(row.effective_n),
            row.regime.as_str().to_string(),
            opt_float(row.lower_env),
            opt_float(row.upper_env),
            opt_float(row.strong_rate),
        ]);
    }
    let results = json!({ "regime": regime, "rows": rows });
    Ok(output(ExperimentReport::new("rates", a, &results)?, table, Format::Csv))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct NormsArgs {
    #[arg(long)]
    pub profile: Option<String>,
    /// Block length.
    #[arg(long)]
    pub q: Option<u64>,
    /// Moment order for B_r(q).
    #[arg(long)]
    pub r: Option<f64>,
    /// CSV with one sample per line.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

pub fn norms(a: &NormsArgs, _: &Context) -> Result<Output, CliError> {
    let p = profile(&a.profile)?;
    let q = required(&a.q, "q")?;
    let breakpoints = norms::mu_breakpoints(q, &p);
    let b_r = a.r.map(|r| norms::b_r(q, r, &p)).transpose()?;
    let curve = match &a.curve {
        Some(path) => Some(QuantileCurve::from_sample(&read_column(path)?)?),
        None => None,
    };
    let q_norm = curve.as_ref().map(|c| norms::q_norm(c, q, &p));
    let l2_norm = curve.as_ref().map(QuantileCurve::l2_norm);
    let results = json!({
        "mu_breakpoints": breakpoints,
        "q_norm": q_norm,
        "l2_norm": l2_norm,
        "b_r": b_r,
    });
    let mut table = Table::new(vec!["q", "r", "q_norm", "l2_norm", "b_r"]);
    table.push(vec![q.to_string(), opt_float(a.r), opt_float(q_norm), opt_float(l2_norm), opt_float(b_r)]);
    Ok(output(ExperimentReport::new("norms", a, &results)?, table, Format::Json))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GammaArgs {
    /// JSON {"members": [[..]], "weights": [..]} or CSV with one member per row.
    #[arg(long)]
    pub class_file: Option<PathBuf>,
    /// Built-in test class, evaluated at standard normal quantile points.
    #[arg(long, conflicts_with = "class_file")]
    pub class: Option<String>,
    /// Support points for a built-in class.
    #[arg(long)]
    pub points: Option<usize>,
    /// constant:l2 | constant:sup | constant:lr=<r> | constant:q=<q>,profile=<spec> | schedule:n=<n>,profile=<spec>
    #[arg(long)]
    pub norms: Option<String>,
    /// Depth of the greedy partition search.
    #[arg(long)]
    pub greedy_depth: Option<usize>,
    /// Also report the entropy integral under the level-0 norm.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub entropy: Option<bool>,
}

fn load_function_class(a: &GammaArgs) -> Result<FunctionClass, CliError> {
    if let Some(path) = &a.class_file {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        return if is_csv {
            Ok(FunctionClass::uniform(read_rows(path)?)?)
        } else {
            Ok(FunctionClass::from_json(&std::fs::read_to_string(path)?)?)
        };
    }
    let Some(name) = &a.class else {
        return Err(CliError::Config("missing required field `class-file` (or `class`)".into()));
    };
    let tc = TestClass::from_spec(name)?;
    let k = positive(a.points.unwrap_or(64), "points")?;
    let points: Vec<f64> = (0..k).map(|i| stats::normal_quantile((i as f64 + 0.5) / k as f64)).collect();
    Ok(FunctionClass::from_test_class(&tc, &points, &vec![1.0 / k as f64; k])?)
}

pub fn gamma(a: &GammaArgs, _: &Context) -> Result<Output, CliError> {
    let fc = load_function_class(a)?;
    let family = NormFamily::parse_spec(a.norms.as_deref().unwrap_or("constant:l2"))?;
    let depth = a.greedy_depth.unwrap_or(6);
    let exact = if fc.len() <= chaining::EXACT_MAX_CLASS {
        Some(chaining::gamma_exact(&fc, &family)?)
    } else {
        None
    };
    let greedy = chaining::gamma_greedy(&fc, &family, depth)?;
    let entropy = if a.entropy.unwrap_or(false) {
        let norm = family.level(0);
        let mut diam = 0.0f64;
        for i in 0..fc.len() {
            for j in i + 1..fc.len() {
                diam = diam.max(norm.eval(&fc.difference(i, j), &fc.weights));
            }
        }
        Some(chaining::entropy_integral(&fc, norm, diam))
    } else {
        None
    };
    let best = exact.as_ref().unwrap_or(&greedy);
    let results = json!({
        "size": fc.len(),
        "method": if exact.is_some() { "exact" } else { "greedy" },
        "gamma": best.value,
        "witness_partitions": best.witness.levels,
        "greedy_gamma": greedy.value,
        "greedy_witness_partitions": greedy.witness.levels,
        "entropy_integral": entropy,
    });
    let mut table = Table::new(vec!["method", "gamma"]);
    if let Some(e) = &exact {
        table.push(vec!["exact".into(), float(e.value)]);
    }
    table.push(vec!["greedy".into(), float(greedy.value)]);
    if let Some(e) = entropy {
        table.push(vec!["entropy_integral".into(), float(e)]);
    }
    Ok(output(ExperimentReport::new("gamma", a, &results)?, table, Format::Json))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    /// iid | ar1:rho=<f> | ma:m=<int> | lazy_renewal:p=<f>
    #[arg(long)]
    pub process: Option<String>,
    /// Built-in class name or JSON class file.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
}

pub fn simulate(a: &SimulateArgs, ctx: &Context) -> Result<Output, CliError> {
    let m = model(&a.process)?;
    let c = class(&a.class)?;
    let n = positive(required(&a.n, "n")?, "n")?;
    let reps = positive(a.reps.unwrap_or(200), "reps")?;
    let (estimate, sups) = processes::mc_expected_sup(&m, &c, n, reps, ctx.seed, ctx.workers)?;
    let mut table = Table::new(vec!["rep", "sup_value"]);
    for (r, s) in sups.iter().enumerate() {
        table.push(vec![r.to_string(), float(*s)]);
    }
    let results = json!({ "expected_sup": estimate });
    let mut out = output(ExperimentReport::new("simulate", a, &results)?, table, Format::Csv);
    out.summary_on_stderr = true;
    Ok(out)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CoupleArgs {
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Block lengths (comma separated divisors of n).
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Outer replications of the tau estimate.
    #[arg(long)]
    pub tau_outer: Option<usize>,
    /// Inner replications of the tau estimate.
    #[arg(long)]
    pub tau_inner: Option<usize>,
    /// Also run the block-independence test on replica and raw paths.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub independence: Option<bool>,
}

pub fn couple(a: &CoupleArgs, ctx: &Context) -> Result<Output, CliError> {
    let m = model(&a.process)?;
    let c = class(&a.class)?;
    let n = required(&a.n, "n")?;
    grid::check_admissible(n)?;
    let qs = required(&a.q, "q")?;
    let reps = positive(a.reps.unwrap_or(200), "reps")?;
    let cfg = CouplingConfig {
        model: m.clone(),
        class: c,
        n: n as usize,
        qs: qs.clone(),
        reps,
        seed: ctx.seed,
        workers: ctx.workers,
        tau_reps: Some((a.tau_outer.unwrap_or(400), a.tau_inner.unwrap_or(100))),
    };
    let report = coupling::coupling_experiment(&cfg)?;
    let independence = if a.independence.unwrap_or(false) {
        let mut rows = Vec::new();
        for q in &qs {
            let replica = coupling::independence_experiment(&m, n as usize, *q, reps, true, ctx.seed, ctx.workers)?;
            let raw = coupling::independence_experiment(&m, n as usize, *q, reps, false, ctx.seed, ctx.workers)?;
            rows.push(json!({ "q": q, "replica": replica, "raw": raw }));
        }
        Some(rows)
    } else {
        None
    };
    let mut table =
        Table::new(vec!["q", "mean_gap", "mean_gap_se", "median_gap", "max_gap", "tau", "tau_se", "tau_bound", "ratio"]);
    for row in &report.rows {
        table.push(vec![
            row.q.to_string(),
            float(row.mean_gap.value),
            float(row.mean_gap.std_error),
            float(row.median_gap),
            float(row.max_gap),
            opt_float(row.tau.map(|t| t.value)),
            opt_float(row.tau.map(|t| t.std_error)),
            opt_float(row.tau_bound),
            opt_float(row.ratio),
        ]);
    }
    let results = json!({ "coupling": report, "independence": independence });
    Ok(output(ExperimentReport::new("couple", a, &results)?, table, Format::Json))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StrongApproxArgs {
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub class: Option<String>,
    /// Sample sizes (comma separated lattice members).
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    /// Block length per grid point (default: divisor nearest sqrt(n)).
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<usize>>,
    /// Moment order in [2, inf]; `inf` for the sup convention.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub tau_outer: Option<usize>,
    #[arg(long)]
    pub tau_inner: Option<usize>,
    /// Replications for Monte Carlo block moments.
    #[arg(long)]
    pub moment_reps: Option<usize>,
    /// Report the f_m(n) trend for this m.
    #[arg(long)]
    pub rate_m: Option<f64>,
}

pub fn strongapprox(a: &StrongApproxArgs, ctx: &Context) -> Result<Output, CliError> {
    let m = model(&a.process)?;
    let c = class(&a.class)?;
    let n_grid = required(&a.n_grid, "n-grid")?;
    for n in &n_grid {
        grid::check_admissible(*n)?;
    }
    let gamma_text = a.gamma.as_deref().unwrap_or("inf");
    let gamma: f64 = gamma_text
        .parse()
        .map_err(|_| CliError::Config(format!("field `gamma` must be a number or `inf`, got `{gamma_text}`")))?;
    if let Some(qs) = &a.q {
        if qs.len() != n_grid.len() {
            return Err(CliError::Config(format!("field `q` has {} entries, `n-grid` has {}", qs.len(), n_grid.len())));
        }
    }
    let cfg = StrongApproxConfig {
        model: m,
        class: c,
        n_grid: n_grid.iter().map(|n| *n as usize).collect(),
        qs: a.q.clone(),
        gamma,
        reps: positive(a.reps.unwrap_or(1000), "reps")?,
        seed: ctx.seed,
        workers: ctx.workers,
        tau_reps: (a.tau_outer.unwrap_or(500), a.tau_inner.unwrap_or(200)),
        moment_reps: a.moment_reps.unwrap_or(2000),
        rate_m: a.rate_m,
    };
    let report = coupling::strong_approx_experiment(&cfg)?;
    let mut table = Table::new(vec![
        "n",
        "q",
        "gap",
        "gap_se",
        "moment_term",
        "tau_term",
        "chaining_term",
        "rhs",
        "implied_constant",
        "strong_rate",
    ]);
    for row in &report.rows {
        table.push(vec![
            row.n.to_string(),
            row.q.to_string(),
            float(row.gap.value),
            float(row.gap.std_error),
            float(row.moment_term),
            float(row.tau_term),
            float(row.chaining_term),
            float(row.rhs),
            float(row.implied_constant),
            opt_float(row.strong_rate),
        ]);
    }
    Ok(output(ExperimentReport::new("strongapprox", a, &report)?, table, Format::Json))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct VerifyArgs {
    /// grid | norms | rates | chaining | coupling | all
    #[arg(long)]
    pub suite: Option<String>,
}

pub fn verify(a: &VerifyArgs, ctx: &Context) -> Result<Output, CliError> {
    let suite = a.suite.as_deref().unwrap_or("all");
    let report = verify::verify_suite(suite, ctx.seed, ctx.workers)?;
    let mut table = Table::new(vec!["id", "name", "status", "summary"]);
    for c in &report.criteria {
        table.push(vec![c.id.to_string(), c.name.clone(), c.status.as_str().into(), c.summary.clone()]);
    }
    Ok(output(report, table, Format::Json))
}
