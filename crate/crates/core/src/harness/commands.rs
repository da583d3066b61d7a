//! The five harness commands. Each writes its artifacts into a fresh run
//! directory (see [`crate::harness::run`]) and reports pass/fail.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar1::simulate_ar1;
use crate::assumptions::{
    a2_expectation_probe, a4_set_mass, sieve_mass_check, summarize_a2, summarize_a3, uniform_convergence_probe, A2Row, Sieve, SieveRow,
    Status, SupGap, A2_SLOPE_RANGE, A3_THRESHOLD,
};
use crate::asymptotics::{fit_limit, select_model_with, trajectory_with, Selection, Trajectory};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, KlConfig, OutputFormat, SieveKind};
use crate::harness::output::{cell, write_csv, write_jsonl, JsonLine};
use crate::harness::run::{begin, io_err, RunRecord, RunStart, RunStatus};
use crate::klrate::{h_infimum, kl_rate_mc};
use crate::marginal::refine_until_with;
use crate::model::{DivergenceRate, ModelSpec, Theta, TrueProcess};
use crate::numeric::fmt17;

pub const REPORT_FILE: &str = "report.txt";

/// What a command produced.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub run_dir: PathBuf,
    pub record: RunRecord,
    pub passed: bool,
    /// Human-readable summary (also stored as `report.txt`).
    pub report: String,
    /// The run directory already existed and was reused.
    pub reused: bool,
}

struct Body {
    passed: bool,
    artifacts: Vec<String>,
    report: String,
}

fn execute<F>(config: &ExperimentConfig, out_root: &Path, command: &str, body: F) -> Result<CommandOutcome>
where
    F: FnOnce(&Path, &str) -> Result<Body>,
{
    config.validate()?;
    match begin(out_root, config, command)? {
        RunStart::Existing(run_dir, record) => {
            let report = fs::read_to_string(run_dir.join(REPORT_FILE)).unwrap_or_default();
            Ok(CommandOutcome {
                passed: record.status == RunStatus::Passed,
                run_dir,
                record,
                report,
                reused: true,
            })
        }
        RunStart::Fresh(stage) => {
            let out = match body(&stage.dir, &stage.run_id) {
                Ok(out) => out,
                Err(e) => {
                    stage.abandon();
                    return Err(e);
                }
            };
            let report_path = stage.dir.join(REPORT_FILE);
            fs::write(&report_path, &out.report).map_err(io_err(format!("writing {}", report_path.display())))?;
            let mut artifacts = out.artifacts;
            artifacts.push(REPORT_FILE.into());
            let status = if out.passed { RunStatus::Passed } else { RunStatus::Failed };
            let (run_dir, record) = stage.finish(status, artifacts)?;
            Ok(CommandOutcome {
                run_dir,
                passed: record.status == RunStatus::Passed,
                record,
                report: out.report,
                reused: false,
            })
        }
    }
}

/// Write `name.jsonl` / `name.csv` as configured; returns the artifact names.
fn emit(config: &ExperimentConfig, dir: &Path, name: &str, jsonl: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<Vec<String>> {
    let mut written = Vec::new();
    if config.wants(OutputFormat::Jsonl) {
        let file = format!("{name}.jsonl");
        write_jsonl(&dir.join(&file), jsonl)?;
        written.push(file);
    }
    if config.wants(OutputFormat::Csv) {
        let file = format!("{name}.csv");
        write_csv(&dir.join(&file), header, rows)?;
        written.push(file);
    }
    Ok(written)
}

/// `simulate`: one text file per seed, one observation per line.
pub fn cmd_simulate(config: &ExperimentConfig, out_root: &Path) -> Result<CommandOutcome> {
    execute(config, out_root, "simulate", |dir, _| {
        let process = config.process()?;
        let n = config.simulate.and_then(|s| s.n).unwrap_or(*config.checkpoints.last().unwrap());
        let files = config
            .seeds
            .par_iter()
            .map(|&seed| {
                let series = simulate_ar1(&process, n, seed)?;
                let mut text = String::with_capacity(n * 24);
                for &x in series.values() {
                    text.push_str(&fmt17(x));
                    text.push('\n');
                }
                let file = format!("series-{seed}.txt");
                let path = dir.join(&file);
                fs::write(&path, text).map_err(io_err(format!("writing {}", path.display())))?;
                Ok(file)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Body {
            passed: true,
            report: format!("simulated {} series of length {n}\n", files.len()),
            artifacts: files,
        })
    })
}

/// Per-pair result of `trajectory`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair: (String, String),
    pub theory_limit: f64,
    pub point: f64,
    pub halfwidth: f64,
    pub slope_check: f64,
    pub passing_paths: usize,
    pub paths: usize,
    pub passed: bool,
}

/// Trajectories for every model pair `(i, j)`, `i < j`, across all seeds.
pub fn run_trajectories(config: &ExperimentConfig) -> Result<Vec<(PairSummary, Vec<Trajectory>)>> {
    let process = config.process()?;
    let models = config.build_models()?;
    if models.len() < 2 {
        return Err(Error::Config("trajectory needs at least two models".into()));
    }
    let opts = config.asymptotics_options();
    let tcfg = config.trajectory;
    let mut out = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let trajectories = config
                .seeds
                .par_iter()
                .map(|&seed| trajectory_with(&process, &models[i], &models[j], &config.checkpoints, seed, &opts))
                .collect::<Result<Vec<_>>>()?;
            let limit = trajectories[0].theory_limit;
            let (point, halfwidth, slope_check) = match fit_limit(&trajectories, tcfg.tail_fraction) {
                Ok(est) => (est.point, est.halfwidth, est.slope_check),
                Err(Error::TooFew { .. } | Error::TooFewTailCheckpoints(_)) => {
                    let finals: Vec<f64> = trajectories.iter().map(Trajectory::final_value).collect();
                    (crate::numeric::mean_sd(&finals).0, f64::NAN, f64::NAN)
                }
                Err(e) => return Err(e),
            };
            let passing = trajectories
                .iter()
                .filter(|t| (t.final_value() - limit).abs() <= tcfg.tolerance)
                .count();
            let paths = trajectories.len();
            out.push((
                PairSummary {
                    pair: (models[i].name().into(), models[j].name().into()),
                    theory_limit: limit,
                    point,
                    halfwidth,
                    slope_check,
                    passing_paths: passing,
                    paths,
                    passed: passing as f64 >= tcfg.min_pass_fraction * paths as f64,
                },
                trajectories,
            ));
        }
    }
    Ok(out)
}

/// `trajectory`: per-checkpoint JSONL records and a per-seed summary CSV.
pub fn cmd_trajectory(config: &ExperimentConfig, out_root: &Path) -> Result<CommandOutcome> {
    execute(config, out_root, "trajectory", |dir, run_id| {
        let results = run_trajectories(config)?;
        let tol = config.trajectory.tolerance;
        let mut jsonl = Vec::new();
        let mut rows = Vec::new();
        let mut report = String::new();
        let _ = writeln!(report, "suite {}", config.suite_name);
        for (summary, trajectories) in &results {
            let pair = format!("{}/{}", summary.pair.0, summary.pair.1);
            for t in trajectories {
                for (&n, &v) in t.checkpoints.iter().zip(&t.values) {
                    jsonl.push(
                        JsonLine::new()
                            .str("run_id", run_id)
                            .str("pair", &pair)
                            .int("seed", t.seed)
                            .int("n", n as u64)
                            .num("value", v)
                            .num("theory_limit", t.theory_limit)
                            .finish(),
                    );
                }
                let pass = (t.final_value() - summary.theory_limit).abs() <= tol;
                rows.push(vec![
                    pair.clone(),
                    t.seed.to_string(),
                    cell(t.final_value()),
                    cell(summary.theory_limit),
                    cell(summary.point),
                    cell(summary.halfwidth),
                    pass.to_string(),
                ]);
            }
            let _ = writeln!(
                report,
                "{pair:<16} limit {:>10.6}  point {:>10.6}  halfwidth {:>9.6}  paths within {tol}: {}/{}  {}",
                summary.theory_limit,
                summary.point,
                summary.halfwidth,
                summary.passing_paths,
                summary.paths,
                if summary.passed { "PASS" } else { "FAIL" }
            );
        }
        let mut artifacts = emit(
            config,
            dir,
            "trajectory",
            &jsonl,
            &["pair", "seed", "final_value", "theory_limit", "point", "halfwidth", "pass"],
            &rows,
        )?;
        let mut passed = results.iter().all(|(s, _)| s.passed);
        if config.models.len() >= 3 {
            let (selection_passed, line) = selection_summary(config)?;
            passed &= selection_passed;
            report.push_str(&line);
            let path = dir.join("selection.json");
            fs::write(&path, selection_json(config)?).map_err(io_err(format!("writing {}", path.display())))?;
            artifacts.push("selection.json".into());
        }
        Ok(Body { passed, artifacts, report })
    })
}

fn selection(config: &ExperimentConfig) -> Result<std::result::Result<Selection, (String, String)>> {
    let process = config.process()?;
    let models = config.build_models()?;
    let n = *config.checkpoints.last().unwrap();
    match select_model_with(&process, &models, n, &config.seeds, &config.asymptotics_options()) {
        Ok(s) => Ok(Ok(s)),
        Err(Error::AmbiguousSelection(a, b)) => Ok(Err((a, b))),
        Err(e) => Err(e),
    }
}

fn selection_summary(config: &ExperimentConfig) -> Result<(bool, String)> {
    Ok(match selection(config)? {
        Ok(s) => (
            s.all_pairs_consistent(),
            format!(
                "selection winner {}; pairwise signs consistent: {}\n",
                s.winner,
                s.all_pairs_consistent()
            ),
        ),
        Err((a, b)) => (true, format!("selection ambiguous between {a} and {b}\n")),
    })
}

fn selection_json(config: &ExperimentConfig) -> Result<String> {
    Ok(match selection(config)? {
        Ok(s) => serde_json::to_string_pretty(&s).expect("selection serialises") + "\n",
        Err((a, b)) => format!(
            "{{\"ambiguous\": [{}, {}]}}\n",
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        ),
    })
}

/// One probe of `kl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub model: String,
    pub theta: Theta,
    pub closed_form: Option<f64>,
    pub mc: DivergenceRate,
    /// `(mc - closed_form) / mc_se`; zero when both agree exactly.
    pub gap_in_se: Option<f64>,
}

/// Probe points of `kl` for one model: `rho` (crossed with `sigma` for
/// 2-D models) restricted to the domain closure.
pub fn kl_probes(model: &ModelSpec, kl: &KlConfig) -> Vec<Theta> {
    let points: Vec<Theta> = if model.dims() == 1 {
        kl.rho.iter().map(|&r| Theta::rho(r)).collect()
    } else {
        kl.rho
            .iter()
            .flat_map(|&r| kl.sigma.iter().map(move |&s| Theta::rho_sigma(r, s)))
            .collect()
    };
    points.into_iter().filter(|t| model.domain().contains_closure(t)).collect()
}

/// Closed form against Monte Carlo at every probe of every model.
pub fn kl_table(process: &TrueProcess, models: &[ModelSpec], kl: &KlConfig) -> Result<Vec<KlRow>> {
    let mut rows = Vec::new();
    for model in models {
        for theta in kl_probes(model, kl) {
            let closed_form = model.closed_form_rate(&theta, process).map(|r| r.value);
            let mc = kl_rate_mc(model, &theta, process, kl.n, kl.replications, kl.seed)?;
            let gap_in_se = closed_form.map(|cf| {
                let gap = mc.value - cf;
                if gap == 0.0 {
                    0.0
                } else {
                    gap / mc.std_error
                }
            });
            rows.push(KlRow {
                model: model.name().into(),
                theta,
                closed_form,
                mc,
                gap_in_se,
            });
        }
    }
    Ok(rows)
}

/// Fraction of closed-form rows within `max_gap_se` standard errors.
pub fn kl_pass_fraction(rows: &[KlRow], max_gap_se: f64) -> Option<f64> {
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap_in_se).collect();
    if gaps.is_empty() {
        return None;
    }
    Some(gaps.iter().filter(|g| g.abs() <= max_gap_se).count() as f64 / gaps.len() as f64)
}

/// `kl`: per-probe table of closed form, Monte Carlo value, s.e. and gap.
pub fn cmd_kl(config: &ExperimentConfig, out_root: &Path) -> Result<CommandOutcome> {
    let kl = config
        .kl
        .clone()
        .ok_or_else(|| Error::Config("kl needs a [kl] section with probe points".into()))?;
    execute(config, out_root, "kl", |dir, run_id| {
        let process = config.process()?;
        let models = config.build_models()?;
        let rows = kl_table(&process, &models, &kl)?;
        let sigma_of = |t: &Theta| if t.dims() == 2 { Some(t.get(1)) } else { None };
        let jsonl: Vec<String> = rows
            .iter()
            .map(|r| {
                JsonLine::new()
                    .str("run_id", run_id)
                    .str("model", &r.model)
                    .num("rho", r.theta.get(0))
                    .opt_num("sigma", sigma_of(&r.theta))
                    .opt_num("closed_form", r.closed_form)
                    .num("mc_value", r.mc.value)
                    .num("mc_se", r.mc.std_error)
                    .opt_num("gap_in_se", r.gap_in_se)
                    .finish()
            })
            .collect();
        let opt = |x: Option<f64>| x.map(cell).unwrap_or_default();
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.model.clone(),
                    cell(r.theta.get(0)),
                    opt(sigma_of(&r.theta)),
                    opt(r.closed_form),
                    cell(r.mc.value),
                    cell(r.mc.std_error),
                    opt(r.gap_in_se),
                ]
            })
            .collect();
        let artifacts = emit(
            config,
            dir,
            "kl",
            &jsonl,
            &["model", "rho", "sigma", "closed_form", "mc_value", "mc_se", "gap_in_se"],
            &csv_rows,
        )?;
        let fraction = kl_pass_fraction(&rows, kl.max_gap_se);
        let passed = fraction.is_none_or(|f| f >= kl.min_pass_fraction);
        let mut report = format!("suite {}: {} probes\n", config.suite_name, rows.len());
        for r in &rows {
            let _ = writeln!(
                report,
                "{:<8} {:<24} closed {:>12}  mc {:>12.6} ± {:<10.6} gap/se {:>8}",
                r.model,
                format!("{:?}", r.theta.as_slice()),
                r.closed_form.map_or("-".into(), |v| format!("{v:.6}")),
                r.mc.value,
                r.mc.std_error,
                r.gap_in_se.map_or("-".into(), |g| format!("{g:.2}"))
            );
        }
        if let Some(f) = fraction {
            let _ = writeln!(
                report,
                "within {} s.e.: {:.1}% (need {:.1}%)  {}",
                kl.max_gap_se,
                100.0 * f,
                100.0 * kl.min_pass_fraction,
                if passed { "PASS" } else { "FAIL" }
            );
        }
        Ok(Body { passed, artifacts, report })
    })
}

/// One converged log marginal of `marginal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub model: String,
    pub seed: u64,
    pub n: usize,
    pub log_marginal: f64,
    pub resolution: u64,
    pub nodes: usize,
}

/// `marginal`: converged log marginal per (model, seed, checkpoint).
pub fn cmd_marginal(config: &ExperimentConfig, out_root: &Path) -> Result<CommandOutcome> {
    execute(config, out_root, "marginal", |dir, run_id| {
        let process = config.process()?;
        let models = config.build_models()?;
        let opts = config.asymptotics_options();
        let per_seed = config
            .seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<MarginalRow>> {
                let series = simulate_ar1(&process, *config.checkpoints.last().unwrap(), seed)?;
                let samples = crate::asymptotics::checkpoint_samples(&series, &config.checkpoints);
                let mut out = Vec::new();
                for model in &models {
                    for sample in &samples {
                        let r = refine_until_with(model, sample, opts.tol, &opts.quadrature)?;
                        out.push(MarginalRow {
                            model: model.name().to_string(),
                            seed,
                            n: sample.n(),
                            log_marginal: r.value,
                            resolution: r.resolution,
                            nodes: r.grid.len(),
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<_> = per_seed.into_iter().flatten().collect();
        let jsonl: Vec<String> = rows
            .iter()
            .map(|r| {
                JsonLine::new()
                    .str("run_id", run_id)
                    .str("model", &r.model)
                    .int("seed", r.seed)
                    .int("n", r.n as u64)
                    .num("log_marginal", r.log_marginal)
                    .int("resolution", r.resolution)
                    .int("nodes", r.nodes as u64)
                    .finish()
            })
            .collect();
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.model.clone(),
                    r.seed.to_string(),
                    r.n.to_string(),
                    cell(r.log_marginal),
                    r.resolution.to_string(),
                    r.nodes.to_string(),
                ]
            })
            .collect();
        let artifacts = emit(
            config,
            dir,
            "marginal",
            &jsonl,
            &["model", "seed", "n", "log_marginal", "resolution", "nodes"],
            &csv_rows,
        )?;
        Ok(Body {
            passed: true,
            artifacts,
            report: format!("{} log marginals converged to {}\n", rows.len(), config.quadrature.tol),
        })
    })
}

/// One line of the `check` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// `A2`, `A3`, `A4` or `A5(2)`.
    pub name: String,
    pub model: Option<String>,
    pub value: f64,
    pub threshold: f64,
    pub status: Status,
    pub detail: String,
}

/// Everything `check` computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub diagnostics: Vec<Diagnostic>,
    pub a2: Vec<A2Row>,
    pub a3: Vec<(String, Vec<SupGap>)>,
    pub a5: Vec<(String, Vec<SieveRow>)>,
}

impl CheckReport {
    pub fn all_ok(&self) -> bool {
        self.diagnostics.iter().all(|d| d.status == Status::Ok)
    }
}

/// Run every assumption diagnostic configured for the suite.
///
/// A sieve whose `beta` does not exceed `2 h(Theta)` is a configuration
/// error, since the condition being probed presupposes it.
pub fn check_report(config: &ExperimentConfig) -> Result<CheckReport> {
    let process = config.process()?;
    let models = config.build_models()?;
    let c = &config.check;
    let seed = c.seed.unwrap_or(config.seeds[0]);
    let n_list = c.n_list.clone().unwrap_or_else(|| config.checkpoints.clone());
    let mut diagnostics = Vec::new();

    let a2 = a2_expectation_probe(&process, c.a2_rho1, &c.a2_n_list, c.a2_replications, seed)?;
    let s2 = summarize_a2(&a2);
    diagnostics.push(Diagnostic {
        name: "A2".into(),
        model: None,
        value: s2.slope,
        threshold: f64::NAN,
        status: s2.status,
        detail: format!(
            "log-log slope of |E(1/n)log R_n + h| in [{}, {}]; decreasing {}; final gap within 3 s.e. {}",
            A2_SLOPE_RANGE.0, A2_SLOPE_RANGE.1, s2.decreasing, s2.final_within_3se
        ),
    });

    let mut a3 = Vec::new();
    let mut a5 = Vec::new();
    for model in &models {
        let rows = uniform_convergence_probe(model, &process, &n_list, c.grid_resolution, seed)?;
        let s3 = summarize_a3(&rows, c.grid_resolution);
        diagnostics.push(Diagnostic {
            name: "A3".into(),
            model: Some(model.name().into()),
            value: s3.last,
            threshold: A3_THRESHOLD,
            status: s3.status,
            detail: if s3.grid_too_coarse {
                format!("grid too coarse ({} points per unit)", c.grid_resolution)
            } else {
                format!(
                    "sup-gap {} at n = {} -> {} at n = {}",
                    fmt17(s3.first),
                    n_list[0],
                    fmt17(s3.last),
                    n_list.last().unwrap()
                )
            },
        });
        a3.push((model.name().to_string(), rows));

        let mass = a4_set_mass(model, &process, c.a4_threshold)?;
        diagnostics.push(Diagnostic {
            name: "A4".into(),
            model: Some(model.name().into()),
            value: mass,
            threshold: 0.0,
            status: Status::from_ok(mass == 0.0),
            detail: format!("prior mass of {{h > {}}}", c.a4_threshold),
        });

        let h = h_infimum(model, &process, &config.asymptotics_options().mc)?.h_theta.value;
        let sieve = &c.sieve;
        let family = |t: u64| -> Result<Sieve> {
            match sieve.kind {
                SieveKind::Full => Ok(Sieve::full(model, t, sieve.beta)),
                SieveKind::RhoBound => Sieve::rho_bound(model, t, sieve.beta)
                    .ok_or_else(|| Error::InvalidDomain(format!("sieve G_{t} is empty for {}", model.name()))),
            }
        };
        let rows = sieve_mass_check(model, family, sieve.alpha, &sieve.t_list, h).map_err(|e| match e {
            Error::SieveBeta { .. } => Error::Config(format!("model {}: {e}", model.name())),
            other => other,
        })?;
        let worst = rows.iter().map(|r| r.mass - r.bound).fold(f64::INFINITY, f64::min);
        diagnostics.push(Diagnostic {
            name: "A5(2)".into(),
            model: Some(model.name().into()),
            value: worst,
            threshold: 0.0,
            status: Status::from_ok(rows.iter().all(|r| r.ok)),
            detail: format!(
                "min over T of pi(G_T) - (1 - alpha exp(-beta T)); beta {} > 2h(Theta) = {}",
                sieve.beta,
                fmt17(2.0 * h)
            ),
        });
        a5.push((model.name().to_string(), rows));
    }
    Ok(CheckReport { diagnostics, a2, a3, a5 })
}

/// Fixed-width table of a [`CheckReport`].
pub fn render_check(report: &CheckReport) -> String {
    let mut out = format!(
        "{:<6} {:<10} {:>14} {:>10}  {:<5} detail\n",
        "check", "model", "value", "threshold", "status"
    );
    for d in &report.diagnostics {
        let status = match d.status {
            Status::Ok => "OK",
            Status::Warn => "WARN",
        };
        let threshold = if d.threshold.is_nan() {
            "-".to_string()
        } else {
            format!("{:.4}", d.threshold)
        };
        let _ = writeln!(
            out,
            "{:<6} {:<10} {:>14.6e} {:>10}  {:<5} {}",
            d.name,
            d.model.as_deref().unwrap_or("-"),
            d.value,
            threshold,
            status,
            d.detail
        );
    }
    out
}

/// `check`: assumption diagnostics as JSONL plus a summary table.
pub fn cmd_check(config: &ExperimentConfig, out_root: &Path) -> Result<CommandOutcome> {
    execute(config, out_root, "check", |dir, run_id| {
        let report = check_report(config)?;
        let mut jsonl = Vec::new();
        for d in &report.diagnostics {
            let status = if d.status == Status::Ok { "OK" } else { "WARN" };
            let mut line = JsonLine::new()
                .str("run_id", run_id)
                .str("record", "diagnostic")
                .str("check", &d.name);
            line = match &d.model {
                Some(m) => line.str("model", m),
                None => line.str("model", ""),
            };
            jsonl.push(
                line.num("value", d.value)
                    .num("threshold", d.threshold)
                    .str("status", status)
                    .str("detail", &d.detail)
                    .finish(),
            );
        }
        for r in &report.a2 {
            jsonl.push(
                JsonLine::new()
                    .str("run_id", run_id)
                    .str("record", "a2")
                    .int("n", r.n as u64)
                    .num("mean_rate", r.mean_rate)
                    .num("closed_form_gap", r.closed_form_gap)
                    .num("std_error", r.std_error)
                    .num("plain_mean_rate", r.plain_mean_rate)
                    .num("plain_std_error", r.plain_std_error)
                    .finish(),
            );
        }
        for (model, rows) in &report.a3 {
            for r in rows {
                let mut line = JsonLine::new()
                    .str("run_id", run_id)
                    .str("record", "a3")
                    .str("model", model)
                    .int("n", r.n as u64)
                    .num("sup_gap", r.sup_gap)
                    .num("at_rho", r.at.get(0));
                if r.at.dims() == 2 {
                    line = line.num("at_sigma", r.at.get(1));
                }
                jsonl.push(line.finish());
            }
        }
        for (model, rows) in &report.a5 {
            for r in rows {
                jsonl.push(
                    JsonLine::new()
                        .str("run_id", run_id)
                        .str("record", "a5")
                        .str("model", model)
                        .int("t", r.t)
                        .num("mass", r.mass)
                        .num("bound", r.bound)
                        .bool("ok", r.ok)
                        .finish(),
                );
            }
        }
        let path = dir.join("check.jsonl");
        write_jsonl(&path, &jsonl)?;
        Ok(Body {
            passed: report.all_ok(),
            artifacts: vec!["check.jsonl".into()],
            report: render_check(&report),
        })
    })
}
