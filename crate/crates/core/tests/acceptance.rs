//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails that is not a documented known red.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use bfrate::ar1::{ergodic_diagnostics, h1_closed, h_sigma_closed, simulate_ar1, Ar1ClosedForms};
use bfrate::assumptions::Status;
use bfrate::asymptotics::{bf_decomposition, posterior_logdensity_rate, trajectory, Trajectory, DEFAULT_CHECKPOINTS};
use bfrate::harness::commands::{check_report, kl_pass_fraction, kl_table};
use bfrate::harness::config::ExperimentConfig;
use bfrate::harness::suites::builtin;
use bfrate::klrate::{h_infimum, McRateSettings};
use bfrate::marginal::{log_marginal_identity_check, prior_normalization, refine_until, Refined};
use bfrate::rng::InnovationStream;
use bfrate::{make_ar1_model, Interval, ModelSpec, PriorKind, PriorSpec, Sample, SigmaSpec, Theta, TimeSeries};
use common::{model_by_id, reference_process};
use rayon::prelude::*;

type Outcome = Result<(bool, String), String>;

struct Criterion {
    name: &'static str,
    run: fn() -> Outcome,
    /// Failures matching this predicate on the detail string are expected;
    /// the README records the analysis.
    known_red: Option<fn(&str) -> bool>,
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
const N_FINAL: usize = 100_000;

fn suite(name: &str) -> ExperimentConfig {
    builtin(name).expect("built-in suite")
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Per-seed trajectories of the first two models of a built-in suite.
fn suite_trajectories(name: &str) -> Result<Vec<Trajectory>, String> {
    let cfg = suite(name);
    let models = cfg.build_models().map_err(err)?;
    let process = cfg.process().map_err(err)?;
    cfg.seeds
        .par_iter()
        .map(|&seed| trajectory(&process, &models[0], &models[1], &DEFAULT_CHECKPOINTS, seed).map_err(err))
        .collect()
}

fn final_values_near(name: &str, target: f64, tol: f64) -> Outcome {
    let trajs = suite_trajectories(name)?;
    let finals: Vec<f64> = trajs.iter().map(Trajectory::final_value).collect();
    let within = finals.iter().filter(|v| (*v - target).abs() <= tol).count();
    let worst = finals.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    Ok((
        within >= 18,
        format!(
            "{within}/{} paths within {tol} of {target:.5} at n = {N_FINAL}; mean {mean:.5}, worst gap {worst:.5}, theory limit {:.5}",
            finals.len(),
            trajs[0].theory_limit
        ),
    ))
}

fn stationary_vs_explosive() -> Outcome {
    final_values_near("paper-stationary-vs-nonstationary", 1.0 / 6.0, 0.02)
}

fn unknown_sigma() -> Outcome {
    final_values_near("paper-unknown-sigma", 1.0 / 6.0, 0.03)
}

fn nested_zero_limit() -> Outcome {
    final_values_near("nested-both-correct", 0.0, 0.01)
}

fn posterior_rate() -> Outcome {
    let process = reference_process();
    let m1 = model_by_id("M1");
    let mut ok = true;
    let mut parts = Vec::new();
    for theta in [0.0, 0.25, 0.75] {
        let limit = -(theta - 0.5f64).powi(2) / 1.5;
        let rates = SEEDS
            .into_par_iter()
            .map(|seed| Ok(posterior_logdensity_rate(&m1, &process, &Theta::rho(theta), &[N_FINAL], seed).map_err(err)?[0].rate))
            .collect::<Result<Vec<f64>, String>>()?;
        let within = rates.iter().filter(|r| (*r - limit).abs() <= 0.02).count();
        ok &= within >= 18;
        parts.push(format!("theta {theta}: {within}/20 within 0.02 of {limit:.5}"));
    }
    Ok((ok, parts.join("; ")))
}

fn kl_cross_validation() -> Outcome {
    let cfg = suite("paper-unknown-sigma");
    let kl = cfg.kl.clone().expect("suite has kl probes");
    let m1 = cfg.build_models().map_err(err)?.swap_remove(0);
    let rows = kl_table(&cfg.process().map_err(err)?, &[m1], &kl).map_err(err)?;
    let fraction = kl_pass_fraction(&rows, 3.0).unwrap_or(0.0);
    let worst = rows.iter().filter_map(|r| r.gap_in_se).map(f64::abs).fold(0.0, f64::max);
    Ok((
        rows.len() == 25 && fraction >= 0.95,
        format!(
            "{:.0}% of {} (rho, sigma) probes within 3 s.e. (n = {}, {} replications); worst |gap| {worst:.2} s.e.",
            100.0 * fraction,
            rows.len(),
            kl.n,
            kl.replications
        ),
    ))
}

fn quadrature_oracle() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/marginal_oracle.txt");
    let text = std::fs::read_to_string(path).map_err(err)?;
    let cases: Vec<(String, u64, usize, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect();
    let rel = cases
        .par_iter()
        .map(|(id, seed, n, stored)| {
            let series = simulate_ar1(&reference_process(), *n, *seed).map_err(err)?;
            let v = refine_until(&model_by_id(id), &series.sample(), 1e-10).map_err(err)?.value;
            Ok(((v - stored) / stored).abs())
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let good = rel.iter().filter(|r| **r <= 1e-8).count();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    Ok((
        good >= 10 && good == cases.len(),
        format!("{good}/{} fixture cases within 1e-8 relative; worst {worst:.2e}", cases.len()),
    ))
}

fn uniform_in(model: &ModelSpec, rng: &mut InnovationStream) -> Theta {
    let boxes = model.domain().boxes();
    let bx = boxes[(rng.uniform_open0() * boxes.len() as f64).ceil() as usize - 1];
    let mut coord = |d: usize| loop {
        let u = rng.uniform_open0();
        let x = bx.lo(d) + u * bx.width(d);
        if u < 1.0 && x > bx.lo(d) {
            return x;
        }
    };
    if bx.dims() == 1 {
        Theta::rho(coord(0))
    } else {
        let r = coord(0);
        Theta::rho_sigma(r, coord(1))
    }
}

fn identity_suite() -> Outcome {
    const PROBES: usize = 1000;
    let pairs = [("M1", "M2"), ("M1", "M1prime"), ("M1sigma", "M2sigma")];
    let seeds = [1u64, 2, 3, 4, 5];
    let lengths = [1000usize, N_FINAL];
    let process = reference_process();
    let series: Vec<TimeSeries> = seeds.iter().map(|&s| simulate_ar1(&process, N_FINAL, s).unwrap()).collect();
    let ids: BTreeSet<&str> = pairs.iter().flat_map(|p| [p.0, p.1]).collect();
    // Converged quadrature state per (model, seed, length).
    let state: Vec<((&str, usize, usize), Refined)> = ids
        .iter()
        .flat_map(|&id| (0..seeds.len()).flat_map(move |s| (0..lengths.len()).map(move |l| (id, s, l))))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, s, l)| {
            let sample = Sample::new(&series[s].values()[..lengths[l]]);
            Ok(((id, s, l), refine_until(&model_by_id(id), &sample, 1e-9).map_err(err)?))
        })
        .collect::<Result<_, String>>()?;
    let lookup = |key: (&str, usize, usize)| &state.iter().find(|(k, _)| *k == key).unwrap().1;

    let mut rng = InnovationStream::new(7, 0);
    let mut worst_identity: f64 = 0.0;
    let mut worst_decomposition: f64 = 0.0;
    let mut worst_prior: f64 = 0.0;
    // Largest absolute residual and one ulp of log L at that probe.
    let mut worst_raw = (0.0, 0.0);
    for _ in 0..PROBES {
        let pick = |rng: &mut InnovationStream, k: usize| ((rng.uniform_open0() * k as f64).ceil() as usize).max(1) - 1;
        let (a, b) = pairs[pick(&mut rng, pairs.len())];
        let s = pick(&mut rng, seeds.len());
        let l = pick(&mut rng, lengths.len());
        let (ma, mb) = (model_by_id(a), model_by_id(b));
        let (ta, tb) = (uniform_in(&ma, &mut rng), uniform_in(&mb, &mut rng));
        let sample = Sample::new(&series[s].values()[..lengths[l]]);
        let (ra, rb) = (lookup((a, s, l)), lookup((b, s, l)));
        let raw = log_marginal_identity_check(&ma, &sample, &[ta], &ra.grid).map_err(err)?;
        worst_identity = worst_identity.max(raw / lengths[l] as f64);
        if raw > worst_raw.0 {
            let ulp = |x: f64| f64::from_bits(x.abs().to_bits() + 1) - x.abs();
            worst_raw = (raw, ulp(ma.log_lik(&ta, &sample)));
        }
        let d = bf_decomposition(&ma, &mb, &process, &sample, (&ta, &tb), (ra.value, rb.value)).map_err(err)?;
        worst_decomposition = worst_decomposition.max(d.residual());
        if lengths[l] == N_FINAL {
            worst_prior = d.prior_terms().iter().map(|p| p.abs()).fold(worst_prior, f64::max);
        }
    }
    Ok((
        worst_identity <= 1e-10 && worst_decomposition <= 1e-10 && worst_prior <= 1e-4,
        format!(
            "{PROBES} probes, per observation: marginal identity residual {worst_identity:.2e}, six-term residual {worst_decomposition:.2e}; \
             max |(1/n) log prior| at n = {N_FINAL} {worst_prior:.2e}; largest absolute marginal residual {:.2e} nats (ulp of log L there {:.2e})",
            worst_raw.0, worst_raw.1
        ),
    ))
}

fn property_suites() -> Outcome {
    let process = reference_process();
    let mut failures = Vec::new();

    // Antisymmetry, bit for bit.
    let pairs = [("M1", "M2"), ("M1", "M1prime"), ("M1sigma", "M2sigma")];
    let antisym = pairs
        .par_iter()
        .flat_map(|&p| SEEDS.into_par_iter().map(move |s| (p, s)))
        .map(|((a, b), seed)| {
            let (ma, mb) = (model_by_id(a), model_by_id(b));
            let ab = trajectory(&process, &ma, &mb, &DEFAULT_CHECKPOINTS, seed).map_err(err)?;
            let ba = trajectory(&process, &mb, &ma, &DEFAULT_CHECKPOINTS, seed).map_err(err)?;
            Ok(ab.values.iter().zip(&ba.values).all(|(x, y)| x.to_bits() == (-y).to_bits()))
        })
        .collect::<Result<Vec<bool>, String>>()?;
    let antisym_ok = antisym.iter().filter(|b| **b).count();
    if antisym_ok != antisym.len() {
        failures.push("antisymmetry");
    }

    // Ergodic identity: exact zeros are counted, the pass condition is the rounding bound.
    let mut exact = 0;
    let mut within = 0;
    for seed in SEEDS {
        let d = ergodic_diagnostics(&simulate_ar1(&process, N_FINAL, seed).map_err(err)?).map_err(err)?;
        exact += usize::from(d.identity_residual() == 0.0);
        within += usize::from(d.identity_residual().abs() <= d.identity_bound());
    }
    if within != 20 {
        failures.push("ergodic identity");
    }

    // h >= 0 on probe grids.
    let forms = Ar1ClosedForms::new(&process);
    let mut h_points = 0;
    let mut h_negative = 0;
    for i in 0..=400 {
        let rho = -2.0 + 4.0 * i as f64 / 400.0;
        h_points += 1;
        h_negative += usize::from(h1_closed(rho, &forms).value.is_nan() || h1_closed(rho, &forms).value < 0.0);
        for j in 0..=200 {
            let sigma = 0.05 + 5.0 * j as f64 / 200.0;
            h_points += 1;
            let h = h_sigma_closed(rho, sigma, &forms).map_err(err)?.value;
            h_negative += usize::from(h.is_nan() || h < 0.0);
        }
    }
    if h_negative > 0 {
        failures.push("h >= 0");
    }

    // Nesting: A inside B implies inf_B h <= inf_A h.
    let mc = McRateSettings::default();
    let inf = |id: &str| h_infimum(&model_by_id(id), &process, &mc).map(|e| e.h_theta.value).map_err(err);
    let nested = [("M1prime", "M1"), ("M3", "M2"), ("M2sigma", "M2sigma")];
    let mut nest_ok = 0;
    for (inner, outer) in nested {
        nest_ok += usize::from(inf(outer)? <= inf(inner)?);
    }
    let half = make_ar1_model(
        "half",
        vec![Interval::closed(1.0, 1.5)],
        SigmaSpec::Unknown(vec![Interval::closed(0.5, 2.0)]),
        PriorSpec::Uniform,
    )
    .map_err(err)?;
    let half_inf = h_infimum(&half, &process, &mc).map_err(err)?.h_theta.value;
    nest_ok += usize::from(inf("M2sigma")? <= half_inf);
    if nest_ok != nested.len() + 1 {
        failures.push("nesting");
    }

    // Prior normalisation.
    let mut priors: Vec<ModelSpec> = ["M1", "M2", "M1prime", "M3", "M1sigma", "M2sigma"]
        .iter()
        .map(|id| model_by_id(id))
        .collect();
    for (mean, sd) in [(0.0, 0.5), (0.5, 0.1), (1.2, 0.3), (-2.0, 1.0)] {
        priors.push(
            make_ar1_model(
                "tn",
                common::explosive(),
                SigmaSpec::Known(1.0),
                PriorSpec::Product(vec![PriorKind::TruncatedNormal { mean, sd }]),
            )
            .map_err(err)?,
        );
        priors.push(
            make_ar1_model(
                "tn2",
                common::stationary(),
                SigmaSpec::Unknown(common::sigma_range()),
                PriorSpec::Product(vec![PriorKind::TruncatedNormal { mean, sd }, PriorKind::Uniform]),
            )
            .map_err(err)?,
        );
    }
    let worst_norm = priors
        .iter()
        .map(|m| prior_normalization(m).map(|z| (z - 1.0).abs()))
        .collect::<bfrate::Result<Vec<f64>>>()
        .map_err(err)?
        .into_iter()
        .fold(0.0, f64::max);
    if worst_norm > 1e-6 {
        failures.push("prior normalisation");
    }

    Ok((
        failures.is_empty(),
        format!(
            "antisymmetry {antisym_ok}/{} bit-exact; ergodic identity within rounding bound {within}/20 (exactly zero on {exact}/20); \
             h >= 0 on {}/{h_points} grid points; nesting {nest_ok}/{}; prior normalisation worst {worst_norm:.1e} over {} priors{}",
            antisym.len(),
            h_points - h_negative,
            nested.len() + 1,
            priors.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failures.join(", "))
            }
        ),
    ))
}

fn assumption_diagnostics() -> Outcome {
    let mut warns = Vec::new();
    let mut total = 0;
    for name in ["paper-stationary-vs-nonstationary", "paper-unknown-sigma"] {
        let report = check_report(&suite(name)).map_err(err)?;
        for d in &report.diagnostics {
            total += 1;
            if d.status == Status::Warn {
                warns.push(format!("{name}/{}/{}={:.3}", d.name, d.model.as_deref().unwrap_or("-"), d.value));
            }
        }
    }
    Ok((
        warns.is_empty(),
        format!(
            "{}/{total} diagnostics OK{}",
            total - warns.len(),
            if warns.is_empty() {
                String::new()
            } else {
                format!("; WARN: {}", warns.join(", "))
            }
        ),
    ))
}

/// Only the unknown-sigma sup-gap probes may fail.
fn only_unknown_sigma_sup_gap(detail: &str) -> bool {
    let Some((_, warns)) = detail.split_once("WARN: ") else {
        return false;
    };
    warns.split(", ").all(|w| w.starts_with("paper-unknown-sigma/A3/"))
}

fn main() {
    let criteria = [
        Criterion {
            name: "stationary vs explosive limit 1/6 (sigma known)",
            run: stationary_vs_explosive,
            known_red: None,
        },
        Criterion {
            name: "stationary vs explosive limit (sigma unknown)",
            run: unknown_sigma,
            known_red: None,
        },
        Criterion {
            name: "nested correct models, zero limit",
            run: nested_zero_limit,
            known_red: None,
        },
        Criterion {
            name: "posterior log-density rate -J(theta)",
            run: posterior_rate,
            known_red: None,
        },
        Criterion {
            name: "closed-form vs Monte Carlo KL rates",
            run: kl_cross_validation,
            known_red: None,
        },
        Criterion {
            name: "quadrature vs brute-force oracle fixtures",
            run: quadrature_oracle,
            known_red: None,
        },
        Criterion {
            name: "marginal and six-term identities",
            run: identity_suite,
            known_red: None,
        },
        Criterion {
            name: "property suites",
            run: property_suites,
            known_red: None,
        },
        Criterion {
            name: "assumption diagnostics on the stationary-vs-explosive suites",
            run: assumption_diagnostics,
            known_red: Some(only_unknown_sigma_sup_gap),
        },
    ];
    let mut unexpected = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match (c.run)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let known = !pass && c.known_red.is_some_and(|k| k(&detail));
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known red, see README)",
            (false, false) => "FAIL",
        };
        if !pass && !known {
            unexpected += 1;
        }
        println!("[{tag}] {}. {}: {detail} ({:.1}s)", i + 1, c.name, start.elapsed().as_secs_f64());
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
