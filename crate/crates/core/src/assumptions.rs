//! Finite-n diagnostics for the regularity conditions behind posterior
//! convergence: expectation convergence of `(1/n) log R_n` (A2), uniform
//! pathwise convergence (A3), the divergence set `I = {h = inf}` (A4) and
//! sieve mass (A5)(2).
//!
//! These are proxies for limit statements, so breaches are reported as
//! [`Status::Warn`] rather than errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar1::{simulate_ar1, simulate_ar1_stream, true_loglik, Ar1ClosedForms, StatsAccumulator};
use crate::asymptotics::{checkpoint_samples, validate_checkpoints};
use crate::error::{Error, Result};
use crate::klrate::{divergence_set_mass, MIN_MC_LENGTH};
use crate::marginal::prior_mass;
use crate::model::{DivergenceRate, ModelFamily, ModelSpec, ParameterDomain, Theta, TrueProcess};
use crate::numeric::{ls_slope, mean_sd, NeumaierSum};

/// Grid points per unit length for sup-probes.
pub const DEFAULT_SUP_RESOLUTION: u64 = 2048;

/// Below this many points per unit length the sup-probe is flagged as too coarse.
pub const MIN_SUP_RESOLUTION: u64 = 8;

pub const A3_THRESHOLD: f64 = 0.05;
pub const A2_SLOPE_RANGE: (f64, f64) = (-1.3, -0.7);
pub const DEFAULT_A2_LENGTHS: [usize; 3] = [100, 1000, 10_000];
pub const DEFAULT_A2_REPLICATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Ok,
    Warn,
}

impl Status {
    pub fn from_ok(ok: bool) -> Self {
        if ok {
            Self::Ok
        } else {
            Self::Warn
        }
    }
}

/// Closure-inclusive coordinates of one box axis.
fn closure_axis(lo: f64, hi: f64, resolution: u64) -> Vec<f64> {
    let width = hi - lo;
    if !(width > 0.0) {
        return vec![lo];
    }
    let cells = ((resolution as f64 * width).ceil() as usize).max(1);
    (0..=cells)
        .map(|k| if k == cells { hi } else { lo + width * k as f64 / cells as f64 })
        .collect()
}

/// One row of [`uniform_convergence_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupGap {
    pub n: usize,
    pub sup_gap: f64,
    /// Grid point attaining the sup.
    pub at: Theta,
}

fn closed_rate(model: &ModelSpec, process: &TrueProcess, theta: &Theta) -> Result<f64> {
    model
        .closed_form_rate(theta, process)
        .map(|r| r.value)
        .ok_or_else(|| Error::NoClosedForm(model.name().into()))
}

/// First maximum of `(gap, point)` pairs; deterministic for any chunking.
fn first_max(a: (f64, Theta), b: (f64, Theta)) -> (f64, Theta) {
    if b.0 > a.0 {
        b
    } else {
        a
    }
}

/// `max_theta |(1/n) log R_n(theta) + h(theta)|` over a closure-inclusive
/// grid, along one path observed at each `n` in `n_list`.
///
/// The grid is streamed row by row, so fine 2-D grids need no storage.
pub fn uniform_convergence_probe(
    model: &ModelSpec,
    process: &TrueProcess,
    n_list: &[usize],
    grid_resolution: u64,
    seed: u64,
) -> Result<Vec<SupGap>> {
    validate_checkpoints(n_list)?;
    let resolution = grid_resolution.max(1);
    let boxes = model.domain().boxes();
    if let ModelFamily::Custom(_) = model.family() {
        return Err(Error::NoClosedForm(model.name().into()));
    }
    let series = simulate_ar1(process, *n_list.last().unwrap(), seed)?;
    checkpoint_samples(&series, n_list)
        .iter()
        .map(|sample| {
            let n = sample.n() as f64;
            let log_p = true_loglik(sample, process);
            let mut best = (f64::NEG_INFINITY, boxes[0].theta([boxes[0].lo(0), 0.0]));
            for bx in &boxes {
                let xs = closure_axis(bx.lo(0), bx.hi(0), resolution);
                let ys = if bx.dims() == 2 {
                    closure_axis(bx.lo(1), bx.hi(1), resolution)
                } else {
                    vec![0.0]
                };
                let rows = xs
                    .par_iter()
                    .map(|&x| -> Result<(f64, Theta)> {
                        let mut row_best = (f64::NEG_INFINITY, bx.theta([x, ys[0]]));
                        for &y in &ys {
                            let t = bx.theta([x, y]);
                            let gap = ((model.log_lik(&t, sample) - log_p) / n + closed_rate(model, process, &t)?).abs();
                            row_best = first_max(row_best, (gap, t));
                        }
                        Ok(row_best)
                    })
                    .collect::<Result<Vec<_>>>()?;
                best = rows.into_iter().fold(best, first_max);
            }
            Ok(SupGap {
                n: sample.n(),
                sup_gap: best.0,
                at: best.1,
            })
        })
        .collect()
}

/// As [`uniform_convergence_probe`] on an explicit set of parameter points.
pub fn uniform_convergence_on(
    model: &ModelSpec,
    process: &TrueProcess,
    n_list: &[usize],
    grid: &[Theta],
    seed: u64,
) -> Result<Vec<SupGap>> {
    validate_checkpoints(n_list)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let rates = grid.iter().map(|t| closed_rate(model, process, t)).collect::<Result<Vec<f64>>>()?;
    let series = simulate_ar1(process, *n_list.last().unwrap(), seed)?;
    Ok(checkpoint_samples(&series, n_list)
        .iter()
        .map(|sample| {
            let n = sample.n() as f64;
            let log_p = true_loglik(sample, process);
            let best = grid
                .iter()
                .zip(&rates)
                .map(|(t, h)| (((model.log_lik(t, sample) - log_p) / n + h).abs(), *t))
                .fold((f64::NEG_INFINITY, grid[0]), first_max);
            SupGap {
                n: sample.n(),
                sup_gap: best.0,
                at: best.1,
            }
        })
        .collect())
}

/// Summary of a sup-probe against [`A3_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A3Summary {
    pub first: f64,
    pub last: f64,
    pub threshold: f64,
    pub grid_too_coarse: bool,
    pub status: Status,
}

pub fn summarize_a3(rows: &[SupGap], grid_resolution: u64) -> A3Summary {
    let first = rows.first().map_or(f64::NAN, |r| r.sup_gap);
    let last = rows.last().map_or(f64::NAN, |r| r.sup_gap);
    let coarse = grid_resolution < MIN_SUP_RESOLUTION;
    let ok = last < first && last < A3_THRESHOLD && !coarse;
    A3Summary {
        first,
        last,
        threshold: A3_THRESHOLD,
        grid_too_coarse: coarse,
        status: Status::from_ok(ok),
    }
}

/// A member `G_T` of a sieve family.
#[derive(Debug, Clone, PartialEq)]
pub struct Sieve {
    pub index: u64,
    pub domain: ParameterDomain,
    pub beta: f64,
}

impl Sieve {
    /// `G_T = Theta`.
    pub fn full(model: &ModelSpec, index: u64, beta: f64) -> Self {
        Self {
            index,
            domain: model.domain().clone(),
            beta,
        }
    }

    /// `G_T = {|rho| <= exp(beta T)} ∩ Theta`; `None` when the cut removes
    /// every box.
    pub fn rho_bound(model: &ModelSpec, index: u64, beta: f64) -> Option<Self> {
        let bound = (beta * index as f64).exp();
        let domain = model.domain().clip_axis(0, -bound, bound)?;
        Some(Self { index, domain, beta })
    }
}

/// One row of [`sieve_mass_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveRow {
    pub t: u64,
    pub mass: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Slack allowed for quadrature roundoff when comparing mass with the bound.
const MASS_SLACK: f64 = 1e-12;
const SIEVE_RESOLUTION: u64 = 256;

/// Prior mass of each `G_T` against `1 - alpha exp(-beta T)`.
///
/// `h_theta` is `h(Theta)` for the model; every sieve needs `beta > 2 h(Theta)`.
pub fn sieve_mass_check<F>(model: &ModelSpec, sieve_family: F, alpha: f64, t_list: &[u64], h_theta: f64) -> Result<Vec<SieveRow>>
where
    F: Fn(u64) -> Result<Sieve>,
{
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    t_list
        .iter()
        .map(|&t| {
            let sieve = sieve_family(t)?;
            if !(sieve.beta > 2.0 * h_theta) {
                return Err(Error::SieveBeta {
                    beta: sieve.beta,
                    bound: 2.0 * h_theta,
                });
            }
            check_subdomain(model.domain(), &sieve.domain)?;
            let mass = prior_mass(model, &sieve.domain, SIEVE_RESOLUTION)?;
            let bound = 1.0 - alpha * (-sieve.beta * t as f64).exp();
            Ok(SieveRow {
                t,
                mass,
                bound,
                ok: mass >= bound - MASS_SLACK,
            })
        })
        .collect()
}

fn check_subdomain(outer: &ParameterDomain, inner: &ParameterDomain) -> Result<()> {
    for bx in inner.boxes() {
        let dims = bx.dims();
        for corner in 0..(1 << dims) {
            let c = [
                if corner & 1 == 0 { bx.lo(0) } else { bx.hi(0) },
                if dims == 2 && corner & 2 != 0 { bx.hi(1) } else { bx.lo(dims - 1) },
            ];
            let theta = bx.theta(c);
            if !outer.contains_closure(&theta) {
                return Err(Error::OutsideDomain(theta.as_slice().to_vec()));
            }
        }
    }
    Ok(())
}

/// `pi{theta : h(theta) > threshold}` from closed-form rates.
pub fn a4_set_mass(model: &ModelSpec, process: &TrueProcess, threshold: f64) -> Result<f64> {
    divergence_set_mass(
        model,
        |t| {
            model
                .closed_form_rate(t, process)
                .ok_or_else(|| Error::NoClosedForm(model.name().into()))
        },
        threshold,
    )
}

/// One row of [`a2_expectation_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2Row {
    pub n: usize,
    /// Control-variate estimate of `E[(1/n) log R_n(rho1)]`.
    pub mean_rate: f64,
    /// `|mean_rate + h_1(rho1)|`.
    pub closed_form_gap: f64,
    /// Standard error of `mean_rate`.
    pub std_error: f64,
    /// Plain replication mean and its standard error.
    pub plain_mean_rate: f64,
    pub plain_std_error: f64,
}

/// Monte Carlo `E[(1/n) log R_n(rho1)]` for the known-sigma AR(1) model.
///
/// Replication `r` uses stream `r` of `seed` and one path observed at every
/// `n` in `n_list`. The plain mean has noise of order `n^{-1/2}`, far above
/// the `O(1/n)` bias this probe is meant to resolve, so the reported
/// `mean_rate` subtracts the two zero-mean controls
/// `sum eps_t x_{t-1}` and `sum (eps_t^2 - sigma0^2)` with least-squares
/// coefficients. The plain estimate is kept alongside.
pub fn a2_expectation_probe(process: &TrueProcess, rho1: f64, n_list: &[usize], replications: usize, seed: u64) -> Result<Vec<A2Row>> {
    validate_checkpoints(n_list)?;
    if n_list[0] < MIN_MC_LENGTH {
        return Err(Error::SampleSize {
            min: MIN_MC_LENGTH,
            got: n_list[0],
        });
    }
    if replications < 4 {
        return Err(Error::TooFew {
            what: "replications",
            min: 4,
            got: replications,
        });
    }
    let (rho0, sigma0) = (process.rho0(), process.sigma0());
    let h1 = crate::ar1::h1_closed(rho1, &Ar1ClosedForms::new(process)).value;
    let n_max = *n_list.last().unwrap();
    // Per replication and checkpoint: (y, c1, c2).
    let draws: Vec<Vec<[f64; 3]>> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<[f64; 3]>> {
            let series = simulate_ar1_stream(process, n_max, seed, r as u64)?;
            let values = series.values();
            let mut acc = StatsAccumulator::new();
            let mut noise_cross = NeumaierSum::new();
            let mut noise_sq = NeumaierSum::new();
            let mut prev = 0.0;
            let mut out = Vec::with_capacity(n_list.len());
            for &n in n_list {
                for &x in &values[acc.n()..n] {
                    let eps = x - rho0 * prev;
                    noise_cross.add(eps * prev);
                    noise_sq.add(eps * eps - sigma0 * sigma0);
                    acc.push(x);
                    prev = x;
                }
                let stats = acc.snapshot();
                let log_r = crate::ar1::log_ratio_closed(&stats, rho0, rho1, sigma0);
                let nf = n as f64;
                out.push([log_r / nf, noise_cross.value() / nf, noise_sq.value() / nf]);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let rows: Vec<[f64; 3]> = draws.iter().map(|d| d[k]).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let (plain, plain_sd) = mean_sd(&ys);
            let (mean_rate, cv_se) = control_variate_mean(&rows);
            A2Row {
                n,
                mean_rate,
                closed_form_gap: (mean_rate + h1).abs(),
                std_error: cv_se,
                plain_mean_rate: plain,
                plain_std_error: plain_sd / (replications as f64).sqrt(),
            }
        })
        .collect())
}

/// Mean of `y` adjusted by two zero-mean controls, with its standard error.
fn control_variate_mean(rows: &[[f64; 3]]) -> (f64, f64) {
    let m = rows.len() as f64;
    let mean = |j: usize| rows.iter().map(|r| r[j]).sum::<f64>() / m;
    let (my, m1, m2) = (mean(0), mean(1), mean(2));
    let cov = |a: usize, b: usize, ma: f64, mb: f64| rows.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>();
    let s11 = cov(1, 1, m1, m1);
    let s22 = cov(2, 2, m2, m2);
    let s12 = cov(1, 2, m1, m2);
    let s1y = cov(1, 0, m1, my);
    let s2y = cov(2, 0, m2, my);
    let det = s11 * s22 - s12 * s12;
    if !(det > 0.0) || rows.iter().all(|r| r[0] == rows[0][0]) {
        let (mu, sd) = mean_sd(&rows.iter().map(|r| r[0]).collect::<Vec<_>>());
        return (mu, sd / m.sqrt());
    }
    let b1 = (s22 * s1y - s12 * s2y) / det;
    let b2 = (s11 * s2y - s12 * s1y) / det;
    let adjusted = my - b1 * m1 - b2 * m2;
    let resid: f64 = rows
        .iter()
        .map(|r| {
            let e = (r[0] - my) - b1 * (r[1] - m1) - b2 * (r[2] - m2);
            e * e
        })
        .sum();
    // Three fitted parameters; the intercept uncertainty dominates.
    let var = resid / (m - 3.0);
    (adjusted, (var / m).sqrt())
}

/// Summary of an A2 probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2Summary {
    /// Log-log slope of the gap against `n`.
    pub slope: f64,
    pub decreasing: bool,
    /// Final gap below three plain-Monte-Carlo standard errors.
    pub final_within_3se: bool,
    pub status: Status,
}

pub fn summarize_a2(rows: &[A2Row]) -> A2Summary {
    let decreasing = rows.windows(2).all(|w| w[1].closed_form_gap < w[0].closed_form_gap);
    let slope = if rows.iter().all(|r| r.closed_form_gap > 0.0) && rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.closed_form_gap.ln()).collect();
        ls_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    let last = rows.last();
    let final_within_3se = last.is_some_and(|r| r.closed_form_gap <= 3.0 * r.plain_std_error);
    let all_zero = rows.iter().all(|r| r.closed_form_gap == 0.0);
    let ok = all_zero || (decreasing && slope >= A2_SLOPE_RANGE.0 && slope <= A2_SLOPE_RANGE.1 && final_within_3se);
    A2Summary {
        slope,
        decreasing,
        final_within_3se,
        status: Status::from_ok(ok),
    }
}

/// Closed-form rate, for callers that want a `rate_fn`.
pub fn closed_rate_fn<'a>(model: &'a ModelSpec, process: &'a TrueProcess) -> impl Fn(&Theta) -> Result<DivergenceRate> + Sync + 'a {
    move |t| {
        model
            .closed_form_rate(t, process)
            .ok_or_else(|| Error::NoClosedForm(model.name().into()))
    }
}
