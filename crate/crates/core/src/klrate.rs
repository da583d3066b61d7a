//! Kullback–Leibler divergence rates `h(theta)` by Monte Carlo, and the
//! essential infimum `h(Theta)` over a model's domain.
//!
//! With a prior density that is strictly positive and continuous on the
//! domain, the essential infimum of a continuous rate function equals its
//! plain infimum over the closure, which is what [`ess_inf_h`] computes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar1::{simulate_ar1_stream, true_loglik};
use crate::error::{Error, Result};
use crate::marginal::{QuadratureGrid, QuadratureRule};
use crate::model::{DivergenceRate, ModelSpec, ParamBox, Theta, TrueProcess};
use crate::numeric::{golden_section_min, log_sum_exp, mean_sd};

pub const MIN_MC_LENGTH: usize = 100;

/// Resolution (nodes per unit length) used by [`divergence_set_mass`].
pub const SET_MASS_RESOLUTION: u64 = 256;

/// Monte Carlo estimate of `h(theta)` at a single large `n`.
///
/// Replication `r` simulates the true process on stream `r` of `seed`, so
/// the estimate does not depend on the thread count.
pub fn kl_rate_mc(
    model: &ModelSpec,
    theta: &Theta,
    process: &TrueProcess,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<DivergenceRate> {
    if n < MIN_MC_LENGTH {
        return Err(Error::SampleSize {
            min: MIN_MC_LENGTH,
            got: n,
        });
    }
    if replications < 2 {
        return Err(Error::TooFew {
            what: "replications",
            min: 2,
            got: replications,
        });
    }
    model.check_point(theta)?;
    let draws = (0..replications)
        .into_par_iter()
        .map(|r| {
            let series = simulate_ar1_stream(process, n, seed, r as u64)?;
            let sample = series.sample();
            let log_r = model.log_lik(theta, &sample) - true_loglik(&sample, process);
            if !log_r.is_finite() {
                return Err(Error::NonFiniteLogLik {
                    seed,
                    stream: r as u64,
                    replication: r,
                });
            }
            Ok(-log_r / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_sd(&draws);
    Ok(DivergenceRate::monte_carlo(mean, sd / (replications as f64).sqrt()))
}

/// Result of [`ess_inf_h`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssInf {
    pub h_theta: DivergenceRate,
    pub argmin: Theta,
}

/// Closure-inclusive grid coordinates of one box axis.
fn axis_points(lo: f64, hi: f64, resolution: u64) -> Vec<f64> {
    let width = hi - lo;
    if !(width > 0.0) {
        return vec![lo];
    }
    let cells = ((resolution as f64 * width).ceil() as usize).max(2);
    (0..=cells)
        .map(|k| if k == cells { hi } else { lo + width * k as f64 / cells as f64 })
        .collect()
}

/// Grid minimum of `rate_fn` over the domain closure, refined by golden
/// section (1-D) or coordinate descent (2-D) inside the best cell.
///
/// Ties resolve to the first grid point in box order, i.e. the smallest.
pub fn ess_inf_h<F>(model: &ModelSpec, rate_fn: F, grid_resolution: u64) -> Result<EssInf>
where
    F: Fn(&Theta) -> Result<DivergenceRate> + Sync,
{
    infimum_over_boxes(&model.domain().boxes(), rate_fn, grid_resolution)
}

/// [`ess_inf_h`] over an explicit list of boxes, which may be degenerate
/// (zero width in some axis, down to a single point).
pub fn infimum_over_boxes<F>(boxes: &[ParamBox], rate_fn: F, grid_resolution: u64) -> Result<EssInf>
where
    F: Fn(&Theta) -> Result<DivergenceRate> + Sync,
{
    if grid_resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    let mut best: Option<(DivergenceRate, Theta, ParamBox, [f64; 2])> = None;
    for &bx in boxes {
        let dims = bx.dims();
        let xs = axis_points(bx.lo(0), bx.hi(0), grid_resolution);
        let ys = if dims == 2 {
            axis_points(bx.lo(1), bx.hi(1), grid_resolution)
        } else {
            vec![0.0]
        };
        let points: Vec<Theta> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| bx.theta([x, y]))).collect();
        let rates = points.par_iter().map(&rate_fn).collect::<Result<Vec<_>>>()?;
        let cell = [cell_step(&xs), if dims == 2 { cell_step(&ys) } else { 0.0 }];
        for (theta, rate) in points.iter().zip(&rates) {
            if !rate.value.is_finite() {
                return Err(Error::InvalidArgument(format!("rate is not finite at {theta:?}")));
            }
            if best.as_ref().is_none_or(|b| rate.value < b.0.value) {
                best = Some((*rate, *theta, bx, cell));
            }
        }
    }
    let (grid_rate, grid_theta, bx, cell) = best.ok_or_else(|| Error::InvalidDomain("empty domain".into()))?;
    refine_min(&rate_fn, grid_rate, grid_theta, &bx, cell)
}

fn cell_step(points: &[f64]) -> f64 {
    if points.len() < 2 {
        0.0
    } else {
        points[1] - points[0]
    }
}

fn refine_min<F>(rate_fn: &F, grid_rate: DivergenceRate, grid_theta: Theta, bx: &ParamBox, cell: [f64; 2]) -> Result<EssInf>
where
    F: Fn(&Theta) -> Result<DivergenceRate>,
{
    let dims = bx.dims();
    // Errors cannot cross the golden-section closure; keep the first one.
    let failure = std::cell::RefCell::new(None);
    let eval = |theta: &Theta| -> f64 {
        match rate_fn(theta) {
            Ok(r) => r.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let bracket = |d: usize, centre: f64| -> (f64, f64) { ((centre - cell[d]).max(bx.lo(d)), (centre + cell[d]).min(bx.hi(d))) };
    let mut c = [grid_theta.get(0), if dims == 2 { grid_theta.get(1) } else { 0.0 }];
    let mut value = grid_rate.value;
    let brackets: Vec<(f64, f64)> = (0..dims).map(|d| bracket(d, c[d])).collect();
    for _ in 0..if dims == 2 { 50 } else { 1 } {
        let before = value;
        for d in 0..dims {
            let (a, b) = brackets[d];
            if !(b > a) {
                continue;
            }
            let (x, v) = golden_section_min(
                |t| {
                    let mut p = c;
                    p[d] = t;
                    eval(&bx.theta(p))
                },
                a,
                b,
                (b - a) * 1e-13,
            );
            if v < value {
                c[d] = x;
                value = v;
            }
        }
        if before - value <= 1e-15 * value.abs().max(1e-300) {
            break;
        }
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    // A minimiser pinned to an interior edge of the search cell means the
    // function keeps falling outside it: the scan missed the true basin.
    for (d, &(a, b)) in brackets.iter().enumerate() {
        let tol = 1e-9 * (b - a).max(f64::MIN_POSITIVE);
        let at_inner_lo = a > bx.lo(d) && (c[d] - a).abs() <= tol;
        let at_inner_hi = b < bx.hi(d) && (b - c[d]).abs() <= tol;
        if (at_inner_lo || at_inner_hi) && value < grid_rate.value {
            return Err(Error::GridTooCoarse(c[..dims].to_vec()));
        }
    }
    if value < grid_rate.value {
        let argmin = bx.theta(c);
        Ok(EssInf {
            h_theta: rate_fn(&argmin)?,
            argmin,
        })
    } else {
        Ok(EssInf {
            h_theta: grid_rate,
            argmin: grid_theta,
        })
    }
}

/// `h(Theta)` from closed forms when available, otherwise by grid search on
/// Monte Carlo rates.
pub fn h_infimum(model: &ModelSpec, process: &TrueProcess, fallback: &McRateSettings) -> Result<EssInf> {
    if let Some((h_theta, argmin)) = model.closed_form_inf(process) {
        return Ok(EssInf { h_theta, argmin });
    }
    ess_inf_h(
        model,
        |theta| kl_rate_mc(model, theta, process, fallback.n, fallback.replications, fallback.seed),
        fallback.grid_resolution,
    )
}

/// Settings for the Monte Carlo route to `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRateSettings {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub grid_resolution: u64,
}

impl Default for McRateSettings {
    fn default() -> Self {
        Self {
            n: 10_000,
            replications: 50,
            seed: 0,
            grid_resolution: 16,
        }
    }
}

/// `h(theta)` by closed form when the family has one, else by Monte Carlo.
pub fn h_at(model: &ModelSpec, theta: &Theta, process: &TrueProcess, fallback: &McRateSettings) -> Result<DivergenceRate> {
    model.check_point(theta)?;
    match model.closed_form_rate(theta, process) {
        Some(h) => Ok(h),
        None => kl_rate_mc(model, theta, process, fallback.n, fallback.replications, fallback.seed),
    }
}

/// Prior mass of `{theta : rate_fn(theta) > threshold}` by Gauss–Legendre
/// quadrature of the indicator.
///
/// Thresholds must be non-negative; zero gives the mass off the zero set of
/// the rate.
pub fn divergence_set_mass<F>(model: &ModelSpec, rate_fn: F, threshold: f64) -> Result<f64>
where
    F: Fn(&Theta) -> Result<DivergenceRate> + Sync,
{
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be non-negative, got {threshold}")));
    }
    let grid = QuadratureGrid::new(model.domain(), QuadratureRule::GaussLegendre, SET_MASS_RESOLUTION)?;
    let terms = grid
        .nodes()
        .par_iter()
        .zip(grid.log_weights().par_iter())
        .map(|(theta, lw)| {
            let rate = rate_fn(theta)?;
            Ok(if rate.value > threshold {
                model.log_prior(theta) + lw
            } else {
                f64::NEG_INFINITY
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(&terms).exp().min(1.0))
}
