//! Log marginal likelihoods `log m(X_n | M) = log ∫ L_n(theta) pi(theta) dtheta`
//! by deterministic quadrature over 1-D and 2-D unions of boxes.
//!
//! All reductions are ordered log-sum-exp folds, so serial and parallel node
//! evaluation give identical bits. Concentrated integrands are handled by
//! localising each box to the region where the integrand is within
//! [`WINDOW_LOG_DROP`] nats of its maximum before laying down the grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamBox, ParameterDomain, Sample, Theta};
use crate::numeric::{gauss_legendre, golden_section_max, log_sum_exp, GL_ORDER};

/// Integrand mass below `max - WINDOW_LOG_DROP` (log scale) is discarded.
pub const WINDOW_LOG_DROP: f64 = 60.0;

/// Per-dimension node cap for refinement.
pub const MAX_NODES_PER_DIM: usize = 1 << 20;

/// Total node cap; only binds for 2-D grids.
pub const MAX_TOTAL_NODES: usize = 1 << 25;

const MIN_WINDOW_PANELS: usize = 16;
const COARSE_CELLS: usize = 64;
const PARALLEL_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    Midpoint,
    #[default]
    GaussLegendre,
}

/// Nodes and log weights covering a parameter domain.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    domain: ParameterDomain,
    nodes: Vec<Theta>,
    log_weights: Vec<f64>,
    rule: QuadratureRule,
    resolution: u64,
    nodes_per_dim: usize,
}

impl QuadratureGrid {
    /// Grid over the whole domain with `resolution` nodes per unit length.
    pub fn new(domain: &ParameterDomain, rule: QuadratureRule, resolution: u64) -> Result<Self> {
        let boxes = domain.boxes();
        Self::build(domain, &boxes, rule, resolution, 1)
    }

    /// Grid restricted to `windows` (each inside one box of `domain`).
    pub fn over_windows(domain: &ParameterDomain, windows: &[ParamBox], rule: QuadratureRule, resolution: u64) -> Result<Self> {
        Self::build(domain, windows, rule, resolution, MIN_WINDOW_PANELS)
    }

    fn build(domain: &ParameterDomain, boxes: &[ParamBox], rule: QuadratureRule, resolution: u64, min_panels: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("quadrature resolution must be positive".into()));
        }
        let mut nodes = Vec::new();
        let mut log_weights = Vec::new();
        let mut nodes_per_dim = 0;
        for bx in boxes {
            if (0..bx.dims()).any(|d| !(bx.width(d) > 0.0)) {
                continue;
            }
            let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..bx.dims())
                .map(|d| axis_rule(bx.lo(d), bx.hi(d), rule, resolution, min_panels))
                .collect();
            for a in &axes {
                nodes_per_dim = nodes_per_dim.max(a.0.len());
            }
            match axes.as_slice() {
                [(x, w)] => {
                    for (xi, wi) in x.iter().zip(w) {
                        nodes.push(Theta::rho(*xi));
                        log_weights.push(wi.ln());
                    }
                }
                [(x, wx), (y, wy)] => {
                    for (xi, wxi) in x.iter().zip(wx) {
                        let lx = wxi.ln();
                        for (yj, wyj) in y.iter().zip(wy) {
                            nodes.push(Theta::rho_sigma(*xi, *yj));
                            log_weights.push(lx + wyj.ln());
                        }
                    }
                }
                _ => unreachable!("domains have 1 or 2 dimensions"),
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidDomain("no box of positive volume to integrate over".into()));
        }
        Ok(Self {
            domain: domain.clone(),
            nodes,
            log_weights,
            rule,
            resolution,
            nodes_per_dim,
        })
    }

    /// Node count needed by [`Self::over_windows`], without building the grid.
    fn planned_nodes(windows: &[ParamBox], rule: QuadratureRule, resolution: u64) -> (usize, usize) {
        let mut per_dim = 0;
        let mut total = 0usize;
        for bx in windows {
            let mut prod = 1usize;
            for d in 0..bx.dims() {
                let k = axis_node_count(bx.width(d), rule, resolution, MIN_WINDOW_PANELS);
                per_dim = per_dim.max(k);
                prod = prod.saturating_mul(k);
            }
            total = total.saturating_add(prod);
        }
        (per_dim, total)
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn nodes(&self) -> &[Theta] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn axis_node_count(width: f64, rule: QuadratureRule, resolution: u64, min_panels: usize) -> usize {
    if !(width > 0.0) {
        return 0;
    }
    let wanted = (resolution as f64 * width).ceil();
    match rule {
        QuadratureRule::Midpoint => (wanted as usize).max(2).max(min_panels),
        QuadratureRule::GaussLegendre => ((wanted / GL_ORDER as f64).ceil() as usize).max(min_panels) * GL_ORDER,
    }
}

fn axis_rule(lo: f64, hi: f64, rule: QuadratureRule, resolution: u64, min_panels: usize) -> (Vec<f64>, Vec<f64>) {
    let width = hi - lo;
    let count = axis_node_count(width, rule, resolution, min_panels);
    match rule {
        QuadratureRule::Midpoint => {
            let h = width / count as f64;
            let x = (0..count).map(|k| lo + (k as f64 + 0.5) * h).collect();
            (x, vec![h; count])
        }
        QuadratureRule::GaussLegendre => {
            let panels = count / GL_ORDER;
            let h = width / panels as f64;
            let (gx, gw) = gauss_legendre();
            let mut x = Vec::with_capacity(count);
            let mut w = Vec::with_capacity(count);
            for p in 0..panels {
                let a = lo + p as f64 * h;
                for (xi, wi) in gx.iter().zip(gw) {
                    x.push(a + 0.5 * h * (xi + 1.0));
                    w.push(0.5 * h * wi);
                }
            }
            (x, w)
        }
    }
}

fn evaluate<F: Fn(&Theta) -> f64 + Sync>(grid: &QuadratureGrid, f: F) -> Vec<f64> {
    let eval = |(theta, lw): (&Theta, &f64)| f(theta) + lw;
    if grid.len() >= PARALLEL_THRESHOLD {
        grid.nodes.par_iter().zip(grid.log_weights.par_iter()).map(eval).collect()
    } else {
        grid.nodes.iter().zip(grid.log_weights.iter()).map(eval).collect()
    }
}

/// `log ∫ L_n(theta) pi(theta) dtheta` on `grid`.
pub fn log_marginal(model: &ModelSpec, sample: &Sample<'_>, grid: &QuadratureGrid) -> Result<f64> {
    if grid.domain() != model.domain() {
        return Err(Error::DomainMismatch);
    }
    let values = evaluate(grid, |theta| model.log_lik(theta, sample) + model.log_prior_unchecked(theta));
    let lse = log_sum_exp(&values);
    if lse.is_nan() {
        return Err(Error::InvalidArgument("integrand produced NaN".into()));
    }
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateIntegrand);
    }
    Ok(lse)
}

/// Prior probability of `region` (a subset of the model domain).
pub fn prior_mass(model: &ModelSpec, region: &ParameterDomain, resolution: u64) -> Result<f64> {
    let grid = QuadratureGrid::new(region, QuadratureRule::GaussLegendre, resolution)?;
    let values = evaluate(&grid, |theta| model.log_prior(theta));
    Ok(log_sum_exp(&values).exp())
}

/// Numerical integral of the prior density over its own domain; should be 1.
///
/// Starts at 256 nodes per unit and doubles until two levels agree to
/// 1e-12, so sharply truncated priors are resolved too.
pub fn prior_normalization(model: &ModelSpec) -> Result<f64> {
    let mut resolution = 256;
    let mut previous = prior_mass(model, model.domain(), resolution)?;
    loop {
        resolution *= 2;
        let (per_dim, total) = QuadratureGrid::planned_nodes(&model.domain().boxes(), QuadratureRule::GaussLegendre, resolution);
        if per_dim > MAX_NODES_PER_DIM || total > MAX_TOTAL_NODES {
            return Ok(previous);
        }
        let mass = prior_mass(model, model.domain(), resolution)?;
        if (mass - previous).abs() <= 1e-12 {
            return Ok(mass);
        }
        previous = mass;
    }
}

/// Options for [`refine_until_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub rule: QuadratureRule,
    /// Nodes per unit length at the first level; `None` means `ceil(8 sqrt(n))`.
    pub initial_resolution: Option<u64>,
    pub max_nodes_per_dim: usize,
    pub max_total_nodes: usize,
    /// Restrict each box to its high-mass window before integrating.
    pub localize: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            initial_resolution: None,
            max_nodes_per_dim: MAX_NODES_PER_DIM,
            max_total_nodes: MAX_TOTAL_NODES,
            localize: true,
        }
    }
}

/// Result of a refinement run.
#[derive(Debug, Clone)]
pub struct Refined {
    pub value: f64,
    pub resolution: u64,
    /// Grid that produced `value`.
    pub grid: QuadratureGrid,
}

pub fn refine_until(model: &ModelSpec, sample: &Sample<'_>, tol: f64) -> Result<Refined> {
    refine_until_with(model, sample, tol, &QuadratureOptions::default())
}

/// Double the resolution until successive log marginals differ by less than `tol`.
pub fn refine_until_with(model: &ModelSpec, sample: &Sample<'_>, tol: f64, opts: &QuadratureOptions) -> Result<Refined> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
    }
    let windows = if opts.localize {
        locate_windows(model, sample)
    } else {
        model.domain().boxes()
    };
    let mut resolution = opts
        .initial_resolution
        .unwrap_or_else(|| (8.0 * (sample.n() as f64).sqrt()).ceil() as u64)
        .max(1);
    let mut previous: Option<f64> = None;
    let mut previous_total = 0;
    loop {
        let (per_dim, total) = QuadratureGrid::planned_nodes(&windows, opts.rule, resolution);
        if per_dim > opts.max_nodes_per_dim || total > opts.max_total_nodes {
            return Err(Error::ResolutionCap { nodes: per_dim });
        }
        // The per-window panel floor can leave the grid unchanged across a
        // doubling; comparing identical grids would report false convergence.
        if total == previous_total {
            resolution = resolution.checked_mul(2).ok_or(Error::ResolutionCap { nodes: per_dim })?;
            continue;
        }
        previous_total = total;
        let grid = QuadratureGrid::over_windows(model.domain(), &windows, opts.rule, resolution)?;
        let value = log_marginal(model, sample, &grid)?;
        if let Some(prev) = previous {
            if (value - prev).abs() < tol {
                return Ok(Refined { value, resolution, grid });
            }
        }
        previous = Some(value);
        resolution = resolution.checked_mul(2).ok_or(Error::ResolutionCap { nodes: per_dim })?;
    }
}

/// High-mass window of every domain box, in box order.
///
/// The integrand is located by a coarse scan followed by coordinate-wise
/// golden-section ascent; window edges are where the profile of the log
/// integrand drops [`WINDOW_LOG_DROP`] below the maximum. This is exact for
/// unimodal (1-D) and quasi-concave (2-D) integrands, which covers the
/// Gaussian AR(1) families with uniform or truncated-normal priors. The
/// window boundary is sampled afterwards and widened if it still carries mass.
pub fn locate_windows(model: &ModelSpec, sample: &Sample<'_>) -> Vec<ParamBox> {
    let f = |theta: &Theta| model.log_lik(theta, sample) + model.log_prior_unchecked(theta);
    model.domain().boxes().iter().map(|bx| locate_window(&f, bx)).collect()
}

fn locate_window<F: Fn(&Theta) -> f64>(f: &F, bx: &ParamBox) -> ParamBox {
    let dims = bx.dims();
    if (0..dims).any(|d| !(bx.width(d) > 0.0)) {
        return *bx;
    }
    let at = |c: [f64; 2]| f(&bx.theta(c));
    // Coarse scan on the closure.
    let coord = |d: usize, k: usize| bx.lo(d) + bx.width(d) * k as f64 / COARSE_CELLS as f64;
    let mut best = ([bx.lo(0), if dims == 2 { bx.lo(1) } else { 0.0 }], f64::NEG_INFINITY);
    let inner = if dims == 2 { COARSE_CELLS } else { 0 };
    for i in 0..=COARSE_CELLS {
        for j in 0..=inner {
            let c = [coord(0, i), if dims == 2 { coord(1, j) } else { 0.0 }];
            let v = at(c);
            if v > best.1 {
                best = (c, v);
            }
        }
    }
    if best.1 == f64::NEG_INFINITY || best.1.is_nan() {
        return *bx;
    }
    // Coordinate ascent to the mode.
    let mut mode = best.0;
    let mut fmax = best.1;
    for _ in 0..if dims == 2 { 40 } else { 1 } {
        let before = fmax;
        for d in 0..dims {
            let tol = bx.width(d) * 1e-14;
            let (x, v) = golden_section_max(
                |t| {
                    let mut c = mode;
                    c[d] = t;
                    at(c)
                },
                bx.lo(d),
                bx.hi(d),
                tol,
            );
            if v >= fmax {
                mode[d] = x;
                fmax = v;
            }
        }
        if fmax - before <= 1e-13 * fmax.abs().max(1.0) {
            break;
        }
    }
    let threshold = fmax - WINDOW_LOG_DROP;
    // Profile along axis d: maximise over the other axis.
    let profile = |d: usize, t: f64| -> f64 {
        if dims == 1 {
            return at([t, 0.0]);
        }
        let o = 1 - d;
        let (_, v) = golden_section_max(
            |s| {
                let mut c = [0.0; 2];
                c[d] = t;
                c[o] = s;
                at(c)
            },
            bx.lo(o),
            bx.hi(o),
            bx.width(o) * 1e-14,
        );
        v
    };
    let mut window = *bx;
    for (d, &m) in mode.iter().enumerate().take(dims) {
        let lo = edge(|t| profile(d, t) >= threshold, m, bx.lo(d));
        let hi = edge(|t| profile(d, t) >= threshold, m, bx.hi(d));
        window.set(d, lo, hi);
    }
    widen_until_boundary_clear(&at, bx, &mut window, mode, threshold);
    window
}

/// Outermost point between `inside` and `limit` where `keep` still holds,
/// rounded outward to the first failing point.
fn edge<P: Fn(f64) -> bool>(keep: P, inside: f64, limit: f64) -> f64 {
    if keep(limit) {
        return limit;
    }
    let (mut a, mut b) = (inside, limit);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if keep(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

fn widen_until_boundary_clear<F: Fn([f64; 2]) -> f64>(at: &F, bx: &ParamBox, window: &mut ParamBox, mode: [f64; 2], threshold: f64) {
    let dims = bx.dims();
    const SAMPLES: usize = 32;
    for _ in 0..16 {
        let mut grown = false;
        for d in 0..dims {
            for upper in [false, true] {
                let e = if upper { window.hi(d) } else { window.lo(d) };
                let at_box = if upper { e >= bx.hi(d) } else { e <= bx.lo(d) };
                if at_box {
                    continue;
                }
                let hot = if dims == 1 {
                    at([e, 0.0]) >= threshold
                } else {
                    let o = 1 - d;
                    (0..=SAMPLES).any(|k| {
                        let s = window.lo(o) + window.width(o) * k as f64 / SAMPLES as f64;
                        let mut c = [0.0; 2];
                        c[d] = e;
                        c[o] = s;
                        at(c) >= threshold
                    })
                };
                if hot {
                    let grown_edge = mode[d] + 2.0 * (e - mode[d]);
                    if upper {
                        window.set(d, window.lo(d), grown_edge.min(bx.hi(d)));
                    } else {
                        window.set(d, grown_edge.max(bx.lo(d)), window.hi(d));
                    }
                    grown = true;
                }
            }
        }
        if !grown {
            return;
        }
    }
}

/// Largest deviation, over `probes`, of the log-marginal identity
/// `log m = log L(theta) + log pi(theta) - log pi(theta | X_n)`, with the
/// posterior density formed from the same grid.
pub fn log_marginal_identity_check(model: &ModelSpec, sample: &Sample<'_>, probes: &[Theta], grid: &QuadratureGrid) -> Result<f64> {
    let log_m = log_marginal(model, sample, grid)?;
    let mut worst: f64 = 0.0;
    for theta in probes {
        model.check_point(theta)?;
        let joint = model.log_lik(theta, sample) + model.log_prior(theta);
        let log_post = joint - log_m;
        if log_post == f64::NEG_INFINITY || log_post.is_nan() {
            return Err(Error::ZeroPosteriorDensity(theta.as_slice().to_vec()));
        }
        let implied = model.log_lik(theta, sample) + model.log_prior(theta) - log_post;
        worst = worst.max((implied - log_m).abs());
    }
    Ok(worst)
}

/// Log posterior density `log pi(theta | X_n)` given a log marginal.
pub fn log_posterior_density(model: &ModelSpec, sample: &Sample<'_>, theta: &Theta, log_marginal: f64) -> f64 {
    model.log_lik(theta, sample) + model.log_prior(theta) - log_marginal
}
