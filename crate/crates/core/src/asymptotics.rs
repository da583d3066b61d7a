//! Bayes factor trajectories `n -> (1/n) log B_n` along single sample paths,
//! their limits, and posterior log-density rates.
//!
//! For models `M1`, `M2` the normalised log Bayes factor settles at
//! `h_2(Theta_2) - h_1(Theta_1)` almost surely; the posterior density at a
//! fixed `theta` decays like `exp(-n J(theta))` with
//! `J(theta) = h(theta) - h(Theta)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ar1::{log_likelihood_ratio_sample, simulate_ar1, StatsAccumulator};
use crate::error::{Error, Result};
use crate::klrate::{h_at, h_infimum, McRateSettings};
use crate::marginal::{refine_until_with, QuadratureOptions};
use crate::model::{DivergenceRate, ModelSpec, Sample, Theta, TimeSeries, TrueProcess};
use crate::numeric::{ls_slope, mean_sd};

/// Log-spaced default checkpoints `10^2, 10^2.5, ..., 10^5`.
pub const DEFAULT_CHECKPOINTS: [usize; 7] = [100, 316, 1000, 3162, 10_000, 31_623, 100_000];

pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;

/// Numerical settings shared by trajectory-style computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsOptions {
    /// Convergence tolerance for log marginals.
    pub tol: f64,
    pub quadrature: QuadratureOptions,
    /// Used for `h` when a model has no closed-form rate.
    pub mc: McRateSettings,
}

impl Default for AsymptoticsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            quadrature: QuadratureOptions::default(),
            mc: McRateSettings::default(),
        }
    }
}

/// `(1/n) log B_n` at increasing `n` along one realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub checkpoints: Vec<usize>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub model_pair: (String, String),
    /// Predicted limit `h_2(Theta_2) - h_1(Theta_1)`.
    pub theory_limit: f64,
    /// `(log m(X_n | M1), log m(X_n | M2))` per checkpoint.
    pub log_marginals: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trajectory has at least one checkpoint")
    }

    /// Unnormalised `log B_n` per checkpoint.
    pub fn log_bayes_factors(&self) -> Vec<f64> {
        self.checkpoints.iter().zip(&self.values).map(|(&n, v)| v * n as f64).collect()
    }
}

pub(crate) fn validate_checkpoints(checkpoints: &[usize]) -> Result<()> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadCheckpoints);
    }
    Ok(())
}

/// Samples at each checkpoint with sufficient statistics accumulated once.
pub(crate) fn checkpoint_samples<'a>(series: &'a TimeSeries, checkpoints: &[usize]) -> Vec<Sample<'a>> {
    let values = series.values();
    let mut acc = StatsAccumulator::new();
    checkpoints
        .iter()
        .map(|&n| {
            acc.extend(&values[acc.n()..n]);
            Sample::with_stats(&values[..n], acc.snapshot())
        })
        .collect()
}

fn at_checkpoint(index: usize, n: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtCheckpoint {
        index,
        n,
        source: Box::new(e),
    }
}

/// `log m(X_n | M1) - log m(X_n | M2)`.
pub fn log_bayes_factor(m1: &ModelSpec, m2: &ModelSpec, sample: &Sample<'_>, opts: &AsymptoticsOptions) -> Result<f64> {
    let a = refine_until_with(m1, sample, opts.tol, &opts.quadrature)?.value;
    let b = refine_until_with(m2, sample, opts.tol, &opts.quadrature)?.value;
    Ok(a - b)
}

/// `h_2(Theta_2) - h_1(Theta_1)`.
pub fn theory_limit(process: &TrueProcess, m1: &ModelSpec, m2: &ModelSpec, opts: &AsymptoticsOptions) -> Result<f64> {
    let h1 = h_infimum(m1, process, &opts.mc)?.h_theta.value;
    let h2 = h_infimum(m2, process, &opts.mc)?.h_theta.value;
    Ok(h2 - h1)
}

pub fn trajectory(process: &TrueProcess, m1: &ModelSpec, m2: &ModelSpec, checkpoints: &[usize], seed: u64) -> Result<Trajectory> {
    trajectory_with(process, m1, m2, checkpoints, seed, &AsymptoticsOptions::default())
}

/// One simulated path of length `max(checkpoints)`; each checkpoint uses its
/// prefix, so the values along the trajectory share a realisation.
pub fn trajectory_with(
    process: &TrueProcess,
    m1: &ModelSpec,
    m2: &ModelSpec,
    checkpoints: &[usize],
    seed: u64,
    opts: &AsymptoticsOptions,
) -> Result<Trajectory> {
    validate_checkpoints(checkpoints)?;
    let series = simulate_ar1(process, *checkpoints.last().unwrap(), seed)?;
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut log_marginals = Vec::with_capacity(checkpoints.len());
    for (i, sample) in checkpoint_samples(&series, checkpoints).iter().enumerate() {
        let n = sample.n();
        let a = refine_until_with(m1, sample, opts.tol, &opts.quadrature)
            .map_err(at_checkpoint(i, n))?
            .value;
        let b = refine_until_with(m2, sample, opts.tol, &opts.quadrature)
            .map_err(at_checkpoint(i, n))?
            .value;
        values.push((a - b) / n as f64);
        log_marginals.push((a, b));
    }
    Ok(Trajectory {
        checkpoints: checkpoints.to_vec(),
        values,
        seed,
        model_pair: (m1.name().to_string(), m2.name().to_string()),
        theory_limit: theory_limit(process, m1, m2, opts)?,
        log_marginals,
    })
}

/// Limit read off the tails of several trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub point: f64,
    /// Twice the cross-trajectory s.d. of the tail means.
    pub halfwidth: f64,
    /// Mean least-squares slope of `log B_n` against `n` over the tail.
    pub slope_check: f64,
}

impl LimitEstimate {
    /// Whether the tail slope agrees with the point estimate.
    pub fn slope_consistent(&self) -> bool {
        (self.slope_check - self.point).abs() <= self.halfwidth
    }

    pub fn covers(&self, limit: f64) -> bool {
        (self.point - limit).abs() <= self.halfwidth
    }
}

/// Number of checkpoints in the tail used by [`fit_limit`].
pub fn tail_len(checkpoints: usize, tail_fraction: f64) -> usize {
    ((tail_fraction * checkpoints as f64).ceil() as usize).min(checkpoints)
}

pub fn fit_limit(trajectories: &[Trajectory], tail_fraction: f64) -> Result<LimitEstimate> {
    if trajectories.len() < 2 {
        return Err(Error::TooFew {
            what: "trajectories",
            min: 2,
            got: trajectories.len(),
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1), got {tail_fraction}"
        )));
    }
    let checkpoints = &trajectories[0].checkpoints;
    if trajectories.iter().any(|t| &t.checkpoints != checkpoints) {
        return Err(Error::CheckpointMismatch);
    }
    let k = tail_len(checkpoints.len(), tail_fraction);
    if k < 2 {
        return Err(Error::TooFewTailCheckpoints(k));
    }
    let start = checkpoints.len() - k;
    let ns: Vec<f64> = checkpoints[start..].iter().map(|&n| n as f64).collect();
    let mut tail_means = Vec::with_capacity(trajectories.len());
    let mut slopes = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        let tail = &t.values[start..];
        tail_means.push(mean_sd(tail).0);
        let log_b: Vec<f64> = tail.iter().zip(&ns).map(|(v, n)| v * n).collect();
        slopes.push(ls_slope(&ns, &log_b));
    }
    let (point, sd) = mean_sd(&tail_means);
    Ok(LimitEstimate {
        point,
        halfwidth: 2.0 * sd,
        slope_check: mean_sd(&slopes).0,
    })
}

/// `-J(theta) = -(h(theta) - h(Theta))`, the predicted posterior log-density rate.
pub fn posterior_rate_limit(model: &ModelSpec, process: &TrueProcess, theta: &Theta, opts: &AsymptoticsOptions) -> Result<f64> {
    let h = h_at(model, theta, process, &opts.mc)?.value;
    let inf = h_infimum(model, process, &opts.mc)?.h_theta.value;
    Ok(-(h - inf))
}

/// One checkpoint of [`posterior_logdensity_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRatePoint {
    pub n: usize,
    /// `(1/n) log pi(theta | X_n)`.
    pub rate: f64,
    pub log_lik: f64,
    pub log_prior: f64,
    pub log_marginal: f64,
}

pub fn posterior_logdensity_rate(
    model: &ModelSpec,
    process: &TrueProcess,
    theta: &Theta,
    checkpoints: &[usize],
    seed: u64,
) -> Result<Vec<PosteriorRatePoint>> {
    posterior_logdensity_rate_with(model, process, theta, checkpoints, seed, &AsymptoticsOptions::default())
}

pub fn posterior_logdensity_rate_with(
    model: &ModelSpec,
    process: &TrueProcess,
    theta: &Theta,
    checkpoints: &[usize],
    seed: u64,
    opts: &AsymptoticsOptions,
) -> Result<Vec<PosteriorRatePoint>> {
    model.check_point(theta)?;
    if !model.domain().contains(theta) {
        return Err(Error::OutsideDomain(theta.as_slice().to_vec()));
    }
    validate_checkpoints(checkpoints)?;
    let series = simulate_ar1(process, *checkpoints.last().unwrap(), seed)?;
    checkpoint_samples(&series, checkpoints)
        .iter()
        .enumerate()
        .map(|(i, sample)| {
            let n = sample.n();
            let log_marginal = refine_until_with(model, sample, opts.tol, &opts.quadrature)
                .map_err(at_checkpoint(i, n))?
                .value;
            let log_lik = model.log_lik(theta, sample);
            let log_prior = model.log_prior(theta);
            Ok(PosteriorRatePoint {
                n,
                rate: (log_lik + log_prior - log_marginal) / n as f64,
                log_lik,
                log_prior,
                log_marginal,
            })
        })
        .collect()
}

/// The six terms of
/// `(1/n) log B_n = (1/n)[log R(theta_1) + log pi_1(theta_1) - log pi_1(theta_1 | X)]
///                - (1/n)[log R(theta_2) + log pi_2(theta_2) - log pi_2(theta_2 | X)]`,
/// with `R = L / p_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub n: usize,
    /// In the order of the formula above, signs included.
    pub terms: [f64; 6],
    /// Direct `(1/n)(log m_1 - log m_2)`.
    pub direct: f64,
}

impl Decomposition {
    pub fn assembled(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn residual(&self) -> f64 {
        (self.assembled() - self.direct).abs()
    }

    /// The two prior terms `(1/n) log pi_i(theta_i)`, signs as in `terms`.
    pub fn prior_terms(&self) -> [f64; 2] {
        [self.terms[1], self.terms[4]]
    }
}

/// Decompose `(1/n) log B_n` at `(theta_1, theta_2)` given the two log marginals.
pub fn bf_decomposition(
    m1: &ModelSpec,
    m2: &ModelSpec,
    process: &TrueProcess,
    sample: &Sample<'_>,
    thetas: (&Theta, &Theta),
    log_marginals: (f64, f64),
) -> Result<Decomposition> {
    let n = sample.n() as f64;
    let part = |m: &ModelSpec, theta: &Theta, log_m: f64| -> Result<[f64; 3]> {
        m.check_point(theta)?;
        let log_r = log_likelihood_ratio_sample(sample, m, theta, process);
        let log_prior = m.log_prior(theta);
        let log_post = m.log_lik(theta, sample) + log_prior - log_m;
        if log_post == f64::NEG_INFINITY {
            return Err(Error::ZeroPosteriorDensity(theta.as_slice().to_vec()));
        }
        Ok([log_r / n, log_prior / n, -log_post / n])
    };
    let a = part(m1, thetas.0, log_marginals.0)?;
    let b = part(m2, thetas.1, log_marginals.1)?;
    Ok(Decomposition {
        n: sample.n(),
        terms: [a[0], a[1], a[2], -b[0], -b[1], -b[2]],
        direct: (log_marginals.0 - log_marginals.1) / n,
    })
}

/// Decomposition with both log marginals computed here.
pub fn bf_decomposition_check(
    m1: &ModelSpec,
    m2: &ModelSpec,
    process: &TrueProcess,
    sample: &Sample<'_>,
    thetas: (&Theta, &Theta),
    opts: &AsymptoticsOptions,
) -> Result<Decomposition> {
    let a = refine_until_with(m1, sample, opts.tol, &opts.quadrature)?.value;
    let b = refine_until_with(m2, sample, opts.tol, &opts.quadrature)?.value;
    bf_decomposition(m1, m2, process, sample, thetas, (a, b))
}

/// Empirical sign agreement for one ordered pair (better model first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSign {
    pub better: String,
    pub worse: String,
    /// Seeds where `log B_n(better, worse) > 0`.
    pub agreeing: usize,
    pub seeds: usize,
}

impl PairSign {
    pub fn consistent(&self) -> bool {
        2 * self.agreeing > self.seeds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub winner: String,
    pub rates: BTreeMap<String, DivergenceRate>,
    pub pairs: Vec<PairSign>,
}

impl Selection {
    pub fn all_pairs_consistent(&self) -> bool {
        self.pairs.iter().all(PairSign::consistent)
    }
}

pub fn select_model(process: &TrueProcess, models: &[ModelSpec], n: usize, seeds: &[u64]) -> Result<Selection> {
    select_model_with(process, models, n, seeds, &AsymptoticsOptions::default())
}

/// Pick the model with the smallest `h(Theta)` and check that pairwise Bayes
/// factor signs at `n` follow the same ordering on a majority of seeds.
///
/// Rates within combined uncertainty of each other (exact equality for
/// closed forms) make the winner ambiguous.
pub fn select_model_with(
    process: &TrueProcess,
    models: &[ModelSpec],
    n: usize,
    seeds: &[u64],
    opts: &AsymptoticsOptions,
) -> Result<Selection> {
    if models.is_empty() {
        return Err(Error::TooFew {
            what: "models",
            min: 1,
            got: 0,
        });
    }
    let mut names = std::collections::BTreeSet::new();
    for m in models {
        if !names.insert(m.name()) {
            return Err(Error::InvalidArgument(format!("duplicate model name {:?}", m.name())));
        }
    }
    let rates = models
        .iter()
        .map(|m| Ok(h_infimum(m, process, &opts.mc)?.h_theta))
        .collect::<Result<Vec<DivergenceRate>>>()?;
    let mut order: Vec<usize> = (0..models.len()).collect();
    order.sort_by(|&a, &b| rates[a].value.total_cmp(&rates[b].value));
    if let [first, second, ..] = order[..] {
        let (a, b) = (rates[first], rates[second]);
        let margin = 2.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        if b.value - a.value <= margin {
            return Err(Error::AmbiguousSelection(models[first].name().into(), models[second].name().into()));
        }
    }
    let mut pairs = Vec::new();
    if models.len() > 1 {
        if seeds.is_empty() {
            return Err(Error::TooFew {
                what: "seeds",
                min: 1,
                got: 0,
            });
        }
        let mut log_m = vec![Vec::with_capacity(seeds.len()); models.len()];
        for &seed in seeds {
            let series = simulate_ar1(process, n, seed)?;
            let sample = series.sample();
            for (i, m) in models.iter().enumerate() {
                log_m[i].push(refine_until_with(m, &sample, opts.tol, &opts.quadrature)?.value);
            }
        }
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                let agreeing = (0..seeds.len()).filter(|&s| log_m[i][s] > log_m[j][s]).count();
                pairs.push(PairSign {
                    better: models[i].name().into(),
                    worse: models[j].name().into(),
                    agreeing,
                    seeds: seeds.len(),
                });
            }
        }
    }
    Ok(Selection {
        winner: models[order[0]].name().into(),
        rates: models.iter().zip(rates).map(|(m, r)| (m.name().to_string(), r)).collect(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ar1_model, Interval, PriorSpec, SigmaSpec};

    fn proc() -> TrueProcess {
        TrueProcess::new(0.5, 1.0).unwrap()
    }

    fn m(name: &str, iv: Vec<Interval>) -> ModelSpec {
        make_ar1_model(name, iv, SigmaSpec::Known(1.0), PriorSpec::Uniform).unwrap()
    }

    fn m1() -> ModelSpec {
        m("M1", vec![Interval::open(-1.0, 1.0)])
    }

    fn m2() -> ModelSpec {
        m("M2", vec![Interval::closed(-1.5, -1.0), Interval::closed(1.0, 1.5)])
    }

    const SHORT: [usize; 4] = [100, 300, 1000, 3000];

    #[test]
    fn identical_models_give_zero() {
        let t = trajectory(&proc(), &m1(), &m1(), &SHORT, 5).unwrap();
        assert!(t.values.iter().all(|&v| v == 0.0));
        assert_eq!(t.theory_limit, 0.0);
    }

    #[test]
    fn swapping_models_negates_bit_exactly() {
        let a = trajectory(&proc(), &m1(), &m2(), &SHORT, 8).unwrap();
        let b = trajectory(&proc(), &m2(), &m1(), &SHORT, 8).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), (-y).to_bits());
        }
        assert!((a.theory_limit - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn checkpoints_must_increase() {
        assert!(matches!(
            trajectory(&proc(), &m1(), &m2(), &[100, 100], 1),
            Err(Error::BadCheckpoints)
        ));
        assert!(matches!(trajectory(&proc(), &m1(), &m2(), &[], 1), Err(Error::BadCheckpoints)));
    }

    #[test]
    fn prefix_reuse_matches_fresh_simulation() {
        let t = trajectory(&proc(), &m1(), &m2(), &SHORT, 21).unwrap();
        let series = simulate_ar1(&proc(), 300, 21).unwrap();
        let direct = log_bayes_factor(&m1(), &m2(), &series.sample(), &AsymptoticsOptions::default()).unwrap() / 300.0;
        assert!((t.values[1] - direct).abs() < 1e-12, "{} vs {direct}", t.values[1]);
    }

    #[test]
    fn fit_limit_contract() {
        let zero = Trajectory {
            checkpoints: vec![10, 20, 30, 40],
            values: vec![0.0; 4],
            seed: 0,
            model_pair: ("a".into(), "a".into()),
            theory_limit: 0.0,
            log_marginals: vec![(0.0, 0.0); 4],
        };
        let est = fit_limit(&[zero.clone(), zero.clone()], 0.5).unwrap();
        assert_eq!((est.point, est.halfwidth, est.slope_check), (0.0, 0.0, 0.0));
        assert!(matches!(fit_limit(std::slice::from_ref(&zero), 0.5), Err(Error::TooFew { .. })));
        assert!(matches!(
            fit_limit(&[zero.clone(), zero.clone()], 0.25),
            Err(Error::TooFewTailCheckpoints(1))
        ));
        let mut other = zero.clone();
        other.checkpoints[0] = 11;
        assert!(matches!(fit_limit(&[zero, other], 0.5), Err(Error::CheckpointMismatch)));
    }

    #[test]
    fn posterior_rate_requires_interior_theta() {
        assert!(posterior_logdensity_rate(&m1(), &proc(), &Theta::rho(1.0), &SHORT, 1).is_err());
        let r = posterior_logdensity_rate(&m1(), &proc(), &Theta::rho(0.5), &SHORT, 1).unwrap();
        assert_eq!(r.len(), SHORT.len());
        assert!(r.last().unwrap().rate.abs() < 0.01);
    }

    #[test]
    fn posterior_rate_limits() {
        let p = proc();
        let opts = AsymptoticsOptions::default();
        assert!((posterior_rate_limit(&m1(), &p, &Theta::rho(0.0), &opts).unwrap() + 1.0 / 6.0).abs() < 1e-15);
        let v = posterior_rate_limit(&m2(), &p, &Theta::rho(1.25), &opts).unwrap();
        assert!((v + (0.75f64.powi(2) / 1.5 - 1.0 / 6.0)).abs() < 1e-12);
        assert!((v + 0.208_333_333_333_333).abs() < 1e-12);
    }

    #[test]
    fn decomposition_reassembles() {
        let p = proc();
        let series = simulate_ar1(&p, 2000, 4).unwrap();
        let sample = series.sample();
        let d = bf_decomposition_check(
            &m1(),
            &m2(),
            &p,
            &sample,
            (&Theta::rho(0.3), &Theta::rho(1.2)),
            &AsymptoticsOptions::default(),
        )
        .unwrap();
        assert!(d.residual() <= 1e-10, "{}", d.residual());
    }

    #[test]
    fn selection() {
        let p = proc();
        let m3 = m("M3", vec![Interval::closed(-1.5, -1.0)]);
        let s = select_model(&p, &[m3.clone(), m2(), m1()], 2000, &[1, 2, 3]).unwrap();
        assert_eq!(s.winner, "M1");
        assert_eq!(s.pairs.len(), 3);
        assert!(s.all_pairs_consistent());
        assert!((s.rates["M3"].value - 1.5).abs() < 1e-12);

        let one = select_model(&p, &[m2()], 100, &[]).unwrap();
        assert_eq!(one.winner, "M2");

        let nested = m("M1p", vec![Interval::open(0.0, 1.0)]);
        assert!(matches!(
            select_model(&p, &[m1(), nested], 100, &[1]),
            Err(Error::AmbiguousSelection(..))
        ));
    }
}
