//! Gaussian AR(1): simulation, exact likelihoods, closed-form divergence
//! rates and ergodic-average diagnostics.
//!
//! Conventions: `x_0 = 0`; the likelihood of `x_1..x_n` is the product of
//! `N(x_t; rho x_{t-1}, sigma^2)` terms. All sums over `t` run forward through
//! [`NeumaierSum`].

use crate::error::{Error, Result};
use crate::model::{DivergenceRate, ModelSpec, Sample, Theta, TimeSeries, TrueProcess};
use crate::numeric::NeumaierSum;
use crate::rng::InnovationStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Sums the AR(1) likelihood depends on.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SufficientStats {
    pub n: usize,
    /// `sum x_{t-1}^2`
    pub sum_lag_sq: f64,
    /// `sum x_t x_{t-1}`
    pub sum_cross: f64,
    /// `sum x_t^2`
    pub sum_sq: f64,
    /// least-squares slope `sum_cross / sum_lag_sq` (0 when `sum_lag_sq = 0`)
    pub rho_hat: f64,
    /// residual sum of squares at `rho_hat`
    pub rss_min: f64,
}

impl SufficientStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut acc = StatsAccumulator::new();
        acc.extend(values);
        acc.snapshot()
    }

    /// `sum (x_t - rho x_{t-1})^2`, written around `rho_hat` so it never goes negative.
    #[inline]
    pub fn rss(&self, rho: f64) -> f64 {
        let d = rho - self.rho_hat;
        self.rss_min + self.sum_lag_sq * d * d
    }
}

/// Incremental sufficient statistics over a growing path.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    n: usize,
    prev: f64,
    lag_sq: NeumaierSum,
    cross: NeumaierSum,
    sq: NeumaierSum,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.lag_sq.add(self.prev * self.prev);
        self.cross.add(x * self.prev);
        self.sq.add(x * x);
        self.prev = x;
        self.n += 1;
    }

    pub fn extend(&mut self, values: &[f64]) {
        for &x in values {
            self.push(x);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn snapshot(&self) -> SufficientStats {
        let sum_lag_sq = self.lag_sq.value();
        let sum_cross = self.cross.value();
        let sum_sq = self.sq.value();
        let (rho_hat, rss_min) = if sum_lag_sq > 0.0 {
            let r = sum_cross / sum_lag_sq;
            (r, (sum_sq - r * sum_cross).max(0.0))
        } else {
            (0.0, sum_sq)
        };
        SufficientStats {
            n: self.n,
            sum_lag_sq,
            sum_cross,
            sum_sq,
            rho_hat,
            rss_min,
        }
    }
}

/// Simulate `n` steps of the true process on stream 0 of `seed`.
pub fn simulate_ar1(process: &TrueProcess, n: usize, seed: u64) -> Result<TimeSeries> {
    simulate_ar1_stream(process, n, seed, 0)
}

/// Simulate on an explicit `(seed, stream)` pair; replications use distinct streams.
pub fn simulate_ar1_stream(process: &TrueProcess, n: usize, seed: u64, stream: u64) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::SampleSize { min: 1, got: 0 });
    }
    let mut rng = InnovationStream::new(seed, stream);
    let (rho0, sigma0) = (process.rho0(), process.sigma0());
    let mut values = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n {
        let x = rho0 * prev + sigma0 * rng.standard_normal();
        values.push(x);
        prev = x;
    }
    TimeSeries::from_values(values, seed, stream, *process)
}

/// Exact Gaussian AR(1) log-likelihood by direct per-observation summation.
pub fn ar1_loglik(series: &TimeSeries, rho: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let ln_norm = 0.5 * LN_2PI + sigma.ln();
    let inv_two_var = 0.5 / (sigma * sigma);
    let mut acc = NeumaierSum::new();
    let mut prev = 0.0;
    for &x in series.values() {
        let r = x - rho * prev;
        acc.add(-ln_norm - r * r * inv_two_var);
        prev = x;
    }
    Ok(acc.value())
}

/// Same likelihood from sufficient statistics; O(1) per evaluation.
#[inline]
pub fn loglik_from_stats(stats: &SufficientStats, rho: f64, sigma: f64) -> f64 {
    let n = stats.n as f64;
    -0.5 * n * LN_2PI - n * sigma.ln() - stats.rss(rho) / (2.0 * sigma * sigma)
}

/// `log p_n`: the true process density of the sample.
pub fn true_loglik(sample: &Sample<'_>, process: &TrueProcess) -> f64 {
    loglik_from_stats(sample.stats(), process.rho0(), process.sigma0())
}

/// `log R_n(theta) = log L_n(theta) - log p_n`.
pub fn log_likelihood_ratio(series: &TimeSeries, model: &ModelSpec, theta: &Theta, process: &TrueProcess) -> Result<f64> {
    model.check_point(theta)?;
    let sample = series.sample();
    Ok(log_likelihood_ratio_sample(&sample, model, theta, process))
}

pub(crate) fn log_likelihood_ratio_sample(sample: &Sample<'_>, model: &ModelSpec, theta: &Theta, process: &TrueProcess) -> f64 {
    model.log_lik(theta, sample) - true_loglik(sample, process)
}

/// Closed form of `log R_T(rho1)` for equal innovation scales:
/// `(rho0 - rho1)/sigma0^2 * [S_lag (rho0 + rho1)/2 - S_cross]`.
pub fn log_ratio_closed(stats: &SufficientStats, rho0: f64, rho1: f64, sigma0: f64) -> f64 {
    (rho0 - rho1) / (sigma0 * sigma0) * (stats.sum_lag_sq * (rho0 + rho1) / 2.0 - stats.sum_cross)
}

/// Parameters of the true process, used by the closed-form rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1ClosedForms {
    pub rho0: f64,
    pub sigma0: f64,
}

impl Ar1ClosedForms {
    pub fn new(process: &TrueProcess) -> Self {
        Self {
            rho0: process.rho0(),
            sigma0: process.sigma0(),
        }
    }

    /// Stationary variance `sigma0^2 / (1 - rho0^2)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma0 * self.sigma0 / (1.0 - self.rho0 * self.rho0)
    }
}

/// `h(rho) = (rho - rho0)^2 / (2 (1 - rho0^2))` for a model with `sigma = sigma0`.
pub fn h1_closed(rho1: f64, forms: &Ar1ClosedForms) -> DivergenceRate {
    let d = rho1 - forms.rho0;
    DivergenceRate::closed_form(d * d / (2.0 * (1.0 - forms.rho0 * forms.rho0)))
}

/// KL rate of `AR(1)(rho, sigma)` against the truth:
/// `1/2 [ (s0^2/s^2)(1 + (rho - rho0)^2/(1 - rho0^2)) - 1 - log(s0^2/s^2) ]`.
///
/// Reduces to [`h1_closed`] at `sigma = sigma0`. Non-negative, zero only at the truth.
pub fn h_sigma_closed(rho: f64, sigma: f64, forms: &Ar1ClosedForms) -> Result<DivergenceRate> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let ratio = (forms.sigma0 / sigma).powi(2);
    let d = rho - forms.rho0;
    let excess = d * d / (1.0 - forms.rho0 * forms.rho0);
    // ratio - 1 - ln(ratio) loses digits near ratio = 1; use ln_1p form.
    let shape = {
        let r = ratio - 1.0;
        if r.abs() < 1e-4 {
            r * r / 2.0 - r * r * r / 3.0 + r * r * r * r / 4.0
        } else {
            r - r.ln_1p()
        }
    };
    let value = 0.5 * (shape + ratio * excess);
    Ok(DivergenceRate::closed_form(value.max(0.0)))
}

/// `h(Theta_2) = min{(1-rho0)^2, (1+rho0)^2} / (2 (1 - rho0^2))` for the
/// non-stationary competitor with `sigma = sigma0`.
pub fn h2_theta_closed(forms: &Ar1ClosedForms) -> DivergenceRate {
    let r = forms.rho0;
    let num = ((1.0 - r) * (1.0 - r)).min((1.0 + r) * (1.0 + r));
    DivergenceRate::closed_form(num / (2.0 * (1.0 - r * r)))
}

/// Limiting autocovariance `sigma0^2 rho0^h / (1 - rho0^2)`.
pub fn autocovariance_limit(h: u32, forms: &Ar1ClosedForms) -> f64 {
    forms.sigma0 * forms.sigma0 * forms.rho0.powi(h as i32) / (1.0 - forms.rho0 * forms.rho0)
}

/// Ergodic averages of the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicDiagnostics {
    pub n: usize,
    /// `sum x_{t-1}^2 / n`
    pub mean_sq: f64,
    /// `sum x_t x_{t-1} / n`
    pub lag1: f64,
    /// `sum eps_t x_{t-1} / n`, `eps_t = x_t - rho0 x_{t-1}`
    pub noise_cross: f64,
    /// `rho0` used to form the residuals
    pub rho0: f64,
    abs_mass: f64,
}

impl ErgodicDiagnostics {
    /// `lag1 - (rho0 mean_sq + noise_cross)`; zero in exact arithmetic.
    pub fn identity_residual(&self) -> f64 {
        self.lag1 - (self.rho0 * self.mean_sq + self.noise_cross)
    }

    /// Worst-case floating-point bound on [`Self::identity_residual`].
    ///
    /// Each term carries at most a few unit roundoffs relative to
    /// `|x_t x_{t-1}| + |rho0| x_{t-1}^2`; compensated sums add O(u) more.
    pub fn identity_bound(&self) -> f64 {
        8.0 * f64::EPSILON * self.abs_mass
    }
}

pub fn ergodic_diagnostics(series: &TimeSeries) -> Result<ErgodicDiagnostics> {
    let n = series.n();
    if n < 2 {
        return Err(Error::SampleSize { min: 2, got: n });
    }
    let rho0 = series.source().rho0();
    let mut lag_sq = NeumaierSum::new();
    let mut cross = NeumaierSum::new();
    let mut noise = NeumaierSum::new();
    let mut abs_mass = NeumaierSum::new();
    let mut prev = 0.0;
    for &x in series.values() {
        let eps = x - rho0 * prev;
        lag_sq.add(prev * prev);
        cross.add(x * prev);
        noise.add(eps * prev);
        abs_mass.add((x * prev).abs() + (rho0 * prev * prev).abs());
        prev = x;
    }
    let nf = n as f64;
    Ok(ErgodicDiagnostics {
        n,
        mean_sq: lag_sq.value() / nf,
        lag1: cross.value() / nf,
        noise_cross: noise.value() / nf,
        rho0,
        abs_mass: abs_mass.value() / nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_ar1_model, Interval, PriorSpec, SigmaSpec};

    fn p(rho0: f64, sigma0: f64) -> TrueProcess {
        TrueProcess::new(rho0, sigma0).unwrap()
    }

    #[test]
    fn first_value_is_first_innovation() {
        let s = simulate_ar1(&p(0.5, 1.0), 1, 99).unwrap();
        let mut rng = InnovationStream::new(99, 0);
        assert_eq!(s.values()[0], rng.standard_normal());
    }

    #[test]
    fn zero_length_is_rejected() {
        assert!(matches!(simulate_ar1(&p(0.5, 1.0), 0, 1), Err(Error::SampleSize { .. })));
    }

    #[test]
    fn prefixes_nest_and_regeneration_is_exact() {
        let proc = p(0.7, 1.3);
        let long = simulate_ar1(&proc, 500, 17).unwrap();
        let short = simulate_ar1(&proc, 123, 17).unwrap();
        assert_eq!(&long.values()[..123], short.values());
        assert_eq!(long, simulate_ar1(&proc, 500, 17).unwrap());
    }

    #[test]
    fn white_noise_second_moment() {
        let s = simulate_ar1(&p(0.0, 1.0), 1000, 5).unwrap();
        let m = s.values().iter().map(|x| x * x).sum::<f64>() / 1000.0;
        // s.e. of the mean of chi^2_1 draws is sqrt(2/n)
        assert!((m - 1.0).abs() < 5.0 * (2.0f64 / 1000.0).sqrt(), "m = {m}");
    }

    #[test]
    fn loglik_hand_values() {
        let proc = p(0.5, 1.0);
        let one = TimeSeries::from_values(vec![0.0], 0, 0, proc).unwrap();
        let v = ar1_loglik(&one, 0.3, 1.0).unwrap();
        assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);

        let two = TimeSeries::from_values(vec![1.0, 0.5], 0, 0, proc).unwrap();
        let v = ar1_loglik(&two, 0.5, 1.0).unwrap();
        let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5;
        assert!((v - expected).abs() < 1e-14);
        let via_stats = loglik_from_stats(&SufficientStats::from_values(two.values()), 0.5, 1.0);
        assert!((via_stats - expected).abs() < 1e-14);

        assert!(matches!(ar1_loglik(&two, 0.5, 0.0), Err(Error::NonPositiveSigma(_))));
    }

    #[test]
    fn loglik_at_truth_is_true_density() {
        let proc = p(0.4, 2.0);
        let s = simulate_ar1(&proc, 300, 3).unwrap();
        let direct = ar1_loglik(&s, 0.4, 2.0).unwrap();
        let truth = true_loglik(&s.sample(), &proc);
        assert!((direct - truth).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn log_ratio_zero_cases() {
        let proc = p(0.5, 1.0);
        let m1 = make_ar1_model("M1", vec![Interval::open(-1.0, 1.0)], SigmaSpec::Known(1.0), PriorSpec::Uniform).unwrap();
        let s = simulate_ar1(&proc, 200, 8).unwrap();
        assert_eq!(log_likelihood_ratio(&s, &m1, &Theta::rho(0.5), &proc).unwrap(), 0.0);
        let one = simulate_ar1(&proc, 1, 8).unwrap();
        assert_eq!(log_likelihood_ratio(&one, &m1, &Theta::rho(-0.9), &proc).unwrap(), 0.0);
        assert_eq!(log_ratio_closed(&SufficientStats::from_values(one.values()), 0.5, -0.9, 1.0), 0.0);
        assert!(matches!(
            log_likelihood_ratio(&s, &m1, &Theta::rho(1.5), &proc),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn closed_form_rate_values() {
        let f = Ar1ClosedForms::new(&p(0.5, 1.0));
        assert_eq!(h1_closed(0.5, &f).value, 0.0);
        assert!((h1_closed(0.0, &f).value - 1.0 / 6.0).abs() < 1e-15);
        assert!((h1_closed(1.0, &f).value - 1.0 / 6.0).abs() < 1e-15);
        assert!((h1_closed(-1.0, &f).value - 1.5).abs() < 1e-15);
        assert_eq!(h1_closed(0.0, &f).std_error, 0.0);

        assert_eq!(h_sigma_closed(0.5, 1.0, &f).unwrap().value, 0.0);
        // ratio 1/4: 1/2 (1/4 - 1 + ln 4)
        let v = h_sigma_closed(0.5, 2.0, &f).unwrap().value;
        assert!((v - 0.5 * (0.25 - 1.0 + 4f64.ln())).abs() < 1e-15);
        for rho in [-1.5, -0.3, 0.0, 0.9, 1.4] {
            let a = h_sigma_closed(rho, 1.0, &f).unwrap().value;
            let b = h1_closed(rho, &f).value;
            assert!((a - b).abs() <= 1e-15 * b.max(1e-300), "{rho}: {a} vs {b}");
        }
        assert!(h_sigma_closed(0.5, -1.0, &f).is_err());
    }

    #[test]
    fn h2_theta_values() {
        let at = |r: f64| h2_theta_closed(&Ar1ClosedForms::new(&p(r, 1.0))).value;
        assert!((at(0.0) - 0.5).abs() < 1e-15);
        assert!((at(0.5) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(at(0.5), at(-0.5));
    }

    #[test]
    fn autocovariance_values() {
        let f = Ar1ClosedForms::new(&p(0.5, 1.0));
        assert!((autocovariance_limit(0, &f) - 4.0 / 3.0).abs() < 1e-15);
        assert!((autocovariance_limit(1, &f) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(autocovariance_limit(0, &Ar1ClosedForms::new(&p(0.0, 2.0))), 4.0);
    }

    #[test]
    fn ergodic_identity_and_limits() {
        let s = simulate_ar1(&p(0.5, 1.0), 100_000, 2024).unwrap();
        let d = ergodic_diagnostics(&s).unwrap();
        assert!(d.identity_residual().abs() <= d.identity_bound());
        assert!((d.mean_sq - 4.0 / 3.0).abs() < 0.03, "{}", d.mean_sq);
        assert!((d.lag1 - 2.0 / 3.0).abs() < 0.03, "{}", d.lag1);
        assert_eq!(d, ergodic_diagnostics(&s).unwrap());

        let w = simulate_ar1(&p(0.0, 1.0), 100_000, 2025).unwrap();
        assert!(ergodic_diagnostics(&w).unwrap().lag1.abs() < 0.02);

        let one = simulate_ar1(&p(0.5, 1.0), 1, 1).unwrap();
        assert!(ergodic_diagnostics(&one).is_err());
    }

    #[test]
    fn mean_sq_limit_at_moderate_n() {
        let s = simulate_ar1(&p(0.5, 1.0), 100_000, 77).unwrap();
        let st = SufficientStats::from_values(s.values());
        assert!((st.sum_lag_sq / 1e5 - 4.0 / 3.0).abs() < 0.03);
    }
}
