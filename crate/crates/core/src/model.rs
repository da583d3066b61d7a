//! Domain types and the model contract shared by every other module.
//!
//! A [`ModelSpec`] bundles a parameter domain (a product of unions of
//! intervals, one union per axis), a normalised prior density with respect to
//! Lebesgue measure on that domain, and a log-likelihood.
//!
//! Open interval endpoints are recorded but densities are evaluated on the
//! closure: the endpoint set has measure zero, so integrals are unaffected.

use std::fmt;
use std::sync::Arc;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::ar1::{self, Ar1ClosedForms, SufficientStats};
use crate::error::{Error, Result};

/// The data-generating AR(1) law: `x_t = rho0 x_{t-1} + eps_t`, `x_0 = 0`,
/// `eps_t ~ N(0, sigma0^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueProcess {
    rho0: f64,
    sigma0: f64,
}

impl TrueProcess {
    pub fn new(rho0: f64, sigma0: f64) -> Result<Self> {
        if !(rho0.is_finite() && rho0.abs() < 1.0) {
            return Err(Error::InvalidProcess(format!("|rho0| must be < 1, got {rho0}")));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::InvalidProcess(format!("sigma0 must be > 0, got {sigma0}")));
        }
        Ok(Self { rho0, sigma0 })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }
}

/// A realisation `x_1..x_n` together with how it was generated.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    seed: u64,
    stream: u64,
    source: TrueProcess,
}

impl TimeSeries {
    /// Wrap externally supplied values. `seed`/`stream` are provenance only.
    pub fn from_values(values: Vec<f64>, seed: u64, stream: u64, source: TrueProcess) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SampleSize { min: 1, got: 0 });
        }
        Ok(Self {
            values,
            seed,
            stream,
            source,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn source(&self) -> &TrueProcess {
        &self.source
    }

    pub fn sample(&self) -> Sample<'_> {
        Sample::new(&self.values)
    }
}

/// A borrowed data prefix plus its AR(1) sufficient statistics.
///
/// Likelihood evaluations take a `Sample` so that quadrature over many nodes
/// costs O(1) per node for the Gaussian AR(1) families.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    values: &'a [f64],
    stats: SufficientStats,
}

impl<'a> Sample<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        Self {
            values,
            stats: SufficientStats::from_values(values),
        }
    }

    /// Pair a prefix with statistics accumulated elsewhere (e.g. incrementally).
    pub fn with_stats(values: &'a [f64], stats: SufficientStats) -> Self {
        debug_assert_eq!(values.len(), stats.n);
        Self { values, stats }
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// A parameter point with one (`rho`) or two (`rho`, `sigma`) coordinates.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Theta {
    coords: [f64; 2],
    dims: usize,
}

impl Theta {
    pub fn rho(rho: f64) -> Self {
        Self {
            coords: [rho, 0.0],
            dims: 1,
        }
    }

    pub fn rho_sigma(rho: f64, sigma: f64) -> Self {
        Self {
            coords: [rho, sigma],
            dims: 2,
        }
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        match coords {
            [r] => Ok(Self::rho(*r)),
            [r, s] => Ok(Self::rho_sigma(*r, *s)),
            _ => Err(Error::DimensionMismatch {
                expected: 2,
                got: coords.len(),
            }),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dims]
    }

    pub fn get(&self, axis: usize) -> f64 {
        self.as_slice()[axis]
    }

    pub fn with(mut self, axis: usize, value: f64) -> Self {
        assert!(axis < self.dims);
        self.coords[axis] = value;
        self
    }
}

impl From<Theta> for Vec<f64> {
    fn from(theta: Theta) -> Self {
        theta.as_slice().to_vec()
    }
}

impl TryFrom<Vec<f64>> for Theta {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::from_slice(&coords)
    }
}

impl fmt::Debug for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Theta{:?}", self.as_slice())
    }
}

/// A closed, open or half-open real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub lo_open: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub hi_open: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    pub fn contains_closure(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// A product over axes of disjoint interval unions; a union of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    axes: Vec<Vec<Interval>>,
}

impl ParameterDomain {
    pub fn new(axes: Vec<Vec<Interval>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidDomain(format!("expected 1 or 2 dimensions, got {}", axes.len())));
        }
        let mut axes = axes;
        for (d, axis) in axes.iter_mut().enumerate() {
            if axis.is_empty() {
                return Err(Error::InvalidDomain(format!("axis {d} is empty")));
            }
            for iv in axis.iter() {
                if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.hi < iv.lo {
                    return Err(Error::InvalidDomain(format!("axis {d}: bad interval [{}, {}]", iv.lo, iv.hi)));
                }
            }
            axis.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            for w in axis.windows(2) {
                let touching_closed = w[0].hi == w[1].lo && !w[0].hi_open && !w[1].lo_open;
                if w[0].hi > w[1].lo || touching_closed {
                    return Err(Error::InvalidDomain(format!(
                        "axis {d}: intervals [{}, {}] and [{}, {}] overlap",
                        w[0].lo, w[0].hi, w[1].lo, w[1].hi
                    )));
                }
            }
            let total: f64 = axis.iter().map(Interval::len).sum();
            if !(total > 0.0) {
                return Err(Error::InvalidDomain(format!("axis {d} has zero length")));
            }
        }
        Ok(Self { axes })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![vec![Interval::closed(lo, hi)]])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, d: usize) -> &[Interval] {
        &self.axes[d]
    }

    pub fn axis_length(&self, d: usize) -> f64 {
        self.axes[d].iter().map(Interval::len).sum()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.axis_length(d)).product()
    }

    /// The boxes of the union, in lexicographic order of lower corners.
    pub fn boxes(&self) -> Vec<ParamBox> {
        match self.dims() {
            1 => self.axes[0].iter().map(|a| ParamBox::new(&[*a])).collect(),
            _ => {
                let mut out = Vec::new();
                for a in &self.axes[0] {
                    for b in &self.axes[1] {
                        out.push(ParamBox::new(&[*a, *b]));
                    }
                }
                out
            }
        }
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        theta.dims() == self.dims() && (0..self.dims()).all(|d| self.axes[d].iter().any(|iv| iv.contains(theta.get(d))))
    }

    pub fn contains_closure(&self, theta: &Theta) -> bool {
        theta.dims() == self.dims() && (0..self.dims()).all(|d| self.axes[d].iter().any(|iv| iv.contains_closure(theta.get(d))))
    }

    /// Clip axis `d` to `[lo, hi]`; `None` when nothing of positive length remains.
    pub fn clip_axis(&self, d: usize, lo: f64, hi: f64) -> Option<Self> {
        let mut axes = self.axes.clone();
        axes[d] = self.axes[d]
            .iter()
            .filter_map(|iv| {
                let (a, b) = (iv.lo.max(lo), iv.hi.min(hi));
                (b > a).then_some(Interval {
                    lo: a,
                    hi: b,
                    lo_open: iv.lo_open && a == iv.lo,
                    hi_open: iv.hi_open && b == iv.hi,
                })
            })
            .collect();
        Self::new(axes).ok()
    }
}

/// One box of a [`ParameterDomain`]: a product of closed intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    lo: [f64; 2],
    hi: [f64; 2],
    dims: usize,
}

impl ParamBox {
    pub fn new(ranges: &[Interval]) -> Self {
        assert!(matches!(ranges.len(), 1 | 2));
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for (d, r) in ranges.iter().enumerate() {
            lo[d] = r.lo;
            hi[d] = r.hi;
        }
        Self {
            lo,
            hi,
            dims: ranges.len(),
        }
    }

    pub fn point(theta: &Theta) -> Self {
        let ranges: Vec<Interval> = theta.as_slice().iter().map(|&x| Interval::point(x)).collect();
        Self::new(&ranges)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn lo(&self, d: usize) -> f64 {
        self.lo[d]
    }

    pub fn hi(&self, d: usize) -> f64 {
        self.hi[d]
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn set(&mut self, d: usize, lo: f64, hi: f64) {
        self.lo[d] = lo;
        self.hi[d] = hi;
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        (0..self.dims).all(|d| theta.get(d) >= self.lo[d] && theta.get(d) <= self.hi[d])
    }

    pub fn theta(&self, coords: [f64; 2]) -> Theta {
        if self.dims == 1 {
            Theta::rho(coords[0])
        } else {
            Theta::rho_sigma(coords[0], coords[1])
        }
    }
}

/// Per-axis prior density shape. Densities are normalised over the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorKind {
    Uniform,
    TruncatedNormal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// Uniform on every axis.
    Uniform,
    /// Independent per-axis priors, one entry per axis.
    Product(Vec<PriorKind>),
}

/// How the innovation scale is treated by an AR(1) model.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Known(f64),
    Unknown(Vec<Interval>),
}

pub type CustomLogLik = Arc<dyn Fn(&Theta, &[f64]) -> f64 + Send + Sync>;

/// Likelihood family of a model.
#[derive(Clone)]
pub enum ModelFamily {
    /// Gaussian AR(1) with known innovation s.d.; parameter `rho`.
    Ar1 { sigma: f64 },
    /// Gaussian AR(1) with parameters `(rho, sigma)`.
    Ar1Sigma,
    /// Arbitrary log-likelihood over the raw observations. No closed-form rates.
    Custom(CustomLogLik),
}

impl fmt::Debug for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ar1 { sigma } => f.debug_struct("Ar1").field("sigma", sigma).finish(),
            Self::Ar1Sigma => f.write_str("Ar1Sigma"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A competing model: the unit of comparison.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    name: String,
    domain: ParameterDomain,
    prior: Vec<PriorKind>,
    log_norm: Vec<f64>,
    family: ModelFamily,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, domain: ParameterDomain, prior: PriorSpec, family: ModelFamily) -> Result<Self> {
        let dims = domain.dims();
        match &family {
            ModelFamily::Ar1 { sigma } => {
                if dims != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: dims });
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::NonPositiveSigma(*sigma));
                }
            }
            ModelFamily::Ar1Sigma => {
                if dims != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: dims });
                }
                let floor = domain.axis(1)[0].lo;
                if !(floor > 0.0) {
                    return Err(Error::SigmaFloor(floor));
                }
            }
            ModelFamily::Custom(_) => {}
        }
        let prior = match prior {
            PriorSpec::Uniform => vec![PriorKind::Uniform; dims],
            PriorSpec::Product(p) => {
                if p.len() != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims,
                        got: p.len(),
                    });
                }
                p
            }
        };
        let log_norm = prior
            .iter()
            .enumerate()
            .map(|(d, k)| axis_log_normaliser(k, domain.axis(d)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.into(),
            domain,
            prior,
            log_norm,
            family,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn prior(&self) -> &[PriorKind] {
        &self.prior
    }

    pub fn dims(&self) -> usize {
        self.domain.dims()
    }

    /// Log prior density w.r.t. Lebesgue measure; `-inf` outside the closure.
    pub fn log_prior(&self, theta: &Theta) -> f64 {
        if !self.domain.contains_closure(theta) {
            return f64::NEG_INFINITY;
        }
        self.log_prior_unchecked(theta)
    }

    /// Log prior density without the domain membership test.
    #[inline]
    pub(crate) fn log_prior_unchecked(&self, theta: &Theta) -> f64 {
        let mut lp = 0.0;
        for d in 0..self.dims() {
            lp += axis_log_density(&self.prior[d], theta.get(d)) - self.log_norm[d];
        }
        lp
    }

    /// Log-likelihood `log L_n(theta)` of the sample.
    #[inline]
    pub fn log_lik(&self, theta: &Theta, sample: &Sample<'_>) -> f64 {
        match &self.family {
            ModelFamily::Ar1 { sigma } => ar1::loglik_from_stats(sample.stats(), theta.get(0), *sigma),
            ModelFamily::Ar1Sigma => ar1::loglik_from_stats(sample.stats(), theta.get(0), theta.get(1)),
            ModelFamily::Custom(f) => f(theta, sample.values()),
        }
    }

    pub fn check_point(&self, theta: &Theta) -> Result<()> {
        if theta.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: theta.dims(),
            });
        }
        if !self.domain.contains_closure(theta) {
            return Err(Error::OutsideDomain(theta.as_slice().to_vec()));
        }
        Ok(())
    }

    /// Closed-form `h(theta)` against an AR(1) truth, when the family has one.
    pub fn closed_form_rate(&self, theta: &Theta, process: &TrueProcess) -> Option<DivergenceRate> {
        let forms = Ar1ClosedForms::new(process);
        let (rho, sigma) = match &self.family {
            ModelFamily::Ar1 { sigma } => (theta.get(0), *sigma),
            ModelFamily::Ar1Sigma => (theta.get(0), theta.get(1)),
            ModelFamily::Custom(_) => return None,
        };
        ar1::h_sigma_closed(rho, sigma, &forms).ok()
    }

    /// Closed-form `h(Theta)` and its minimiser over the domain closure.
    ///
    /// The rate is increasing in `|rho - rho0|` for every fixed sigma, so the
    /// minimiser takes the `rho` nearest `rho0` (smallest on ties) and then the
    /// best sigma for it.
    pub fn closed_form_inf(&self, process: &TrueProcess) -> Option<(DivergenceRate, Theta)> {
        let forms = Ar1ClosedForms::new(process);
        let rho0 = process.rho0();
        let mut rho_best = f64::NAN;
        let mut dist_best = f64::INFINITY;
        for iv in self.domain.axis(0) {
            let r = rho0.clamp(iv.lo, iv.hi);
            let dist = (r - rho0).abs();
            if dist < dist_best {
                dist_best = dist;
                rho_best = r;
            }
        }
        match &self.family {
            ModelFamily::Ar1 { sigma } => {
                let h = ar1::h_sigma_closed(rho_best, *sigma, &forms).ok()?;
                Some((h, Theta::rho(rho_best)))
            }
            ModelFamily::Ar1Sigma => {
                let s0 = process.sigma0();
                let excess = (rho_best - rho0).powi(2) / (1.0 - rho0 * rho0);
                let target = s0 * (1.0 + excess).sqrt();
                let mut best: Option<(DivergenceRate, Theta)> = None;
                for iv in self.domain.axis(1) {
                    let s = target.clamp(iv.lo, iv.hi);
                    let h = ar1::h_sigma_closed(rho_best, s, &forms).ok()?;
                    if best.as_ref().is_none_or(|(b, _)| h.value < b.value) {
                        best = Some((h, Theta::rho_sigma(rho_best, s)));
                    }
                }
                best
            }
            ModelFamily::Custom(_) => None,
        }
    }
}

fn axis_log_density(kind: &PriorKind, x: f64) -> f64 {
    match *kind {
        PriorKind::Uniform => 0.0,
        PriorKind::TruncatedNormal { mean, sd } => {
            let z = (x - mean) / sd;
            -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        }
    }
}

/// Log of the unnormalised prior mass on the union `axis`.
fn axis_log_normaliser(kind: &PriorKind, axis: &[Interval]) -> Result<f64> {
    match *kind {
        PriorKind::Uniform => Ok(axis.iter().map(Interval::len).sum::<f64>().ln()),
        PriorKind::TruncatedNormal { mean, sd } => {
            if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "truncated normal prior needs finite mean and sd > 0, got ({mean}, {sd})"
                )));
            }
            let mass: f64 = axis
                .iter()
                .map(|iv| normal_interval_mass((iv.lo - mean) / sd, (iv.hi - mean) / sd))
                .sum();
            if !(mass > 0.0) {
                return Err(Error::InvalidArgument("truncated normal prior has no mass on the domain".into()));
            }
            Ok(mass.ln())
        }
    }
}

/// `Phi(b) - Phi(a)` computed on the tail that avoids cancellation.
fn normal_interval_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        1.0 - 0.5 * erfc(-a * s) - 0.5 * erfc(b * s)
    }
}

/// Assemble an AR(1) competitor with `x_0 = 0`.
pub fn make_ar1_model(name: impl Into<String>, rho_domain: Vec<Interval>, sigma: SigmaSpec, prior: PriorSpec) -> Result<ModelSpec> {
    if rho_domain.iter().all(Interval::is_empty) {
        return Err(Error::InvalidDomain("rho domain is empty".into()));
    }
    match sigma {
        SigmaSpec::Known(s) => {
            let domain = ParameterDomain::new(vec![rho_domain])?;
            ModelSpec::new(name, domain, prior, ModelFamily::Ar1 { sigma: s })
        }
        SigmaSpec::Unknown(sigma_domain) => {
            if let Some(lo) = sigma_domain.iter().map(|iv| iv.lo).reduce(f64::min) {
                if !(lo > 0.0) {
                    return Err(Error::SigmaFloor(lo));
                }
            }
            let domain = ParameterDomain::new(vec![rho_domain, sigma_domain])?;
            ModelSpec::new(name, domain, prior, ModelFamily::Ar1Sigma)
        }
    }
}

/// Estimation route for a divergence rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    ClosedForm,
    MonteCarlo,
}

/// A value of `h(theta)` or `h(Theta)` in nats per observation.
///
/// Monte Carlo values are raw replication means and may dip below zero by
/// sampling noise when the true rate is near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRate {
    pub value: f64,
    pub std_error: f64,
    pub method: RateMethod,
}

impl DivergenceRate {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            method: RateMethod::ClosedForm,
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64) -> Self {
        Self {
            value,
            std_error,
            method: RateMethod::MonteCarlo,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_m1() -> ModelSpec {
        make_ar1_model("M1", vec![Interval::open(-1.0, 1.0)], SigmaSpec::Known(1.0), PriorSpec::Uniform).unwrap()
    }

    #[test]
    fn true_process_invariants() {
        assert!(TrueProcess::new(0.5, 1.0).is_ok());
        assert!(TrueProcess::new(1.0, 1.0).is_err());
        assert!(TrueProcess::new(-1.2, 1.0).is_err());
        assert!(TrueProcess::new(0.5, 0.0).is_err());
        assert!(TrueProcess::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn uniform_prior_on_open_interval() {
        let m = uniform_m1();
        assert_eq!(m.log_prior(&Theta::rho(0.3)), (0.5f64).ln());
        assert_eq!(m.log_prior(&Theta::rho(-0.999)), (0.5f64).ln());
        assert_eq!(m.log_prior(&Theta::rho(1.2)), f64::NEG_INFINITY);
    }

    #[test]
    fn uniform_prior_on_union() {
        let m = make_ar1_model(
            "M2",
            vec![Interval::closed(-1.5, -1.0), Interval::closed(1.0, 1.5)],
            SigmaSpec::Known(1.0),
            PriorSpec::Uniform,
        )
        .unwrap();
        assert_eq!(m.log_prior(&Theta::rho(1.25)), 0.0);
        assert_eq!(m.log_prior(&Theta::rho(-1.25)), 0.0);
        assert_eq!(m.log_prior(&Theta::rho(0.0)), f64::NEG_INFINITY);
    }

    #[test]
    fn uniform_prior_on_rectangle() {
        let m = make_ar1_model(
            "M1s",
            vec![Interval::open(-1.0, 1.0)],
            SigmaSpec::Unknown(vec![Interval::closed(0.1, 5.0)]),
            PriorSpec::Uniform,
        )
        .unwrap();
        let lp = m.log_prior(&Theta::rho_sigma(0.2, 1.0));
        assert!((lp - (1.0 / (2.0 * 4.9f64)).ln()).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        let empty = make_ar1_model("e", vec![Interval::closed(0.0, 0.0)], SigmaSpec::Known(1.0), PriorSpec::Uniform);
        assert!(matches!(empty, Err(Error::InvalidDomain(_))));
        let floor = make_ar1_model(
            "f",
            vec![Interval::open(-1.0, 1.0)],
            SigmaSpec::Unknown(vec![Interval::closed(0.0, 5.0)]),
            PriorSpec::Uniform,
        );
        assert!(matches!(floor, Err(Error::SigmaFloor(_))));
        let overlap = ParameterDomain::new(vec![vec![Interval::closed(0.0, 1.0), Interval::closed(0.5, 2.0)]]);
        assert!(overlap.is_err());
        let touching = ParameterDomain::new(vec![vec![Interval::closed(0.0, 1.0), Interval::closed(1.0, 2.0)]]);
        assert!(touching.is_err());
    }

    #[test]
    fn truncated_normal_normaliser_matches_erf() {
        let m = make_ar1_model(
            "tn",
            vec![Interval::closed(0.0, 1.0)],
            SigmaSpec::Known(1.0),
            PriorSpec::Product(vec![PriorKind::TruncatedNormal { mean: 0.0, sd: 1.0 }]),
        )
        .unwrap();
        // Phi(1) - Phi(0) = 0.341344746068543
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.341_344_746_068_543f64.ln();
        assert!((m.log_prior(&Theta::rho(0.0)) - expected).abs() < 1e-12);
    }

    #[test]
    fn closed_form_inf_ties_pick_smallest_rho() {
        let p = TrueProcess::new(0.0, 1.0).unwrap();
        let m2 = make_ar1_model(
            "M2",
            vec![Interval::closed(-1.5, -1.0), Interval::closed(1.0, 1.5)],
            SigmaSpec::Known(1.0),
            PriorSpec::Uniform,
        )
        .unwrap();
        let (h, arg) = m2.closed_form_inf(&p).unwrap();
        assert_eq!(h.value, 0.5);
        assert_eq!(arg.get(0), -1.0);
    }

    #[test]
    fn clip_axis_keeps_open_flags() {
        let d = ParameterDomain::new(vec![vec![Interval::open(-1.0, 1.0)]]).unwrap();
        let c = d.clip_axis(0, 0.0, 2.0).unwrap();
        assert_eq!(
            c.axis(0)[0],
            Interval {
                lo: 0.0,
                hi: 1.0,
                lo_open: false,
                hi_open: true
            }
        );
        assert!(d.clip_axis(0, 2.0, 3.0).is_none());
    }
}
