use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::State;
use crate::error::ModelError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Support of a chain's state space, used by numeric KL evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Finite(Vec<State>),
    RealLine,
}

/// Extension point for user-supplied chain laws.
///
/// Verifying the recurrence and drift conditions the efficiency theory relies
/// on is the implementor's responsibility.
pub trait CustomLaw: Send + Sync + fmt::Debug {
    fn sample_initial(&self, rng: &mut dyn RngCore) -> State;
    fn sample_transition(&self, x: State, rng: &mut dyn RngCore) -> State;
    fn log_initial_density(&self, y: State) -> f64;
    fn log_transition_density(&self, x: State, y: State) -> f64;
    fn stationary_mean(&self) -> f64;
    /// Standard deviation of the stationary law (centres numeric quadrature).
    fn stationary_sd(&self) -> f64;
    /// Mean and standard deviation of `p(x, ·)`; only used to centre quadrature.
    fn transition_moments(&self, x: State) -> (f64, f64);
    /// Log stationary density; defaults to the initial law.
    fn log_stationary_density(&self, y: State) -> f64 {
        self.log_initial_density(y)
    }
    fn support(&self) -> Support;
    fn is_iid(&self) -> bool {
        false
    }
}

/// Bernoulli observations on `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliLaw {
    pub p: f64,
    ln_p: f64,
    ln_q: f64,
}

impl BernoulliLaw {
    /// Rejects success probabilities outside `[BERNOULLI_EPS, 1 - BERNOULLI_EPS]`.
    pub fn new(p: f64) -> Result<Self, ModelError> {
        let eps = super::BERNOULLI_EPS;
        if !(p >= eps && p <= 1.0 - eps) {
            return Err(ModelError::Config(format!(
                "Bernoulli probability {p} must lie in [{eps}, {}]",
                1.0 - eps
            )));
        }
        Ok(BernoulliLaw {
            p,
            ln_p: p.ln(),
            ln_q: (1.0 - p).ln(),
        })
    }

    #[inline]
    fn log_pmf(&self, y: State) -> f64 {
        if y > 0.5 {
            self.ln_p
        } else {
            self.ln_q
        }
    }
}

/// I.i.d. normal observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianLaw {
    pub fn new(mean: f64, sd: f64) -> Result<Self, ModelError> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(ModelError::Config(format!(
                "Gaussian law needs finite mean and positive sd, got ({mean}, {sd})"
            )));
        }
        Ok(GaussianLaw { mean, sd })
    }
}

/// `X_k = a X_{k-1} + ε_k` with `ε_k ~ N(mean, sd²)`.
///
/// The fields are public so tests can build the degenerate `sd = 0` limit,
/// which [`Ar1Law::new`] refuses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Law {
    pub a: f64,
    pub mean: f64,
    pub sd: f64,
}

impl Ar1Law {
    pub fn new(a: f64, mean: f64, sd: f64) -> Result<Self, ModelError> {
        if !(a.abs() < 1.0) {
            return Err(ModelError::Config(format!("AR(1) coefficient {a} must satisfy |a| < 1")));
        }
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(ModelError::Config(format!(
                "AR(1) innovation needs finite mean and positive sd, got ({mean}, {sd})"
            )));
        }
        Ok(Ar1Law { a, mean, sd })
    }

    pub fn stationary_mean(&self) -> f64 {
        self.mean / (1.0 - self.a)
    }

    pub fn stationary_sd(&self) -> f64 {
        self.sd / (1.0 - self.a * self.a).sqrt()
    }
}

#[inline]
fn normal_logpdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// The chain law of one job under one parameter value.
#[derive(Debug, Clone)]
pub enum Law {
    Bernoulli(BernoulliLaw),
    Gaussian(GaussianLaw),
    Ar1(Ar1Law),
    Custom(Arc<dyn CustomLaw>),
}

impl Law {
    pub fn family(&self) -> &'static str {
        match self {
            Law::Bernoulli(_) => "bernoulli-iid",
            Law::Gaussian(_) => "gaussian-iid",
            Law::Ar1(_) => "ar1",
            Law::Custom(_) => "custom",
        }
    }

    pub fn is_iid(&self) -> bool {
        match self {
            Law::Bernoulli(_) | Law::Gaussian(_) => true,
            Law::Ar1(_) => false,
            Law::Custom(c) => c.is_iid(),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Law::Bernoulli(_) => Support::Finite(vec![0.0, 1.0]),
            Law::Gaussian(_) | Law::Ar1(_) => Support::RealLine,
            Law::Custom(c) => c.support(),
        }
    }

    pub fn sample_initial<R: RngCore>(&self, rng: &mut R) -> State {
        match self {
            Law::Bernoulli(b) => bernoulli_draw(b.p, rng),
            Law::Gaussian(g) => g.mean + g.sd * rng.sample::<f64, _>(StandardNormal),
            Law::Ar1(l) => l.stationary_mean() + l.stationary_sd() * rng.sample::<f64, _>(StandardNormal),
            Law::Custom(c) => c.sample_initial(rng),
        }
    }

    pub fn sample_transition<R: RngCore>(&self, x: State, rng: &mut R) -> State {
        match self {
            Law::Bernoulli(b) => bernoulli_draw(b.p, rng),
            Law::Gaussian(g) => g.mean + g.sd * rng.sample::<f64, _>(StandardNormal),
            Law::Ar1(l) => l.a * x + l.mean + l.sd * rng.sample::<f64, _>(StandardNormal),
            Law::Custom(c) => c.sample_transition(x, rng),
        }
    }

    /// Draws the next observation: the initial state when `prev` is `None`.
    #[inline]
    pub fn sample_next<R: RngCore>(&self, prev: Option<State>, rng: &mut R) -> State {
        match prev {
            None => self.sample_initial(rng),
            Some(x) => self.sample_transition(x, rng),
        }
    }

    /// `log ν(y)` without support checks.
    #[inline]
    pub fn log_initial(&self, y: State) -> f64 {
        match self {
            Law::Bernoulli(b) => b.log_pmf(y),
            Law::Gaussian(g) => normal_logpdf(y, g.mean, g.sd),
            Law::Ar1(l) => normal_logpdf(y, l.stationary_mean(), l.stationary_sd()),
            Law::Custom(c) => c.log_initial_density(y),
        }
    }

    /// `log p(x, y)` without support checks.
    #[inline]
    pub fn log_step(&self, x: State, y: State) -> f64 {
        match self {
            Law::Bernoulli(b) => b.log_pmf(y),
            Law::Gaussian(g) => normal_logpdf(y, g.mean, g.sd),
            Law::Ar1(l) => normal_logpdf(y, l.a * x + l.mean, l.sd),
            Law::Custom(c) => c.log_transition_density(x, y),
        }
    }

    /// Log-density of observation `y` given the previous one (`None` for the first).
    #[inline]
    pub fn log_next(&self, prev: Option<State>, y: State) -> f64 {
        match prev {
            None => self.log_initial(y),
            Some(x) => self.log_step(x, y),
        }
    }

    /// Log stationary density, used by numeric KL evaluation.
    pub fn log_stationary(&self, x: State) -> f64 {
        match self {
            Law::Custom(c) => c.log_stationary_density(x),
            _ => self.log_initial(x),
        }
    }

    fn check_support(&self, y: State) -> Result<(), ModelError> {
        let ok = match self.support() {
            Support::Finite(values) => values.contains(&y),
            Support::RealLine => y.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::Domain {
                family: self.family(),
                state: y,
            })
        }
    }

    pub fn log_initial_density(&self, y: State) -> Result<f64, ModelError> {
        self.check_support(y)?;
        Ok(self.log_initial(y))
    }

    pub fn log_transition_density(&self, x: State, y: State) -> Result<f64, ModelError> {
        self.check_support(x)?;
        self.check_support(y)?;
        Ok(self.log_step(x, y))
    }

    pub fn stationary_mean(&self) -> f64 {
        match self {
            Law::Bernoulli(b) => b.p,
            Law::Gaussian(g) => g.mean,
            Law::Ar1(l) => l.stationary_mean(),
            Law::Custom(c) => c.stationary_mean(),
        }
    }

    pub fn stationary_sd(&self) -> f64 {
        match self {
            Law::Bernoulli(b) => (b.p * (1.0 - b.p)).sqrt(),
            Law::Gaussian(g) => g.sd,
            Law::Ar1(l) => l.stationary_sd(),
            Law::Custom(c) => c.stationary_sd(),
        }
    }

    /// Mean and sd of `p(x, ·)`.
    pub fn transition_moments(&self, x: State) -> (f64, f64) {
        match self {
            Law::Bernoulli(b) => (b.p, (b.p * (1.0 - b.p)).sqrt()),
            Law::Gaussian(g) => (g.mean, g.sd),
            Law::Ar1(l) => (l.a * x + l.mean, l.sd),
            Law::Custom(c) => c.transition_moments(x),
        }
    }

    /// Closed-form KL information number `I(self, other)` when both laws belong
    /// to the same built-in family; `None` otherwise.
    pub fn kl_closed_form(&self, other: &Law) -> Option<f64> {
        match (self, other) {
            (Law::Bernoulli(a), Law::Bernoulli(b)) => Some(bernoulli_kl(a.p, b.p)),
            (Law::Gaussian(a), Law::Gaussian(b)) => Some(gaussian_kl(a.mean, a.sd, b.mean, b.sd)),
            (Law::Ar1(a), Law::Ar1(b)) => Some(ar1_kl(a, b)),
            _ => None,
        }
    }
}

#[inline]
fn bernoulli_draw<R: RngCore>(p: f64, rng: &mut R) -> State {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// `p log(p/q) + (1-p) log((1-p)/(1-q))`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    let mut kl = 0.0;
    if p > 0.0 {
        kl += p * (p / q).ln();
    }
    if p < 1.0 {
        kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    kl.max(0.0)
}

/// KL between `N(m, s²)` and `N(m', s'²)`.
pub fn gaussian_kl(m: f64, s: f64, m2: f64, s2: f64) -> f64 {
    if m == m2 && s == s2 {
        return 0.0;
    }
    let v2 = s2 * s2;
    ((s2 / s).ln() + (s * s - v2 + (m - m2) * (m - m2)) / (2.0 * v2)).max(0.0)
}

/// KL rate between two AR(1) chains, the expectation taken over the
/// stationary law of the first chain:
///
/// `log(σ'/σ) + (σ² − σ'² + (μ−μ')²)/(2σ'²)
///  + [(a−a')²{μ²/(1−a)² + σ²/(1−a²)} + 2(a−a')(μ−μ')μ/(1−a)] / (2σ'²)`.
pub fn ar1_kl(l: &Ar1Law, r: &Ar1Law) -> f64 {
    if l == r {
        return 0.0;
    }
    let (a, mu, s) = (l.a, l.mean, l.sd);
    let (a2, mu2, s2) = (r.a, r.mean, r.sd);
    let v2 = s2 * s2;
    let da = a - a2;
    let dm = mu - mu2;
    let base = (s2 / s).ln() + (s * s - v2 + dm * dm) / (2.0 * v2);
    let cross = (da * da * (mu * mu / ((1.0 - a) * (1.0 - a)) + s * s / (1.0 - a * a))
        + 2.0 * da * dm * mu / (1.0 - a))
        / (2.0 * v2);
    (base + cross).max(0.0)
}
