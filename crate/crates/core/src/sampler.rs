//! Metropolis-adjusted Langevin sampling of the generalized posterior over the
//! free weights of a fixed structure.
//!
//! Unnormalized log density: `(beta - 1) ln[1 + s (E(theta) - mu) / (beta lambda)]`
//! with `(mu, lambda, beta)` from the dual solution and `s = +-1`, optionally
//! plus a Gaussian (Parzen) term centred on the point estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dual::DualSolution;
use crate::error::{Error, Result};
use crate::gram::SupportedLoss;

/// Sign in front of `(E - mu)` inside the log density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossSign {
    Plus,
    #[default]
    Minus,
}

impl LossSign {
    pub fn value(self) -> f64 {
        match self {
            LossSign::Plus => 1.0,
            LossSign::Minus => -1.0,
        }
    }
}

impl Serialize for LossSign {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value() as i8)
    }
}

impl<'de> Deserialize<'de> for LossSign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(LossSign::Plus),
            -1 => Ok(LossSign::Minus),
            other => Err(serde::de::Error::custom(format!("loss sign must be 1 or -1, got {other}"))),
        }
    }
}

/// An unnormalized log density with gradient.
pub trait LogDensity {
    fn dim(&self) -> usize;
    /// `-inf` outside the support.
    fn log_density(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct GibbsPosterior {
    loss: SupportedLoss,
    mu: f64,
    lambda: f64,
    beta: f64,
    sign: f64,
    parzen: Option<(Vec<f64>, f64)>,
}

impl GibbsPosterior {
    pub fn new(loss: SupportedLoss, dual: &DualSolution, sign: LossSign) -> Result<Self> {
        if !(dual.lambda > 0.0) || !(dual.beta < 0.0) {
            return Err(Error::Validation(format!(
                "need lambda > 0 and beta < 0, got lambda={}, beta={}",
                dual.lambda, dual.beta
            )));
        }
        Ok(Self {
            loss,
            mu: dual.mu,
            lambda: dual.lambda,
            beta: dual.beta,
            sign: sign.value(),
            parzen: None,
        })
    }

    /// Adds `-|theta - centre|^2 / (2 h^2)` to the log density.
    pub fn with_parzen(mut self, centre: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if centre.len() != self.loss.size() {
            return Err(Error::Dimension(format!(
                "Parzen centre has length {}, posterior has dimension {}",
                centre.len(),
                self.loss.size()
            )));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Validation(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        self.parzen = Some((centre, bandwidth));
        Ok(self)
    }

    pub fn loss_value(&self, theta: &[f64]) -> f64 {
        self.loss.value(theta)
    }

    /// Average training loss over the stored samples.
    pub fn mean_loss(&self, chain: &PosteriorChain) -> f64 {
        if chain.samples.is_empty() {
            return f64::NAN;
        }
        chain.samples.iter().map(|s| self.loss.value(s)).sum::<f64>() / chain.samples.len() as f64
    }

    fn base(&self, e: f64) -> f64 {
        1.0 + self.sign * (e - self.mu) / (self.beta * self.lambda)
    }
}

impl LogDensity for GibbsPosterior {
    fn dim(&self) -> usize {
        self.loss.size()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let base = self.base(self.loss.value(x));
        if !(base > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut lp = (self.beta - 1.0) * base.ln();
        if let Some((c, h)) = &self.parzen {
            let sq: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            lp -= sq / (2.0 * h * h);
        }
        lp
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let base = self.base(self.loss.value(x));
        if !(base > 0.0) {
            return Err(Error::Domain("gradient requested outside the posterior support".into()));
        }
        let scale = (self.beta - 1.0) * self.sign / (self.beta * self.lambda * base);
        let mut g: Vec<f64> = self.loss.gradient(x).into_iter().map(|v| scale * v).collect();
        if let Some((c, h)) = &self.parzen {
            for ((gk, a), b) in g.iter_mut().zip(x).zip(c) {
                *gk -= (a - b) / (h * h);
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Initial step size `h`; adapted during burn-in.
    pub step_size: f64,
    pub burn_in: usize,
    pub n_samples: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub loss_sign: LossSign,
    pub parzen_bandwidth: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-2,
            burn_in: 1000,
            n_samples: 1000,
            target_accept: 0.574,
            seed: 0,
            loss_sign: LossSign::Minus,
            parzen_bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub samples: Vec<Vec<f64>>,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance_rate: f64,
    pub log_density_trace: Vec<f64>,
    /// Step size in force after burn-in.
    pub step_size: f64,
}

/// `-|to - from - (h^2 / 2) grad(from)|^2 / (2 h^2)`.
fn log_proposal(to: &[f64], from: &[f64], grad_from: &[f64], h: f64) -> f64 {
    let half = 0.5 * h * h;
    let sq: f64 = to
        .iter()
        .zip(from)
        .zip(grad_from)
        .map(|((t, f), g)| {
            let r = t - f - half * g;
            r * r
        })
        .sum();
    -sq / (2.0 * h * h)
}

/// Log acceptance ratio of the MALA move `x -> y` with step `h` (before the
/// `min(0, .)`); `-inf` when `y` is outside the support.
pub fn mala_log_accept_ratio<D: LogDensity + ?Sized>(target: &D, x: &[f64], y: &[f64], h: f64) -> Result<f64> {
    let ly = target.log_density(y);
    if ly == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let lx = target.log_density(x);
    let (gx, gy) = (target.grad(x)?, target.grad(y)?);
    Ok(ly - lx + log_proposal(x, y, &gy, h) - log_proposal(y, x, &gx, h))
}

/// Runs `burn_in + n_samples` MALA steps from `init`. During burn-in `ln h`
/// follows a Robbins-Monro update towards `target_accept` with gain `k^-0.6`;
/// afterwards `h` is frozen and every state is recorded.
pub fn run_mala<D: LogDensity + ?Sized>(target: &D, init: &[f64], cfg: &SamplerConfig) -> Result<PosteriorChain> {
    if init.len() != target.dim() {
        return Err(Error::Dimension(format!(
            "initial point has length {}, target has dimension {}",
            init.len(),
            target.dim()
        )));
    }
    if !(cfg.step_size > 0.0) || !cfg.step_size.is_finite() {
        return Err(Error::Validation(format!("step size must be > 0, got {}", cfg.step_size)));
    }
    if !(cfg.target_accept > 0.0 && cfg.target_accept < 1.0) {
        return Err(Error::Validation(format!(
            "target acceptance must lie in (0, 1), got {}",
            cfg.target_accept
        )));
    }
    let mut x = init.to_vec();
    let mut lp = target.log_density(&x);
    if !lp.is_finite() {
        return Err(Error::Initialization("initial point has zero posterior density".into()));
    }
    let mut g = target.grad(&x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log_h = cfg.step_size.ln();
    let dim = x.len();
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut trace = Vec::with_capacity(cfg.n_samples);
    let mut accepted = 0usize;
    let mut y = vec![0.0; dim];

    for k in 1..=cfg.burn_in + cfg.n_samples {
        let h = log_h.exp();
        let half = 0.5 * h * h;
        for ((yk, xk), gk) in y.iter_mut().zip(&x).zip(&g) {
            let xi: f64 = rng.sample(StandardNormal);
            *yk = xk + half * gk + h * xi;
        }
        let ly = target.log_density(&y);
        let mut alpha = 0.0;
        let mut proposal = None;
        if ly.is_finite() {
            let gy = target.grad(&y)?;
            let log_alpha = ly - lp + log_proposal(&x, &y, &gy, h) - log_proposal(&y, &x, &g, h);
            alpha = log_alpha.min(0.0).exp();
            proposal = Some((log_alpha, gy));
        }
        let u: f64 = rng.random();
        let accept = match &proposal {
            Some((log_alpha, _)) => u.ln() < *log_alpha,
            None => false,
        };
        if accept {
            let (_, gy) = proposal.expect("accepted proposals are feasible");
            x.copy_from_slice(&y);
            lp = ly;
            g = gy;
        }
        if k <= cfg.burn_in {
            log_h += (k as f64).powf(-0.6) * (alpha - cfg.target_accept);
        } else {
            accepted += usize::from(accept);
            samples.push(x.clone());
            trace.push(lp);
        }
    }
    Ok(PosteriorChain {
        acceptance_rate: if cfg.n_samples == 0 {
            0.0
        } else {
            accepted as f64 / cfg.n_samples as f64
        },
        samples,
        log_density_trace: trace,
        step_size: log_h.exp(),
    })
}
