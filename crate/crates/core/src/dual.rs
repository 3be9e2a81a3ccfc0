//! Two-scalar convex dual of the risk-bound problem.
//!
//! `f(mu, lambda) = mu + eps lambda + lambda [(1 + (E - mu) / (lambda beta))^beta - 1]`
//! for `beta < 0`, finite where `mu > E - |beta| lambda`. The derivative in
//! `mu` is `1 - base^(beta - 1)`, so the inner minimum sits at `mu = E` for
//! every `lambda` and the outer objective reduces to `E + eps lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_POINTS: usize = 200;
const GOLDEN_TOL: f64 = 1e-12;
const MAX_GOLDEN_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub epsilon: f64,
    pub beta: f64,
    /// Lower end of the admissible `lambda` range.
    pub lambda_min: f64,
    /// The loss value `E` the bound is built around.
    pub reference_loss: f64,
}

impl DualConfig {
    /// `lambda_min` defaults to `max(1e-3 |E|, 1e-12)`.
    pub fn new(epsilon: f64, beta: f64, reference_loss: f64) -> Result<Self> {
        let cfg = Self {
            epsilon,
            beta,
            lambda_min: (1e-3 * reference_loss.abs()).max(1e-12),
            reference_loss,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lambda_min(mut self, lambda_min: f64) -> Result<Self> {
        self.lambda_min = lambda_min;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta < 0.0) || !self.beta.is_finite() {
            return Err(Error::Validation(format!("beta must be finite and < 0, got {}", self.beta)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Validation(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.lambda_min > 0.0) || !self.lambda_min.is_finite() {
            return Err(Error::Validation(format!("lambda_min must be finite and > 0, got {}", self.lambda_min)));
        }
        if !self.reference_loss.is_finite() {
            return Err(Error::Validation("reference loss must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub mu: f64,
    pub lambda: f64,
    pub objective: f64,
    pub converged: bool,
    pub epsilon: f64,
    pub beta: f64,
}

/// Dual objective; `+inf` outside the feasible region, an error for `lambda <= 0`.
pub fn dual_objective(cfg: &DualConfig, mu: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    let base = 1.0 + (cfg.reference_loss - mu) / (lambda * cfg.beta);
    if !(base > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(mu + cfg.epsilon * lambda + lambda * (base.powf(cfg.beta) - 1.0))
}

/// Golden-section minimization of `f` on `[lo, hi]`; returns `(x, f(x), converged)`.
fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64, bool) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..MAX_GOLDEN_ITERS {
        if (hi - lo).abs() <= GOLDEN_TOL * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let converged = (hi - lo).abs() <= GOLDEN_TOL * (1.0 + lo.abs().max(hi.abs())) * 10.0;
    if f1 <= f2 {
        (x1, f1, converged)
    } else {
        (x2, f2, converged)
    }
}

/// Minimizes the dual over `mu` and `lambda >= lambda_min`.
///
/// A log-spaced grid over `lambda` (with the inner minimum `mu = E`) is
/// refined by golden-section search in `log lambda`, then in `mu`; the
/// analytic point is kept whenever it is at least as good. Ties go to the
/// smaller `lambda`.
pub fn solve_dual(cfg: &DualConfig, init_mu: f64, init_lambda: f64) -> Result<DualSolution> {
    cfg.validate()?;
    if !(init_lambda > 0.0) || !init_lambda.is_finite() || !init_mu.is_finite() {
        return Err(Error::Validation(format!(
            "initial point (mu={init_mu}, lambda={init_lambda}) must be finite with lambda > 0"
        )));
    }
    let e = cfg.reference_loss;
    let lo = cfg.lambda_min.ln();
    let hi = (10.0 * init_lambda).max(1e6 * cfg.lambda_min).ln();
    let outer = |log_l: f64| dual_objective(cfg, e, log_l.exp()).unwrap_or(f64::INFINITY);

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let mut best_k = 0;
    let mut best_v = outer(grid[0]);
    for (k, &g) in grid.iter().enumerate().skip(1) {
        let v = outer(g);
        if v < best_v {
            best_k = k;
            best_v = v;
        }
    }
    let mut lambda = grid[best_k].exp();
    let mut mu = e;
    let mut value = best_v;
    let (a, b) = (grid[best_k.saturating_sub(1)], grid[(best_k + 1).min(GRID_POINTS - 1)]);
    let (log_l, v, lambda_converged) = golden(a, b, outer);
    if v < value {
        lambda = log_l.exp();
        value = v;
    }

    let half_width = cfg.beta.abs() * lambda;
    let (m, v, mu_converged) = golden(e - 0.5 * half_width, e + half_width, |m| {
        dual_objective(cfg, m, lambda).unwrap_or(f64::INFINITY)
    });
    if v < value {
        mu = m;
        value = v;
    }
    let from_init = dual_objective(cfg, init_mu, init_lambda.max(cfg.lambda_min))?;
    if from_init < value {
        mu = init_mu;
        lambda = init_lambda.max(cfg.lambda_min);
        value = from_init;
    }
    Ok(DualSolution {
        mu,
        lambda,
        objective: value,
        converged: lambda_converged && mu_converged,
        epsilon: cfg.epsilon,
        beta: cfg.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_at_reference_is_linear_in_lambda() {
        let cfg = DualConfig::new(0.1, -5.0, 3.0).unwrap();
        assert!((dual_objective(&cfg, 3.0, 2.0).unwrap() - 3.2).abs() < 1e-15);
        assert_eq!(dual_objective(&cfg, 3.0 - 5.0 * 2.0, 2.0).unwrap(), f64::INFINITY);
        assert!(matches!(dual_objective(&cfg, 3.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn minimum_at_smallest_lambda() {
        let cfg = DualConfig::new(0.2, -3.0, 10.0).unwrap().with_lambda_min(0.05).unwrap();
        let sol = solve_dual(&cfg, 7.0, 1.0).unwrap();
        assert!((sol.lambda - 0.05).abs() < 1e-9);
        assert!((sol.mu - 10.0).abs() < 1e-6);
        assert!((sol.objective - 10.01).abs() < 1e-9);
        assert!(sol.converged);
        assert_eq!((sol.epsilon, sol.beta), (0.2, -3.0));
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(DualConfig::new(0.1, 0.5, 1.0).is_err());
        assert!(DualConfig::new(-0.1, -1.0, 1.0).is_err());
        let cfg = DualConfig::new(0.1, -1.0, 1.0).unwrap();
        assert!(cfg.with_lambda_min(0.0).is_err());
        assert!(solve_dual(&cfg, 1.0, -1.0).is_err());
    }
}
