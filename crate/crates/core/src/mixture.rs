//! Mixture weights over candidate structures and out-of-sample loss draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsem::{embed_params, loss, SupportMap, TrajectoryDataset};
use crate::sampler::PosteriorChain;
use crate::solver::IpSolution;

/// `w_m ∝ exp(-E_m / tau)`, computed with the log-sum-exp shift.
pub fn model_weights(mean_losses: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if mean_losses.is_empty() {
        return Err(Error::Validation("no models to weight".into()));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Validation(format!("temperature must be > 0, got {temperature}")));
    }
    if let Some(m) = mean_losses.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("model {} has non-finite mean loss", m + 1)));
    }
    let logits: Vec<f64> = mean_losses.iter().map(|e| -e / temperature).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// `w_i / w_j` for 0-based model indices.
pub fn bayes_factor(weights: &[f64], i: usize, j: usize) -> Result<f64> {
    let n = weights.len();
    if i >= n || j >= n {
        return Err(Error::Bounds(format!("model indices ({i}, {j}) outside 0..{n}")));
    }
    if weights[j] == 0.0 {
        return Err(Error::Domain(format!("model {j} has zero weight")));
    }
    Ok(weights[i] / weights[j])
}

/// One out-of-sample draw: the 0-based model it came from and its loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalDraw {
    pub model: usize,
    pub loss: f64,
}

/// Smallest `i` whose cumulative weight reaches `rho`, falling back to the
/// last model with positive weight when rounding leaves the sum short.
fn pick_model(weights: &[f64], rho: f64) -> usize {
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if cum >= rho && w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// `R` draws: a model by inverse-CDF sampling of the weights, a stored
/// posterior sample of that model uniformly at random, and its loss on
/// `data`.
pub fn sample_evaluation(
    weights: &[f64],
    chains: &[PosteriorChain],
    maps: &[SupportMap],
    data: &TrajectoryDataset,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<EvalDraw>> {
    if weights.len() != chains.len() || weights.len() != maps.len() || weights.is_empty() {
        return Err(Error::Dimension(format!(
            "{} weights, {} chains, {} support maps",
            weights.len(),
            chains.len(),
            maps.len()
        )));
    }
    if let Some(m) = chains.iter().position(|c| c.samples.is_empty()) {
        return Err(Error::Validation(format!("model {} has an empty chain", m + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let rho = 1.0 - rng.random::<f64>();
        let m = pick_model(weights, rho);
        let q = rng.random_range(0..chains[m].samples.len());
        let params = embed_params(&chains[m].samples[q], &maps[m])?;
        draws.push(EvalDraw {
            model: m,
            loss: loss(data, &params)?,
        });
    }
    Ok(draws)
}

/// Loss of each point estimate on `data`.
pub fn point_estimate_losses(solutions: &[IpSolution], data: &TrajectoryDataset) -> Result<Vec<f64>> {
    solutions.iter().map(|s| loss(data, &s.params)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]`, the last bin closed on the right.
/// When every value is equal the range is `[v, v + 1]`.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::Validation("histogram of an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("histogram values must be finite".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (pos.floor() as usize).min(n - 2);
    let frac = pos - k as f64;
    sorted[k] + frac * (sorted[k + 1] - sorted[k])
}

pub fn summarize(values: &[f64]) -> Result<LossSummary> {
    if values.is_empty() {
        return Err(Error::Validation("summary of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(LossSummary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: percentile(&sorted, 0.5),
        p05: percentile(&sorted, 0.05),
        p95: percentile(&sorted, 0.95),
    })
}
