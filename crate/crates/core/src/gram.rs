//! Sufficient statistics for the least-squares loss.
//!
//! Every loss term is a regression of `x_t[i]` on entries of the stacked row
//! `z = [x_t, x_{t-1}, ..., x_{t-p}]`, so the Gram matrix `sum z z^T` over the
//! counted `(n, t)` pairs determines the loss of any parameter set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lsem::{Coord, SupportMap, TrajectoryDataset};

const RIDGE_JITTER: f64 = 1e-10;
/// A Cholesky pivot this small relative to its diagonal marks a singular design.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Gram matrix of the stacked lag rows. Block `b` (0 = contemporaneous,
/// `b = l + 1` for lag `l`) occupies indices `b * d .. (b + 1) * d`.
#[derive(Debug, Clone)]
pub struct LaggedGram {
    dim: usize,
    lags: usize,
    size: usize,
    rows: usize,
    g: Vec<f64>,
}

impl LaggedGram {
    pub fn new(data: &TrajectoryDataset) -> Self {
        let (d, p) = (data.dim(), data.lag_order());
        let size = d * (p + 1);
        let mut g = vec![0.0; size * size];
        let mut z = vec![0.0; size];
        for n in 0..data.n_traj() {
            for t in p..data.horizon() {
                for b in 0..=p {
                    z[b * d..(b + 1) * d].copy_from_slice(data.slice(n, t - b));
                }
                for a in 0..size {
                    let za = z[a];
                    if za == 0.0 {
                        continue;
                    }
                    let row = &mut g[a * size..(a + 1) * size];
                    for (gb, &zb) in row[a..].iter_mut().zip(&z[a..]) {
                        *gb += za * zb;
                    }
                }
            }
        }
        for a in 0..size {
            for b in 0..a {
                g[a * size + b] = g[b * size + a];
            }
        }
        Self {
            dim: d,
            lags: p,
            size,
            rows: data.effective_rows(),
            g,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    /// Side length `d (p + 1)`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of `(n, t)` rows accumulated.
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.g[a * self.size + b]
    }

    /// Index of `x_{t-lag}[j]` in the stacked row.
    #[inline]
    pub fn index(&self, lag: usize, j: usize) -> usize {
        lag * self.dim + j
    }

    /// Index of the regressor that a support coordinate multiplies.
    pub fn regressor_of(&self, coord: &Coord) -> usize {
        match *coord {
            Coord::Intra { j, .. } => self.index(0, j),
            Coord::Inter { l, j, .. } => self.index(l + 1, j),
        }
    }

    /// Least-squares coefficients of `x_t[target]` on the given regressors,
    /// from the normal equations. Singular designs get a relative ridge
    /// jitter, escalated until the factorization is well posed.
    pub fn solve(&self, target: usize, regressors: &[usize]) -> Vec<f64> {
        let k = regressors.len();
        if k == 0 {
            return Vec::new();
        }
        let gram = DMatrix::from_fn(k, k, |a, b| self.get(regressors[a], regressors[b]));
        let rhs = DVector::from_fn(k, |a, _| self.get(regressors[a], target));
        let scale = (0..k).map(|a| gram[(a, a)]).sum::<f64>() / k as f64;
        if !(scale > 0.0) {
            return vec![0.0; k];
        }
        let mut jitter = 0.0;
        for _ in 0..16 {
            let mut m = gram.clone();
            for a in 0..k {
                m[(a, a)] += jitter;
            }
            if let Some(chol) = m.clone().cholesky() {
                let l = chol.l_dirty();
                let well_posed = (0..k).all(|a| {
                    let pivot = l[(a, a)] * l[(a, a)];
                    pivot > PIVOT_TOLERANCE * m[(a, a)].max(f64::MIN_POSITIVE)
                });
                if well_posed {
                    let x = chol.solve(&rhs);
                    if x.iter().all(|v| v.is_finite()) {
                        return x.iter().copied().collect();
                    }
                }
            }
            jitter = if jitter == 0.0 {
                RIDGE_JITTER * scale
            } else {
                jitter * 10.0
            };
        }
        vec![0.0; k]
    }

    /// Residual sum of squares of column `target` with the given coefficients.
    pub fn column_rss(&self, target: usize, regressors: &[usize], coef: &[f64]) -> f64 {
        let mut rss = self.get(target, target);
        for (a, (&ra, &ca)) in regressors.iter().zip(coef).enumerate() {
            rss -= 2.0 * ca * self.get(ra, target);
            let mut inner = 0.0;
            for (&rb, &cb) in regressors[..a].iter().zip(coef) {
                inner += cb * self.get(ra, rb);
            }
            rss += ca * (ca * self.get(ra, ra) + 2.0 * inner);
        }
        rss.max(0.0)
    }

    /// Fitted coefficients and their residual sum of squares.
    pub fn fit_column(&self, target: usize, regressors: &[usize]) -> (Vec<f64>, f64) {
        let coef = self.solve(target, regressors);
        let rss = self.column_rss(target, regressors, &coef);
        (coef, rss)
    }
}

/// The loss `theta -> loss(data, embed_params(theta, map))` as an explicit
/// quadratic `c - 2 b^T theta + theta^T Q theta`.
#[derive(Debug, Clone)]
pub struct SupportedLoss {
    constant: f64,
    linear: Vec<f64>,
    quadratic: Vec<f64>,
    size: usize,
}

impl SupportedLoss {
    pub fn new(data: &TrajectoryDataset, map: &SupportMap) -> Result<Self> {
        if data.dim() != map.dim() || data.lag_order() != map.lags() {
            return Err(Error::Dimension(format!(
                "data has d={}, p={}; support map has d={}, p={}",
                data.dim(),
                data.lag_order(),
                map.dim(),
                map.lags()
            )));
        }
        Ok(Self::from_gram(&LaggedGram::new(data), map))
    }

    pub fn from_gram(gram: &LaggedGram, map: &SupportMap) -> Self {
        let entries = map.entries();
        let s = entries.len();
        let constant = (0..gram.dim()).map(|i| gram.get(i, i)).sum();
        let regs: Vec<usize> = entries.iter().map(|c| gram.regressor_of(c)).collect();
        let linear = entries
            .iter()
            .zip(&regs)
            .map(|(c, &r)| gram.get(r, c.target()))
            .collect();
        let mut quadratic = vec![0.0; s * s];
        for a in 0..s {
            for b in 0..s {
                if entries[a].target() == entries[b].target() {
                    quadratic[a * s + b] = gram.get(regs[a], regs[b]);
                }
            }
        }
        Self {
            constant,
            linear,
            quadratic,
            size: s,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let s = self.size;
        let mut v = self.constant;
        for a in 0..s {
            let qa = &self.quadratic[a * s..(a + 1) * s];
            let q_theta: f64 = qa.iter().zip(theta).map(|(q, t)| q * t).sum();
            v += theta[a] * (q_theta - 2.0 * self.linear[a]);
        }
        v
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let s = self.size;
        (0..s)
            .map(|a| {
                let qa = &self.quadratic[a * s..(a + 1) * s];
                let q_theta: f64 = qa.iter().zip(theta).map(|(q, t)| q * t).sum();
                2.0 * (q_theta - self.linear[a])
            })
            .collect()
    }
}
