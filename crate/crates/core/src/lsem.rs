//! Linear structural equation model for a dynamic Bayesian network.
//!
//! A state row vector evolves as `X_t = X_t W + X_{t-1} A_1 + ... + X_{t-p} A_p + Z_t`,
//! where `W` carries the intra-slice edges (must be acyclic) and each `A_l` the
//! edges from lag `l`. Row-vector convention throughout: `W[j][i] != 0` is the
//! edge `j -> i`.
//!
//! Tensor layouts used by every type here:
//! * intra-slice, `d x d`: flat index `j * d + i`;
//! * inter-slice, `p x d x d`: flat index `(l * d + j) * d + i`, where `l = 0`
//!   is the first lag (`A_1`).

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` trajectories of `T` slices of a `d`-dimensional state, plus the lag
/// order `p` a model fitted to it will use.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    values: Vec<f64>,
    n_traj: usize,
    horizon: usize,
    dim: usize,
    lag_order: usize,
}

impl TrajectoryDataset {
    /// Builds a dataset from a flat `[n][t][i]` buffer.
    pub fn new(
        values: Vec<f64>,
        n_traj: usize,
        horizon: usize,
        dim: usize,
        lag_order: usize,
    ) -> Result<Self> {
        if n_traj == 0 || dim == 0 {
            return Err(Error::Validation(format!(
                "dataset needs N >= 1 and d >= 1 (got N={n_traj}, d={dim})"
            )));
        }
        if horizon < lag_order + 1 {
            return Err(Error::Validation(format!(
                "horizon T={horizon} must exceed lag order p={lag_order}"
            )));
        }
        if values.len() != n_traj * horizon * dim {
            return Err(Error::Dimension(format!(
                "expected {} values for N={n_traj}, T={horizon}, d={dim}, got {}",
                n_traj * horizon * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (n, rest) = (pos / (horizon * dim), pos % (horizon * dim));
            return Err(Error::Validation(format!(
                "non-finite value at trajectory {n}, step {}, coordinate {}",
                rest / dim,
                rest % dim
            )));
        }
        Ok(Self {
            values,
            n_traj,
            horizon,
            dim,
            lag_order,
        })
    }

    /// Builds a dataset from nested `[n][t][i]` vectors.
    pub fn from_trajectories(trajectories: &[Vec<Vec<f64>>], lag_order: usize) -> Result<Self> {
        let n_traj = trajectories.len();
        let horizon = trajectories.first().map_or(0, Vec::len);
        let dim = trajectories
            .first()
            .and_then(|tr| tr.first())
            .map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n_traj * horizon * dim);
        for (n, tr) in trajectories.iter().enumerate() {
            if tr.len() != horizon {
                return Err(Error::Dimension(format!(
                    "trajectory {n} has {} steps, expected {horizon}",
                    tr.len()
                )));
            }
            for (t, slice) in tr.iter().enumerate() {
                if slice.len() != dim {
                    return Err(Error::Dimension(format!(
                        "trajectory {n} step {t} has {} coordinates, expected {dim}",
                        slice.len()
                    )));
                }
                values.extend_from_slice(slice);
            }
        }
        Self::new(values, n_traj, horizon, dim, lag_order)
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of `(n, t)` pairs that enter the loss: `N * (T - p)`.
    pub fn effective_rows(&self) -> usize {
        self.n_traj * (self.horizon - self.lag_order)
    }

    #[inline]
    pub fn get(&self, n: usize, t: usize, i: usize) -> f64 {
        self.values[(n * self.horizon + t) * self.dim + i]
    }

    /// The state vector of trajectory `n` at step `t`.
    #[inline]
    pub fn slice(&self, n: usize, t: usize) -> &[f64] {
        let start = (n * self.horizon + t) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn trajectory(&self, n: usize) -> &[f64] {
        let len = self.horizon * self.dim;
        &self.values[n * len..(n + 1) * len]
    }

    /// Nested `[n][t][i]` copy of the data.
    pub fn to_trajectories(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_traj)
            .map(|n| (0..self.horizon).map(|t| self.slice(n, t).to_vec()).collect())
            .collect()
    }

    /// Dataset restricted to the given trajectory indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Bounds("cannot select zero trajectories".into()));
        }
        let mut values = Vec::with_capacity(indices.len() * self.horizon * self.dim);
        for &n in indices {
            if n >= self.n_traj {
                return Err(Error::Bounds(format!(
                    "trajectory index {n} out of range for N={}",
                    self.n_traj
                )));
            }
            values.extend_from_slice(self.trajectory(n));
        }
        Ok(Self {
            values,
            n_traj: indices.len(),
            horizon: self.horizon,
            dim: self.dim,
            lag_order: self.lag_order,
        })
    }

    pub fn with_lag_order(&self, lag_order: usize) -> Result<Self> {
        Self::new(
            self.values.clone(),
            self.n_traj,
            self.horizon,
            self.dim,
            lag_order,
        )
    }
}

/// Binary structure `(E_W, E_A)`: intra-slice adjacency (acyclic) and one
/// inter-slice adjacency per lag.
///
/// Ordering is lexicographic on the flattened bit vector (`e_w` then `e_a`,
/// `false < true`); it is the tie-break order of the structure solvers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructureMask {
    dim: usize,
    lags: usize,
    e_w: Vec<bool>,
    e_a: Vec<bool>,
}

impl PartialOrd for StructureMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StructureMask {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.dim, self.lags)
            .cmp(&(other.dim, other.lags))
            .then_with(|| self.e_w.cmp(&other.e_w))
            .then_with(|| self.e_a.cmp(&other.e_a))
    }
}

impl StructureMask {
    pub fn empty(dim: usize, lags: usize) -> Self {
        Self {
            dim,
            lags,
            e_w: vec![false; dim * dim],
            e_a: vec![false; lags * dim * dim],
        }
    }

    /// Builds a mask from flat buffers, rejecting cyclic intra-slice graphs.
    pub fn from_flat(dim: usize, lags: usize, e_w: Vec<bool>, e_a: Vec<bool>) -> Result<Self> {
        if e_w.len() != dim * dim || e_a.len() != lags * dim * dim {
            return Err(Error::Dimension(format!(
                "mask buffers of length ({}, {}) do not match d={dim}, p={lags}",
                e_w.len(),
                e_a.len()
            )));
        }
        if !is_acyclic(&e_w, dim) {
            return Err(Error::Structural(
                "intra-slice graph contains a directed cycle".into(),
            ));
        }
        Ok(Self { dim, lags, e_w, e_a })
    }

    /// Builds a mask from edge lists: intra `(j, i)` and inter `(l, j, i)`.
    pub fn from_edges(
        dim: usize,
        lags: usize,
        intra: &[(usize, usize)],
        inter: &[(usize, usize, usize)],
    ) -> Result<Self> {
        let mut e_w = vec![false; dim * dim];
        let mut e_a = vec![false; lags * dim * dim];
        for &(j, i) in intra {
            if j >= dim || i >= dim {
                return Err(Error::Bounds(format!("intra edge ({j}, {i}) outside d={dim}")));
            }
            e_w[j * dim + i] = true;
        }
        for &(l, j, i) in inter {
            if l >= lags || j >= dim || i >= dim {
                return Err(Error::Bounds(format!(
                    "inter edge ({l}, {j}, {i}) outside d={dim}, p={lags}"
                )));
            }
            e_a[(l * dim + j) * dim + i] = true;
        }
        Self::from_flat(dim, lags, e_w, e_a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn e_w(&self) -> &[bool] {
        &self.e_w
    }

    pub fn e_a(&self) -> &[bool] {
        &self.e_a
    }

    #[inline]
    pub fn intra(&self, j: usize, i: usize) -> bool {
        self.e_w[j * self.dim + i]
    }

    #[inline]
    pub fn inter(&self, l: usize, j: usize, i: usize) -> bool {
        self.e_a[(l * self.dim + j) * self.dim + i]
    }

    pub fn intra_count(&self) -> usize {
        self.e_w.iter().filter(|&&b| b).count()
    }

    pub fn inter_count(&self) -> usize {
        self.e_a.iter().filter(|&&b| b).count()
    }

    pub fn edge_count(&self) -> usize {
        self.intra_count() + self.inter_count()
    }

    /// Intra-slice edges as `(j, i)` pairs, row-major.
    pub fn intra_edges(&self) -> Vec<(usize, usize)> {
        let d = self.dim;
        (0..d * d)
            .filter(|&k| self.e_w[k])
            .map(|k| (k / d, k % d))
            .collect()
    }

    /// Inter-slice edges as `(l, j, i)` triples, `l = 0` being the first lag.
    pub fn inter_edges(&self) -> Vec<(usize, usize, usize)> {
        let d = self.dim;
        (0..self.e_a.len())
            .filter(|&k| self.e_a[k])
            .map(|k| (k / (d * d), (k / d) % d, k % d))
            .collect()
    }

    /// Intra-slice matrix as nested rows (`rows[j][i]`).
    pub fn intra_rows(&self) -> Vec<Vec<bool>> {
        self.e_w.chunks(self.dim).map(<[bool]>::to_vec).collect()
    }
}

/// Real weights `(W, A_1..A_p)` in the flat layouts of the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    dim: usize,
    lags: usize,
    w: Vec<f64>,
    a: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(dim: usize, lags: usize) -> Self {
        Self {
            dim,
            lags,
            w: vec![0.0; dim * dim],
            a: vec![0.0; lags * dim * dim],
        }
    }

    pub fn from_flat(dim: usize, lags: usize, w: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if w.len() != dim * dim || a.len() != lags * dim * dim {
            return Err(Error::Dimension(format!(
                "parameter buffers of length ({}, {}) do not match d={dim}, p={lags}",
                w.len(),
                a.len()
            )));
        }
        Ok(Self { dim, lags, w, a })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    #[inline]
    pub fn intra(&self, j: usize, i: usize) -> f64 {
        self.w[j * self.dim + i]
    }

    #[inline]
    pub fn inter(&self, l: usize, j: usize, i: usize) -> f64 {
        self.a[(l * self.dim + j) * self.dim + i]
    }

    pub fn set_intra(&mut self, j: usize, i: usize, value: f64) {
        self.w[j * self.dim + i] = value;
    }

    pub fn set_inter(&mut self, l: usize, j: usize, i: usize, value: f64) {
        self.a[(l * self.dim + j) * self.dim + i] = value;
    }

    /// The mask of nonzero entries. Fails if the nonzero intra-slice entries
    /// form a cycle.
    pub fn support(&self) -> Result<StructureMask> {
        StructureMask::from_flat(
            self.dim,
            self.lags,
            self.w.iter().map(|&v| v != 0.0).collect(),
            self.a.iter().map(|&v| v != 0.0).collect(),
        )
    }

    pub fn is_supported_on(&self, mask: &StructureMask) -> bool {
        self.dim == mask.dim
            && self.lags == mask.lags
            && self.w.iter().zip(&mask.e_w).all(|(&v, &m)| m || v == 0.0)
            && self.a.iter().zip(&mask.e_a).all(|(&v, &m)| m || v == 0.0)
    }

    /// `W` as nested rows.
    pub fn intra_rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// `A` as `[l][j][i]` nested vectors.
    pub fn inter_tensor(&self) -> Vec<Vec<Vec<f64>>> {
        let d = self.dim;
        self.a
            .chunks(d * d)
            .map(|m| m.chunks(d).map(<[f64]>::to_vec).collect())
            .collect()
    }
}

/// One free coordinate of a support map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "slot", rename_all = "lowercase")]
pub enum Coord {
    Intra { j: usize, i: usize },
    Inter { l: usize, j: usize, i: usize },
}

impl Coord {
    /// Target column `i` of the coordinate.
    pub fn target(&self) -> usize {
        match *self {
            Coord::Intra { i, .. } | Coord::Inter { i, .. } => i,
        }
    }

    /// Column label used in chain CSV headers: `w_j_i` or `a{lag}_j_i`, 1-based.
    pub fn label(&self) -> String {
        match *self {
            Coord::Intra { j, i } => format!("w_{}_{}", j + 1, i + 1),
            Coord::Inter { l, j, i } => format!("a{}_{}_{}", l + 1, j + 1, i + 1),
        }
    }
}

/// Bijection between `R^s` and the parameter sets supported on a mask.
/// Entries: intra-slice coordinates row-major, then inter-slice by `(l, j, i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMap {
    dim: usize,
    lags: usize,
    entries: Vec<Coord>,
}

impl SupportMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    pub fn entries(&self) -> &[Coord] {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(Coord::label).collect()
    }
}

/// Acyclicity test for a flat `d x d` adjacency (`adj[j * d + i]` is `j -> i`).
/// Self-loops count as cycles.
pub fn is_acyclic(adj: &[bool], d: usize) -> bool {
    topological_order(adj, d).is_some()
}

/// Kahn's algorithm; `None` when the graph has a cycle. Among ready nodes the
/// smallest index is emitted first.
pub fn topological_order(adj: &[bool], d: usize) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; d];
    for j in 0..d {
        for i in 0..d {
            if adj[j * d + i] {
                indegree[i] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(d);
    let mut done = vec![false; d];
    while order.len() < d {
        let next = (0..d).find(|&v| !done[v] && indegree[v] == 0)?;
        done[next] = true;
        order.push(next);
        for i in 0..d {
            if adj[next * d + i] {
                indegree[i] -= 1;
            }
        }
    }
    Some(order)
}

/// True iff the square binary matrix (`rows[j][i]` is the edge `j -> i`) has
/// no directed cycle.
pub fn is_dag(rows: &[Vec<bool>]) -> Result<bool> {
    let d = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::Dimension(format!(
            "row {bad} has length {}, matrix must be {d}x{d}",
            rows[bad].len()
        )));
    }
    let flat: Vec<bool> = rows.iter().flatten().copied().collect();
    Ok(is_acyclic(&flat, d))
}

pub fn build_support_map(mask: &StructureMask) -> SupportMap {
    let entries = mask
        .intra_edges()
        .into_iter()
        .map(|(j, i)| Coord::Intra { j, i })
        .chain(
            mask.inter_edges()
                .into_iter()
                .map(|(l, j, i)| Coord::Inter { l, j, i }),
        )
        .collect();
    SupportMap {
        dim: mask.dim,
        lags: mask.lags,
        entries,
    }
}

/// `phi(theta)`: places `theta[k]` at `map.entries()[k]`, zeros elsewhere.
pub fn embed_params(theta: &[f64], map: &SupportMap) -> Result<ParamSet> {
    if theta.len() != map.size() {
        return Err(Error::Dimension(format!(
            "theta has length {}, support map has {} entries",
            theta.len(),
            map.size()
        )));
    }
    let mut params = ParamSet::zeros(map.dim, map.lags);
    for (&value, coord) in theta.iter().zip(&map.entries) {
        match *coord {
            Coord::Intra { j, i } => params.set_intra(j, i, value),
            Coord::Inter { l, j, i } => params.set_inter(l, j, i, value),
        }
    }
    Ok(params)
}

/// Inverse of [`embed_params`] on parameter sets supported on the map.
pub fn extract_params(params: &ParamSet, map: &SupportMap) -> Result<Vec<f64>> {
    if params.dim != map.dim || params.lags != map.lags {
        return Err(Error::Dimension(format!(
            "params (d={}, p={}) vs support map (d={}, p={})",
            params.dim, params.lags, map.dim, map.lags
        )));
    }
    let d = map.dim;
    let mut covered_w = vec![false; d * d];
    let mut covered_a = vec![false; map.lags * d * d];
    let theta = map
        .entries
        .iter()
        .map(|coord| match *coord {
            Coord::Intra { j, i } => {
                covered_w[j * d + i] = true;
                params.intra(j, i)
            }
            Coord::Inter { l, j, i } => {
                covered_a[(l * d + j) * d + i] = true;
                params.inter(l, j, i)
            }
        })
        .collect();
    let stray_w = (0..d * d).find(|&k| !covered_w[k] && params.w[k] != 0.0);
    let stray_a = (0..covered_a.len()).find(|&k| !covered_a[k] && params.a[k] != 0.0);
    if let Some(k) = stray_w {
        return Err(Error::SupportViolation(format!(
            "W[{}][{}] = {} lies outside the support",
            k / d,
            k % d,
            params.w[k]
        )));
    }
    if let Some(k) = stray_a {
        return Err(Error::SupportViolation(format!(
            "A[{}][{}][{}] = {} lies outside the support",
            k / (d * d),
            (k / d) % d,
            k % d,
            params.a[k]
        )));
    }
    Ok(theta)
}

fn check_dims(data: &TrajectoryDataset, dim: usize, lags: usize) -> Result<()> {
    if data.dim != dim || data.lag_order != lags {
        return Err(Error::Dimension(format!(
            "data has d={}, p={}; model has d={dim}, p={lags}",
            data.dim, data.lag_order
        )));
    }
    Ok(())
}

/// Residual `x_t - x_t W - sum_l x_{t-l} A_l` for one `(n, t)`, written into `out`.
fn residual_into(data: &TrajectoryDataset, params: &ParamSet, n: usize, t: usize, out: &mut [f64]) {
    let d = data.dim;
    let x_t = data.slice(n, t);
    out.copy_from_slice(x_t);
    for (j, &xj) in x_t.iter().enumerate() {
        if xj != 0.0 {
            let row = &params.w[j * d..(j + 1) * d];
            out.iter_mut().zip(row).for_each(|(r, &w)| *r -= xj * w);
        }
    }
    for l in 0..params.lags {
        let x_lag = data.slice(n, t - l - 1);
        for (j, &xj) in x_lag.iter().enumerate() {
            if xj != 0.0 {
                let start = (l * d + j) * d;
                let row = &params.a[start..start + d];
                out.iter_mut().zip(row).for_each(|(r, &a)| *r -= xj * a);
            }
        }
    }
}

/// Sum of squared one-step residuals over all trajectories, steps
/// `t = p+1..T` and coordinates.
pub fn loss(data: &TrajectoryDataset, params: &ParamSet) -> Result<f64> {
    check_dims(data, params.dim, params.lags)?;
    let mut residual = vec![0.0; data.dim];
    let mut total = 0.0;
    for n in 0..data.n_traj {
        for t in data.lag_order..data.horizon {
            residual_into(data, params, n, t, &mut residual);
            total += residual.iter().map(|r| r * r).sum::<f64>();
        }
    }
    Ok(total)
}

/// Gradient of `loss(data, embed_params(theta, map))` with respect to `theta`.
pub fn loss_gradient(data: &TrajectoryDataset, map: &SupportMap, theta: &[f64]) -> Result<Vec<f64>> {
    check_dims(data, map.dim, map.lags)?;
    let params = embed_params(theta, map)?;
    let mut grad = vec![0.0; map.size()];
    if map.is_empty() {
        return Ok(grad);
    }
    let mut residual = vec![0.0; data.dim];
    for n in 0..data.n_traj {
        for t in data.lag_order..data.horizon {
            residual_into(data, &params, n, t, &mut residual);
            for (g, coord) in grad.iter_mut().zip(&map.entries) {
                *g -= 2.0
                    * match *coord {
                        Coord::Intra { j, i } => residual[i] * data.get(n, t, j),
                        Coord::Inter { l, j, i } => residual[i] * data.get(n, t - l - 1, j),
                    };
            }
        }
    }
    Ok(grad)
}

/// Settings for [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Standard deviation of the iid Gaussian innovations `Z_t`.
    pub sigma: f64,
    pub n_traj: usize,
    pub horizon: usize,
    /// Generated slices discarded before the recorded window.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Standard deviation of the `p` initial slices.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    pub seed: u64,
}

fn default_warmup() -> usize {
    10
}

fn default_init_scale() -> f64 {
    1.0
}

impl SimulationConfig {
    pub fn new(sigma: f64, n_traj: usize, horizon: usize, seed: u64) -> Self {
        Self {
            sigma,
            n_traj,
            horizon,
            warmup: default_warmup(),
            init_scale: default_init_scale(),
            seed,
        }
    }

    pub fn with_warmup(mut self, warmup: usize) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_init_scale(mut self, init_scale: f64) -> Self {
        self.init_scale = init_scale;
        self
    }
}

/// Draws trajectories from the model `(mask, params)`.
///
/// Each trajectory is a sequence of `warmup + T` slices: the first `p` are
/// `N(0, init_scale^2 I)`, every later slice solves
/// `x_t (I - W) = x_{t-1} A_1 + ... + x_{t-p} A_p + z_t`, `z_t ~ N(0, sigma^2 I)`.
/// The last `T` slices are kept. The returned dataset has lag order `p`.
pub fn simulate(
    mask: &StructureMask,
    params: &ParamSet,
    cfg: &SimulationConfig,
) -> Result<TrajectoryDataset> {
    if params.dim != mask.dim || params.lags != mask.lags {
        return Err(Error::Dimension("params and mask disagree on (d, p)".into()));
    }
    if !params.is_supported_on(mask) {
        return Err(Error::SupportViolation(
            "params have nonzero entries outside the mask".into(),
        ));
    }
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) || !(cfg.init_scale >= 0.0) {
        return Err(Error::Validation(format!(
            "sigma={} and init_scale={} must be finite and >= 0",
            cfg.sigma, cfg.init_scale
        )));
    }
    let (d, p) = (mask.dim, mask.lags);
    // The mask constructor guarantees acyclicity, so (I - W) is invertible by
    // substitution along a topological order.
    let order = topological_order(&mask.e_w, d)
        .ok_or_else(|| Error::Structural("(I - W) is singular: cyclic intra-slice graph".into()))?;
    let len = cfg.warmup + cfg.horizon;
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let init = Normal::new(0.0, cfg.init_scale).map_err(|e| Error::Validation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut values = Vec::with_capacity(cfg.n_traj * cfg.horizon * d);
    let mut seq = vec![0.0; len * d];
    let mut rhs = vec![0.0; d];
    for _ in 0..cfg.n_traj {
        for t in 0..len {
            if t < p {
                for v in &mut seq[t * d..(t + 1) * d] {
                    *v = init.sample(&mut rng);
                }
                continue;
            }
            for r in rhs.iter_mut() {
                *r = noise.sample(&mut rng);
            }
            for l in 0..p {
                let lagged = &seq[(t - l - 1) * d..(t - l) * d];
                for (j, &xj) in lagged.iter().enumerate() {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r += xj * params.inter(l, j, i);
                    }
                }
            }
            let x_t = &mut seq[t * d..(t + 1) * d];
            for &i in &order {
                let mut v = rhs[i];
                for (j, &xj) in x_t.iter().enumerate() {
                    if mask.intra(j, i) {
                        v += xj * params.intra(j, i);
                    }
                }
                x_t[i] = v;
            }
        }
        values.extend_from_slice(&seq[cfg.warmup * d..]);
    }
    TrajectoryDataset::new(values, cfg.n_traj, cfg.horizon, d, p)
}

/// JSON form of a structure and its weights. Node indices are 0-based;
/// `e_w[j]` lists the children of `j` within a slice and `e_a[l][j]` the
/// children of `j` at lag `l + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub dim: usize,
    pub lag_order: usize,
    pub e_w: Vec<Vec<usize>>,
    pub e_a: Vec<Vec<Vec<usize>>>,
    pub w: Vec<Vec<f64>>,
    pub a: Vec<Vec<Vec<f64>>>,
}

impl ModelDocument {
    pub fn from_model(mask: &StructureMask, params: &ParamSet) -> Self {
        let (d, p) = (mask.dim(), mask.lags());
        let e_w = (0..d).map(|j| (0..d).filter(|&i| mask.intra(j, i)).collect()).collect();
        let e_a = (0..p)
            .map(|l| (0..d).map(|j| (0..d).filter(|&i| mask.inter(l, j, i)).collect()).collect())
            .collect();
        Self {
            dim: d,
            lag_order: p,
            e_w,
            e_a,
            w: params.intra_rows(),
            a: params.inter_tensor(),
        }
    }

    /// Validates shapes, acyclicity and that the weights vanish off the mask.
    pub fn to_model(&self) -> Result<(StructureMask, ParamSet)> {
        let (d, p) = (self.dim, self.lag_order);
        let shape_err = |what: &str| Error::Dimension(format!("{what} does not match dim={d}, lag_order={p}"));
        if self.e_w.len() != d || self.e_a.len() != p || self.e_a.iter().any(|m| m.len() != d) {
            return Err(shape_err("edge list"));
        }
        if self.w.len() != d || self.w.iter().any(|r| r.len() != d) {
            return Err(shape_err("w"));
        }
        if self.a.len() != p || self.a.iter().any(|m| m.len() != d || m.iter().any(|r| r.len() != d)) {
            return Err(shape_err("a"));
        }
        let mut intra = Vec::new();
        for (j, children) in self.e_w.iter().enumerate() {
            for &i in children {
                if i >= d || i == j {
                    return Err(Error::Structural(format!("invalid intra-slice edge {j} -> {i}")));
                }
                intra.push((j, i));
            }
        }
        let mut inter = Vec::new();
        for (l, per_lag) in self.e_a.iter().enumerate() {
            for (j, children) in per_lag.iter().enumerate() {
                for &i in children {
                    if i >= d {
                        return Err(Error::Structural(format!("invalid lag-{} edge {j} -> {i}", l + 1)));
                    }
                    inter.push((l, j, i));
                }
            }
        }
        let mask = StructureMask::from_edges(d, p, &intra, &inter)?;
        let w = self.w.concat();
        let a: Vec<f64> = self.a.iter().flat_map(|m| m.concat()).collect();
        let params = ParamSet::from_flat(d, p, w, a)?;
        if !params.is_supported_on(&mask) {
            return Err(Error::SupportViolation("nonzero weight outside the listed edges".into()));
        }
        Ok((mask, params))
    }
}
