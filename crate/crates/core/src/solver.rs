//! Exact L0-penalized, DAG-constrained least-squares structure search.
//!
//! The objective `loss + lambda_w |E_W| + lambda_a |E_A|` separates by target
//! column once the intra-slice graph is fixed; acyclicity of `E_W` is the only
//! coupling. The branch-and-bound therefore bounds each node by the exact
//! per-column best subset (acyclicity relaxed) and branches on intra-slice
//! edges that close cycles in that relaxation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data_io::{subsample, SubsampleSpec};
use crate::error::{Error, Result};
use crate::gram::LaggedGram;
use crate::lsem::{loss, ModelDocument, ParamSet, StructureMask, TrajectoryDataset};

/// Columns with more undecided candidates than this use the cheaper
/// all-undecided relaxation instead of exact subset enumeration.
const EXACT_COLUMN_LIMIT: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpConfig {
    pub lambda_w: f64,
    pub lambda_a: f64,
    /// Structures that may not be returned (no-good cuts).
    #[serde(skip)]
    pub exclusions: Vec<StructureMask>,
    /// Wall-clock limit in seconds; 0 disables it.
    pub time_limit: f64,
}

impl IpConfig {
    pub fn new(lambda_w: f64, lambda_a: f64) -> Result<Self> {
        if !(lambda_w >= 0.0 && lambda_a >= 0.0) || !lambda_w.is_finite() || !lambda_a.is_finite() {
            return Err(Error::Validation(format!(
                "penalties must be finite and >= 0 (lambda_w={lambda_w}, lambda_a={lambda_a})"
            )));
        }
        Ok(Self {
            lambda_w,
            lambda_a,
            exclusions: Vec::new(),
            time_limit: 0.0,
        })
    }

    pub fn with_exclusions(mut self, exclusions: Vec<StructureMask>) -> Self {
        self.exclusions = exclusions;
        self
    }

    pub fn with_time_limit(mut self, seconds: f64) -> Self {
        self.time_limit = seconds;
        self
    }

    fn penalty(&self, mask: &StructureMask) -> f64 {
        self.lambda_w * mask.intra_count() as f64 + self.lambda_a * mask.inter_count() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpSolution {
    pub mask: StructureMask,
    pub params: ParamSet,
    /// Loss plus penalties, recomputed from the data.
    pub objective: f64,
    pub proven_optimal: bool,
}

/// JSON form of an [`IpSolution`]. Indices are 0-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IpSolutionDocument {
    #[serde(flatten)]
    pub model: ModelDocument,
    pub objective: f64,
    pub proven_optimal: bool,
}

impl IpSolution {
    pub fn to_document(&self) -> IpSolutionDocument {
        IpSolutionDocument {
            model: ModelDocument::from_model(&self.mask, &self.params),
            objective: self.objective,
            proven_optimal: self.proven_optimal,
        }
    }

    pub fn from_document(doc: &IpSolutionDocument) -> Result<Self> {
        let (mask, params) = doc.model.to_model()?;
        Ok(Self {
            mask,
            params,
            objective: doc.objective,
            proven_optimal: doc.proven_optimal,
        })
    }
}

/// Candidate regressors of one target column: contemporaneous `j != i`
/// first, then lag `l`, source `j`.
#[derive(Debug, Clone)]
struct Column {
    target: usize,
    regressors: Vec<usize>,
    /// Bits of contemporaneous (intra-slice) candidates.
    intra_bits: u64,
    all_bits: u64,
}

impl Column {
    fn build(gram: &LaggedGram, target: usize) -> Self {
        let (d, p) = (gram.dim(), gram.lags());
        let mut regressors: Vec<usize> = (0..d).filter(|&j| j != target).map(|j| gram.index(0, j)).collect();
        let intra_bits = (1u64 << regressors.len()) - 1;
        for l in 0..p {
            regressors.extend((0..d).map(|j| gram.index(l + 1, j)));
        }
        let all_bits = if regressors.len() == 64 { u64::MAX } else { (1u64 << regressors.len()) - 1 };
        Self {
            target,
            regressors,
            intra_bits,
            all_bits,
        }
    }

    fn selected(&self, bits: u64) -> Vec<usize> {
        (0..self.regressors.len())
            .filter(|&k| bits >> k & 1 == 1)
            .map(|k| self.regressors[k])
            .collect()
    }

    /// Source node of intra candidate `k`.
    fn intra_source(&self, k: usize) -> usize {
        if k < self.target {
            k
        } else {
            k + 1
        }
    }

    /// Candidate bit for the intra edge `j -> target`.
    fn intra_bit(&self, j: usize) -> usize {
        if j < self.target {
            j
        } else {
            j - 1
        }
    }
}

fn column_layout(gram: &LaggedGram) -> Result<Vec<Column>> {
    if gram.size() > 64 {
        return Err(Error::Validation(format!(
            "d (p + 1) = {} exceeds the 64 candidate regressors per column supported",
            gram.size()
        )));
    }
    Ok((0..gram.dim()).map(|i| Column::build(gram, i)).collect())
}

fn mask_from_bits(gram: &LaggedGram, columns: &[Column], bits: &[u64]) -> Result<StructureMask> {
    let (d, p) = (gram.dim(), gram.lags());
    let mut e_w = vec![false; d * d];
    let mut e_a = vec![false; p * d * d];
    for (col, &b) in columns.iter().zip(bits) {
        let i = col.target;
        for k in 0..col.regressors.len() {
            if b >> k & 1 == 0 {
                continue;
            }
            let r = col.regressors[k];
            let (block, j) = (r / d, r % d);
            if block == 0 {
                e_w[j * d + i] = true;
            } else {
                e_a[((block - 1) * d + j) * d + i] = true;
            }
        }
    }
    StructureMask::from_flat(d, p, e_w, e_a)
}

fn params_from_fit(gram: &LaggedGram, columns: &[Column], mask: &StructureMask) -> ParamSet {
    let d = gram.dim();
    let mut params = ParamSet::zeros(d, gram.lags());
    for col in columns {
        let i = col.target;
        let regs: Vec<usize> = col
            .regressors
            .iter()
            .copied()
            .filter(|&r| {
                let (block, j) = (r / d, r % d);
                if block == 0 {
                    mask.intra(j, i)
                } else {
                    mask.inter(block - 1, j, i)
                }
            })
            .collect();
        let coef = gram.solve(i, &regs);
        for (&r, c) in regs.iter().zip(coef) {
            let (block, j) = (r / d, r % d);
            if block == 0 {
                params.set_intra(j, i, c);
            } else {
                params.set_inter(block - 1, j, i, c);
            }
        }
    }
    params
}

fn check_mask_dims(data: &TrajectoryDataset, mask: &StructureMask) -> Result<()> {
    if mask.dim() != data.dim() || mask.lags() != data.lag_order() {
        return Err(Error::Dimension(format!(
            "mask (d={}, p={}) vs data (d={}, p={})",
            mask.dim(),
            mask.lags(),
            data.dim(),
            data.lag_order()
        )));
    }
    Ok(())
}

/// Least-squares weights for a fixed structure, one regression per target
/// column over its allowed regressors, and the resulting loss.
pub fn fit_weights_given_support(data: &TrajectoryDataset, mask: &StructureMask) -> Result<(ParamSet, f64)> {
    check_mask_dims(data, mask)?;
    let gram = LaggedGram::new(data);
    let columns = column_layout(&gram)?;
    let params = params_from_fit(&gram, &columns, mask);
    let value = loss(data, &params)?;
    Ok((params, value))
}

/// Penalty `sigma_hat^2 ln(N_eff)` with `sigma_hat^2` from the saturated fit
/// (every column on every other regressor), floored at a tiny fraction of the
/// mean square of the data.
pub fn default_penalty(data: &TrajectoryDataset) -> f64 {
    let gram = LaggedGram::new(data);
    let d = gram.dim();
    let rows = gram.rows();
    let mut rss = 0.0;
    let mut n_coef = 0usize;
    for i in 0..d {
        let regs: Vec<usize> = (0..gram.size()).filter(|&r| r != i).collect();
        n_coef += regs.len();
        rss += gram.fit_column(i, &regs).1;
    }
    let n_obs = rows * d;
    let sigma2 = if n_obs > n_coef {
        rss / (n_obs - n_coef) as f64
    } else {
        rss / n_obs.max(1) as f64
    };
    let energy = (0..d).map(|i| gram.get(i, i)).sum::<f64>() / n_obs.max(1) as f64;
    let floor = 1e-10 * energy.max(f64::MIN_POSITIVE);
    sigma2.max(floor) * (rows.max(2) as f64).ln()
}

struct Scorer<'a> {
    gram: &'a LaggedGram,
    columns: &'a [Column],
    lambda_w: f64,
    lambda_a: f64,
    rss_cache: Vec<HashMap<u64, f64>>,
    bound_cache: HashMap<(usize, u64, u64), ColumnBound>,
}

#[derive(Debug, Clone, Copy)]
struct ColumnBound {
    value: f64,
    argmin: u64,
    exact: bool,
}

impl<'a> Scorer<'a> {
    fn new(gram: &'a LaggedGram, columns: &'a [Column], cfg: &IpConfig) -> Self {
        Self {
            gram,
            columns,
            lambda_w: cfg.lambda_w,
            lambda_a: cfg.lambda_a,
            rss_cache: vec![HashMap::new(); columns.len()],
            bound_cache: HashMap::new(),
        }
    }

    fn rss(&mut self, i: usize, bits: u64) -> f64 {
        if let Some(&v) = self.rss_cache[i].get(&bits) {
            return v;
        }
        let col = &self.columns[i];
        let v = self.gram.fit_column(col.target, &col.selected(bits)).1;
        self.rss_cache[i].insert(bits, v);
        v
    }

    fn penalty(&self, i: usize, bits: u64) -> f64 {
        let intra = (bits & self.columns[i].intra_bits).count_ones();
        let inter = (bits & !self.columns[i].intra_bits).count_ones();
        self.lambda_w * intra as f64 + self.lambda_a * inter as f64
    }

    fn score(&mut self, i: usize, bits: u64) -> f64 {
        self.rss(i, bits) + self.penalty(i, bits)
    }

    /// Minimum of the column score over `included <= S <= included | undecided`.
    fn column_bound(&mut self, i: usize, included: u64, excluded: u64) -> ColumnBound {
        if let Some(&b) = self.bound_cache.get(&(i, included, excluded)) {
            return b;
        }
        let undecided = self.columns[i].all_bits & !included & !excluded;
        let bound = if undecided.count_ones() <= EXACT_COLUMN_LIMIT {
            let mut best = ColumnBound {
                value: f64::INFINITY,
                argmin: included,
                exact: true,
            };
            let mut sub = undecided;
            loop {
                let bits = included | sub;
                let v = self.score(i, bits);
                if v < best.value || (v == best.value && bits < best.argmin) {
                    best.value = v;
                    best.argmin = bits;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & undecided;
            }
            best
        } else {
            let all = included | undecided;
            ColumnBound {
                value: self.rss(i, all) + self.penalty(i, included),
                argmin: all,
                exact: false,
            }
        };
        self.bound_cache.insert((i, included, excluded), bound);
        bound
    }

    fn coefficients(&self, i: usize, bits: u64) -> Vec<(usize, f64)> {
        let col = &self.columns[i];
        let ks: Vec<usize> = (0..col.regressors.len()).filter(|&k| bits >> k & 1 == 1).collect();
        let coef = self.gram.solve(col.target, &col.selected(bits));
        ks.into_iter().zip(coef).collect()
    }
}

#[derive(Debug, Clone)]
struct Node {
    included: Vec<u64>,
    excluded: Vec<u64>,
}

/// Adjacency `j -> i` of the intra-slice edges selected by per-column bits.
fn intra_adjacency(columns: &[Column], bits: &[u64], d: usize) -> Vec<bool> {
    let mut adj = vec![false; d * d];
    for (col, &b) in columns.iter().zip(bits) {
        let mut w = b & col.intra_bits;
        while w != 0 {
            let k = w.trailing_zeros() as usize;
            adj[col.intra_source(k) * d + col.target] = true;
            w &= w - 1;
        }
    }
    adj
}

fn reaches(adj: &[bool], d: usize, from: usize, to: usize) -> bool {
    let mut seen = vec![false; d];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend((0..d).filter(|&u| adj[v * d + u] && !seen[u]));
    }
    false
}

/// Edges `(j, i)` of some directed cycle, if one exists.
fn find_cycle(adj: &[bool], d: usize) -> Option<Vec<(usize, usize)>> {
    // 0 = unvisited, 1 = on stack, 2 = finished
    fn visit(v: usize, adj: &[bool], d: usize, state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<(usize, usize)>> {
        state[v] = 1;
        path.push(v);
        for u in 0..d {
            if !adj[v * d + u] {
                continue;
            }
            if state[u] == 1 {
                let start = path.iter().position(|&x| x == u).expect("u is on the path");
                let mut cycle: Vec<(usize, usize)> = path[start..].windows(2).map(|w| (w[0], w[1])).collect();
                cycle.push((v, u));
                return Some(cycle);
            }
            if state[u] == 0 {
                if let Some(c) = visit(u, adj, d, state, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        state[v] = 2;
        None
    }
    let mut state = vec![0u8; d];
    let mut path = Vec::new();
    (0..d).find_map(|v| if state[v] == 0 { visit(v, adj, d, &mut state, &mut path) } else { None })
}

/// Global minimizer of `loss + lambda_w |E_W| + lambda_a |E_A|` over acyclic
/// `E_W`, any `E_A`, excluding `cfg.exclusions`.
pub fn solve_ip(data: &TrajectoryDataset, cfg: &IpConfig) -> Result<IpSolution> {
    for m in &cfg.exclusions {
        check_mask_dims(data, m)?;
    }
    let gram = LaggedGram::new(data);
    let columns = column_layout(&gram)?;
    let d = gram.dim();
    let excluded_masks: HashSet<&StructureMask> = cfg.exclusions.iter().collect();
    let mut scorer = Scorer::new(&gram, &columns, cfg);
    let start = Instant::now();
    let mut timed_out = false;

    let mut best: Option<(f64, StructureMask)> = None;
    let mut stack = vec![Node {
        included: vec![0; d],
        excluded: vec![0; d],
    }];
    while let Some(node) = stack.pop() {
        if cfg.time_limit > 0.0 && start.elapsed().as_secs_f64() > cfg.time_limit {
            timed_out = true;
            break;
        }
        let bounds: Vec<ColumnBound> = (0..d)
            .map(|i| scorer.column_bound(i, node.included[i], node.excluded[i]))
            .collect();
        let total: f64 = bounds.iter().map(|b| b.value).sum();
        if matches!(&best, Some((v, _)) if total > *v) {
            continue;
        }
        let relaxed: Vec<u64> = bounds.iter().map(|b| b.argmin).collect();
        let adj = intra_adjacency(&columns, &relaxed, d);

        // (column, candidate bit) to branch on
        let branch = match find_cycle(&adj, d) {
            Some(cycle) => cycle
                .iter()
                .filter_map(|&(j, i)| {
                    let k = columns[i].intra_bit(j);
                    let undecided = (node.included[i] | node.excluded[i]) >> k & 1 == 0;
                    undecided.then_some((i, k))
                })
                .map(|(i, k)| {
                    let c = scorer
                        .coefficients(i, relaxed[i])
                        .into_iter()
                        .find(|&(kk, _)| kk == k)
                        .map_or(0.0, |(_, c)| c.abs());
                    (i, k, c)
                })
                .fold(None, pick_largest)
                .map(|(i, k, _)| (i, k)),
            None => {
                let mask = mask_from_bits(&gram, &columns, &relaxed)?;
                let feasible = !excluded_masks.contains(&mask);
                if feasible {
                    let value: f64 = (0..d).map(|i| scorer.score(i, relaxed[i])).sum();
                    let better = match &best {
                        None => true,
                        Some((v, m)) => value < *v || (value == *v && mask < *m),
                    };
                    if better {
                        best = Some((value, mask));
                    }
                    if bounds.iter().all(|b| b.exact) {
                        continue;
                    }
                }
                let in_support = (0..d)
                    .flat_map(|i| {
                        let undecided = columns[i].all_bits & !node.included[i] & !node.excluded[i];
                        scorer
                            .coefficients(i, relaxed[i])
                            .into_iter()
                            .filter(move |&(k, _)| undecided >> k & 1 == 1)
                            .map(move |(k, c)| (i, k, c.abs()))
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .fold(None, pick_largest)
                    .map(|(i, k, _)| (i, k));
                in_support.or_else(|| {
                    (0..d).find_map(|i| {
                        let undecided = columns[i].all_bits & !node.included[i] & !node.excluded[i];
                        (undecided != 0).then(|| (i, undecided.trailing_zeros() as usize))
                    })
                })
            }
        };
        let Some((i, k)) = branch else { continue };

        let mut exclude = node.clone();
        exclude.excluded[i] |= 1 << k;
        stack.push(exclude);
        if let Some(include) = include_child(&node, &columns, d, i, k) {
            stack.push(include);
        }
    }

    let Some((_, mask)) = best else {
        return Err(Error::NoSolution(if timed_out {
            "time limit reached before any feasible structure was found".into()
        } else {
            "every structure is excluded".into()
        }));
    };
    let params = params_from_fit(&gram, &columns, &mask);
    let objective = loss(data, &params)? + cfg.penalty(&mask);
    Ok(IpSolution {
        mask,
        params,
        objective,
        proven_optimal: !timed_out,
    })
}

fn pick_largest(acc: Option<(usize, usize, f64)>, x: (usize, usize, f64)) -> Option<(usize, usize, f64)> {
    match acc {
        Some(a) if a.2 >= x.2 => Some(a),
        _ => Some(x),
    }
}

/// Include-branch child, or `None` when the edge would close a cycle among
/// the included intra-slice edges. Undecided intra edges that would close a
/// cycle afterwards are excluded.
fn include_child(node: &Node, columns: &[Column], d: usize, i: usize, k: usize) -> Option<Node> {
    let mut child = node.clone();
    child.included[i] |= 1 << k;
    if k >= columns[i].regressors.len() || (1u64 << k) & columns[i].intra_bits == 0 {
        return Some(child);
    }
    let j = columns[i].intra_source(k);
    let adj = intra_adjacency(columns, &node.included, d);
    if reaches(&adj, d, i, j) {
        return None;
    }
    let adj = intra_adjacency(columns, &child.included, d);
    for (col_idx, col) in columns.iter().enumerate() {
        let mut undecided = col.intra_bits & !child.included[col_idx] & !child.excluded[col_idx];
        while undecided != 0 {
            let kk = undecided.trailing_zeros() as usize;
            undecided &= undecided - 1;
            let src = col.intra_source(kk);
            if reaches(&adj, d, col.target, src) {
                child.excluded[col_idx] |= 1 << kk;
            }
        }
    }
    Some(child)
}

/// Lexicographic comparison of two column-local inter-slice bit sets in the
/// flattened mask order (lower bit = earlier position).
fn lex_cmp_bits(a: u64, b: u64) -> Ordering {
    let diff = a ^ b;
    if diff == 0 {
        return Ordering::Equal;
    }
    if a >> diff.trailing_zeros() & 1 == 0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Residual sum of squares of column `i` computed row by row from the data.
fn direct_column_rss(data: &TrajectoryDataset, i: usize, regs: &[(usize, usize)], coef: &[f64]) -> f64 {
    let mut rss = 0.0;
    for n in 0..data.n_traj() {
        for t in data.lag_order()..data.horizon() {
            let mut r = data.get(n, t, i);
            for (&(lag, j), &c) in regs.iter().zip(coef) {
                r -= c * data.get(n, t - lag, j);
            }
            rss += r * r;
        }
    }
    rss
}

#[derive(Debug, PartialEq)]
struct HeapItem {
    value: f64,
    picks: Vec<usize>,
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // Min-heap on value, then on the pick vector.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then_with(|| other.picks.cmp(&self.picks))
    }
}

/// Exhaustive reference solver for small instances (`d <= 4`, `p <= 2`).
///
/// Every acyclic intra-slice graph is enumerated. For a fixed graph the
/// objective is a sum over target columns, so the inter-slice choice is the
/// exact per-column minimum over all lag subsets; excluded masks are skipped
/// by walking the combined per-column rankings best-first.
pub fn enumerate_oracle(data: &TrajectoryDataset, cfg: &IpConfig) -> Result<IpSolution> {
    let (d, p) = (data.dim(), data.lag_order());
    if d > 4 || p > 2 {
        return Err(Error::OracleGuard(format!(
            "exhaustive enumeration needs d <= 4 and p <= 2 (got d={d}, p={p})"
        )));
    }
    for m in &cfg.exclusions {
        check_mask_dims(data, m)?;
    }
    let excluded: HashSet<&StructureMask> = cfg.exclusions.iter().collect();
    let gram = LaggedGram::new(data);
    let n_lag = d * p;

    // ranked[i][parents] = (value, lag bits) sorted ascending; value includes
    // the column's intra and inter penalties.
    let mut ranked: Vec<Vec<Vec<(f64, u64)>>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut per_parents = Vec::with_capacity(1 << d);
        for parents in 0u64..(1 << d) {
            if parents >> i & 1 == 1 {
                per_parents.push(Vec::new());
                continue;
            }
            let mut options: Vec<(f64, u64)> = (0u64..(1 << n_lag))
                .map(|lag_bits| {
                    let mut regs: Vec<(usize, usize)> = (0..d).filter(|&j| parents >> j & 1 == 1).map(|j| (0, j)).collect();
                    regs.extend((0..n_lag).filter(|&b| lag_bits >> b & 1 == 1).map(|b| (b / d + 1, b % d)));
                    let gram_regs: Vec<usize> = regs.iter().map(|&(lag, j)| gram.index(lag, j)).collect();
                    let coef = gram.solve(i, &gram_regs);
                    let rss = direct_column_rss(data, i, &regs, &coef);
                    let value = rss
                        + cfg.lambda_w * parents.count_ones() as f64
                        + cfg.lambda_a * lag_bits.count_ones() as f64;
                    (value, lag_bits)
                })
                .collect();
            options.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp_bits(a.1, b.1)));
            per_parents.push(options);
        }
        ranked.push(per_parents);
    }

    let off_diagonal: Vec<(usize, usize)> = (0..d).flat_map(|j| (0..d).filter(move |&i| i != j).map(move |i| (j, i))).collect();
    let mut best: Option<(f64, StructureMask)> = None;
    for pattern in 0u64..(1 << off_diagonal.len()) {
        let mut e_w = vec![false; d * d];
        for (b, &(j, i)) in off_diagonal.iter().enumerate() {
            e_w[j * d + i] = pattern >> b & 1 == 1;
        }
        if !crate::lsem::is_acyclic(&e_w, d) {
            continue;
        }
        let parents: Vec<u64> = (0..d)
            .map(|i| (0..d).filter(|&j| e_w[j * d + i]).fold(0u64, |acc, j| acc | 1 << j))
            .collect();
        let lists: Vec<&Vec<(f64, u64)>> = (0..d).map(|i| &ranked[i][parents[i] as usize]).collect();
        let assemble = |picks: &[usize]| -> Result<(f64, StructureMask)> {
            let mut e_a = vec![false; p * d * d];
            let mut value = 0.0;
            for (i, &k) in picks.iter().enumerate() {
                let (v, lag_bits) = lists[i][k];
                value += v;
                for b in 0..n_lag {
                    if lag_bits >> b & 1 == 1 {
                        e_a[((b / d) * d + b % d) * d + i] = true;
                    }
                }
            }
            Ok((value, StructureMask::from_flat(d, p, e_w.clone(), e_a)?))
        };

        let mut heap = BinaryHeap::new();
        let mut seen = HashSet::new();
        let first = vec![0usize; d];
        heap.push(HeapItem {
            value: assemble(&first)?.0,
            picks: first.clone(),
        });
        seen.insert(first);
        while let Some(item) = heap.pop() {
            let (value, mask) = assemble(&item.picks)?;
            if !excluded.contains(&mask) {
                let better = match &best {
                    None => true,
                    Some((v, m)) => value < *v || (value == *v && mask < *m),
                };
                if better {
                    best = Some((value, mask));
                }
                break;
            }
            for i in 0..d {
                if item.picks[i] + 1 < lists[i].len() {
                    let mut next = item.picks.clone();
                    next[i] += 1;
                    if seen.insert(next.clone()) {
                        heap.push(HeapItem {
                            value: assemble(&next)?.0,
                            picks: next,
                        });
                    }
                }
            }
        }
    }

    let (_, mask) = best.ok_or_else(|| Error::NoSolution("every structure is excluded".into()))?;
    let (params, value) = fit_weights_given_support(data, &mask)?;
    Ok(IpSolution {
        objective: value + cfg.penalty(&mask),
        mask,
        params,
        proven_optimal: true,
    })
}

/// `M` structure estimates on independent subsamples. Solution `m` is fitted
/// on the subsample drawn with seed `template.seed + m` and may not repeat
/// any earlier structure.
pub fn initial_solutions(
    data: &TrajectoryDataset,
    n_models: usize,
    template: &SubsampleSpec,
    cfg: &IpConfig,
) -> Result<Vec<IpSolution>> {
    if n_models == 0 {
        return Err(Error::Validation("need at least one model".into()));
    }
    let mut solutions: Vec<IpSolution> = Vec::with_capacity(n_models);
    for m in 1..=n_models {
        let spec = SubsampleSpec {
            subsample_size: template.subsample_size,
            seed: template.seed.wrapping_add(m as u64),
        };
        let sub = subsample(data, &spec).map_err(|e| e.at_stage(m, "subsample"))?;
        let mut exclusions = cfg.exclusions.clone();
        exclusions.extend(solutions.iter().map(|s| s.mask.clone()));
        let cfg_m = cfg.clone().with_exclusions(exclusions);
        let sol = solve_ip(&sub, &cfg_m).map_err(|e| e.at_stage(m, "structure"))?;
        solutions.push(sol);
    }
    Ok(solutions)
}
