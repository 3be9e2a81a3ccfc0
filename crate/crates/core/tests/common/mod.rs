//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use ebdbn::{ParamSet, StructureMask, TrajectoryDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Loss by literal summation over trajectories, counted steps and columns.
pub fn naive_loss(data: &TrajectoryDataset, params: &ParamSet) -> f64 {
    let (d, p) = (data.dim(), data.lag_order());
    let mut total = 0.0;
    for n in 0..data.n_traj() {
        for t in p..data.horizon() {
            for i in 0..d {
                let mut r = data.get(n, t, i);
                for j in 0..d {
                    r -= params.intra(j, i) * data.get(n, t, j);
                }
                for l in 0..p {
                    for j in 0..d {
                        r -= params.inter(l, j, i) * data.get(n, t - l - 1, j);
                    }
                }
                total += r * r;
            }
        }
    }
    total
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, t: usize, d: usize, p: usize) -> TrajectoryDataset {
    let values = (0..n * t * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    TrajectoryDataset::new(values, n, t, d, p).unwrap()
}

/// Random mask: each allowed edge with probability `prob`, intra edges only
/// forward along a random permutation.
pub fn random_mask(rng: &mut ChaCha8Rng, d: usize, p: usize, prob: f64) -> StructureMask {
    let mut order: Vec<usize> = (0..d).collect();
    for k in (1..d).rev() {
        order.swap(k, rng.random_range(0..=k));
    }
    let mut intra = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            if rng.random::<f64>() < prob {
                intra.push((order[a], order[b]));
            }
        }
    }
    let mut inter = Vec::new();
    for l in 0..p {
        for j in 0..d {
            for i in 0..d {
                if rng.random::<f64>() < prob {
                    inter.push((l, j, i));
                }
            }
        }
    }
    StructureMask::from_edges(d, p, &intra, &inter).unwrap()
}

/// Random weights on a mask, magnitudes in `[lo, hi]` with random signs.
pub fn random_params(rng: &mut ChaCha8Rng, mask: &StructureMask, lo: f64, hi: f64) -> ParamSet {
    let (d, p) = (mask.dim(), mask.lags());
    let mut params = ParamSet::zeros(d, p);
    let draw = |rng: &mut ChaCha8Rng| {
        let v = rng.random_range(lo..=hi);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    };
    for (j, i) in mask.intra_edges() {
        params.set_intra(j, i, draw(rng));
    }
    for (l, j, i) in mask.inter_edges() {
        params.set_inter(l, j, i, draw(rng));
    }
    params
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least-squares coefficients of each column on its allowed regressors,
/// built from explicit design rows.
pub fn normal_equations_fit(data: &TrajectoryDataset, mask: &StructureMask) -> ParamSet {
    let (d, p) = (data.dim(), data.lag_order());
    let mut params = ParamSet::zeros(d, p);
    for i in 0..d {
        // (lag, j): lag 0 is contemporaneous
        let mut regs: Vec<(usize, usize)> = (0..d).filter(|&j| mask.intra(j, i)).map(|j| (0, j)).collect();
        for l in 0..p {
            regs.extend((0..d).filter(|&j| mask.inter(l, j, i)).map(|j| (l + 1, j)));
        }
        if regs.is_empty() {
            continue;
        }
        let k = regs.len();
        let mut xtx = vec![vec![0.0; k]; k];
        let mut xty = vec![0.0; k];
        for n in 0..data.n_traj() {
            for t in p..data.horizon() {
                let row: Vec<f64> = regs.iter().map(|&(lag, j)| data.get(n, t - lag, j)).collect();
                let y = data.get(n, t, i);
                for a in 0..k {
                    xty[a] += row[a] * y;
                    for b in 0..k {
                        xtx[a][b] += row[a] * row[b];
                    }
                }
            }
        }
        let coef = gauss_solve(xtx, xty);
        for (&(lag, j), c) in regs.iter().zip(coef) {
            if lag == 0 {
                params.set_intra(j, i, c);
            } else {
                params.set_inter(lag - 1, j, i, c);
            }
        }
    }
    params
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let x = a + h * k as f64;
        s += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// Monte Carlo standard error of the mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Percentile of unsorted data by sorting and linear interpolation at
/// position `q (n - 1)`.
pub fn sort_percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
