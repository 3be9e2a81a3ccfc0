//! End-to-end fitting run: split, structure search on subsamples, one dual
//! solve and posterior chain per structure, mixture weights, validation draws
//! and the artifacts describing all of it.
//!
//! Output layout under `out_dir` (models numbered from 1):
//!
//! ```text
//! structures/model_{m}.json   structure, weights, objective
//! chains/model_{m}.csv        posterior samples, one column per free weight
//! chains/model_{m}.json       chain diagnostics
//! dual/model_{m}.json         dual solution
//! weights.json                mixture weights, mean losses, Bayes factors
//! eval_losses.csv             validation losses of draws and point estimates
//! histogram.csv               histogram of the draw losses
//! report.json                 configuration and summaries
//! ```

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{load_dataset, save_dataset, train_val_split, SubsampleSpec};
use crate::dual::{solve_dual, DualConfig, DualSolution};
use crate::error::{Error, Result};
use crate::gram::SupportedLoss;
use crate::lsem::{
    build_support_map, extract_params, is_dag, simulate, ModelDocument, ParamSet, SimulationConfig, StructureMask,
    SupportMap, TrajectoryDataset,
};
use crate::mixture::{
    bayes_factor, histogram, model_weights, point_estimate_losses, sample_evaluation, summarize, EvalDraw, Histogram,
    LossSummary,
};
use crate::sampler::{run_mala, GibbsPosterior, LossSign, PosteriorChain, SamplerConfig};
use crate::solver::{default_penalty, fit_weights_given_support, initial_solutions, IpConfig, IpSolution};

const SPLIT_STREAM: u64 = 1 << 40;
const SUBSAMPLE_STREAM: u64 = 2 << 40;
const EVAL_STREAM: u64 = 3 << 40;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` derived from the run seed:
/// `splitmix64(base ^ splitmix64(stream))`. Model `m` uses stream `m`; the
/// split, subsample and evaluation streams use `2^40`, `2^41` and `3 * 2^40`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_path: PathBuf,
    pub lag_order: usize,
    pub models: usize,
    /// Trajectories per subsample; defaults to `ceil(0.7 N_train)`.
    pub subsample_size: Option<usize>,
    /// Defaults to the data-driven penalty of [`default_penalty`].
    pub lambda_w: Option<f64>,
    pub lambda_a: Option<f64>,
    pub beta: f64,
    pub epsilon: f64,
    /// Defaults to `max(1e-3 |E|, 1e-12)`.
    pub lambda_min: Option<f64>,
    pub step_size: f64,
    pub target_accept: f64,
    pub burn_in: usize,
    pub n_samples: usize,
    pub eval_draws: usize,
    pub val_fraction: f64,
    pub temperature: f64,
    pub loss_sign: LossSign,
    pub parzen_bandwidth: Option<f64>,
    pub histogram_bins: usize,
    /// Seconds per structure search; 0 disables the limit.
    pub time_limit: f64,
    pub seed: u64,
    /// Worker threads for the per-model jobs; 0 uses every core.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::new(),
            lag_order: 1,
            models: 5,
            subsample_size: None,
            lambda_w: None,
            lambda_a: None,
            beta: -25.0,
            epsilon: 0.1,
            lambda_min: None,
            step_size: 1e-2,
            target_accept: 0.574,
            burn_in: 1000,
            n_samples: 1000,
            eval_draws: 2000,
            val_fraction: 0.3,
            temperature: 1.0,
            loss_sign: LossSign::Minus,
            parzen_bandwidth: None,
            histogram_bins: 30,
            time_limit: 0.0,
            seed: 0,
            threads: 0,
            out_dir: PathBuf::from("ebdbn-out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::artifact(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::artifact(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.models == 0 {
            return fail("models must be >= 1".into());
        }
        if self.subsample_size == Some(0) {
            return fail("subsample_size must be >= 1".into());
        }
        for (name, v) in [("lambda_w", self.lambda_w), ("lambda_a", self.lambda_a)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return fail(format!("{name} must be finite and >= 0, got {v}"));
                }
            }
        }
        if !(self.beta < 0.0) || !self.beta.is_finite() {
            return fail(format!("beta must be finite and < 0, got {}", self.beta));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return fail(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if let Some(l) = self.lambda_min {
            if !(l > 0.0) || !l.is_finite() {
                return fail(format!("lambda_min must be finite and > 0, got {l}"));
            }
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return fail(format!("step_size must be > 0, got {}", self.step_size));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return fail(format!("target_accept must lie in (0, 1), got {}", self.target_accept));
        }
        if self.n_samples == 0 || self.eval_draws == 0 {
            return fail("samples and eval_draws must be >= 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return fail(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return fail(format!("temperature must be > 0, got {}", self.temperature));
        }
        if let Some(h) = self.parzen_bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return fail(format!("parzen_bandwidth must be > 0, got {h}"));
            }
        }
        if self.histogram_bins == 0 {
            return fail("histogram_bins must be >= 1".into());
        }
        if !(self.time_limit >= 0.0) {
            return fail(format!("time_limit must be >= 0, got {}", self.time_limit));
        }
        Ok(())
    }

    /// The configuration as echoed in `report.json`: everything except the
    /// output directory and the thread count, which do not affect results.
    fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("out_dir");
            map.remove("threads");
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: usize,
    pub structure: String,
    pub chain: String,
    pub chain_diagnostics: String,
    pub dual: String,
    pub intra_edges: usize,
    pub inter_edges: usize,
    pub free_weights: usize,
    pub objective: f64,
    pub proven_optimal: bool,
    pub reference_loss: f64,
    pub weight: f64,
    pub mean_loss: f64,
    pub acceptance_rate: f64,
    pub point_estimate_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub n_train: usize,
    pub n_val: usize,
    pub subsample_size: usize,
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub models: Vec<ModelReport>,
    pub weights: String,
    pub eval_losses: String,
    pub histogram: String,
    /// Validation losses of the mixture draws.
    pub chain_samples: LossSummary,
    /// Validation losses of the structure-search point estimates.
    pub point_estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WeightsDocument {
    temperature: f64,
    weights: Vec<f64>,
    mean_losses: Vec<f64>,
    /// `bayes_factors[i][j] = w_i / w_j`; null where `w_j = 0`.
    bayes_factors: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainDiagnostics {
    labels: Vec<String>,
    burn_in: usize,
    n_samples: usize,
    acceptance_rate: f64,
    step_size: f64,
    mean_loss: f64,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DualDocument {
    reference_loss: f64,
    lambda_min: f64,
    #[serde(flatten)]
    solution: DualSolution,
}

struct ModelFit {
    map: SupportMap,
    reference_loss: f64,
    lambda_min: f64,
    dual: DualSolution,
    chain: PosteriorChain,
    mean_loss: f64,
    seed: u64,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::artifact(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::artifact(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_chain_csv(path: &Path, labels: &[String], chain: &PosteriorChain) -> Result<()> {
    let mut out = String::from("sample");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (q, s) in chain.samples.iter().enumerate() {
        out.push_str(&(q + 1).to_string());
        for v in s {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_text(path, &out)
}

fn fit_model(
    m: usize,
    solution: &IpSolution,
    train: &TrajectoryDataset,
    cfg: &PipelineConfig,
) -> Result<ModelFit> {
    let map = build_support_map(&solution.mask);
    let (_, reference_loss) = fit_weights_given_support(train, &solution.mask).map_err(|e| e.at_stage(m, "dual"))?;
    let dual_cfg = DualConfig::new(cfg.epsilon, cfg.beta, reference_loss).map_err(|e| e.at_stage(m, "dual"))?;
    let dual_cfg = match cfg.lambda_min {
        Some(l) => dual_cfg.with_lambda_min(l).map_err(|e| e.at_stage(m, "dual"))?,
        None => dual_cfg,
    };
    let dual = solve_dual(&dual_cfg, reference_loss, 1.0).map_err(|e| e.at_stage(m, "dual"))?;

    // With the minus sign the density decays like |theta|^(2 (beta - 1)); the
    // expected loss is finite only when 2 (1 - beta) > s + 2.
    let s = map.size() as f64;
    if cfg.loss_sign == LossSign::Minus && cfg.parzen_bandwidth.is_none() && 2.0 * (1.0 - cfg.beta) <= s + 2.0 {
        return Err(Error::Validation(format!(
            "posterior over {s} free weights has infinite mean loss for beta={}; use beta < {} or set a Parzen bandwidth",
            cfg.beta,
            -s / 2.0
        ))
        .at_stage(m, "sampler"));
    }

    let seed = derive_seed(cfg.seed, m as u64);
    let sampler = || -> Result<(PosteriorChain, f64)> {
        let theta0 = extract_params(&solution.params, &map)?;
        let mut posterior = GibbsPosterior::new(SupportedLoss::new(train, &map)?, &dual, cfg.loss_sign)?;
        if let Some(h) = cfg.parzen_bandwidth {
            posterior = posterior.with_parzen(theta0.clone(), h)?;
        }
        let sampler_cfg = SamplerConfig {
            step_size: cfg.step_size,
            burn_in: cfg.burn_in,
            n_samples: cfg.n_samples,
            target_accept: cfg.target_accept,
            seed,
            loss_sign: cfg.loss_sign,
            parzen_bandwidth: cfg.parzen_bandwidth,
        };
        let chain = run_mala(&posterior, &theta0, &sampler_cfg)?;
        let mean_loss = posterior.mean_loss(&chain);
        Ok((chain, mean_loss))
    };
    let (chain, mean_loss) = sampler().map_err(|e| e.at_stage(m, "sampler"))?;
    Ok(ModelFit {
        map,
        reference_loss,
        lambda_min: dual_cfg.lambda_min,
        dual,
        chain,
        mean_loss,
        seed,
    })
}

fn structure_path(m: usize) -> String {
    format!("structures/model_{m}.json")
}

/// Loads `cfg.data_path` and runs [`run_pipeline_on`].
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let data = load_dataset(&cfg.data_path, cfg.lag_order)?;
    run_pipeline_on(&data, cfg)
}

/// Runs the full fit on an in-memory dataset (its lag order is replaced by
/// `cfg.lag_order`) and writes every artifact under `cfg.out_dir`.
pub fn run_pipeline_on(data: &TrajectoryDataset, cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let data = data.with_lag_order(cfg.lag_order)?;
    let out = cfg.out_dir.as_path();
    let (train, val) = train_val_split(&data, cfg.val_fraction, derive_seed(cfg.seed, SPLIT_STREAM))?;

    let lambda_w = cfg.lambda_w.unwrap_or_else(|| default_penalty(&train));
    let lambda_a = cfg.lambda_a.unwrap_or_else(|| default_penalty(&train));
    let subsample_size = cfg
        .subsample_size
        .unwrap_or_else(|| (0.7 * train.n_traj() as f64).ceil() as usize)
        .max(1);
    if subsample_size > train.n_traj() {
        return Err(Error::Bounds(format!(
            "subsample size {subsample_size} exceeds the {} training trajectories",
            train.n_traj()
        )));
    }
    let ip_cfg = IpConfig::new(lambda_w, lambda_a)?.with_time_limit(cfg.time_limit);
    let template = SubsampleSpec {
        subsample_size,
        seed: derive_seed(cfg.seed, SUBSAMPLE_STREAM),
    };
    let solutions = initial_solutions(&train, cfg.models, &template, &ip_cfg)?;
    for (k, sol) in solutions.iter().enumerate() {
        write_json(&out.join(structure_path(k + 1)), &sol.to_document())?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Validation(format!("cannot build worker pool: {e}")))?;
    let fits: Vec<Result<ModelFit>> = pool.install(|| {
        solutions
            .par_iter()
            .enumerate()
            .map(|(k, sol)| fit_model(k + 1, sol, &train, cfg))
            .collect()
    });
    let mut first_error = None;
    for (k, fit) in fits.iter().enumerate() {
        let m = k + 1;
        match fit {
            Ok(fit) => {
                let labels = fit.map.labels();
                write_chain_csv(&out.join(format!("chains/model_{m}.csv")), &labels, &fit.chain)?;
                write_json(
                    &out.join(format!("chains/model_{m}.json")),
                    &ChainDiagnostics {
                        labels,
                        burn_in: cfg.burn_in,
                        n_samples: cfg.n_samples,
                        acceptance_rate: fit.chain.acceptance_rate,
                        step_size: fit.chain.step_size,
                        mean_loss: fit.mean_loss,
                        seed: fit.seed,
                    },
                )?;
                write_json(
                    &out.join(format!("dual/model_{m}.json")),
                    &DualDocument {
                        reference_loss: fit.reference_loss,
                        lambda_min: fit.lambda_min,
                        solution: fit.dual,
                    },
                )?;
            }
            Err(_) if first_error.is_none() => first_error = Some(k),
            Err(_) => {}
        }
    }
    let fits: Vec<ModelFit> = match first_error {
        Some(k) => {
            return Err(fits.into_iter().nth(k).and_then(|f| f.err()).expect("recorded failure"));
        }
        None => fits.into_iter().map(|f| f.expect("no failures")).collect(),
    };

    let mean_losses: Vec<f64> = fits.iter().map(|f| f.mean_loss).collect();
    let weights = model_weights(&mean_losses, cfg.temperature)?;
    let n = weights.len();
    let bayes_factors = (0..n)
        .map(|i| (0..n).map(|j| bayes_factor(&weights, i, j).ok()).collect())
        .collect();
    write_json(
        &out.join("weights.json"),
        &WeightsDocument {
            temperature: cfg.temperature,
            weights: weights.clone(),
            mean_losses: mean_losses.clone(),
            bayes_factors,
        },
    )?;

    let chains: Vec<PosteriorChain> = fits.iter().map(|f| f.chain.clone()).collect();
    let maps: Vec<SupportMap> = fits.iter().map(|f| f.map.clone()).collect();
    let draws = sample_evaluation(
        &weights,
        &chains,
        &maps,
        &val,
        cfg.eval_draws,
        derive_seed(cfg.seed, EVAL_STREAM),
    )?;
    let point_losses = point_estimate_losses(&solutions, &val)?;
    write_eval_losses(&out.join("eval_losses.csv"), &draws, &point_losses)?;

    let draw_losses: Vec<f64> = draws.iter().map(|d| d.loss).collect();
    let hist = histogram(&draw_losses, cfg.histogram_bins)?;
    write_histogram(&out.join("histogram.csv"), &hist)?;

    let models = solutions
        .iter()
        .zip(&fits)
        .enumerate()
        .map(|(k, (sol, fit))| {
            let m = k + 1;
            ModelReport {
                model: m,
                structure: structure_path(m),
                chain: format!("chains/model_{m}.csv"),
                chain_diagnostics: format!("chains/model_{m}.json"),
                dual: format!("dual/model_{m}.json"),
                intra_edges: sol.mask.intra_count(),
                inter_edges: sol.mask.inter_count(),
                free_weights: fit.map.size(),
                objective: sol.objective,
                proven_optimal: sol.proven_optimal,
                reference_loss: fit.reference_loss,
                weight: weights[k],
                mean_loss: fit.mean_loss,
                acceptance_rate: fit.chain.acceptance_rate,
                point_estimate_loss: point_losses[k],
            }
        })
        .collect();
    let report = RunReport {
        config: cfg.echo(),
        n_train: train.n_traj(),
        n_val: val.n_traj(),
        subsample_size,
        lambda_w,
        lambda_a,
        models,
        weights: "weights.json".into(),
        eval_losses: "eval_losses.csv".into(),
        histogram: "histogram.csv".into(),
        chain_samples: summarize(&draw_losses)?,
        point_estimates: point_losses,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

fn write_eval_losses(path: &Path, draws: &[EvalDraw], point_losses: &[f64]) -> Result<()> {
    let mut out = String::from("kind,index,model,loss\n");
    for (r, d) in draws.iter().enumerate() {
        out.push_str(&format!("chain_sample,{},{},{}\n", r + 1, d.model + 1, d.loss));
    }
    for (k, l) in point_losses.iter().enumerate() {
        out.push_str(&format!("point_estimate,{},{},{}\n", k + 1, k + 1, l));
    }
    write_text(path, &out)
}

fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (k, c) in hist.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", hist.edges[k], hist.edges[k + 1], c));
    }
    write_text(path, &out)
}

/// What `report` prints, read back from a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub weights: Vec<f64>,
    pub mean_losses: Vec<f64>,
    pub bayes_factors: Vec<Vec<Option<f64>>>,
    pub point_losses: Vec<f64>,
    pub draw_summary: LossSummary,
    pub n_draws: usize,
    pub histogram_total: usize,
    pub chain_lengths: Vec<usize>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::artifact(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::artifact(path, e))
}

fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::artifact(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::artifact(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::artifact(path, e))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, row: usize, cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Error::artifact(path, format!("row {row}: `{cell}` is not a number")))
}

/// Reads and cross-checks the artifacts of a run directory.
pub fn report_command(dir: impl AsRef<Path>) -> Result<RunSummary> {
    let dir = dir.as_ref();
    let weights: WeightsDocument = read_json(&dir.join("weights.json"))?;
    let n_models = weights.weights.len();

    let mut chain_lengths = Vec::with_capacity(n_models);
    for m in 1..=n_models {
        let path = dir.join(format!("chains/model_{m}.csv"));
        let (header, rows) = read_csv_rows(&path)?;
        if header.first().map(String::as_str) != Some("sample") {
            return Err(Error::artifact(&path, "first column must be `sample`"));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(Error::artifact(&path, format!("row {} has {} fields, header has {}", k + 2, row.len(), header.len())));
            }
            for cell in row.iter() {
                parse_f64(&path, k + 2, cell)?;
            }
        }
        chain_lengths.push(rows.len());
    }

    let eval_path = dir.join("eval_losses.csv");
    let (_, rows) = read_csv_rows(&eval_path)?;
    let mut draws = Vec::new();
    let mut point_losses = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        if row.len() != 4 {
            return Err(Error::artifact(&eval_path, format!("row {} should have 4 fields", k + 2)));
        }
        let value = parse_f64(&eval_path, k + 2, &row[3])?;
        match &row[0] {
            "chain_sample" => draws.push(value),
            "point_estimate" => point_losses.push(value),
            other => return Err(Error::artifact(&eval_path, format!("row {}: unknown kind `{other}`", k + 2))),
        }
    }
    if draws.is_empty() {
        return Err(Error::artifact(&eval_path, "no chain_sample rows"));
    }
    if point_losses.len() != n_models {
        return Err(Error::artifact(
            &eval_path,
            format!("{} point estimates for {n_models} models", point_losses.len()),
        ));
    }

    let hist_path = dir.join("histogram.csv");
    let (_, rows) = read_csv_rows(&hist_path)?;
    let mut histogram_total = 0usize;
    for (k, row) in rows.iter().enumerate() {
        let count = row
            .get(2)
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| Error::artifact(&hist_path, format!("row {}: bad count", k + 2)))?;
        histogram_total += count;
    }

    Ok(RunSummary {
        weights: weights.weights,
        mean_losses: weights.mean_losses,
        bayes_factors: weights.bayes_factors,
        point_losses,
        draw_summary: summarize(&draws)?,
        n_draws: draws.len(),
        histogram_total,
        chain_lengths,
    })
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model  weight        mean_loss     point_loss    samples")?;
        for (k, w) in self.weights.iter().enumerate() {
            writeln!(
                f,
                "{:<6} {:<13.6} {:<13.6} {:<13.6} {}",
                k + 1,
                w,
                self.mean_losses[k],
                self.point_losses[k],
                self.chain_lengths[k]
            )?;
        }
        writeln!(f, "\nBayes factors w_i / w_j (row i, column j):")?;
        for row in &self.bayes_factors {
            let cells: Vec<String> = row
                .iter()
                .map(|b| b.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}")))
                .collect();
            writeln!(f, "  {}", cells.join("  "))?;
        }
        let s = &self.draw_summary;
        writeln!(f, "\nvalidation loss over {} mixture draws:", self.n_draws)?;
        writeln!(f, "  mean   {:.6}", s.mean)?;
        writeln!(f, "  median {:.6}", s.median)?;
        writeln!(f, "  p05    {:.6}", s.p05)?;
        write!(f, "  p95    {:.6}", s.p95)
    }
}

/// Settings for synthetic data generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    /// Structure and weights to simulate; a random DAG is drawn when absent.
    pub truth: Option<PathBuf>,
    pub dim: usize,
    pub lag_order: usize,
    /// Probability of each allowed edge in a random DAG.
    pub edge_prob: f64,
    /// Noise level; overrides `sigma` in a truth file.
    pub sigma: Option<f64>,
    pub n_traj: usize,
    pub horizon: usize,
    pub warmup: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            truth: None,
            dim: 5,
            lag_order: 1,
            edge_prob: 0.3,
            sigma: None,
            n_traj: 100,
            horizon: 10,
            warmup: 10,
            seed: 0,
            out: PathBuf::from("data.csv"),
        }
    }
}

/// Ground-truth file written next to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(flatten)]
    pub model: ModelDocument,
    pub sigma: Option<f64>,
}

const DEFAULT_SIGMA: f64 = 0.1;
const SPECTRAL_TARGET: f64 = 0.9;

fn signed_weight(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.5..=1.0);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// Spectral radius of the companion matrix of `x_t = sum_l x_{t-l} A_l (I - W)^-1`.
fn companion_radius(params: &ParamSet) -> f64 {
    let (d, p) = (params.dim(), params.lags());
    if p == 0 {
        return 0.0;
    }
    let w = DMatrix::from_row_slice(d, d, params.w());
    let inv = (DMatrix::identity(d, d) - w)
        .try_inverse()
        .expect("I - W is unit triangular up to permutation for a DAG");
    let mut comp = DMatrix::zeros(d * p, d * p);
    for l in 0..p {
        let a = DMatrix::from_row_slice(d, d, &params.a()[l * d * d..(l + 1) * d * d]);
        let b = a * &inv;
        comp.view_mut((l * d, 0), (d, d)).copy_from(&b);
        if l + 1 < p {
            for k in 0..d {
                comp[(l * d + k, (l + 1) * d + k)] = 1.0;
            }
        }
    }
    comp.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random DAG with `edge_prob` edges, weights `+-U[0.5, 1]`, and lag weights
/// shrunk until the process is stable (companion spectral radius < 0.9).
pub fn random_model(dim: usize, lag_order: usize, edge_prob: f64, seed: u64) -> Result<(StructureMask, ParamSet)> {
    if dim == 0 {
        return Err(Error::Validation("dim must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Validation(format!("edge_prob must lie in [0, 1], got {edge_prob}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dim).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut params = ParamSet::zeros(dim, lag_order);
    for a in 0..dim {
        for b in a + 1..dim {
            if rng.random::<f64>() < edge_prob {
                let w = signed_weight(&mut rng);
                params.set_intra(order[a], order[b], w);
            }
        }
    }
    for l in 0..lag_order {
        for j in 0..dim {
            for i in 0..dim {
                if rng.random::<f64>() < edge_prob {
                    let w = signed_weight(&mut rng);
                    params.set_inter(l, j, i, w);
                }
            }
        }
    }
    for _ in 0..200 {
        let radius = companion_radius(&params);
        if radius < SPECTRAL_TARGET {
            break;
        }
        let shrink = (SPECTRAL_TARGET / radius).min(0.95);
        let a: Vec<f64> = params.a().iter().map(|v| v * shrink).collect();
        params = ParamSet::from_flat(dim, lag_order, params.w().to_vec(), a)?;
    }
    let mask = params.support()?;
    Ok((mask, params))
}

/// Path of the ground-truth file for a dataset path: `<stem>.truth.json`.
pub fn truth_path(data_path: &Path) -> PathBuf {
    let stem = data_path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    data_path.with_file_name(format!("{stem}.truth.json"))
}

/// Simulates a dataset and writes it with its ground truth.
pub fn generate(cfg: &GenerateConfig) -> Result<(TrajectoryDataset, GroundTruth)> {
    let (mask, params, file_sigma) = match &cfg.truth {
        Some(path) => {
            let truth: GroundTruth = read_json(path)?;
            let (mask, params) = truth.model.to_model().map_err(|e| Error::artifact(path, e))?;
            (mask, params, truth.sigma)
        }
        None => {
            let (mask, params) = random_model(cfg.dim, cfg.lag_order, cfg.edge_prob, cfg.seed)?;
            (mask, params, None)
        }
    };
    debug_assert!(is_dag(&mask.intra_rows())?);
    let sigma = cfg.sigma.or(file_sigma).unwrap_or(DEFAULT_SIGMA);
    let sim = SimulationConfig::new(sigma, cfg.n_traj, cfg.horizon, cfg.seed).with_warmup(cfg.warmup);
    let data = simulate(&mask, &params, &sim)?;
    if let Some(parent) = cfg.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::artifact(parent, e))?;
    }
    save_dataset(&data, &cfg.out).map_err(|e| Error::artifact(&cfg.out, e))?;
    let truth = GroundTruth {
        model: ModelDocument::from_model(&mask, &params),
        sigma: Some(sigma),
    };
    let tp = truth_path(&cfg.out);
    let mut file = BufWriter::new(fs::File::create(&tp).map_err(|e| Error::artifact(&tp, e))?);
    writeln!(file, "{}", serde_json::to_string_pretty(&truth)?)?;
    file.flush()?;
    Ok((data, truth))
}
