use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ebdbn::{generate, report_command, run_pipeline, GenerateConfig, LossSign, PipelineConfig};

#[derive(Parser)]
#[command(name = "ebdbn", version, about = "Empirical-Bayes structure learning for linear dynamic Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Simulate a dataset from a structure file or a random DAG.
    Generate(GenerateArgs),
    /// Run the full fit and write artifacts to the output directory.
    Fit(FitArgs),
    /// Summarize the artifacts of a finished run.
    Report {
        /// Run directory written by `fit`.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Ground-truth JSON (dim, lag_order, e_w, e_a, w, a, optional sigma).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    lag_order: usize,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    /// Noise standard deviation [default: truth file value, else 0.1].
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "trajectories", default_value_t = 100)]
    n_traj: usize,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the ground truth goes to `<stem>.truth.json` beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// JSON file with any configuration keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    lag_order: Option<usize>,
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    subsample_size: Option<usize>,
    #[arg(long)]
    lambda_w: Option<f64>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eval_draws: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// +1 or -1.
    #[arg(long, allow_hyphen_values = true)]
    loss_sign: Option<i8>,
    #[arg(long)]
    parzen_bandwidth: Option<f64>,
    #[arg(long)]
    histogram_bins: Option<usize>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl FitArgs {
    fn into_config(self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_json_file(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            data => data_path,
            lag_order => lag_order,
            models => models,
            beta => beta,
            epsilon => epsilon,
            step_size => step_size,
            burn_in => burn_in,
            samples => n_samples,
            eval_draws => eval_draws,
            val_fraction => val_fraction,
            temperature => temperature,
            histogram_bins => histogram_bins,
            time_limit => time_limit,
            seed => seed,
            threads => threads,
            out_dir => out_dir,
        );
        if self.subsample_size.is_some() {
            cfg.subsample_size = self.subsample_size;
        }
        if self.lambda_w.is_some() {
            cfg.lambda_w = self.lambda_w;
        }
        if self.lambda_a.is_some() {
            cfg.lambda_a = self.lambda_a;
        }
        if self.lambda_min.is_some() {
            cfg.lambda_min = self.lambda_min;
        }
        if self.parzen_bandwidth.is_some() {
            cfg.parzen_bandwidth = self.parzen_bandwidth;
        }
        if let Some(s) = self.loss_sign {
            cfg.loss_sign = match s {
                1 => LossSign::Plus,
                -1 => LossSign::Minus,
                other => anyhow::bail!("--loss-sign must be 1 or -1, got {other}"),
            };
        }
        if cfg.data_path.as_os_str().is_empty() {
            anyhow::bail!("no dataset given: pass --data or set data_path in --config");
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let cfg = GenerateConfig {
                truth: a.truth,
                dim: a.dim,
                lag_order: a.lag_order,
                edge_prob: a.edge_prob,
                sigma: a.sigma,
                n_traj: a.n_traj,
                horizon: a.horizon,
                warmup: a.warmup,
                seed: a.seed,
                out: a.out,
            };
            let (data, truth) = generate(&cfg)?;
            println!(
                "wrote {} ({} trajectories x {} steps, d={}), ground truth in {}",
                cfg.out.display(),
                data.n_traj(),
                data.horizon(),
                data.dim(),
                ebdbn::pipeline::truth_path(&cfg.out).display()
            );
            let edges: usize = truth.model.e_w.iter().map(Vec::len).sum::<usize>()
                + truth.model.e_a.iter().flatten().map(Vec::len).sum::<usize>();
            println!("true structure has {edges} edges");
        }
        Command::Fit(a) => {
            let cfg = a.into_config()?;
            let report = run_pipeline(&cfg).context("fit failed")?;
            println!("artifacts in {}", cfg.out_dir.display());
            for m in &report.models {
                println!(
                    "model {}: {} intra + {} lag edges, weight {:.6}, validation loss {:.6}",
                    m.model, m.intra_edges, m.inter_edges, m.weight, m.point_estimate_loss
                );
            }
            let s = &report.chain_samples;
            println!(
                "mixture draws: mean {:.6}, median {:.6}, p05 {:.6}, p95 {:.6}",
                s.mean, s.median, s.p05, s.p95
            );
        }
        Command::Report { dir } => {
            let summary = report_command(&dir)?;
            println!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
