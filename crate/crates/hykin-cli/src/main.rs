//! Command-line harness for the hykin stack: dataset generation, training,
//! ablations, embedding export, and the gradient audit.
//!
//! Every subcommand accepts an optional `key = value` config file plus a
//! small set of flag overrides. Success exits 0; any failure prints one
//! machine-readable JSON error line to stderr and exits nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hykin::ablate::{ablate_curvature, ablate_noise, DEFAULT_C_LIST, DEFAULT_SIGMA_LIST};
use hykin::config::TrainConfig;
use hykin::data::{generate, Dataset, Split};
use hykin::export::export_embeddings;
use hykin::gradcheck::check_grads;
use hykin::train::train;

#[derive(Parser)]
#[command(
    name = "hykin",
    version,
    about = "Hyperbolic pose-text alignment: train, ablate, export, audit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus the override flags shared by every subcommand.
#[derive(Args)]
struct ConfigArgs {
    /// Config file with `key = value` lines; defaults apply when omitted.
    #[arg(value_name = "CONFIG")]
    config: Option<PathBuf>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the alignment strategy
    /// (pooled, token, euclidean_pooled, euclidean_token, none).
    #[arg(long)]
    strategy: Option<String>,
    /// Override the initial curvature.
    #[arg(long)]
    init_c: Option<f64>,
    /// Override the initial cross-entropy/alignment blend α₀.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> hykin::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::from_file(path)?,
            None => TrainConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(strategy) = &self.strategy {
            cfg.strategy = strategy.parse()?;
        }
        if let Some(c) = self.init_c {
            cfg.init_c = c;
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha_init = alpha;
        }
        if let Some(epochs) = self.epochs {
            cfg.epochs = epochs;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.display().to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset at the config's dataset path.
    GenData(ConfigArgs),
    /// Train one model; writes metrics.jsonl and model.ckpt under out_dir.
    Train(ConfigArgs),
    /// Train once per initial curvature and report final retrieval metrics.
    AblateCurvature {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated initial curvatures.
        #[arg(long, value_delimiter = ',')]
        c_list: Option<Vec<f64>>,
        /// Freeze curvature at each listed value instead of learning it.
        #[arg(long)]
        frozen: bool,
    },
    /// Paired noise-robustness sweep: the configured hyperbolic strategy
    /// against its flat-curvature twin.
    AblateNoise {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated evaluation noise levels σ.
        #[arg(long, value_delimiter = ',')]
        sigma_list: Option<Vec<f64>>,
    },
    /// Export evaluation-split embeddings from a trained checkpoint as CSV.
    ExportEmbeddings {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Checkpoint to load (default: <out_dir>/model.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write an SVG disk plot next to the CSV.
        #[arg(long)]
        svg: bool,
    },
    /// Audit analytic gradients against finite differences.
    CheckGrads(ConfigArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> hykin::Result<ExitCode> {
    match command {
        Command::GenData(args) => {
            let cfg = args.resolve()?;
            let ds = generate(&cfg)?;
            let path = Path::new(&cfg.dataset);
            ds.save(path)?;
            println!(
                "wrote {}: {} samples ({} train / {} eval), vocab {}",
                path.display(),
                ds.samples.len(),
                ds.indices(Split::Train).len(),
                ds.indices(Split::Eval).len(),
                ds.vocab_size
            );
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let out = train(&cfg)?;
            for m in &out.metrics {
                println!(
                    "epoch {:>3}  ce {:.4}  hyp {:.4}  alpha {:.3}  c {:.4}",
                    m.epoch, m.ce, m.hyp, m.alpha, m.c
                );
            }
            println!(
                "eval: top1 {:.3}  top5 {:.3}  token_acc {:.3}  ce {:.4}  hyp {:.4}",
                out.eval.top1, out.eval.top5, out.eval.token_accuracy, out.eval.ce, out.eval.hyp
            );
            if let (Some(metrics), Some(ckpt)) = (&out.metrics_path, &out.checkpoint_path) {
                println!("wrote {} and {}", metrics.display(), ckpt.display());
            }
        }
        Command::AblateCurvature { cfg, c_list, frozen } => {
            let cfg = cfg.resolve()?;
            let ds = Dataset::load(Path::new(&cfg.dataset))?;
            let list = c_list.unwrap_or_else(|| DEFAULT_C_LIST.to_vec());
            let (rows, report) = ablate_curvature(&cfg, &ds, &list, !frozen, true)?;
            for r in &rows {
                println!(
                    "c_init {:>6.3} ({})  c_final {:>6.3}  top1 {:.3}  top5 {:.3}  \
                     token_acc {:.3}",
                    r.c_init,
                    if r.learnable { "learnable" } else { "frozen" },
                    r.c_final,
                    r.top1,
                    r.top5,
                    r.token_accuracy
                );
            }
            if let Some(path) = report {
                println!("wrote {}", path.display());
            }
        }
        Command::AblateNoise { cfg, sigma_list } => {
            let cfg = cfg.resolve()?;
            let ds = Dataset::load(Path::new(&cfg.dataset))?;
            let list = sigma_list.unwrap_or_else(|| DEFAULT_SIGMA_LIST.to_vec());
            let (rows, report) = ablate_noise(&cfg, &ds, &list, true)?;
            for r in &rows {
                println!(
                    "sigma {:.3}  hyp top1 {:.3} (-{:.1}%)  euc top1 {:.3} (-{:.1}%)",
                    r.sigma,
                    r.hyp.top1,
                    100.0 * r.hyp_degradation,
                    r.euc.top1,
                    100.0 * r.euc_degradation
                );
            }
            if let Some(path) = report {
                println!("wrote {}", path.display());
            }
        }
        Command::ExportEmbeddings { cfg, checkpoint, svg } => {
            let cfg = cfg.resolve()?;
            let out_dir = PathBuf::from(&cfg.out_dir);
            let ckpt = checkpoint.unwrap_or_else(|| out_dir.join("model.ckpt"));
            std::fs::create_dir_all(&out_dir)?;
            let csv = out_dir.join("embeddings.csv");
            let svg_path = out_dir.join("embeddings.svg");
            let summary = export_embeddings(
                &ckpt,
                Path::new(&cfg.dataset),
                &csv,
                svg.then_some(svg_path.as_path()),
            )?;
            println!("wrote {} ({} rows)", csv.display(), summary.rows.len());
            if svg {
                println!("wrote {}", svg_path.display());
            }
            for (part, radius) in &summary.mean_radii {
                println!("mean radius {part:<10} {radius:.4}");
            }
        }
        Command::CheckGrads(args) => {
            let cfg = args.resolve()?;
            let report = check_grads(cfg.seed)?;
            print!("{}", report.render());
            if !report.passed() {
                eprintln!("{}", serde_json::json!({ "error": "gradient audit failed" }));
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
