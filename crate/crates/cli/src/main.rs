use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dam::corpus::{load_corpus, CorpusFormat};
use dam::pipeline::{
    bench_csv, cmd_attend, cmd_bench, cmd_capture, cmd_pipeline, stats_csv, AttendInputs, AttendOptions, BenchOptions,
    CaptureSource,
};
use dam::render::cmd_render;
use dam::sparse::EfficiencyReport;
use dam::{Exec, PipelineConfig, TransformKind};

#[derive(Parser)]
#[command(name = "dam", version, about = "Dynamic attention mask pipeline")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capture attention maps and write mean/sum/count maps per (layer, head).
    Capture(CaptureArgs),
    /// Capture, amplify, threshold and pattern-match; writes masks, matched set and stats.
    Pipeline(CaptureArgs),
    /// Render a DAMT map or mask as a binary PGM image.
    Render { input: PathBuf, output: PathBuf },
    /// Apply a mask (extended past its size when a matched set is given) as sparse attention.
    Attend(AttendArgs),
    /// Sweep sequence lengths and report mask cost as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CaptureArgs {
    /// Corpus: one sequence per line, token ids or raw text.
    #[arg(long, required_unless_present = "ingest", conflicts_with = "ingest")]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    corpus_format: String,
    /// Directory of externally captured attn_L{l}_H{h}.damt maps (one batch per directory).
    #[arg(long)]
    ingest: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// raw-sum, average, log, box-cox, yeo-johnson, z-score, min-max, square-root, arcsinh
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_layers: Option<usize>,
    #[arg(long)]
    n_heads: Option<usize>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    no_distance_bias: bool,
    #[arg(long)]
    no_self_attend: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(t) = &self.transform {
            let kind: TransformKind = t.parse()?;
            cfg.transform = cfg.transform.lambda().map_or(kind, |l| kind.with_lambda(l));
        }
        if let Some(l) = self.lambda {
            cfg.transform = cfg.transform.with_lambda(l);
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),*) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        set!(l_max => l_max, eps => eps, tau => tau, mu => mu, seed => seed,
             n_layers => model.n_layers, n_heads => model.n_heads, d_model => model.d_model,
             vocab_size => model.vocab_size, model_seed => model.seed);
        if self.no_distance_bias {
            cfg.model.distance_bias = false;
        }
        if self.no_self_attend {
            cfg.self_attend = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct AttendArgs {
    /// True mask (DAMT mask file).
    #[arg(long)]
    mask: PathBuf,
    /// Matched-set file; required when --seq-len exceeds the mask size.
    #[arg(long)]
    matched: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    #[arg(long, default_value_t = 0)]
    head: usize,
    #[arg(long)]
    seq_len: usize,
    #[arg(long, requires_all = ["k", "v"])]
    q: Option<PathBuf>,
    #[arg(long)]
    k: Option<PathBuf>,
    #[arg(long)]
    v: Option<PathBuf>,
    /// Seed for random Q, K, V when no input files are given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Head width for random inputs.
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long)]
    no_self_attend: bool,
    /// Compare against a full-matrix reference and print the max abs difference.
    #[arg(long)]
    dense_check: bool,
    /// Output tensor (DAMT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    matched: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    #[arg(long, default_value_t = 0)]
    head: usize,
    /// Comma-separated sequence lengths; defaults to L,2L,4L,8L.
    #[arg(long, value_delimiter = ',')]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long)]
    no_self_attend: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn capture_source(args: &CaptureArgs) -> Result<CaptureSource> {
    match &args.corpus {
        Some(path) => {
            let format: CorpusFormat = args.corpus_format.parse()?;
            Ok(CaptureSource::Corpus(load_corpus(path, format)?))
        }
        None if !args.ingest.is_empty() => Ok(CaptureSource::Ingest(args.ingest.clone())),
        None => bail!("either --corpus or --ingest is required"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Capture(args) => {
            let cfg = args.cfg.resolve()?;
            let maps = cmd_capture(&capture_source(&args)?, &cfg, &args.out, exec)?;
            println!(
                "captured {} layer-head maps at length {} into {}",
                maps.means.items().len(),
                maps.pcl,
                args.out.display()
            );
        }
        Command::Pipeline(args) => {
            let cfg = args.cfg.resolve()?;
            let result = cmd_pipeline(&capture_source(&args)?, &cfg, &args.out, exec)?;
            print!("{}", stats_csv(&result.stats));
        }
        Command::Render { input, output } => {
            cmd_render(&input, &output).with_context(|| format!("rendering {}", input.display()))?;
        }
        Command::Attend(a) => {
            let inputs = match (a.q, a.k, a.v) {
                (Some(q), Some(k), Some(v)) => AttendInputs::Files { q, k, v },
                _ => AttendInputs::Seeded { seed: a.seed, d: a.d },
            };
            let opts = AttendOptions {
                mask: a.mask,
                matched: a.matched,
                layer: a.layer,
                head: a.head,
                seq_len: a.seq_len,
                inputs,
                self_attend: !a.no_self_attend,
                dense_check: a.dense_check,
                out: a.out,
            };
            let res = cmd_attend(&opts, exec)?;
            println!("{}", EfficiencyReport::CSV_HEADER);
            println!("{}", res.report.csv_line());
            if let Some(diff) = res.max_abs_diff {
                println!("max_abs_diff {diff:e}");
            }
        }
        Command::Bench(b) => {
            let opts = BenchOptions {
                mask: b.mask,
                matched: b.matched,
                layer: b.layer,
                head: b.head,
                lengths: b.lengths,
                d: b.d,
                self_attend: !b.no_self_attend,
            };
            let csv = bench_csv(&cmd_bench(&opts, exec)?);
            match b.out {
                Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dam: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
