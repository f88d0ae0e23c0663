use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fsvc::data::{load_manifest, save_manifest, Dataset, Manifest};
use fsvc::harness::{build_splits, evaluate, EvalConfig, ReportFormat, SplitRequest};
use fsvc::protocols::{default_base_lr, pretrain_embedding, train, Init, Method, MethodConfig, TrainedModel};
use fsvc::synth::{gen_benchmark, GeneratorSpec};
use fsvc::{Error, Result};

#[derive(Parser)]
#[command(name = "fsvc", version, about = "Few-shot video classification over frame features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark from a JSON generator spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-partition a manifest's classes into train/val/test.
    Splits {
        #[arg(long)]
        manifest: PathBuf,
        /// Class counts as train,val,test.
        #[arg(long, default_value = "64,12,24")]
        classes: String,
        /// Training videos kept per class ("inf" keeps all).
        #[arg(long, default_value = "inf")]
        cap: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output manifest; defaults to a file next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on sampled test episodes.
    Eval(EvalArgs),
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "scratch")]
    init: Init,
    #[arg(long)]
    pretrain_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    way: usize,
    #[arg(long, default_value_t = 1)]
    shot: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    lr_base: Option<f64>,
    #[arg(long)]
    lr_adapt: Option<f64>,
    #[arg(long)]
    finetune_iters: Option<usize>,
    #[arg(long)]
    saliency_heads: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    episodes_per_epoch: Option<usize>,
    #[arg(long)]
    val_episodes: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    dtw_normalize: bool,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    way: usize,
    #[arg(long, default_value_t = 1)]
    shot: usize,
    #[arg(long, default_value_t = 10_000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Override the checkpoint's adaptation iterations (0 = imprint only).
    #[arg(long)]
    finetune_iters: Option<usize>,
    /// Reserved; only one query per episode is supported.
    #[arg(long, default_value_t = 1)]
    queries_per_episode: usize,
    /// Add the (run-dependent) wall time to the report.
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { spec, out } => cmd_gen(&spec, &out),
        Command::Splits {
            manifest,
            classes,
            cap,
            seed,
            out,
        } => cmd_splits(&manifest, &classes, &cap, seed, out),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Selftest => return cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(spec_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::Io {
        path: spec_path.into(),
        source: e,
    })?;
    let spec: GeneratorSpec =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    let bench = gen_benchmark(&spec, out)?;
    eprintln!(
        "wrote {} videos, manifest {}",
        bench.manifest.videos.len(),
        bench.manifest_path.display()
    );
    if let Some((m, path)) = &bench.pretrain {
        eprintln!(
            "wrote {} pretraining videos, manifest {}",
            m.videos.len(),
            path.display()
        );
    }
    Ok(())
}

fn parse_cap(cap: &str) -> Result<Option<usize>> {
    match cap {
        "inf" | "none" | "∞" => Ok(None),
        n => n
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("cap {n:?} is neither a count nor \"inf\""))),
    }
}

fn cmd_splits(manifest: &Path, classes: &str, cap: &str, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let counts: Vec<usize> = classes
        .split(',')
        .map(|c| c.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--classes {classes:?} must be three integers")))?;
    let [train_classes, val_classes, test_classes] = counts[..] else {
        return Err(Error::Config(format!("--classes {classes:?} must be three integers")));
    };
    let train_cap = parse_cap(cap)?;
    let full = load_manifest(manifest)?;
    let mut split = build_splits(
        &full,
        &SplitRequest {
            train_classes,
            val_classes,
            test_classes,
            train_cap,
            seed,
        },
    )?;
    let out = out.unwrap_or_else(|| {
        let cap = train_cap.map_or("inf".to_string(), |c| c.to_string());
        full.base_dir.join(format!("splits_seed{seed}_cap{cap}.json"))
    });
    rebase(&mut split, &out)?;
    save_manifest(&split, &out)?;
    eprintln!("wrote {} videos to {}", split.videos.len(), out.display());
    Ok(())
}

/// Keeps video paths valid when the manifest moves to another directory.
fn rebase(m: &mut Manifest, out: &Path) -> Result<()> {
    let out_dir = out.parent().unwrap_or(Path::new(""));
    let same = |a: &Path, b: &Path| match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    };
    let norm = |p: &Path| {
        if p.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            p.to_path_buf()
        }
    };
    if same(&norm(out_dir), &norm(&m.base_dir)) {
        return Ok(());
    }
    let base = norm(&m.base_dir).canonicalize().map_err(|e| Error::Io {
        path: m.base_dir.clone(),
        source: e,
    })?;
    for v in &mut m.videos {
        v.file_path = base.join(&v.file_path).to_string_lossy().into_owned();
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = MethodConfig::new(a.method, a.init);
    cfg.seed = a.seed;
    cfg.n_way = a.way;
    cfg.k_shot = a.shot;
    cfg.dtw_normalize = a.dtw_normalize;
    macro_rules! set {
        ($($field:ident = $arg:expr),* $(,)?) => { $( if let Some(v) = $arg { cfg.$field = v; } )* };
    }
    set!(
        epochs = a.epochs,
        embed_dim = a.embed_dim,
        dropout_p = a.dropout,
        temperature = a.temperature,
        lr_adapt = a.lr_adapt,
        iters_adapt = a.finetune_iters,
        saliency_heads = a.saliency_heads,
        batch_size = a.batch_size,
        episodes_per_epoch = a.episodes_per_epoch,
        val_episodes = a.val_episodes,
        patience = a.patience,
        pretrain_epochs = a.pretrain_epochs,
    );
    cfg.lr_base = a.lr_base.unwrap_or_else(|| default_base_lr(a.method, a.init));
    cfg.validate()?;

    let manifest = load_manifest(&a.manifest)?;
    let data = Dataset::load(&manifest)?;
    let init = match (a.init, &a.pretrain_manifest) {
        (Init::Scratch, None) => None,
        (Init::Scratch, Some(_)) => return Err(Error::Config("--pretrain-manifest requires --init pretrained".into())),
        (Init::Pretrained, None) => return Err(Error::Config("--init pretrained requires --pretrain-manifest".into())),
        (Init::Pretrained, Some(p)) => {
            let pre = Dataset::load(&load_manifest(p)?)?;
            let ids: Vec<u32> = manifest.class_ids().into_iter().collect();
            Some(pretrain_embedding(&pre, &ids, &cfg)?)
        }
    };
    let (model, log) = train(&data, &cfg, init)?;
    model.save(&a.out)?;
    for (e, (loss, acc)) in log.epoch_losses.iter().zip(&log.val_accuracy).enumerate() {
        eprintln!("epoch {e}: loss {loss:.4}, validation accuracy {:.2}%", 100.0 * acc);
    }
    eprintln!(
        "trained {} for {} epochs (kept epoch {}), final loss {:.4}; checkpoint {}",
        cfg.method,
        log.epoch_losses.len(),
        log.best_epoch,
        log.epoch_losses.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if a.queries_per_episode != 1 {
        return Err(Error::Config("only one query per episode is supported".into()));
    }
    let mut model = TrainedModel::load(&a.ckpt)?;
    if let Some(iters) = a.finetune_iters {
        model.config.iters_adapt = iters;
    }
    let manifest = load_manifest(&a.manifest)?;
    let data = Dataset::load(&manifest)?;
    let cfg = EvalConfig::new(a.way, a.shot, a.episodes, a.seed);
    let report = evaluate(&model, &data.test, &cfg)?;
    fs::write(&a.report, report.render(a.format, a.timing)).map_err(|e| Error::Io {
        path: a.report.clone(),
        source: e,
    })?;
    eprintln!("{} in {:.2}s", report.summary(), report.wall_time);
    Ok(())
}

fn cmd_selftest() -> ExitCode {
    for (name, result) in fsvc::selftest::run() {
        match result {
            Ok(()) => println!("ok    {name}"),
            Err(msg) => {
                println!("FAIL  {name}: {msg}");
                eprintln!("selftest failed: {name}");
                return ExitCode::FAILURE;
            }
        }
    }
    println!("all checks passed");
    ExitCode::SUCCESS
}
