use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gamc::pipeline::{complexity_report, evaluate, FeatureExtractor, SynthRecipe};
use gamc::scalar::argmax;
use gamc::{load_bundle, load_dataset, save_bundle, save_dataset, train_pipeline, Dataset64, Error, GamcBundle64, PipelineConfig};

#[derive(Parser)]
#[command(name = "gamc", version, about = "Graph-spectral modulation classifier with SNR-routed experts")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset in the portable format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Read the recipe from `[data.synthetic]` of a pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated scheme names.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// Comma-separated SNRs in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snrs: Option<Vec<i32>>,
        #[arg(long)]
        per_cell: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write raw features of every frame to CSV.
    Extract {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Feature settings come from this config (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a bundle from a pipeline config and report held-out accuracy.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the held-out evaluation CSV here.
        #[arg(long)]
        eval_csv: Option<PathBuf>,
    },
    /// Evaluate a bundle on a labelled dataset.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-frame class probabilities as CSV.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parameter and FLOP accounting of a bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 128)]
        frame_len: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the `feature,gain` importance table of the auxiliary model.
        #[arg(long)]
        importance: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Io(_)
        | Error::BadMagic { .. }
        | Error::VersionMismatch { .. }
        | Error::Truncated(_)
        | Error::LabelOutOfRange { .. }
        | Error::Corrupt(_)
        | Error::EmptyData(_)
        | Error::SingleClass(_)
        | Error::EmptyBand(_)
        | Error::SnrOutOfRange(_) => 3,
        _ => 4,
    }
}

fn write_file(path: &Path, text: &str) -> gamc::Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> gamc::Result<()> {
    match cli.cmd {
        Command::Synth { out, config, schemes, snrs, per_cell, seed } => {
            let mut recipe = match config {
                Some(p) => PipelineConfig::load(p)?.data.synthetic.unwrap_or_default(),
                None => SynthRecipe::default(),
            };
            if let Some(s) = schemes {
                recipe.schemes = s;
            }
            if let Some(s) = snrs {
                recipe.snrs = s;
            }
            if let Some(n) = per_cell {
                recipe.per_cell = n;
            }
            if let Some(s) = seed {
                recipe.generator.rng_seed = s;
            }
            recipe.generator.validate().map_err(|e| Error::Config(e.to_string()))?;
            let ds: Dataset64 = recipe.generate()?;
            save_dataset(&ds, &out)?;
            println!(
                "wrote {} frames ({} schemes x {} SNRs) to {}",
                ds.len(),
                recipe.schemes.len(),
                recipe.snrs.len(),
                out.display()
            );
        }
        Command::Extract { data, out, config } => {
            let cfg = match config {
                Some(p) => PipelineConfig::load(p)?,
                None => PipelineConfig::default(),
            };
            let ds: Dataset64 = load_dataset(&data)?;
            let fx = FeatureExtractor::new(cfg.graph, cfg.stat);
            let x = fx.extract_matrix(&ds.frames)?;
            let mut s = format!("label,snr_db,{}\n", fx.feature_names().join(","));
            for (f, row) in ds.frames.iter().zip(x.rows()) {
                let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{},{},{}", ds.label_table[f.label], f.snr_db, vals.join(","));
            }
            write_file(&out, &s)?;
            println!("wrote {} x {} features to {}", x.nrows(), x.ncols(), out.display());
        }
        Command::Train { config, out, eval_csv } => {
            let cfg = PipelineConfig::load(config)?;
            let outcome = train_pipeline::<f64>(&cfg)?;
            save_bundle(&outcome.bundle, &out)?;
            println!(
                "trained {} experts on {} frames; bundle written to {}",
                outcome.bundle.moe.experts.len(),
                outcome.train.len(),
                out.display()
            );
            if !outcome.test.is_empty() {
                let report = evaluate(&outcome.bundle, &outcome.dataset.subset(&outcome.test))?;
                println!("held-out evaluation\n{}", report.summary());
                if let Some(p) = eval_csv {
                    write_file(&p, &report.to_csv())?;
                }
            }
        }
        Command::Eval { bundle, data, csv } => {
            let b: GamcBundle64 = load_bundle(bundle)?;
            let ds: Dataset64 = load_dataset(&data)?;
            if ds.label_table != b.moe.label_table {
                return Err(Error::Corrupt("dataset label table differs from the bundle's".into()));
            }
            let report = evaluate(&b, &ds)?;
            print!("{}", report.summary());
            if let Some(p) = csv {
                write_file(&p, &report.to_csv())?;
            }
        }
        Command::Predict { bundle, data, out } => {
            let b: GamcBundle64 = load_bundle(bundle)?;
            let ds: Dataset64 = load_dataset(&data)?;
            let p = b.predict_frames(&ds.frames)?;
            let names = &b.moe.label_table;
            let mut s = format!("frame,predicted,{}\n", names.iter().map(|n| format!("p_{n}")).collect::<Vec<_>>().join(","));
            for (i, row) in p.rows().into_iter().enumerate() {
                let r = row.to_vec();
                let vals: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{i},{},{}", names[argmax(&r)], vals.join(","));
            }
            write_file(&out, &s)?;
            println!("wrote predictions for {} frames to {}", p.nrows(), out.display());
        }
        Command::Report { bundle, frame_len, csv, importance } => {
            let b: GamcBundle64 = load_bundle(bundle)?;
            let r = complexity_report(&b, frame_len);
            print!("{}", r.summary());
            if let Some(p) = csv {
                write_file(&p, &r.to_csv())?;
            }
            if let Some(p) = importance {
                write_file(&p, &b.aux.importance_csv(&b.feature_names))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
