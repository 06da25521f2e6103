//! `tractoformer` command-line driver.
//!
//! Exit status: 0 on success, 1 when the pipeline fails, 2 for usage
//! errors (unknown flags, missing input files, invalid flag values).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tractoformer::model::Variant;
use tractoformer::train::WeightingMode;

#[derive(Parser)]
#[command(name = "tractoformer", version, about = "Transformer streamline tractography on SH diffusion data")]
struct Cli {
    /// Worker threads; falls back to TRACTOFORMER_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a phantom (DWI, SH fit, masks, ROIs, ground-truth tracts).
    Phantom {
        #[arg(long, value_parser = existing_file)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit spherical harmonics to a DWI volume.
    FitSh {
        #[arg(long, value_parser = existing_file)]
        dwi: PathBuf,
        #[arg(long, value_parser = existing_file)]
        scheme: PathBuf,
        #[arg(long, default_value_t = 6, value_parser = even_order)]
        lmax: usize,
        #[arg(long, default_value_t = tractoformer::shcore::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a phantom directory's ground-truth streamlines.
    Train {
        #[arg(long, value_parser = existing_dir)]
        data: PathBuf,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long, value_parser = parse_weighting)]
        weighting: Option<WeightingMode>,
        #[arg(long, value_parser = existing_file)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track streamlines from every voxel of a mask.
    Track {
        #[arg(long, value_parser = existing_file)]
        model: PathBuf,
        #[arg(long, value_parser = existing_file)]
        sh: PathBuf,
        #[arg(long, value_parser = existing_file)]
        mask: PathBuf,
        #[arg(long, value_parser = existing_file)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a tractogram against a phantom's ground truth.
    Score {
        #[arg(long, value_parser = existing_file)]
        rec: PathBuf,
        #[arg(long, value_parser = existing_dir)]
        gt: PathBuf,
        /// Voxelisation step, mm.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one attention matrix for a streamline as CSV.
    AttnDump {
        #[arg(long, value_parser = existing_file)]
        model: PathBuf,
        #[arg(long, value_parser = existing_file)]
        sh: PathBuf,
        /// `FILE.trx:INDEX`
        #[arg(long, value_parser = streamline_ref)]
        streamline: (PathBuf, usize),
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        head: usize,
        /// Resampling step before feature extraction, mm.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and track the four ablation variants and compare their scores.
    Ablate {
        #[arg(long, value_parser = existing_dir)]
        data: PathBuf,
        #[arg(long, value_parser = existing_file)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn existing_dir(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_dir() {
        Ok(p)
    } else {
        Err(format!("no such directory: {s}"))
    }
}

fn even_order(s: &str) -> Result<usize, String> {
    let l: usize = s.parse().map_err(|e| format!("{e}"))?;
    if l % 2 == 1 {
        return Err(format!("SH order must be even, got {l}"));
    }
    Ok(l)
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: tractoformer::Error| e.to_string())
}

fn parse_weighting(s: &str) -> Result<WeightingMode, String> {
    s.parse().map_err(|e: tractoformer::Error| e.to_string())
}

fn streamline_ref(s: &str) -> Result<(PathBuf, usize), String> {
    let (file, idx) = s.rsplit_once(':').ok_or_else(|| format!("expected FILE:INDEX, got `{s}`"))?;
    let idx = idx.parse().map_err(|e| format!("bad streamline index `{idx}`: {e}"))?;
    Ok((existing_file(file)?, idx))
}

fn init_threads(flag: Option<usize>) -> Result<(), String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("TRACTOFORMER_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| format!("TRACTOFORMER_THREADS must be an integer, got `{v}`"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
