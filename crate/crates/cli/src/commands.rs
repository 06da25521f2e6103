use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tractoformer::config::KeyValues;
use tractoformer::metrics::{score, ScoreReport, VoxelMask};
use tractoformer::model::{
    dump_attention, forward_features, load_checkpoint, save_checkpoint, ModelConfig, ModelParams, Variant,
};
use tractoformer::phantom::{self, Phantom, PhantomConfig};
use tractoformer::shcore::{read_volume, write_volume, GradientScheme, ShFitter, Volume, DEFAULT_LAMBDA, DEFAULT_LMAX};
use tractoformer::streamlines::{read_tracts, resample, write_tracts, Tractogram};
use tractoformer::tracker::{track, NeuralModel, TrackConfig, TrackResult};
use tractoformer::train::{build_dataset, fit, FitResult, TrainConfig, WeightingMode};
use tractoformer::{Error, Result};

use crate::manifest::{sidecar, RunManifest};
use crate::Command;

/// Model, training and tracking settings from one optional config file.
/// Every command parses all three sections so a single experiment file can
/// drive the whole pipeline.
struct Experiment {
    kv: KeyValues,
    model: ModelConfig,
    train: TrainConfig,
    track: TrackConfig,
}

impl Experiment {
    fn load(path: Option<&Path>) -> Result<Self> {
        let kv = match path {
            Some(p) => KeyValues::read(p)?,
            None => KeyValues::default(),
        };
        let model = ModelConfig::from_kv(&kv, ModelConfig::default())?;
        let train = TrainConfig::from_kv(&kv, TrainConfig::default())?;
        let track = TrackConfig::from_kv(&kv, TrackConfig::default())?;
        kv.finish()?;
        Ok(Self { kv, model, train, track })
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Phantom { config, out } => cmd_phantom(&config, &out),
        Command::FitSh { dwi, scheme, lmax, lambda, out } => cmd_fit_sh(&dwi, &scheme, lmax, lambda, &out),
        Command::Train { data, variant, weighting, config, out } => {
            cmd_train(&data, variant, weighting, config.as_deref(), &out)
        }
        Command::Track { model, sh, mask, config, out } => cmd_track(&model, &sh, &mask, config.as_deref(), &out),
        Command::Score { rec, gt, step, out } => cmd_score(&rec, &gt, step, &out),
        Command::AttnDump { model, sh, streamline, layer, head, step, out } => {
            cmd_attn_dump(&model, &sh, &streamline, layer, head, step, &out)
        }
        Command::Ablate { data, config, out } => cmd_ablate(&data, config.as_deref(), &out),
    }
}

fn cmd_phantom(config: &Path, out: &Path) -> Result<()> {
    let mut m = RunManifest::new("phantom", Some(config));
    m.input(config);
    let cfg = PhantomConfig::read(config)?;
    m.params(&KeyValues::parse(&cfg.to_text(phantom::SCHEME_FILE))?);
    m.seed("phantom", cfg.seed);
    let ph = Phantom::generate(&cfg)?;
    let sh = ph.fit_sh(DEFAULT_LMAX, DEFAULT_LAMBDA)?;
    m.param("sh.lmax", DEFAULT_LMAX);
    m.param("sh.lambda", DEFAULT_LAMBDA);
    let files = phantom::write_phantom(&ph, Some(&sh), out)?;
    for p in files.paths {
        m.output(p);
    }
    eprintln!(
        "phantom: {} streamlines, {} white-matter voxels, {} crossing voxels",
        ph.tractogram.len(),
        ph.wm_mask.count(),
        ph.crossing_voxels()
    );
    m.write(&out.join("manifest.txt"))
}

fn cmd_fit_sh(dwi: &Path, scheme: &Path, lmax: usize, lambda: f64, out: &Path) -> Result<()> {
    let mut m = RunManifest::new("fit-sh", None);
    m.input(dwi);
    m.input(scheme);
    m.param("lmax", lmax);
    m.param("lambda", lambda);
    let scheme = GradientScheme::read(scheme)?;
    let dwi = read_volume::<f64>(dwi)?;
    let sh = ShFitter::<f64>::new(&scheme, lmax, lambda)?.fit_volume(&dwi)?;
    write_volume(out, &sh)?;
    m.output(out);
    m.write(&sidecar(out, ".manifest"))
}

struct PhantomData {
    tracts: Tractogram,
    sh: Volume<f32>,
}

fn read_training_data(dir: &Path, m: &mut RunManifest) -> Result<PhantomData> {
    let tracts_path = dir.join(phantom::TRACTS_FILE);
    let sh_path = dir.join(phantom::SH_FILE);
    m.input(&tracts_path);
    m.input(&sh_path);
    Ok(PhantomData { tracts: read_tracts(&tracts_path)?, sh: read_volume(&sh_path)? })
}

/// Trains from a fresh initialisation seeded by the training seed and
/// writes the final parameters plus the loss curve.
fn train_model(
    data: &PhantomData,
    model: &ModelConfig,
    train: &TrainConfig,
    ckpt: &Path,
    m: &mut RunManifest,
) -> Result<FitResult<f32>> {
    if data.sh.channels() != model.in_channels {
        return Err(Error::ConfigMismatch(format!(
            "model expects {} input channels, SH volume has {}",
            model.in_channels,
            data.sh.channels()
        )));
    }
    let (dataset, skipped) = build_dataset(&data.tracts, &data.sh, model.block_size, train.step_size)?;
    eprintln!(
        "train {}: {} sequences ({} skipped), weighting {}",
        model.variant,
        dataset.len(),
        skipped,
        train.weighting.map_or("none", WeightingMode::as_str)
    );
    let init = ModelParams::<f32>::init(model, train.seed)?;
    let result = fit(&dataset, init, train, |r| eprintln!("  epoch {:>4}  loss {:.6}  steps {}", r.epoch, r.loss, r.steps))?;
    save_checkpoint(&result.params, ckpt)?;
    let curve = sidecar(ckpt, ".loss.csv");
    fs::write(&curve, result.curve_csv())?;
    m.output(ckpt);
    m.output(curve);
    Ok(result)
}

fn cmd_train(
    data: &Path,
    variant: Option<Variant>,
    weighting: Option<WeightingMode>,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut m = RunManifest::new("train", config);
    let mut exp = Experiment::load(config)?;
    if let Some(p) = config {
        m.input(p);
    }
    if let Some(v) = variant {
        exp.model.variant = v;
    }
    if let Some(w) = weighting {
        exp.train.weighting = Some(w);
    }
    let data = read_training_data(data, &mut m)?;
    let mut kv = KeyValues::default();
    exp.model.write_kv(&mut kv);
    exp.train.write_kv(&mut kv);
    m.params(&kv);
    m.seed("train", exp.train.seed);
    train_model(&data, &exp.model, &exp.train, out, &mut m)?;
    m.write(&sidecar(out, ".manifest"))
}

fn read_mask(path: &Path) -> Result<VoxelMask> {
    Ok(VoxelMask::from_volume(&read_volume::<f64>(path)?))
}

fn track_model(
    params: &ModelParams<f32>,
    sh: &Volume<f32>,
    mask: &VoxelMask,
    cfg: &TrackConfig,
    out: &Path,
    m: &mut RunManifest,
) -> Result<TrackResult> {
    if sh.grid().cast::<f64>() != *mask.grid() {
        return Err(Error::ConfigMismatch("SH volume and tracking mask grids differ".into()));
    }
    let model = NeuralModel::new(params, sh)?;
    let result = track(&model, mask, cfg)?;
    write_tracts(out, &result.tractogram)?;
    let stops = sidecar(out, ".stops.txt");
    fs::write(&stops, result.histogram.to_text())?;
    m.output(out);
    m.output(stops);
    eprintln!(
        "track: {} seeds, {} streamlines kept, {} shorter than {} mm",
        result.n_seeds,
        result.tractogram.len(),
        result.discarded,
        cfg.min_length
    );
    Ok(result)
}

fn cmd_track(model: &Path, sh: &Path, mask: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut m = RunManifest::new("track", config);
    let exp = Experiment::load(config)?;
    for p in config.into_iter().chain([model, sh, mask]) {
        m.input(p);
    }
    let mut kv = KeyValues::default();
    exp.track.write_kv(&mut kv);
    m.params(&kv);
    m.seed("track", exp.track.seed);
    let params = load_checkpoint::<f32>(model)?;
    let sh = read_volume::<f32>(sh)?;
    let mask = read_mask(mask)?;
    track_model(&params, &sh, &mask, &exp.track, out, &mut m)?;
    m.write(&sidecar(out, ".manifest"))
}

fn cmd_score(rec: &Path, gt: &Path, step: f64, out: &Path) -> Result<()> {
    let mut m = RunManifest::new("score", None);
    m.input(rec);
    m.param("step", step);
    let tracts = read_tracts(rec)?;
    let truth = phantom::read_ground_truth(gt)?;
    let report = score(&tracts, &truth, step)?;
    fs::write(out, report.to_csv())?;
    print!("{}", report.to_table());
    m.output(out);
    m.write(&sidecar(out, ".manifest"))
}

fn cmd_attn_dump(
    model: &Path,
    sh: &Path,
    streamline: &(PathBuf, usize),
    layer: usize,
    head: usize,
    step: f64,
    out: &Path,
) -> Result<()> {
    let mut m = RunManifest::new("attn-dump", None);
    let (trx, index) = streamline;
    for p in [model, sh, trx.as_path()] {
        m.input(p);
    }
    m.param("streamline", index);
    m.param("layer", layer);
    m.param("head", head);
    m.param("step", step);
    let params = load_checkpoint::<f32>(model)?;
    let sh = read_volume::<f32>(sh)?;
    let tracts = read_tracts(trx)?;
    let s = tracts
        .streamlines
        .get(*index)
        .ok_or_else(|| Error::InvalidArgument(format!("streamline {index} out of range ({} in file)", tracts.len())))?;
    let s = resample(s, step)?;
    let n = s.len().min(params.config().block_size);
    let mut rows = Vec::with_capacity(n * params.config().patch_width());
    for p in &s.vertices[..n] {
        rows.extend(sh.extract_neighborhood(&[p[0] as f32, p[1] as f32, p[2] as f32])?);
    }
    let trace = forward_features(&params, &rows, n)?;
    let attn = dump_attention(&trace, layer, head)?;
    let mut csv = String::from("query");
    for k in 0..n {
        let _ = write!(csv, ",k{k}");
    }
    csv.push('\n');
    for (q, row) in attn.chunks(n).enumerate() {
        let _ = write!(csv, "{q}");
        for w in row {
            let _ = write!(csv, ",{w:.6}");
        }
        csv.push('\n');
    }
    fs::write(out, csv)?;
    m.output(out);
    m.write(&sidecar(out, ".manifest"))
}

/// The fixed ablation ladder: directory name, variant, weighting.
pub const ABLATION_ROWS: [(&str, Variant, WeightingMode); 4] = [
    ("baseline", Variant::BaselineMlp, WeightingMode::Uniform),
    ("context", Variant::ContextOnly, WeightingMode::Uniform),
    ("full", Variant::Full, WeightingMode::Uniform),
    ("full_weighted", Variant::Full, WeightingMode::InverseFrequency),
];

fn cmd_ablate(data_dir: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let mut m = RunManifest::new("ablate", config);
    let exp = Experiment::load(config)?;
    if let Some(p) = config {
        m.input(p);
    }
    m.params(&exp.kv);
    m.seed("train", exp.train.seed);
    m.seed("track", exp.track.seed);
    let data = read_training_data(data_dir, &mut m)?;
    let mask_path = data_dir.join(phantom::WM_MASK_FILE);
    m.input(&mask_path);
    let mask = read_mask(&mask_path)?;
    let truth = phantom::read_ground_truth(data_dir)?;
    fs::create_dir_all(out)?;

    let mut reports: Vec<(&str, Variant, WeightingMode, ScoreReport)> = Vec::new();
    for (name, variant, weighting) in ABLATION_ROWS {
        let dir = out.join(name);
        fs::create_dir_all(&dir)?;
        let model = ModelConfig { variant, ..exp.model };
        let train = TrainConfig { weighting: Some(weighting), ..exp.train };
        let fitted = train_model(&data, &model, &train, &dir.join("model.ckp"), &mut m)?;
        let tracked = track_model(&fitted.params, &data.sh, &mask, &exp.track, &dir.join("tracts.trx"), &mut m)?;
        let report = score(&tracked.tractogram, &truth, 0.5)?;
        let csv = dir.join("score.csv");
        fs::write(&csv, report.to_csv())?;
        m.output(csv);
        eprintln!("{name}: dice {:.2}  VC {:.2}%  VB {}", report.dice, report.vc, report.vb);
        reports.push((name, variant, weighting, report));
    }

    let mut csv = String::from("row,variant,weighting,streamlines,dice,overlap,overreach,vc,ic,nc,vb,ib\n");
    let mut table = format!(
        "{:<15}{:<14}{:<10}{:>8}{:>8}{:>8}{:>8}{:>8}{:>4}\n",
        "row", "variant", "weighting", "dice", "OL", "OR", "VC", "NC", "VB"
    );
    for (name, variant, weighting, r) in &reports {
        let _ = writeln!(
            csv,
            "{name},{variant},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            weighting.as_str(),
            r.n_streamlines,
            r.dice,
            r.overlap,
            r.overreach,
            r.vc,
            r.ic,
            r.nc,
            r.vb,
            r.ib
        );
        let _ = writeln!(
            table,
            "{name:<15}{:<14}{:<10}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>8.2}{:>4}",
            variant.as_str(),
            weighting.as_str(),
            r.dice,
            r.overlap,
            r.overreach,
            r.vc,
            r.nc,
            r.vb
        );
    }
    let csv_path = out.join("ablation.csv");
    let table_path = out.join("ablation.txt");
    fs::write(&csv_path, csv)?;
    fs::write(&table_path, &table)?;
    print!("{table}");
    m.output(csv_path);
    m.output(table_path);
    m.write(&out.join("manifest.txt"))
}
