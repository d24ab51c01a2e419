//! The `occ` command line: every pipeline stage as a subcommand.
//!
//! Exit status 0 on success, 1 on a pipeline error, 2 on a usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use occ_core::aap::{augment, densification_stats, superimpose, voxelize};
use occ_core::conet::{extract_occupied, refine, FineFusionConfig};
use occ_core::eval::{evaluate_labels, report_table};
use occ_core::grid::{DenseLabelGrid, GridSpec};
use occ_core::net::{baseline_forward, flop_count, memory_bytes, predict_labels, EncoderConfig, HeadConfig, Modality, Stage};
use occ_core::synth::{capture_frame_with, generate_scene, ground_truth_occupancy, LidarConfig, Scene, SceneConfig};

use crate::occ1;
use crate::store::{FrameStore, StoreError, DATA_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "occ", about = "Semantic occupancy annotation and refinement pipeline", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene and the ground truth of one frame.
    Gen(GenArgs),
    /// Superimpose all LiDAR sweeps into one frame and voxelize them (V_init).
    Superimpose(SuperimposeArgs),
    /// Fill the empty voxels of V_init from pseudo labels (V_aug).
    Augment(AugmentArgs),
    /// Run a baseline and write labels on the standard grid.
    Predict(PredictArgs),
    /// Run a baseline followed by cascade refinement.
    Refine(RefineArgs),
    /// Score a prediction against ground truth.
    Eval(EvalArgs),
    /// Analytic operation and memory report per stride.
    Bench(BenchArgs),
    /// Serve the annotation API over a frame store.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Scene JSON written by `gen`.
    #[arg(long)]
    pub scene: PathBuf,
    /// Frame index; defaults to the middle frame.
    #[arg(long)]
    pub frame: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "multimodal")]
    pub modality: Modality,
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    /// Head coefficients JSON; defaults to the shipped head.
    #[arg(long)]
    pub head: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// SceneConfig JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Frame whose ground truth is written; defaults to the middle frame.
    #[arg(long)]
    pub frame: Option<usize>,
    /// Output directory for scene.json and gt.occ1.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SuperimposeArgs {
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Frames on each side of the target to merge; all frames by default.
    #[arg(long)]
    pub window: Option<usize>,
    /// Override the LiDAR ring count of the scene config.
    #[arg(long)]
    pub lidar_channels: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub pseudo: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also register the frame under this id in the frame store.
    #[arg(long)]
    pub register: Option<String>,
    /// Scene of the registered frame, enabling its camera views.
    #[arg(long, requires = "register")]
    pub scene: Option<PathBuf>,
    #[arg(long, requires = "register")]
    pub frame: Option<usize>,
    /// Frame store root; falls back to $OCC_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub frame: FrameArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub frame: FrameArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 4)]
    pub eta: usize,
    /// Fine classifier JSON; defaults to the shipped coefficients.
    #[arg(long)]
    pub fine: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Print the JSON summary instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Strides to report; repeat the flag for several.
    #[arg(long = "stride", default_values_t = [2usize, 4])]
    pub strides: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub eta: usize,
    #[arg(long, default_value = "multimodal")]
    pub modality: Modality,
    /// Fraction of coarse voxels predicted occupied.
    #[arg(long, default_value_t = 0.015, conflicts_with = "scene")]
    pub occupancy: f64,
    /// Measure the occupancy on this scene instead.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Frame store root; falls back to $OCC_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] occ_core::Error),
    #[error(transparent)]
    Occ1(#[from] occ1::Occ1Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| occ_core::Error::Parse(format!("{}: {e}", path.display())).into())
}

fn load_scene(args: &FrameArgs) -> Result<(Scene, usize), CliError> {
    let scene: Scene = read_json(&args.scene)?;
    let frame = args.frame.unwrap_or(scene.frame_count / 2);
    if frame >= scene.frame_count {
        return Err(occ_core::Error::FrameOutOfRange(frame).into());
    }
    Ok((scene, frame))
}

fn load_head(model: &ModelArgs) -> Result<HeadConfig, CliError> {
    Ok(match &model.head {
        Some(p) => HeadConfig::load(p)?,
        None => HeadConfig::shipped(model.modality, model.stride)?,
    })
}

fn write_grid(path: &Path, grid: &DenseLabelGrid) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(occ1::write_file(path, &grid.to_sparse())?)
}

fn open_store(dir: &Option<PathBuf>) -> Result<FrameStore, CliError> {
    Ok(match dir {
        Some(d) => FrameStore::open(d)?,
        None => FrameStore::from_env()?,
    })
}

fn gen(a: &GenArgs, out: &mut dyn Write) -> CliResult {
    let config: SceneConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SceneConfig::default(),
    };
    let scene = generate_scene(a.seed, &config)?;
    let frame = a.frame.unwrap_or(scene.frame_count / 2);
    let gt = ground_truth_occupancy(&scene, frame, &GridSpec::standard())?;
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("scene.json"), scene.to_canonical_json())?;
    write_grid(&a.out.join("gt.occ1"), &gt)?;
    writeln!(out, "scene seed={} frames={} objects={} gt_frame={frame} gt_occupied={}", a.seed, scene.frame_count, scene.tracks.len(), gt.occupied_count())?;
    Ok(())
}

fn superimpose_cmd(a: &SuperimposeArgs, out: &mut dyn Write) -> CliResult {
    let (scene, target) = load_scene(&a.frame)?;
    let mut lidar: LidarConfig = scene.config.lidar.clone();
    if let Some(c) = a.lidar_channels {
        lidar.channels = c;
    }
    let (lo, hi) = match a.window {
        Some(w) => (target.saturating_sub(w), (target + w).min(scene.frame_count - 1)),
        None => (0, scene.frame_count - 1),
    };
    let frames = (lo..=hi).map(|f| capture_frame_with(&scene, f, &lidar)).collect::<occ_core::Result<Vec<_>>>()?;
    let cloud = superimpose(&frames, target, &scene.ego_poses, &scene.tracks)?;
    let grid = voxelize(&cloud, &GridSpec::standard());
    write_grid(&a.out, &grid)?;
    writeln!(out, "frames={lo}..={hi} target={target} points={} occupied={}", cloud.points.len(), grid.occupied_count())?;
    Ok(())
}

fn augment_cmd(a: &AugmentArgs, out: &mut dyn Write) -> CliResult {
    let init = occ1::read_file(&a.init)?;
    let pseudo = occ1::read_file(&a.pseudo)?;
    let v_init = DenseLabelGrid::from_sparse(&init);
    let v_aug = augment(&v_init, &DenseLabelGrid::from_sparse(&pseudo))?;
    write_grid(&a.out, &v_aug)?;
    let s = densification_stats(&v_init, &v_aug)?;
    writeln!(out, "count_init={} count_aug={} ratio={:.4}", s.count_init, s.count_aug, s.ratio)?;
    if let Some(id) = &a.register {
        let store = open_store(&a.data_dir)?;
        let (scene, frame) = match &a.scene {
            Some(p) => {
                let (s, f) = load_scene(&FrameArgs { scene: p.clone(), frame: a.frame })?;
                (Some(s), f)
            }
            None => (None, a.frame.unwrap_or(0)),
        };
        store.create(id, scene.as_ref(), frame, &init)?;
        let rec = store.augment(id, &pseudo)?;
        writeln!(out, "registered {id} in {} status={:?}", store.root().display(), rec.status)?;
    }
    Ok(())
}

fn predict_cmd(a: &PredictArgs, out: &mut dyn Write) -> CliResult {
    let (scene, f) = load_scene(&a.frame)?;
    let frame = capture_frame_with(&scene, f, &scene.config.lidar)?;
    let spec = GridSpec::standard();
    let cfg = EncoderConfig::with_stride(a.model.stride);
    let head = load_head(&a.model)?;
    let output = baseline_forward(&frame, a.model.modality, &spec, &cfg, &head)?;
    let labels = predict_labels(&output, &spec)?;
    write_grid(&a.out, &labels)?;
    writeln!(out, "modality={} stride={} coarse={:?} occupied={}", a.model.modality, cfg.stride, output.coarse_spec.dims, labels.occupied_count())?;
    Ok(())
}

fn refine_cmd(a: &RefineArgs, out: &mut dyn Write) -> CliResult {
    let (scene, f) = load_scene(&a.frame)?;
    let frame = capture_frame_with(&scene, f, &scene.config.lidar)?;
    let spec = GridSpec::standard();
    let cfg = EncoderConfig::with_stride(a.model.stride);
    let head = load_head(&a.model)?;
    let fine = match &a.fine {
        Some(p) => FineFusionConfig::load(p)?,
        None => FineFusionConfig::shipped(a.model.modality, a.model.stride)?,
    };
    let r = refine(&frame, a.model.modality, &spec, &cfg, &head, &fine, a.eta)?;
    write_grid(&a.out, &r.fine.labels)?;
    writeln!(
        out,
        "modality={} stride={} eta={} coarse={:?} fine={:?} queries={} occupied={}",
        a.model.modality,
        cfg.stride,
        a.eta,
        r.coarse.coarse_spec.dims,
        r.fine.labels.spec().dims,
        r.fine.queries.len(),
        r.fine.labels.occupied_count()
    )?;
    Ok(())
}

fn eval_cmd(a: &EvalArgs, out: &mut dyn Write) -> CliResult {
    let pred = DenseLabelGrid::from_sparse(&occ1::read_file(&a.pred)?);
    let gt = DenseLabelGrid::from_sparse(&occ1::read_file(&a.gt)?);
    let r = evaluate_labels(&pred, &gt)?;
    if a.json {
        writeln!(out, "{}", r.to_json())?;
    } else {
        writeln!(out, "iou={:.4} miou={:.4} counted={}", r.iou, r.miou, r.counted_voxels)?;
        write!(out, "{}", report_table(&[(a.pred.file_stem().map_or("pred".into(), |s| s.to_string_lossy().into_owned()), r)]))?;
    }
    Ok(())
}

/// One row of the bench report.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct BenchRow {
    pub stride: usize,
    pub refine: bool,
    pub occupied: usize,
    pub encode_gflops: f64,
    pub decode_gflops: f64,
    pub refine_gflops: f64,
    pub total_gflops: f64,
    pub memory_gb: f64,
}

pub fn bench_rows(strides: &[usize], modality: Modality, eta: usize, occupancy: f64) -> Result<Vec<BenchRow>, CliError> {
    let spec = GridSpec::standard();
    let mut rows = Vec::new();
    for &s in strides {
        let cfg = EncoderConfig::with_stride(s);
        cfg.validate_for(&spec)?;
        let voxels = cfg.coarse_spec(&spec).num_voxels();
        let occupied = (occupancy * voxels as f64).round() as usize;
        let enc = Stage::Encode { modality };
        let stages = [enc, Stage::Decode];
        let encode = flop_count(&cfg, &spec, enc) / 1e9;
        let decode = flop_count(&cfg, &spec, Stage::Decode) / 1e9;
        let dense_mem = stages.iter().map(|&st| memory_bytes(&cfg, &spec, st)).fold(0.0, f64::max) / 1e9;
        rows.push(BenchRow {
            stride: s,
            refine: false,
            occupied: 0,
            encode_gflops: encode,
            decode_gflops: decode,
            refine_gflops: 0.0,
            total_gflops: encode + decode,
            memory_gb: dense_mem,
        });
        let stage = Stage::Refine { modality, occupied, eta };
        let refine = flop_count(&cfg, &spec, stage) / 1e9;
        rows.push(BenchRow {
            stride: s,
            refine: true,
            occupied,
            encode_gflops: encode,
            decode_gflops: decode,
            refine_gflops: refine,
            total_gflops: encode + decode + refine,
            memory_gb: dense_mem.max(memory_bytes(&cfg, &spec, stage) / 1e9),
        });
    }
    Ok(rows)
}

fn bench_cmd(a: &BenchArgs, out: &mut dyn Write) -> CliResult {
    if a.strides.is_empty() {
        return Err(CliError::Usage("at least one --stride is required".into()));
    }
    let occupancy = match &a.scene {
        Some(p) => {
            // Measured at the first stride with the shipped head.
            let (scene, f) = load_scene(&FrameArgs { scene: p.clone(), frame: None })?;
            let frame = capture_frame_with(&scene, f, &scene.config.lidar)?;
            let cfg = EncoderConfig::with_stride(a.strides[0]);
            let head = HeadConfig::shipped(a.modality, cfg.stride)?;
            let o = baseline_forward(&frame, a.modality, &GridSpec::standard(), &cfg, &head)?;
            extract_occupied(&o.probs).len() as f64 / o.probs.num_voxels() as f64
        }
        None => a.occupancy,
    };
    let rows = bench_rows(&a.strides, a.modality, a.eta, occupancy)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize"))?;
        return Ok(());
    }
    writeln!(out, "modality={} eta={} occupancy={:.4}", a.modality, a.eta, occupancy)?;
    writeln!(out, "{:<14} {:>10} {:>10} {:>10} {:>10} {:>10}", "method", "encode", "decode", "refine", "GFLOPs", "mem GB")?;
    for r in &rows {
        let name = format!("S={}{}", r.stride, if r.refine { "+cascade" } else { "" });
        writeln!(
            out,
            "{name:<14} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.4}",
            r.encode_gflops, r.decode_gflops, r.refine_gflops, r.total_gflops, r.memory_gb
        )?;
    }
    let decode = |s: usize| rows.iter().find(|r| r.stride == s).map(|r| r.decode_gflops);
    if let (Some(d2), Some(d4)) = (decode(2), decode(4)) {
        writeln!(out, "decoder FLOP ratio S=2/S=4: {:.2}", d2 / d4)?;
    }
    Ok(())
}

fn serve_cmd(a: &ServeArgs, out: &mut dyn Write) -> CliResult {
    let store = Arc::new(open_store(&a.data_dir)?);
    writeln!(out, "frame store {} ({DATA_DIR_ENV})", store.root().display())?;
    out.flush()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(crate::http::serve(store, a.addr))?;
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Superimpose(a) => superimpose_cmd(a, out),
        Command::Augment(a) => augment_cmd(a, out),
        Command::Predict(a) => predict_cmd(a, out),
        Command::Refine(a) => refine_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Serve(a) => serve_cmd(a, out),
    }
}

fn usage_for(args: &[std::ffi::OsString]) -> String {
    use clap::CommandFactory;
    let mut cmd = Cli::command();
    cmd.build();
    let sub = args.get(1).and_then(|a| a.to_str()).and_then(|name| cmd.find_subcommand_mut(name).map(|c| c.render_usage()));
    sub.unwrap_or_else(|| cmd.render_usage()).to_string()
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{text}");
                return 0;
            }
            let _ = write!(err, "{text}");
            if !text.contains("Usage:") {
                let _ = writeln!(err, "\n{}", usage_for(&args));
            }
            return 2;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
