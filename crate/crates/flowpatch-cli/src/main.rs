//! Batch front-end for the flowpatch pipeline: inpainting, flow
//! completion, benchmark mask generation, metrics, and temporal profiles.

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use flowpatch::compensation::Compensator;
use flowpatch::flow_completion::{build_completed_flows, FlowCompletionConfig, GuidedSolveConfig};
use flowpatch::io;
use flowpatch::maskgen::{gen_masks, MaskGenConfig, MaskKind};
use flowpatch::metrics::{
    flow_epe, metric_summary, psnr, ssim, temporal_profile, write_metric_table, MetricRow,
};
use flowpatch::pipeline::{inpaint_sequence, InpaintConfig};
use flowpatch::propagation::PropagationConfig;
use flowpatch::raster::{Frame, Mask, CHANNELS};

use config::{resolve, KnobFile};

#[derive(Parser)]
#[command(name = "flowpatch", version, about = "Flow-guided video inpainting with error compensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inpaint a frame sequence
    Inpaint(InpaintArgs),
    /// Compute completed bi-directional flows and write .flo pairs
    Flow(FlowArgs),
    /// Generate benchmark mask stacks
    Genmask(GenmaskArgs),
    /// Evaluate PSNR/SSIM between two frame directories, or flow EPE
    Metrics(MetricsArgs),
    /// Extract a temporal profile image from one scan line
    Profile(ProfileArgs),
}

/// Pipeline knobs shared by `inpaint` and `flow`. Flags override the
/// config file; the file overrides defaults.
#[derive(Args, Debug, Default)]
struct PipelineOpts {
    /// Plain-text key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Temporal radius N of the guidance fill [default: 5]
    #[arg(long)]
    radius: Option<usize>,
    /// Guided-diffusion edge sensitivity [default: 10]
    #[arg(long)]
    beta: Option<f64>,
    /// Solver stop tolerance [default: 1e-4]
    #[arg(long)]
    tol: Option<f64>,
    /// Solver sweep cap [default: 2000]
    #[arg(long)]
    max_iter: Option<usize>,
    /// Square dilation factor of the overfill band [default: 17]
    #[arg(long)]
    dilation: Option<usize>,
    /// Compensation gate threshold [default: 0.05]
    #[arg(long)]
    tau: Option<f64>,
    /// Minimum band samples for a photometric fit [default: 32]
    #[arg(long)]
    min_samples: Option<usize>,
    /// Block-match search radius [default: 8]
    #[arg(long)]
    bm_radius: Option<usize>,
    /// Block-match patch side, odd [default: 7]
    #[arg(long)]
    bm_patch: Option<usize>,
    /// Disable the error compensation stage
    #[arg(long)]
    no_compensation: bool,
    /// Worker threads; 1 is the deterministic reference path
    /// [default: $FLOWPATCH_THREADS or all cores]
    #[arg(long)]
    threads: Option<usize>,
}

struct ResolvedPipeline {
    inpaint: InpaintConfig,
    threads: usize,
}

impl PipelineOpts {
    fn resolve(&self) -> Result<ResolvedPipeline> {
        let file = match &self.config {
            Some(path) => KnobFile::load(path)?,
            None => KnobFile::default(),
        };
        let solve = GuidedSolveConfig {
            beta: resolve(self.beta, &file, "beta", 10.0)?,
            tol: resolve(self.tol, &file, "tol", 1e-4)?,
            max_iter: resolve(self.max_iter, &file, "max_iter", 2000)?,
        };
        let flow = FlowCompletionConfig {
            solve,
            temporal_radius: resolve(self.radius, &file, "radius", 5)?,
            block_radius: resolve(self.bm_radius, &file, "bm_radius", 8)?,
            block_patch: resolve(self.bm_patch, &file, "bm_patch", 7)?,
        };
        let propagation = PropagationConfig {
            dilation: resolve(self.dilation, &file, "dilation", 17)?,
            record_diagnostics: false,
        };
        let compensator = if self.no_compensation {
            None
        } else {
            Some(Compensator {
                tau: resolve(self.tau, &file, "tau", 0.05)?,
                min_samples: resolve(self.min_samples, &file, "min_samples", 32)?,
            })
        };
        let env_threads = std::env::var("FLOWPATCH_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok());
        let threads = resolve(self.threads.or(env_threads), &file, "threads", 0)?;
        Ok(ResolvedPipeline {
            inpaint: InpaintConfig {
                flow,
                propagation,
                compensator,
                synth_tol: solve.tol,
                synth_max_iter: solve.max_iter,
            },
            threads,
        })
    }
}

fn run_in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(job))
}

#[derive(Args)]
struct InpaintArgs {
    /// Directory of input frames
    #[arg(long)]
    frames: PathBuf,
    /// Directory of input masks (white = hole)
    #[arg(long)]
    masks: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Directory of precomputed <t>_fwd.flo / <t>_bwd.flo pairs;
    /// skips the block-match fallback
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Also write per-iteration error maps and mask snapshots
    #[arg(long)]
    dump_diagnostics: bool,
    #[command(flatten)]
    opts: PipelineOpts,
}

fn error_map_to_frame(e: &flowpatch::compensation::ErrorMap) -> Frame {
    // signed errors shown around mid-gray
    Frame::from_fn(e.width(), e.height(), |x, y| {
        let mut p = [0.0f32; CHANNELS];
        for (c, v) in p.iter_mut().enumerate() {
            *v = (e.get(x, y, c) * 0.5 + 0.5).clamp(0.0, 1.0);
        }
        p
    })
}

fn cmd_inpaint(args: &InpaintArgs) -> Result<()> {
    let mut resolved = args.opts.resolve()?;
    resolved.inpaint.propagation.record_diagnostics = args.dump_diagnostics;

    let seq = io::load_sequence(&args.frames, &args.masks)?;
    let names = io::frame_file_names(&args.frames)?;
    let result = run_in_pool(resolved.threads, || {
        inpaint_sequence(&seq, args.flows.as_deref(), &resolved.inpaint)
    })??;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let remaining_dir = args.out.join("remaining");
    std::fs::create_dir_all(&remaining_dir)?;
    for (t, frame) in result.frames.iter().enumerate() {
        io::save_frame(frame, &args.out.join(format!("{}.png", names[t])))?;
        io::save_mask(&result.remaining[t], &remaining_dir.join(format!("{}.png", names[t])))?;
    }

    if args.dump_diagnostics {
        let diag_root = args.out.join("diagnostics");
        for (t, iterations) in result.diagnostics.iter().enumerate() {
            if iterations.is_empty() {
                continue;
            }
            let dir = diag_root.join(format!("frame_{t:04}"));
            std::fs::create_dir_all(&dir)?;
            let mut log = std::fs::File::create(dir.join("log.txt"))?;
            for (k, it) in iterations.iter().enumerate() {
                io::save_frame(
                    &error_map_to_frame(&it.error_map),
                    &dir.join(format!("iter_{k:02}_emap.png")),
                )?;
                io::save_mask(&it.err_mask, &dir.join(format!("iter_{k:02}_err_mask.png")))?;
                io::save_mask(&it.prop_mask, &dir.join(format!("iter_{k:02}_prop.png")))?;
                io::save_mask(&it.remaining, &dir.join(format!("iter_{k:02}_remaining.png")))?;
                let (rms, samples) = it
                    .model
                    .as_ref()
                    .map(|m| (m.rms_residual, m.sample_count))
                    .unwrap_or((0.0, 0));
                writeln!(
                    log,
                    "iter={k} ref={} accepted={} rms={rms:.6} samples={samples}",
                    it.reference, it.accepted
                )?;
            }
        }
    }
    println!(
        "inpainted {} frames -> {} ({} with residual synthesis)",
        result.frames.len(),
        args.out.display(),
        result.remaining.iter().filter(|m| !m.is_empty()).count()
    );
    Ok(())
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    masks: PathBuf,
    /// Output directory for <t>_fwd.flo / <t>_bwd.flo pairs
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: PipelineOpts,
}

fn cmd_flow(args: &FlowArgs) -> Result<()> {
    let resolved = args.opts.resolve()?;
    let seq = io::load_sequence(&args.frames, &args.masks)?;
    let flows = run_in_pool(resolved.threads, || {
        build_completed_flows(&seq, &resolved.inpaint.flow, None)
    })??;
    std::fs::create_dir_all(&args.out)?;
    for (t, (fwd, bwd)) in flows.forward.iter().zip(&flows.backward).enumerate() {
        io::write_flo(fwd, &args.out.join(format!("{t}_fwd.flo")))?;
        io::write_flo(bwd, &args.out.join(format!("{t}_bwd.flo")))?;
    }
    println!(
        "wrote {} flow files -> {}",
        2 * flows.forward.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Stationary,
    Moving,
}

#[derive(Args)]
struct GenmaskArgs {
    /// Mask family
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Raster geometry as WxH, e.g. 432x240
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// Number of frames
    #[arg(long)]
    frames: usize,
    /// RNG seed for the moving family
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.parse().map_err(|e| format!("bad width: {e}"))?;
    let h = h.parse().map_err(|e| format!("bad height: {e}"))?;
    Ok((w, h))
}

fn cmd_genmask(args: &GenmaskArgs) -> Result<()> {
    let (w, h) = args.size;
    let cfg = match args.kind {
        KindArg::Stationary => MaskGenConfig {
            seed: args.seed,
            ..MaskGenConfig::stationary()
        },
        KindArg::Moving => MaskGenConfig::moving(args.seed),
    };
    let masks = gen_masks(&cfg, h, w, args.frames)?;
    std::fs::create_dir_all(&args.out)?;
    for (t, mask) in masks.iter().enumerate() {
        io::save_mask(mask, &args.out.join(format!("{t:05}.png")))?;
    }
    println!("wrote {} masks -> {}", masks.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum RegionArg {
    Full,
    Hole,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory of predicted frames
    #[arg(long, requires = "gt", conflicts_with_all = ["pred_flows", "gt_flows"])]
    pred: Option<PathBuf>,
    /// Directory of ground-truth frames
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Directory of predicted .flo files (EPE mode)
    #[arg(long, requires = "gt_flows")]
    pred_flows: Option<PathBuf>,
    /// Directory of reference .flo files (EPE mode)
    #[arg(long)]
    gt_flows: Option<PathBuf>,
    /// Mask directory for hole-region metrics
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Metric support region
    #[arg(long, value_enum, default_value_t = RegionArg::Full)]
    region: RegionArg,
    /// Also write the CSV table to this file
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn list_flo_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "flo").unwrap_or(false))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn load_region_masks(args: &MetricsArgs, count: usize) -> Result<Option<Vec<Mask>>> {
    if args.region == RegionArg::Full {
        return Ok(None);
    }
    let Some(dir) = &args.masks else {
        bail!("--region hole needs --masks");
    };
    let mut masks = Vec::with_capacity(count);
    let files: Vec<PathBuf> = {
        let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        v.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        v
    };
    if files.len() != count {
        bail!("mask count {} does not match {} inputs", files.len(), count);
    }
    for f in files {
        masks.push(io::load_mask(&f)?);
    }
    Ok(Some(masks))
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    if let (Some(pred_dir), Some(gt_dir)) = (&args.pred_flows, &args.gt_flows) {
        let pred = list_flo_files(pred_dir)?;
        let gt = list_flo_files(gt_dir)?;
        if pred.len() != gt.len() {
            bail!("flow count mismatch: {} vs {}", pred.len(), gt.len());
        }
        if pred.is_empty() {
            bail!("no .flo files in {}", pred_dir.display());
        }
        let masks = load_region_masks(args, pred.len())?;
        let mut sum = 0.0f64;
        println!("pair,epe");
        for (i, (p, g)) in pred.iter().zip(&gt).enumerate() {
            let fp = io::read_flo(p)?;
            let fg = io::read_flo(g)?;
            let epe = flow_epe(&fp, &fg, masks.as_ref().map(|m| &m[i]))?;
            println!("{i},{epe:.4}");
            sum += epe;
        }
        let mean = sum / pred.len() as f64;
        println!("mean,{mean:.4}");
        println!("pairs={}\nmean_epe={mean:.4}", pred.len());
        return Ok(());
    }

    let (Some(pred_dir), Some(gt_dir)) = (&args.pred, &args.gt) else {
        bail!("need --pred/--gt for frame metrics or --pred-flows/--gt-flows for EPE");
    };
    let pred = load_frames(pred_dir)?;
    let gt = load_frames(gt_dir)?;
    if pred.len() != gt.len() {
        bail!("frame count mismatch: {} vs {}", pred.len(), gt.len());
    }
    if pred.is_empty() {
        bail!("no frames in {}", pred_dir.display());
    }
    let masks = load_region_masks(args, pred.len())?;

    let mut rows = Vec::with_capacity(pred.len());
    for (i, (p, g)) in pred.iter().zip(&gt).enumerate() {
        let region = masks.as_ref().map(|m| &m[i]);
        rows.push(MetricRow {
            frame: i,
            psnr: psnr(p, g, region)?,
            ssim: ssim(p, g)?,
        });
    }
    let stdout = std::io::stdout();
    write_metric_table(stdout.lock(), &rows)?;
    if let Some(csv) = &args.csv {
        let file = std::fs::File::create(csv)?;
        write_metric_table(file, &rows)?;
    }
    println!("{}", metric_summary(&rows));
    Ok(())
}

fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    let names = io::frame_file_names(dir)?;
    if names.is_empty() {
        bail!("no raster files in {}", dir.display());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| {
                        ["png", "jpg", "jpeg", "bmp", "tif", "tiff", "pgm", "ppm"]
                            .contains(&e.to_ascii_lowercase().as_str())
                    })
                    .unwrap_or(false)
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    files.iter().map(|p| Ok(io::load_frame(p)?)).collect()
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Scan-line row index
    #[arg(long)]
    row: usize,
    /// Output PNG path (T rows by W columns)
    #[arg(long)]
    out: PathBuf,
}

fn cmd_profile(args: &ProfileArgs) -> Result<()> {
    let frames = load_frames(&args.frames)?;
    let profile = temporal_profile(&frames, args.row)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    io::save_frame(&profile, &args.out)?;
    println!(
        "wrote {}x{} profile -> {}",
        profile.width(),
        profile.height(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, result) = match &cli.command {
        Command::Inpaint(args) => ("inpaint", cmd_inpaint(args)),
        Command::Flow(args) => ("flow", cmd_flow(args)),
        Command::Genmask(args) => ("genmask", cmd_genmask(args)),
        Command::Metrics(args) => ("metrics", cmd_metrics(args)),
        Command::Profile(args) => ("profile", cmd_profile(args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("flowpatch {stage}: {err:#}");
            ExitCode::FAILURE
        }
    }
}
