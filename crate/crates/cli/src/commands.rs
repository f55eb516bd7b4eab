//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use aggloseg::io::{read_field, read_labels, write_field, write_labels};
use aggloseg::{
    contingency, iterative_train, partition_superpixels, run_context_pipeline, run_single_phase,
    split_re, split_vi, synth_generate, watershed, Confidence, Counters, Forest, ForestParams,
    IterTrainConfig, LabelPolicy, LabelVolume, MeanBoundaryConfidence, MergeTrace,
    PipelineConfig, ProbabilityStack, RegionGraph, SplitRand, SplitVi, SynthParams,
    PIPELINE_CHANNELS,
};
use serde::Serialize;

use crate::config::{
    echo_config, parse_dims, parse_range_f64, parse_range_usize, parse_sweep, DimsArg,
    PipelineFlags,
};
use crate::errors::{CliError, CliResult};
use crate::overlay::write_overlays;

fn channel_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.segv"))
}

/// Reads the four pipeline channels from a directory.
fn read_channels(dir: &Path) -> CliResult<ProbabilityStack> {
    let mut first: Option<ProbabilityStack> = None;
    for name in PIPELINE_CHANNELS {
        let path = channel_file(dir, name);
        let field = read_field(&path).map_err(|e| CliError::io_at(&path, CliError::from(e)))?;
        let stack = match &mut first {
            None => {
                first = Some(
                    ProbabilityStack::new(field.dims().to_vec()).map_err(CliError::from)?,
                );
                first.as_mut().unwrap()
            }
            Some(s) => s,
        };
        stack.push_channel(name, field).map_err(CliError::from)?;
    }
    Ok(first.unwrap())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io_at(path, e))
}

fn save_labels(path: &Path, v: &LabelVolume) -> CliResult<()> {
    write_labels(path, v).map_err(|e| CliError::io_at(path, CliError::from(e)))
}

// ---------------------------------------------------------------------------
// synth

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Output directory (must exist).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Generator parameters as JSON; flags override individual fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<DimsArg>,
    #[arg(long)]
    pub cells: Option<usize>,
    /// Blobs per cell as lo,hi.
    #[arg(long, value_parser = parse_range_usize)]
    pub mito_per_cell: Option<(usize, usize)>,
    /// Blob semi-axis range as lo,hi voxels.
    #[arg(long, value_parser = parse_range_f64)]
    pub mito_radius: Option<(f64, f64)>,
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SynthArgs {
    fn resolve(&self) -> CliResult<SynthParams> {
        let mut p = match &self.params {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => SynthParams::default(),
        };
        if let Some(d) = &self.dims {
            p.dims = d.0.clone();
        }
        if let Some(c) = self.cells {
            p.n_cells = c;
        }
        if let Some(m) = self.mito_per_cell {
            p.mito_per_cell = m;
        }
        if let Some(r) = self.mito_radius {
            p.mito_radius = r;
        }
        if let Some(b) = self.blur_sigma {
            p.boundary_blur_sigma = b;
        }
        if let Some(n) = self.noise_sigma {
            p.noise_sigma = n;
        }
        if let Some(s) = self.seed {
            p.seed = s;
        }
        Ok(p)
    }
}

/// Writes gt, mito mask and all channels of a generated instance.
fn write_synth_output(dir: &Path, out: &aggloseg::SynthOutput) -> CliResult<()> {
    save_labels(&dir.join("gt_cells.segv"), &out.cells)?;
    save_labels(&dir.join("gt_mito.segv"), &out.mito_blobs)?;
    for name in PIPELINE_CHANNELS {
        let path = channel_file(dir, name);
        let field = out.channels.to_field(name).map_err(CliError::from)?;
        write_field(&path, &field).map_err(|e| CliError::io_at(&path, CliError::from(e)))?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let params = args.resolve()?;
    params.validate().map_err(CliError::from)?;
    let out = synth_generate(&params).map_err(CliError::from)?;
    write_synth_output(&args.out_dir, &out)?;
    echo_config(&args.out_dir, "synth_config.json", &params)?;
    println!(
        "synth: {} cells, {} mito blobs, dims {:?} -> {}",
        params.n_cells,
        out.blob_cells.len(),
        params.dims,
        args.out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// watershed

#[derive(Debug, clap::Args)]
pub struct WatershedArgs {
    /// Boundary probability field (.segv).
    #[arg(long)]
    pub boundary: PathBuf,
    /// Output label volume (.segv).
    #[arg(long)]
    pub out: PathBuf,
    /// Voxels below this probability seed the flood.
    #[arg(long, default_value_t = 0.1)]
    pub theta_seed: f64,
}

#[derive(Serialize)]
struct WatershedEcho<'a> {
    boundary: &'a Path,
    out: &'a Path,
    theta_seed: f64,
}

pub fn cmd_watershed(args: &WatershedArgs) -> CliResult<()> {
    let field = read_field(&args.boundary)
        .map_err(|e| CliError::io_at(&args.boundary, CliError::from(e)))?;
    let labels = watershed(&field, args.theta_seed).map_err(CliError::from)?;
    save_labels(&args.out, &labels)?;
    let dir = args.out.parent().unwrap_or(Path::new("."));
    echo_config(
        dir,
        "watershed_config.json",
        &WatershedEcho {
            boundary: &args.boundary,
            out: &args.out,
            theta_seed: args.theta_seed,
        },
    )?;
    println!(
        "watershed: {} regions -> {}",
        labels.distinct_labels().len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Over-segmentation label volume.
    #[arg(long)]
    pub labels: PathBuf,
    /// Ground-truth label volume.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory holding the four channel files.
    #[arg(long)]
    pub channels: PathBuf,
    /// Output forest file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Training iterations; 1 = single pass.
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    /// Accumulate training rows across iterations instead of replacing them.
    #[arg(long)]
    pub accumulate: bool,
    #[arg(long, default_value_t = 50)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 20)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Context-aware labeling: on|off.
    #[arg(long, value_parser = crate::config::parse_on_off, default_value = "on")]
    pub context: bool,
    /// Partition threshold used when context is on.
    #[arg(long, default_value_t = 0.5)]
    pub theta_mito: f64,
    /// Threshold for the agglomeration runs of later iterations.
    #[arg(long, default_value_t = 0.2)]
    pub delta_c: f64,
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    labels: &'a Path,
    gt: &'a Path,
    channels: &'a Path,
    out: &'a Path,
    iterations: usize,
    accumulate: bool,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
    context: bool,
    theta_mito: f64,
    delta_c: f64,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let overseg =
        read_labels(&args.labels).map_err(|e| CliError::io_at(&args.labels, CliError::from(e)))?;
    let gt = read_labels(&args.gt).map_err(|e| CliError::io_at(&args.gt, CliError::from(e)))?;
    let channels = read_channels(&args.channels)?;
    let mut g = RegionGraph::build(&overseg, &channels).map_err(CliError::from)?;
    if args.context {
        partition_superpixels(&mut g, args.theta_mito).map_err(CliError::from)?;
    }
    let cfg = IterTrainConfig {
        iterations: args.iterations,
        accumulate: args.accumulate,
        forest: ForestParams {
            n_trees: args.n_trees,
            max_depth: args.max_depth,
            seed: args.seed,
        },
        delta: args.delta_c,
        policy: if args.context {
            LabelPolicy::ContextAware
        } else {
            LabelPolicy::Oblivious
        },
    };
    let (forest, _rows, summary) =
        iterative_train(&g, &overseg, &gt, &cfg).map_err(CliError::from)?;
    forest
        .save(&args.out)
        .map_err(|e| CliError::io_at(&args.out, CliError::from(e)))?;
    let dir = args.out.parent().unwrap_or(Path::new("."));
    echo_config(
        dir,
        "train_config.json",
        &TrainEcho {
            labels: &args.labels,
            gt: &args.gt,
            channels: &args.channels,
            out: &args.out,
            iterations: args.iterations,
            accumulate: args.accumulate,
            n_trees: args.n_trees,
            max_depth: args.max_depth,
            seed: args.seed,
            context: args.context,
            theta_mito: args.theta_mito,
            delta_c: args.delta_c,
        },
    )?;
    echo_config(dir, "train_summary.json", &summary)?;
    println!(
        "train: rows per iteration {:?}, final {} -> {}",
        summary.rows_per_iteration,
        summary.final_rows,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// segment

#[derive(Debug, clap::Args)]
pub struct SegmentArgs {
    /// Over-segmentation label volume.
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory holding the four channel files.
    #[arg(long)]
    pub channels: PathBuf,
    /// Trained forest (JSON); without it the mean boundary probability is
    /// the estimator.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    /// Output directory (must exist).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Ground truth for metrics (required for sweeps).
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Sweep delta_c as start:end:step, writing one metrics row per value.
    #[arg(long, value_parser = parse_sweep)]
    pub sweep_delta_c: Option<(f64, f64, f64)>,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

#[derive(Serialize)]
struct CountersEcho {
    cyto: Counters,
    mito: Counters,
}

pub struct MetricsRow {
    pub delta: f64,
    pub vi: SplitVi,
    pub re: SplitRand,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> CliResult<()> {
    let mut text = String::from("delta,vi_ue,vi_oe,re_ue,re_oe\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.delta, r.vi.under, r.vi.over, r.re.under, r.re.over
        ));
    }
    write_text(path, &text)
}

pub fn compute_metrics(seg: &LabelVolume, gt: &LabelVolume, delta: f64) -> CliResult<MetricsRow> {
    let table = contingency(seg, gt, false).map_err(CliError::from)?;
    Ok(MetricsRow {
        delta,
        vi: split_vi(&table).map_err(CliError::from)?,
        re: split_re(&table).map_err(CliError::from)?,
    })
}

fn load_forest(path: &Path) -> CliResult<Forest> {
    Forest::load(path).map_err(|e| match e {
        aggloseg::Error::Io(io) => CliError::io_at(path, io),
        other => CliError::from(other),
    })
}

fn run_pipeline_once(
    labels: &LabelVolume,
    channels: &ProbabilityStack,
    estimator: &dyn Confidence,
    cfg: &PipelineConfig,
) -> CliResult<aggloseg::PipelineOutput> {
    let out = if cfg.context {
        run_context_pipeline(labels, channels, estimator, cfg)
    } else {
        run_single_phase(labels, channels, estimator, cfg)
    };
    out.map_err(CliError::from)
}

fn write_trace(path: &Path, trace: &MergeTrace) -> CliResult<()> {
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf)
        .map_err(|e| CliError::Model(e.to_string()))?;
    std::fs::write(path, buf).map_err(|e| CliError::io_at(path, e))
}

pub fn cmd_segment(args: &SegmentArgs) -> CliResult<()> {
    let labels =
        read_labels(&args.labels).map_err(|e| CliError::io_at(&args.labels, CliError::from(e)))?;
    let channels = read_channels(&args.channels)?;
    let cfg = args.pipeline.resolve()?;
    let forest = args.forest.as_deref().map(load_forest).transpose()?;
    let gt = args
        .gt
        .as_deref()
        .map(|p| read_labels(p).map_err(|e| CliError::io_at(p, CliError::from(e))))
        .transpose()?;

    // The estimator must outlive the runs below.
    let mean_est;
    let forest_est;
    let estimator: &dyn Confidence = match &forest {
        Some(f) => {
            forest_est = aggloseg::ForestConfidence::new(f);
            &forest_est
        }
        None => {
            let g_probe = RegionGraph::build(&labels, &channels).map_err(CliError::from)?;
            mean_est = MeanBoundaryConfidence::new(&g_probe).map_err(CliError::from)?;
            &mean_est
        }
    };

    if let Some((start, end, step)) = args.sweep_delta_c {
        let Some(gt) = &gt else {
            return Err(CliError::Usage(
                "--sweep-delta-c requires --gt for metrics".into(),
            ));
        };
        let mut rows = Vec::new();
        let mut delta = start;
        while delta <= end + 1e-12 {
            let run_cfg = PipelineConfig {
                delta_c: delta,
                ..cfg.clone()
            };
            let out = run_pipeline_once(&labels, &channels, estimator, &run_cfg)?;
            rows.push(compute_metrics(&out.volume, gt, delta)?);
            delta += step;
        }
        write_metrics_csv(&args.out_dir.join("metrics.csv"), &rows)?;
        echo_config(&args.out_dir, "segment_config.json", &cfg)?;
        println!("segment: swept {} thresholds -> metrics.csv", rows.len());
        return Ok(());
    }

    let out = run_pipeline_once(&labels, &channels, estimator, &cfg)?;
    save_labels(&args.out_dir.join("segmentation.segv"), &out.volume)?;
    write_trace(&args.out_dir.join("cyto_trace.csv"), &out.cyto_trace)?;
    write_trace(&args.out_dir.join("mito_trace.csv"), &out.mito_trace)?;
    echo_config(
        &args.out_dir,
        "counters.json",
        &CountersEcho {
            cyto: out.cyto_trace.counters,
            mito: out.mito_trace.counters,
        },
    )?;
    echo_config(&args.out_dir, "segment_config.json", &cfg)?;
    if let Some(gt) = &gt {
        let row = compute_metrics(&out.volume, gt, cfg.delta_c)?;
        write_metrics_csv(&args.out_dir.join("metrics.csv"), &[row])?;
    }
    println!(
        "segment: {} cyto merges, {} mito merges -> {}",
        out.cyto_trace.len(),
        out.mito_trace.len(),
        args.out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Metrics CSV output; stdout gets a summary either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Threshold recorded in the CSV row.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Exclude voxels labeled 0 in either volume.
    #[arg(long)]
    pub exclude_zero: bool,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let seg = read_labels(&args.seg).map_err(|e| CliError::io_at(&args.seg, CliError::from(e)))?;
    let gt = read_labels(&args.gt).map_err(|e| CliError::io_at(&args.gt, CliError::from(e)))?;
    let table = contingency(&seg, &gt, args.exclude_zero).map_err(CliError::from)?;
    let vi = split_vi(&table).map_err(CliError::from)?;
    let re = split_re(&table).map_err(CliError::from)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "VI_UE {} bits\nVI_OE {} bits\nRE_UE {} ({:e} %x1e-5)\nRE_OE {} ({:e} %x1e-5)",
        vi.under,
        vi.over,
        re.under,
        re.percent_1e5().0,
        re.over,
        re.percent_1e5().1
    )
    .ok();
    if let Some(out) = &args.out {
        write_metrics_csv(
            out,
            &[MetricsRow {
                delta: args.delta,
                vi,
                re,
            }],
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// overlay

#[derive(Debug, clap::Args)]
pub struct OverlayArgs {
    #[arg(long)]
    pub seg: PathBuf,
    /// Output directory for plane_####.ppm files (must exist).
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct OverlayEcho<'a> {
    seg: &'a Path,
    seed: u64,
}

pub fn cmd_overlay(args: &OverlayArgs) -> CliResult<()> {
    let seg = read_labels(&args.seg).map_err(|e| CliError::io_at(&args.seg, CliError::from(e)))?;
    let planes = write_overlays(&seg, &args.out_dir, args.seed)?;
    echo_config(
        &args.out_dir,
        "overlay_config.json",
        &OverlayEcho {
            seg: &args.seg,
            seed: args.seed,
        },
    )?;
    println!("overlay: {planes} plane(s) -> {}", args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, clap::Args)]
pub struct PipelineArgs {
    /// Output directory (must exist); receives every stage's artifacts.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub synth: SynthArgs2,
    /// Watershed seed threshold.
    #[arg(long, default_value_t = 0.1)]
    pub theta_seed: f64,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    #[arg(long)]
    pub accumulate: bool,
    #[arg(long, default_value_t = 50)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 20)]
    pub max_depth: usize,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
}

/// Synth flags reused inside `pipeline` (no own out-dir).
#[derive(Debug, clap::Args)]
pub struct SynthArgs2 {
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<DimsArg>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long, value_parser = parse_range_usize)]
    pub mito_per_cell: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_range_f64)]
    pub mito_radius: Option<(f64, f64)>,
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

pub fn cmd_pipeline(args: &PipelineArgs) -> CliResult<()> {
    let dir = &args.out_dir;
    let cfg = args.pipeline.resolve()?;

    let mut params = SynthParams {
        seed: cfg.seed,
        ..SynthParams::default()
    };
    if let Some(d) = &args.synth.dims {
        params.dims = d.0.clone();
    }
    if let Some(c) = args.synth.cells {
        params.n_cells = c;
    }
    if let Some(m) = args.synth.mito_per_cell {
        params.mito_per_cell = m;
    }
    if let Some(r) = args.synth.mito_radius {
        params.mito_radius = r;
    }
    if let Some(b) = args.synth.blur_sigma {
        params.boundary_blur_sigma = b;
    }
    if let Some(n) = args.synth.noise_sigma {
        params.noise_sigma = n;
    }
    params.validate().map_err(CliError::from)?;
    let synth = synth_generate(&params).map_err(CliError::from)?;
    write_synth_output(dir, &synth)?;
    echo_config(dir, "synth_config.json", &params)?;

    let boundary = synth.channels.to_field("boundary").map_err(CliError::from)?;
    let overseg = watershed(&boundary, args.theta_seed).map_err(CliError::from)?;
    save_labels(&dir.join("overseg.segv"), &overseg)?;

    let mut g = RegionGraph::build(&overseg, &synth.channels).map_err(CliError::from)?;
    if cfg.context {
        partition_superpixels(&mut g, cfg.theta_mito).map_err(CliError::from)?;
    }
    let train_cfg = IterTrainConfig {
        iterations: args.iterations,
        accumulate: args.accumulate,
        forest: ForestParams {
            n_trees: args.n_trees,
            max_depth: args.max_depth,
            seed: cfg.seed,
        },
        delta: cfg.delta_c,
        policy: if cfg.context {
            LabelPolicy::ContextAware
        } else {
            LabelPolicy::Oblivious
        },
    };
    let (forest, _rows, summary) =
        iterative_train(&g, &overseg, &synth.cells, &train_cfg).map_err(CliError::from)?;
    let forest_path = dir.join("forest.json");
    forest
        .save(&forest_path)
        .map_err(|e| CliError::io_at(&forest_path, CliError::from(e)))?;
    echo_config(dir, "train_summary.json", &summary)?;

    let estimator = aggloseg::ForestConfidence::new(&forest);
    let out = run_pipeline_once(&overseg, &synth.channels, &estimator, &cfg)?;
    save_labels(&dir.join("segmentation.segv"), &out.volume)?;
    write_trace(&dir.join("cyto_trace.csv"), &out.cyto_trace)?;
    write_trace(&dir.join("mito_trace.csv"), &out.mito_trace)?;
    echo_config(
        dir,
        "counters.json",
        &CountersEcho {
            cyto: out.cyto_trace.counters,
            mito: out.mito_trace.counters,
        },
    )?;

    let row = compute_metrics(&out.volume, &synth.cells, cfg.delta_c)?;
    write_metrics_csv(&dir.join("metrics.csv"), &[row])?;
    echo_config(dir, "pipeline_config.json", &cfg)?;
    println!(
        "pipeline: {} regions -> {} bodies; metrics.csv written",
        overseg.distinct_labels().len(),
        out.volume.distinct_labels().len()
    );
    Ok(())
}
