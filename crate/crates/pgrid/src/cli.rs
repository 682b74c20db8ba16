//! Command-line surface of the pipeline. Every subcommand reads declared
//! inputs, writes declared outputs, and exits nonzero with a structured
//! message on failure. All randomness is seeded, and re-running any command
//! with identical inputs, flags, and seed reproduces its outputs byte for
//! byte (including under `--jobs` > 1). Log verbosity comes from the
//! `PGRID_LOG` environment variable.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use pgrid::coverage;
use pgrid::geo::{self, geojson, GridLayout, PointAnnotations, Provenance, Raster};
use pgrid::lineseg;
use pgrid::metrics::{self, MatchVariant, MetricsReport, ThresholdMetrics};
use pgrid::poleloss::{points_to_pixels, ProbabilityMap};
use pgrid::scorer::{self, ScorerWeights, TrainConfig};
use pgrid::synth::{self, SceneBundle, SceneConfig};
use pgrid::unify::{self, UnifyConfig};

#[derive(Parser)]
#[command(
    name = "pgrid",
    version,
    about = "Reconstructs power-distribution-grid layouts from overhead raster imagery",
    after_help = "Defaults follow the reference pipeline: scaling factor 4, evaluation \
                  buffer 2 m, distance thresholds 5,7,10 m, coverage cells 250 m. \
                  Set PGRID_LOG=debug for verbose logging."
)]
struct Cli {
    /// Worker threads for per-region parallel work; results are identical to
    /// --jobs 1.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene bundle (image.pgr, poles/lines/negatives
    /// GeoJSON, edges.json, config.json) with exact ground truth.
    Synth(SynthArgs),
    /// Train the pole scorer on scene bundles with the point-supervised
    /// composite loss (image, point, split, false-positive, hard-negative).
    TrainPoles(TrainPolesArgs),
    /// Run the pole scorer on an image; writes a 2-channel probability
    /// raster.
    DetectPoles(DetectPolesArgs),
    /// Train the patch-level line scorer (binary cross-entropy over sf x sf
    /// patches).
    TrainLines(TrainLinesArgs),
    /// Run the line scorer; writes a full-resolution line probability raster
    /// (patch predictions upsampled bilinearly).
    SegmentLines(SegmentLinesArgs),
    /// Distance-thresholded pole detection metrics (strict and all matching).
    EvalPoles(EvalPolesArgs),
    /// Buffered pixel-level line metrics (mIOU, precision, recall, F1).
    EvalLines(EvalLinesArgs),
    /// Distance-based mean average precision over one or more regions.
    Dmap(DmapArgs),
    /// Unify probability rasters into the vectorized grid layout
    /// (<out>.poles/.lines/.corridors.geojson).
    Unify(UnifyArgs),
    /// Reconstruct pole-to-pole edges from a unified layout (experimental;
    /// the deployed pipeline does not join poles and lines).
    SnapGraph(SnapGraphArgs),
    /// Grid-cell occupancy comparison against an external dataset.
    Coverage(CoverageArgs),
    /// Verify analytic gradients of the composite loss against central
    /// finite differences through the scorer.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scene config JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override (defaults to the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Also write noiseless oracle rasters (pole_probs.pgr, line_probs.pgr).
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct TrainPolesArgs {
    /// Directory whose subdirectories are scene bundles (sorted by name).
    #[arg(long)]
    scenes: PathBuf,
    /// Training config JSON {lr, epochs, momentum, seed, augment,
    /// lambda_hard_neg}; defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output weights JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss curve JSON.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct DetectPolesArgs {
    /// Input imagery (PGRD).
    #[arg(long)]
    image: PathBuf,
    /// Scorer weights JSON.
    #[arg(long)]
    weights: PathBuf,
    /// Output 2-channel probability raster (PGRD float32).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLinesArgs {
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scaling factor: each sf x sf patch is classified line/non-line
    /// (default 4, the best-performing setting; 1 and 8 are the sensitivity
    /// points).
    #[arg(long, default_value_t = lineseg::DEFAULT_SF)]
    sf: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentLinesArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Scaling factor used at training time (default 4).
    #[arg(long, default_value_t = lineseg::DEFAULT_SF)]
    sf: usize,
    /// Output single-channel line probability raster (PGRD float32).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MatchFlag {
    Strict,
    All,
    Both,
}

#[derive(Args)]
struct EvalPolesArgs {
    /// Ground-truth pole points (GeoJSON).
    #[arg(long)]
    gt: PathBuf,
    /// Predicted pole points with confidence (GeoJSON).
    #[arg(long)]
    pred: PathBuf,
    /// Comma-separated distance thresholds in meters (default the 5/7/10
    /// evaluation set).
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 7.0, 10.0])]
    th: Vec<f64>,
    /// Matching variants to report.
    #[arg(long = "match", value_enum, default_value = "both")]
    match_variant: MatchFlag,
    /// Region name recorded in the report.
    #[arg(long, default_value = "region")]
    region: String,
    /// Output report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV mirror of the report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EvalLinesArgs {
    /// Predicted line raster (PGRD): probabilities or a binary mask.
    #[arg(long, conflicts_with = "pred_layout")]
    pred: Option<PathBuf>,
    /// Alternatively, a unified layout stem whose corridor polygons are
    /// rasterized as the prediction mask (requires --like for the extent).
    #[arg(long, requires = "like")]
    pred_layout: Option<PathBuf>,
    /// Raster supplying the grid and extent when evaluating --pred-layout.
    #[arg(long)]
    like: Option<PathBuf>,
    /// Binarization threshold for a probability prediction raster.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Ground-truth line polylines (GeoJSON).
    #[arg(long)]
    gt: PathBuf,
    /// Ground-truth buffer half-width in meters (default 2 m on each side).
    #[arg(long, default_value_t = 2.0)]
    buffer: f64,
    #[arg(long, default_value = "region")]
    region: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DmapArgs {
    /// Ground-truth GeoJSON per region (repeatable, zipped with --pred).
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    /// Prediction GeoJSON per region (repeatable).
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Distance threshold in meters.
    #[arg(long, default_value_t = 10.0)]
    th: f64,
    /// Matching variant for average precision.
    #[arg(long, value_enum, default_value = "strict")]
    variant: VariantFlag,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantFlag {
    Strict,
    All,
}

impl From<VariantFlag> for MatchVariant {
    fn from(v: VariantFlag) -> Self {
        match v {
            VariantFlag::Strict => MatchVariant::Strict,
            VariantFlag::All => MatchVariant::All,
        }
    }
}

#[derive(Args)]
struct UnifyArgs {
    /// Pole probability raster (2-channel PGRD).
    #[arg(long = "pole-probs")]
    pole_probs: PathBuf,
    /// Line probability raster (1-channel PGRD).
    #[arg(long = "line-probs")]
    line_probs: PathBuf,
    /// Corridor buffer half-width in meters (default 2 m).
    #[arg(long, default_value_t = 2.0)]
    buffer: f64,
    #[arg(long, default_value_t = 0.5)]
    pole_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    line_threshold: f64,
    /// Minimum blob area in pixels before a centroid is emitted.
    #[arg(long, default_value_t = 8)]
    min_area: usize,
    /// Output stem; writes <out>.poles/.lines/.corridors.geojson.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SnapGraphArgs {
    /// Layout stem produced by `unify`.
    #[arg(long)]
    layout: PathBuf,
    /// Endpoint snap tolerance in meters.
    #[arg(long, default_value_t = 3.0)]
    tol: f64,
    /// Output edge list JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    /// Our layout stem (from `unify`).
    #[arg(long)]
    ours: PathBuf,
    /// External dataset: point layer (GeoJSON), optional.
    #[arg(long)]
    external_poles: Option<PathBuf>,
    /// External dataset: line layer (GeoJSON), optional.
    #[arg(long)]
    external_lines: Option<PathBuf>,
    /// Cell size in meters (default 250 m per cell).
    #[arg(long, default_value_t = coverage::DEFAULT_CELL_SIZE_M)]
    cell_size: f64,
    /// Lattice origin "x,y"; defaults to the layout bbox snapped down.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    origin: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Scorer weights JSON.
    #[arg(long)]
    weights: PathBuf,
    /// Scene bundle to evaluate on.
    #[arg(long)]
    scene: PathBuf,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Optional output report JSON (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PGRID_LOG")).init();
    let cli = Cli::parse();
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return 2;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build();
    let result = match pool {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(e.into()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::TrainPoles(args) => cmd_train_poles(args),
        Command::DetectPoles(args) => cmd_detect_poles(args),
        Command::TrainLines(args) => cmd_train_lines(args),
        Command::SegmentLines(args) => cmd_segment_lines(args),
        Command::EvalPoles(args) => cmd_eval_poles(args),
        Command::EvalLines(args) => cmd_eval_lines(args),
        Command::Dmap(args) => cmd_dmap(args),
        Command::Unify(args) => cmd_unify(args),
        Command::SnapGraph(args) => cmd_snap_graph(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    };
    let seed = args.seed.unwrap_or(config.seed);
    let scene = synth::generate_scene(&config, seed)?;
    synth::write_scene_bundle(&scene, &args.out)?;
    if args.oracle {
        let (pole_probs, line_probs) = synth::oracle_predictions(&scene)?;
        geo::write_raster(
            &pole_probs.raster().to_f32(),
            args.out.join("pole_probs.pgr"),
        )?;
        geo::write_raster(&line_probs.to_f32(), args.out.join("line_probs.pgr"))?;
    }
    log::info!(
        "scene with {} poles, {} spans, {} negatives -> {}",
        scene.poles.len(),
        scene.lines.len(),
        scene.negatives.len(),
        args.out.display()
    );
    Ok(())
}

/// Scene bundles under `dir`, sorted by directory name for determinism.
fn load_bundles(dir: &Path) -> Result<Vec<(String, SceneBundle)>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading scene directory {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("image.pgr").exists())
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no scene bundles (directories with image.pgr) under {}", dir.display());
    }
    names
        .into_iter()
        .map(|p| {
            let bundle = synth::read_scene_bundle(&p)
                .with_context(|| format!("loading scene bundle {}", p.display()))?;
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), bundle))
        })
        .collect()
}

fn train_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut config = match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn cmd_train_poles(args: TrainPolesArgs) -> Result<()> {
    let config = train_config(args.config.as_ref(), args.seed)?;
    let bundles = load_bundles(&args.scenes)?;
    let dataset: Vec<(Raster<f64>, PointAnnotations)> = bundles
        .iter()
        .map(|(_, b)| Ok((b.image.to_f64(), synth::training_annotations(b)?)))
        .collect::<Result<_>>()?;
    let outcome = scorer::train_poles(&dataset, &config)?;
    outcome.weights.save(&args.out)?;
    if let Some(curve) = &args.curve {
        write_json(&outcome.loss_curve, curve)?;
    }
    log::info!(
        "trained pole scorer on {} scenes, final loss {:.6}",
        dataset.len(),
        outcome.weights.metadata.final_loss
    );
    Ok(())
}

fn cmd_detect_poles(args: DetectPolesArgs) -> Result<()> {
    let image = geo::read_raster(&args.image)?.to_f64();
    let weights = ScorerWeights::load(&args.weights)?;
    let features = scorer::extract_features(&image);
    let logits = scorer::score(&features, &weights)?;
    let probs = ProbabilityMap::from_logits(&logits)?;
    geo::write_raster(&probs.raster().to_f32(), &args.out)?;
    Ok(())
}

fn cmd_train_lines(args: TrainLinesArgs) -> Result<()> {
    let config = train_config(args.config.as_ref(), args.seed)?;
    let bundles = load_bundles(&args.scenes)?;
    let dataset: Vec<_> = bundles
        .iter()
        .map(|(_, b)| (b.image.to_f64(), b.lines.clone()))
        .collect();
    let outcome = lineseg::train_lines(&dataset, args.sf, &config)?;
    outcome.weights.save(&args.out)?;
    if let Some(curve) = &args.curve {
        write_json(&outcome.loss_curve, curve)?;
    }
    Ok(())
}

fn cmd_segment_lines(args: SegmentLinesArgs) -> Result<()> {
    let image = geo::read_raster(&args.image)?.to_f64();
    let weights = ScorerWeights::load(&args.weights)?;
    let probs = lineseg::segment_lines(&image, &weights, args.sf)?;
    geo::write_raster(&probs.to_f32(), &args.out)?;
    Ok(())
}

fn restrict_variants(rows: &mut [ThresholdMetrics], flag: MatchFlag) {
    for row in rows {
        match flag {
            MatchFlag::Both => {}
            MatchFlag::Strict => {
                row.p_all = None;
                row.f1_all = None;
            }
            MatchFlag::All => {
                row.p_strict = None;
                row.f1_strict = None;
            }
        }
    }
}

fn cmd_eval_poles(args: EvalPolesArgs) -> Result<()> {
    let gt = geojson::read_points(&args.gt)?;
    let pred = geojson::read_points(&args.pred)?;
    if args.th.is_empty() {
        bail!("at least one threshold required");
    }
    // thresholds are independent work items; rayon keeps output order
    let mut rows: Vec<ThresholdMetrics> = args
        .th
        .par_iter()
        .map(|&th| metrics::evaluate_thresholds(&gt, &pred, &[th])[0])
        .collect();
    restrict_variants(&mut rows, args.match_variant);
    let mut metadata = serde_json::Map::new();
    metadata.insert("gt".into(), args.gt.display().to_string().into());
    metadata.insert("pred".into(), args.pred.display().to_string().into());
    metadata.insert("n_gt".into(), gt.poles().count().into());
    metadata.insert("n_pred".into(), pred.poles().count().into());
    let report = MetricsReport {
        region: args.region,
        thresholds: rows,
        lines: None,
        dmap: None,
        metadata,
    };
    write_json(&report, &args.out)?;
    if let Some(csv) = &args.csv {
        fs::write(csv, metrics::report_to_csv(&report))
            .with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(())
}

fn cmd_eval_lines(args: EvalLinesArgs) -> Result<()> {
    let (mask, pred_name) = match (&args.pred, &args.pred_layout) {
        (Some(pred), None) => {
            let mask = match geo::read_raster(pred)? {
                geo::AnyRaster::U8(m) => m,
                geo::AnyRaster::F32(probs) => {
                    if probs.channels() != 1 {
                        bail!("line raster must be single-channel, got {}", probs.channels());
                    }
                    pgrid::rasterops::threshold_mask(&probs, 0, args.threshold)
                }
            };
            (mask, pred.display().to_string())
        }
        (None, Some(stem)) => {
            let like = geo::read_raster(args.like.as_ref().unwrap())?.to_f64();
            let layout = unify::read_layout(stem)?;
            let mask = pgrid::rasterops::rasterize_polygons(
                &layout.line_polygons,
                like.georef(),
                like.width(),
                like.height(),
            );
            (mask, stem.display().to_string())
        }
        _ => bail!("provide exactly one of --pred or --pred-layout"),
    };
    let gt = geojson::read_polylines(&args.gt)?;
    let line_metrics = metrics::pixel_line_metrics(&mask, &gt, args.buffer)?;
    let mut metadata = serde_json::Map::new();
    metadata.insert("pred".into(), pred_name.into());
    metadata.insert("gt".into(), args.gt.display().to_string().into());
    metadata.insert("buffer_m".into(), args.buffer.into());
    let report = MetricsReport {
        region: args.region,
        thresholds: Vec::new(),
        lines: Some(line_metrics),
        dmap: None,
        metadata,
    };
    write_json(&report, &args.out)?;
    if let Some(csv) = &args.csv {
        fs::write(csv, metrics::report_to_csv(&report))
            .with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(())
}

fn cmd_dmap(args: DmapArgs) -> Result<()> {
    if args.gt.len() != args.pred.len() {
        bail!(
            "--gt and --pred must pair up per region ({} vs {})",
            args.gt.len(),
            args.pred.len()
        );
    }
    let variant: MatchVariant = args.variant.into();
    let regions: Vec<(PointAnnotations, PointAnnotations)> = args
        .gt
        .iter()
        .zip(&args.pred)
        .map(|(g, p)| Ok((geojson::read_points(g)?, geojson::read_points(p)?)))
        .collect::<Result<_>>()?;
    // per-region APs in parallel, deterministic order preserved
    let aps: Vec<f64> = regions
        .par_iter()
        .map(|(gt, pred)| metrics::average_precision(gt, pred, args.th, variant))
        .collect::<pgrid::Result<_>>()?;
    let mean = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };

    #[derive(serde::Serialize)]
    struct RegionAp {
        gt: String,
        pred: String,
        ap: f64,
    }
    #[derive(serde::Serialize)]
    struct DmapReport {
        th: f64,
        variant: MatchVariant,
        regions: Vec<RegionAp>,
        dmap: f64,
    }
    let report = DmapReport {
        th: args.th,
        variant,
        regions: args
            .gt
            .iter()
            .zip(&args.pred)
            .zip(&aps)
            .map(|((g, p), &ap)| RegionAp {
                gt: g.display().to_string(),
                pred: p.display().to_string(),
                ap,
            })
            .collect(),
        dmap: mean,
    };
    write_json(&report, &args.out)?;
    Ok(())
}

fn cmd_unify(args: UnifyArgs) -> Result<()> {
    let pole_probs = ProbabilityMap::new(geo::read_raster(&args.pole_probs)?.expect_f32()?.to_f64())?;
    let line_probs = geo::read_raster(&args.line_probs)?.expect_f32()?.to_f64();
    let config = UnifyConfig {
        pole_threshold: args.pole_threshold,
        line_threshold: args.line_threshold,
        min_area_px: args.min_area,
        buffer_m: args.buffer,
        ..UnifyConfig::default()
    };
    let poles = unify::extract_poles(&pole_probs, config.pole_threshold, config.min_area_px)?;
    let lines = unify::extract_lines(
        &line_probs,
        config.line_threshold,
        config.buffer_m,
        config.simplify_tol_px,
    )?;
    let mut parameters = serde_json::Map::new();
    parameters.insert("pole_threshold".into(), config.pole_threshold.into());
    parameters.insert("line_threshold".into(), config.line_threshold.into());
    parameters.insert("min_area_px".into(), config.min_area_px.into());
    parameters.insert("buffer_m".into(), config.buffer_m.into());
    let provenance = Provenance {
        sources: vec![
            args.pole_probs.display().to_string(),
            args.line_probs.display().to_string(),
        ],
        parameters,
    };
    let layout = unify::unify(
        poles,
        lines,
        pole_probs.raster().georef(),
        line_probs.georef(),
        provenance,
    )?;
    unify::write_layout(&layout, &args.out)?;
    log::info!(
        "layout: {} poles, {} skeletons, {} corridors",
        layout.poles.len(),
        layout.line_skeletons.len(),
        layout.line_polygons.len()
    );
    Ok(())
}

fn cmd_snap_graph(args: SnapGraphArgs) -> Result<()> {
    let layout = unify::read_layout(&args.layout)?;
    let edges = unify::snap_graph(&layout, args.tol);
    write_json(&edges, &args.out)?;
    Ok(())
}

fn cmd_coverage(args: CoverageArgs) -> Result<()> {
    let ours_layout = unify::read_layout(&args.ours)?;
    let origin = args.origin.as_ref().map(|v| [v[0], v[1]]);
    let ours = coverage::gridify(
        &ours_layout,
        args.cell_size,
        origin,
        args.ours.display().to_string(),
    )?;

    let mut external_layout = GridLayout::default();
    if let Some(path) = &args.external_poles {
        external_layout.poles = geojson::read_points(path)?;
    }
    if let Some(path) = &args.external_lines {
        external_layout.line_skeletons = geojson::read_polylines(path)?;
    }
    if args.external_poles.is_none() && args.external_lines.is_none() {
        bail!("provide --external-poles and/or --external-lines");
    }
    // the external dataset is gridded on our lattice so the cells align
    let external = coverage::gridify(
        &external_layout,
        args.cell_size,
        Some(ours.origin),
        "external",
    )?;
    let cmp = coverage::compare(&ours, &external)?;
    let report = coverage::coverage_report(&ours, &external, &cmp);
    write_json(&report, &args.out)?;
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let weights = ScorerWeights::load(&args.weights)?;
    if !(1e-6..=1e-3).contains(&args.h) {
        bail!("step h = {} outside [1e-6, 1e-3]", args.h);
    }
    let bundle = synth::read_scene_bundle(&args.scene)?;
    let image = bundle.image.to_f64();
    let features = scorer::extract_features(&image);
    let annotations = synth::training_annotations(&bundle)?;
    let poles = points_to_pixels(
        annotations.poles(),
        image.georef(),
        image.width(),
        image.height(),
    )?;
    let negatives = points_to_pixels(
        annotations.hard_negatives(),
        image.georef(),
        image.width(),
        image.height(),
    )?;
    let loss_config = TrainConfig::default().loss_config();
    let report = scorer::gradcheck_weights(
        &weights,
        &features,
        &poles,
        &negatives,
        &loss_config,
        args.h,
    )?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    if report.max_rel_error > 1e-4 {
        bail!("gradient mismatch: max relative error {}", report.max_rel_error);
    }
    Ok(())
}
