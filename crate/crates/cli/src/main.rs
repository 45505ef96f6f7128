//! Command-line surface for the detection engine: feature extraction,
//! single-scene detection, synthetic scene generation and batch benchmarks.

mod suite;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shelfscan_core::config::RunConfig;
use shelfscan_core::evalkit::{generate_scene, score, MetricsTally};
use shelfscan_core::features::{read_features, write_features};
use shelfscan_core::imagecore::{read_image, write_png};
use shelfscan_core::pipeline::{run_multi_product, PatternEntry, SceneContext};

use suite::SuiteSpec;

#[derive(Parser)]
#[command(
    name = "shelfscan",
    version,
    about = "Multi-instance pattern detection in shelf photos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features from an image into a JSON feature file.
    Extract {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Detect every occurrence of the given patterns in a scene.
    Detect {
        #[arg(long)]
        scene: PathBuf,
        /// Precomputed scene feature file (skips built-in extraction).
        #[arg(long)]
        scene_features: Option<PathBuf>,
        /// Pattern image; repeat for multiple products.
        #[arg(long, required = true)]
        pattern: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-entry vote images.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
    },
    /// Generate synthetic scenes (PNG + ground-truth JSON) from a suite spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark suite end to end and write metrics.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Input/data failures exit with 2, configuration failures with 3.
pub(crate) enum CliError {
    Input(String),
    Config(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Input(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            CliError::Config(msg) => {
                eprintln!("config error: {msg}");
                ExitCode::from(3)
            }
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Config(e.to_string())),
    }
}

fn load_image(path: &Path) -> Result<shelfscan_core::RasterImage, CliError> {
    read_image(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pattern".to_string())
}

fn cmd_extract(image: &Path, out: &Path, config: &Option<PathBuf>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let img = load_image(image)?;
    let mut features = shelfscan_core::features::extract_features(&img, &cfg.extractor);
    features.source_id = stem_of(image);
    write_features(&features, out).map_err(|e| CliError::Input(e.to_string()))?;
    eprintln!("{} features -> {}", features.len(), out.display());
    Ok(())
}

fn cmd_detect(
    scene: &Path,
    scene_features: &Option<PathBuf>,
    patterns: &[PathBuf],
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
    debug_dir: &Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = debug_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(e.to_string()))?;
        cfg.debug.vote_image_dir = Some(dir.to_string_lossy().into_owned());
    }
    let scene_img = load_image(scene)?;
    let scene_ctx = match scene_features {
        Some(path) => {
            let fs = read_features(path).map_err(|e| CliError::Input(e.to_string()))?;
            if fs.image_w != scene_img.width() || fs.image_h != scene_img.height() {
                return Err(CliError::Input(format!(
                    "feature file is for a {}x{} image but the scene is {}x{}",
                    fs.image_w,
                    fs.image_h,
                    scene_img.width(),
                    scene_img.height()
                )));
            }
            SceneContext::with_features(&stem_of(scene), scene_img, fs)
        }
        None => SceneContext::prepare(&stem_of(scene), scene_img, &cfg),
    };
    let mut entries = Vec::new();
    for p in patterns {
        let img = load_image(p)?;
        entries.push(PatternEntry::register(&stem_of(p), img, &cfg));
    }
    let report =
        run_multi_product(&scene_ctx, &entries, &cfg).map_err(|e| CliError::Input(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::Input(e.to_string()))?,
        None => println!("{json}"),
    }
    eprintln!(
        "{} occurrence(s) across {} product(s)",
        report.occurrences.len(),
        report.diagnostics.len()
    );
    Ok(())
}

fn cmd_synth(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec = SuiteSpec::load(spec_path)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Input(e.to_string()))?;
    let patterns = spec.materialize_patterns()?;
    for (id, img) in &patterns {
        let path = out.join(format!("pattern_{id}.png"));
        write_png(img, &path).map_err(|e| CliError::Input(e.to_string()))?;
    }
    for scene_spec in &spec.scenes {
        let (img, truth) =
            generate_scene(scene_spec, &patterns).map_err(|e| CliError::Input(e.to_string()))?;
        write_png(&img, &out.join(format!("{}.png", scene_spec.scene_id)))
            .map_err(|e| CliError::Input(e.to_string()))?;
        let truth_json = serde_json::to_string_pretty(&truth).expect("truth serializes");
        std::fs::write(
            out.join(format!("{}.truth.json", scene_spec.scene_id)),
            truth_json,
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
    }
    eprintln!(
        "{} pattern(s), {} scene(s) -> {}",
        patterns.len(),
        spec.scenes.len(),
        out.display()
    );
    Ok(())
}

fn cmd_bench(suite_path: &Path, out: &Path, config: &Option<PathBuf>) -> Result<(), CliError> {
    let spec = SuiteSpec::load(suite_path)?;
    let cfg = load_config(config)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Input(e.to_string()))?;
    let patterns = spec.materialize_patterns()?;

    let mut registered: BTreeMap<String, PatternEntry> = BTreeMap::new();
    for (id, img) in &patterns {
        registered.insert(id.clone(), PatternEntry::register(id, img.clone(), &cfg));
    }

    let mut tally = MetricsTally::default();
    let mut rows = String::from(
        "scene,placements,matched,detection_rate,false_positives,processes,processes_with_fp\n",
    );
    for scene_spec in &spec.scenes {
        let (img, truth) =
            generate_scene(scene_spec, &patterns).map_err(|e| CliError::Input(e.to_string()))?;
        let scene_ctx = SceneContext::prepare(&scene_spec.scene_id, img, &cfg);
        let product_ids = spec.products_for(scene_spec, &truth);
        let entries: Vec<PatternEntry> = product_ids
            .iter()
            .map(|id| registered[id].clone())
            .collect();
        let report = run_multi_product(&scene_ctx, &entries, &cfg)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let radius = spec.match_radius_for(&patterns);
        let m = score(&report, &truth, radius);
        tally.add(&report, &truth, radius);
        rows.push_str(&format!(
            "{},{},{},{:.6},{},{},{}\n",
            scene_spec.scene_id,
            m.placements,
            m.matched,
            m.detection_rate,
            m.false_positives,
            m.processes,
            m.processes_with_fp
        ));
    }
    let metrics = tally.finalize();
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics).expect("metrics serialize"),
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(out.join("scenes.csv"), rows).map_err(|e| CliError::Input(e.to_string()))?;
    eprintln!(
        "detection_rate={:.4} false_detection_chance={:.4} -> {}",
        metrics.detection_rate,
        metrics.false_detection_chance,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract { image, out, config } => cmd_extract(image, out, config),
        Command::Detect {
            scene,
            scene_features,
            pattern,
            config,
            out,
            debug_dir,
        } => cmd_detect(scene, scene_features, pattern, config, out, debug_dir),
        Command::Synth { spec, out } => cmd_synth(spec, out),
        Command::Bench { suite, out, config } => cmd_bench(suite, out, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
