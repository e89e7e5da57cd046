use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use voromesh::config::{ConfigError, Overrides, Settings, THREADS_ENV};
use voromesh::io::{self, IoError};
use voromesh::pipeline::{self, ExtractOutput, OccupancySource, PipelineError, Timings};
use voromesh::report::{metrics_csv, DiagramJson, Manifest, MetricsJson, WatertightJson};
use voromesh_core::extract::VoroMeshSurface;
use voromesh_core::mesh::{normalize, TriangleMesh};
use voromesh_core::metrics;
use voromesh_core::selfcheck;
use voromesh_core::voroloss::GeneratorSet;

/// Fits a watertight polygon mesh to a closed surface by optimizing
/// Voronoi generator positions.
#[derive(Parser, Debug)]
#[command(name = "voromesh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize, sample and fit generators; writes generators.txt, loss_trace.csv and reference.obj
    Fit(FitArgs),
    /// Build the diagram of saved generators and extract the surface
    Extract(ExtractArgs),
    /// Fit, extract, validate and evaluate in one run
    Pipeline(FitArgs),
    /// Compare two meshes (Chamfer, F1, normal consistency)
    Eval(EvalArgs),
    /// Add uniform noise to saved generators and re-extract with fixed occupancy
    Perturb(PerturbArgs),
    /// Run the randomized self-check suites
    Selfcheck(SelfcheckArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[command(flatten)]
    overrides: Overrides,
    /// JSON file with flat keys named like the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Closed triangle mesh (.obj or .off)
    input: PathBuf,
    /// Run directory
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Also write the surface samples as samples.xyz
    #[arg(long)]
    dump_samples: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Generator file (`x y z [occupancy]` per line)
    generators: PathBuf,
    /// Mesh in the generators' space used to label cells; required when the
    /// generator file has no occupancy column
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EvalArgs {
    reference: PathBuf,
    candidate: PathBuf,
    /// Map both meshes with the reference's normalization (the space of pipeline outputs)
    #[arg(long)]
    normalize: bool,
    /// Also write metrics.json, metrics.csv and manifest.json here
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    /// Generator file with occupancy
    generators: PathBuf,
    /// Noise amplitude in percent of the voxel size 1/grid
    #[arg(long)]
    delta: f64,
    /// Reference mesh in the generators' space; enables metrics
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Validation(_) => 3,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.into())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Input(e.into())
    }
}

impl From<voromesh_core::Error> for Failure {
    fn from(e: voromesh_core::Error) -> Self {
        Failure::Input(e.into())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn settings(common: &Common) -> Result<Settings, Failure> {
    let file = common.config.as_deref().map(Overrides::load).transpose()?;
    let env = std::env::var(THREADS_ENV).ok();
    let s = Settings::resolve(common.overrides.clone(), file, env.as_deref())?;
    // a second initialization only happens in-process (tests); keep the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(s.threads).build_global();
    Ok(s)
}

fn settings_json(s: &Settings) -> serde_json::Value {
    serde_json::to_value(s).expect("settings serialize")
}

/// Writes run artifacts and records their names in the manifest.
struct RunDir<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl<'a> RunDir<'a> {
    fn create(dir: &'a Path, manifest: Manifest) -> Result<RunDir<'a>, Failure> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create run directory {}", dir.display()))
            .map_err(Failure::Input)?;
        Ok(RunDir { dir, manifest })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, text: &str) -> Outcome {
        let p = self.path(name);
        Ok(io::write_text(&p, text)?)
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Outcome {
        let p = self.path(name);
        Ok(io::write_json(&p, value)?)
    }

    fn input(&mut self, key: &str, path: &Path) {
        self.manifest.inputs.insert(key.to_string(), path.display().to_string());
    }

    fn finish(mut self, timings: &Timings) -> Outcome {
        self.manifest.set_timings(timings);
        self.manifest.outputs.push("manifest.json".to_string());
        let p = self.dir.join("manifest.json");
        Ok(io::write_json(&p, &self.manifest)?)
    }
}

fn load_input(path: &Path) -> Result<TriangleMesh, Failure> {
    let (mesh, report) = io::load_mesh(path)?;
    if report.degenerate_dropped > 0 {
        log::warn!("{}: dropped {} faces with repeated vertices", path.display(), report.degenerate_dropped);
    }
    if report.zero_area > 0 {
        log::warn!("{}: {} faces have zero area", path.display(), report.zero_area);
    }
    Ok(mesh)
}

fn load_generators(path: &Path) -> Result<(GeneratorSet, Option<Vec<bool>>), Failure> {
    let (positions, occupancy) = io::parse_generators(&io::read_text(path)?, path)?;
    if positions.len() < 2 {
        return Err(Failure::Input(anyhow::anyhow!("{}: at least two generators are required", path.display())));
    }
    Ok((GeneratorSet::new(positions), occupancy))
}

fn write_extraction(run: &mut RunDir<'_>, generators: &GeneratorSet, x: &ExtractOutput) -> Result<bool, Failure> {
    run.text("mesh.obj", &io::format_obj(&x.surface.vertices, &x.surface.faces))?;
    run.text("generators.txt", &io::format_generators(&generators.positions, &x.occupancy))?;
    let report = WatertightJson::new(&x.watertight, &x.repair, DiagramJson::new(&x.diagram, &x.occupancy));
    run.json("watertight.json", &report)?;
    if x.surface.is_empty() {
        log::warn!("the extracted surface is empty");
        run.manifest.notes.push("extracted surface is empty".to_string());
    }
    Ok(x.watertight.is_watertight())
}

fn write_metrics(run: &mut RunDir<'_>, name: &str, m: &metrics::MetricReport, watertight: bool) -> Outcome {
    run.json("metrics.json", &MetricsJson::from(m))?;
    run.text("metrics.csv", &metrics_csv(name, m, watertight))
}

fn validation(watertight: bool, surface: &VoroMeshSurface) -> Outcome {
    if watertight {
        Ok(())
    } else {
        Err(Failure::Validation(format!("extracted surface with {} faces is not watertight", surface.faces.len())))
    }
}

fn run_fit(args: &FitArgs, full: bool) -> Outcome {
    let s = settings(&args.common)?;
    let config = s.pipeline_config();
    let input = load_input(&args.input)?;
    let check = pipeline::check_input(&input, s.seed)?;
    log::info!("input check: {check:?}");

    let mut run = RunDir::create(&args.out, Manifest::new(if full { "pipeline" } else { "fit" }, settings_json(&s)))?;
    run.input("mesh", &args.input);
    let mut timings = Timings::default();
    let fitted = pipeline::fit_stage(&input, &config, &mut timings)?;
    let f = &fitted.fit;
    if f.jittered > 0 {
        log::warn!("{} coincident generators were jittered after fitting", f.jittered);
        run.manifest.notes.push(format!("{} generators jittered after fitting", f.jittered));
    }
    if fitted.init.clamped > 0 {
        log::warn!("{} samples were clamped into the grid", fitted.init.clamped);
    }
    run.manifest.notes.push(format!(
        "{} samples, {} generators, normalization scale {:e} translation {:?}",
        fitted.samples.len(),
        f.generators.len(),
        fitted.transform.scale,
        fitted.transform.translation.to_array()
    ));
    let faces: Vec<Vec<u32>> = fitted.normalized.faces.iter().map(|f| f.to_vec()).collect();
    run.text("reference.obj", &io::format_obj(&fitted.normalized.vertices, &faces))?;
    run.text("loss_trace.csv", &io::format_trace_csv(&f.trace))?;
    if args.dump_samples {
        run.text("samples.xyz", &io::format_xyz(&fitted.samples.points, &fitted.samples.normals))?;
    }
    if !full {
        run.text("generators.txt", &io::format_generators_only(&f.generators.positions))?;
        return run.finish(&timings);
    }

    let x = pipeline::extract_stage(&f.generators, OccupancySource::Mesh(&fitted.normalized), &config.clip_box, &mut timings)?;
    let watertight = write_extraction(&mut run, &f.generators, &x)?;
    if let Some(m) = pipeline::evaluate_stage(&fitted.normalized, &x.surface, &config, &mut timings)? {
        let name = args.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_metrics(&mut run, &name, &m, watertight)?;
        println!("chamfer {:.4} f1 {:.4} nc {:.4}", m.chamfer, m.f1, m.normal_consistency);
    }
    println!("watertight {watertight}");
    run.finish(&timings)?;
    validation(watertight, &x.surface)
}

fn run_extract(args: &ExtractArgs) -> Outcome {
    let s = settings(&args.common)?;
    let (generators, saved) = load_generators(&args.generators)?;
    let mut run = RunDir::create(&args.out, Manifest::new("extract", settings_json(&s)))?;
    run.input("generators", &args.generators);
    let mut timings = Timings::default();
    let reference = match &args.reference {
        Some(p) => {
            run.input("reference", p);
            Some(load_input(p)?)
        }
        None => None,
    };
    let source = match (&reference, &saved) {
        (Some(m), _) => OccupancySource::Mesh(m),
        (None, Some(o)) => OccupancySource::Given(o),
        (None, None) => {
            return Err(Failure::Usage(anyhow::anyhow!(
                "{} has no occupancy column; pass --reference",
                args.generators.display()
            )))
        }
    };
    let x = pipeline::extract_stage(&generators, source, &pipeline::clip_box_for(&generators), &mut timings)?;
    let watertight = write_extraction(&mut run, &generators, &x)?;
    println!("watertight {watertight}");
    run.finish(&timings)?;
    validation(watertight, &x.surface)
}

fn run_eval(args: &EvalArgs) -> Outcome {
    let s = settings(&args.common)?;
    let mut reference = load_input(&args.reference)?;
    let mut candidate = load_input(&args.candidate)?;
    if args.normalize {
        let (r, t) = normalize(&reference)?;
        candidate = candidate.transformed(&t);
        reference = r;
    }
    let mut timings = Timings::default();
    let m = timings.time("metrics", || {
        metrics::evaluate(&reference, &candidate, s.metric_samples, s.f1_threshold, s.metric_seed)
    })?;
    let json = MetricsJson::from(&m);
    println!("{}", serde_json::to_string_pretty(&json).expect("metrics serialize"));
    if let Some(out) = &args.out {
        let mut run = RunDir::create(out, Manifest::new("eval", settings_json(&s)))?;
        run.input("reference", &args.reference);
        run.input("candidate", &args.candidate);
        let name = args.candidate.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let watertight = check_closed(&candidate);
        write_metrics(&mut run, &name, &m, watertight)?;
        run.finish(&timings)?;
    }
    Ok(())
}

/// Edge-manifold and closed, for the CSV column of `eval`.
fn check_closed(mesh: &TriangleMesh) -> bool {
    mesh.non_manifold_edge_count() == 0
}

fn run_perturb(args: &PerturbArgs) -> Outcome {
    let s = settings(&args.common)?;
    if !(args.delta >= 0.0 && args.delta.is_finite()) {
        return Err(Failure::Usage(anyhow::anyhow!("--delta must be a nonnegative percentage")));
    }
    let (generators, saved) = load_generators(&args.generators)?;
    let occupancy = saved.ok_or_else(|| {
        Failure::Input(anyhow::anyhow!("{}: perturbation needs the occupancy column", args.generators.display()))
    })?;
    let mut run = RunDir::create(&args.out, Manifest::new("perturb", settings_json(&s)))?;
    run.input("generators", &args.generators);
    run.manifest.notes.push(format!("delta {}% of voxel size 1/{}", args.delta, s.grid));
    let (perturbed, jittered) = pipeline::perturb(&generators, s.grid, args.delta, s.seed);
    if jittered > 0 {
        run.manifest.notes.push(format!("{jittered} generators jittered after perturbation"));
    }
    let mut timings = Timings::default();
    let clip_box = pipeline::clip_box_for(&perturbed);
    let x = pipeline::extract_stage(&perturbed, OccupancySource::Given(&occupancy), &clip_box, &mut timings)?;
    let watertight = write_extraction(&mut run, &perturbed, &x)?;
    if let Some(p) = &args.reference {
        run.input("reference", p);
        let reference = load_input(p)?;
        if let Some(m) = pipeline::evaluate_stage(&reference, &x.surface, &s.pipeline_config(), &mut timings)? {
            write_metrics(&mut run, &format!("delta{}", args.delta), &m, watertight)?;
            println!("chamfer {:.4} f1 {:.4} nc {:.4}", m.chamfer, m.f1, m.normal_consistency);
        }
    }
    println!("watertight {watertight}");
    run.finish(&timings)?;
    validation(watertight, &x.surface)
}

fn run_selfcheck(args: &SelfcheckArgs) -> Outcome {
    let s = settings(&args.common)?;
    let outcomes = selfcheck::run_all(s.seed)?;
    let mut failed = Vec::new();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        if !o.passed {
            failed.push(o.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a, false),
        Command::Pipeline(a) => run_fit(a, true),
        Command::Extract(a) => run_extract(a),
        Command::Eval(a) => run_eval(a),
        Command::Perturb(a) => run_perturb(a),
        Command::Selfcheck(a) => run_selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Input(e) => {
                    // causes already quoted by their wrapper are not repeated
                    let mut text = e.to_string();
                    for cause in e.chain().skip(1) {
                        let c = cause.to_string();
                        if !text.contains(&c) {
                            text = format!("{text}: {c}");
                        }
                    }
                    eprintln!("error: {text}")
                }
                Failure::Validation(m) => eprintln!("validation failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
