//! Command-line front end: fit, batch, synth, oracle, overlay, report.

mod config;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pericardium::experiment::{self, AggregateReport, BatchImage, RunRecord};
use pericardium::imaging::{self, ClassPalette, RgbImage};
use pericardium::synthesis::{self, generate_phantom};
use pericardium::{EllipseParams, LabeledImage, Metrics};

use config::Settings;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration.
    Input(String),
    /// A result violated an invariant that should always hold.
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<pericardium::Error> for CliError {
    fn from(e: pericardium::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "pericardium",
    version,
    about = "Ellipse fitting of the pericardium on labeled fat images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one labeled image.
    Fit(FitArgs),
    /// Fit every image of a manifest under several seeds.
    Batch(BatchArgs),
    /// Generate a synthetic labeled phantom with known ellipse.
    Synth(SynthArgs),
    /// Exhaustive grid search, for small images.
    Oracle(OracleArgs),
    /// Draw an ellipse outline over an image.
    Overlay(OverlayArgs),
    /// Summarize a results CSV.
    Report(ReportArgs),
}

/// Settings shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Config file of key=value lines.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override one config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn settings(&self) -> CliResult<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        for pair in &self.set {
            s.set_pair(pair)
                .map_err(|e| CliError::Input(format!("--set: {e}")))?;
        }
        Ok(s)
    }
}

#[derive(Args)]
struct GaFlags {
    #[arg(long, short = 'n')]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    children: Option<usize>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    u: Option<u32>,
    #[arg(long)]
    stagnation_window: Option<usize>,
}

impl GaFlags {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("generations", self.generations);
        s.set_opt("population", self.population);
        s.set_opt("children", self.children);
        s.set_opt("m", self.m);
        s.set_opt("u", self.u);
        s.set_opt("stagnation_window", self.stagnation_window);
    }
}

#[derive(Args)]
struct FitArgs {
    /// Labeled image: palette PNG/PPM, or class-map PGM.
    image: PathBuf,
    #[arg(long, short = 's')]
    seed: Option<u64>,
    /// Write the CSV row here instead of stdout.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Also write an outline overlay PNG.
    #[arg(long)]
    overlay: Option<PathBuf>,
    #[command(flatten)]
    ga: GaFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BatchArgs {
    /// File listing one image path per line; relative paths resolve
    /// against the manifest's directory.
    manifest: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, required = true, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[command(flatten)]
    ga: GaFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SynthArgs {
    /// Output PNG. The ground truth goes next to it as `<stem>.truth.txt`.
    out: PathBuf,
    /// Also write the class map as PGM.
    #[arg(long)]
    class_map: Option<PathBuf>,
    #[arg(long, short = 's')]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Planted ellipse as theta,xc,yc,a,b.
    #[arg(long, value_delimiter = ',')]
    ellipse: Option<Vec<f64>>,
    #[arg(long)]
    ring_thickness: Option<f64>,
    #[arg(long)]
    red_fill: Option<f64>,
    #[arg(long)]
    blob_count: Option<usize>,
    #[arg(long)]
    blob_radius: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    image: PathBuf,
    /// Grid steps as theta,xc,yc,a,b.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OverlayArgs {
    /// Image to draw on.
    image: PathBuf,
    /// Output PNG.
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Ellipse as theta,xc,yc,a,b.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "truth",
        required_unless_present = "truth"
    )]
    params: Option<Vec<f64>>,
    /// Read the ellipse from a truth file.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// One or more results CSVs.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Include the time column.
    #[arg(long)]
    time: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; 2 is kept for invariant violations
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Batch(a) => batch(a),
        Command::Synth(a) => synth(a),
        Command::Oracle(a) => oracle(a),
        Command::Overlay(a) => overlay(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn params_from_slice(v: &[f64]) -> CliResult<EllipseParams> {
    let arr: [f64; 5] = v
        .try_into()
        .map_err(|_| CliError::Input("expected five values: theta,xc,yc,a,b".into()))?;
    Ok(EllipseParams::new(arr[0], arr[1], arr[2], arr[3], arr[4])?)
}

fn is_class_map(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Raster to draw an overlay on: the file itself, or a palette rendering
/// of a class map.
fn overlay_base(path: &Path, palette: &ClassPalette) -> CliResult<RgbImage> {
    if is_class_map(path) {
        let labeled = imaging::load_class_map(path)?;
        Ok(imaging::encode_label_image(
            &labeled,
            palette,
            [255, 255, 255],
        ))
    } else {
        Ok(imaging::load_raster(path)?)
    }
}

fn check_metrics(m: &Metrics) -> CliResult {
    for (name, v) in [("pr", m.pr), ("pg", m.pg), ("pc", m.pc), ("pb", m.pb)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(CliError::Internal(format!("{name} = {v} outside [0, 100]")));
        }
    }
    if m.gf.is_nan() || m.gf < 0.0 {
        return Err(CliError::Internal(format!(
            "gf = {} is not a non-negative number",
            m.gf
        )));
    }
    Ok(())
}

fn check_record(r: &RunRecord) -> CliResult {
    if !r.fitness.is_finite() {
        return Err(CliError::Internal(format!(
            "{}: non-finite fitness",
            r.image
        )));
    }
    check_metrics(&r.metrics)
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

fn fit(args: FitArgs) -> CliResult {
    let mut settings = args.common.settings()?;
    args.ga.apply(&mut settings);
    settings.set_opt("seed", args.seed);
    let palette = settings.palette()?;
    let weights = settings.weights()?;
    let image = imaging::load_labeled(&args.image, &palette)?;
    let config = settings.ga_config(image.width(), image.height())?;
    config.validate_for(&image)?;
    let style = settings.outline()?;
    let base = match &args.overlay {
        Some(_) => Some(overlay_base(&args.image, &palette)?),
        None => None,
    };

    if image.is_flat() {
        eprintln!(
            "warning: {} has no red, green, grey or black pixels; every ellipse scores 0",
            args.image.display()
        );
    }

    let fit = pericardium::run_ga(&image, &weights, &config)?;
    let record = RunRecord::from_fit(args.image.display().to_string(), config.seed, &fit);
    check_record(&record)?;

    if let (Some(path), Some(base)) = (&args.overlay, &base) {
        imaging::save_png(
            &imaging::render_overlay(base, &fit.best.params, &style),
            path,
        )?;
    }
    write_output(args.out.as_deref(), &experiment::csv_string(&[record]))?;

    let m = fit.metrics;
    eprintln!("ellipse  {}", fit.best.params);
    eprintln!("fitness  {:.2}", fit.best.fitness);
    eprintln!(
        "PR {:.2}  PG {:.2}  PC {:.2}  PB {:.2}  GF {:.3}",
        m.pr, m.pg, m.pc, m.pb, m.gf
    );
    eprintln!(
        "{} generations, {} evaluations, {:.3} s",
        fit.generations_run, fit.evaluations, fit.elapsed
    );
    Ok(())
}

fn read_manifest(path: &Path) -> CliResult<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let entries: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| dir.join(l))
        .collect();
    if entries.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no images listed",
            path.display()
        )));
    }
    Ok(entries)
}

fn batch(args: BatchArgs) -> CliResult {
    let mut settings = args.common.settings()?;
    args.ga.apply(&mut settings);
    let palette = settings.palette()?;
    let weights = settings.weights()?;
    // catch config errors once, before any image is read
    settings.ga_config(512, 512)?;

    let mut images = Vec::new();
    for path in read_manifest(&args.manifest)? {
        let name = path.display().to_string();
        let loaded = imaging::load_labeled(&path, &palette)
            .map_err(CliError::from)
            .and_then(|img| {
                settings
                    .ga_config(img.width(), img.height())
                    .and_then(|c| c.validate_for(&img).map_err(CliError::from))
                    .map(|()| img)
            });
        match loaded {
            Ok(image) => {
                if image.is_flat() {
                    eprintln!("warning: {name} has no red, green, grey or black pixels");
                }
                images.push(BatchImage { name, image });
            }
            Err(e) => eprintln!("skipped {name}: {e}"),
        }
    }
    if images.is_empty() {
        return Err(CliError::Input("no usable images in manifest".into()));
    }

    let config_for = |img: &LabeledImage| {
        settings
            .ga_config(img.width(), img.height())
            .expect("validated when loading")
    };
    let outcome = experiment::run_batch(&images, &weights, config_for, &args.seeds);
    for f in &outcome.failures {
        eprintln!("skipped {} (seed {}): {}", f.image, f.seed, f.reason);
    }
    for r in &outcome.records {
        check_record(r)?;
    }

    write_output(
        args.out.as_deref(),
        &experiment::csv_string(&outcome.records),
    )?;
    let table = AggregateReport::from_records(&outcome.records).render(true);
    if args.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

fn truth_path(png: &Path) -> PathBuf {
    let stem = png
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    png.with_file_name(format!("{stem}.truth.txt"))
}

fn synth(args: SynthArgs) -> CliResult {
    let mut settings = args.common.settings()?;
    settings.set_opt("seed", args.seed);
    settings.set_opt("width", args.width);
    settings.set_opt("height", args.height);
    settings.set_opt("ring_thickness", args.ring_thickness);
    settings.set_opt("red_fill", args.red_fill);
    settings.set_opt("blob_count", args.blob_count);
    settings.set_opt("blob_radius", args.blob_radius);
    settings.set_opt("noise", args.noise);
    if let Some(e) = &args.ellipse {
        params_from_slice(e)?;
        for (key, v) in ["theta", "xc", "yc", "a", "b"].into_iter().zip(e) {
            settings.set_opt(key, Some(v));
        }
    }
    let spec = settings.phantom()?;
    let palette = settings.palette()?;
    let (labeled, truth) = generate_phantom(&spec)?;

    let raster = imaging::encode_label_image(&labeled, &palette, [255, 255, 255]);
    imaging::save_png(&raster, &args.out)?;
    let sidecar = truth_path(&args.out);
    synthesis::write_truth(&truth, &sidecar)?;
    if let Some(p) = &args.class_map {
        imaging::save_class_map(&labeled, p)?;
    }
    eprintln!("wrote {} and {}", args.out.display(), sidecar.display());
    Ok(())
}

fn oracle(args: OracleArgs) -> CliResult {
    let mut settings = args.common.settings()?;
    if let Some(steps) = &args.steps {
        if steps.len() != 5 {
            return Err(CliError::Input(
                "--steps expects five values: theta,xc,yc,a,b".into(),
            ));
        }
        for (key, v) in ["theta_step", "xc_step", "yc_step", "a_step", "b_step"]
            .into_iter()
            .zip(steps)
        {
            settings.set_opt(key, Some(v));
        }
    }
    let palette = settings.palette()?;
    let weights = settings.weights()?;
    let image = imaging::load_labeled(&args.image, &palette)?;
    let grid = settings.grid(image.width(), image.height())?;
    let result = synthesis::grid_search(&image, &weights, &grid)?;
    let metrics = pericardium::compute_metrics(&image, &result.best);
    check_metrics(&metrics)?;

    let p = result.best;
    println!(
        "theta={}\nxc={}\nyc={}\na={}\nb={}",
        p.theta, p.x_c, p.y_c, p.a, p.b
    );
    println!("fitness={}", result.fitness);
    println!("evaluated={}", result.evaluated);
    eprintln!(
        "PR {:.2}  PG {:.2}  PC {:.2}  PB {:.2}  GF {:.3}",
        metrics.pr, metrics.pg, metrics.pc, metrics.pb, metrics.gf
    );
    Ok(())
}

fn overlay(args: OverlayArgs) -> CliResult {
    let mut settings = args.common.settings()?;
    settings.set_opt("epsilon", args.epsilon);
    let style = settings.outline()?;
    let palette = settings.palette()?;
    let params = match (&args.params, &args.truth) {
        (Some(v), _) => params_from_slice(v)?,
        (None, Some(t)) => synthesis::read_truth(t)?,
        (None, None) => unreachable!("clap requires one of --params and --truth"),
    };
    let base = overlay_base(&args.image, &palette)?;
    imaging::save_png(&imaging::render_overlay(&base, &params, &style), &args.out)?;
    Ok(())
}

fn report(args: ReportArgs) -> CliResult {
    let mut records = Vec::new();
    for path in &args.csv {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut rows = experiment::read_csv(file)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        records.append(&mut rows);
    }
    if records.is_empty() {
        return Err(CliError::Input("no runs in input".into()));
    }
    print!(
        "{}",
        AggregateReport::from_records(&records).render(args.time)
    );
    Ok(())
}
