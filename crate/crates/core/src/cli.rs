//! Command-line surface. Each subcommand runs one pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
//! Failures print a single `error: ...` line to stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::augment::{augment_pipeline, AugmentSpec, SliceSample};
use crate::io::{
    generate_phantom, load_checkpoint, read_lv_flags, save_checkpoint, write_report, Dataset, IoError, PhantomSpec,
    SliceOrder, MANIFEST_FILE,
};
use crate::metrics::compare_stacks;
use crate::model::{segment_stack, ModelConfig, ModelError};
use crate::numfmt::format_sig;
use crate::tensor::TensorError;
use crate::train::{train_with_checkpoints, TrainConfig, TrainError};
use crate::volumetrics::{atrial_volume_curve, cohort_compare, ejection_fractions, find_landmarks, VolumetricsError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "seganet", version, about = "Left-atrium segmentation and volumetrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on every annotated slice of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Encode channel widths, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [16, 32, 64, 128, 256])]
        channels: Vec<usize>,
        /// Train on the raw slices.
        #[arg(long)]
        no_augment: bool,
        /// Also write `<out stem>.<iteration>.sgm` every N iterations.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Loss trace CSV; defaults to the model path with extension `loss.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Segment every phase image of a dataset into a new dataset directory.
    Segment {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Compare predicted masks with ground truth, one CSV row per phase.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Atrial volume curve, landmarks, EF/aEF and a plot.
    Volumetrics {
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        lv_flags: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
        /// Odd moving-average window for landmark detection; 1 disables it.
        #[arg(long, default_value_t = 1)]
        smooth: usize,
    },
    /// Generate a synthetic dataset from a spec file.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write PGM previews of augmented image/mask pairs.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Preview at most this many slices.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Two-group t-test on one numeric CSV column per group.
    Cohort {
        #[arg(long)]
        group_a: PathBuf,
        #[arg(long)]
        group_b: PathBuf,
        #[arg(long)]
        paired: bool,
        /// Column name; defaults to the last column.
        #[arg(long)]
        column: Option<String>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Data(_) => EXIT_DATA,
            Self::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Data(m) | Self::Numeric(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Model(m) => m.into(),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => t.into(),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFinite(_) => Self::Numeric(e.to_string()),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss(_) | TrainError::NonFiniteGradient(_) => Self::Numeric(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Tensor(t) => t.into(),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<VolumetricsError> for CliError {
    fn from(e: VolumetricsError) -> Self {
        Self::Data(e.to_string())
    }
}

fn data_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { data, out, iters, batch, lr, seed, channels, no_augment, checkpoint_every, trace } => {
            let trace = trace.unwrap_or_else(|| out.with_extension("loss.csv"));
            train_cmd(&data, &out, &trace, iters, batch, lr, seed, &channels, no_augment, checkpoint_every)
        }
        Command::Segment { model, data, out, threshold } => segment_cmd(&model, &data, &out, threshold),
        Command::Metrics { pred, gt, out } => metrics_cmd(&pred, &gt, &out),
        Command::Volumetrics { masks, lv_flags, out_prefix, smooth } => {
            volumetrics_cmd(&masks, &lv_flags, &out_prefix, smooth)
        }
        Command::Phantom { spec, out } => {
            let spec = PhantomSpec::read(&spec)?;
            let phantom = generate_phantom(&spec)?;
            phantom.write(&out)?;
            println!("wrote {} phases to {}", spec.phases, out.display());
            Ok(())
        }
        Command::Augment { data, seed, out, limit } => augment_cmd(&data, seed, &out, limit),
        Command::Cohort { group_a, group_b, paired, column } => {
            cohort_cmd(&group_a, &group_b, paired, column.as_deref())
        }
    }
}

/// Dataset directories under `dir`: `dir` itself when it holds a manifest,
/// otherwise its immediate subdirectories that do, sorted by name.
fn dataset_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| data_err(format!("{}: {e}", dir.display())))?;
    let mut dirs: Vec<PathBuf> =
        entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(MANIFEST_FILE).is_file()).collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(data_err(format!("{}: no {MANIFEST_FILE} found", dir.display())));
    }
    Ok(dirs)
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    data: &Path,
    out: &Path,
    trace_path: &Path,
    iters: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    channels: &[usize],
    no_augment: bool,
    checkpoint_every: Option<usize>,
) -> Result<(), CliError> {
    let mut slices: Vec<SliceSample> = Vec::new();
    for dir in dataset_dirs(data)? {
        slices.extend(Dataset::load(&dir)?.training_slices()?);
    }
    let augment = if no_augment { AugmentSpec::disabled() } else { AugmentSpec { seed, ..AugmentSpec::default() } };
    let config = TrainConfig {
        iterations: iters,
        batch_size: batch,
        learning_rate: lr,
        seed,
        augment,
        checkpoint_every,
        ..TrainConfig::default()
    };
    let mut write_error = None;
    let (params, trace) = train_with_checkpoints(ModelConfig::with_channels(channels), &config, &slices, |it, p| {
        if it < iters && write_error.is_none() {
            write_error = save_checkpoint(&out.with_extension(format!("{it}.sgm")), p).err();
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    save_checkpoint(out, &params)?;
    std::fs::write(trace_path, trace.to_csv()).map_err(|e| data_err(format!("{}: {e}", trace_path.display())))?;
    println!(
        "trained {iters} iterations on {} slices; final loss {}",
        slices.len(),
        trace.last().map_or("n/a".into(), |l| format_sig(l, 6))
    );
    Ok(())
}

fn segment_cmd(model: &Path, data: &Path, out: &Path, threshold: f64) -> Result<(), CliError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(data_err(format!("threshold {threshold} outside (0, 1)")));
    }
    let params = load_checkpoint(model)?;
    let mut ds = Dataset::load(data)?;
    if ds.images.is_empty() {
        return Err(data_err(format!("{}: no images to segment", data.display())));
    }
    ds.masks.clear();
    for (&p, img) in &ds.images {
        ds.masks.insert(p, segment_stack(&params, img, threshold)?);
    }
    ds.manifest.slice_order = SliceOrder::ApexToBase;
    ds.save(out)?;
    println!("segmented {} phases into {}", ds.masks.len(), out.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format_sig(x, 6))
}

fn metrics_cmd(pred: &Path, gt: &Path, out: &Path) -> Result<(), CliError> {
    let pairs: Vec<(PathBuf, PathBuf)> = if pred.join(MANIFEST_FILE).is_file() {
        vec![(pred.to_path_buf(), gt.to_path_buf())]
    } else {
        dataset_dirs(pred)?
            .into_iter()
            .map(|p| {
                let name = p.file_name().map(|n| n.to_os_string()).unwrap_or_default();
                let g = gt.join(name);
                (p, g)
            })
            .collect()
    };
    let mut csv = String::from("subject,phase,dice,hd_mm,mcd_mm\n");
    let mut rows = 0;
    for (pdir, gdir) in pairs {
        let (p, g) = (Dataset::load(&pdir)?, Dataset::load(&gdir)?);
        let subject = g.subject(&gdir);
        for (phase, gm) in &g.masks {
            let Some(pm) = p.masks.get(phase) else { continue };
            let r = compare_stacks(pm, gm).map_err(|e| data_err(format!("{subject} phase {phase}: {e}")))?;
            writeln!(
                csv,
                "{subject},{phase},{},{},{}",
                format_sig(r.dice, 6),
                fmt_opt(r.hausdorff_mm),
                fmt_opt(r.mcd_mm)
            )
            .unwrap();
            rows += 1;
        }
    }
    if rows == 0 {
        return Err(data_err("no phase has masks in both prediction and ground truth"));
    }
    std::fs::write(out, csv).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    println!("wrote {rows} rows to {}", out.display());
    Ok(())
}

fn volumetrics_cmd(masks: &Path, lv_flags: &Path, prefix: &Path, smooth: usize) -> Result<(), CliError> {
    let ds = Dataset::load(masks)?;
    let mut flags = read_lv_flags(lv_flags)?;
    if ds.manifest.slice_order == SliceOrder::BaseToApex {
        flags.reverse();
    }
    let phases: Vec<_> = ds.masks.values().cloned().collect();
    if phases.len() != ds.manifest.phases || ds.masks.keys().enumerate().any(|(i, &p)| i != p) {
        return Err(data_err(format!(
            "{}: masks cover {} of {} phases",
            masks.display(),
            phases.len(),
            ds.manifest.phases
        )));
    }
    let curve = atrial_volume_curve(&phases, &flags)?;
    let l = find_landmarks(&curve, smooth)?;
    let b = ejection_fractions(&l)?;
    if !(b.ef_percent.is_finite() && b.aef_percent.is_finite()) {
        return Err(CliError::Numeric("non-finite ejection fraction".into()));
    }
    let paths = write_report(&curve, &l, &b, prefix)?;
    println!(
        "max phase {} ({} mL), min phase {} ({} mL), preA phase {} ({} mL)",
        l.max_phase,
        format_sig(l.v_max_ml, 6),
        l.min_phase,
        format_sig(l.v_min_ml, 6),
        l.prea_phase,
        format_sig(l.v_prea_ml, 6)
    );
    println!("EF {} %, aEF {} %", format_sig(b.ef_percent, 6), format_sig(b.aef_percent, 6));
    println!("wrote {}, {}, {}", paths.curve_csv.display(), paths.summary_csv.display(), paths.svg.display());
    Ok(())
}

/// Binary PGM with values scaled from `[lo, hi]` to `0..=255`.
fn pgm(h: usize, w: usize, values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    out.extend(values.map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

fn augment_cmd(data: &Path, seed: u64, out: &Path, limit: Option<usize>) -> Result<(), CliError> {
    let ds = Dataset::load(data)?;
    let slices = ds.training_slices()?;
    let spec = AugmentSpec { seed, ..AugmentSpec::default() };
    let mut rng = spec.rng();
    std::fs::create_dir_all(out).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    let n = limit.unwrap_or(slices.len()).min(slices.len());
    for (i, s) in slices.iter().take(n).enumerate() {
        let a = augment_pipeline(s, &spec, &mut rng).map_err(data_err)?;
        let (h, w) = (a.height(), a.width());
        let (lo, hi) = s
            .image()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v as f64), hi.max(v as f64)));
        let files = [
            (format!("{i:04}_image.pgm"), pgm(h, w, a.image().iter().map(|&v| v as f64), lo, hi)),
            (format!("{i:04}_mask.pgm"), pgm(h, w, a.mask().iter().map(|&m| m as f64), 0.0, 1.0)),
        ];
        for (name, bytes) in files {
            let path = out.join(name);
            std::fs::write(&path, bytes).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        }
    }
    println!("wrote {n} augmented pairs to {}", out.display());
    Ok(())
}

/// Reads one numeric column. The first row is a header unless every field
/// in it parses as a number.
fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>, CliError> {
    let err = |msg: String| data_err(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut rows = reader.records();
    let first = match rows.next() {
        Some(r) => r.map_err(|e| err(e.to_string()))?,
        None => return Err(err("empty file".into())),
    };
    let header = first.iter().any(|f| f.parse::<f64>().is_err());
    let idx = match (column, header) {
        (Some(name), true) => {
            first.iter().position(|f| f == name).ok_or_else(|| err(format!("no column named {name:?}")))?
        }
        (Some(name), false) => return Err(err(format!("no header row to find column {name:?}"))),
        (None, _) => first.len().saturating_sub(1),
    };
    let mut values = Vec::new();
    let data_rows = std::iter::once(Ok(first)).filter(|_| !header).chain(rows);
    for (line, row) in data_rows.enumerate() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let field = row.get(idx).ok_or_else(|| err(format!("row {} has no column {}", line + 1, idx + 1)))?;
        let v = field.parse::<f64>().map_err(|_| err(format!("row {}: {field:?} is not a number", line + 1)))?;
        values.push(v);
    }
    Ok(values)
}

fn cohort_cmd(a: &Path, b: &Path, paired: bool, column: Option<&str>) -> Result<(), CliError> {
    let (va, vb) = (read_column(a, column)?, read_column(b, column)?);
    let t = cohort_compare(&va, &vb, paired)?;
    if t.p.is_nan() {
        return Err(CliError::Numeric("t-test produced NaN".into()));
    }
    println!("test,{}", if paired { "paired" } else { "welch" });
    for (name, g) in [("a", &t.a), ("b", &t.b)] {
        println!("{name}_n,{}", g.n);
        println!("{name}_mean,{}", format_sig(g.mean, 6));
        println!("{name}_std,{}", format_sig(g.std, 6));
    }
    println!("t,{}", format_sig(t.t, 6));
    println!("df,{}", format_sig(t.df, 6));
    println!("p,{}", format_sig(t.p, 6));
    Ok(())
}
