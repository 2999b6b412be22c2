//! Command-line surface: `train`, `translate`, `interpolate`, `evaluate` and `inspect`.

use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use clap::{Args, Parser, Subcommand};
use edit_core::data::{self, DomainDataset, Split};
use edit_core::evaluation;
use edit_core::trainer::{load_training_data, Trainer};
use edit_core::{Config, DomainLabel, EditError, EditModel, Result, TrainState};

/// Environment variable that overrides the dataset root.
pub const DATA_ROOT_ENV: &str = "EDIT_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "edit", version, about = "Exemplar-domain aware image-to-image translation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Compute device; only `cpu` is available.
    #[arg(long, global = true, default_value = "cpu")]
    pub device: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a config file, or resume from a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Directory for the CSV log, sample grids and checkpoints.
        #[arg(long, default_value = "edit-run")]
        output: PathBuf,
        /// Stop after this many steps even if epochs remain.
        #[arg(long)]
        steps: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Translate one image into a domain, styled after an exemplar.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Style exemplar; a black image is used when omitted.
        #[arg(long)]
        exemplar: Option<PathBuf>,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Blend the generated parameters of two exemplars and write one frame per step.
    Interpolate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "exemplar-a")]
        exemplar_a: PathBuf,
        #[arg(long = "exemplar-b")]
        exemplar_b: PathBuf,
        #[arg(long)]
        domain: String,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        /// Directory receiving `frame_000.png`, `frame_001.png`, ...
        #[arg(long)]
        output: PathBuf,
        /// Also write all frames side by side into this image.
        #[arg(long)]
        filmstrip: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Content/style errors, parameter counts and timing over a test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset root with `<domain>/test/*.png`; synthetic test data when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// `source:target` domain names.
        #[arg(long = "domain-pair")]
        domain_pair: String,
        /// Table output; a `.kv` file is written next to it.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print parameter counts and the dynamic block list of a checkpoint.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Process exit code for an error.
pub fn exit_code(e: &EditError) -> i32 {
    match e {
        EditError::Usage(_) | EditError::Config(_) | EditError::Domain(_) => 2,
        EditError::Data { .. } | EditError::Io(_) | EditError::Format(_) | EditError::Integrity(_) => 3,
        EditError::Numeric(_) => 4,
        EditError::Shape(_) | EditError::Tensor(_) => 1,
    }
}

/// Single-line, machine-parsable error message.
pub fn error_line(e: &EditError) -> String {
    let message = e.message();
    let msg = message.lines().next().unwrap_or_default();
    format!("error[{}]: {msg}", e.kind())
}

fn usage(msg: impl Into<String>) -> EditError {
    EditError::Usage(msg.into())
}

fn device(common: &Common) -> Result<Device> {
    match common.device.as_str() {
        "cpu" => Ok(Device::Cpu),
        other => Err(usage(format!("unsupported device '{other}' (available: cpu)"))),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(EditError::data(path, format!("{what} not found")))
    }
}

fn load_model(path: &Path, device: &Device) -> Result<EditModel> {
    require_file(path, "checkpoint")?;
    Ok(TrainState::load(path, device)?.model().clone())
}

/// Largest multiple of 4 not above `n`, at least 16.
fn fit_size(n: u32) -> u32 {
    (n - n % 4).max(16)
}

/// Reads an input image, resizing it to a multiple of 4 when necessary.
fn read_input(path: &Path, model: &EditModel) -> Result<Tensor> {
    let img = data::read_rgb(path)?;
    let (w, h) = img.dimensions();
    let (fw, fh) = (fit_size(w), fit_size(h));
    let img = if (fw, fh) != (w, h) {
        eprintln!("warning: {}: {w}x{h} is not a multiple of 4, resizing to {fw}x{fh}", path.display());
        data::resize(&img, fw, fh)
    } else {
        img
    };
    Ok(data::image_to_tensor(&img, model.device())?.to_dtype(model.dtype())?)
}

/// Exemplars are resized to the training resolution.
fn read_exemplar(path: &Path, model: &EditModel) -> Result<Tensor> {
    let img = data::read_rgb(path)?;
    let size = model.config().image_size as u32;
    if img.dimensions() != (size, size) {
        log::info!("{}: resizing exemplar to {size}x{size}", path.display());
    }
    Ok(data::image_to_tensor(&data::resize_square(&img, size), model.device())?.to_dtype(model.dtype())?)
}

/// The all-black exemplar used for domain-only translation.
pub fn black_exemplar(model: &EditModel) -> Result<Tensor> {
    let s = model.config().image_size;
    Ok(Tensor::full(-1f32, (1, 3, s, s), model.device())?.to_dtype(model.dtype())?)
}

fn write_image(t: &Tensor, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    data::tensor_to_image(t)?
        .save(path)
        .map_err(|e| EditError::data(path, e))
}

fn resolve(model: &EditModel, name: &str) -> Result<DomainLabel> {
    model.registry().resolve(name)
}

fn data_root_override() -> Option<String> {
    std::env::var(DATA_ROOT_ENV).ok().filter(|s| !s.is_empty())
}

pub fn run_train(
    config: Option<&Path>,
    resume: Option<&Path>,
    output: &Path,
    steps: Option<u64>,
    common: &Common,
) -> Result<()> {
    let device = device(common)?;
    let state = match (config, resume) {
        (_, Some(ckpt)) => {
            require_file(ckpt, "checkpoint")?;
            if config.is_some() {
                log::warn!("--config is ignored when resuming; the checkpoint carries its config");
            }
            TrainState::load(ckpt, &device)?
        }
        (Some(path), None) => {
            require_file(path, "config")?;
            let mut cfg = Config::load(path)?;
            if let Some(root) = data_root_override() {
                cfg.data_root = Some(root);
            }
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            TrainState::new(&cfg, candle_core::DType::F32, &device)?
        }
        (None, None) => return Err(usage("train needs --config or --resume")),
    };
    let mut cfg = state.config().clone();
    if let Some(root) = data_root_override() {
        cfg.data_root = Some(root);
    }
    let datasets = load_training_data(&cfg)?;
    let mut trainer = Trainer::new(state, datasets)?.with_output(output)?;
    log::info!(
        "training {} steps per epoch, {} epochs, from step {}",
        trainer.steps_per_epoch(),
        cfg.total_epochs,
        trainer.state().step()
    );
    let reports = trainer.run(steps)?;
    if let Some(last) = reports.last() {
        println!(
            "step {} cyc={:.4} sty={:.4} adv_d={:.4} adv_g={:.4} total={:.4}",
            trainer.state().step(),
            last.cyc,
            last.sty,
            last.adv_d,
            last.adv_g,
            last.total
        );
    }
    println!("checkpoint: {}", output.join("latest.ckpt").display());
    Ok(())
}

pub fn run_translate(
    checkpoint: &Path,
    input: &Path,
    exemplar: Option<&Path>,
    domain: &str,
    output: &Path,
    common: &Common,
) -> Result<()> {
    let device = device(common)?;
    require_file(input, "input image")?;
    if let Some(e) = exemplar {
        require_file(e, "exemplar image")?;
    }
    let model = load_model(checkpoint, &device)?;
    let label = resolve(&model, domain)?;
    let x = read_input(input, &model)?;
    let ex = match exemplar {
        Some(p) => read_exemplar(p, &model)?,
        None => black_exemplar(&model)?,
    };
    write_image(&model.translate(&x, &ex, &label)?, output)
}

/// Writes `steps` frames for blend factors `0, 1/(steps-1), ..., 1`.
#[allow(clippy::too_many_arguments)]
pub fn run_interpolate(
    checkpoint: &Path,
    input: &Path,
    exemplar_a: &Path,
    exemplar_b: &Path,
    domain: &str,
    steps: usize,
    output: &Path,
    filmstrip: Option<&Path>,
    common: &Common,
) -> Result<()> {
    let device = device(common)?;
    if steps < 2 {
        return Err(usage(format!("--steps must be at least 2, got {steps}")));
    }
    require_file(input, "input image")?;
    require_file(exemplar_a, "exemplar image")?;
    require_file(exemplar_b, "exemplar image")?;
    let model = load_model(checkpoint, &device)?;
    let label = resolve(&model, domain)?;
    let (da, db) = (data::read_rgb(exemplar_a)?.dimensions(), data::read_rgb(exemplar_b)?.dimensions());
    if da != db {
        eprintln!("warning: exemplar sizes differ ({}x{} vs {}x{}), both resized", da.0, da.1, db.0, db.1);
    }
    let x = read_input(input, &model)?;
    let (ea, eb) = (read_exemplar(exemplar_a, &model)?, read_exemplar(exemplar_b, &model)?);
    let frames = model.interpolation_frames(&x, &ea, &eb, &label, steps)?;
    std::fs::create_dir_all(output)?;
    for (i, frame) in frames.iter().enumerate() {
        write_image(frame, &output.join(frame_name(i)))?;
    }
    if let Some(path) = filmstrip {
        write_image(&Tensor::cat(&frames, 3)?, path)?;
    }
    Ok(())
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:03}.png")
}

pub fn run_evaluate(
    checkpoint: &Path,
    dataset: Option<&Path>,
    domain_pair: &str,
    output: &Path,
    common: &Common,
) -> Result<()> {
    let device = device(common)?;
    let (src, tgt) = domain_pair
        .split_once(':')
        .ok_or_else(|| usage(format!("--domain-pair must look like source:target, got '{domain_pair}'")))?;
    let model = load_model(checkpoint, &device)?;
    let (ls, lt) = (resolve(&model, src)?, resolve(&model, tgt)?);
    if ls.index() == lt.index() {
        return Err(usage("source and target domains must differ"));
    }
    let root = dataset.map(Path::to_path_buf).or_else(|| data_root_override().map(PathBuf::from));
    let cfg = model.config();
    let (sources, targets) = match root {
        Some(root) => (
            DomainDataset::from_dir(&root, ls.clone(), Split::Test)?,
            DomainDataset::from_dir(&root, lt.clone(), Split::Test)?,
        ),
        None => {
            let all = data::synthetic_domains(
                model.registry(),
                Split::Test,
                cfg.synthetic_per_domain.min(16),
                cfg.image_size,
                cfg.seed,
            )?;
            (all[ls.index()].clone(), all[lt.index()].clone())
        }
    };
    let report = evaluation::evaluate(&model, &sources, &targets, &lt, None)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let table = report.to_table();
    std::fs::write(output, &table)?;
    std::fs::write(output.with_extension("kv"), report.to_kv())?;
    print!("{table}");
    Ok(())
}

pub fn inspect_text(model: &EditModel) -> String {
    let c = model.count_params();
    let mut s = format!(
        "domains: {}\nshared_param_count={}\ndynamic_param_count={}\nparamnet_param_count={}\ndiscriminator_param_count={}\ndynamic blocks:\n",
        model.registry().names().join(", "),
        c.shared,
        c.dynamic,
        c.paramnet,
        c.discriminator
    );
    let spec = model.generator().spec();
    for (bi, range) in spec.dynamic_layout() {
        let b = &spec.blocks()[bi];
        s.push_str(&format!(
            "  b{bi:02} {:?} {}->{} k{} params [{}, {})\n",
            b.kind, b.in_ch, b.out_ch, b.kernel, range.start, range.end
        ));
    }
    s
}

pub fn run_inspect(checkpoint: &Path, common: &Common) -> Result<()> {
    let device = device(common)?;
    let state = {
        require_file(checkpoint, "checkpoint")?;
        TrainState::load(checkpoint, &device)?
    };
    print!("{}", inspect_text(state.model()));
    println!("step={}", state.step());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, resume, output, steps, common } => {
            run_train(config.as_deref(), resume.as_deref(), &output, steps, &common)
        }
        Command::Translate { checkpoint, input, exemplar, domain, output, common } => {
            run_translate(&checkpoint, &input, exemplar.as_deref(), &domain, &output, &common)
        }
        Command::Interpolate {
            checkpoint,
            input,
            exemplar_a,
            exemplar_b,
            domain,
            steps,
            output,
            filmstrip,
            common,
        } => run_interpolate(
            &checkpoint,
            &input,
            &exemplar_a,
            &exemplar_b,
            &domain,
            steps,
            &output,
            filmstrip.as_deref(),
            &common,
        ),
        Command::Evaluate { checkpoint, dataset, domain_pair, output, common } => {
            run_evaluate(&checkpoint, dataset.as_deref(), &domain_pair, &output, &common)
        }
        Command::Inspect { checkpoint, common } => run_inspect(&checkpoint, &common),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line(&EditError::Usage(first)));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}
