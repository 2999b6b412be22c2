//! Alternating generator / discriminator optimization with a replay buffer of
//! past fakes, a linear learning-rate decay and resumable checkpoints.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{Backbone, FeatureExtractor};
use crate::checkpoint::TensorFile;
use crate::config::{AdversarialMode, Config};
use crate::data::{self, DomainDataset, DomainSampler, Split};
use crate::domain::DomainLabel;
use crate::error::{EditError, Result};
use crate::losses::{self, LossReport};
use crate::model::{backbone_spec, EditModel};
use crate::optim::{grad_norm, Adam};
use crate::params::ParamSet;
use crate::perceptual::{channel_stats, FeatureStack};

/// Seed offset of the trainer's own random stream (buffer swaps, flips).
const STATE_SEED_OFFSET: u64 = 0x7a1e_5eed;

/// Pool of past fakes shown to the discriminator.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Tensor>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            storage: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn storage(&self) -> &[Tensor] {
        &self.storage
    }

    /// Exchange rule for one `[1, C, H, W]` image. Below capacity the image is
    /// stored and returned. At capacity, `swap = Some(i)` replaces slot `i`
    /// and returns its old content; `None` returns `fresh` unchanged.
    pub fn exchange(&mut self, fresh: &Tensor, swap: Option<usize>) -> Tensor {
        let fresh = fresh.detach();
        if self.storage.len() < self.capacity {
            self.storage.push(fresh.clone());
            return fresh;
        }
        match swap {
            Some(i) => std::mem::replace(&mut self.storage[i % self.capacity], fresh),
            None => fresh,
        }
    }

    /// Runs every sample of an `[N, C, H, W]` batch through the pool.
    pub fn query<R: Rng>(&mut self, fresh: &Tensor, rng: &mut R) -> Result<Tensor> {
        let n = fresh.dim(0)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let img = fresh.narrow(0, i, 1)?;
            let swap = if self.storage.len() >= self.capacity && rng.gen_bool(0.5) {
                Some(rng.gen_range(0..self.capacity))
            } else {
                None
            };
            out.push(self.exchange(&img, swap));
        }
        Ok(Tensor::cat(&out, 0)?)
    }

    fn restore(&mut self, images: Vec<Tensor>) -> Result<()> {
        if images.len() > self.capacity {
            return Err(EditError::Integrity(format!(
                "replay buffer holds {} images, capacity {}",
                images.len(),
                self.capacity
            )));
        }
        self.storage = images;
        Ok(())
    }
}

/// Constant rate, then linear decay to zero at `total_epochs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub total_epochs: usize,
    pub decay_start_epoch: usize,
}

impl LrSchedule {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            base_lr: cfg.lr,
            total_epochs: cfg.total_epochs,
            decay_start_epoch: cfg.decay_start_epoch,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        if epoch > self.total_epochs {
            return Err(EditError::domain(format!(
                "epoch {epoch} outside [0, {}]",
                self.total_epochs
            )));
        }
        if epoch < self.decay_start_epoch {
            return Ok(self.base_lr);
        }
        let span = (self.total_epochs - self.decay_start_epoch) as f64;
        if span == 0.0 {
            return Ok(0.0);
        }
        Ok(self.base_lr * (self.total_epochs - epoch) as f64 / span)
    }
}

/// Weights and switches of one step; defaults come from the config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub lambda_cyc: f64,
    pub eta_sty: f64,
    pub mode: AdversarialMode,
    pub grad_clip: Option<f64>,
    pub update_discriminator: bool,
}

impl StepOptions {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            lambda_cyc: cfg.lambda_cyc,
            eta_sty: cfg.eta_sty,
            mode: cfg.adversarial_mode,
            grad_clip: cfg.grad_clip,
            update_discriminator: true,
        }
    }
}

/// Generator-side forward pass of one step.
#[derive(Debug, Clone)]
pub struct GeneratorPass {
    pub total: Tensor,
    pub cyc: Tensor,
    pub sty: Tensor,
    pub adv_g: Tensor,
    /// `x` rendered in domain `b` with exemplar `y`.
    pub fake_y: Tensor,
    /// `y` rendered in domain `a` with exemplar `x`.
    pub fake_x: Tensor,
    pub x_cycled: Tensor,
    pub y_cycled: Tensor,
}

/// Builds the full generator objective for a pair of batches: each batch is
/// the exemplar for translating the other, and each cycle returns with the
/// original image as exemplar.
pub fn generator_pass(
    model: &EditModel,
    x: &Tensor,
    y: &Tensor,
    la: &DomainLabel,
    lb: &DomainLabel,
    opts: &StepOptions,
) -> Result<GeneratorPass> {
    let backbone = model.backbone();
    let layers = &model.config().style_layers;
    let taps_x = backbone.taps(x)?;
    let taps_y = backbone.taps(y)?;
    let p_x = model.param_net().generate_from_taps(&taps_x, la)?;
    let p_y = model.param_net().generate_from_taps(&taps_y, lb)?;

    let g = model.generator();
    let fake_y = g.forward(x, &p_y)?;
    let fake_x = g.forward(y, &p_x)?;
    let x_cycled = g.forward(&fake_y, &p_x)?;
    let y_cycled = g.forward(&fake_x, &p_y)?;

    let cyc = losses::cycle_loss(&x_cycled, x, &y_cycled, y)?;
    let stats = |taps: &[Tensor]| channel_stats(&FeatureStack::select(taps, layers)?);
    let sty = (losses::style_loss(&stats(&backbone.taps(&fake_x)?)?, &stats(&taps_x)?.detach())?
        + losses::style_loss(&stats(&backbone.taps(&fake_y)?)?, &stats(&taps_y)?.detach())?)?;

    let d = model.discriminator();
    let adv_g = losses::generator_adv_loss(
        &d.discriminate(&fake_y, lb)?,
        &d.discriminate(&fake_x, la)?,
        opts.mode,
    )?;
    let total = losses::total_loss_tensor(&adv_g, &cyc, &sty, opts.lambda_cyc, opts.eta_sty)?;
    Ok(GeneratorPass {
        total,
        cyc,
        sty,
        adv_g,
        fake_y,
        fake_x,
        x_cycled,
        y_cycled,
    })
}

/// Losses and detached fakes of one completed step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub report: LossReport,
    pub fake_y: Tensor,
    pub fake_x: Tensor,
}

/// Everything needed to continue training bit-for-bit.
#[derive(Debug)]
pub struct TrainState {
    model: EditModel,
    pub options: StepOptions,
    gen_opt: Adam,
    disc_opt: Adam,
    buffers: Vec<ReplayBuffer>,
    rng: ChaCha8Rng,
    step: u64,
    /// Batches drawn from each domain so far.
    draws: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    step: u64,
    dtype: String,
    generator_opt_steps: u64,
    discriminator_opt_steps: u64,
    rng_seed: String,
    rng_word_pos: String,
    draws: Vec<u64>,
    buffer_lens: Vec<usize>,
    config: Config,
}

fn dtype_name(d: DType) -> &'static str {
    match d {
        DType::F64 => "f64",
        _ => "f32",
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Result<[u8; 32]> {
    let bad = || EditError::Integrity(format!("bad rng seed '{s}'"));
    if s.len() != 64 {
        return Err(bad());
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    Ok(out)
}

fn moment_names(prefix: &str, name: &str) -> (String, String) {
    (format!("optim.{prefix}.m.{name}"), format!("optim.{prefix}.v.{name}"))
}

impl TrainState {
    pub fn new(cfg: &Config, dtype: DType, device: &Device) -> Result<Self> {
        Self::from_model(EditModel::init(cfg, dtype, device)?)
    }

    pub fn from_model(model: EditModel) -> Result<Self> {
        let cfg = model.config();
        let d = model.registry().len();
        Ok(Self {
            options: StepOptions::from_config(cfg),
            gen_opt: Adam::default(),
            disc_opt: Adam::default(),
            buffers: (0..d).map(|_| ReplayBuffer::new(cfg.buffer_capacity)).collect(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(STATE_SEED_OFFSET)),
            step: 0,
            draws: vec![0; d],
            model,
        })
    }

    pub fn model(&self) -> &EditModel {
        &self.model
    }

    pub fn config(&self) -> &Config {
        self.model.config()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn buffers(&self) -> &[ReplayBuffer] {
        &self.buffers
    }

    pub fn draws(&self) -> &[u64] {
        &self.draws
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn generator_optimizer(&self) -> &Adam {
        &self.gen_opt
    }

    pub fn discriminator_optimizer(&self) -> &Adam {
        &self.disc_opt
    }

    /// One generator + parameter-network update followed by one
    /// discriminator update on replayed fakes.
    pub fn train_step(
        &mut self,
        x: &Tensor,
        y: &Tensor,
        la: &DomainLabel,
        lb: &DomainLabel,
        lr: f64,
    ) -> Result<StepOutcome> {
        if la.index() == lb.index() {
            return Err(EditError::domain(format!(
                "train step needs two distinct domains, got '{}' twice",
                la.name()
            )));
        }
        let dtype = self.model.dtype();
        let (x, y) = (x.to_dtype(dtype)?, y.to_dtype(dtype)?);
        let opts = self.options;
        let step = self.step + 1;

        let pass = generator_pass(&self.model, &x, &y, la, lb, &opts)?;
        let gen_sets = [self.model.generator().params(), self.model.param_net().params()];
        let grads = pass.total.backward()?;
        let g_norm = grad_norm(&gen_sets, &grads)?;
        let mut report = LossReport {
            cyc: losses::scalar(&pass.cyc)?,
            sty: losses::scalar(&pass.sty)?,
            adv_g: losses::scalar(&pass.adv_g)?,
            total: losses::scalar(&pass.total)?,
            adv_d: f64::NAN,
        };
        let numeric = |report: &LossReport, g: f64, d: f64| {
            EditError::Numeric(format!(
                "non-finite loss at step {step}: cyc={} sty={} adv_g={} adv_d={} total={} \
                 generator grad norm={g} discriminator grad norm={d}",
                report.cyc, report.sty, report.adv_g, report.adv_d, report.total
            ))
        };
        if ![report.cyc, report.sty, report.adv_g, report.total, g_norm]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(numeric(&report, g_norm, f64::NAN));
        }
        let scale = match opts.grad_clip {
            Some(c) if g_norm > c => c / g_norm,
            _ => 1.0,
        };
        self.gen_opt.step(&gen_sets, &grads, lr, scale)?;
        drop(grads);

        let fake_y = self.buffers[lb.index()].query(&pass.fake_y.detach(), &mut self.rng)?;
        let fake_x = self.buffers[la.index()].query(&pass.fake_x.detach(), &mut self.rng)?;
        let d = self.model.discriminator();
        let adv_d = losses::discriminator_loss(
            &d.discriminate(&x, la)?,
            &d.discriminate(&fake_y, lb)?,
            &d.discriminate(&y, lb)?,
            &d.discriminate(&fake_x, la)?,
        )?;
        report.adv_d = losses::scalar(&adv_d)?;
        if opts.update_discriminator {
            let grads = adv_d.backward()?;
            let d_sets = [d.params()];
            let d_norm = grad_norm(&d_sets, &grads)?;
            if !(report.adv_d.is_finite() && d_norm.is_finite()) {
                return Err(numeric(&report, g_norm, d_norm));
            }
            let scale = match opts.grad_clip {
                Some(c) if d_norm > c => c / d_norm,
                _ => 1.0,
            };
            self.disc_opt.step(&d_sets, &grads, lr, scale)?;
        } else if !report.adv_d.is_finite() {
            return Err(numeric(&report, g_norm, f64::NAN));
        }

        self.step = step;
        Ok(StepOutcome {
            report,
            fake_y: pass.fake_y.detach(),
            fake_x: pass.fake_x.detach(),
        })
    }

    fn header(&self) -> Header {
        Header {
            step: self.step,
            dtype: dtype_name(self.model.dtype()).into(),
            generator_opt_steps: self.gen_opt.steps(),
            discriminator_opt_steps: self.disc_opt.steps(),
            rng_seed: hex(&self.rng.get_seed()),
            rng_word_pos: self.rng.get_word_pos().to_string(),
            draws: self.draws.clone(),
            buffer_lens: self.buffers.iter().map(ReplayBuffer::len).collect(),
            config: self.model.config().clone(),
        }
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let header = toml::to_string(&self.header()).map_err(|e| EditError::Config(e.to_string()))?;
        let mut file = TensorFile::new(header);
        for set in self.model.param_sets() {
            for e in set.entries() {
                file.push(e.name.clone(), e.var.as_tensor())?;
            }
        }
        for (prefix, opt) in [("generator", &self.gen_opt), ("discriminator", &self.disc_opt)] {
            for (name, (m, v)) in opt.moments() {
                let (mn, vn) = moment_names(prefix, name);
                file.push(mn, m)?;
                file.push(vn, v)?;
            }
        }
        for (d, buf) in self.buffers.iter().enumerate() {
            for (i, img) in buf.storage().iter().enumerate() {
                file.push(format!("buffer.{d}.{i:04}"), img)?;
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_tensor_file()?.write(path)
    }

    pub fn load(path: &Path, device: &Device) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::read(path)?, device)
    }

    pub fn from_tensor_file(file: &TensorFile, device: &Device) -> Result<Self> {
        let header: Header =
            toml::from_str(&file.header).map_err(|e| EditError::Integrity(format!("checkpoint header: {e}")))?;
        let cfg = header.config;
        cfg.validate()?;
        let dtype = match header.dtype.as_str() {
            "f32" => DType::F32,
            "f64" => DType::F64,
            other => return Err(EditError::Format(format!("unknown dtype '{other}'"))),
        };
        let backbone = Backbone::from_tensor_file(backbone_spec(&cfg), file, dtype, device)?;
        let model = EditModel::with_backbone(&cfg, backbone, dtype, device)?;
        let tensor = |name: &str| -> Result<Tensor> {
            file.tensor(name, device)?
                .ok_or_else(|| EditError::Integrity(format!("checkpoint lacks tensor '{name}'")))
        };
        for set in model.param_sets() {
            for e in set.entries() {
                set.assign(&e.name, &tensor(&e.name)?)?;
            }
        }

        let mut state = Self::from_model(model)?;
        let restore = |prefix: &str, sets: &[&ParamSet], steps: u64| -> Result<Adam> {
            let mut moments = BTreeMap::new();
            for set in sets {
                for e in set.trainable() {
                    let (mn, vn) = moment_names(prefix, &e.name);
                    if let (Some(m), Some(v)) = (file.tensor(&mn, device)?, file.tensor(&vn, device)?) {
                        moments.insert(e.name.clone(), (m, v));
                    }
                }
            }
            let mut opt = Adam::default();
            opt.restore(steps, moments);
            Ok(opt)
        };
        let m = &state.model;
        state.gen_opt = restore(
            "generator",
            &[m.generator().params(), m.param_net().params()],
            header.generator_opt_steps,
        )?;
        state.disc_opt = restore(
            "discriminator",
            &[m.discriminator().params()],
            header.discriminator_opt_steps,
        )?;

        let d = state.buffers.len();
        if header.buffer_lens.len() != d || header.draws.len() != d {
            return Err(EditError::Integrity("per-domain state length mismatch".into()));
        }
        for (i, &n) in header.buffer_lens.iter().enumerate() {
            let images = (0..n)
                .map(|j| tensor(&format!("buffer.{i}.{j:04}")))
                .collect::<Result<Vec<_>>>()?;
            state.buffers[i].restore(images)?;
        }
        let word_pos: u128 = header
            .rng_word_pos
            .parse()
            .map_err(|_| EditError::Integrity("bad rng position".into()))?;
        state.rng = ChaCha8Rng::from_seed(unhex(&header.rng_seed)?);
        state.rng.set_word_pos(word_pos);
        state.step = header.step;
        state.draws = header.draws;
        Ok(state)
    }
}

/// Training data of every domain, in registry order.
pub fn load_training_data(cfg: &Config) -> Result<Vec<DomainDataset>> {
    let registry = crate::domain::DomainRegistry::new(cfg.domains.clone())?;
    match &cfg.data_root {
        Some(root) => (0..registry.len())
            .map(|d| DomainDataset::from_dir(Path::new(root), registry.label(d)?, Split::Train))
            .collect(),
        None => data::synthetic_domains(&registry, Split::Train, cfg.synthetic_per_domain, cfg.image_size, cfg.seed),
    }
}

fn sampler_seed(cfg: &Config, domain: usize) -> u64 {
    cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(domain as u64 + 1))
}

/// Drives [`TrainState`] over datasets: batch sampling, round-robin domain
/// pairs, the learning-rate schedule, CSV logging, sample grids and per-epoch
/// checkpoints.
pub struct Trainer {
    state: TrainState,
    datasets: Vec<DomainDataset>,
    samplers: Vec<DomainSampler>,
    pairs: Vec<(usize, usize)>,
    steps_per_epoch: usize,
    schedule: LrSchedule,
    out_dir: Option<PathBuf>,
    log: Option<BufWriter<File>>,
}

pub const LOG_HEADER: &str = "step,lr,cyc,sty,adv_d,adv_g,total";

impl Trainer {
    pub fn new(state: TrainState, datasets: Vec<DomainDataset>) -> Result<Self> {
        let cfg = state.config().clone();
        if datasets.len() != cfg.domains.len() {
            return Err(EditError::Config(format!(
                "{} datasets for {} domains",
                datasets.len(),
                cfg.domains.len()
            )));
        }
        let mut samplers: Vec<DomainSampler> = datasets
            .iter()
            .enumerate()
            .map(|(d, ds)| DomainSampler::new(ds.len(), sampler_seed(&cfg, d)))
            .collect();
        // fast-forward after a resume
        for (s, &n) in samplers.iter_mut().zip(state.draws()) {
            for _ in 0..n {
                s.next_indices(cfg.batch_size);
            }
        }
        let pairs = cfg.pair_indices();
        let steps_per_epoch = if cfg.steps_per_epoch > 0 {
            cfg.steps_per_epoch
        } else {
            let smallest = pairs
                .iter()
                .map(|&(a, b)| datasets[a].len().min(datasets[b].len()))
                .min()
                .unwrap_or(1);
            (smallest / cfg.batch_size).max(1)
        };
        Ok(Self {
            schedule: LrSchedule::from_config(&cfg),
            state,
            datasets,
            samplers,
            pairs,
            steps_per_epoch,
            out_dir: None,
            log: None,
        })
    }

    /// Writes `train_log.csv`, sample grids and checkpoints under `dir`.
    pub fn with_output(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("train_log.csv");
        let resuming = self.state.step() > 0 && path.exists();
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(resuming)
            .write(true)
            .truncate(!resuming)
            .open(&path)?;
        let mut log = BufWriter::new(file);
        if !resuming {
            writeln!(log, "{LOG_HEADER}")?;
        }
        self.log = Some(log);
        self.out_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.steps_per_epoch
    }

    pub fn total_steps(&self) -> u64 {
        (self.steps_per_epoch * self.schedule.total_epochs) as u64
    }

    pub fn epoch(&self) -> usize {
        ((self.state.step() / self.steps_per_epoch as u64) as usize).min(self.schedule.total_epochs)
    }

    fn next_batch(&mut self, domain: usize) -> Result<Tensor> {
        let cfg = self.state.config();
        let (size, augment, batch) = (cfg.image_size, cfg.augment, cfg.batch_size);
        let indices = self.samplers[domain].next_indices(batch);
        self.state.draws[domain] += 1;
        let device = self.state.model().device().clone();
        data::load_batch(&self.datasets[domain], &indices, size, augment, &mut self.state.rng, &device)
    }

    /// One optimization step on the next domain pair; the report is also
    /// appended to the CSV log.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let (a, b) = self.pairs[(self.state.step() % self.pairs.len() as u64) as usize];
        let lr = self.schedule.lr_at(self.epoch())?;
        let x = self.next_batch(a)?;
        let y = self.next_batch(b)?;
        let la = self.state.model().registry().label(a)?;
        let lb = self.state.model().registry().label(b)?;
        let out = self.state.train_step(&x, &y, &la, &lb, lr)?;
        let r = &out.report;
        let step = self.state.step();
        if let Some(log) = &mut self.log {
            writeln!(log, "{step},{lr},{},{},{},{},{}", r.cyc, r.sty, r.adv_d, r.adv_g, r.total)?;
        }
        let every = self.state.config().sample_every as u64;
        if let Some(dir) = &self.out_dir {
            if every > 0 && step.is_multiple_of(every) {
                let grid = Tensor::cat(&[&x, &out.fake_y, &y, &out.fake_x], 3)?;
                data::tensor_to_image(&grid.narrow(0, 0, 1)?)?
                    .save(dir.join(format!("sample_{step:06}.png")))
                    .map_err(|e| EditError::data(dir, e))?;
            }
        }
        Ok(out)
    }

    /// Runs until `total_steps()` or `max_steps` further steps, whichever
    /// comes first, checkpointing at each epoch boundary. Returns the reports.
    pub fn run(&mut self, max_steps: Option<u64>) -> Result<Vec<LossReport>> {
        let end = match max_steps {
            Some(n) => (self.state.step() + n).min(self.total_steps()),
            None => self.total_steps(),
        };
        let mut reports = Vec::new();
        while self.state.step() < end {
            reports.push(self.step()?.report);
            let step = self.state.step();
            if step.is_multiple_of(self.steps_per_epoch as u64) {
                let epoch = step / self.steps_per_epoch as u64;
                log::info!("epoch {epoch} done at step {step}");
                self.checkpoint(&format!("epoch_{epoch:04}.ckpt"))?;
            }
        }
        if let Some(log) = &mut self.log {
            log.flush()?;
        }
        self.checkpoint("latest.ckpt")?;
        Ok(reports)
    }

    fn checkpoint(&mut self, name: &str) -> Result<()> {
        if let Some(log) = &mut self.log {
            log.flush()?;
        }
        if let Some(dir) = &self.out_dir {
            self.state.save(&dir.join(name))?;
        }
        Ok(())
    }
}
