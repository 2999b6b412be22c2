//! Unpaired multi-domain datasets, image/tensor conversion and a procedural
//! synthetic domain generator.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use candle_core::{Device, Tensor};
use image::imageops::FilterType;
use image::Rgb;
pub use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainLabel, DomainRegistry};
use crate::error::{EditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub enum DatasetItem {
    File(PathBuf),
    Memory(Arc<RgbImage>),
}

impl DatasetItem {
    pub fn load(&self) -> Result<RgbImage> {
        match self {
            DatasetItem::File(p) => read_rgb(p),
            DatasetItem::Memory(img) => Ok((**img).clone()),
        }
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|i| i.to_rgb8())
        .map_err(|e| EditError::data(path, e))
}

#[derive(Debug, Clone)]
pub struct DomainDataset {
    pub domain: DomainLabel,
    pub split: Split,
    pub items: Vec<DatasetItem>,
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

impl DomainDataset {
    /// Scans `root/<domain>/<split>/` for PNG and JPEG files, sorted by name.
    pub fn from_dir(root: &Path, domain: DomainLabel, split: Split) -> Result<Self> {
        let dir = root.join(domain.name()).join(split.dir_name());
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| EditError::data(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image(p))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(EditError::data(&dir, "no images found"));
        }
        Ok(Self {
            domain,
            split,
            items: files.into_iter().map(DatasetItem::File).collect(),
        })
    }

    pub fn from_images(domain: DomainLabel, split: Split, images: Vec<RgbImage>) -> Result<Self> {
        if images.is_empty() {
            return Err(EditError::data(domain.name(), "empty in-memory dataset"));
        }
        Ok(Self {
            domain,
            split,
            items: images.into_iter().map(|i| DatasetItem::Memory(Arc::new(i))).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// `[3, H, W]` values in [−1, 1], row-major CHW.
pub fn rgb_to_chw(img: &RgbImage) -> Vec<f32> {
    let (w, h) = img.dimensions();
    let plane = (w * h) as usize;
    let mut out = vec![0f32; 3 * plane];
    for (x, y, p) in img.enumerate_pixels() {
        let i = (y * w + x) as usize;
        for c in 0..3 {
            out[c * plane + i] = p[c] as f32 / 127.5 - 1.0;
        }
    }
    out
}

/// Single image to a `[1, 3, H, W]` tensor.
pub fn image_to_tensor(img: &RgbImage, device: &Device) -> Result<Tensor> {
    let (w, h) = img.dimensions();
    Ok(Tensor::from_vec(rgb_to_chw(img), (1, 3, h as usize, w as usize), device)?)
}

/// `[3, H, W]` or `[1, 3, H, W]` tensor in [−1, 1] to an 8-bit image.
pub fn tensor_to_image(t: &Tensor) -> Result<RgbImage> {
    let t = if t.rank() == 4 { t.squeeze(0)? } else { t.clone() };
    let (c, h, w) = t.dims3()?;
    if c != 3 {
        return Err(EditError::shape(format!("expected 3 channels, got {c}")));
    }
    let v = t.to_dtype(candle_core::DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
    let plane = h * w;
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        let px = |c: usize| (((v[c * plane + i] + 1.0) * 127.5).round().clamp(0.0, 255.0)) as u8;
        Rgb([px(0), px(1), px(2)])
    }))
}

/// Bilinear resize (no-op when already that size).
pub fn resize(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    if img.dimensions() == (width, height) {
        img.clone()
    } else {
        image::imageops::resize(img, width, height, FilterType::Triangle)
    }
}

pub fn resize_square(img: &RgbImage, size: u32) -> RgbImage {
    resize(img, size, size)
}

/// Mirror along the width axis of an `[N, C, H, W]` tensor.
pub fn hflip(t: &Tensor) -> Result<Tensor> {
    let w = t.dim(3)?;
    let idx: Vec<u32> = (0..w as u32).rev().collect();
    let idx = Tensor::from_vec(idx, w, t.device())?;
    Ok(t.contiguous()?.index_select(&idx, 3)?)
}

/// Loads, resizes to `size × size` and scales to [−1, 1]. With `augment`,
/// each image is mirrored horizontally with probability 0.5.
pub fn load_batch<R: Rng>(
    ds: &DomainDataset,
    indices: &[usize],
    size: usize,
    augment: bool,
    rng: &mut R,
    device: &Device,
) -> Result<Tensor> {
    let mut images = Vec::with_capacity(indices.len());
    for &i in indices {
        let item = ds.items.get(i).ok_or_else(|| {
            EditError::domain(format!("index {i} out of range for {} items", ds.len()))
        })?;
        let img = resize_square(&item.load()?, size as u32);
        let mut t = image_to_tensor(&img, device)?;
        if augment && rng.gen_bool(0.5) {
            t = hflip(&t)?;
        }
        images.push(t);
    }
    if images.is_empty() {
        return Err(EditError::domain("empty index list"));
    }
    Ok(Tensor::cat(&images, 0)?)
}

/// Independently shuffled index stream for one domain.
#[derive(Debug, Clone)]
pub struct DomainSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl DomainSampler {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Self { order, pos: 0, rng }
    }

    pub fn next_indices(&mut self, batch: usize) -> Vec<usize> {
        (0..batch)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Circle,
    Square,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    Flat,
    Stripes,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticStyleSpec {
    pub shape_family: ShapeFamily,
    pub palette: Vec<[u8; 3]>,
    pub texture: Texture,
    pub outline_only: bool,
    pub seed: u64,
}

pub const RED: [u8; 3] = [220, 40, 40];
pub const BLUE: [u8; 3] = [40, 60, 220];
pub const GREEN: [u8; 3] = [40, 190, 60];
pub const YELLOW: [u8; 3] = [230, 200, 40];
pub const WHITE: [u8; 3] = [255, 255, 255];

fn scale(c: [u8; 3], f: f32) -> [f32; 3] {
    [c[0] as f32 * f, c[1] as f32 * f, c[2] as f32 * f]
}

/// Signed distance-like value: negative inside, roughly pixel units near the edge.
fn shape_distance(family: ShapeFamily, px: f32, py: f32, cx: f32, cy: f32, r: f32, angle: f32) -> f32 {
    let (dx, dy) = (px - cx, py - cy);
    let (s, c) = angle.sin_cos();
    let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
    match family {
        ShapeFamily::Circle => (u * u + v * v).sqrt() - r,
        ShapeFamily::Square => u.abs().max(v.abs()) - r * 0.8,
        ShapeFamily::Triangle => {
            // intersection of three half-planes with outward normals 120° apart
            (0..3)
                .map(|k| {
                    let a = std::f32::consts::FRAC_PI_2 + k as f32 * 2.0 * std::f32::consts::PI / 3.0;
                    u * a.cos() + v * a.sin() - r * 0.5
                })
                .fold(f32::MIN, f32::max)
        }
    }
}

/// `n` images of `size × size` drawn deterministically from `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticStyleSpec, n: usize, size: usize) -> Result<Vec<RgbImage>> {
    if spec.palette.is_empty() {
        return Err(EditError::domain("palette must not be empty"));
    }
    if n == 0 || size < 16 {
        return Err(EditError::domain(format!("need n >= 1 and size >= 16, got n={n} size={size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = size as f32;
    let thickness = 0.5 + s / 40.0;
    let period = (s / 8.0).max(4.0);
    (0..n)
        .map(|_| {
            let color = spec.palette[rng.gen_range(0..spec.palette.len())];
            let cx = rng.gen_range(0.35..0.65) * s;
            let cy = rng.gen_range(0.35..0.65) * s;
            let r = rng.gen_range(0.22..0.34) * s;
            let angle = rng.gen_range(0.0..std::f32::consts::PI);
            let stripe_angle = rng.gen_range(0.0..std::f32::consts::PI);
            let (ss, sc) = stripe_angle.sin_cos();
            let background = if spec.outline_only {
                scale(WHITE, 1.0)
            } else {
                scale(color, 0.35)
            };
            let mut img = RgbImage::new(size as u32, size as u32);
            for (x, y, p) in img.enumerate_pixels_mut() {
                let (fx, fy) = (x as f32 + 0.5, y as f32 + 0.5);
                let d = shape_distance(spec.shape_family, fx, fy, cx, cy, r, angle);
                let rgb = if spec.outline_only {
                    if d.abs() <= thickness {
                        scale(color, 1.0)
                    } else {
                        background
                    }
                } else if d <= 0.0 {
                    match spec.texture {
                        Texture::Flat => scale(color, 1.0),
                        Texture::Stripes => {
                            let t = (fx * sc + fy * ss) / period;
                            if t.rem_euclid(1.0) < 0.5 {
                                scale(color, 1.0)
                            } else {
                                scale(color, 0.6)
                            }
                        }
                        Texture::Noise => {
                            let base = scale(color, 1.0);
                            let j = rng.gen_range(-40.0..40.0);
                            [base[0] + j, base[1] + j, base[2] + j]
                        }
                    }
                } else {
                    background
                };
                *p = Rgb(rgb.map(|v| v.round().clamp(0.0, 255.0) as u8));
            }
            Ok(img)
        })
        .collect()
}

/// Built-in desk-scale domains. Even-indexed domains are outline drawings on
/// white (edge-like); odd-indexed ones are filled, textured shapes on a dark
/// background of the same hue (photo-like). Within each domain, images cycle
/// through four palettes, which act as exemplar styles.
pub fn synthetic_domains(
    registry: &DomainRegistry,
    split: Split,
    per_domain: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<DomainDataset>> {
    let palettes = [RED, BLUE, GREEN, YELLOW];
    let families = [ShapeFamily::Circle, ShapeFamily::Square, ShapeFamily::Triangle];
    let textures = [Texture::Flat, Texture::Stripes, Texture::Noise];
    let split_salt = match split {
        Split::Train => 0,
        Split::Test => 1 << 32,
    };
    (0..registry.len())
        .map(|d| {
            let outline = d % 2 == 0;
            let mut images = Vec::with_capacity(per_domain);
            for i in 0..per_domain {
                let spec = SyntheticStyleSpec {
                    shape_family: families[i % families.len()],
                    palette: vec![palettes[(i / families.len()) % palettes.len()]],
                    texture: if outline { Texture::Flat } else { textures[(i + d / 2) % textures.len()] },
                    outline_only: outline,
                    seed: seed ^ split_salt ^ ((d as u64) << 40) ^ i as u64,
                };
                images.extend(generate_synthetic(&spec, 1, size)?);
            }
            DomainDataset::from_images(registry.label(d)?, split, images)
        })
        .collect()
}
