mod common;

use candle_core::{DType, Device, Tensor};
use edit_core::arch::GeneratorSpec;
use edit_core::backbone::FeatureExtractor;
use edit_core::data::{self, DomainDataset, DomainSampler, ShapeFamily, Split, SyntheticStyleSpec, Texture};
use edit_core::evaluation::{self, content_error, style_error};
use edit_core::{Config, DomainRegistry, EditError, EditModel, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{mini_model, to_vec, uniform};

fn spec(palette: [u8; 3]) -> SyntheticStyleSpec {
    SyntheticStyleSpec {
        shape_family: ShapeFamily::Circle,
        palette: vec![palette],
        texture: Texture::Flat,
        outline_only: false,
        seed: 7,
    }
}

fn channel_means(images: &[data::RgbImage]) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut n = 0.0;
    for img in images {
        for p in img.pixels() {
            for (s, v) in sum.iter_mut().zip(p.0) {
                *s += v as f64 / 127.5 - 1.0;
            }
            n += 1.0;
        }
    }
    sum.map(|s| s / n)
}

#[test]
fn palettes_separate_channel_means() {
    let red = data::generate_synthetic(&spec(data::RED), 8, 32).unwrap();
    let blue = data::generate_synthetic(&spec(data::BLUE), 8, 32).unwrap();
    let (r, b) = (channel_means(&red), channel_means(&blue));
    assert!(r[0] - b[0] > 0.2, "red channel {r:?} vs {b:?}");
    assert!(b[2] - r[2] > 0.2, "blue channel {r:?} vs {b:?}");
}

#[test]
fn batches_are_deterministic_and_in_range() {
    let reg = DomainRegistry::new(vec!["a".into(), "b".into()]).unwrap();
    let sets = data::synthetic_domains(&reg, Split::Train, 6, 32, 3).unwrap();
    let load = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        data::load_batch(&sets[1], &[0, 5, 2], 24, true, &mut rng, &Device::Cpu).unwrap()
    };
    let (a, b) = (load(1), load(1));
    assert_eq!(a.dims(), &[3, 3, 24, 24]);
    assert_eq!(to_vec(&a), to_vec(&b));
    assert!(to_vec(&a).iter().all(|v| (-1.0..=1.0).contains(v)));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = data::load_batch(&sets[0], &[6], 24, false, &mut rng, &Device::Cpu).unwrap_err();
    assert!(matches!(err, EditError::Domain(_)));
}

#[test]
fn directory_datasets_read_sorted_images() {
    let dir = tempfile::tempdir().unwrap();
    let reg = DomainRegistry::new(vec!["a".into(), "b".into()]).unwrap();
    let images = data::generate_synthetic(&spec(data::GREEN), 3, 20).unwrap();
    let train = dir.path().join("a").join("train");
    std::fs::create_dir_all(&train).unwrap();
    for (i, img) in images.iter().enumerate() {
        img.save(train.join(format!("{}.png", 2 - i))).unwrap();
    }
    std::fs::write(train.join("notes.txt"), "skip").unwrap();
    let ds = DomainDataset::from_dir(dir.path(), reg.label(0).unwrap(), Split::Train).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(*ds.items[0].load().unwrap(), *images[2]);
    let missing = DomainDataset::from_dir(dir.path(), reg.label(1).unwrap(), Split::Train).unwrap_err();
    assert!(matches!(missing, EditError::Data { .. }));
}

#[test]
fn samplers_shuffle_independently() {
    let mut a = DomainSampler::new(16, 1);
    let mut b = DomainSampler::new(16, 2);
    assert_ne!(a.next_indices(16), b.next_indices(16));
}

/// Scales every tap of an inner extractor.
struct Scaled<'a>(&'a dyn FeatureExtractor, f64);

impl FeatureExtractor for Scaled<'_> {
    fn taps(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        Ok(self.0.taps(x)?.into_iter().map(|t| t.affine(self.1, 0.0).unwrap()).collect())
    }
    fn tap_channels(&self) -> Vec<usize> {
        self.0.tap_channels()
    }
    fn tap_names(&self) -> Vec<String> {
        self.0.tap_names()
    }
}

#[test]
fn metrics_scale_with_features_and_are_symmetric() {
    let m = mini_model(DType::F64);
    let bb = m.backbone();
    let (a, b) = (uniform(&[1, 3, 24, 24], 1, DType::F64), uniform(&[1, 3, 24, 24], 2, DType::F64));
    let layers = [0, 1, 2, 3, 4];
    let c = content_error(&a, &b, bb, 2).unwrap();
    let s = style_error(&a, &b, bb, &layers).unwrap();
    assert!(c > 0.0 && s > 0.0);
    assert_eq!(content_error(&a, &a, bb, 2).unwrap(), 0.0);
    assert_eq!(style_error(&b, &b, bb, &layers).unwrap(), 0.0);
    assert!((content_error(&b, &a, bb, 2).unwrap() - c).abs() <= 1e-12 * c);
    assert!((style_error(&b, &a, bb, &layers).unwrap() - s).abs() <= 1e-12 * s);
    // doubling features doubles the L2 distance and multiplies Gram distances by 2^4
    let doubled = Scaled(bb, 2.0);
    assert!((content_error(&a, &b, &doubled, 2).unwrap() - 2.0 * c).abs() <= 1e-10 * c);
    assert!((style_error(&a, &b, &doubled, &layers).unwrap() - 16.0 * s).abs() <= 1e-10 * s);
}

#[test]
fn evaluation_report_is_complete() {
    let m = mini_model(DType::F32);
    let reg = m.registry().clone();
    let sets = data::synthetic_domains(&reg, Split::Test, 3, 24, 9).unwrap();
    let report = evaluation::evaluate(&m, &sets[0], &sets[1], &reg.label(1).unwrap(), None).unwrap();
    assert_eq!(report.num_images, 3);
    assert!(report.timing_calls >= 30);
    assert!(report.ms_per_image > 0.0);
    assert!(report.content_error.mean > 0.0 && report.style_error.mean > 0.0);
    let counts = m.count_params();
    assert_eq!(report.dynamic_param_count, counts.dynamic);
    assert_eq!(report.shared_param_count, counts.shared);
    assert!(report.inception_score.is_none());
    let kv = report.to_kv();
    assert!(kv.contains("timing_calls") && kv.contains("hardware"));
}

#[test]
fn full_width_generator_keeps_dynamic_below_shared() {
    let spec = GeneratorSpec::standard(64, 9, 0).unwrap();
    assert!(spec.param_count() < spec.shared_param_count());
    let cfg = Config { base_width: 64, ..Config::default() };
    let spec = GeneratorSpec::from_config(&cfg).unwrap();
    assert!(spec.param_count() < spec.shared_param_count());
}

fn differs(a: &Tensor, b: &Tensor) -> bool {
    to_vec(a).iter().zip(to_vec(b)).any(|(x, y)| *x != y)
}

#[test]
fn parameters_depend_on_label_and_exemplar_only() {
    let cfg = Config { domains: vec!["a".into(), "b".into(), "c".into()], ..common::mini_config() };
    let m = EditModel::init(&cfg, DType::F32, &Device::Cpu).unwrap();
    let reg = m.registry().clone();
    let sets = data::synthetic_domains(&reg, Split::Train, 4, 24, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let styles = data::load_batch(&sets[1], &[0, 3], 24, false, &mut rng, &Device::Cpu).unwrap();
    let (e0, e1) = (styles.narrow(0, 0, 1).unwrap(), styles.narrow(0, 1, 1).unwrap());
    let p = |e: &Tensor, l: usize| m.params_for(e, &reg.label(l).unwrap()).unwrap().tensor().clone();
    assert!(!differs(&p(&e0, 1), &p(&e0, 1)));
    assert!(differs(&p(&e0, 0), &p(&e0, 1)));
    assert!(differs(&p(&e0, 1), &p(&e0, 2)));
    assert!(differs(&p(&e0, 1), &p(&e1, 1)));
}

#[test]
fn frozen_backbone_receives_no_gradient() {
    let m = mini_model(DType::F32);
    let label = m.registry().label(0).unwrap();
    let x = uniform(&[1, 3, 24, 24], 4, DType::F32);
    let loss = m.translate(&x, &x, &label).unwrap().sqr().unwrap().sum_all().unwrap();
    let grads = loss.backward().unwrap();
    let backbone = m.backbone().params();
    assert!(!backbone.is_empty());
    for e in backbone.entries() {
        assert!(e.frozen, "{} is trainable", e.name);
        assert!(grads.get(e.var.as_tensor()).is_none(), "{} received a gradient", e.name);
    }
    assert!(m.param_net().params().trainable().all(|e| grads.get(e.var.as_tensor()).is_some()));
}
