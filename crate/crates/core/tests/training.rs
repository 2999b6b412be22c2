mod common;

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor};
use edit_core::trainer::{generator_pass, load_training_data, ReplayBuffer, StepOptions};
use edit_core::{EditError, TrainState, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{mini_config, to_vec, uniform};

fn snapshot(state: &TrainState) -> BTreeMap<String, Vec<f64>> {
    state
        .model()
        .param_sets()
        .iter()
        .flat_map(|s| s.entries().iter())
        .map(|e| (e.name.clone(), to_vec(e.var.as_tensor())))
        .collect()
}

fn changed(before: &BTreeMap<String, Vec<f64>>, after: &BTreeMap<String, Vec<f64>>, prefix: &str) -> bool {
    before
        .iter()
        .filter(|(k, _)| k.starts_with(prefix))
        .any(|(k, v)| after[k] != *v)
}

fn pair(state: &TrainState, dtype: DType) -> (Tensor, Tensor) {
    let s = state.config().image_size;
    (uniform(&[1, 3, s, s], 1, dtype), uniform(&[1, 3, s, s], 2, dtype))
}

#[test]
fn one_step_moves_generator_param_net_and_discriminator_only() {
    let mut state = TrainState::new(&mini_config(), DType::F32, &Device::Cpu).unwrap();
    let (x, y) = pair(&state, DType::F32);
    let reg = state.model().registry().clone();
    let before = snapshot(&state);
    let out = state.train_step(&x, &y, &reg.label(0).unwrap(), &reg.label(1).unwrap(), 1e-3).unwrap();
    let after = snapshot(&state);
    for prefix in ["generator.shared", "param_net.fc", "param_net.head", "discriminator"] {
        assert!(changed(&before, &after, prefix), "{prefix} did not move");
    }
    assert!(!changed(&before, &after, "param_net.backbone"), "backbone moved");
    let r = out.report;
    assert!([r.cyc, r.sty, r.adv_d, r.adv_g, r.total].iter().all(|v| v.is_finite()));
    assert_eq!(state.step(), 1);
}

#[test]
fn pure_adversarial_step_is_one_adam_step_on_adv_g() {
    let mut state = TrainState::new(&mini_config(), DType::F64, &Device::Cpu).unwrap();
    state.options.lambda_cyc = 0.0;
    state.options.eta_sty = 0.0;
    state.options.update_discriminator = false;
    let (x, y) = pair(&state, DType::F64);
    let reg = state.model().registry().clone();
    let (la, lb) = (reg.label(0).unwrap(), reg.label(1).unwrap());
    let lr = 1e-3;

    // first Adam step from zero moments: m̂ = g, v̂ = g², so Δ = -lr·g/(|g| + eps)
    let pass = generator_pass(state.model(), &x, &y, &la, &lb, &StepOptions { lambda_cyc: 0.0, eta_sty: 0.0, ..state.options }).unwrap();
    let grads = pass.adv_g.backward().unwrap();
    let mut expected = BTreeMap::new();
    for set in [state.model().generator().params(), state.model().param_net().params()] {
        for e in set.trainable() {
            let theta = to_vec(e.var.as_tensor());
            let next = match grads.get(e.var.as_tensor()) {
                Some(g) => theta.iter().zip(to_vec(g)).map(|(t, g)| t - lr * g / (g.abs() + 1e-8)).collect(),
                None => theta,
            };
            expected.insert(e.name.clone(), next);
        }
    }
    drop(grads);
    let before = snapshot(&state);
    state.train_step(&x, &y, &la, &lb, lr).unwrap();
    let after = snapshot(&state);
    for (name, want) in &expected {
        for (a, b) in after[name].iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{name}: {a} vs {b}");
        }
    }
    assert!(!changed(&before, &after, "discriminator"));
}

#[test]
fn replayed_fakes_carry_no_generator_history() {
    let state = TrainState::new(&mini_config(), DType::F32, &Device::Cpu).unwrap();
    let m = state.model();
    let (x, _) = pair(&state, DType::F32);
    let label = m.registry().label(1).unwrap();
    let fake = m.translate(&x, &x, &label).unwrap();
    let mut buffer = ReplayBuffer::new(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..4 {
        let replay = buffer.query(&fake, &mut rng).unwrap();
        let loss = m.discriminator().discriminate(&replay, &label).unwrap().0.sum_all().unwrap();
        let grads = loss.backward().unwrap();
        for e in m.generator().params().trainable().chain(m.param_net().params().trainable()) {
            assert!(grads.get(e.var.as_tensor()).is_none(), "{} received a gradient", e.name);
        }
    }
    assert_eq!(buffer.len(), 2);
}

#[test]
fn identical_seeds_give_identical_first_ten_steps() {
    let run = || {
        let cfg = mini_config();
        let state = TrainState::new(&cfg, DType::F32, &Device::Cpu).unwrap();
        let mut t = Trainer::new(state, load_training_data(&cfg).unwrap()).unwrap();
        t.run(Some(10)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 10);
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(format!("{ra:?}"), format!("{rb:?}"));
    }
}

#[test]
fn non_finite_input_is_a_numeric_error() {
    let mut state = TrainState::new(&mini_config(), DType::F32, &Device::Cpu).unwrap();
    let (x, y) = pair(&state, DType::F32);
    let x = x.affine(f64::NAN, 0.0).unwrap();
    let reg = state.model().registry().clone();
    let err = state.train_step(&x, &y, &reg.label(0).unwrap(), &reg.label(1).unwrap(), 1e-3).unwrap_err();
    assert!(matches!(err, EditError::Numeric(_)), "{err}");
    let same = state.train_step(&y, &y, &reg.label(1).unwrap(), &reg.label(1).unwrap(), 1e-3).unwrap_err();
    assert!(matches!(same, EditError::Domain(_)), "{same}");
}

#[test]
fn checkpoint_is_a_fixed_point() {
    let cfg = mini_config();
    let state = TrainState::new(&cfg, DType::F32, &Device::Cpu).unwrap();
    let mut t = Trainer::new(state, load_training_data(&cfg).unwrap()).unwrap();
    t.run(Some(3)).unwrap();
    let state = t.into_state();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ckpt");
    state.save(&path).unwrap();
    let loaded = TrainState::load(&path, &Device::Cpu).unwrap();
    let first = std::fs::read(&path).unwrap();
    assert_eq!(loaded.to_tensor_file().unwrap().to_bytes(), first);
    assert_eq!(loaded.step(), 3);
    assert_eq!(loaded.model().count_params(), state.model().count_params());
    assert_eq!(snapshot(&loaded), snapshot(&state));
    let (x, y) = pair(&state, DType::F32);
    let label = state.model().registry().label(1).unwrap();
    let a = state.model().translate(&x, &y, &label).unwrap();
    let b = loaded.model().translate(&x, &y, &label).unwrap();
    assert_eq!(
        a.flatten_all().unwrap().to_vec1::<f32>().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.flatten_all().unwrap().to_vec1::<f32>().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn resume_matches_continuous_training() {
    let cfg = mini_config();
    let data = load_training_data(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let straight = dir.path().join("straight");
    let state = TrainState::new(&cfg, DType::F32, &Device::Cpu).unwrap();
    let mut t = Trainer::new(state, data.clone()).unwrap().with_output(&straight).unwrap();
    t.run(Some(6)).unwrap();

    // a run of 5 steps crosses the epoch boundary at 4; resume from it
    let split = dir.path().join("split");
    let state = TrainState::new(&cfg, DType::F32, &Device::Cpu).unwrap();
    let mut t = Trainer::new(state, data.clone()).unwrap().with_output(&split).unwrap();
    t.run(Some(5)).unwrap();
    let resumed = TrainState::load(&split.join("latest.ckpt"), &Device::Cpu).unwrap();
    assert_eq!(resumed.step(), 5);
    let mut t = Trainer::new(resumed, data).unwrap().with_output(&split).unwrap();
    t.run(Some(1)).unwrap();

    let log_a = std::fs::read_to_string(straight.join("train_log.csv")).unwrap();
    let log_b = std::fs::read_to_string(split.join("train_log.csv")).unwrap();
    assert_eq!(log_a.lines().count(), 7);
    assert_eq!(log_a, log_b);
    assert_eq!(
        std::fs::read(straight.join("latest.ckpt")).unwrap(),
        std::fs::read(split.join("latest.ckpt")).unwrap()
    );
    assert!(straight.join("epoch_0001.ckpt").exists());
}
