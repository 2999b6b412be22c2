//! Finite-difference gradient suites shared by the gradient tests and the
//! acceptance runner. Every suite runs in f64 on the miniature model.

use candle_core::{DType, Tensor, Var};
use edit_core::backbone::FeatureExtractor;
use edit_core::config::AdversarialMode;
use edit_core::discriminator::PatchLogits;
use edit_core::losses;
use edit_core::perceptual::{channel_stats, FeatureStack};
use edit_core::EditModel;

use super::{check_input_grads, check_param_grads, mini_model, uniform, Mismatch};

pub struct SuiteResult {
    pub name: &'static str,
    pub checked: usize,
    pub failures: Vec<Mismatch>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }
}

const SAMPLES: usize = 3;
const GEN_AND_PSI: [&str; 3] = ["generator.shared", "param_net.fc", "param_net.head"];

fn pair() -> (Tensor, Tensor) {
    (uniform(&[1, 3, 8, 8], 11, DType::F64), uniform(&[1, 3, 8, 8], 12, DType::F64))
}

fn param_sets(m: &EditModel) -> [&edit_core::ParamSet; 2] {
    [m.generator().params(), m.param_net().params()]
}

pub fn cycle(m: &EditModel) -> SuiteResult {
    let (x, y) = pair();
    let reg = m.registry();
    let (la, lb) = (reg.label(0).unwrap(), reg.label(1).unwrap());
    let f = || {
        let px = m.params_for(&x, &la).unwrap();
        let py = m.params_for(&y, &lb).unwrap();
        let g = m.generator();
        let xc = g.forward(&g.forward(&x, &py).unwrap(), &px).unwrap();
        let yc = g.forward(&g.forward(&y, &px).unwrap(), &py).unwrap();
        losses::cycle_loss(&xc, &x, &yc, &y).unwrap()
    };
    let (checked, failures) = check_param_grads(&param_sets(m), &GEN_AND_PSI, SAMPLES, 1, &f);
    SuiteResult { name: "cycle loss wrt generator and param-net weights", checked, failures }
}

pub fn style(m: &EditModel) -> SuiteResult {
    let (x, y) = pair();
    let reg = m.registry();
    let (la, lb) = (reg.label(0).unwrap(), reg.label(1).unwrap());
    let layers = [0usize, 1, 2];
    let stats = |t: &Tensor| channel_stats(&FeatureStack::select(&m.backbone().taps(t).unwrap(), &layers).unwrap()).unwrap();
    let f = || {
        let px = m.params_for(&x, &la).unwrap();
        let py = m.params_for(&y, &lb).unwrap();
        let g = m.generator();
        let fake_x = g.forward(&y, &px).unwrap();
        let fake_y = g.forward(&x, &py).unwrap();
        (losses::style_loss(&stats(&fake_x), &stats(&x).detach()).unwrap()
            + losses::style_loss(&stats(&fake_y), &stats(&y).detach()).unwrap())
        .unwrap()
    };
    let (checked, failures) = check_param_grads(&param_sets(m), &GEN_AND_PSI, SAMPLES, 2, &f);
    SuiteResult { name: "style loss wrt generator and param-net weights", checked, failures }
}

pub fn adversarial(m: &EditModel) -> SuiteResult {
    let mut checked = 0;
    let mut failures = Vec::new();
    // with respect to the logits themselves
    for (k, mode) in [AdversarialMode::NonSaturating, AdversarialMode::Minimax].into_iter().enumerate() {
        let base = uniform(&[4, 1, 3, 3], 20 + k as u64, DType::F64).affine(4.0, 0.0).unwrap();
        let v = Var::from_tensor(&base).unwrap();
        let split = |t: &Tensor| -> Vec<PatchLogits> {
            (0..4).map(|i| PatchLogits(t.narrow(0, i, 1).unwrap())).collect()
        };
        let (c, f) = check_input_grads(&v, 36, 3, "adv_d logits", &|t| {
            let p = split(t);
            losses::discriminator_loss(&p[0], &p[1], &p[2], &p[3]).unwrap()
        });
        checked += c;
        failures.extend(f);
        let (c, f) = check_input_grads(&v, 36, 4, "adv_g logits", &|t| {
            let p = split(t);
            losses::generator_adv_loss(&p[1], &p[3], mode).unwrap()
        });
        checked += c;
        failures.extend(f);
    }
    // through the discriminator and the generator; at 32 px every normalized
    // map is at least 3x3, at 24 px the 2x2 maps make the loss too curved for
    // a 1e-6 step
    let x = uniform(&[1, 3, 32, 32], 31, DType::F64);
    let y = uniform(&[1, 3, 32, 32], 32, DType::F64);
    let reg = m.registry();
    let (la, lb) = (reg.label(0).unwrap(), reg.label(1).unwrap());
    let d = m.discriminator();
    let fakes = || {
        let px = m.params_for(&x, &la).unwrap();
        let py = m.params_for(&y, &lb).unwrap();
        (m.generator().forward(&x, &py).unwrap(), m.generator().forward(&y, &px).unwrap())
    };
    let (fy, fx) = fakes();
    let (fy, fx) = (fy.detach(), fx.detach());
    let adv_d = || {
        losses::discriminator_loss(
            &d.discriminate(&x, &la).unwrap(),
            &d.discriminate(&fy, &lb).unwrap(),
            &d.discriminate(&y, &lb).unwrap(),
            &d.discriminate(&fx, &la).unwrap(),
        )
        .unwrap()
    };
    let (c, f) = check_param_grads(&[d.params()], &["discriminator"], SAMPLES, 5, &adv_d);
    checked += c;
    failures.extend(f);
    let adv_g = || {
        let (fy, fx) = fakes();
        losses::generator_adv_loss(
            &d.discriminate(&fy, &lb).unwrap(),
            &d.discriminate(&fx, &la).unwrap(),
            AdversarialMode::NonSaturating,
        )
        .unwrap()
    };
    let (c, f) = check_param_grads(&param_sets(m), &GEN_AND_PSI, 2, 6, &adv_g);
    checked += c;
    failures.extend(f);
    SuiteResult { name: "adversarial losses wrt logits, discriminator and generator", checked, failures }
}

pub fn generator_outputs(m: &EditModel) -> SuiteResult {
    let (x, exemplar) = pair();
    let label = m.registry().label(1).unwrap();
    let r = uniform(&[1, 3, 8, 8], 40, DType::F64);
    let project = |out: Tensor| (out * &r).unwrap().sum_all().unwrap();
    let mut checked = 0;
    let mut failures = Vec::new();

    // θ_p as a free vector
    let theta = m.params_for(&exemplar, &label).unwrap().tensor().detach();
    let v = Var::from_tensor(&theta).unwrap();
    let (c, f) = check_input_grads(&v, 40, 7, "theta_p", &|t| {
        let p = edit_core::DynamicParams::new(t.clone()).unwrap();
        project(m.generator().forward(&x, &p).unwrap())
    });
    checked += c;
    failures.extend(f);

    // θ_s with θ_p held fixed
    let fixed = edit_core::DynamicParams::new(theta.clone()).unwrap();
    let (c, f) = check_param_grads(&[m.generator().params()], &["generator.shared"], SAMPLES, 8, &|| {
        project(m.generator().forward(&x, &fixed).unwrap())
    });
    checked += c;
    failures.extend(f);

    // ψ through the parameter network
    let (c, f) = check_param_grads(&[m.param_net().params()], &["param_net"], SAMPLES, 9, &|| {
        project(m.translate(&x, &exemplar, &label).unwrap())
    });
    checked += c;
    failures.extend(f);
    SuiteResult { name: "generator output wrt theta_p, theta_s and psi", checked, failures }
}

pub fn all() -> Vec<SuiteResult> {
    let m = mini_model(DType::F64);
    vec![cycle(&m), style(&m), adversarial(&m), generator_outputs(&m)]
}
