//! Short training run on the synthetic domains at the default desk scale.
//! Prints per-step losses, the time per step and the parameter counts.
//!
//!     cargo run --release -p edit-core --example smoke -- 200

use candle_core::{DType, Device};
use edit_core::trainer::{load_training_data, Trainer};
use edit_core::{Config, Result, TrainState};

fn main() -> Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cfg = Config { steps_per_epoch: 1000, ..Config::default() };
    let state = TrainState::new(&cfg, DType::F32, &Device::Cpu)?;
    let mut trainer = Trainer::new(state, load_training_data(&cfg)?)?;
    let start = std::time::Instant::now();
    println!("step cyc sty adv_d adv_g total");
    for _ in 0..steps {
        let r = trainer.step()?.report;
        println!(
            "{} {:.4} {:.4} {:.4} {:.4} {:.4}",
            trainer.state().step(),
            r.cyc,
            r.sty,
            r.adv_d,
            r.adv_g,
            r.total
        );
    }
    println!("{:?} per step", start.elapsed() / steps.max(1) as u32);
    println!("{:?}", trainer.state().model().count_params());
    Ok(())
}
