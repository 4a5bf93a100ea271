// CUBO_β across β and bank size: when does the sampled estimate stop being
// an upper bound?

use tube::experiments::{cubo_sweep, ExperimentConfig, ModelSource, SweepConfig, Workbench};
use tube::toy::stress_space;

pub fn run_example() -> tube::Result<()> {
    let mut cfg = ExperimentConfig::new(stress_space(), ModelSource::Perturbed { epsilon: 0.5 }, 0);
    cfg.test_size = 8;
    cfg.finetune_size = 0;
    let bench = Workbench::build(&cfg)?;

    let mut sweep = SweepConfig::new(1);
    sweep.bank_sizes = Some(vec![4, 16, 64]);
    sweep.replicates = 20;
    let records = cubo_sweep(&bench, &sweep)?;
    for r in &records {
        println!(
            "β = {:<4} K = {:<3} mean {:>9.4}  exact {:>9.4}  {}",
            r.beta,
            r.bank_size,
            r.mean,
            r.exact,
            if r.violation { "below exact" } else { "" }
        );
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
