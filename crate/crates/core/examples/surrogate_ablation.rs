// TUBE surrogate ablation: self-averaged ψ_M for growing M against the ARM
// surrogates, reported as perplexity gaps to the exact value.

use tube::experiments::{surrogate_ablation, AblationConfig, ExperimentConfig, ModelSource, Workbench};
use tube::toy::stress_space;

pub fn run_example() -> tube::Result<()> {
    let mut cfg = ExperimentConfig::new(stress_space(), ModelSource::Perturbed { epsilon: 0.5 }, 0);
    cfg.test_size = 8;
    cfg.finetune_size = 1000;
    let bench = Workbench::build(&cfg)?;

    let mut ablation = AblationConfig::new(2);
    ablation.replicates = 4;
    ablation.m_grid = Some(vec![1, 4, 16]);
    for r in surrogate_ablation(&bench, &ablation)? {
        println!("{:<12} K = {:<3} PPL {:>9.4}  gap {:.4}", r.surrogate, r.k, r.mean_ppl, r.mean_gap);
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
