// TUBE under different surrogates ψ(x).
//
// The bound holds for any positive ψ; its tightness depends on how close
// ψ is to the exact likelihood.

use tube::estimators::{self, Population, SurrogateKind};
use tube::experiments::{finetune_arm, ExperimentConfig, ModelSource, Workbench};
use tube::seqspace::Regime;
use tube::toy::stress_space;

pub fn run_example() -> tube::Result<()> {
    let mut cfg = ExperimentConfig::new(stress_space(), ModelSource::Perturbed { epsilon: 0.5 }, 5);
    cfg.train_size = 2000;
    cfg.test_size = 1;
    cfg.finetune_size = 0;
    let bench = Workbench::build(&cfg)?;
    let block = bench.test[0].blocks(&bench.space)[0];
    let pop = Population::enumerate(&bench.model, block, Regime::AnyOrder)?;
    println!("exact {:.6}, ELBO {:.6}", pop.exact(), pop.elbo());

    let finetuned = finetune_arm(&bench.model, &bench.arm, 2000, 1.0, 11)?.expect("nonzero sample count");
    let candidates = [
        estimators::surrogate_arm(&bench.arm, block)?,
        estimators::surrogate_arm_finetuned(&finetuned, block)?,
        estimators::Surrogate::new(SurrogateKind::Fixed, pop.elbo(), None)?,
        estimators::Surrogate::fixed(pop.exact())?,
    ];
    for psi in &candidates {
        println!(
            "{:<10} log ψ = {:>9.4}  TUBE = {:>9.4}  relative variance {:.3e}",
            psi.kind().label(),
            psi.log_psi(),
            pop.tube(psi.log_psi()),
            pop.relative_variance(psi.log_psi())
        );
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
