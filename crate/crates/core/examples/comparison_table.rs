// The estimator comparison table: perplexity bounds per generation regime.

use tube::experiments::{run_comparison_table, ComparisonConfig, ExperimentConfig, ModelSource, Workbench};
use tube::seqspace::SeqSpace;

pub fn run_example() -> tube::Result<()> {
    let space = SeqSpace::single_block(4, 4)?;
    let mut cfg = ExperimentConfig::new(space, ModelSource::Fit, 2);
    cfg.train_size = 2000;
    cfg.test_size = 32;
    cfg.finetune_size = 500;
    let bench = Workbench::build(&cfg)?;

    let mut table_cfg = ComparisonConfig::new(3);
    table_cfg.reseeds = 3;
    let table = run_comparison_table(&bench, &table_cfg)?;
    println!("{:<8} {:<8} {:>10} {:>9}  violation", "regime", "bound", "PPL", "±");
    for row in &table.rows {
        println!(
            "{:<8} {:<8} {:>10.4} {:>9.2e}  {}",
            row.regime, row.estimator, row.mean_ppl, row.std_ppl, row.violation
        );
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
