// Exact marginal likelihood under the ordering mixture, compared with a
// brute-force average over every ordering.

use tube::logspace::log_mean_exp;
use tube::models::{exact_logprob, logprob_given_order};
use tube::seqspace::Regime;
use tube::toy::stress_model;

pub fn run_example() -> tube::Result<()> {
    let model = stress_model(0);
    let space = *model.space();
    let x = tube::models::sample_from_mixture(&model, &mut tube::rng::seeded(9), Regime::AnyOrder)?;
    let block = x.blocks(&space)[0];

    let dp = exact_logprob(&model, block, Regime::AnyOrder)?;
    let bank = Regime::AnyOrder.enumerate(space.block_size())?;
    let per_order = bank
        .orders()
        .iter()
        .map(|o| logprob_given_order(&model, block, o))
        .collect::<tube::Result<Vec<_>>>()?;
    let brute = log_mean_exp(&per_order);
    println!("x = {:?}", x.tokens());
    println!("subset recursion: {dp:.12}");
    println!("over {} orderings: {brute:.12}", per_order.len());
    assert!((dp - brute).abs() < 1e-9);

    for steps in [1, 2, 3] {
        let regime = Regime::Masked { steps };
        println!("{regime}: {:.6}", exact_logprob(&model, block, regime)?);
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
