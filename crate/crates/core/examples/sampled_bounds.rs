// Monte Carlo bound estimates from sampled ordering banks.
//
// Each bank records which stream and draw range it came from, so a TUBE
// surrogate built from one half of a bank can be checked for independence
// from the half it is applied to.

use tube::estimators::{self, SampleBank};
use tube::models::sample_from_mixture;
use tube::rng::{derive_seed, seeded};
use tube::seqspace::{OrderBank, Regime};
use tube::toy::stress_model;

pub fn run_example() -> tube::Result<()> {
    let model = stress_model(1);
    let space = *model.space();
    let regime = Regime::AnyOrder;
    let x = sample_from_mixture(&model, &mut seeded(4), regime)?;
    let block = x.blocks(&space)[0];

    let source = derive_seed(1, &[7]);
    let orders = OrderBank::sample(regime, space.block_size(), 64, source);
    let bank = SampleBank::evaluate(&model, block, orders.orders(), source, 0)?;
    let (first, second) = bank.split_at(32);
    let psi = estimators::surrogate_self(&first)?;

    let results = [
        estimators::elbo(&bank)?,
        estimators::elbo_k(&bank)?,
        estimators::tube(&second, &psi)?,
        estimators::cubo(&bank, 2.0)?,
        estimators::tvo_upper(&bank, 200)?,
        estimators::isvgb(&[first.split_at(16), second.split_at(16)])?,
        estimators::exact(&model, block, regime)?,
    ];
    for r in &results {
        println!("{:<8} {:>12.6}  ({:?})", r.estimator.name(), r.value, r.direction());
    }

    // reusing the surrogate's own samples is refused
    assert!(estimators::tube(&first, &psi).is_err());
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
