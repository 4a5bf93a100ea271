// Replication check: with a fixed surrogate, the K-sample TUBE is an
// unbiased estimate of the population TUBE with variance Var/(Kψ²).

use tube::estimators::Population;
use tube::experiments::unbiasedness_variance_study;
use tube::models::sample_from_mixture;
use tube::rng::seeded;
use tube::seqspace::Regime;
use tube::toy::stress_model;

pub fn run_example() -> tube::Result<()> {
    let model = stress_model(3);
    let space = *model.space();
    let x = sample_from_mixture(&model, &mut seeded(1), Regime::AnyOrder)?;
    let block = x.blocks(&space)[0];
    let log_psi = Population::enumerate(&model, block, Regime::AnyOrder)?.elbo();

    let stats = unbiasedness_variance_study(&model, block, Regime::AnyOrder, log_psi, &[1, 4, 16], 20_000, 8)?;
    for s in &stats {
        println!(
            "K = {:<3} mean {:.5} (pop {:.5}, z = {:+.2})  var {:.4e} vs theory {:.4e}",
            s.k,
            s.mean,
            s.population,
            s.z,
            s.variance,
            s.theoretical_variance.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
