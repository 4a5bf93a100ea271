// Stable log-space arithmetic used by every estimator.

use tube::logspace::{centered_mean, log_add_exp, log_mean_exp, log_sum_exp};

pub fn run_example() -> tube::Result<()> {
    // sequence log-likelihoods are far below exp's underflow point
    let logliks = [-1200.0, -1201.5, -1199.25];
    println!("log Σ exp  = {:.9}", log_sum_exp(&logliks));
    println!("log mean   = {:.9}", log_mean_exp(&logliks));
    println!("log(e^a + e^b) = {:.9}", log_add_exp(-1200.0, -1200.0));
    println!("centered mean  = {:.9}", centered_mean(&logliks));
    println!("with a zero-probability term: {:.9}", log_sum_exp(&[-1200.0, f64::NEG_INFINITY]));
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
