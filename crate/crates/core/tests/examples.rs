#[allow(dead_code)]
mod log_space {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/log_space.rs"));
}

#[test]
fn log_space_runs() {
    log_space::run_example().expect("log_space example should run");
}

#[allow(dead_code)]
mod orderings {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/orderings.rs"));
}

#[test]
fn orderings_runs() {
    orderings::run_example().expect("orderings example should run");
}

#[allow(dead_code)]
mod toy_bounds {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/toy_bounds.rs"));
}

#[test]
fn toy_bounds_runs() {
    toy_bounds::run_example().expect("toy_bounds example should run");
}

#[allow(dead_code)]
mod fit_model {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fit_model.rs"));
}

#[test]
fn fit_model_runs() {
    fit_model::run_example().expect("fit_model example should run");
}

#[allow(dead_code)]
mod exact_likelihood {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/exact_likelihood.rs"));
}

#[test]
fn exact_likelihood_runs() {
    exact_likelihood::run_example().expect("exact_likelihood example should run");
}

#[allow(dead_code)]
mod sampled_bounds {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sampled_bounds.rs"));
}

#[test]
fn sampled_bounds_runs() {
    sampled_bounds::run_example().expect("sampled_bounds example should run");
}

#[allow(dead_code)]
mod surrogates {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/surrogates.rs"));
}

#[test]
fn surrogates_runs() {
    surrogates::run_example().expect("surrogates example should run");
}

#[allow(dead_code)]
mod comparison_table {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/comparison_table.rs"));
}

#[test]
fn comparison_table_runs() {
    comparison_table::run_example().expect("comparison_table example should run");
}

#[allow(dead_code)]
mod cubo_sweep {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cubo_sweep.rs"));
}

#[test]
fn cubo_sweep_runs() {
    cubo_sweep::run_example().expect("cubo_sweep example should run");
}

#[allow(dead_code)]
mod surrogate_ablation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/surrogate_ablation.rs"));
}

#[test]
fn surrogate_ablation_runs() {
    surrogate_ablation::run_example().expect("surrogate_ablation example should run");
}

#[allow(dead_code)]
mod unbiasedness {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/unbiasedness.rs"));
}

#[test]
fn unbiasedness_runs() {
    unbiasedness::run_example().expect("unbiasedness example should run");
}

#[allow(dead_code)]
mod cli_pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/cli_pipeline.rs"));
}

#[test]
fn cli_pipeline_runs() {
    cli_pipeline::run_example().expect("cli_pipeline example should run");
}
