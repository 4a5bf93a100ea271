// Fit a tabular any-order model and an ARM baseline from a synthetic corpus,
// then round-trip the model through its JSON file format.

use tube::models::{
    exact_logprob_sequence, fit_arm, fit_tabular, CondModel, GroundTruthJoint, JointKind, MaskPlan,
};
use tube::rng::stream;
use tube::seqspace::{Regime, SeqSpace};

pub fn run_example() -> tube::Result<()> {
    let space = SeqSpace::single_block(3, 4)?;
    let joint = GroundTruthJoint::random(space, JointKind::RandomJoint, 1.0, &mut stream(3, &[1]))?;
    let train = joint.sample_corpus(&mut stream(3, &[2]), 2000);
    let test = joint.sample_corpus(&mut stream(3, &[3]), 50);

    let model = fit_tabular(space, &train, MaskPlan::All, 1.0)?;
    let arm = fit_arm(space, &train, 1.0)?;

    let mut truth = 0.0;
    let mut ao = 0.0;
    let mut left_to_right = 0.0;
    for x in &test {
        truth += joint.log_prob(x);
        ao += exact_logprob_sequence(&model, x, Regime::AnyOrder)?;
        left_to_right += exact_logprob_sequence(&arm, x, Regime::Masked { steps: space.block_size() })?;
    }
    let n = test.len() as f64;
    println!("mean test log-likelihood: truth {:.4}, AO-ARM {:.4}, ARM (mixture) {:.4}", truth / n, ao / n, left_to_right / n);

    let json = model.to_json()?;
    let back = CondModel::from_json(&json)?;
    println!("model file: {} bytes, {} contexts, reload identical: {}", json.len(), back.num_contexts(), back.to_json()? == json);
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
