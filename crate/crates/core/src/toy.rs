//! Small fixed instances used by tests, examples and the acceptance suite.

use crate::models::{bayes_model_from_joint, perturb_model, CondModel, GroundTruthJoint, JointKind, ModelMode};
use crate::rng::stream;
use crate::seqspace::SeqSpace;

pub const A: usize = 0;
pub const B: usize = 1;

/// Two positions, two symbols, with inconsistent conditionals: each marginal is
/// 0.5 but `p(x² = A | x¹ = A) = p(x¹ = A | x² = A) = 0.8` and the `B`
/// counterparts are 0.3, so the two orderings disagree on `AB` and `BA`.
pub fn toy_a() -> CondModel {
    let space = SeqSpace::single_block(2, 2).expect("valid space");
    CondModel::from_fn(space, ModelMode::Fitted, 0.0, |_, _, cells| {
        let other = cells.iter().flatten().next();
        let a = match other {
            None => 0.5,
            Some(&A) => 0.8,
            Some(_) => 0.3,
        };
        vec![a, 1.0 - a]
    })
    .expect("valid toy model")
}

/// The joint implied by Toy-A under the identity ordering.
pub fn toy_a_joint() -> GroundTruthJoint {
    let space = SeqSpace::single_block(2, 2).expect("valid space");
    GroundTruthJoint::new(space, vec![0.4, 0.1, 0.15, 0.35], None).expect("valid joint")
}

/// `V = 4`, `L = L' = 6`.
pub fn stress_space() -> SeqSpace {
    SeqSpace::single_block(4, 6).expect("valid space")
}

pub fn stress_joint(seed: u64) -> GroundTruthJoint {
    GroundTruthJoint::random(stress_space(), JointKind::RandomJoint, 1.0, &mut stream(seed, &[1]))
        .expect("valid joint")
}

/// Bayes-optimal model of [`stress_joint`] perturbed with `ε = 0.5`.
pub fn stress_model(seed: u64) -> CondModel {
    let bayes = bayes_model_from_joint(&stress_joint(seed)).expect("bayes model fits");
    perturb_model(&bayes, 0.5, &mut stream(seed, &[2])).expect("valid perturbation")
}
