use proptest::prelude::*;
use tube::estimators::values;
use tube::logspace::{log_add_exp, log_mean_exp, log_sum_exp};
use tube::models::{
    bayes_model_from_joint, exact_logprob, exact_logprob_sequence, logprob_given_order, perturb_model, read_corpus,
    write_corpus, CondModel, GroundTruthJoint, JointKind,
};
use tube::rng::{seeded, stream};
use tube::seqspace::{Regime, SeqSpace, Sequence};

fn small_model(seed: u64, v: usize, length: usize, block: usize, epsilon: f64) -> CondModel {
    let space = SeqSpace::new(v, length, block).unwrap();
    let joint = GroundTruthJoint::random(space, JointKind::BlockMarkov, 0.8, &mut stream(seed, &[1])).unwrap();
    perturb_model(&bayes_model_from_joint(&joint).unwrap(), epsilon, &mut stream(seed, &[2])).unwrap()
}

fn loglik() -> impl Strategy<Value = f64> {
    -60.0f64..-0.01
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mixture_likelihood_is_normalized(seed: u64, v in 2usize..=3, n in 1usize..=3, blocks in 1usize..=2, steps in 1usize..=3, epsilon in 0.0f64..=1.0) {
        let model = small_model(seed, v, n * blocks, n, epsilon);
        let space = *model.space();
        for regime in [Regime::AnyOrder, Regime::Masked { steps }] {
            let logs: Vec<f64> = Sequence::enumerate(&space)
                .unwrap()
                .iter()
                .map(|x| exact_logprob_sequence(&model, x, regime).unwrap())
                .collect();
            prop_assert!(log_sum_exp(&logs).abs() < 1e-10);
        }
    }

    #[test]
    fn every_ordering_defines_a_distribution(seed: u64, v in 2usize..=3, n in 1usize..=4, epsilon in 0.0f64..=1.0) {
        let model = small_model(seed, v, n, n, epsilon);
        let space = *model.space();
        let order = Regime::Masked { steps: 2 }.sample(&mut seeded(seed), n);
        let logs: Vec<f64> = Sequence::enumerate(&space)
            .unwrap()
            .iter()
            .map(|x| logprob_given_order(&model, x.blocks(&space)[0], &order).unwrap())
            .collect();
        prop_assert!(log_sum_exp(&logs).abs() < 1e-10);
    }

    #[test]
    fn bayes_model_matches_its_joint(seed: u64, v in 2usize..=3, n in 1usize..=4) {
        let space = SeqSpace::single_block(v, n).unwrap();
        let joint = GroundTruthJoint::random(space, JointKind::RandomJoint, 1.0, &mut seeded(seed)).unwrap();
        let model = bayes_model_from_joint(&joint).unwrap();
        let x = joint.sample(&mut seeded(seed ^ 1));
        let exact = exact_logprob(&model, x.blocks(&space)[0], Regime::AnyOrder).unwrap();
        prop_assert!((exact - joint.log_prob(&x)).abs() < 1e-10);
    }

    #[test]
    fn tube_dominates_elbo_k_per_bank(bank in prop::collection::vec(loglik(), 1..12), log_psi in -60.0f64..0.0) {
        let elbo_k = values::elbo_k(&bank);
        prop_assert!(values::tube(&bank, log_psi) >= elbo_k - 1e-12 * (1.0 + elbo_k.abs()));
    }

    #[test]
    fn cubo_is_monotone_in_beta(bank in prop::collection::vec(loglik(), 1..12), b1 in 1.0f64..8.0, db in 0.0f64..4.0) {
        let (lo, hi) = (values::cubo(&bank, b1), values::cubo(&bank, b1 + db));
        prop_assert!(hi >= lo - 1e-12 * (1.0 + lo.abs()));
        prop_assert!(lo >= values::elbo_k(&bank) - 1e-12 * (1.0 + lo.abs()));
    }

    #[test]
    fn log_space_kernels_agree_with_direct_arithmetic(v in prop::collection::vec(-30.0f64..5.0, 1..10), shift in -500.0f64..500.0) {
        let direct = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&v) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        prop_assert!((log_mean_exp(&shifted) - shift - log_mean_exp(&v)).abs() < 1e-9);
        prop_assert!((log_add_exp(v[0], shift) - log_sum_exp(&[v[0], shift])).abs() < 1e-12 * (1.0 + shift.abs()));
    }

    #[test]
    fn corpus_and_model_files_round_trip(seed: u64, count in 0usize..20, epsilon in 0.0f64..=1.0) {
        let model = small_model(seed, 3, 4, 2, epsilon);
        let space = *model.space();
        let corpus: Vec<Sequence> = (0..count).map(|i| Sequence::from_index(&space, (seed as usize).wrapping_add(i * 7) % 81)).collect();
        prop_assert_eq!(read_corpus(&space, &write_corpus(&space, &corpus)).unwrap(), corpus);
        let back = CondModel::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), model.to_json().unwrap());
    }
}
