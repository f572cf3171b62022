use std::collections::BTreeMap;

use jamsense::radio::ModulationScheme;
use jamsense::transport::{interaction_matrix, learn_plan, retiming_factor, scheme_stream, TransportPlan, VocabGraph};
use jamsense::vocab::LearnConfig;
use jamsense::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

fn bpsk_to(target: ModulationScheme) -> TransportPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let b = bits(2_400, 20);
    let src = scheme_stream(ModulationScheme::Bpsk, &b, 1, Some(30.0), &mut rng).unwrap();
    let tgt = scheme_stream(target, &b, 1, Some(30.0), &mut rng).unwrap();
    learn_plan(&src, &tgt, &LearnConfig::default()).unwrap().0
}

#[test]
fn retiming_factor_is_the_bit_ratio() {
    assert_eq!(retiming_factor(2, 4).unwrap(), 2);
    assert_eq!(retiming_factor(2, 64).unwrap(), 6);
    assert_eq!(retiming_factor(4, 16).unwrap(), 2);
    assert!(retiming_factor(4, 8).is_err());
    assert!(retiming_factor(16, 4).is_err());
    assert!(retiming_factor(3, 9).is_err());
}

#[test]
fn interaction_matrix_matches_hand_counts() {
    let j = interaction_matrix(&[0, 1, 1, 1, 0, 0], &[1, 0, 1], 2, 2, 2).unwrap();
    assert_eq!(j.gamma, 2);
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0 / 3.0, 1.0 / 3.0]);
    assert!((&j.marginal - expected).abs().max() < 1e-15);
    let tuples: BTreeMap<Vec<usize>, Vec<f64>> = [
        (vec![0, 0], vec![0.0, 1.0]),
        (vec![0, 1], vec![0.0, 1.0]),
        (vec![1, 1], vec![1.0, 0.0]),
    ]
    .into_iter()
    .collect();
    assert_eq!(j.tuples, tuples);

    assert!(interaction_matrix(&[0, 1], &[0], 0, 2, 2).is_err());
    assert!(matches!(interaction_matrix(&[0, 1, 0], &[0], 2, 2, 2), Err(Error::Length(3, 2))));
    assert!(interaction_matrix(&[0, 2], &[0], 2, 2, 2).is_err());
}

#[test]
fn plan_round_trips_through_json() {
    let plan = bpsk_to(ModulationScheme::Qpsk);
    assert_eq!(plan.gamma, 2);
    assert_eq!((plan.source_nodes.len(), plan.target_nodes.len()), (2, 4));
    let back: TransportPlan = serde_json::from_str(&plan.to_json().unwrap()).unwrap();
    assert_eq!(back, plan);
    for m in [&plan.matching, &plan.interaction.marginal] {
        for row in m.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn noiseless_blocks_convert_to_the_gray_mapped_point() {
    let plan = bpsk_to(ModulationScheme::Qpsk);
    let qpsk = ModulationScheme::Qpsk;
    for block in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        let src: Vec<_> = ModulationScheme::Bpsk.modulate(&block).unwrap();
        let labels: Vec<usize> = src
            .iter()
            .map(|s| {
                plan.source_nodes
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        let da = (a.1.mean[0] - s.re).powi(2) + (a.1.mean[1] - s.im).powi(2);
                        let db = (b.1.mean[0] - s.re).powi(2) + (b.1.mean[1] - s.im).powi(2);
                        da.total_cmp(&db)
                    })
                    .unwrap()
                    .0
            })
            .collect();
        let states: Vec<DVector<f64>> = labels.iter().map(|&k| plan.source_nodes[k].mean()).collect();
        let c = plan.convert(&states, &labels).unwrap();
        let want = qpsk.modulate(&block).unwrap()[0];
        assert!((c.state[0] - want.re).abs() < 0.05 && (c.state[1] - want.im).abs() < 0.05, "{block:?}");
    }
    let one = plan.source_nodes[0].mean();
    assert!(plan.convert(&[one], &[0]).is_err(), "off-schedule call");
}

#[test]
fn higher_order_targets_use_their_retiming_factor() {
    let plan = bpsk_to(ModulationScheme::Qam16);
    assert_eq!(plan.gamma, 4);
    assert_eq!(plan.target_nodes.len(), 16);
}

#[test]
fn vocab_graph_of_a_stream_is_connected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = scheme_stream(ModulationScheme::Qpsk, &bits(800, 3), 1, Some(25.0), &mut rng).unwrap();
    let v = jamsense::transport::learn_signal_vocabulary(&s, &LearnConfig::default()).unwrap();
    assert!(VocabGraph::new(v).is_connected());
    assert!(scheme_stream(ModulationScheme::Qpsk, &[0, 1], 0, None, &mut rng).is_err());
}

proptest! {
    #[test]
    fn interaction_rows_are_stochastic(
        target in prop::collection::vec(0usize..4, 1..40),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source: Vec<usize> = (0..2 * target.len()).map(|_| rng.gen_range(0..2)).collect();
        let j = interaction_matrix(&source, &target, 2, 2, 4).unwrap();
        for row in j.marginal.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        for dist in j.tuples.values() {
            prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
