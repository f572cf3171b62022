use jamsense::jammer_ops::{switch_models, update_transition_matrix, JammerCodebook, TransitionEvidence};
use jamsense::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QPSK_JAMMER: [(f64, f64); 4] = [(2.0, 2.0), (-2.0, 2.0), (-2.0, -2.0), (2.0, -2.0)];

/// State vector `[I, Q, İ, Q̇]` per sub-carrier block for `d` sub-carriers.
fn block(iq: &[(f64, f64)]) -> DVector<f64> {
    let d = iq.len();
    let mut v = DVector::zeros(4 * d);
    for (n, (i, q)) in iq.iter().enumerate() {
        v[n] = *i;
        v[d + n] = *q;
    }
    v
}

#[test]
fn absent_hypothesis_wins_on_clean_blocks() {
    let cb = JammerCodebook { points: QPSK_JAMMER.to_vec() };
    let mu = block(&[(0.5, 0.5), (0.5, -0.5)]);
    let means = vec![&mu];
    let clean = block(&[(0.52, 0.47), (0.49, -0.51)]);
    assert!(cb.decode_present(&clean, &means, 2).is_none());
    let jammed = block(&[(2.5, 2.5), (-1.5, 1.5)]);
    let (m, codes) = cb.decode_present(&jammed, &means, 2).unwrap();
    assert_eq!((m, codes), (0, vec![0, 1]));

    let est = cb.estimate(&[clean, jammed], &[true, true], &means, 2).unwrap();
    assert_eq!(est[0], DVector::zeros(8));
    assert_eq!((est[1][0], est[1][1], est[1][2], est[1][3]), (2.0, -2.0, 2.0, 2.0));
    // Derivative block is the first difference of the estimate.
    assert_eq!((est[1][4], est[1][5], est[1][6], est[1][7]), (2.0, -2.0, 2.0, 2.0));
}

#[test]
fn refine_ignores_falsely_flagged_clean_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mu = block(&[(0.0, 0.0)]);
    let means = vec![&mu];
    let mut obs = Vec::new();
    for t in 0..400 {
        let j = if t < 360 { QPSK_JAMMER[t % 4] } else { (0.0, 0.0) };
        obs.push(block(&[(j.0 + rng.gen_range(-0.1..0.1), j.1 + rng.gen_range(-0.1..0.1))]));
    }
    let steps: Vec<usize> = (0..400).collect();
    let mut cb = JammerCodebook {
        points: QPSK_JAMMER.iter().map(|(a, b)| (0.8 * a, 0.8 * b)).collect(),
    };
    cb.refine(&obs, &steps, &means, 1, 5).unwrap();
    for (p, t) in cb.points.iter().zip(QPSK_JAMMER) {
        assert!((p.0 - t.0).abs() < 0.03 && (p.1 - t.1).abs() < 0.03, "{p:?} vs {t:?}");
    }
}

#[test]
fn codebook_rejects_misaligned_inputs() {
    let cb = JammerCodebook { points: QPSK_JAMMER.to_vec() };
    let mu = block(&[(0.0, 0.0)]);
    let z = block(&[(1.0, 1.0)]);
    assert!(matches!(cb.estimate(std::slice::from_ref(&z), &[], &[&mu], 1), Err(Error::Length(1, 0))));
    assert!(matches!(cb.estimate(&[z], &[true], &[&mu], 2), Err(Error::Dimension { .. })));
    let snapped = cb.snap(&block(&[(1.7, -2.4)]), 1);
    assert_eq!((snapped[0], snapped[1]), (2.0, -2.0));
}

#[test]
fn transition_update_matches_hand_computation() {
    let pi = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.3, 0.7]);
    let e1 = [-0.9, 0.3];
    let e2 = [0.1, -0.1];
    let one = update_transition_matrix(&pi, &[TransitionEvidence { occupied: vec![0], eps_s: &e1 }]).unwrap();
    assert_eq!(one, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.3, 0.7]));
    let two = update_transition_matrix(
        &pi,
        &[
            TransitionEvidence { occupied: vec![0], eps_s: &e1 },
            TransitionEvidence { occupied: vec![0, 1], eps_s: &e2 },
        ],
    )
    .unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[4.0 / 7.0, 3.0 / 7.0, 0.4, 0.6]);
    assert!((two - expected).abs().max() < 1e-12);
    let bad = [0.1];
    assert!(update_transition_matrix(&pi, &[TransitionEvidence { occupied: vec![0], eps_s: &bad }]).is_err());
}

#[test]
fn switching_picks_lower_cla_with_reference_on_ties() {
    assert_eq!(switch_models(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap(), vec![0, 1, 0]);
    assert!(matches!(switch_models(&[1.0], &[]), Err(Error::Length(1, 0))));
}

proptest! {
    #[test]
    fn transition_update_stays_row_stochastic(
        raw in prop::collection::vec(0.01f64..1.0, 9),
        eps in prop::collection::vec(prop::collection::vec(-0.5f64..0.5, 3), 1..6),
        occ in prop::collection::vec(prop::collection::vec(0usize..3, 1..3), 1..6),
    ) {
        let mut pi = DMatrix::from_row_slice(3, 3, &raw);
        for i in 0..3 {
            let s: f64 = pi.row(i).sum();
            pi.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let steps: Vec<TransitionEvidence<'_>> = eps
            .iter()
            .zip(occ.iter().cycle())
            .map(|(e, o)| TransitionEvidence { occupied: o.clone(), eps_s: e })
            .collect();
        let out = update_transition_matrix(&pi, &steps).unwrap();
        for i in 0..3 {
            prop_assert!(out.row(i).iter().all(|v| *v >= 0.0));
            prop_assert!((out.row(i).sum() - 1.0).abs() < 1e-9);
        }
    }
}
