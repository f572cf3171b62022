use jamsense::classifier::{
    ajc_run, argmin, confusion, learn_jammer_vocabulary, majority, p_cc, subcarrier_noise, subcarrier_slice, ModelBank,
};
use jamsense::mjpf::FilterConfig;
use jamsense::radio::ModulationScheme;
use jamsense::transport::scheme_stream;
use jamsense::vocab::{LearnConfig, VocabTag};
use jamsense::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn evidence(scheme: ModulationScheme, n_bits: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..n_bits).map(|_| rng.gen_range(0..2u8)).collect();
    scheme_stream(scheme, &bits, 1, Some(20.0), &mut rng).unwrap().observations
}

#[test]
fn label_helpers() {
    assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
    assert_eq!(majority(&[2, 1, 2, 1, 0], 3), 1);
    assert_eq!(majority(&[], 3), 0);
    assert_eq!(p_cc(&[0, 1, 1, 2], &[0, 1, 2, 2]).unwrap(), 0.75);
    assert!(matches!(p_cc(&[0], &[0, 1]), Err(Error::Length(1, 2))));
    assert!(p_cc(&[], &[]).is_err());
    let c = confusion(&[0, 1, 1, 0], &[0, 1, 0, 0], 2).unwrap();
    assert_eq!(c, DMatrix::from_row_slice(2, 2, &[2, 1, 0, 1]));
    assert!(confusion(&[2], &[0], 2).is_err());
}

#[test]
fn subcarrier_views() {
    let v = DVector::from_fn(8, |i, _| i as f64);
    assert_eq!(subcarrier_slice(&v, 2, 1), DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]));
    assert_eq!(subcarrier_noise(&v, 2), DVector::from_vec(vec![0.5, 2.5, 4.5, 6.5]));
}

#[test]
fn bank_separates_low_and_high_order_jammers() {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Qam16];
    let r = DVector::from_element(4, 0.01);
    let cfg = LearnConfig::default();
    let vocabs: Vec<_> = schemes
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let e = evidence(s, 400 * s.bits_per_symbol(), k as u64);
            let steps: Vec<usize> = (0..e.len()).collect();
            learn_jammer_vocabulary(&e, &steps, s, 1, &r, &cfg).unwrap()
        })
        .collect();
    assert!(vocabs.iter().zip(schemes).all(|(v, s)| v.tag == VocabTag::Jammer(s)));
    let bank = ModelBank::new(vocabs.clone(), &FilterConfig::default()).unwrap();
    assert_eq!(bank.schemes, schemes);
    for (k, &s) in schemes.iter().enumerate() {
        let test = evidence(s, 120 * s.bits_per_symbol(), 50 + k as u64);
        let out = ajc_run(&bank, &test, 9).unwrap();
        let truth = vec![k; out.k_hat.len()];
        let acc = p_cc(&out.k_hat, &truth).unwrap();
        assert!(acc > 0.8, "{s}: {acc}");
        assert_eq!(out.majority, k);
        assert_eq!(ajc_run(&bank, &test, 9).unwrap(), out, "same seed, same result");
    }

    let dup = vec![vocabs[0].clone(), vocabs[0].clone()];
    assert!(ModelBank::new(dup, &FilterConfig::default()).is_err());
    assert!(ModelBank::new(Vec::new(), &FilterConfig::default()).is_err());
    assert!(ajc_run(&bank, &[], 0).is_err());
}
