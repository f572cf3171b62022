use jamsense::mjpf::{init_belief, run_filter, sir_resample, step, write_trace, FilterConfig, FilterModel, Particle};
use jamsense::radio::ModulationScheme;
use jamsense::transport::{learn_signal_vocabulary, scheme_stream};
use jamsense::vocab::LearnConfig;
use jamsense::Error;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(seed: u64, n_bits: usize) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..n_bits).map(|_| rng.gen_range(0..2u8)).collect();
    scheme_stream(ModulationScheme::Qpsk, &bits, 2, Some(18.0), &mut rng).unwrap().observations
}

fn model() -> FilterModel {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bits: Vec<u8> = (0..1_000).map(|_| rng.gen_range(0..2u8)).collect();
    let s = scheme_stream(ModulationScheme::Qpsk, &bits, 2, Some(18.0), &mut rng).unwrap();
    let v = learn_signal_vocabulary(&s, &LearnConfig::default()).unwrap();
    FilterModel::new(v, FilterConfig::default()).unwrap()
}

fn on_simplex(v: &[f64]) -> bool {
    v.iter().all(|x| *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

#[test]
fn step_outputs_stay_normalized() {
    let m = model();
    let obs = stream(2, 200);
    let mut b = init_belief(&m, &obs[0], m.cfg.n_particles, 4).unwrap();
    for z in &obs {
        let o = step(&mut b, z, &m).unwrap();
        assert!(on_simplex(&b.weights()));
        assert!(on_simplex(&o.pi_s) && on_simplex(&o.lambda_s));
        assert!(o.ess >= 1.0 - 1e-9 && o.ess <= m.cfg.n_particles as f64 + 1e-9);
        assert!(o.snapshot.cla.is_finite() && o.snapshot.cla >= 0.0);
    }
}

#[test]
fn filter_is_deterministic_and_checks_dimensions() {
    let m = model();
    let obs = stream(3, 120);
    let a = run_filter(&m, &obs).unwrap();
    let b = run_filter(&m, &obs).unwrap();
    let cla = |o: &[jamsense::mjpf::StepOutput]| o.iter().map(|s| s.snapshot.cla).collect::<Vec<_>>();
    assert_eq!(cla(&a), cla(&b));
    assert!(run_filter(&m, &[]).unwrap().is_empty());
    let short = DVector::zeros(3);
    assert!(matches!(run_filter(&m, &[short]), Err(Error::Dimension { expected: 4, got: 3 })));
    assert!(init_belief(&m, &obs[0], 0, 0).is_err());

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.csv");
    write_trace(&p, &a).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,winner,ess,klda,cla,clb,dcla_1");
    assert_eq!(text.lines().count(), a.len() + 1);
}

fn particle(i: usize, weight: f64) -> Particle {
    Particle {
        superstate: i,
        previous: i,
        dwell: 1,
        weight,
        mean: DVector::zeros(4),
        cov: None,
    }
}

#[test]
fn resampling_a_point_mass_copies_it() {
    let ps: Vec<Particle> = (0..5).map(|i| particle(i, if i == 3 { 1.0 } else { 0.0 })).collect();
    let out = sir_resample(&ps, &mut ChaCha8Rng::seed_from_u64(0));
    assert!(out.iter().all(|p| p.superstate == 3 && p.weight == 0.2));
}

proptest! {
    #[test]
    fn resampling_keeps_count_and_flattens_weights(
        w in prop::collection::vec(0.0f64..1.0, 1..40),
        seed in any::<u64>(),
    ) {
        let ps: Vec<Particle> = w.iter().enumerate().map(|(i, &x)| particle(i, x)).collect();
        let out = sir_resample(&ps, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(out.len(), ps.len());
        let n = ps.len() as f64;
        prop_assert!(out.iter().all(|p| (p.weight - 1.0 / n).abs() < 1e-15));
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            prop_assert!(out.iter().all(|p| w[p.superstate] > 0.0));
        }
    }
}
