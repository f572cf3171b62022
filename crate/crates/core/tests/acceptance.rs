//! End-to-end acceptance criteria. Every test writes one `PASS`/`FAIL` line
//! to stderr (bypassing output capture) before asserting.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use jamsense::active::{init_beliefs, update_beliefs, Transition};
use jamsense::gaussian::{bhattacharyya, is_spd, kl, symmetric_kl, Gaussian, GaussianMixture};
use jamsense::harness::experiments::{amc, antijam, classify, convert, detect, suppress, update};
use jamsense::harness::{median, run, ExperimentConfig, ExperimentKind, Manifest, SweepPoint};
use jamsense::jammer_ops::{update_transition_matrix, TransitionEvidence};
use jamsense::mjpf::{init_belief, step, FilterConfig, FilterModel};
use jamsense::radio::{JammerStrategy, JammerWaveform, ModulationScheme};
use jamsense::vocab::stats::{estimate_time_varying, estimate_transition_matrix, transition_counts, TRANSITION_EPS};
use jamsense::vocab::{Superstate, VocabTag, Vocabulary};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {verdict}: {detail}");
}

fn point(snr_db: f64, jsr_db: f64, seed: u64) -> SweepPoint {
    SweepPoint {
        snr_db,
        jsr_db,
        l: 4,
        bandwidth: 6,
        seed,
    }
}

#[test]
fn c01_detection_at_calibrated_threshold() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Detect);
    let o = detect(&cfg, &point(15.0, 6.0, 0)).unwrap();
    let pass = o.p_d >= 0.95 && o.p_fa <= 0.05;
    report(1, pass, &format!("P_d {:.4} (>= 0.95), P_fa {:.4} (<= 0.05)", o.p_d, o.p_fa));
    assert!(pass);
}

#[test]
fn c02_cla_auc_beats_energy_detector() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Detect);
    let mut detail = Vec::new();
    let mut pass = true;
    for jsr in [-5.0, 0.0, 6.0] {
        let (mut cla, mut ed) = (Vec::new(), Vec::new());
        for seed in 0..3 {
            let o = detect(&cfg, &point(15.0, jsr, seed)).unwrap();
            cla.push(o.cla.auc);
            ed.push(o.energy.auc);
        }
        let (c, e) = (median(&cla).unwrap(), median(&ed).unwrap());
        pass &= c >= e;
        detail.push(format!("JSR {jsr}: CLA {c:.4} vs ED {e:.4}"));
    }
    report(2, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn c03_suppression_mse_trend_and_ber() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Suppress);
    let jsrs = [-5.0, 0.0, 5.0, 10.0, 15.0];
    let mses: Vec<f64> = jsrs
        .iter()
        .map(|&j| suppress(&cfg, &point(15.0, j, 0)).unwrap().mse_after)
        .collect();
    let rises = mses.windows(2).filter(|w| w[1] > w[0]).count();
    let at6 = suppress(&cfg, &point(15.0, 6.0, 0)).unwrap();
    let pass = rises <= 1 && at6.ber_after < at6.ber_before;
    let trend: Vec<String> = jsrs.iter().zip(&mses).map(|(j, m)| format!("{j}:{m:.4}")).collect();
    report(
        3,
        pass,
        &format!(
            "MSE by JSR [{}] with {rises} rise(s) (<= 1); BER at 6 dB {:.4} -> {:.4}",
            trend.join(", "),
            at6.ber_before,
            at6.ber_after
        )
    );
    assert!(pass);
}

#[test]
fn c04_update_halves_median_cla() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Update);
    let o = update(&cfg, &point(15.0, 6.0, 0)).unwrap();
    let pass = o.ratio() >= 2.0;
    report(
        4,
        pass,
        &format!(
            "median CLA {:.3} -> {:.3}, ratio {:.3} (>= 2)",
            o.median_cla_reference,
            o.median_cla_updated,
            o.ratio()
        )
    );
    assert!(pass);
}

#[test]
fn c05_jammer_classification_accuracy() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Classify);
    let mut correct = 0.0;
    let mut total = 0.0;
    let mut per_seed = Vec::new();
    for seed in 0..3 {
        let o = classify(&cfg, &point(16.0, 6.0, seed)).unwrap();
        let n = o.confusion.sum() as f64;
        correct += o.confusion.diagonal().sum() as f64;
        total += n;
        per_seed.push(format!("{:.3}", o.p_cc));
    }
    let p = correct / total;
    let pass = p >= 0.85;
    report(5, pass, &format!("overall P_cc {p:.4} (>= 0.85), per seed [{}]", per_seed.join(", ")));
    assert!(pass);
}

/// Measured and analytical BER agree within a factor of three. Both are
/// floored at one bit error over the test length, below which the measured
/// rate carries no information.
fn within_factor_three(measured: f64, analytical: f64, bits: usize) -> bool {
    let floor = 1.0 / bits as f64;
    let r = measured.max(floor) / analytical.max(floor);
    (1.0 / 3.0..=3.0).contains(&r)
}

#[test]
fn c06_transport_conversion() {
    let mut cfg = ExperimentConfig::preset(ExperimentKind::Convert);
    cfg.transport.noiseless = true;
    let clean = convert(&cfg, &point(0.0, 0.0, 7)).unwrap();
    let row = |rows: &[jamsense::harness::experiments::ConversionRow], s| rows.iter().find(|r| r.target == s).unwrap().clone();
    let qpsk = row(&clean.rows, ModulationScheme::Qpsk);
    let q64 = row(&clean.rows, ModulationScheme::Qam64);
    let mut pass = qpsk.ber == 0.0 && qpsk.gamma == 2 && q64.gamma == 6;
    let mut detail = vec![format!(
        "noiseless BPSK->QPSK BER {}, gamma QPSK {} 64QAM {}",
        qpsk.ber, qpsk.gamma, q64.gamma
    )];
    cfg.transport.noiseless = false;
    for snr in [8.0, 16.0] {
        let o = convert(&cfg, &point(snr, 0.0, 7)).unwrap();
        for s in [ModulationScheme::Qpsk, ModulationScheme::Qam16] {
            let r = row(&o.rows, s);
            let ok = within_factor_three(r.ber, r.analytical_ber, cfg.transport.test_bits);
            pass &= ok;
            detail.push(format!("{snr} dB {s}: {:.2e} vs {:.2e}", r.ber, r.analytical_ber));
        }
    }
    report(6, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn c07_transport_amc_accuracy() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Amc);
    let mut pass = true;
    let mut detail = Vec::new();
    for snr in [8.0, 12.0, 16.0] {
        let o = amc(&cfg, &point(snr, 0.0, 11)).unwrap();
        pass &= o.accuracy >= 0.85;
        detail.push(format!("{snr} dB: {:.3}", o.accuracy));
    }
    report(7, pass, &format!("per-window accuracy (>= 0.85) {}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn c08_active_inference_against_baselines() {
    let cfg = ExperimentConfig::preset(ExperimentKind::Antijam);
    let mut rewards: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let (mut tail, mut rho) = (Vec::new(), Vec::new());
    for seed in 1..=3 {
        let o = antijam(&cfg, &point(15.0, 6.0, seed)).unwrap();
        for (log, r) in o.logs.iter().zip(&o.spearman) {
            rewards.entry(log.agent.name()).or_default().push(log.total_reward());
            if log.agent == jamsense::active::AgentKind::Ain {
                tail.push(log.collision_rate_from(log.steps.len() - 500));
                rho.push(*r);
            }
        }
    }
    let med = |k: &str| median(&rewards[k]).unwrap();
    let (ain, ql, fh) = (med("AIN"), med("QL"), med("FH"));
    let (tail, rho) = (median(&tail).unwrap(), median(&rho).unwrap());
    let pass = ain >= ql && ain >= fh && tail < 0.05 && rho < -0.9;
    report(
        8,
        pass,
        &format!(
            "median reward AIN {ain} QL {ql} FH {fh}; AIN last-500 collision rate {tail:.4} (< 0.05); Spearman {rho:.4} (< -0.9)"
        )
    );
    assert!(pass);
}

/// Composite Simpson weights on `n` (odd) points over `[a, b]`.
fn simpson(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

fn density(g: &Gaussian, x: &DVector<f64>) -> f64 {
    let d = g.dim() as f64;
    let inv = g.cov.clone().try_inverse().unwrap();
    let diff = x - &g.mean;
    let q = (diff.transpose() * inv * &diff)[(0, 0)];
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(d) * g.cov.determinant()).sqrt()
}

/// `(KL(p‖q), BC(p, q))` by quadrature on a box.
fn numeric_kl_bc(p: &Gaussian, q: &Gaussian, half_width: f64, n: usize) -> (f64, f64) {
    let rule = simpson(-half_width, half_width, n);
    let (mut klv, mut bc) = (0.0, 0.0);
    let mut add = |x: DVector<f64>, w: f64| {
        let (a, b) = (density(p, &x), density(q, &x));
        if a > 0.0 && b > 0.0 {
            klv += w * a * (a / b).ln();
        }
        bc += w * (a * b).sqrt();
    };
    if p.dim() == 1 {
        for &(x, w) in &rule {
            add(DVector::from_vec(vec![x]), w);
        }
    } else {
        for &(x, wx) in &rule {
            for &(y, wy) in &rule {
                add(DVector::from_vec(vec![x, y]), wx * wy);
            }
        }
    }
    (klv, bc)
}

fn single_superstate_vocab(mean: DVector<f64>, cov: DMatrix<f64>, r_diag: DVector<f64>) -> Vocabulary {
    let one = DMatrix::from_element(1, 1, 1.0);
    Vocabulary {
        tag: VocabTag::Reference,
        d: mean.len() / 4,
        superstates: vec![Superstate {
            id: 0,
            mean,
            cov,
            count: 10,
            cond: BTreeMap::new(),
        }],
        pi: one.clone(),
        pi_tau: vec![one; 3],
        r_diag,
    }
}

#[test]
fn c09_numerical_kernels() {
    let mut worst_div: f64 = 0.0;
    let fixtures = [
        (
            Gaussian::new(DVector::from_vec(vec![0.3]), DMatrix::from_element(1, 1, 0.8)).unwrap(),
            Gaussian::new(DVector::from_vec(vec![-0.4]), DMatrix::from_element(1, 1, 1.5)).unwrap(),
        ),
        (
            Gaussian::new(
                DVector::from_vec(vec![0.2, -0.1]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6]),
            )
            .unwrap(),
            Gaussian::new(
                DVector::from_vec(vec![-0.5, 0.4]),
                DMatrix::from_row_slice(2, 2, &[0.7, -0.2, -0.2, 1.2]),
            )
            .unwrap(),
        ),
    ];
    for (p, q) in &fixtures {
        let n = if p.dim() == 1 { 20_001 } else { 801 };
        let (kl_pq, bc) = numeric_kl_bc(p, q, 12.0, n);
        let (kl_qp, _) = numeric_kl_bc(q, p, 12.0, n);
        worst_div = worst_div
            .max((kl(p, q).unwrap() - kl_pq).abs())
            .max((symmetric_kl(p, q).unwrap() - kl_pq - kl_qp).abs())
            .max((bhattacharyya(p, q).unwrap().coefficient - bc).abs());
    }

    let mean = DVector::from_vec(vec![0.5, -0.2, 0.1, -0.05]);
    let mut cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.25, 0.02, 0.03]));
    cov[(0, 1)] = 0.05;
    cov[(1, 0)] = 0.05;
    let r_diag = DVector::from_vec(vec![0.1, 0.2, 0.05, 0.07]);
    let cfg = FilterConfig {
        n_particles: 7,
        ..FilterConfig::default()
    };
    let model = FilterModel::new(single_superstate_vocab(mean.clone(), cov, r_diag.clone()), cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zs: Vec<DVector<f64>> = (0..40).map(|_| DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let mut belief = init_belief(&model, &zs[0], cfg.n_particles, 0).unwrap();
    let r = DMatrix::from_diagonal(&r_diag);
    let q = &r * cfg.process_noise_scale;
    let u = mean.rows(2, 2).into_owned();
    let a = DMatrix::from_fn(4, 4, |i, j| if i == j && i < 2 { 1.0 } else { 0.0 });
    let mut x = zs[0].clone();
    let mut p = r.clone();
    let mut worst_kf: f64 = 0.0;
    for z in &zs {
        let out = step(&mut belief, z, &model).unwrap();
        let mut x_pred = &a * &x;
        x_pred[0] += u[0];
        x_pred[1] += u[1];
        x_pred[2] = u[0];
        x_pred[3] = u[1];
        let p_pred = &a * &p * a.transpose() + &q;
        let k = &p_pred * (&p_pred + &r).try_inverse().unwrap();
        x = &x_pred + &k * (z - &x_pred);
        p = (DMatrix::identity(4, 4) - &k) * &p_pred;
        worst_kf = worst_kf.max((&out.predicted - &x_pred).amax()).max((&out.posterior - &x).amax());
    }

    let mut counts_exact = true;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..6);
        let labels: Vec<usize> = (0..rng.gen_range(0..200)).map(|_| rng.gen_range(0..m)).collect();
        let mut brute = vec![vec![0.0; m]; m];
        for t in 1..labels.len() {
            brute[labels[t - 1]][labels[t]] += 1.0;
        }
        let counts = transition_counts(&labels, m);
        let pi = estimate_transition_matrix(&labels, m).unwrap();
        for i in 0..m {
            let total: f64 = brute[i].iter().map(|c| c + TRANSITION_EPS).sum();
            for j in 0..m {
                counts_exact &= counts[(i, j)] == brute[i][j];
                counts_exact &= pi[(i, j)] == (brute[i][j] + TRANSITION_EPS) / total;
            }
        }
    }
    let pass = worst_div <= 1e-4 && worst_kf <= 1e-9 && counts_exact;
    report(
        9,
        pass,
        &format!(
            "KL/BC vs quadrature {worst_div:.2e} (<= 1e-4); filter vs Kalman {worst_kf:.2e} (<= 1e-9); counting exact: {counts_exact}"
        )
    );
    assert!(pass);
}

fn small(kind: ExperimentKind, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(kind);
    c.output_dir = out.to_path_buf();
    c.scenario.n_slots = 160;
    c.scenario.jammer = JammerStrategy::full_band(vec![(80, 160)]);
    if kind == ExperimentKind::Update {
        c.scenario.jammer_waveform = JammerWaveform::Drift { re: 0.25, im: -0.25 };
        c.scenario.jammer = JammerStrategy::full_band(vec![(80, 100), (120, 140)]);
    }
    c.sweep.snr_db = vec![c.sweep.snr_db[0]];
    c.transport.train_bits = 1_200;
    c.transport.test_bits = 600;
    c.transport.amc_bits = 240;
    c.active.steps = 150;
    c.active.training_steps = 150;
    c.active.subcarriers_per_prb = 4;
    c
}

fn rows_on_simplex(m: &DMatrix<f64>) -> bool {
    m.row_iter().all(|r| r.iter().all(|v| *v >= 0.0) && (r.sum() - 1.0).abs() < 1e-9)
}

fn fuzz_config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Runs every invariant once under proptest and returns the first failure.
fn invariant_failures() -> Vec<String> {
    let mut failures = Vec::new();
    let mut check = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    let mut runner = proptest::test_runner::TestRunner::new(fuzz_config());
    check(
        "transition matrices",
        runner.run(&(1usize..6, prop::collection::vec(0usize..6, 0..120), 1usize..5), |(m, raw, tau)| {
            let labels: Vec<usize> = raw.into_iter().map(|l| l % m).collect();
            prop_assert!(rows_on_simplex(&estimate_transition_matrix(&labels, m).unwrap()));
            for p in estimate_time_varying(&labels, m, tau).unwrap() {
                prop_assert!(rows_on_simplex(&p));
            }
            Ok(())
        }).map_err(|e| e.to_string()),
    );
    check(
        "transition update",
        runner.run(
            &(2usize..5, prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1..10)),
            |(m, eps)| {
                let pi = DMatrix::from_element(m, m, 1.0 / m as f64);
                let eps: Vec<Vec<f64>> = eps.into_iter().map(|e| e[..m].to_vec()).collect();
                let steps: Vec<TransitionEvidence> = eps
                    .iter()
                    .enumerate()
                    .map(|(i, e)| TransitionEvidence {
                        occupied: vec![i % m],
                        eps_s: e,
                    })
                    .collect();
                prop_assert!(rows_on_simplex(&update_transition_matrix(&pi, &steps).unwrap()));
                Ok(())
            },
        )
        .map_err(|e| e.to_string()),
    );
    check(
        "active beliefs",
        runner.run(
            &prop::collection::vec(
                (0usize..6, 1usize..6, 0usize..6, any::<bool>(), 0.0f64..=0.5, prop::collection::vec(-1.0f64..1.0, 3), prop::option::of(0usize..6)),
                1..60,
            ),
            |steps| {
                let mut b = init_beliefs(6, 4).unwrap();
                for (state, tau, action, flagged, gamma, eps, row) in &steps {
                    update_beliefs(
                        &mut b,
                        &Transition {
                            state: *state,
                            tau: *tau,
                            action: *action,
                            flagged: *flagged,
                            gamma: *gamma,
                            eps_s: eps,
                            jammer_row: *row,
                        },
                    )
                    .unwrap();
                    for k in 0..4 {
                        prop_assert!(rows_on_simplex(&b.p_u[k]) && rows_on_simplex(&b.p_j[k]) && rows_on_simplex(&b.pi_a[k]));
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string()),
    );
    check(
        "mixture weights",
        runner.run(
            &(prop::collection::vec(0.01f64..5.0, 1..6), -3.0f64..3.0, 0.01f64..2.0),
            |(w, z, var)| {
                let parts: Vec<(f64, Gaussian)> = w
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| (*wi, Gaussian::isotropic(DVector::from_vec(vec![i as f64 - 2.0, 0.5]), 0.3)))
                    .collect();
                let mut g = GaussianMixture::new(&parts).unwrap();
                let on = |v: &[f64]| v.iter().all(|x| *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9;
                prop_assert!(on(&g.weights()));
                let r = g.responsibilities(&Gaussian::isotropic(DVector::from_vec(vec![z, -z]), var)).unwrap();
                prop_assert!(on(&r));
                g.set_weights(&r).unwrap();
                prop_assert!(on(&g.weights()));
                Ok(())
            },
        )
        .map_err(|e| e.to_string()),
    );
    check(
        "filter weights and covariances",
        runner.run(
            &(prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 2..25), 0.05f64..1.0, any::<bool>()),
            |(zs, r, conditional)| {
                let cov = DMatrix::from_diagonal_element(4, 4, 0.2);
                let mut v = single_superstate_vocab(DVector::from_vec(vec![0.4, -0.4, 0.0, 0.0]), cov.clone(), DVector::from_element(4, r));
                let mut s1 = v.superstates[0].clone();
                s1.id = 1;
                s1.mean = DVector::from_vec(vec![-0.4, 0.4, -0.1, 0.1]);
                v.superstates.push(s1);
                v.pi = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
                v.pi_tau = vec![v.pi.clone(); 3];
                let cfg = FilterConfig {
                    n_particles: 12,
                    use_conditional: conditional,
                    ..FilterConfig::default()
                };
                let model = FilterModel::new(v, cfg).unwrap();
                let zs: Vec<DVector<f64>> = zs.into_iter().map(DVector::from_vec).collect();
                let mut b = init_belief(&model, &zs[0], 12, 1).unwrap();
                for z in &zs {
                    let out = step(&mut b, z, &model).unwrap();
                    let w = b.weights();
                    prop_assert!(w.iter().all(|x| *x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!((out.pi_s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!((out.lambda_s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!(is_spd(&b.cov, 0.0));
                    for p in &b.particles {
                        if let Some(c) = &p.cov {
                            prop_assert!(is_spd(c, 0.0));
                        }
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string()),
    );
    failures
}

#[test]
fn c10_invariants_and_determinism() {
    let failures = invariant_failures();
    let mut nondeterministic = Vec::new();
    for kind in ExperimentKind::ALL {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ca = small(kind, a.path());
        let mut cb = ca.clone();
        cb.output_dir = b.path().to_path_buf();
        let (ma, mb) = (run(&ca).unwrap().manifest, run(&cb).unwrap().manifest);
        let strip = |m: &Manifest| m.artifacts.iter().filter(|x| x.path != "config.json").cloned().collect::<Vec<_>>();
        if strip(&ma) != strip(&mb) {
            nondeterministic.push(kind.name());
        }
    }
    let pass = failures.is_empty() && nondeterministic.is_empty();
    report(
        10,
        pass,
        &format!(
            "invariant failures {:?}; kinds with differing artifacts {:?} (of {})",
            failures,
            nondeterministic,
            ExperimentKind::ALL.len()
        )
    );
    assert!(pass);
}
