use num_complex::Complex64;
use proptest::prelude::*;

use qtransmit::elements::NoiseUnitary;
use qtransmit::harness::{run_experiment, EnsembleMember, ExperimentSpec, InputSpec};
use qtransmit::noise::{haar_unitary, trial_rng, NoiseFamily};
use qtransmit::oracle::oracle_evolve;
use qtransmit::protocol::{evaluate, AcceptanceFilter, DecoderConfig, InputQubit};

fn qubit() -> impl Strategy<Value = InputQubit> {
    any::<u64>().prop_map(|s| InputQubit::random(&mut trial_rng(s, 0)))
}

fn unitary() -> impl Strategy<Value = NoiseUnitary> {
    any::<u64>().prop_map(|s| haar_unitary(&mut trial_rng(s, 1)))
}

fn decoder() -> impl Strategy<Value = DecoderConfig> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(DecoderConfig::dual_fs),
        (0.0..=1.0f64).prop_map(DecoderConfig::single_fs),
        ((0.0..=1.0f64), any::<bool>()).prop_map(|(t, h)| DecoderConfig::temporal(t, h)),
    ]
}

fn protected_decoder() -> impl Strategy<Value = DecoderConfig> {
    decoder().prop_map(|cfg| DecoderConfig {
        with_hwp0: true,
        ..cfg
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ideal_success_is_noise_independent(q in qubit(), u in unitary()) {
        let ev = evaluate(&q, &u, &DecoderConfig::default(), &AcceptanceFilter::default()).unwrap();
        prop_assert!((ev.success - 0.5).abs() < 1e-12);
        prop_assert!((ev.fidelity_kept.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn probability_accounting(q in qubit(), u in unitary(), cfg in decoder()) {
        let ev = evaluate(&q, &u, &cfg, &AcceptanceFilter::default()).unwrap();
        prop_assert!(ev.success >= -1e-15 && ev.discard >= -1e-15 && ev.lost >= -1e-15);
        prop_assert!((ev.success + ev.discard + ev.lost - 1.0).abs() < 1e-10);
        let branch_total: f64 = ev.branch_probabilities.iter().sum();
        prop_assert!((branch_total - ev.success).abs() < 1e-12);
    }

    #[test]
    fn corrected_output_is_faithful_with_hwp0(q in qubit(), u in unitary(), cfg in protected_decoder()) {
        let ev = evaluate(&q, &u, &cfg, &AcceptanceFilter::default()).unwrap();
        for o in ev.outcomes.iter().filter(|o| o.joint_probability > 1e-12) {
            prop_assert!((o.fidelity.unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_agrees(q in qubit(), u in unitary(), cfg in decoder()) {
        let ev = evaluate(&q, &u, &cfg, &AcceptanceFilter::default()).unwrap();
        let dense = oracle_evolve(&q, &u, &cfg).branch_probabilities();
        for (a, b) in ev.branch_probabilities.iter().zip(dense) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn success_is_independent_of_input(a in qubit(), b in qubit(), u in unitary(), cfg in decoder()) {
        let f = AcceptanceFilter::default();
        let pa = evaluate(&a, &u, &cfg, &f).unwrap().success;
        let pb = evaluate(&b, &u, &cfg, &f).unwrap().success;
        prop_assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn ensemble_mixes_linearly(a in qubit(), b in qubit(), w in 0.05..0.95f64, seed in any::<u64>()) {
        let noise = NoiseFamily::Haar { seed };
        let cfg = DecoderConfig::single_fs(0.7);
        let spec = |input| ExperimentSpec { trials: 8, ..ExperimentSpec::new(input, noise.clone(), cfg) };
        let ra = run_experiment(&spec(InputSpec::Pure(a)), Some(1)).unwrap();
        let rb = run_experiment(&spec(InputSpec::Pure(b)), Some(1)).unwrap();
        let mix = run_experiment(
            &spec(InputSpec::Ensemble(vec![
                EnsembleMember { weight: w, qubit: a },
                EnsembleMember { weight: 1.0 - w, qubit: b },
            ])),
            Some(1),
        )
        .unwrap();
        let want = w * ra.success_probability.mean + (1.0 - w) * rb.success_probability.mean;
        prop_assert!((mix.success_probability.mean - want).abs() < 1e-12);
    }
}

#[test]
fn pure_horizontal_input_through_bitflip() {
    let q = InputQubit::horizontal();
    let u = NoiseFamily::Bitflip.sample(0);
    let ev = evaluate(
        &q,
        &u,
        &DecoderConfig::default(),
        &AcceptanceFilter::default(),
    )
    .unwrap();
    assert!((ev.success - 0.5).abs() < 1e-12);
    for o in ev
        .outcomes
        .iter()
        .filter(|o| o.kept && o.joint_probability > 0.0)
    {
        let rho = o.output_state.as_ref().unwrap();
        let v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!((rho.expectation(&v) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn without_hwp0_generic_noise_is_not_corrected() {
    let q = InputQubit::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
    let u = NoiseFamily::Rotation { theta: 0.7 }.sample(0);
    let ev = evaluate(
        &q,
        &u,
        &DecoderConfig::temporal(0.5, false),
        &AcceptanceFilter::default(),
    )
    .unwrap();
    let worst = ev
        .outcomes
        .iter()
        .filter(|o| o.joint_probability > 1e-12)
        .filter_map(|o| o.fidelity)
        .fold(1.0, f64::min);
    assert!(worst < 0.99, "worst fidelity {worst}");
}

#[test]
fn baseline_branch_needs_identity_not_sigma_x() {
    use qtransmit::elements::XOutcome;
    use qtransmit::protocol::{
        analyze_recoverability, post_select, run_pipeline, Branch, CorrectionName, CorrectionOp,
    };

    let q = InputQubit::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
    let u = NoiseFamily::Dephasing { phi: 0.4 }.sample(0);
    let run = run_pipeline(&q, &u, &DecoderConfig::temporal(0.5, false)).unwrap();
    let sel = post_select(&run.final_state)
        .into_iter()
        .find(|s| s.branch == Branch::X3Y3)
        .unwrap();
    assert!(sel.probability > 0.0);
    let (best, f) = analyze_recoverability(
        &sel.state,
        Branch::X3Y3.y_path(),
        XOutcome::PlusX,
        &q,
        &CorrectionOp::pauli_set(),
    )
    .unwrap();
    assert_eq!(best.name, CorrectionName::Identity);
    assert!((f - 1.0).abs() < 1e-10);
}
