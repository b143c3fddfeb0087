//! Built-in invariant suite behind `qtransmit validate`.

use num_complex::Complex64;

use crate::elements::NoiseUnitary;
use crate::harness::{run_experiment, ExperimentSpec, InputSpec};
use crate::noise::{trial_rng, NoiseFamily};
use crate::oracle::{oracle_evolve, DenseState};
use crate::protocol::{
    correct_and_score, evaluate, post_select, run_pipeline, AcceptanceFilter, DecoderConfig,
    InputQubit, STAGE_FINAL, STAGE_POST_PBS2, STAGE_PRE_DECODER,
};
use crate::state::TwoPhotonState;

/// Closed-form coefficient tables for the traced stages, written term by
/// term in terms of the input amplitudes and the noise matrix entries.
/// Every table carries the overall factor `1/sqrt2`; the reference photon is
/// listed first.
pub mod equations {
    use num_complex::Complex64;

    use crate::elements::NoiseUnitary;
    use crate::protocol::InputQubit;
    use crate::state::{Frequency, PathLabel, PhotonBasis, Polarization, TwoPhotonState};

    use Frequency::*;
    use PathLabel::*;
    use Polarization::*;

    type Term = (
        Complex64,
        (Polarization, PathLabel),
        (Polarization, PathLabel),
    );

    fn build(terms: Vec<Term>, fr: Frequency, fs: Frequency) -> TwoPhotonState {
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        TwoPhotonState::from_terms(terms.into_iter().map(|(c, (rp, rq), (sp, sq))| {
            (
                (PhotonBasis::new(rp, fr, rq), PhotonBasis::new(sp, fs, sq)),
                h * c,
            )
        }))
    }

    /// State after PBS2.
    pub fn post_pbs2(q: &InputQubit, u: &NoiseUnitary) -> TwoPhotonState {
        let (a, b) = (q.alpha(), q.beta());
        let (d1, d2, e1, e2) = (u.delta1, u.delta2, u.eta1, u.eta2);
        build(
            vec![
                (a * d1 * d1, (H, P3), (H, P3)),
                (b * e2 * e2, (V, P3), (V, P3)),
                (d1 * e2 * a, (V, P3), (H, P3)),
                (d1 * e2 * b, (H, P3), (V, P3)),
                (a * e1 * e1, (V, P4), (V, P4)),
                (b * d2 * d2, (H, P4), (H, P4)),
                (e1 * d2 * a, (H, P4), (V, P4)),
                (e1 * d2 * b, (V, P4), (H, P4)),
                (a * d1 * e1, (H, P3), (V, P4)),
                (a * d1 * e1, (V, P4), (H, P3)),
                (d1 * d2 * a, (H, P4), (H, P3)),
                (d1 * d2 * b, (H, P3), (H, P4)),
                (b * d2 * e2, (H, P4), (V, P3)),
                (b * d2 * e2, (V, P3), (H, P4)),
                (e1 * e2 * a, (V, P3), (V, P4)),
                (e1 * e2 * b, (V, P4), (V, P3)),
            ],
            OmegaR,
            OmegaS,
        )
    }

    /// State after HWP0, entering the decoder.
    pub fn pre_decoder(q: &InputQubit, u: &NoiseUnitary) -> TwoPhotonState {
        let (a, b) = (q.alpha(), q.beta());
        let (d1, d2, e1, e2) = (u.delta1, u.delta2, u.eta1, u.eta2);
        build(
            vec![
                (a * d1 * d1, (V, P3), (V, P3)),
                (b * e2 * e2, (H, P3), (H, P3)),
                (a * e1 * e1, (V, P4), (V, P4)),
                (b * d2 * d2, (H, P4), (H, P4)),
                (a * d1 * e1, (V, P3), (V, P4)),
                (a * d1 * e1, (V, P4), (V, P3)),
                (b * d2 * e2, (H, P3), (H, P4)),
                (b * d2 * e2, (H, P4), (H, P3)),
                (d1 * e2 * a, (H, P3), (V, P3)),
                (d1 * e2 * b, (V, P3), (H, P3)),
                (e1 * d2 * a, (H, P4), (V, P4)),
                (e1 * d2 * b, (V, P4), (H, P4)),
                (d1 * d2 * a, (H, P4), (V, P3)),
                (d1 * d2 * b, (V, P3), (H, P4)),
                (e1 * e2 * a, (H, P3), (V, P4)),
                (e1 * e2 * b, (V, P4), (H, P3)),
            ],
            OmegaR,
            OmegaS,
        )
    }

    /// Output state of an ideal decoder. `freq` is the common frequency both
    /// photons end up with.
    pub fn final_state(q: &InputQubit, u: &NoiseUnitary, freq: Frequency) -> TwoPhotonState {
        let (a, b) = (q.alpha(), q.beta());
        let (d1, d2, e1, e2) = (u.delta1, u.delta2, u.eta1, u.eta2);
        build(
            vec![
                (a * d1 * d1, (H, Out3y), (V, Out3y)),
                (b * e2 * e2, (V, Out3x), (H, Out3x)),
                (a * e1 * e1, (H, Out4y), (V, Out4y)),
                (b * d2 * d2, (V, Out4x), (H, Out4x)),
                (a * d1 * e1, (H, Out3y), (V, Out4y)),
                (a * d1 * e1, (H, Out4y), (V, Out3y)),
                (b * d2 * e2, (V, Out3x), (H, Out4x)),
                (b * d2 * e2, (V, Out4x), (H, Out3x)),
                (d1 * e2 * a, (V, Out3x), (V, Out3y)),
                (d1 * e2 * b, (H, Out3y), (H, Out3x)),
                (e1 * d2 * a, (V, Out4x), (V, Out4y)),
                (e1 * d2 * b, (H, Out4y), (H, Out4x)),
                (d1 * d2 * a, (V, Out4x), (V, Out3y)),
                (d1 * d2 * b, (H, Out3y), (H, Out4x)),
                (e1 * e2 * a, (V, Out3x), (V, Out4y)),
                (e1 * e2 * b, (H, Out4y), (H, Out3x)),
            ],
            freq,
            freq,
        )
    }
}

/// Smallest fidelity between `got` and `want`, over the whole state and
/// over every block of terms sharing the same pair of paths. Blocks whose
/// weights differ count as fidelity 0.
pub fn blockwise_fidelity(got: &TwoPhotonState, want: &TwoPhotonState) -> f64 {
    use std::collections::BTreeMap;

    let mut blocks: BTreeMap<_, (Vec<_>, Vec<_>)> = BTreeMap::new();
    for (k, a) in got.iter() {
        blocks
            .entry((k.0.path, k.1.path))
            .or_default()
            .0
            .push((k, a));
    }
    for (k, a) in want.iter() {
        blocks
            .entry((k.0.path, k.1.path))
            .or_default()
            .1
            .push((k, a));
    }
    let mut worst = got.fidelity(want);
    if (got.squared_norm() - want.squared_norm()).abs() > 1e-10 {
        return 0.0;
    }
    for (g, w) in blocks.into_values() {
        let (g, w) = (TwoPhotonState::from_terms(g), TwoPhotonState::from_terms(w));
        if (g.squared_norm() - w.squared_norm()).abs() > 1e-10 {
            return 0.0;
        }
        if g.is_empty() && w.is_empty() {
            continue;
        }
        worst = worst.min(g.fidelity(&w));
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub observed: f64,
    pub bound: &'static str,
}

impl Check {
    fn at_most(name: &'static str, observed: f64, limit: f64, bound: &'static str) -> Self {
        Check {
            name,
            passed: observed <= limit,
            observed,
            bound,
        }
    }

    fn at_least(name: &'static str, observed: f64, limit: f64, bound: &'static str) -> Self {
        Check {
            name,
            passed: observed >= limit,
            observed,
            bound,
        }
    }
}

fn random_draws(n: u64, seed: u64) -> Vec<(InputQubit, NoiseUnitary)> {
    let noise = NoiseFamily::Haar { seed };
    (0..n)
        .map(|i| {
            let q = InputQubit::random(&mut trial_rng(seed ^ 0x5eed, i));
            (q, noise.sample(i))
        })
        .collect()
}

fn equation_regressions(checks: &mut Vec<Check>) {
    let cfg = DecoderConfig::default();
    let mut worst = [1.0f64; 3];
    for (q, u) in random_draws(100, 7) {
        let run = run_pipeline(&q, &u, &cfg).expect("pipeline");
        let pairs = [
            (STAGE_POST_PBS2, equations::post_pbs2(&q, &u)),
            (STAGE_PRE_DECODER, equations::pre_decoder(&q, &u)),
            (
                STAGE_FINAL,
                equations::final_state(&q, &u, crate::state::Frequency::OmegaCommon),
            ),
        ];
        for (k, (stage, want)) in pairs.iter().enumerate() {
            let got = run.stage(stage).expect("stage");
            worst[k] = worst[k].min(blockwise_fidelity(got, want));
        }
    }
    let limit = 1.0 - 1e-10;
    checks.push(Check::at_least(
        "post-pbs2 coefficient table (100 draws)",
        worst[0],
        limit,
        ">= 1 - 1e-10",
    ));
    checks.push(Check::at_least(
        "pre-decoder coefficient table (100 draws)",
        worst[1],
        limit,
        ">= 1 - 1e-10",
    ));
    checks.push(Check::at_least(
        "final coefficient table (100 draws)",
        worst[2],
        limit,
        ">= 1 - 1e-10",
    ));
}

fn success_and_faithfulness(checks: &mut Vec<Check>) {
    let cfg = DecoderConfig::default();
    let filter = AcceptanceFilter::default();
    let (mut dev, mut fid_dev, mut ent_dev) = (0.0f64, 0.0f64, 0.0f64);
    for (q, u) in random_draws(1000, 11) {
        let ev = evaluate(&q, &u, &cfg, &filter).expect("evaluate");
        dev = dev.max((ev.success - 0.5).abs());
        for o in &ev.outcomes {
            if o.joint_probability > 0.0 {
                fid_dev = fid_dev.max((1.0 - o.fidelity.unwrap_or(0.0)).abs());
            }
        }
        for sel in post_select(&ev.final_state) {
            if sel.probability == 0.0 {
                continue;
            }
            let (x, y) = (sel.branch.x_path(), sel.branch.y_path());
            let f = crate::state::Frequency::OmegaCommon;
            use crate::state::{PhotonBasis as B, Polarization::*};
            let target = TwoPhotonState::from_terms([
                ((B::new(V, f, x), B::new(V, f, y)), q.alpha()),
                ((B::new(H, f, x), B::new(H, f, y)), q.beta()),
            ]);
            ent_dev = ent_dev.max(1.0 - sel.state.fidelity(&target));
            let _ = correct_and_score(&sel, &q).expect("score");
        }
    }
    checks.push(Check::at_most(
        "success = 1/2 for 1000 Haar samples",
        dev,
        1e-12,
        "<= 1e-12",
    ));
    checks.push(Check::at_most(
        "corrected fidelity = 1 on every branch and outcome",
        fid_dev,
        1e-10,
        "<= 1e-10",
    ));
    checks.push(Check::at_most(
        "kept branches are alpha|VV> + beta|HH>",
        ent_dev,
        1e-10,
        "<= 1e-10",
    ));
}

fn oracle_equivalence(checks: &mut Vec<Check>) {
    let mut worst = 0.0f64;
    let configs = [
        DecoderConfig::default(),
        DecoderConfig::single_fs(0.65),
        DecoderConfig::temporal(0.5, true),
    ];
    for (i, (q, u)) in random_draws(100, 13).into_iter().enumerate() {
        let cfg = configs[i % configs.len()];
        let sparse = run_pipeline(&q, &u, &cfg).expect("pipeline").final_state;
        let dense = oracle_evolve(&q, &u, &cfg);
        let ev = crate::protocol::post_select(&sparse);
        for (p, d) in ev.iter().zip(dense.branch_probabilities()) {
            worst = worst.max((p.probability - d).abs());
        }
        worst = worst.max(dense.max_abs_diff(&DenseState::from_sparse(&sparse)));
    }
    checks.push(Check::at_most(
        "dense oracle matches sparse pipeline (100 trials)",
        worst,
        1e-12,
        "<= 1e-12",
    ));
}

fn haar_moments(checks: &mut Vec<Check>) {
    let f = NoiseFamily::Haar { seed: 17 };
    let n = 100_000u64;
    let samples: Vec<f64> = (0..n).map(|i| f.sample(i).delta1.norm_sqr()).collect();
    for (name, power, target) in [
        ("Haar E|delta1|^2 = 1/2 (z-score)", 1, 0.5),
        ("Haar E|delta1|^4 = 1/3 (z-score)", 2, 1.0 / 3.0),
    ] {
        let xs: Vec<f64> = samples.iter().map(|p| p.powi(power)).collect();
        let est = crate::harness::Estimate::from_samples(&xs);
        let z = (est.mean - target).abs() / est.standard_error;
        checks.push(Check::at_most(name, z, 3.0, "<= 3"));
    }
}

fn efficiency_scaling(checks: &mut Vec<Check>) {
    let q = InputQubit::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).expect("input");
    let mut worst = 0.0f64;
    for eta in [0.0, 0.25, 0.5, 0.65, 0.75, 1.0] {
        for (cfg, want) in [
            (DecoderConfig::dual_fs(eta), eta * eta / 2.0),
            (DecoderConfig::single_fs(eta), eta / 2.0),
        ] {
            let mut spec =
                ExperimentSpec::new(InputSpec::Pure(q), NoiseFamily::Haar { seed: 19 }, cfg);
            spec.trials = 50;
            let r = run_experiment(&spec, None).expect("run");
            worst = worst.max((r.success_probability.mean - want).abs());
        }
    }
    checks.push(Check::at_most(
        "success = eta^2/2 (dual FS) and eta/2 (single FS)",
        worst,
        1e-12,
        "<= 1e-12",
    ));

    let mut temporal = 0.0f64;
    for (q, u) in random_draws(200, 23) {
        let ev = evaluate(
            &q,
            &u,
            &DecoderConfig::temporal(0.5, true),
            &AcceptanceFilter::default(),
        )
        .expect("evaluate");
        temporal = temporal.max((ev.success - 0.125).abs());
    }
    checks.push(Check::at_most(
        "temporal eraser with HWP0 gives 1/8",
        temporal,
        1e-12,
        "<= 1e-12",
    ));
}

/// Runs every check. Never panics on a failed check; only on internal errors.
pub fn run_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    equation_regressions(&mut checks);
    success_and_faithfulness(&mut checks);
    oracle_equivalence(&mut checks);
    haar_moments(&mut checks);
    efficiency_scaling(&mut checks);
    checks
}
