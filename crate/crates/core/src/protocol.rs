//! The transmission pipeline.
//!
//! encode -> collective noise -> PBS2 (+ HWP0 on port 3) -> decoder ->
//! post-selection on x/y coincidences -> X measurement of the y photon ->
//! correction of the x photon -> fidelity against the input.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elements::{
    fbs, frequency_shifter, frequency_shifter_to, hwp, pbs, temporal_eraser, x_measure,
    NoiseUnitary, Pbs, XOutcome, DEFAULT_ERASER_TRANSMISSION,
};
use crate::error::{Error, Result};
use crate::state::{
    Frequency, PathLabel, PathSet, PhotonBasis, PolVector, Polarization, PolarizationDensity,
    RelabelRule, SingleQubitOp, Slot, TwoPhotonState, NORMALIZATION_TOL,
};

/// Internal conversion efficiency reported for sum-frequency generation.
pub const SFG_INTERNAL_EFFICIENCY: f64 = 0.99;
/// Overall conversion efficiency reported for sum-frequency generation.
pub const SFG_OVERALL_EFFICIENCY: f64 = 0.65;

/// Tolerance for per-trial probability bookkeeping.
pub const ACCOUNTING_TOL: f64 = 1e-10;

pub const STAGE_ENCODE: &str = "encode";
pub const STAGE_NOISE: &str = "noise";
pub const STAGE_POST_PBS2: &str = "post-pbs2";
pub const STAGE_PRE_DECODER: &str = "pre-decoder";
pub const STAGE_FINAL: &str = "final";
pub const STAGES: [&str; 5] = [
    STAGE_ENCODE,
    STAGE_NOISE,
    STAGE_POST_PBS2,
    STAGE_PRE_DECODER,
    STAGE_FINAL,
];

/// Polarization qubit `alpha |H> + beta |V>` to be transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InputRepr", into = "InputRepr")]
pub struct InputQubit {
    alpha: Complex64,
    beta: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputRepr {
    #[serde(with = "crate::serde_complex")]
    alpha: Complex64,
    #[serde(with = "crate::serde_complex")]
    beta: Complex64,
}

impl TryFrom<InputRepr> for InputQubit {
    type Error = Error;

    fn try_from(r: InputRepr) -> Result<Self> {
        InputQubit::new(r.alpha, r.beta)
    }
}

impl From<InputQubit> for InputRepr {
    fn from(q: InputQubit) -> Self {
        InputRepr {
            alpha: q.alpha,
            beta: q.beta,
        }
    }
}

impl InputQubit {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Unnormalized { norm_sqr: n });
        }
        Ok(InputQubit { alpha, beta })
    }

    pub fn horizontal() -> Self {
        InputQubit {
            alpha: Complex64::new(1.0, 0.0),
            beta: Complex64::new(0.0, 0.0),
        }
    }

    /// Uniformly random point on the Bloch sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let (a, b) = crate::noise::gaussian_pair(rng);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        InputQubit {
            alpha: a / n,
            beta: b / n,
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn vector(&self) -> PolVector {
        [self.alpha, self.beta]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderVariant {
    /// Both photons are shifted to a common frequency.
    FrequencyDualFs,
    /// Only the reference photon is shifted, onto the signal frequency.
    FrequencySingleFs,
    /// Passive temporal erasure with per-photon transmission `t`.
    TemporalEraser,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    pub variant: DecoderVariant,
    /// Frequency-shifter efficiency. Ignored by the temporal variant.
    pub eta: f64,
    /// Eraser transmission per photon. Ignored by the frequency variants.
    pub t: f64,
    pub with_hwp0: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            variant: DecoderVariant::FrequencyDualFs,
            eta: 1.0,
            t: DEFAULT_ERASER_TRANSMISSION,
            with_hwp0: true,
        }
    }
}

impl DecoderConfig {
    pub fn dual_fs(eta: f64) -> Self {
        DecoderConfig {
            eta,
            ..Default::default()
        }
    }

    pub fn single_fs(eta: f64) -> Self {
        DecoderConfig {
            variant: DecoderVariant::FrequencySingleFs,
            eta,
            ..Default::default()
        }
    }

    pub fn temporal(t: f64, with_hwp0: bool) -> Self {
        DecoderConfig {
            variant: DecoderVariant::TemporalEraser,
            t,
            with_hwp0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("decoder.eta", self.eta), ("decoder.t", self.t)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(field, format!("must lie in [0, 1] (got {v})")));
            }
        }
        Ok(())
    }
}

/// A post-selected coincidence: one photon in an x output, one in a y output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "3x/3y")]
    X3Y3,
    #[serde(rename = "4x/4y")]
    X4Y4,
    #[serde(rename = "3x/4y")]
    X3Y4,
    #[serde(rename = "4x/3y")]
    X4Y3,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::X3Y3, Branch::X4Y4, Branch::X3Y4, Branch::X4Y3];

    pub fn x_path(self) -> PathLabel {
        match self {
            Branch::X3Y3 | Branch::X3Y4 => PathLabel::Out3x,
            Branch::X4Y4 | Branch::X4Y3 => PathLabel::Out4x,
        }
    }

    pub fn y_path(self) -> PathLabel {
        match self {
            Branch::X3Y3 | Branch::X4Y3 => PathLabel::Out3y,
            Branch::X4Y4 | Branch::X3Y4 => PathLabel::Out4y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::X3Y3 => "3x/3y",
            Branch::X4Y4 => "4x/4y",
            Branch::X3Y4 => "3x/4y",
            Branch::X4Y3 => "4x/3y",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Which (branch, outcome) events count as success.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceFilter {
    pub branches: Vec<Branch>,
    pub outcomes: Vec<XOutcome>,
}

impl Default for AcceptanceFilter {
    fn default() -> Self {
        AcceptanceFilter {
            branches: Branch::ALL.to_vec(),
            outcomes: XOutcome::BOTH.to_vec(),
        }
    }
}

impl AcceptanceFilter {
    /// Same-port coincidences and the +x outcome only, i.e. no feed-forward
    /// correction and no use of the cross-port terms.
    pub fn same_port_plus_x() -> Self {
        AcceptanceFilter {
            branches: vec![Branch::X3Y3, Branch::X4Y4],
            outcomes: vec![XOutcome::PlusX],
        }
    }

    pub fn accepts(&self, branch: Branch, outcome: XOutcome) -> bool {
        self.branches.contains(&branch) && self.outcomes.contains(&outcome)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::param("decoder.branches", "must not be empty"));
        }
        if self.outcomes.is_empty() {
            return Err(Error::param("decoder.outcomes", "must not be empty"));
        }
        Ok(())
    }
}

impl Serialize for XOutcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for XOutcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "+x" => Ok(XOutcome::PlusX),
            "-x" => Ok(XOutcome::MinusX),
            other => Err(serde::de::Error::custom(format!(
                "unknown outcome `{other}`, expected `+x` or `-x`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionName {
    Identity,
    SigmaX,
    MinusISigmaY,
    SigmaZ,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionOp {
    pub name: CorrectionName,
    pub matrix: SingleQubitOp,
}

impl CorrectionOp {
    pub fn new(name: CorrectionName) -> Self {
        let matrix = match name {
            CorrectionName::Identity => SingleQubitOp::identity(),
            CorrectionName::SigmaX => SingleQubitOp::sigma_x(),
            CorrectionName::MinusISigmaY => SingleQubitOp::minus_i_sigma_y(),
            CorrectionName::SigmaZ => SingleQubitOp::sigma_z(),
        };
        CorrectionOp { name, matrix }
    }

    pub fn pauli_set() -> Vec<CorrectionOp> {
        [
            CorrectionName::Identity,
            CorrectionName::SigmaX,
            CorrectionName::MinusISigmaY,
            CorrectionName::SigmaZ,
        ]
        .into_iter()
        .map(CorrectionOp::new)
        .collect()
    }

    /// The protocol's fixed table: +x -> sigma_x, -x -> -i sigma_y.
    pub fn for_outcome(outcome: XOutcome) -> Self {
        match outcome {
            XOutcome::PlusX => CorrectionOp::new(CorrectionName::SigmaX),
            XOutcome::MinusX => CorrectionOp::new(CorrectionName::MinusISigmaY),
        }
    }
}

/// One (branch, outcome) event of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub kept: bool,
    pub branch: Branch,
    pub measurement: XOutcome,
    pub correction: Option<CorrectionName>,
    pub joint_probability: f64,
    /// Corrected, normalized polarization state of the kept photon.
    pub output_state: Option<PolarizationDensity>,
    pub fidelity: Option<f64>,
}

/// Full evolution of one (input, noise) pair with stage snapshots.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub final_state: TwoPhotonState,
    pub trace: Vec<(&'static str, TwoPhotonState)>,
}

impl PipelineRun {
    pub fn stage(&self, name: &str) -> Option<&TwoPhotonState> {
        self.trace.iter().find(|(n, _)| *n == name).map(|(_, s)| s)
    }
}

fn paths(list: &[PathLabel]) -> PathSet {
    PathSet::new(list).expect("non-empty path list")
}

/// Input pair after PBS1: reference `(|H> + |V>)/sqrt2` at `omega_r`,
/// signal `alpha |H> + beta |V>` at `omega_s`, H on channel 1, V on channel 2.
pub fn encode(input: &InputQubit) -> TwoPhotonState {
    use Frequency::*;
    use PathLabel::*;
    use Polarization::*;

    let h = Complex64::new(0.5f64.sqrt(), 0.0);
    let source = TwoPhotonState::product(
        &[
            (PhotonBasis::new(H, OmegaR, SourceR), h),
            (PhotonBasis::new(V, OmegaR, SourceR), h),
        ],
        &[
            (PhotonBasis::new(H, OmegaS, SourceS), input.alpha),
            (PhotonBasis::new(V, OmegaS, SourceS), input.beta),
        ],
    );
    let pbs1 = Pbs::single_input(SourceR, Ch1, Ch2).and(Pbs::single_input(SourceS, Ch1, Ch2));
    pbs1.apply(&source)
        .expect("source photons always sit on the PBS1 inputs")
}

/// The same unitary acts on both photons in both channels.
pub fn apply_collective_noise(state: &TwoPhotonState, u: &NoiseUnitary) -> Result<TwoPhotonState> {
    let channels = paths(&[PathLabel::Ch1, PathLabel::Ch2]);
    for slot in Slot::BOTH {
        if let Some(b) = state.photons(slot).find(|b| !channels.contains(b.path)) {
            return Err(Error::StageContract {
                element: "collective_noise",
                basis: b,
                path: b.path,
            });
        }
    }
    let m = u.matrix();
    Ok(state
        .apply_single_photon_op(Slot::R, &channels, &m)
        .apply_single_photon_op(Slot::S, &channels, &m))
}

fn decode(state: &TwoPhotonState, cfg: &DecoderConfig) -> Result<TwoPhotonState> {
    use PathLabel::*;

    let split = fbs(state, P3, P3Up, P3Down)?;
    let split = fbs(&split, P4, P4Up, P4Down)?;
    let ups = paths(&[P3Up, P4Up]);
    let arms = paths(&[P3Up, P3Down, P4Up, P4Down]);
    let rotated = hwp(&split, &ups, 45.0);
    let merged = match cfg.variant {
        DecoderVariant::FrequencyDualFs => frequency_shifter(&rotated, &arms, cfg.eta)?,
        DecoderVariant::FrequencySingleFs => {
            frequency_shifter_to(&rotated, &ups, Frequency::OmegaS, cfg.eta)?
        }
        DecoderVariant::TemporalEraser => {
            let erased = temporal_eraser(&rotated, &arms, cfg.t)?;
            // The tagging label stands in for the time bin; once erased both
            // photons share it.
            let rule = RelabelRule::identity()
                .freq(Frequency::OmegaR, Frequency::OmegaCommon)
                .freq(Frequency::OmegaS, Frequency::OmegaCommon);
            erased.relabel(Slot::R, &rule)?.relabel(Slot::S, &rule)?
        }
    };
    Pbs::two_port((P3Up, P3Down), (Out3y, Out3x))
        .and(Pbs::two_port((P4Up, P4Down), (Out4y, Out4x)))
        .apply(&merged)
}

/// Runs the whole optical pipeline and records a snapshot after each stage.
/// `pre-decoder` equals `post-pbs2` when HWP0 is disabled.
pub fn run_pipeline(
    input: &InputQubit,
    u: &NoiseUnitary,
    cfg: &DecoderConfig,
) -> Result<PipelineRun> {
    cfg.validate()?;
    let encoded = encode(input);
    let noisy = apply_collective_noise(&encoded, u)?;
    let routed = pbs(
        &noisy,
        (PathLabel::Ch1, PathLabel::Ch2),
        (PathLabel::P3, PathLabel::P4),
    )?;
    let pre = if cfg.with_hwp0 {
        hwp(&routed, &PathSet::single(PathLabel::P3), 45.0)
    } else {
        routed.clone()
    };
    let final_state = decode(&pre, cfg)?;
    Ok(PipelineRun {
        trace: vec![
            (STAGE_ENCODE, encoded),
            (STAGE_NOISE, noisy),
            (STAGE_POST_PBS2, routed),
            (STAGE_PRE_DECODER, pre),
            (STAGE_FINAL, final_state.clone()),
        ],
        final_state,
    })
}

/// A post-selected branch. `state` is in mode order: slot `R` is the photon
/// in the x output, slot `S` the photon in the y output.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSelection {
    pub branch: Branch,
    pub probability: f64,
    pub state: TwoPhotonState,
}

pub fn post_select(final_state: &TwoPhotonState) -> Vec<BranchSelection> {
    Branch::ALL
        .into_iter()
        .map(|branch| {
            let (probability, state) = final_state.conditional_branch(
                &PathSet::single(branch.x_path()),
                &PathSet::single(branch.y_path()),
            );
            BranchSelection {
                branch,
                probability,
                state,
            }
        })
        .collect()
}

fn score_collapsed(
    collapsed: &TwoPhotonState,
    correction: &CorrectionOp,
    input: &InputQubit,
) -> Option<(PolarizationDensity, f64)> {
    let rho = collapsed.reduced_polarization(Slot::R).normalized()?;
    let out = rho.transformed(&correction.matrix);
    let f = out.expectation(&input.vector()).clamp(0.0, 1.0);
    Some((out, f))
}

/// Measures the y photon in the X basis, applies the fixed correction to
/// the x photon and scores it against `input`.
pub fn correct_and_score(
    selection: &BranchSelection,
    input: &InputQubit,
) -> Result<[TrialOutcome; 2]> {
    let outcome = |m: crate::elements::MeasurementOutcome| {
        let correction = CorrectionOp::for_outcome(m.basis_vector);
        let scored = score_collapsed(&m.collapsed_state, &correction, input);
        TrialOutcome {
            kept: true,
            branch: selection.branch,
            measurement: m.basis_vector,
            correction: Some(correction.name),
            joint_probability: selection.probability * m.probability,
            output_state: scored.map(|s| s.0),
            fidelity: scored.map(|s| s.1),
        }
    };
    if selection.state.is_empty() {
        let empty = |o: XOutcome| crate::elements::MeasurementOutcome {
            basis_vector: o,
            probability: 0.0,
            collapsed_state: TwoPhotonState::new(),
        };
        return Ok([
            outcome(empty(XOutcome::PlusX)),
            outcome(empty(XOutcome::MinusX)),
        ]);
    }
    let (plus, minus) = x_measure(&selection.state, Slot::S, selection.branch.y_path())?;
    Ok([outcome(plus), outcome(minus)])
}

/// Picks the candidate correction with the highest output fidelity for the
/// given measurement outcome. Ties go to the earlier candidate.
pub fn analyze_recoverability(
    branch_state: &TwoPhotonState,
    y_path: PathLabel,
    outcome: XOutcome,
    input: &InputQubit,
    candidates: &[CorrectionOp],
) -> Result<(CorrectionOp, f64)> {
    let first = *candidates
        .first()
        .ok_or_else(|| Error::param("candidate_set", "must not be empty"))?;
    if branch_state.is_empty() {
        return Ok((first, 0.0));
    }
    let (plus, minus) = x_measure(branch_state, Slot::S, y_path)?;
    let collapsed = match outcome {
        XOutcome::PlusX => plus.collapsed_state,
        XOutcome::MinusX => minus.collapsed_state,
    };
    let mut best = (first, f64::NEG_INFINITY);
    for c in candidates {
        let f = score_collapsed(&collapsed, c, input).map_or(0.0, |s| s.1);
        if f > best.1 {
            best = (*c, f);
        }
    }
    Ok(best)
}

/// Everything the harness needs from one (input, noise) pair.
#[derive(Debug, Clone)]
pub struct TrialEvaluation {
    pub outcomes: Vec<TrialOutcome>,
    pub branch_probabilities: [f64; 4],
    pub success: f64,
    pub discard: f64,
    pub lost: f64,
    /// Success-weighted fidelity of kept events; `None` if nothing is kept.
    pub fidelity_kept: Option<f64>,
    pub final_state: TwoPhotonState,
}

pub fn evaluate(
    input: &InputQubit,
    u: &NoiseUnitary,
    cfg: &DecoderConfig,
    filter: &AcceptanceFilter,
) -> Result<TrialEvaluation> {
    let run = run_pipeline(input, u, cfg)?;
    let total = run.final_state.squared_norm();
    let mut outcomes = Vec::with_capacity(8);
    let mut branch_probabilities = [0.0; 4];
    let (mut success, mut weighted_fidelity) = (0.0, 0.0);

    for selection in post_select(&run.final_state) {
        branch_probabilities[selection.branch.index()] = selection.probability;
        let scored = correct_and_score(&selection, input)?;
        let split: f64 = scored.iter().map(|o| o.joint_probability).sum();
        if (split - selection.probability).abs() > ACCOUNTING_TOL {
            return Err(Error::Invariant {
                name: format!(
                    "measurement accounting on branch {}",
                    selection.branch.name()
                ),
                observed: format!("{split} vs {}", selection.probability),
            });
        }
        for mut o in scored {
            o.kept = filter.accepts(o.branch, o.measurement);
            if o.kept {
                success += o.joint_probability;
                weighted_fidelity += o.joint_probability * o.fidelity.unwrap_or(0.0);
            } else {
                o.correction = None;
                o.output_state = None;
                o.fidelity = None;
            }
            outcomes.push(o);
        }
    }

    let selected: f64 = branch_probabilities.iter().sum();
    if selected > total + ACCOUNTING_TOL || total > 1.0 + ACCOUNTING_TOL {
        return Err(Error::Invariant {
            name: "probability accounting".into(),
            observed: format!("branches {selected}, norm {total}"),
        });
    }

    Ok(TrialEvaluation {
        outcomes,
        branch_probabilities,
        success,
        discard: total - success,
        lost: 1.0 - total,
        fidelity_kept: (success > 0.0).then(|| weighted_fidelity / success),
        final_state: run.final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseFamily;
    use crate::state::ALGEBRA_TOL;

    use Frequency::*;
    use PathLabel::*;
    use Polarization::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pb(pol: Polarization, freq: Frequency, path: PathLabel) -> PhotonBasis {
        PhotonBasis::new(pol, freq, path)
    }

    fn generic_input() -> InputQubit {
        InputQubit::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap()
    }

    #[test]
    fn input_must_be_normalized() {
        assert!(InputQubit::new(c(1.0, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn encode_basis_input() {
        let s = encode(&InputQubit::horizontal());
        let h = 0.5f64.sqrt();
        assert_eq!(s.len(), 2);
        assert!(
            (s.amplitude(pb(H, OmegaR, Ch1), pb(H, OmegaS, Ch1)) - c(h, 0.0)).norm() < ALGEBRA_TOL
        );
        assert!(
            (s.amplitude(pb(V, OmegaR, Ch2), pb(H, OmegaS, Ch1)) - c(h, 0.0)).norm() < ALGEBRA_TOL
        );
    }

    #[test]
    fn encode_generic_input() {
        let q = generic_input();
        let s = encode(&q);
        let h = 0.5f64.sqrt();
        assert_eq!(s.len(), 4);
        for r in [pb(H, OmegaR, Ch1), pb(V, OmegaR, Ch2)] {
            assert!((s.amplitude(r, pb(H, OmegaS, Ch1)) - q.alpha() * h).norm() < ALGEBRA_TOL);
            assert!((s.amplitude(r, pb(V, OmegaS, Ch2)) - q.beta() * h).norm() < ALGEBRA_TOL);
        }
        assert!((s.squared_norm() - 1.0).abs() < ALGEBRA_TOL);
    }

    #[test]
    fn identity_noise_is_noop() {
        let s = encode(&generic_input());
        assert_eq!(
            apply_collective_noise(&s, &NoiseUnitary::identity()).unwrap(),
            s
        );
    }

    #[test]
    fn bitflip_noise_swaps_polarizations() {
        let s = encode(&generic_input());
        let out = apply_collective_noise(&s, &NoiseFamily::Bitflip.sample(0)).unwrap();
        for ((r, q), a) in s.iter() {
            let flip = |b: PhotonBasis| b.with_pol(if b.pol == H { V } else { H });
            assert_eq!(out.amplitude(flip(r), flip(q)), a);
        }
    }

    #[test]
    fn noise_rejects_wrong_stage() {
        let s = encode(&generic_input());
        let routed = pbs(&s, (Ch1, Ch2), (P3, P4)).unwrap();
        assert!(apply_collective_noise(&routed, &NoiseUnitary::identity()).is_err());
    }

    #[test]
    fn trace_has_named_stages() {
        let run = run_pipeline(
            &generic_input(),
            &NoiseUnitary::identity(),
            &DecoderConfig::default(),
        )
        .unwrap();
        let names: Vec<_> = run.trace.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, STAGES);
        let no_hwp = DecoderConfig {
            with_hwp0: false,
            ..Default::default()
        };
        let run = run_pipeline(&generic_input(), &NoiseUnitary::identity(), &no_hwp).unwrap();
        assert_eq!(run.stage(STAGE_PRE_DECODER), run.stage(STAGE_POST_PBS2));
    }

    #[test]
    fn identity_noise_keeps_port_three_only() {
        let q = generic_input();
        let run = run_pipeline(&q, &NoiseUnitary::identity(), &DecoderConfig::default()).unwrap();
        let sel = post_select(&run.final_state);
        assert!((sel[Branch::X3Y3.index()].probability - 0.5).abs() < ALGEBRA_TOL);
        for b in [Branch::X4Y4, Branch::X3Y4, Branch::X4Y3] {
            assert_eq!(sel[b.index()].probability, 0.0);
        }
        // Remaining support: the two double-occupancy port-3 terms.
        let rest: Vec<_> = run
            .final_state
            .iter()
            .filter(|((r, s), _)| r.path == s.path)
            .collect();
        assert_eq!(rest.len(), 2);
    }

    #[test]
    fn dephasing_keeps_only_same_port_three() {
        let q = generic_input();
        let u = NoiseFamily::Dephasing { phi: 1.1 }.sample(0);
        let run = run_pipeline(&q, &u, &DecoderConfig::default()).unwrap();
        let sel = post_select(&run.final_state);
        assert!((sel[0].probability - 0.5).abs() < ALGEBRA_TOL);
        assert_eq!(sel[Branch::X4Y4.index()].probability, 0.0);
    }

    #[test]
    fn kept_branch_is_entangled_copy_of_input() {
        let q = generic_input();
        let u = NoiseFamily::Haar { seed: 1 }.sample(5);
        let run = run_pipeline(&q, &u, &DecoderConfig::default()).unwrap();
        for sel in post_select(&run.final_state) {
            let (x, y) = (sel.branch.x_path(), sel.branch.y_path());
            let target = TwoPhotonState::from_terms([
                ((pb(V, OmegaCommon, x), pb(V, OmegaCommon, y)), q.alpha()),
                ((pb(H, OmegaCommon, x), pb(H, OmegaCommon, y)), q.beta()),
            ]);
            assert!(
                sel.state.fidelity(&target) > 1.0 - 1e-10,
                "{:?}",
                sel.branch
            );
        }
    }

    #[test]
    fn fixed_corrections_are_faithful() {
        let q = InputQubit::new(c(0.5f64.sqrt(), 0.0), c(0.0, 0.5f64.sqrt())).unwrap();
        let u = NoiseFamily::Haar { seed: 3 }.sample(0);
        let run = run_pipeline(&q, &u, &DecoderConfig::default()).unwrap();
        for sel in post_select(&run.final_state) {
            let [plus, minus] = correct_and_score(&sel, &q).unwrap();
            assert_eq!(plus.correction, Some(CorrectionName::SigmaX));
            assert_eq!(minus.correction, Some(CorrectionName::MinusISigmaY));
            for o in [plus, minus] {
                assert!((o.fidelity.unwrap() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wrong_correction_is_detected() {
        let q = InputQubit::new(c(0.5f64.sqrt(), 0.0), c(0.0, 0.5f64.sqrt())).unwrap();
        let run = run_pipeline(&q, &NoiseUnitary::identity(), &DecoderConfig::default()).unwrap();
        let sel = &post_select(&run.final_state)[0];
        let (plus, _) = x_measure(&sel.state, Slot::S, Out3y).unwrap();
        let wrong = CorrectionOp::new(CorrectionName::MinusISigmaY);
        let (_, f) = score_collapsed(&plus.collapsed_state, &wrong, &q).unwrap();
        assert!(f < 1.0 - 1e-6, "fidelity {f}");
    }

    #[test]
    fn recoverability_matches_fixed_table() {
        let q = generic_input();
        let u = NoiseFamily::Haar { seed: 11 }.sample(2);
        let run = run_pipeline(&q, &u, &DecoderConfig::default()).unwrap();
        let sel = post_select(&run.final_state)
            .into_iter()
            .max_by(|a, b| a.probability.total_cmp(&b.probability))
            .unwrap();
        let (op, f) = analyze_recoverability(
            &sel.state,
            sel.branch.y_path(),
            XOutcome::PlusX,
            &q,
            &CorrectionOp::pauli_set(),
        )
        .unwrap();
        assert_eq!(op.name, CorrectionName::SigmaX);
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn recoverability_identity_when_branch_already_matches() {
        let q = generic_input();
        let h = c(0.5f64.sqrt(), 0.0);
        let state = TwoPhotonState::product(
            &[
                (pb(H, OmegaCommon, Out3x), q.alpha()),
                (pb(V, OmegaCommon, Out3x), q.beta()),
            ],
            &[
                (pb(H, OmegaCommon, Out3y), h),
                (pb(V, OmegaCommon, Out3y), h),
            ],
        );
        let (op, f) = analyze_recoverability(
            &state,
            Out3y,
            XOutcome::PlusX,
            &q,
            &CorrectionOp::pauli_set(),
        )
        .unwrap();
        assert_eq!(op.name, CorrectionName::Identity);
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recoverability_degenerate_reports_zero() {
        let q = InputQubit::horizontal();
        let h = c(0.5f64.sqrt(), 0.0);
        let state = TwoPhotonState::product(
            &[(pb(V, OmegaCommon, Out3x), c(1.0, 0.0))],
            &[
                (pb(H, OmegaCommon, Out3y), h),
                (pb(V, OmegaCommon, Out3y), h),
            ],
        );
        let only_id = [
            CorrectionOp::new(CorrectionName::Identity),
            CorrectionOp::new(CorrectionName::SigmaZ),
        ];
        let (op, f) = analyze_recoverability(&state, Out3y, XOutcome::PlusX, &q, &only_id).unwrap();
        assert_eq!(op.name, CorrectionName::Identity);
        assert!(f.abs() < 1e-12);
        assert!(analyze_recoverability(&state, Out3y, XOutcome::PlusX, &q, &[]).is_err());
    }

    #[test]
    fn single_fs_scales_by_eta() {
        let q = generic_input();
        let u = NoiseFamily::Haar { seed: 5 }.sample(1);
        let ev = evaluate(
            &q,
            &u,
            &DecoderConfig::single_fs(0.4),
            &AcceptanceFilter::default(),
        )
        .unwrap();
        assert!((ev.success - 0.2).abs() < ALGEBRA_TOL);
        assert!((ev.lost - 0.6).abs() < ALGEBRA_TOL);
    }

    #[test]
    fn evaluation_accounts_for_all_probability() {
        let q = generic_input();
        let u = NoiseFamily::Haar { seed: 5 }.sample(4);
        let ev = evaluate(
            &q,
            &u,
            &DecoderConfig::dual_fs(0.65),
            &AcceptanceFilter::same_port_plus_x(),
        )
        .unwrap();
        let kept: f64 = ev
            .outcomes
            .iter()
            .filter(|o| o.kept)
            .map(|o| o.joint_probability)
            .sum();
        assert!((kept + ev.discard + ev.lost - 1.0).abs() < 1e-10);
        assert!(ev
            .outcomes
            .iter()
            .filter(|o| !o.kept)
            .all(|o| o.correction.is_none() && o.fidelity.is_none()));
    }
}
