//! Optical elements as thin wrappers over the state primitives.
//!
//! Conventions, fixed for the whole crate:
//! - every PBS transmits H and reflects V with no reflection phase;
//! - a two-port PBS with inputs `(a, b)` and outputs `(c, d)` sends
//!   `a:H -> c`, `a:V -> d`, `b:H -> d`, `b:V -> c`;
//! - loss is subnormalization: lossy elements scale amplitudes and nothing
//!   tracks the lost part.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{
    Frequency, PathLabel, PathSet, PhotonBasis, Polarization, SingleQubitOp, Slot, TwoPhotonState,
    ALGEBRA_TOL,
};

/// Unitarity tolerance for noise matrices.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Collective-noise matrix acting as `|H> -> delta1 |H> + eta1 |V>` and
/// `|V> -> delta2 |H> + eta2 |V>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseUnitary {
    pub delta1: Complex64,
    pub delta2: Complex64,
    pub eta1: Complex64,
    pub eta2: Complex64,
}

impl NoiseUnitary {
    pub fn new(
        delta1: Complex64,
        delta2: Complex64,
        eta1: Complex64,
        eta2: Complex64,
    ) -> Result<Self> {
        let u = NoiseUnitary {
            delta1,
            delta2,
            eta1,
            eta2,
        };
        let deviation = u.unitarity_deviation();
        if deviation.is_nan() || deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        NoiseUnitary {
            delta1: o,
            delta2: z,
            eta1: z,
            eta2: o,
        }
    }

    pub fn matrix(&self) -> SingleQubitOp {
        SingleQubitOp([[self.delta1, self.delta2], [self.eta1, self.eta2]])
    }

    pub fn unitarity_deviation(&self) -> f64 {
        self.matrix().unitarity_deviation()
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseUnitaryRepr {
    #[serde(with = "crate::serde_complex")]
    delta1: Complex64,
    #[serde(with = "crate::serde_complex")]
    delta2: Complex64,
    #[serde(with = "crate::serde_complex")]
    eta1: Complex64,
    #[serde(with = "crate::serde_complex")]
    eta2: Complex64,
}

impl serde::Serialize for NoiseUnitary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NoiseUnitaryRepr {
            delta1: self.delta1,
            delta2: self.delta2,
            eta1: self.eta1,
            eta2: self.eta2,
        }
        .serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for NoiseUnitary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = NoiseUnitaryRepr::deserialize(d)?;
        NoiseUnitary::new(r.delta1, r.delta2, r.eta1, r.eta2).map_err(serde::de::Error::custom)
    }
}

/// Half-wave plate Jones matrix with the fast axis at `theta_deg`.
pub fn hwp_matrix(theta_deg: f64) -> SingleQubitOp {
    let two = 2.0 * theta_deg.to_radians();
    let (s, c) = two.sin_cos();
    // Exact values at multiples of 45 degrees keep sigma_x exact.
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    let (s, c) = (Complex64::new(snap(s), 0.0), Complex64::new(snap(c), 0.0));
    SingleQubitOp([[c, s], [s, -c]])
}

/// Polarization-conditioned routing table. Each route is
/// `(input path, output for H, output for V)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pbs {
    routes: Vec<(PathLabel, PathLabel, PathLabel)>,
}

impl Pbs {
    pub fn two_port(in_paths: (PathLabel, PathLabel), out_paths: (PathLabel, PathLabel)) -> Self {
        let (a, b) = in_paths;
        let (c, d) = out_paths;
        Pbs {
            routes: vec![(a, c, d), (b, d, c)],
        }
    }

    /// A PBS fed on one port only.
    pub fn single_input(input: PathLabel, h_out: PathLabel, v_out: PathLabel) -> Self {
        Pbs {
            routes: vec![(input, h_out, v_out)],
        }
    }

    /// Two splitters acting in the same stage.
    pub fn and(mut self, other: Pbs) -> Self {
        self.routes.extend(other.routes);
        self
    }

    fn route(&self, b: PhotonBasis) -> Option<PhotonBasis> {
        self.routes
            .iter()
            .find(|(input, _, _)| *input == b.path)
            .map(|&(_, h, v)| match b.pol {
                Polarization::H => b.with_path(h),
                Polarization::V => b.with_path(v),
            })
    }

    /// Routes both photons. Every photon must sit on one of the inputs.
    pub fn apply(&self, state: &TwoPhotonState) -> Result<TwoPhotonState> {
        let mut out = state.clone();
        for slot in Slot::BOTH {
            out = out.map_photons(slot, |b| {
                self.route(b).ok_or(Error::StageContract {
                    element: "pbs",
                    basis: b,
                    path: b.path,
                })
            })?;
        }
        Ok(out)
    }
}

pub fn pbs(
    state: &TwoPhotonState,
    in_paths: (PathLabel, PathLabel),
    out_paths: (PathLabel, PathLabel),
) -> Result<TwoPhotonState> {
    Pbs::two_port(in_paths, out_paths).apply(state)
}

/// Half-wave plate on every photon whose path is in `filter`.
pub fn hwp(state: &TwoPhotonState, filter: &PathSet, theta_deg: f64) -> TwoPhotonState {
    let m = hwp_matrix(theta_deg);
    state
        .apply_single_photon_op(Slot::R, filter, &m)
        .apply_single_photon_op(Slot::S, filter, &m)
}

/// Frequency beam splitter: `omega_r` on `in_path` goes to `out_up`,
/// `omega_s` to `out_down`. Photons on other paths are untouched.
pub fn fbs(
    state: &TwoPhotonState,
    in_path: PathLabel,
    out_up: PathLabel,
    out_down: PathLabel,
) -> Result<TwoPhotonState> {
    let mut out = state.clone();
    for slot in Slot::BOTH {
        out = out.map_photons(slot, |b| {
            if b.path != in_path {
                return Ok(b);
            }
            match b.freq {
                Frequency::OmegaR => Ok(b.with_path(out_up)),
                Frequency::OmegaS => Ok(b.with_path(out_down)),
                Frequency::OmegaCommon => Err(Error::StageViolation {
                    element: "fbs",
                    detail: format!("photon {b} already carries the shifted frequency"),
                }),
            }
        })?;
    }
    Ok(out)
}

fn check_unit_interval(field: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::param(
            field,
            format!("must lie in [0, 1] (got {value})"),
        ));
    }
    Ok(())
}

fn attenuate(state: &TwoPhotonState, filter: &PathSet, factor: f64) -> TwoPhotonState {
    let op = SingleQubitOp::scalar(Complex64::new(factor.sqrt(), 0.0));
    state
        .apply_single_photon_op(Slot::R, filter, &op)
        .apply_single_photon_op(Slot::S, filter, &op)
}

/// Frequency shifter to `omega_common` with success efficiency `efficiency`.
pub fn frequency_shifter(
    state: &TwoPhotonState,
    filter: &PathSet,
    efficiency: f64,
) -> Result<TwoPhotonState> {
    frequency_shifter_to(state, filter, Frequency::OmegaCommon, efficiency)
}

/// Frequency shifter with an explicit target frequency. Each photon on a
/// `filter` path is relabeled to `target` and scaled by `sqrt(efficiency)`.
pub fn frequency_shifter_to(
    state: &TwoPhotonState,
    filter: &PathSet,
    target: Frequency,
    efficiency: f64,
) -> Result<TwoPhotonState> {
    check_unit_interval("eta", efficiency)?;
    let mut out = attenuate(state, filter, efficiency);
    for slot in Slot::BOTH {
        out = out.map_photons(slot, |b| {
            Ok(if filter.contains(b.path) {
                b.with_freq(target)
            } else {
                b
            })
        })?;
    }
    Ok(out)
}

/// Passive temporal eraser: amplitude factor `sqrt(transmission)` per
/// photon on a `filter` path, labels unchanged.
pub fn temporal_eraser(
    state: &TwoPhotonState,
    filter: &PathSet,
    transmission: f64,
) -> Result<TwoPhotonState> {
    check_unit_interval("t", transmission)?;
    Ok(attenuate(state, filter, transmission))
}

/// Default per-photon transmission of the passive temporal eraser.
pub const DEFAULT_ERASER_TRANSMISSION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum XOutcome {
    PlusX,
    MinusX,
}

impl XOutcome {
    pub const BOTH: [XOutcome; 2] = [XOutcome::PlusX, XOutcome::MinusX];

    pub fn name(self) -> &'static str {
        match self {
            XOutcome::PlusX => "+x",
            XOutcome::MinusX => "-x",
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            XOutcome::PlusX => 1.0,
            XOutcome::MinusX => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub basis_vector: XOutcome,
    pub probability: f64,
    /// Renormalized post-measurement state; the measured photon is left in
    /// the projected X eigenstate. Empty if `probability` is zero.
    pub collapsed_state: TwoPhotonState,
}

/// X-basis measurement of the photon in `slot`, which must be on `path`.
///
/// Outcome probabilities are squared norms of the projections, so they sum
/// to the squared norm of the input.
pub fn x_measure(
    state: &TwoPhotonState,
    slot: Slot,
    path: PathLabel,
) -> Result<(MeasurementOutcome, MeasurementOutcome)> {
    if let Some(b) = state.photons(slot).find(|b| b.path != path) {
        return Err(Error::StageContract {
            element: "x_measure",
            basis: b,
            path: b.path,
        });
    }
    let project = |outcome: XOutcome| {
        let s = outcome.sign();
        // |+-x><+-x| = 1/2 [[1, +-1], [+-1, 1]]
        let proj = SingleQubitOp([
            [Complex64::new(0.5, 0.0), Complex64::new(0.5 * s, 0.0)],
            [Complex64::new(0.5 * s, 0.0), Complex64::new(0.5, 0.0)],
        ]);
        let projected = state.apply_single_photon_op(slot, &PathSet::single(path), &proj);
        let p = projected.squared_norm();
        let collapsed = if p > 0.0 {
            projected.scaled(Complex64::new(1.0 / p.sqrt(), 0.0))
        } else {
            TwoPhotonState::new()
        };
        MeasurementOutcome {
            basis_vector: outcome,
            probability: p,
            collapsed_state: collapsed,
        }
    };
    Ok((project(XOutcome::PlusX), project(XOutcome::MinusX)))
}

/// True when both outcome probabilities add up to the input weight.
pub fn measurement_is_consistent(
    state: &TwoPhotonState,
    outcomes: &(MeasurementOutcome, MeasurementOutcome),
) -> bool {
    let total = outcomes.0.probability + outcomes.1.probability;
    (total - state.squared_norm()).abs() < ALGEBRA_TOL
}
