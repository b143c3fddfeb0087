//! Dense brute-force evolution used to cross-check the sparse pipeline.
//!
//! The two-photon state is a full 84 x 84 amplitude matrix (rows: reference
//! photon, columns: signal photon) over every (polarization, frequency, path)
//! label. Each optical stage is an explicit 84 x 84 single-photon matrix
//! written out here from the element definitions, without going through the
//! sparse routines in `state`/`elements`. A stage acts on both photons as
//! `psi -> A psi A^T`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::elements::NoiseUnitary;
use crate::protocol::{Branch, DecoderConfig, DecoderVariant, InputQubit};
use crate::state::{Frequency, PathLabel, Polarization, TwoPhotonState};

pub const PHOTON_DIM: usize = 2 * 3 * 14;

type Label = (Polarization, Frequency, PathLabel);

fn pol_idx(p: Polarization) -> usize {
    match p {
        Polarization::H => 0,
        Polarization::V => 1,
    }
}

fn freq_idx(f: Frequency) -> usize {
    match f {
        Frequency::OmegaR => 0,
        Frequency::OmegaS => 1,
        Frequency::OmegaCommon => 2,
    }
}

fn path_idx(p: PathLabel) -> usize {
    PathLabel::ALL.iter().position(|q| *q == p).unwrap()
}

pub fn index(l: Label) -> usize {
    pol_idx(l.0) * 42 + freq_idx(l.1) * 14 + path_idx(l.2)
}

fn all_labels() -> impl Iterator<Item = Label> {
    [Polarization::H, Polarization::V]
        .into_iter()
        .flat_map(|p| {
            [Frequency::OmegaR, Frequency::OmegaS, Frequency::OmegaCommon]
                .into_iter()
                .flat_map(move |f| PathLabel::ALL.into_iter().map(move |q| (p, f, q)))
        })
}

/// Single-photon stage matrix: column `index(l)` holds the image of `l`.
/// `image` returns `None` for labels the stage leaves alone.
fn stage_matrix<F>(image: F) -> DMatrix<Complex64>
where
    F: Fn(Label) -> Option<Vec<(Label, Complex64)>>,
{
    let mut m = DMatrix::zeros(PHOTON_DIM, PHOTON_DIM);
    for l in all_labels() {
        let j = index(l);
        match image(l) {
            Some(terms) => {
                for (out, c) in terms {
                    m[(index(out), j)] += c;
                }
            }
            None => m[(j, j)] = Complex64::new(1.0, 0.0),
        }
    }
    m
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn flip(p: Polarization) -> Polarization {
    match p {
        Polarization::H => Polarization::V,
        Polarization::V => Polarization::H,
    }
}

/// Dense two-photon amplitude matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub amps: DMatrix<Complex64>,
}

impl DenseState {
    pub fn from_sparse(state: &TwoPhotonState) -> Self {
        let mut amps = DMatrix::zeros(PHOTON_DIM, PHOTON_DIM);
        for ((r, s), a) in state.iter() {
            amps[(
                index((r.pol, r.freq, r.path)),
                index((s.pol, s.freq, s.path)),
            )] += a;
        }
        DenseState { amps }
    }

    /// `A psi A^T`, skipping zero entries of `A`.
    fn evolve(&self, a: &DMatrix<Complex64>) -> Self {
        let nz: Vec<(usize, usize, Complex64)> = (0..PHOTON_DIM)
            .flat_map(|j| (0..PHOTON_DIM).map(move |i| (i, j)))
            .filter_map(|(i, j)| {
                let c = a[(i, j)];
                (c != Complex64::new(0.0, 0.0)).then_some((i, j, c))
            })
            .collect();
        let mut left: DMatrix<Complex64> = DMatrix::zeros(PHOTON_DIM, PHOTON_DIM);
        for &(i, k, c) in &nz {
            for col in 0..PHOTON_DIM {
                left[(i, col)] += c * self.amps[(k, col)];
            }
        }
        let mut out = DMatrix::zeros(PHOTON_DIM, PHOTON_DIM);
        for &(j, k, c) in &nz {
            for row in 0..PHOTON_DIM {
                out[(row, j)] += left[(row, k)] * c;
            }
        }
        DenseState { amps: out }
    }

    pub fn squared_norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseState) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Coincidence probabilities in `Branch::ALL` order, counting both
    /// assignments of the two photons to the x and y outputs.
    pub fn branch_probabilities(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, branch) in Branch::ALL.into_iter().enumerate() {
            let (x, y) = (branch.x_path(), branch.y_path());
            for r in all_labels() {
                for s in all_labels() {
                    let hit = (r.2 == x && s.2 == y) || (r.2 == y && s.2 == x);
                    if hit {
                        out[k] += self.amps[(index(r), index(s))].norm_sqr();
                    }
                }
            }
        }
        out
    }
}

fn prepare(input: &InputQubit) -> DenseState {
    let h = 0.5f64.sqrt();
    let mut amps = DMatrix::zeros(PHOTON_DIM, PHOTON_DIM);
    let refs = [
        ((Polarization::H, Frequency::OmegaR, PathLabel::SourceR), h),
        ((Polarization::V, Frequency::OmegaR, PathLabel::SourceR), h),
    ];
    let sigs = [
        (
            (Polarization::H, Frequency::OmegaS, PathLabel::SourceS),
            input.alpha(),
        ),
        (
            (Polarization::V, Frequency::OmegaS, PathLabel::SourceS),
            input.beta(),
        ),
    ];
    for (r, ra) in refs {
        for (s, sa) in sigs {
            amps[(index(r), index(s))] = sa * ra;
        }
    }
    DenseState { amps }
}

/// Evolves `input` through the whole pipeline on the dense representation.
pub fn oracle_evolve(input: &InputQubit, u: &NoiseUnitary, cfg: &DecoderConfig) -> DenseState {
    use Frequency::*;
    use PathLabel::*;
    use Polarization::*;

    let mut psi = prepare(input);

    // PBS1: H into channel 1, V into channel 2.
    psi = psi.evolve(&stage_matrix(|(p, f, q)| match q {
        SourceR | SourceS => Some(vec![((p, f, if p == H { Ch1 } else { Ch2 }), one())]),
        _ => None,
    }));

    // Collective noise on both channels.
    psi = psi.evolve(&stage_matrix(|(p, f, q)| match q {
        Ch1 | Ch2 => Some(match p {
            H => vec![((H, f, q), u.delta1), ((V, f, q), u.eta1)],
            V => vec![((H, f, q), u.delta2), ((V, f, q), u.eta2)],
        }),
        _ => None,
    }));

    // PBS2: ch1 H->3, V->4; ch2 H->4, V->3.
    psi = psi.evolve(&stage_matrix(|(p, f, q)| {
        let out = match (q, p) {
            (Ch1, H) | (Ch2, V) => P3,
            (Ch1, V) | (Ch2, H) => P4,
            _ => return None,
        };
        Some(vec![((p, f, out), one())])
    }));

    // HWP0 at 45 degrees swaps H and V on port 3.
    if cfg.with_hwp0 {
        psi = psi.evolve(&stage_matrix(|(p, f, q)| {
            (q == P3).then(|| vec![((flip(p), f, q), one())])
        }));
    }

    // FBS on each port: reference frequency up, signal frequency down.
    psi = psi.evolve(&stage_matrix(|(p, f, q)| {
        let out = match (q, f) {
            (P3, OmegaR) => P3Up,
            (P3, OmegaS) => P3Down,
            (P4, OmegaR) => P4Up,
            (P4, OmegaS) => P4Down,
            _ => return None,
        };
        Some(vec![((p, f, out), one())])
    }));

    // Decoder HWP at 45 degrees on the up arms.
    psi = psi.evolve(&stage_matrix(|(p, f, q)| {
        matches!(q, P3Up | P4Up).then(|| vec![((flip(p), f, q), one())])
    }));

    // Frequency erasure.
    let is_arm = |q: PathLabel| matches!(q, P3Up | P3Down | P4Up | P4Down);
    let is_up = |q: PathLabel| matches!(q, P3Up | P4Up);
    psi = match cfg.variant {
        DecoderVariant::FrequencyDualFs => {
            let amp = Complex64::new(cfg.eta.sqrt(), 0.0);
            psi.evolve(&stage_matrix(|(p, _, q)| {
                is_arm(q).then(|| vec![((p, OmegaCommon, q), amp)])
            }))
        }
        DecoderVariant::FrequencySingleFs => {
            let amp = Complex64::new(cfg.eta.sqrt(), 0.0);
            psi.evolve(&stage_matrix(|(p, _, q)| {
                is_up(q).then(|| vec![((p, OmegaS, q), amp)])
            }))
        }
        DecoderVariant::TemporalEraser => {
            let amp = Complex64::new(cfg.t.sqrt(), 0.0);
            psi.evolve(&stage_matrix(|(p, _, q)| {
                is_arm(q).then(|| vec![((p, OmegaCommon, q), amp)])
            }))
        }
    };

    // PBS3/PBS4: up V->x, up H->y, down H->x, down V->y.
    psi.evolve(&stage_matrix(|(p, f, q)| {
        let out = match (q, p) {
            (P3Up, V) | (P3Down, H) => Out3x,
            (P3Up, H) | (P3Down, V) => Out3y,
            (P4Up, V) | (P4Down, H) => Out4x,
            (P4Up, H) | (P4Down, V) => Out4y,
            _ => return None,
        };
        Some(vec![((p, f, out), one())])
    }))
}
