//! Collective-noise generators.
//!
//! Haar samples are drawn from a ChaCha8 stream keyed by `(seed, trial_index)`,
//! so a trial's matrix never depends on which worker computes it or in what
//! order trials run.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::elements::NoiseUnitary;
use crate::error::{Error, Result};

/// A family of collective-noise channels. Angles are in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseFamily {
    Haar { seed: u64 },
    Dephasing { phi: f64 },
    Rotation { theta: f64 },
    Bitflip,
    Fixed { unitary: NoiseUnitary },
}

impl NoiseFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseFamily::Dephasing { phi } if !phi.is_finite() => {
                Err(Error::param("noise.parameters.phi", "must be finite"))
            }
            NoiseFamily::Rotation { theta } if !theta.is_finite() => {
                Err(Error::param("noise.parameters.theta", "must be finite"))
            }
            NoiseFamily::Fixed { unitary } => {
                let deviation = unitary.unitarity_deviation();
                if deviation > crate::elements::UNITARITY_TOL {
                    Err(Error::NotUnitary { deviation })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// True if every trial sees the same matrix.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, NoiseFamily::Haar { .. })
    }

    pub fn sample(&self, trial_index: u64) -> NoiseUnitary {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        match *self {
            NoiseFamily::Haar { seed } => haar_unitary(&mut trial_rng(seed, trial_index)),
            NoiseFamily::Dephasing { phi } => NoiseUnitary {
                delta1: o,
                delta2: z,
                eta1: z,
                eta2: Complex64::from_polar(1.0, phi),
            },
            NoiseFamily::Rotation { theta } => {
                let (s, c) = theta.sin_cos();
                NoiseUnitary {
                    delta1: Complex64::new(c, 0.0),
                    delta2: Complex64::new(-s, 0.0),
                    eta1: Complex64::new(s, 0.0),
                    eta2: Complex64::new(c, 0.0),
                }
            }
            NoiseFamily::Bitflip => NoiseUnitary {
                delta1: z,
                delta2: o,
                eta1: o,
                eta2: z,
            },
            NoiseFamily::Fixed { unitary } => unitary,
        }
    }
}

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

pub(crate) fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> (Complex64, Complex64) {
    let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    (Complex64::new(g[0], g[1]), Complex64::new(g[2], g[3]))
}

/// Haar-distributed U(2): a uniformly random unit first column, the
/// orthogonal second column, and a uniform phase on the second column.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> NoiseUnitary {
    let (a, b) = gaussian_pair(rng);
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    let phase = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
    NoiseUnitary {
        delta1: a,
        eta1: b,
        delta2: -phase * b.conj(),
        eta2: phase * a.conj(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::SingleQubitOp;

    #[test]
    fn rotation_zero_is_identity() {
        let u = NoiseFamily::Rotation { theta: 0.0 }.sample(0);
        assert_eq!(u, NoiseUnitary::identity());
    }

    #[test]
    fn dephasing_form() {
        let phi = 0.7;
        let u = NoiseFamily::Dephasing { phi }.sample(3);
        assert_eq!(u.delta1, Complex64::new(1.0, 0.0));
        assert_eq!(u.eta1, Complex64::new(0.0, 0.0));
        assert_eq!(u.delta2, Complex64::new(0.0, 0.0));
        assert!((u.eta2 - Complex64::from_polar(1.0, phi)).norm() < 1e-15);
    }

    #[test]
    fn bitflip_is_sigma_x() {
        let u = NoiseFamily::Bitflip.sample(0);
        assert_eq!(u.matrix(), SingleQubitOp::sigma_x());
    }

    #[test]
    fn haar_is_deterministic_per_trial() {
        let f = NoiseFamily::Haar { seed: 42 };
        assert_eq!(f.sample(17), f.sample(17));
        assert_ne!(f.sample(17), f.sample(18));
        assert_ne!(f.sample(17), NoiseFamily::Haar { seed: 43 }.sample(17));
        // Evaluation order does not matter.
        let forward: Vec<_> = (0..50).map(|i| f.sample(i)).collect();
        let backward: Vec<_> = (0..50).rev().map(|i| f.sample(i)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
    }

    #[test]
    fn haar_samples_are_unitary() {
        let f = NoiseFamily::Haar { seed: 9 };
        for i in 0..2000 {
            assert!(f.sample(i).unitarity_deviation() < 1e-12);
        }
    }

    #[test]
    fn haar_moments() {
        // E|d1|^2 = 1/2 and E|d1|^4 = 1/3 for Haar U(2).
        let f = NoiseFamily::Haar { seed: 2024 };
        let n = 100_000;
        let (mut s2, mut s4, mut s2sq, mut s4sq) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let p = f.sample(i).delta1.norm_sqr();
            s2 += p;
            s2sq += p * p;
            s4 += p * p;
            s4sq += p.powi(4);
        }
        let nf = n as f64;
        let (m2, m4) = (s2 / nf, s4 / nf);
        let se2 = ((s2sq / nf - m2 * m2) / nf).sqrt();
        let se4 = ((s4sq / nf - m4 * m4) / nf).sqrt();
        assert!((m2 - 0.5).abs() < 3.0 * se2, "E|d1|^2 = {m2} +- {se2}");
        assert!(
            (m4 - 1.0 / 3.0).abs() < 3.0 * se4,
            "E|d1|^4 = {m4} +- {se4}"
        );
    }

    #[test]
    fn fixed_family_rejects_non_unitary_json() {
        let bad = r#"{"kind":"fixed","unitary":{"delta1":{"re":1,"im":0},"delta2":{"re":1,"im":0},"eta1":{"re":0,"im":0},"eta2":{"re":1,"im":0}}}"#;
        assert!(serde_json::from_str::<NoiseFamily>(bad).is_err());
    }
}
