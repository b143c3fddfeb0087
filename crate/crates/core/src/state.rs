//! Sparse amplitude representation of two labeled photons.
//!
//! Each photon carries a polarization, a frequency label and a path label.
//! The two photons keep their identity through slot position: the first
//! entry of every basis pair is the reference photon (slot `R`), the second
//! the signal photon (slot `S`). Amplitudes live in an ordered map, so
//! iteration order is deterministic and lexicographic in the labels.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Add;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entries below this magnitude are dropped from the amplitude map.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Comparison tolerance for deterministic algebra.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Tolerance for normalization checks on user-facing states.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Polarization amplitudes in the (H, V) basis.
pub type PolVector = [Complex64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Polarization::H,
            1 => Polarization::V,
            _ => panic!("polarization index out of range: {i}"),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Frequency {
    OmegaR,
    OmegaS,
    /// Common value both photons are shifted to before the final interference.
    OmegaCommon,
}

impl Frequency {
    pub const ALL: [Frequency; 3] = [Frequency::OmegaR, Frequency::OmegaS, Frequency::OmegaCommon];

    pub fn name(self) -> &'static str {
        match self {
            Frequency::OmegaR => "omega_r",
            Frequency::OmegaS => "omega_s",
            Frequency::OmegaCommon => "omega_common",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathLabel {
    SourceR,
    SourceS,
    Ch1,
    Ch2,
    P3,
    P4,
    P3Up,
    P3Down,
    P4Up,
    P4Down,
    Out3x,
    Out3y,
    Out4x,
    Out4y,
}

impl PathLabel {
    pub const ALL: [PathLabel; 14] = [
        PathLabel::SourceR,
        PathLabel::SourceS,
        PathLabel::Ch1,
        PathLabel::Ch2,
        PathLabel::P3,
        PathLabel::P4,
        PathLabel::P3Up,
        PathLabel::P3Down,
        PathLabel::P4Up,
        PathLabel::P4Down,
        PathLabel::Out3x,
        PathLabel::Out3y,
        PathLabel::Out4x,
        PathLabel::Out4y,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PathLabel::SourceR => "source_r",
            PathLabel::SourceS => "source_s",
            PathLabel::Ch1 => "ch1",
            PathLabel::Ch2 => "ch2",
            PathLabel::P3 => "p3",
            PathLabel::P4 => "p4",
            PathLabel::P3Up => "p3_up",
            PathLabel::P3Down => "p3_down",
            PathLabel::P4Up => "p4_up",
            PathLabel::P4Down => "p4_down",
            PathLabel::Out3x => "out_3x",
            PathLabel::Out3y => "out_3y",
            PathLabel::Out4x => "out_4x",
            PathLabel::Out4y => "out_4y",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully labeled single-photon basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhotonBasis {
    pub pol: Polarization,
    pub freq: Frequency,
    pub path: PathLabel,
}

impl PhotonBasis {
    pub const fn new(pol: Polarization, freq: Frequency, path: PathLabel) -> Self {
        PhotonBasis { pol, freq, path }
    }

    pub fn with_pol(self, pol: Polarization) -> Self {
        PhotonBasis { pol, ..self }
    }

    pub fn with_freq(self, freq: Frequency) -> Self {
        PhotonBasis { freq, ..self }
    }

    pub fn with_path(self, path: PathLabel) -> Self {
        PhotonBasis { path, ..self }
    }
}

impl fmt::Display for PhotonBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.pol, self.freq, self.path)
    }
}

/// Which photon of the pair an operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    /// Reference photon.
    R,
    /// Signal photon.
    S,
}

impl Slot {
    pub const BOTH: [Slot; 2] = [Slot::R, Slot::S];

    fn pick(self, key: &(PhotonBasis, PhotonBasis)) -> PhotonBasis {
        match self {
            Slot::R => key.0,
            Slot::S => key.1,
        }
    }

    fn replace(
        self,
        key: (PhotonBasis, PhotonBasis),
        photon: PhotonBasis,
    ) -> (PhotonBasis, PhotonBasis) {
        match self {
            Slot::R => (photon, key.1),
            Slot::S => (key.0, photon),
        }
    }
}

/// Non-empty set of path labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSet(u16);

impl PathSet {
    pub fn new(paths: &[PathLabel]) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptyPathFilter);
        }
        Ok(PathSet(paths.iter().fold(0, |acc, p| acc | p.bit())))
    }

    pub fn single(path: PathLabel) -> Self {
        PathSet(path.bit())
    }

    pub fn all() -> Self {
        PathSet(PathLabel::ALL.iter().fold(0, |acc, p| acc | p.bit()))
    }

    pub fn contains(&self, path: PathLabel) -> bool {
        self.0 & path.bit() != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = PathLabel> + '_ {
        PathLabel::ALL.into_iter().filter(|p| self.contains(*p))
    }
}

/// A 2x2 complex matrix on the polarization subspace, row-major in (H, V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitOp(pub [[Complex64; 2]; 2]);

impl SingleQubitOp {
    pub fn new(m: [[Complex64; 2]; 2]) -> Self {
        SingleQubitOp(m)
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        SingleQubitOp([[o, z], [z, o]])
    }

    /// |H><V| + |V><H|
    pub fn sigma_x() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        SingleQubitOp([[z, o], [o, z]])
    }

    /// |H><V| - |V><H|
    pub fn minus_i_sigma_y() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        SingleQubitOp([[z, o], [-o, z]])
    }

    pub fn sigma_z() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        SingleQubitOp([[o, z], [z, -o]])
    }

    pub fn scalar(c: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        SingleQubitOp([[c, z], [z, c]])
    }

    pub fn entry(&self, row: Polarization, col: Polarization) -> Complex64 {
        self.0[row.index()][col.index()]
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &SingleQubitOp) -> SingleQubitOp {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        SingleQubitOp(out)
    }

    pub fn adjoint(&self) -> SingleQubitOp {
        let m = &self.0;
        SingleQubitOp([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn apply(&self, v: &PolVector) -> PolVector {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// max |U^dagger U - I| over entries.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = SingleQubitOp::identity();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &SingleQubitOp) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }
}

/// Reduced 2x2 polarization density matrix of one photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationDensity(pub [[Complex64; 2]; 2]);

impl PolarizationDensity {
    pub fn pure(v: &PolVector) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = v[i] * v[j].conj();
            }
        }
        PolarizationDensity(m)
    }

    pub fn trace(&self) -> f64 {
        (self.0[0][0] + self.0[1][1]).re
    }

    /// Returns `rho / tr(rho)`, or `None` for a zero matrix.
    pub fn normalized(&self) -> Option<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return None;
        }
        let mut m = self.0;
        for row in m.iter_mut() {
            for c in row.iter_mut() {
                *c /= t;
            }
        }
        Some(PolarizationDensity(m))
    }

    /// `op * rho * op^dagger`
    pub fn transformed(&self, op: &SingleQubitOp) -> Self {
        let rho = SingleQubitOp(self.0);
        PolarizationDensity(op.mul(&rho).mul(&op.adjoint()).0)
    }

    /// `<v| rho |v>`
    pub fn expectation(&self, v: &PolVector) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += v[i].conj() * self.0[i][j] * v[j];
            }
        }
        acc.re
    }

    pub fn purity(&self) -> f64 {
        let rho = SingleQubitOp(self.0);
        let sq = rho.mul(&rho);
        (sq.0[0][0] + sq.0[1][1]).re
    }
}

pub fn pol_norm_sqr(v: &PolVector) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// |<a|b>|^2 for two normalized single-photon polarization states.
pub fn fidelity_pure(a: &PolVector, b: &PolVector) -> Result<f64> {
    for v in [a, b] {
        let n = pol_norm_sqr(v);
        if (n - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Unnormalized { norm_sqr: n });
        }
    }
    let inner = a[0].conj() * b[0] + a[1].conj() * b[1];
    Ok(inner.norm_sqr().clamp(0.0, 1.0))
}

/// Matches a photon on any subset of its labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelMatch {
    pub pol: Option<Polarization>,
    pub freq: Option<Frequency>,
    pub path: Option<PathLabel>,
}

impl LabelMatch {
    pub fn matches(&self, b: &PhotonBasis) -> bool {
        self.pol.is_none_or(|p| p == b.pol)
            && self.freq.is_none_or(|f| f == b.freq)
            && self.path.is_none_or(|p| p == b.path)
    }
}

/// Replacement frequency and/or path for a matched photon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelRewrite {
    pub freq: Option<Frequency>,
    pub path: Option<PathLabel>,
}

/// Ordered list of (match, rewrite) entries; the first matching entry wins,
/// unmatched photons keep their labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelabelRule {
    entries: Vec<(LabelMatch, LabelRewrite)>,
}

impl RelabelRule {
    pub fn identity() -> Self {
        RelabelRule::default()
    }

    pub fn with(mut self, m: LabelMatch, r: LabelRewrite) -> Self {
        self.entries.push((m, r));
        self
    }

    pub fn path(self, from: PathLabel, to: PathLabel) -> Self {
        self.with(
            LabelMatch {
                path: Some(from),
                ..Default::default()
            },
            LabelRewrite {
                path: Some(to),
                ..Default::default()
            },
        )
    }

    pub fn path_for_pol(self, pol: Polarization, from: PathLabel, to: PathLabel) -> Self {
        self.with(
            LabelMatch {
                pol: Some(pol),
                path: Some(from),
                ..Default::default()
            },
            LabelRewrite {
                path: Some(to),
                ..Default::default()
            },
        )
    }

    pub fn path_for_freq(self, freq: Frequency, from: PathLabel, to: PathLabel) -> Self {
        self.with(
            LabelMatch {
                freq: Some(freq),
                path: Some(from),
                ..Default::default()
            },
            LabelRewrite {
                path: Some(to),
                ..Default::default()
            },
        )
    }

    pub fn freq(self, from: Frequency, to: Frequency) -> Self {
        self.with(
            LabelMatch {
                freq: Some(from),
                ..Default::default()
            },
            LabelRewrite {
                freq: Some(to),
                ..Default::default()
            },
        )
    }

    pub fn freq_on_path(self, path: PathLabel, to: Frequency) -> Self {
        self.with(
            LabelMatch {
                path: Some(path),
                ..Default::default()
            },
            LabelRewrite {
                freq: Some(to),
                ..Default::default()
            },
        )
    }

    pub fn apply(&self, b: PhotonBasis) -> PhotonBasis {
        match self.entries.iter().find(|(m, _)| m.matches(&b)) {
            Some((_, r)) => PhotonBasis {
                pol: b.pol,
                freq: r.freq.unwrap_or(b.freq),
                path: r.path.unwrap_or(b.path),
            },
            None => b,
        }
    }
}

type Key = (PhotonBasis, PhotonBasis);

/// Two-photon state as a sparse map from labeled basis pairs to amplitudes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TwoPhotonState {
    amps: BTreeMap<Key, Complex64>,
}

impl TwoPhotonState {
    pub fn new() -> Self {
        TwoPhotonState::default()
    }

    /// Builds a state from terms, summing repeated keys and pruning.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Key, Complex64)>,
    {
        let mut amps: BTreeMap<Key, Complex64> = BTreeMap::new();
        for (k, a) in terms {
            *amps.entry(k).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        amps.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        TwoPhotonState { amps }
    }

    /// Like `from_terms` but without pruning. Used to measure pruning error.
    pub fn from_terms_unpruned<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Key, Complex64)>,
    {
        let mut amps: BTreeMap<Key, Complex64> = BTreeMap::new();
        for (k, a) in terms {
            *amps.entry(k).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        TwoPhotonState { amps }
    }

    /// Tensor product of two single-photon superpositions.
    pub fn product(r: &[(PhotonBasis, Complex64)], s: &[(PhotonBasis, Complex64)]) -> Self {
        TwoPhotonState::from_terms(
            r.iter()
                .flat_map(|&(rb, ra)| s.iter().map(move |&(sb, sa)| ((rb, sb), ra * sa))),
        )
    }

    pub fn pruned(&self) -> Self {
        TwoPhotonState::from_terms(self.iter())
    }

    pub fn amplitude(&self, r: PhotonBasis, s: PhotonBasis) -> Complex64 {
        self.amps
            .get(&(r, s))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Key, Complex64)> + '_ {
        self.amps.iter().map(|(k, a)| (*k, *a))
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        TwoPhotonState::from_terms(self.iter().map(|(k, a)| (k, a * c)))
    }

    /// Photon labels seen in the given slot.
    pub fn photons(&self, slot: Slot) -> impl Iterator<Item = PhotonBasis> + '_ {
        self.amps.keys().map(move |k| slot.pick(k))
    }

    /// Applies `op` to the polarization of the photon in `slot`, for every
    /// term whose photon sits on a path in `filter`. Other terms pass through.
    pub fn apply_single_photon_op(
        &self,
        slot: Slot,
        filter: &PathSet,
        op: &SingleQubitOp,
    ) -> TwoPhotonState {
        let mut terms = Vec::with_capacity(self.amps.len() * 2);
        for (key, a) in self.iter() {
            let photon = slot.pick(&key);
            if !filter.contains(photon.path) {
                terms.push((key, a));
                continue;
            }
            for out in Polarization::ALL {
                let c = op.entry(out, photon.pol);
                if c != Complex64::new(0.0, 0.0) {
                    terms.push((slot.replace(key, photon.with_pol(out)), c * a));
                }
            }
        }
        TwoPhotonState::from_terms(terms)
    }

    /// Rewrites labels of the photon in `slot` with `rule`.
    ///
    /// Fails when two distinct terms of this state would land on the same
    /// basis pair.
    pub fn relabel(&self, slot: Slot, rule: &RelabelRule) -> Result<TwoPhotonState> {
        self.map_photons(slot, |b| Ok(rule.apply(b)))
    }

    pub(crate) fn map_photons<F>(&self, slot: Slot, mut f: F) -> Result<TwoPhotonState>
    where
        F: FnMut(PhotonBasis) -> Result<PhotonBasis>,
    {
        let mut out: BTreeMap<Key, (Key, Complex64)> = BTreeMap::new();
        for (key, a) in self.iter() {
            let image = slot.replace(key, f(slot.pick(&key))?);
            if let Some((prev, _)) = out.get(&image) {
                return Err(Error::NonInjectiveRelabel {
                    first: format_key(prev),
                    second: format_key(&key),
                    image: format_key(&image),
                });
            }
            out.insert(image, (key, a));
        }
        Ok(TwoPhotonState {
            amps: out.into_iter().map(|(k, (_, a))| (k, a)).collect(),
        })
    }

    /// Restricts to terms with one photon on a `first` path and the other on
    /// a `second` path, in either slot assignment.
    ///
    /// Returns the branch probability and the renormalized branch state in
    /// mode order: slot `R` holds the photon found on a `first` path, slot
    /// `S` the photon on a `second` path. Terms that match directly are
    /// never swapped.
    pub fn conditional_branch(&self, first: &PathSet, second: &PathSet) -> (f64, TwoPhotonState) {
        let mut probability = 0.0;
        let mut terms = Vec::new();
        for ((r, s), a) in self.iter() {
            if first.contains(r.path) && second.contains(s.path) {
                probability += a.norm_sqr();
                terms.push(((r, s), a));
            } else if first.contains(s.path) && second.contains(r.path) {
                probability += a.norm_sqr();
                terms.push(((s, r), a));
            }
        }
        let branch = TwoPhotonState::from_terms(terms);
        let n = branch.squared_norm();
        if probability == 0.0 || n == 0.0 {
            return (0.0, TwoPhotonState::new());
        }
        (
            probability,
            branch.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)),
        )
    }

    /// `<self|other>`
    pub fn inner(&self, other: &TwoPhotonState) -> Complex64 {
        self.amps
            .iter()
            .filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b))
            .sum()
    }

    /// Overlap fidelity `|<a|b>|^2 / (|a|^2 |b|^2)`; insensitive to global
    /// phase and to overall scale. Zero if either state is empty.
    pub fn fidelity(&self, other: &TwoPhotonState) -> f64 {
        let (na, nb) = (self.squared_norm(), other.squared_norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (self.inner(other).norm_sqr() / (na * nb)).clamp(0.0, 1.0)
    }

    /// Largest componentwise difference against another state.
    pub fn max_abs_diff(&self, other: &TwoPhotonState) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, a) in &self.amps {
            let b = other.amps.get(k).copied().unwrap_or_default();
            worst = worst.max((a - b).norm());
        }
        for (k, b) in &other.amps {
            if !self.amps.contains_key(k) {
                worst = worst.max(b.norm());
            }
        }
        worst
    }

    /// Polarization density matrix of the photon in `slot`, tracing out its
    /// frequency and path labels and the whole other photon. Not normalized.
    pub fn reduced_polarization(&self, slot: Slot) -> PolarizationDensity {
        // Group amplitudes by everything except the kept photon's polarization.
        let mut groups: BTreeMap<(Frequency, PathLabel, PhotonBasis), PolVector> = BTreeMap::new();
        for (key, a) in self.iter() {
            let (kept, other) = match slot {
                Slot::R => (key.0, key.1),
                Slot::S => (key.1, key.0),
            };
            let v = groups
                .entry((kept.freq, kept.path, other))
                .or_insert([Complex64::new(0.0, 0.0); 2]);
            v[kept.pol.index()] += a;
        }
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        for v in groups.values() {
            for i in 0..2 {
                for j in 0..2 {
                    rho[i][j] += v[i] * v[j].conj();
                }
            }
        }
        PolarizationDensity(rho)
    }
}

impl Add for &TwoPhotonState {
    type Output = TwoPhotonState;

    fn add(self, rhs: &TwoPhotonState) -> TwoPhotonState {
        TwoPhotonState::from_terms(self.iter().chain(rhs.iter()))
    }
}

fn format_key(k: &Key) -> String {
    format!("r{} s{}", k.0, k.1)
}
