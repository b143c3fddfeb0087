//! Experiment config files.
//!
//! A config is a single JSON document with four sections:
//!
//! ```json
//! {
//!   "input":   { "alpha_re": 0.6, "alpha_im": 0.0, "beta_re": 0.0, "beta_im": 0.8 },
//!   "noise":   { "kind": "haar", "seed": 7 },
//!   "decoder": { "variant": "frequency_dual_fs", "eta": 1.0 },
//!   "run":     { "trials": 1000, "oracle_check": true, "output": "report.json" }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere. Parse errors carry a line and
//! column; semantic errors carry the dotted path of the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::elements::{NoiseUnitary, XOutcome, DEFAULT_ERASER_TRANSMISSION};
use crate::error::Error;
use crate::harness::{EnsembleMember, ExperimentSpec, InputSpec, Sweep, DEFAULT_TRIALS};
use crate::noise::NoiseFamily;
use crate::protocol::{AcceptanceFilter, Branch, DecoderConfig, DecoderVariant, InputQubit};
use crate::serde_complex::ReIm;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: InputSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub decoder: DecoderSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub alpha_re: Option<f64>,
    pub alpha_im: Option<f64>,
    pub beta_re: Option<f64>,
    pub beta_im: Option<f64>,
    pub ensemble: Option<Vec<EnsembleEntry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleEntry {
    pub weight: f64,
    #[serde(default)]
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
    #[serde(default)]
    pub beta_re: f64,
    #[serde(default)]
    pub beta_im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Haar,
    Dephasing,
    Rotation,
    Bitflip,
    Fixed,
}

impl NoiseKind {
    fn name(self) -> &'static str {
        match self {
            NoiseKind::Haar => "haar",
            NoiseKind::Dephasing => "dephasing",
            NoiseKind::Rotation => "rotation",
            NoiseKind::Bitflip => "bitflip",
            NoiseKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    #[serde(default)]
    pub parameters: NoiseParameters,
    pub seed: Option<u64>,
}

/// Angles in radians; matrix entries as `{re, im}` pairs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParameters {
    pub phi: Option<f64>,
    pub theta: Option<f64>,
    pub delta1: Option<ReIm>,
    pub delta2: Option<ReIm>,
    pub eta1: Option<ReIm>,
    pub eta2: Option<ReIm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    #[serde(default = "default_variant")]
    pub variant: DecoderVariant,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "yes")]
    pub with_hwp0: bool,
    #[serde(default = "all_branches")]
    pub branches: Vec<Branch>,
    #[serde(default = "both_outcomes")]
    pub outcomes: Vec<XOutcome>,
}

impl Default for DecoderSection {
    fn default() -> Self {
        DecoderSection {
            variant: default_variant(),
            eta: one(),
            t: default_t(),
            with_hwp0: yes(),
            branches: all_branches(),
            outcomes: both_outcomes(),
        }
    }
}

fn default_variant() -> DecoderVariant {
    DecoderVariant::FrequencyDualFs
}
fn one() -> f64 {
    1.0
}
fn default_t() -> f64 {
    DEFAULT_ERASER_TRANSMISSION
}
fn yes() -> bool {
    true
}
fn all_branches() -> Vec<Branch> {
    Branch::ALL.to_vec()
}
fn both_outcomes() -> Vec<XOutcome> {
    XOutcome::BOTH.to_vec()
}
fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub oracle_check: bool,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub record_trials: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            trials: DEFAULT_TRIALS,
            sweep: None,
            oracle_check: false,
            output: None,
            record_trials: false,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    Invalid {
        path: PathBuf,
        source: Error,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, source } => {
                write!(f, "{}: cannot read config: {source}", path.display())
            }
            ConfigError::Parse { path, source } => write!(
                f,
                "{}:{}:{}: {source}",
                path.display(),
                source.line(),
                source.column()
            ),
            ConfigError::Invalid { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A validated config ready to run.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub spec: ExperimentSpec,
    pub output: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    let file: ConfigFile = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_owned(),
        source,
    })?;
    file.into_loaded().map_err(|source| ConfigError::Invalid {
        path: path.to_owned(),
        source,
    })
}

fn qubit(field: &str, re_a: f64, im_a: f64, re_b: f64, im_b: f64) -> crate::Result<InputQubit> {
    InputQubit::new(Complex64::new(re_a, im_a), Complex64::new(re_b, im_b)).map_err(|e| match e {
        Error::Unnormalized { norm_sqr } => Error::param(
            field,
            format!("|alpha|^2 + |beta|^2 must be 1 (got {norm_sqr})"),
        ),
        other => other,
    })
}

impl InputSection {
    fn to_spec(&self) -> crate::Result<InputSpec> {
        let has_pure = [self.alpha_re, self.alpha_im, self.beta_re, self.beta_im]
            .iter()
            .any(Option::is_some);
        match (&self.ensemble, has_pure) {
            (Some(_), true) => Err(Error::param(
                "input",
                "give either amplitudes or an ensemble, not both",
            )),
            (Some(members), false) => members
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    Ok(EnsembleMember {
                        weight: m.weight,
                        qubit: qubit(
                            &format!("input.ensemble[{i}]"),
                            m.alpha_re,
                            m.alpha_im,
                            m.beta_re,
                            m.beta_im,
                        )?,
                    })
                })
                .collect::<crate::Result<Vec<_>>>()
                .map(InputSpec::Ensemble),
            (None, _) => qubit(
                "input",
                self.alpha_re.unwrap_or(0.0),
                self.alpha_im.unwrap_or(0.0),
                self.beta_re.unwrap_or(0.0),
                self.beta_im.unwrap_or(0.0),
            )
            .map(InputSpec::Pure),
        }
    }
}

impl NoiseSection {
    fn to_family(&self) -> crate::Result<NoiseFamily> {
        let p = &self.parameters;
        let given: Vec<&str> = [
            ("phi", p.phi.is_some()),
            ("theta", p.theta.is_some()),
            ("delta1", p.delta1.is_some()),
            ("delta2", p.delta2.is_some()),
            ("eta1", p.eta1.is_some()),
            ("eta2", p.eta2.is_some()),
        ]
        .into_iter()
        .filter_map(|(n, set)| set.then_some(n))
        .collect();
        let allowed: &[&str] = match self.kind {
            NoiseKind::Haar | NoiseKind::Bitflip => &[],
            NoiseKind::Dephasing => &["phi"],
            NoiseKind::Rotation => &["theta"],
            NoiseKind::Fixed => &["delta1", "delta2", "eta1", "eta2"],
        };
        if let Some(extra) = given.iter().find(|n| !allowed.contains(n)) {
            return Err(Error::param(
                format!("noise.parameters.{extra}"),
                format!("not used by noise kind `{}`", self.kind.name()),
            ));
        }
        if let Some(missing) = allowed.iter().find(|n| !given.contains(n)) {
            return Err(Error::param(
                format!("noise.parameters.{missing}"),
                format!("required by noise kind `{}`", self.kind.name()),
            ));
        }
        if self.seed.is_some() && self.kind != NoiseKind::Haar {
            return Err(Error::param(
                "noise.seed",
                format!("not used by noise kind `{}`", self.kind.name()),
            ));
        }
        let family = match self.kind {
            NoiseKind::Haar => NoiseFamily::Haar {
                seed: self.seed.unwrap_or(0),
            },
            NoiseKind::Dephasing => NoiseFamily::Dephasing {
                phi: p.phi.unwrap_or_default(),
            },
            NoiseKind::Rotation => NoiseFamily::Rotation {
                theta: p.theta.unwrap_or_default(),
            },
            NoiseKind::Bitflip => NoiseFamily::Bitflip,
            NoiseKind::Fixed => {
                let c = |v: Option<ReIm>| v.map(Complex64::from).unwrap_or_default();
                let unitary = NoiseUnitary::new(c(p.delta1), c(p.delta2), c(p.eta1), c(p.eta2))
                    .map_err(|e| match e {
                        Error::NotUnitary { deviation } => Error::param(
                            "noise.parameters",
                            format!("matrix is not unitary (max |U^dagger U - I| = {deviation:e})"),
                        ),
                        other => other,
                    })?;
                NoiseFamily::Fixed { unitary }
            }
        };
        family.validate()?;
        Ok(family)
    }
}

impl ConfigFile {
    pub fn into_loaded(self) -> crate::Result<LoadedConfig> {
        let spec = ExperimentSpec {
            input: self.input.to_spec()?,
            noise: self.noise.to_family()?,
            decoder: DecoderConfig {
                variant: self.decoder.variant,
                eta: self.decoder.eta,
                t: self.decoder.t,
                with_hwp0: self.decoder.with_hwp0,
            },
            filter: AcceptanceFilter {
                branches: self.decoder.branches,
                outcomes: self.decoder.outcomes,
            },
            trials: self.run.trials,
            sweep: self.run.sweep,
            oracle_check: self.run.oracle_check,
            record_trials: self.run.record_trials,
        };
        spec.validate()?;
        if let Some(sweep) = &spec.sweep {
            if sweep.values.is_empty() {
                return Err(Error::param("run.sweep.values", "must not be empty"));
            }
            for (i, v) in sweep.values.iter().enumerate() {
                if !(0.0..=1.0).contains(v) {
                    return Err(Error::param(
                        format!("run.sweep.values[{i}]"),
                        format!("{} must lie in [0, 1] (got {v})", sweep.parameter.name()),
                    ));
                }
            }
        }
        Ok(LoadedConfig {
            spec,
            output: self.run.output,
        })
    }
}

pub fn from_str(text: &str) -> Result<LoadedConfig, ConfigError> {
    let path = PathBuf::from("<config>");
    let file: ConfigFile = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
        path: path.clone(),
        source,
    })?;
    file.into_loaded()
        .map_err(|source| ConfigError::Invalid { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDEAL: &str = r#"{
        "input": {"alpha_re": 0.6, "beta_im": 0.8},
        "noise": {"kind": "haar", "seed": 3},
        "decoder": {"variant": "frequency_dual_fs", "eta": 1.0},
        "run": {"trials": 10}
    }"#;

    fn err(text: &str) -> String {
        from_str(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = from_str(r#"{"input": {"alpha_re": 1}, "noise": {"kind": "haar"}}"#).unwrap();
        assert_eq!(c.spec.trials, DEFAULT_TRIALS);
        assert_eq!(c.spec.noise, NoiseFamily::Haar { seed: 0 });
        assert_eq!(c.spec.decoder, DecoderConfig::default());
        assert_eq!(c.spec.filter, AcceptanceFilter::default());
        assert!(c.output.is_none());
    }

    #[test]
    fn ideal_config_loads() {
        let c = from_str(IDEAL).unwrap();
        assert_eq!(c.spec.trials, 10);
        match c.spec.input {
            InputSpec::Pure(q) => assert_eq!(q.beta(), Complex64::new(0.0, 0.8)),
            _ => panic!("expected pure input"),
        }
    }

    #[test]
    fn eta_out_of_range_names_field() {
        let e = err(&IDEAL.replace("\"eta\": 1.0", "\"eta\": 1.5"));
        assert!(e.contains("decoder.eta"), "{e}");
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = err(&IDEAL.replace("\"trials\"", "\"trails\""));
        assert!(e.contains("unknown field `trails`"), "{e}");
        assert!(e.starts_with("<config>:5:"), "{e}");
    }

    #[test]
    fn parameter_for_wrong_noise_kind_rejected() {
        let e = err(
            r#"{"input": {"alpha_re": 1}, "noise": {"kind": "rotation", "parameters": {"phi": 1}}}"#,
        );
        assert!(e.contains("noise.parameters.phi"), "{e}");
        let e = err(r#"{"input": {"alpha_re": 1}, "noise": {"kind": "rotation"}}"#);
        assert!(e.contains("noise.parameters.theta"), "{e}");
        let e = err(r#"{"input": {"alpha_re": 1}, "noise": {"kind": "bitflip", "seed": 1}}"#);
        assert!(e.contains("noise.seed"), "{e}");
    }

    #[test]
    fn fixed_noise_must_be_unitary() {
        let text = r#"{"input": {"alpha_re": 1}, "noise": {"kind": "fixed", "parameters": {
            "delta1": {"re": 1, "im": 0}, "delta2": {"re": 0, "im": 0},
            "eta1": {"re": 0.5, "im": 0}, "eta2": {"re": 1, "im": 0}}}}"#;
        assert!(err(text).contains("not unitary"));
        let ok = text.replace("\"re\": 0.5", "\"re\": 0");
        assert!(matches!(
            from_str(&ok).unwrap().spec.noise,
            NoiseFamily::Fixed { .. }
        ));
    }

    #[test]
    fn input_must_be_normalized() {
        let e = err(r#"{"input": {"alpha_re": 1, "beta_re": 1}, "noise": {"kind": "haar"}}"#);
        assert!(e.contains("input: |alpha|^2 + |beta|^2 must be 1"), "{e}");
    }

    #[test]
    fn ensemble_input() {
        let c = from_str(
            r#"{"input": {"ensemble": [{"weight": 0.5, "alpha_re": 1}, {"weight": 0.5, "beta_re": 1}]},
                "noise": {"kind": "haar"}}"#,
        )
        .unwrap();
        assert!(matches!(c.spec.input, InputSpec::Ensemble(ref m) if m.len() == 2));
        let e = err(r#"{"input": {"alpha_re": 1, "ensemble": []}, "noise": {"kind": "haar"}}"#);
        assert!(e.contains("not both"), "{e}");
    }

    #[test]
    fn sweep_values_checked() {
        let e = err(&IDEAL.replace(
            "\"trials\": 10",
            "\"trials\": 10, \"sweep\": {\"parameter\": \"eta\", \"values\": []}",
        ));
        assert!(e.contains("run.sweep.values"), "{e}");
        let e = err(&IDEAL.replace(
            "\"trials\": 10",
            "\"trials\": 10, \"sweep\": {\"parameter\": \"t\", \"values\": [0.5, 2]}",
        ));
        assert!(e.contains("run.sweep.values[1]"), "{e}");
    }

    #[test]
    fn filter_in_decoder_section() {
        let c = from_str(
            r#"{"input": {"alpha_re": 1}, "noise": {"kind": "dephasing", "parameters": {"phi": 0.3}},
                "decoder": {"variant": "temporal_eraser", "with_hwp0": false,
                            "branches": ["3x/3y", "4x/4y"], "outcomes": ["+x"]}}"#,
        )
        .unwrap();
        assert_eq!(c.spec.filter, AcceptanceFilter::same_port_plus_x());
        let e = err(
            r#"{"input": {"alpha_re": 1}, "noise": {"kind": "haar"}, "decoder": {"outcomes": ["+y"]}}"#,
        );
        assert!(e.contains("unknown outcome"), "{e}");
    }
}
