//! Monte Carlo runner, parameter sweeps and report aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elements::NoiseUnitary;
use crate::error::{Error, Result};
use crate::noise::NoiseFamily;
use crate::oracle::{oracle_evolve, DenseState};
use crate::protocol::{evaluate, AcceptanceFilter, Branch, DecoderConfig, InputQubit};

pub const DEFAULT_TRIALS: u64 = 1000;

/// Trials whose sparse and dense evolutions differ by more than this fail.
pub const ORACLE_TOL: f64 = 1e-12;

/// How the report's discard probability should be read.
pub const DISCARD_MODEL: &str = "labeled-photon approximation";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleMember {
    pub weight: f64,
    pub qubit: InputQubit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Pure(InputQubit),
    /// Mixed input as a weighted ensemble of pure states.
    Ensemble(Vec<EnsembleMember>),
}

impl InputSpec {
    pub fn members(&self) -> Vec<EnsembleMember> {
        match self {
            InputSpec::Pure(q) => vec![EnsembleMember {
                weight: 1.0,
                qubit: *q,
            }],
            InputSpec::Ensemble(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "t")]
    T,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::T => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub input: InputSpec,
    pub noise: NoiseFamily,
    pub decoder: DecoderConfig,
    pub filter: AcceptanceFilter,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub oracle_check: bool,
    pub record_trials: bool,
}

impl ExperimentSpec {
    pub fn new(input: InputSpec, noise: NoiseFamily, decoder: DecoderConfig) -> Self {
        ExperimentSpec {
            input,
            noise,
            decoder,
            filter: AcceptanceFilter::default(),
            trials: DEFAULT_TRIALS,
            sweep: None,
            oracle_check: false,
            record_trials: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::param("run.trials", "must be at least 1"));
        }
        if let InputSpec::Ensemble(members) = &self.input {
            if members.is_empty() {
                return Err(Error::param("input.ensemble", "must not be empty"));
            }
            if let Some(m) = members.iter().find(|m| m.weight.is_nan() || m.weight < 0.0) {
                return Err(Error::param(
                    "input.ensemble.weight",
                    format!("must be non-negative (got {})", m.weight),
                ));
            }
            let total: f64 = members.iter().map(|m| m.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::param(
                    "input.ensemble",
                    format!("weights must sum to 1 (got {total})"),
                ));
            }
        }
        self.noise.validate()?;
        self.decoder.validate()?;
        self.filter.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: f64,
}

impl Estimate {
    /// Mean and standard error from per-trial sample variance.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: 0.0,
                standard_error: 0.0,
            };
        }
        let mean = neumaier_sum(xs.iter().copied()) / n as f64;
        let standard_error = if n < 2 {
            0.0
        } else {
            let ss = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        };
        Estimate {
            mean,
            standard_error,
        }
    }
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub branch: Branch,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub index: u64,
    pub noise: NoiseUnitary,
    pub success: f64,
    pub discard: f64,
    pub lost: f64,
    pub fidelity_kept: Option<f64>,
    pub branch_probabilities: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub config: ExperimentSpec,
    pub trials: u64,
    pub success_probability: Estimate,
    /// Absent when no trial kept anything.
    pub mean_fidelity_kept: Option<Estimate>,
    pub branch_probabilities: Vec<BranchRow>,
    pub discard_probability: Estimate,
    pub lost_probability: Estimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_max_deviation: Option<f64>,
    pub discard_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_trial: Option<Vec<TrialRecord>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// One trial: every ensemble member sees the same noise matrix.
pub fn run_trial(spec: &ExperimentSpec, index: u64) -> Result<TrialRecord> {
    let u = spec.noise.sample(index);
    let mut record = TrialRecord {
        index,
        noise: u,
        success: 0.0,
        discard: 0.0,
        lost: 0.0,
        fidelity_kept: None,
        branch_probabilities: [0.0; 4],
        oracle_deviation: spec.oracle_check.then_some(0.0),
    };
    let mut weighted_fidelity = 0.0;
    for m in spec.input.members() {
        let ev = evaluate(&m.qubit, &u, &spec.decoder, &spec.filter)?;
        record.success += m.weight * ev.success;
        record.discard += m.weight * ev.discard;
        record.lost += m.weight * ev.lost;
        weighted_fidelity += m.weight * ev.success * ev.fidelity_kept.unwrap_or(0.0);
        for (acc, p) in record
            .branch_probabilities
            .iter_mut()
            .zip(ev.branch_probabilities)
        {
            *acc += m.weight * p;
        }
        if let Some(dev) = record.oracle_deviation.as_mut() {
            let dense = oracle_evolve(&m.qubit, &u, &spec.decoder);
            let amp_dev = dense.max_abs_diff(&DenseState::from_sparse(&ev.final_state));
            let prob_dev = dense
                .branch_probabilities()
                .iter()
                .zip(ev.branch_probabilities)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            *dev = dev.max(amp_dev).max(prob_dev);
        }
    }
    if record.success > 0.0 {
        record.fidelity_kept = Some(weighted_fidelity / record.success);
    }
    let accounted = record.success + record.discard + record.lost;
    if (accounted - 1.0).abs() > 1e-10 {
        return Err(Error::Invariant {
            name: "kept + discarded + lost = 1".into(),
            observed: format!("{accounted} in trial {index}"),
        });
    }
    Ok(record)
}

/// Runs all trials. `jobs` sets the worker count; it never changes the result.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Report> {
    spec.validate()?;
    let work = || {
        (0..spec.trials)
            .into_par_iter()
            .map(|i| run_trial(spec, i))
            .collect::<Result<Vec<_>>>()
    };
    let records = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::param("jobs", e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    Ok(aggregate(spec, records))
}

fn aggregate(spec: &ExperimentSpec, records: Vec<TrialRecord>) -> Report {
    let column = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let fidelities: Vec<f64> = records.iter().filter_map(|r| r.fidelity_kept).collect();
    let n = records.len() as f64;
    let branch_probabilities = Branch::ALL
        .into_iter()
        .map(|b| BranchRow {
            branch: b,
            probability: neumaier_sum(records.iter().map(|r| r.branch_probabilities[b.index()]))
                / n,
        })
        .collect();
    let oracle_max_deviation = spec.oracle_check.then(|| {
        records
            .iter()
            .filter_map(|r| r.oracle_deviation)
            .fold(0.0, f64::max)
    });
    Report {
        config: spec.clone(),
        trials: spec.trials,
        success_probability: Estimate::from_samples(&column(&|r| r.success)),
        mean_fidelity_kept: (!fidelities.is_empty()).then(|| Estimate::from_samples(&fidelities)),
        branch_probabilities,
        discard_probability: Estimate::from_samples(&column(&|r| r.discard)),
        lost_probability: Estimate::from_samples(&column(&|r| r.lost)),
        oracle_max_deviation,
        discard_model: DISCARD_MODEL.to_string(),
        per_trial: spec.record_trials.then_some(records),
    }
}

/// One report per sweep value, in the order the values are listed.
pub fn sweep(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<(f64, Report)>> {
    let sweep = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::param("run.sweep", "missing"))?;
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
    sweep
        .values
        .iter()
        .map(|&v| {
            let mut point = spec.clone();
            point.sweep = None;
            match sweep.parameter {
                SweepParameter::Eta => point.decoder.eta = v,
                SweepParameter::T => point.decoder.t = v,
            }
            run_experiment(&point, jobs).map(|r| (v, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::DecoderVariant;
    use num_complex::Complex64;

    fn haar_spec(decoder: DecoderConfig, trials: u64) -> ExperimentSpec {
        let q = InputQubit::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        ExperimentSpec {
            trials,
            ..ExperimentSpec::new(InputSpec::Pure(q), NoiseFamily::Haar { seed: 0 }, decoder)
        }
    }

    #[test]
    fn ideal_success_is_half_with_zero_spread() {
        let r = run_experiment(&haar_spec(DecoderConfig::default(), 200), None).unwrap();
        assert!((r.success_probability.mean - 0.5).abs() < 1e-12);
        assert!(r.success_probability.standard_error < 1e-12);
        let f = r.mean_fidelity_kept.unwrap();
        assert!((f.mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overall_sfg_efficiency() {
        let r = run_experiment(&haar_spec(DecoderConfig::dual_fs(0.65), 100), None).unwrap();
        assert!((r.success_probability.mean - 0.21125).abs() < 1e-12);
    }

    #[test]
    fn temporal_with_hwp0_is_one_eighth() {
        let r = run_experiment(&haar_spec(DecoderConfig::temporal(0.5, true), 100), None).unwrap();
        assert!((r.success_probability.mean - 0.125).abs() < 1e-12);
    }

    #[test]
    fn sweeps() {
        let mut spec = haar_spec(DecoderConfig::dual_fs(1.0), 20);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::Eta,
            values: vec![0.0, 0.5, 1.0],
        });
        let rows = sweep(&spec, None).unwrap();
        let got: Vec<f64> = rows
            .iter()
            .map(|(_, r)| r.success_probability.mean)
            .collect();
        for (g, want) in got.iter().zip([0.0, 0.125, 0.5]) {
            assert!((g - want).abs() < 1e-12);
        }
        spec.decoder.variant = DecoderVariant::FrequencySingleFs;
        let rows = sweep(&spec, None).unwrap();
        for ((_, r), want) in rows.iter().zip([0.0, 0.25, 0.5]) {
            assert!((r.success_probability.mean - want).abs() < 1e-12);
        }
        spec.decoder = DecoderConfig::temporal(0.5, true);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::T,
            values: vec![1.0],
        });
        let rows = sweep(&spec, None).unwrap();
        assert!((rows[0].1.success_probability.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_bad_values() {
        let mut spec = haar_spec(DecoderConfig::default(), 5);
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::Eta,
            values: vec![],
        });
        assert!(sweep(&spec, None).is_err());
        spec.sweep = Some(Sweep {
            parameter: SweepParameter::Eta,
            values: vec![0.5, 1.2],
        });
        let err = sweep(&spec, None).unwrap_err();
        assert!(err.to_string().contains("run.sweep.values[1]"));
    }

    #[test]
    fn oracle_deviation_reported() {
        let mut spec = haar_spec(DecoderConfig::single_fs(0.7), 30);
        spec.oracle_check = true;
        let r = run_experiment(&spec, None).unwrap();
        assert!(r.oracle_max_deviation.unwrap() < ORACLE_TOL);
    }

    #[test]
    fn ensemble_is_weighted_sum_of_pure_runs() {
        let a = InputQubit::horizontal();
        let b = InputQubit::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        let decoder = DecoderConfig::temporal(0.5, false);
        let noise = NoiseFamily::Haar { seed: 12 };
        let pure = |q| {
            let mut s = ExperimentSpec::new(InputSpec::Pure(q), noise.clone(), decoder);
            s.trials = 50;
            s.record_trials = true;
            run_experiment(&s, None).unwrap()
        };
        let mut mixed = ExperimentSpec::new(
            InputSpec::Ensemble(vec![
                EnsembleMember {
                    weight: 0.3,
                    qubit: a,
                },
                EnsembleMember {
                    weight: 0.7,
                    qubit: b,
                },
            ]),
            noise.clone(),
            decoder,
        );
        mixed.trials = 50;
        mixed.record_trials = true;
        let (ra, rb, rm) = (pure(a), pure(b), run_experiment(&mixed, None).unwrap());
        let (ta, tb, tm) = (
            ra.per_trial.unwrap(),
            rb.per_trial.unwrap(),
            rm.per_trial.unwrap(),
        );
        for ((x, y), m) in ta.iter().zip(&tb).zip(&tm) {
            assert!((0.3 * x.success + 0.7 * y.success - m.success).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_weights_validated() {
        let q = InputQubit::horizontal();
        let spec = ExperimentSpec::new(
            InputSpec::Ensemble(vec![EnsembleMember {
                weight: 0.5,
                qubit: q,
            }]),
            NoiseFamily::Bitflip,
            DecoderConfig::default(),
        );
        assert!(spec.validate().is_err());
    }

    #[test]
    fn report_json_round_trips() {
        let mut spec = haar_spec(DecoderConfig::dual_fs(0.8), 10);
        spec.record_trials = true;
        spec.oracle_check = true;
        let r = run_experiment(&spec, None).unwrap();
        let text = r.to_json();
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn worker_count_does_not_change_report() {
        let spec = haar_spec(DecoderConfig::dual_fs(0.9), 64);
        let one = run_experiment(&spec, Some(1)).unwrap().to_json();
        let four = run_experiment(&spec, Some(4)).unwrap().to_json();
        assert_eq!(one, four);
    }

    #[test]
    fn compensated_sum() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(neumaier_sum(xs), 1.0);
    }
}
