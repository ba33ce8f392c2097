//! Sweeps over the simulation setups, ℓ calibration and the ℓ table.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{AccuracySpec, EstimatorRate, NestedBp, ProtocolConfig, DEFAULT_N_ALL, DEFAULT_SLOT_WIDTH_BITS};
use crate::energy::EnergyParams;
use crate::error::{invalid, Error, Result};
use crate::exec::{map_replicates, Execution};
use crate::protocol::{self, Deployment, NodeInfo, Scheme};
use crate::rng::{Purpose, RngStream};
use crate::scenario::{self, ScenarioConfig};
use crate::srcm::final_estimate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSelection {
    Trep,
    HsrcM1,
    HsrcM2,
    #[default]
    All,
}

impl SchemeSelection {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeSelection::Trep => vec![Scheme::Trep],
            SchemeSelection::HsrcM1 => vec![Scheme::HsrcM1],
            SchemeSelection::HsrcM2 => vec![Scheme::HsrcM2],
            SchemeSelection::All => Scheme::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "q")]
    Q,
    D,
    T,
    #[serde(rename = "epsilon")]
    Epsilon,
    R,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Q => "q",
            SweepVariable::D => "D",
            SweepVariable::T => "T",
            SweepVariable::Epsilon => "epsilon",
            SweepVariable::R => "R",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

fn default_trials() -> u32 {
    30
}

fn default_n_all() -> u64 {
    DEFAULT_N_ALL
}

fn default_slot_width() -> u32 {
    DEFAULT_SLOT_WIDTH_BITS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySettings {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_n_all")]
    pub n_all: u64,
    #[serde(default = "default_slot_width")]
    pub slot_width_bits: u32,
    /// Fixed ℓ; looked up in the ℓ table when absent.
    #[serde(default)]
    pub ell: Option<u32>,
}

fn default_replicates() -> u32 {
    500
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub scheme: SchemeSelection,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub accuracy: AccuracySettings,
    pub sweep: Sweep,
    #[serde(default)]
    pub estimator_rate: EstimatorRate,
    #[serde(default)]
    pub nested_bp: NestedBp,
    #[serde(default)]
    pub energy: EnergyParams,
    /// Where the CLI writes the rows unless `--out` overrides it.
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.sweep.values.is_empty() {
            return Err(invalid("the sweep needs at least one value"));
        }
        if !self.energy.is_valid() {
            return Err(invalid("energy costs must be finite and non-negative"));
        }
        for &v in &self.sweep.values {
            let (sc, acc) = self.point(v)?;
            sc.validate()?;
            if !(acc.epsilon > 0.0 && acc.epsilon < 1.0) {
                return Err(invalid(format!("epsilon must lie in (0,1), got {}", acc.epsilon)));
            }
        }
        Ok(())
    }

    /// Scenario and accuracy settings at one sweep value.
    pub fn point(&self, value: f64) -> Result<(ScenarioConfig, AccuracySettings)> {
        let mut sc = self.scenario.clone();
        let mut acc = self.accuracy.clone();
        let whole = |what: &str| {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(invalid(format!("{what} sweep values must be non-negative integers, got {value}")))
            }
        };
        match self.sweep.variable {
            SweepVariable::Q => sc.q = value,
            SweepVariable::D => sc.d = whole("D")?,
            SweepVariable::T => sc.types = whole("T")? as usize,
            SweepVariable::Epsilon => {
                acc.epsilon = value;
                if self.sweep.values.len() > 1 {
                    acc.ell = None;
                }
            }
            SweepVariable::R => sc.range = value,
        }
        Ok((sc, acc))
    }

    pub fn protocol_config(&self, acc: &AccuracySettings, table: Option<&EllTable>) -> Result<ProtocolConfig> {
        let ell = match (acc.ell, table) {
            (Some(ell), _) => ell,
            (None, Some(t)) => t.lookup(acc.epsilon, acc.delta, acc.trials)?,
            (None, None) => return Err(Error::MissingEll(acc.epsilon)),
        };
        let accuracy = AccuracySpec::new(acc.epsilon, acc.delta, acc.trials, acc.n_all, ell, acc.slot_width_bits)?;
        Ok(ProtocolConfig {
            accuracy,
            estimator_rate: self.estimator_rate,
            nested_bp: self.nested_bp,
            energy: self.energy.clone(),
        })
    }
}

/// Aggregate of one scheme at one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub scheme: Scheme,
    pub variable: SweepVariable,
    pub value: f64,
    pub ell: u32,
    pub replicates: u32,
    pub mean_slots: f64,
    pub std_error: f64,
    /// 100·(T-Rep − scheme)/T-Rep on mean slots, when T-Rep ran too.
    pub improvement_pct: Option<f64>,
    /// Mean over types of the per-type mean |n̂−n|/n.
    pub mean_rel_error: f64,
    /// Smallest per-type P(|n̂−n| ≤ εn).
    pub hit_rate: f64,
    pub rel_error_by_type: Vec<f64>,
    pub hit_rate_by_type: Vec<f64>,
    pub mean_energy: f64,
}

impl ResultRow {
    pub const CSV_HEADER: [&'static str; 14] = [
        "experiment",
        "scheme",
        "variable",
        "value",
        "ell",
        "replicates",
        "mean_slots",
        "std_error",
        "improvement_pct",
        "mean_rel_error",
        "hit_rate",
        "rel_error_by_type",
        "hit_rate_by_type",
        "mean_energy",
    ];

    /// Fields in [`Self::CSV_HEADER`] order; per-type lists are `;`-separated.
    pub fn csv_record(&self) -> Vec<String> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        vec![
            self.experiment.clone(),
            self.scheme.name().to_string(),
            self.variable.name().to_string(),
            self.value.to_string(),
            self.ell.to_string(),
            self.replicates.to_string(),
            self.mean_slots.to_string(),
            self.std_error.to_string(),
            self.improvement_pct.map(|x| x.to_string()).unwrap_or_default(),
            self.mean_rel_error.to_string(),
            self.hit_rate.to_string(),
            list(&self.rel_error_by_type),
            list(&self.hit_rate_by_type),
            self.mean_energy.to_string(),
        ]
    }
}

/// One scheme's result in one replicate.
#[derive(Clone, Debug)]
struct Sample {
    slots: f64,
    rel_err: Vec<Option<f64>>,
    hit: Vec<bool>,
    energy: f64,
}

fn sample(out: &protocol::ProtocolOutcome, dep: &Deployment, eps: f64, energy: &EnergyParams) -> Sample {
    let mut rel_err = Vec::with_capacity(out.truth.len());
    let mut hit = Vec::with_capacity(out.truth.len());
    for (e, &n) in out.estimates.iter().zip(&out.truth) {
        let err = (e.value - n as f64).abs();
        hit.push(err <= eps * n as f64);
        rel_err.push((n > 0).then(|| err / n as f64));
    }
    Sample {
        slots: out.total_slots as f64,
        rel_err,
        hit,
        energy: out.ledger.mean_energy(&dep.node_types(), energy),
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn protocol_purpose(scheme: Scheme) -> Purpose {
    Purpose::Protocol(match scheme {
        Scheme::Trep => 0,
        Scheme::HsrcM1 => 1,
        Scheme::HsrcM2 => 2,
    })
}

/// Runs every sweep value; rows come back sorted by (scheme, value).
pub fn run_experiment(spec: &ExperimentSpec, table: Option<&EllTable>, exec: Execution) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let schemes = spec.scheme.schemes();
    let mut rows = Vec::new();
    for &value in &spec.sweep.values {
        let (sc, acc) = spec.point(value)?;
        let config = spec.protocol_config(&acc, table)?;
        let per_rep = map_replicates(spec.replicates as u64, exec, |r| -> Result<Vec<Sample>> {
            let mut rng = RngStream::for_replicate(spec.seed, r, Purpose::Scenario).rng();
            let g = scenario::generate(&sc, &mut rng)?;
            schemes
                .iter()
                .map(|&s| {
                    let mut rng = RngStream::for_replicate(spec.seed, r, protocol_purpose(s)).rng();
                    let out = protocol::run(s, &g.deployment, &config, &mut rng)?;
                    Ok(sample(&out, &g.deployment, acc.epsilon, &config.energy))
                })
                .collect()
        });
        let per_rep: Vec<Vec<Sample>> = per_rep.into_iter().collect::<Result<_>>()?;
        let mut point_rows: Vec<ResultRow> = schemes
            .iter()
            .enumerate()
            .map(|(j, &s)| aggregate(spec, s, value, config.accuracy.ell, sc.types, per_rep.iter().map(|v| &v[j])))
            .collect();
        if let Some(base) = point_rows.iter().find(|r| r.scheme == Scheme::Trep).map(|r| r.mean_slots) {
            for r in &mut point_rows {
                r.improvement_pct = Some(100.0 * (base - r.mean_slots) / base);
            }
        }
        rows.extend(point_rows);
    }
    rows.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(a.value.total_cmp(&b.value)));
    Ok(rows)
}

fn aggregate<'a>(
    spec: &ExperimentSpec,
    scheme: Scheme,
    value: f64,
    ell: u32,
    types: usize,
    samples: impl Iterator<Item = &'a Sample>,
) -> ResultRow {
    let samples: Vec<&Sample> = samples.collect();
    let n = samples.len() as f64;
    let slots: Vec<f64> = samples.iter().map(|s| s.slots).collect();
    let (mean_slots, std_error) = mean_and_se(&slots);
    let rel_error_by_type: Vec<f64> = (0..types)
        .map(|b| {
            let errs: Vec<f64> = samples.iter().filter_map(|s| s.rel_err[b]).collect();
            if errs.is_empty() {
                f64::NAN
            } else {
                errs.iter().sum::<f64>() / errs.len() as f64
            }
        })
        .collect();
    let hit_rate_by_type: Vec<f64> = (0..types)
        .map(|b| samples.iter().filter(|s| s.hit[b]).count() as f64 / n)
        .collect();
    let finite: Vec<f64> = rel_error_by_type.iter().copied().filter(|x| x.is_finite()).collect();
    ResultRow {
        experiment: spec.name.clone(),
        scheme,
        variable: spec.sweep.variable,
        value,
        ell,
        replicates: spec.replicates,
        mean_slots,
        std_error,
        improvement_pct: None,
        mean_rel_error: if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        },
        hit_rate: hit_rate_by_type.iter().copied().fold(1.0, f64::min),
        rel_error_by_type,
        hit_rate_by_type,
        mean_energy: samples.iter().map(|s| s.energy).sum::<f64>() / n,
    }
}

/// Mean over sweep values of a scheme's improvement on T-Rep.
pub fn mean_improvement(rows: &[ResultRow], scheme: Scheme) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.scheme == scheme)
        .filter_map(|r| r.improvement_pct)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub const ELL_TABLE_VERSION: u32 = 1;

/// What a calibration run measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationTarget {
    /// SRC_M at a single stop, phase 1 included, for every n of the range.
    #[default]
    EndToEnd,
    /// The phase-2 frame alone with exactly ⌈1.6ℓ⌉ transmitters, the load
    /// the protocol aims for; the n range is not used.
    DesignLoad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllEntry {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u32,
    pub ell: u32,
    #[serde(default)]
    pub target: CalibrationTarget,
    /// Populations the entry was calibrated on and the hit rate reached at each.
    pub n_values: Vec<u32>,
    pub hit_rates: Vec<f64>,
    pub replicates: u32,
    pub seed: u64,
}

/// Versioned {ε → ℓ} lookup table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllTable {
    pub version: u32,
    #[serde(default)]
    pub entries: Vec<EllEntry>,
}

impl Default for EllTable {
    fn default() -> Self {
        EllTable {
            version: ELL_TABLE_VERSION,
            entries: Vec::new(),
        }
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl EllTable {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let t: EllTable = toml::from_str(s)?;
        if t.version != ELL_TABLE_VERSION {
            return Err(invalid(format!(
                "ell table version {} is not supported (expected {ELL_TABLE_VERSION})",
                t.version
            )));
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(format!("cannot serialize ell table: {e}")))
    }

    pub fn lookup(&self, epsilon: f64, delta: f64, trials: u32) -> Result<u32> {
        self.entries
            .iter()
            .find(|e| same(e.epsilon, epsilon) && same(e.delta, delta) && e.trials == trials)
            .map(|e| e.ell)
            .ok_or(Error::MissingEll(epsilon))
    }

    /// Adds `entry`, replacing one with the same (ε, δ, W).
    pub fn insert(&mut self, entry: EllEntry) {
        self.entries
            .retain(|e| !(same(e.epsilon, entry.epsilon) && same(e.delta, entry.delta) && e.trials == entry.trials));
        self.entries.push(entry);
        self.entries
            .sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon).then(a.delta.total_cmp(&b.delta)));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u32,
    pub n_values: Vec<u32>,
    pub replicates: u32,
    /// Largest ℓ the doubling scan tries.
    pub max_ell: u32,
    pub seed: u64,
    pub n_all: u64,
    pub estimator_rate: EstimatorRate,
    pub target: CalibrationTarget,
}

impl CalibrationSpec {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        CalibrationSpec {
            epsilon,
            delta,
            trials: 30,
            n_values: vec![100, 200, 500, 1000, 2000, 5000],
            replicates: 500,
            max_ell: 1 << 16,
            seed: 1,
            n_all: DEFAULT_N_ALL,
            estimator_rate: EstimatorRate::default(),
            target: CalibrationTarget::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(invalid("calibration needs positive populations"));
        }
        if self.replicates == 0 || self.max_ell == 0 {
            return Err(invalid("replicates and max_ell must be positive"));
        }
        AccuracySpec::new(self.epsilon, self.delta, self.trials, self.n_all, 1, DEFAULT_SLOT_WIDTH_BITS)?;
        Ok(())
    }
}

/// Single-stop, single-type deployment of `n` active nodes.
fn homogeneous(n: u32) -> Deployment {
    Deployment {
        types: 1,
        nodes: vec![
            NodeInfo {
                type_index: 0,
                active: true
            };
            n as usize
        ],
        stops: vec![(0..n).collect()],
    }
}

/// Empirical P(|n̂−n| ≤ εn) with `ell` blocks: one rate per n of `spec`, or
/// a single rate for [`CalibrationTarget::DesignLoad`].
pub fn calibration_hit_rates(spec: &CalibrationSpec, ell: u32, exec: Execution) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.target == CalibrationTarget::DesignLoad {
        return Ok(vec![design_load_hit_rate(spec, ell, exec)]);
    }
    let acc = AccuracySpec::new(spec.epsilon, spec.delta, spec.trials, spec.n_all, ell, DEFAULT_SLOT_WIDTH_BITS)?;
    let mut config = ProtocolConfig::new(acc);
    config.estimator_rate = spec.estimator_rate;
    spec.n_values
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let dep = homogeneous(n);
            let hits = map_replicates(spec.replicates as u64, exec, |r| -> Result<bool> {
                let mut rng = RngStream::for_replicate(spec.seed, r, Purpose::Calibration(j as u32)).rng();
                let out = protocol::run(Scheme::Trep, &dep, &config, &mut rng)?;
                Ok((out.estimates[0].value - n as f64).abs() <= spec.epsilon * n as f64)
            });
            let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
            Ok(hits.iter().filter(|&&h| h).count() as f64 / spec.replicates as f64)
        })
        .collect()
}

fn design_load_hit_rate(spec: &CalibrationSpec, ell: u32, exec: Execution) -> f64 {
    let x = (1.6 * ell as f64).ceil() as u32;
    let hits = map_replicates(spec.replicates as u64, exec, |r| {
        let mut rng = RngStream::for_replicate(spec.seed, r, Purpose::Calibration(0)).rng();
        let mut used = vec![false; ell as usize];
        for _ in 0..x {
            used[rng.random_range(0..ell) as usize] = true;
        }
        let z = used.iter().filter(|&&u| !u).count() as u32;
        let est = final_estimate(z, ell, 1.0).value;
        (est - x as f64).abs() <= spec.epsilon * x as f64
    });
    hits.iter().filter(|&&h| h).count() as f64 / spec.replicates as f64
}

/// Smallest ℓ whose hit rate reaches 1−δ at every n: doubling from 1, then
/// bisection between the last failure and the first success.
pub fn calibrate_ell(spec: &CalibrationSpec, exec: Execution) -> Result<EllEntry> {
    spec.validate()?;
    let target = 1.0 - spec.delta;
    let passes = |rates: &[f64]| rates.iter().all(|&h| h >= target);
    let mut lo = 0u32;
    let mut hi = 1u32;
    let mut rates = calibration_hit_rates(spec, hi, exec)?;
    while !passes(&rates) {
        if hi >= spec.max_ell {
            let (worst, rate) = rates
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, &h)| (spec.n_values.get(j).copied().unwrap_or(0), h))
                .expect("n_values is not empty");
            return Err(Error::Unachievable {
                max_ell: spec.max_ell,
                worst_n: worst,
                hit_rate: rate,
            });
        }
        lo = hi;
        hi = (hi * 2).min(spec.max_ell);
        rates = calibration_hit_rates(spec, hi, exec)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = calibration_hit_rates(spec, mid, exec)?;
        if passes(&r) {
            hi = mid;
            rates = r;
        } else {
            lo = mid;
        }
    }
    Ok(EllEntry {
        epsilon: spec.epsilon,
        delta: spec.delta,
        trials: spec.trials,
        ell: hi,
        target: spec.target,
        n_values: match spec.target {
            CalibrationTarget::EndToEnd => spec.n_values.clone(),
            CalibrationTarget::DesignLoad => Vec::new(),
        },
        hit_rates: rates,
        replicates: spec.replicates,
        seed: spec.seed,
    })
}
