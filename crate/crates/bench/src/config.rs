//! Scenario configuration (TOML).
//!
//! Every key is optional; omitted keys take the reference defaults. Unknown
//! keys are rejected. Lengths are in metres, times in seconds.

use std::path::Path;

use hydrapf::particle::{LikelihoodSpec, PfConfig, PriorSpec, ProcessNoiseSpec, DEFAULT_OMEGA_REF};
use hydrapf::{chirp, sinusoid, NoiseLevel, Plant, SpecimenKind, SpecimenParams, TimeSeries, TransferSystemParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "kf", alias = "KF")]
    Kalman,
    #[serde(rename = "pf", alias = "PF")]
    Particle,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Kalman => "KF",
            Estimator::Particle => "PF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Chirp,
    Sinusoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub kind: InputKind,
    /// Chirp start frequency (Hz).
    pub f0: f64,
    /// Chirp end frequency (Hz).
    pub f1: f64,
    /// Sinusoid frequency (Hz).
    pub f: f64,
    /// Command amplitude (m).
    pub amplitude: f64,
    pub duration: f64,
    /// Sample rate (Hz).
    pub fs: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { kind: InputKind::Chirp, f0: 0.1, f1: 20.0, f: 1.0, amplitude: 0.0234, duration: 30.0, fs: 1024.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// One level (`"L2"`) or a list (`["L1", "L2", "L3"]`).
    #[serde(with = "level_list")]
    pub level: Vec<NoiseLevel>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { level: vec![NoiseLevel::L2] }
    }
}

mod level_list {
    use hydrapf::NoiseLevel;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }

    pub fn serialize<S: Serializer>(levels: &[NoiseLevel], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(levels.iter().map(|l| l.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<NoiseLevel>, D::Error> {
        let names = match OneOrMany::deserialize(d)? {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        };
        names.iter().map(|s| s.parse().map_err(D::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfSettings {
    pub particles: Vec<usize>,
    /// Displacement-channel process std (m). When absent it is derived per
    /// noise level from the design displacement variance.
    pub sigma_p: Option<f64>,
    /// Bandwidth scale for the derivative-state noise (rad/s).
    pub omega_ref: f64,
}

impl Default for PfSettings {
    fn default() -> Self {
        PfSettings { particles: vec![100, 200, 500], sigma_p: None, omega_ref: DEFAULT_OMEGA_REF }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KfSettings {
    pub q_over_r: f64,
    pub steady_state_gain: bool,
    pub joseph: bool,
}

impl Default for KfSettings {
    fn default() -> Self {
        KfSettings { q_over_r: 0.01, steady_state_gain: false, joseph: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub kn_actual: f64,
    pub kn_nominal: f64,
    pub lambda: f64,
    pub beta1: f64,
    pub a1beta1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Command gain; `a1beta1 / m` when absent.
    pub b: Option<f64>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        let (act, nom) = (SpecimenParams::ACTUAL, SpecimenParams::NOMINAL);
        PlantConfig {
            m: act.m,
            c: act.c,
            k: act.k,
            kn_actual: act.k_n,
            kn_nominal: nom.k_n,
            lambda: act.lambda,
            beta1: TransferSystemParams::BETA1,
            a1beta1: TransferSystemParams::A1BETA1,
            a2: TransferSystemParams::A2,
            a3: TransferSystemParams::A3,
            b: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub realizations: usize,
    pub base_seed: u64,
    /// Write one time-series file per realization.
    pub timeseries: bool,
    /// Integrator substeps per sample for the simulated plants.
    pub substeps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { realizations: 20, base_seed: 0, timeseries: true, substeps: 1 }
    }
}

/// Sinusoid sweep for the nominal-model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub frequencies: Vec<f64>,
    pub amplitude: f64,
    pub duration: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { frequencies: vec![1.0, 8.0, 14.0, 19.0], amplitude: 0.025, duration: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub estimators: Vec<Estimator>,
    pub input: InputConfig,
    pub noise: NoiseConfig,
    pub pf: PfSettings,
    pub kf: KfSettings,
    pub plant: PlantConfig,
    pub run: RunConfig,
    pub compare: CompareConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            estimators: vec![Estimator::Kalman, Estimator::Particle],
            input: InputConfig::default(),
            noise: NoiseConfig::default(),
            pf: PfSettings::default(),
            kf: KfSettings::default(),
            plant: PlantConfig::default(),
            run: RunConfig::default(),
            compare: CompareConfig::default(),
        }
    }
}

/// Parse and validate a TOML document.
pub fn parse_config(document: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(document).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: ScenarioConfig,
}

/// Load a TOML config, or the config echoed in a run manifest (`.json`).
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: ManifestConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        m.config.validate()?;
        Ok(m.config)
    } else {
        parse_config(&text)
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite and >= 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let i = &self.input;
        positive("input.fs", i.fs)?;
        positive("input.duration", i.duration)?;
        positive("input.amplitude", i.amplitude)?;
        match i.kind {
            InputKind::Chirp => {
                non_negative("input.f0", i.f0)?;
                positive("input.f1", i.f1)?;
                if i.f1 <= i.f0 {
                    return Err(invalid("input.f1", "must exceed input.f0"));
                }
                if i.fs <= 2.0 * i.f1 {
                    return Err(invalid("input.fs", "must exceed twice input.f1"));
                }
            }
            InputKind::Sinusoid => {
                positive("input.f", i.f)?;
                if i.fs <= 2.0 * i.f {
                    return Err(invalid("input.fs", "must exceed twice input.f"));
                }
            }
        }
        if self.noise.level.is_empty() {
            return Err(invalid("noise.level", "at least one level is required"));
        }
        if self.pf.particles.is_empty() || self.pf.particles.contains(&0) {
            return Err(invalid("pf.particles", "counts must be >= 1"));
        }
        if let Some(s) = self.pf.sigma_p {
            non_negative("pf.sigma_p", s)?;
        }
        positive("pf.omega_ref", self.pf.omega_ref)?;
        non_negative("kf.q_over_r", self.kf.q_over_r)?;
        let p = &self.plant;
        positive("plant.m", p.m)?;
        non_negative("plant.c", p.c)?;
        non_negative("plant.k", p.k)?;
        if !p.kn_actual.is_finite() {
            return Err(invalid("plant.kn_actual", "must be finite"));
        }
        if !p.kn_nominal.is_finite() {
            return Err(invalid("plant.kn_nominal", "must be finite"));
        }
        positive("plant.lambda", p.lambda)?;
        positive("plant.beta1", p.beta1)?;
        positive("plant.a1beta1", p.a1beta1)?;
        if !p.a2.is_finite() {
            return Err(invalid("plant.a2", "must be finite"));
        }
        positive("plant.a3", p.a3)?;
        if let Some(b) = p.b {
            positive("plant.b", b)?;
        }
        if self.run.realizations == 0 {
            return Err(invalid("run.realizations", "must be >= 1"));
        }
        if self.run.substeps == 0 {
            return Err(invalid("run.substeps", "must be >= 1"));
        }
        if self.compare.frequencies.is_empty() {
            return Err(invalid("compare.frequencies", "at least one frequency is required"));
        }
        for &f in &self.compare.frequencies {
            positive("compare.frequencies", f)?;
            if i.fs <= 2.0 * f {
                return Err(invalid("compare.frequencies", "must be below half of input.fs"));
            }
        }
        positive("compare.amplitude", self.compare.amplitude)?;
        positive("compare.duration", self.compare.duration)?;
        Ok(())
    }

    pub fn specimen_actual(&self) -> SpecimenParams {
        let p = &self.plant;
        SpecimenParams { m: p.m, c: p.c, k: p.k, k_n: p.kn_actual, lambda: p.lambda }
    }

    pub fn specimen_nominal(&self) -> SpecimenParams {
        SpecimenParams { k_n: self.plant.kn_nominal, ..self.specimen_actual() }
    }

    pub fn transfer(&self) -> TransferSystemParams {
        let p = &self.plant;
        TransferSystemParams {
            beta1: p.beta1,
            a1beta1: p.a1beta1,
            a2: p.a2,
            a3: p.a3,
            b: p.b.unwrap_or(p.a1beta1 / p.m),
        }
    }

    pub fn actual_plant(&self) -> Plant {
        Plant { kind: SpecimenKind::Arctan, specimen: self.specimen_actual(), transfer: self.transfer() }
    }

    pub fn nominal_plant(&self) -> Plant {
        Plant { kind: SpecimenKind::AlgebraicSaturation, specimen: self.specimen_nominal(), transfer: self.transfer() }
    }

    /// The configured command signal.
    pub fn input_signal(&self) -> Result<TimeSeries, hydrapf::SignalError> {
        let i = &self.input;
        match i.kind {
            InputKind::Chirp => chirp(i.f0, i.f1, i.amplitude, i.duration, i.fs),
            InputKind::Sinusoid => sinusoid(i.f, i.amplitude, i.duration, i.fs),
        }
    }

    pub fn process_noise(&self, level: NoiseLevel) -> ProcessNoiseSpec {
        let default = ProcessNoiseSpec::for_level(level);
        ProcessNoiseSpec { sigma_p: self.pf.sigma_p.unwrap_or(default.sigma_p), omega_ref: self.pf.omega_ref }
    }

    pub fn pf_config(&self, level: NoiseLevel, particles: usize) -> PfConfig {
        let process = self.process_noise(level);
        let likelihood = LikelihoodSpec::for_level(level);
        PfConfig {
            particles,
            prior: PriorSpec::scaled(likelihood.sigma_d, process.omega_ref),
            process,
            likelihood,
            plant: self.nominal_plant(),
        }
    }

    pub fn has(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    /// Particle counts in ascending order without duplicates.
    pub fn particle_counts(&self) -> Vec<usize> {
        let mut v = self.pf.particles.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.noise.level, vec![NoiseLevel::L2]);
        assert_eq!(cfg.pf.particles, vec![100, 200, 500]);
        assert_eq!(cfg.run.realizations, 20);
        assert_eq!(cfg.input.kind, InputKind::Chirp);
        assert_eq!(cfg.estimators, vec![Estimator::Kalman, Estimator::Particle]);
        assert_eq!(cfg.transfer(), TransferSystemParams::default());
    }

    #[test]
    fn override_changes_only_that_key() {
        let cfg = parse_config("[pf]\nparticles = [50]\n").unwrap();
        let mut expected = ScenarioConfig::default();
        expected.pf.particles = vec![50];
        assert_eq!(cfg, expected);
    }

    #[test]
    fn errors_name_the_key() {
        let err = parse_config("[run]\nrealizations = 0\n").unwrap_err().to_string();
        assert!(err.contains("realizations"), "{err}");
        let err = parse_config("[run]\nrealisations = 3\n").unwrap_err().to_string();
        assert!(err.contains("realisations"), "{err}");
        let err = parse_config("[pf]\nparticles = \"many\"\n").unwrap_err().to_string();
        assert!(err.contains("particles"), "{err}");
        let err = parse_config("[input]\nkind = \"chirp\"\nf1 = 600.0\n").unwrap_err().to_string();
        assert!(err.contains("input.fs"), "{err}");
        assert!(parse_config("bogus = 1\n").is_err());
    }

    #[test]
    fn noise_level_one_or_many() {
        let one = parse_config("[noise]\nlevel = \"L3\"\n").unwrap();
        assert_eq!(one.noise.level, vec![NoiseLevel::L3]);
        let many = parse_config("[noise]\nlevel = [\"L1\", \"L2\", \"L3\"]\n").unwrap();
        assert_eq!(many.noise.level, NoiseLevel::ALL.to_vec());
        assert!(parse_config("[noise]\nlevel = \"L9\"\n").is_err());
    }

    #[test]
    fn estimator_names() {
        let cfg = parse_config("estimators = [\"KF\"]\n").unwrap();
        assert_eq!(cfg.estimators, vec![Estimator::Kalman]);
        let cfg = parse_config("estimators = [\"pf\"]\n").unwrap();
        assert_eq!(cfg.estimators, vec![Estimator::Particle]);
    }

    #[test]
    fn json_echo_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.pf.sigma_p = Some(1.5e-5);
        cfg.noise.level = vec![NoiseLevel::Off, NoiseLevel::L3];
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
