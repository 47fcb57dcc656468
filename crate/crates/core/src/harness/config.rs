//! JSON scenario configuration. Every field has a default, so `{}` is a
//! valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecKind;
use crate::phych::ChannelKind;
use crate::protofsm::{AdversaryAction, Defenses};
use crate::sigpca::{Feature, SynthParams};
use crate::timebound::{DetectorKind, ForestParams, TimingParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {field}: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("config field {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConstants {
    pub sign_ms: f64,
    pub verify_ms: f64,
    pub extract_per_slice_ms: f64,
    pub base_ce_ms: f64,
    /// Standard deviation of the base CE time; 0 keeps it constant.
    pub base_ce_sd_ms: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            sign_ms: 0.65,
            verify_ms: 5.63,
            extract_per_slice_ms: 0.02,
            base_ce_ms: 300.0,
            base_ce_sd_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    /// `None` is a noiseless channel.
    pub snr_db: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            kind: ChannelKind::Awgn,
            snr_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub action: AdversaryAction,
    /// Time the adversary spends altering a frame, ms.
    pub t_alter_ms: f64,
    pub d_a1_m: Option<f64>,
    pub d_a2_m: Option<f64>,
    /// Chain position after which channel-switch attacks fire.
    pub switch_after: usize,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            action: AdversaryAction::SpoofElementKeepPreamble,
            t_alter_ms: 5.0,
            d_a1_m: None,
            d_a2_m: None,
            switch_after: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub channel: ChannelKind,
    pub snrs_db: Vec<f64>,
    /// `None` averages over 13, 14 and 15 frames.
    pub n_frames: Option<usize>,
    pub codecs: Vec<CodecKind>,
    /// Data bits simulated per point by `ber-sweep`.
    pub ber_bits_per_point: u64,
    /// Signatures per frame count and point for `sr-sweep`.
    pub sr_trials: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            channel: ChannelKind::Awgn,
            snrs_db: vec![0.0, 3.0, 6.0, 9.0, 12.0, 15.0],
            n_frames: None,
            codecs: vec![CodecKind::Identity, CodecKind::HammingSecded],
            ber_bits_per_point: 1_000_000,
            sr_trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub forest: ForestParams,
    /// Samples per class and location.
    pub per_class: usize,
    pub locations: Vec<String>,
    pub test_fraction: f64,
    /// Independent repetitions; seed `i` is `seed + i`.
    pub repeats: usize,
    /// Labeled samples to use instead of synthetic ones.
    pub input_csv: Option<PathBuf>,
    pub min_accuracy: Option<f64>,
    pub min_tpr: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            kind: DetectorKind::Forest,
            forest: ForestParams::default(),
            per_class: 500,
            locations: vec!["D1".into(), "D2".into(), "D3".into()],
            test_fraction: 0.3,
            repeats: 3,
            input_csv: None,
            min_accuracy: None,
            min_tpr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmConfig {
    pub max_depth: usize,
    pub chain_len: u8,
    pub defenses: Defenses,
    pub actions: Vec<AdversaryAction>,
    /// Also check every pair of actions.
    pub pairs: bool,
    /// Also check each defense's necessity.
    pub necessity: bool,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            max_depth: 40,
            chain_len: 13,
            defenses: Defenses::all(),
            actions: AdversaryAction::ALL.to_vec(),
            pairs: true,
            necessity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub features: Vec<Feature>,
    pub k: usize,
    pub synth: SynthParams,
    pub input_csv: Option<PathBuf>,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            features: Feature::ALL.to_vec(),
            k: 2,
            synth: SynthParams::default(),
            input_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_frames: usize,
    pub codec: CodecKind,
    pub channel: ChannelConfig,
    pub timing: TimingParams,
    pub adversary: Option<AdversaryConfig>,
    pub costs: CostConstants,
    /// Spread the signature over one more frame than `n_frames`.
    pub extra_eap_frames: bool,
    /// Benign channel switch after this chain position.
    pub switch_after: Option<usize>,
    pub ap_channel: u8,
    pub switch_channel: u8,
    pub utc_seconds: u64,
    pub relay_samples_per_class: usize,
    pub sweep: SweepConfig,
    pub detector: DetectorConfig,
    pub fsm: FsmConfig,
    pub pca: PcaConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            n_frames: 13,
            codec: CodecKind::Identity,
            channel: ChannelConfig::default(),
            timing: TimingParams::default(),
            adversary: None,
            costs: CostConstants::default(),
            extra_eap_frames: false,
            switch_after: None,
            ap_channel: 6,
            switch_channel: 11,
            utc_seconds: 1_700_000_000,
            relay_samples_per_class: 200,
            sweep: SweepConfig::default(),
            detector: DetectorConfig::default(),
            fsm: FsmConfig::default(),
            pca: PcaConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Total frames carrying slices.
    pub fn effective_frames(&self) -> usize {
        self.n_frames + self.extra_eap_frames as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(13..=15).contains(&self.n_frames) {
            return Err(invalid(
                "n_frames",
                format!("must be 13, 14 or 15, got {}", self.n_frames),
            ));
        }
        let c = &self.costs;
        for (field, v) in [
            ("costs.sign_ms", c.sign_ms),
            ("costs.verify_ms", c.verify_ms),
            ("costs.extract_per_slice_ms", c.extract_per_slice_ms),
            ("costs.base_ce_ms", c.base_ce_ms),
            ("costs.base_ce_sd_ms", c.base_ce_sd_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(
                    field,
                    format!("must be a finite value >= 0, got {v}"),
                ));
            }
        }
        if let Some(snr) = self.channel.snr_db {
            if !snr.is_finite() {
                return Err(invalid("channel.snr_db", "must be finite"));
            }
        }
        self.timing
            .validate()
            .map_err(|e| invalid("timing", e.to_string()))?;
        if let Some(a) = &self.adversary {
            if !(a.t_alter_ms.is_finite() && a.t_alter_ms >= 0.0) {
                return Err(invalid("adversary.t_alter_ms", "must be >= 0"));
            }
            let n = self.effective_frames();
            if a.switch_after == 0 || a.switch_after >= n {
                return Err(invalid(
                    "adversary.switch_after",
                    format!("must be in 1..{n}"),
                ));
            }
            let mut t = self.timing.clone();
            t.d_a1_m = a.d_a1_m.unwrap_or(t.d_a1_m);
            t.d_a2_m = a.d_a2_m.unwrap_or(t.d_a2_m);
            t.validate()
                .map_err(|e| invalid("adversary", e.to_string()))?;
        }
        if let Some(s) = self.switch_after {
            if s == 0 || s >= self.effective_frames() {
                return Err(invalid(
                    "switch_after",
                    format!("must be in 1..{}", self.effective_frames()),
                ));
            }
        }
        if self.ap_channel == self.switch_channel {
            return Err(invalid("switch_channel", "must differ from ap_channel"));
        }
        if self.sweep.snrs_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("sweep.snrs_db", "must be finite"));
        }
        if let Some(n) = self.sweep.n_frames {
            if !(13..=15).contains(&n) {
                return Err(invalid("sweep.n_frames", "must be 13, 14 or 15"));
            }
        }
        if self.sweep.sr_trials == 0 || self.sweep.ber_bits_per_point == 0 {
            return Err(invalid("sweep", "trial counts must be positive"));
        }
        let d = &self.detector;
        if d.per_class < 2 {
            return Err(invalid("detector.per_class", "must be at least 2"));
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(invalid("detector.test_fraction", "must be in (0, 1)"));
        }
        if d.repeats == 0 {
            return Err(invalid("detector.repeats", "must be at least 1"));
        }
        if d.forest.n_trees == 0 || d.forest.max_depth == 0 {
            return Err(invalid(
                "detector.forest",
                "n_trees and max_depth must be positive",
            ));
        }
        if self.fsm.max_depth == 0 {
            return Err(invalid("fsm.max_depth", "must be at least 1"));
        }
        if !(2..=15).contains(&self.fsm.chain_len) {
            return Err(invalid("fsm.chain_len", "must be in 2..=15"));
        }
        let p = &self.pca;
        if p.features.is_empty() || p.k == 0 || p.k > p.features.len() {
            return Err(invalid(
                "pca.k",
                format!("must be in 1..={}", p.features.len()),
            ));
        }
        if self.relay_samples_per_class == 0 {
            return Err(invalid("relay_samples_per_class", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::from_json(s, Path::new("test.json"))
    }

    #[test]
    fn empty_object_is_default() {
        assert_eq!(parse("{}").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn default_round_trips_through_json() {
        let json = serde_json::to_string(&ScenarioConfig::default()).unwrap();
        assert_eq!(parse(&json).unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn parse_errors_carry_field_paths() {
        let e = parse(r#"{"costs": {"sign_ms": "fast"}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("costs.sign_ms"), "{e}");
        let e = parse(r#"{"fsm": {"depth": 3}}"#).unwrap_err().to_string();
        assert!(e.contains("fsm"), "{e}");
    }

    #[test]
    fn validation_errors_carry_field_paths() {
        let e = parse(r#"{"n_frames": 12}"#).unwrap_err().to_string();
        assert!(e.contains("n_frames"), "{e}");
        let e = parse(r#"{"costs": {"verify_ms": -1}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("costs.verify_ms"), "{e}");
        let e = parse(r#"{"adversary": {"action": "replay_slice_chain", "switch_after": 13}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("adversary.switch_after"), "{e}");
        let e = parse(r#"{"timing": {"d_m": 100}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("timing"), "{e}");
    }

    #[test]
    fn missing_file_names_path() {
        let e = ScenarioConfig::load(Path::new("/nonexistent/cfg.json")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/cfg.json"));
    }
}
