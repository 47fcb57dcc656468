//! Subcommand implementations. Each returns the rendered report and whether
//! its checks passed; the binary maps that onto exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::ce::ce_run;
use super::config::{ConfigError, ScenarioConfig};
use crate::numfmt::sig6;
use crate::phych::{ber_sr_sweep, PhyError, SweepParams, SweepResult};
use crate::protofsm::{
    model_check, shortest_connection, AdversaryAction, CheckConfig, Defenses, Step,
};
use crate::sigchain::width_for_frames;
use crate::sigpca::{analyze, ingest_csv, synthetic_corpus, PcaError, PcaReport, SigRecord};
use crate::timebound::{
    evaluate_detector, labeled_dataset, samples_from_csv, samples_to_csv, train_detector,
    train_test_split, DetectionMetrics, Label, TimingError, TimingSample,
};

/// Relative `--out` paths are resolved against this directory when set.
pub const OUT_DIR_ENV: &str = "CESIG_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BerSweep,
    SrSweep,
    RelaySim,
    Detect,
    FsmCheck,
    Pca,
    CeRun,
}

impl Command {
    pub fn default_format(self) -> Format {
        match self {
            Command::BerSweep | Command::SrSweep | Command::RelaySim => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CommandError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CommandError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub body: String,
    /// False when a check the command performs failed.
    pub passed: bool,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn sweep_params(cfg: &ScenarioConfig, trials: u64) -> SweepParams {
    SweepParams {
        channel: cfg.sweep.channel,
        snrs_db: cfg.sweep.snrs_db.clone(),
        n_frames: cfg.sweep.n_frames,
        codecs: cfg.sweep.codecs.clone(),
        trials,
    }
}

/// Enough signatures per row to simulate `ber_bits_per_point` data bits.
pub fn ber_sweep(cfg: &ScenarioConfig) -> Result<SweepResult, CommandError> {
    let counts = match cfg.sweep.n_frames {
        Some(n) => vec![n],
        None => vec![13, 14, 15],
    };
    let mut bits_per_trial = 0u64;
    for n in counts {
        bits_per_trial += (n * width_for_frames(n).map_err(PhyError::from)?) as u64;
    }
    let trials = cfg.sweep.ber_bits_per_point.div_ceil(bits_per_trial).max(1);
    Ok(ber_sr_sweep(&sweep_params(cfg, trials), cfg.seed)?)
}

pub fn sr_sweep(cfg: &ScenarioConfig) -> Result<SweepResult, CommandError> {
    Ok(ber_sr_sweep(
        &sweep_params(cfg, cfg.sweep.sr_trials),
        cfg.seed,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationSummary {
    pub location: String,
    pub benign_mean_ms: f64,
    pub relayed_mean_ms: f64,
    /// Fraction of gaps under `t_in`.
    pub benign_within_t_in: f64,
    pub relayed_within_t_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaySimReport {
    pub t_in_ms: f64,
    pub locations: Vec<LocationSummary>,
    pub samples: Vec<TimingSample>,
}

fn location_samples(
    cfg: &ScenarioConfig,
    per_class: usize,
    seed: u64,
) -> Result<Vec<TimingSample>, TimingError> {
    let mut all = Vec::new();
    for (i, loc) in cfg.detector.locations.iter().enumerate() {
        all.extend(labeled_dataset(
            &cfg.timing,
            per_class,
            Some(loc),
            seed.wrapping_add(i as u64),
        )?);
    }
    Ok(all)
}

pub fn relay_sim(cfg: &ScenarioConfig) -> Result<RelaySimReport, CommandError> {
    let samples = location_samples(cfg, cfg.relay_samples_per_class, cfg.seed)?;
    let t_in = cfg.timing.t_in_ms;
    let locations = cfg
        .detector
        .locations
        .iter()
        .map(|loc| {
            let stats = |label: Label| {
                let d: Vec<f64> = samples
                    .iter()
                    .filter(|s| s.label == label && s.location_tag.as_deref() == Some(loc))
                    .map(|s| s.duration_ms)
                    .collect();
                let n = d.len().max(1) as f64;
                (
                    d.iter().sum::<f64>() / n,
                    d.iter().filter(|&&x| x < t_in).count() as f64 / n,
                )
            };
            let (bm, bw) = stats(Label::Benign);
            let (rm, rw) = stats(Label::Relayed);
            LocationSummary {
                location: loc.clone(),
                benign_mean_ms: bm,
                relayed_mean_ms: rm,
                benign_within_t_in: bw,
                relayed_within_t_in: rw,
            }
        })
        .collect();
    Ok(RelaySimReport {
        t_in_ms: t_in,
        locations,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectRow {
    pub repeat: usize,
    /// A location tag, or `all` for the pooled test set.
    pub setup: String,
    pub metrics: DetectionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectReport {
    pub rows: Vec<DetectRow>,
    /// Mean pooled metrics over repeats.
    pub mean_accuracy: f64,
    pub mean_f1_score: f64,
    pub mean_tpr: f64,
    pub passed: bool,
}

/// Trains on the pooled training split of every location and evaluates per
/// location and pooled, once per repeat.
pub fn detect(cfg: &ScenarioConfig) -> Result<DetectReport, CommandError> {
    let d = &cfg.detector;
    let loaded = match &d.input_csv {
        Some(path) => {
            let f = std::fs::File::open(path).map_err(|e| CommandError::io(path, e))?;
            Some(samples_from_csv(f)?)
        }
        None => None,
    };
    let mut rows = Vec::new();
    for r in 0..d.repeats {
        let seed = cfg.seed.wrapping_add(r as u64);
        let samples = match &loaded {
            Some(s) => s.clone(),
            None => location_samples(cfg, d.per_class, seed.wrapping_mul(1000))?,
        };
        let (train, test) = train_test_split(&samples, d.test_fraction, seed);
        let detector = train_detector(&train, d.kind, &d.forest, seed)?;
        let mut setups: Vec<Option<String>> = Vec::new();
        for s in &test {
            if !setups.contains(&s.location_tag) {
                setups.push(s.location_tag.clone());
            }
        }
        setups.sort();
        for loc in setups {
            let subset: Vec<TimingSample> = test
                .iter()
                .filter(|s| s.location_tag == loc)
                .cloned()
                .collect();
            rows.push(DetectRow {
                repeat: r,
                setup: loc.unwrap_or_else(|| "untagged".into()),
                metrics: evaluate_detector(&detector, &subset)?,
            });
        }
        rows.push(DetectRow {
            repeat: r,
            setup: "all".into(),
            metrics: evaluate_detector(&detector, &test)?,
        });
    }
    let pooled: Vec<&DetectionMetrics> = rows
        .iter()
        .filter(|r| r.setup == "all")
        .map(|r| &r.metrics)
        .collect();
    let mean = |f: fn(&DetectionMetrics) -> f64| {
        pooled.iter().map(|m| f(m)).sum::<f64>() / pooled.len().max(1) as f64
    };
    let passed = pooled.iter().all(|m| {
        d.min_accuracy.is_none_or(|t| m.accuracy >= t) && d.min_tpr.is_none_or(|t| m.tpr >= t)
    });
    Ok(DetectReport {
        mean_accuracy: mean(|m| m.accuracy),
        mean_f1_score: mean(|m| m.f1),
        mean_tpr: mean(|m| m.tpr),
        rows,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    /// `full`, or `without_<defense>` for necessity checks.
    pub defenses: String,
    pub actions: Vec<&'static str>,
    pub safe: bool,
    pub states_explored: usize,
    pub counterexample: Option<Vec<Step>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FsmReport {
    pub chain_len: u8,
    /// Steps of the shortest honest connection, if any.
    pub benign_steps: Option<usize>,
    pub checks: Vec<CheckRow>,
    pub passed: bool,
}

fn check_row(
    cfg: &ScenarioConfig,
    label: String,
    defenses: Defenses,
    actions: &[AdversaryAction],
) -> CheckRow {
    let v = model_check(&CheckConfig {
        max_depth: cfg.fsm.max_depth,
        chain_len: cfg.fsm.chain_len,
        defenses,
        actions: actions.to_vec(),
    });
    CheckRow {
        defenses: label,
        actions: actions.iter().map(|a| a.name()).collect(),
        safe: v.safe,
        states_explored: v.states_explored,
        counterexample: v.counterexample,
    }
}

/// Checks the configured defenses against each action, each pair and all
/// actions together, then each defense's necessity against all actions.
/// Fails if the configured defenses admit a counterexample or the honest
/// run cannot connect.
pub fn fsm_check(cfg: &ScenarioConfig) -> FsmReport {
    let f = &cfg.fsm;
    let benign = shortest_connection(&CheckConfig {
        max_depth: f.max_depth,
        chain_len: f.chain_len,
        defenses: f.defenses,
        actions: vec![],
    });
    let mut groups: Vec<Vec<AdversaryAction>> = f.actions.iter().map(|&a| vec![a]).collect();
    if f.pairs {
        for (i, &a) in f.actions.iter().enumerate() {
            for &b in &f.actions[i + 1..] {
                groups.push(vec![a, b]);
            }
        }
    }
    if f.actions.len() > 2 {
        groups.push(f.actions.clone());
    }
    let mut checks: Vec<CheckRow> = groups
        .iter()
        .map(|g| check_row(cfg, "full".into(), f.defenses, g))
        .collect();
    let passed = benign.is_some() && checks.iter().all(|c| c.safe);
    if f.necessity {
        for name in Defenses::NAMES {
            let d = Defenses::without(name).expect("known defense");
            checks.push(check_row(cfg, format!("without_{name}"), d, &f.actions));
        }
    }
    FsmReport {
        chain_len: f.chain_len,
        benign_steps: benign.map(|t| t.len()),
        checks,
        passed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaOutput {
    pub report: PcaReport,
    #[serde(skip)]
    pub records: Vec<SigRecord>,
}

pub fn pca(cfg: &ScenarioConfig) -> Result<PcaOutput, CommandError> {
    let p = &cfg.pca;
    let records = match &p.input_csv {
        Some(path) => ingest_csv(path)?,
        None => synthetic_corpus(&p.synth, cfg.seed)?,
    };
    let report = analyze(&records, &p.features, p.k)?;
    Ok(PcaOutput { report, records })
}

fn render_sweep(r: &SweepResult, format: Format) -> String {
    match format {
        Format::Csv => r.to_csv(),
        Format::Json => json(r),
    }
}

pub fn run_command(
    cmd: Command,
    cfg: &ScenarioConfig,
    format: Format,
) -> Result<CommandOutput, CommandError> {
    cfg.validate()?;
    let ok = |body| CommandOutput { body, passed: true };
    Ok(match cmd {
        Command::BerSweep => ok(render_sweep(&ber_sweep(cfg)?, format)),
        Command::SrSweep => ok(render_sweep(&sr_sweep(cfg)?, format)),
        Command::RelaySim => {
            let r = relay_sim(cfg)?;
            ok(match format {
                Format::Csv => samples_to_csv(&r.samples),
                Format::Json => json(&r),
            })
        }
        Command::Detect => {
            let r = detect(cfg)?;
            let body = match format {
                Format::Json => json(&r),
                Format::Csv => csv_table(
                    "repeat,setup,accuracy,f1_score,tpr,tnr,ppv,npv",
                    r.rows.iter().map(|row| {
                        let m = &row.metrics;
                        let mut v = vec![row.repeat.to_string(), row.setup.clone()];
                        v.extend([m.accuracy, m.f1, m.tpr, m.tnr, m.ppv, m.npv].map(sig6));
                        v
                    }),
                ),
            };
            CommandOutput {
                body,
                passed: r.passed,
            }
        }
        Command::FsmCheck => {
            let r = fsm_check(cfg);
            let body = match format {
                Format::Json => json(&r),
                Format::Csv => csv_table(
                    "defenses,actions,safe,trace_len,states_explored",
                    r.checks.iter().map(|c| {
                        vec![
                            c.defenses.clone(),
                            c.actions.join(";"),
                            c.safe.to_string(),
                            c.counterexample.as_ref().map_or(0, Vec::len).to_string(),
                            c.states_explored.to_string(),
                        ]
                    }),
                ),
            };
            CommandOutput {
                body,
                passed: r.passed,
            }
        }
        Command::Pca => {
            let out = pca(cfg)?;
            ok(match format {
                Format::Json => json(&out.report),
                Format::Csv => {
                    let scores = out.report.model.scores(&out.records)?;
                    let k = out.report.model.k;
                    let header = ["ap".to_string(), "frame_class".to_string()]
                        .into_iter()
                        .chain((1..=k).map(|i| format!("pc{i}")))
                        .collect::<Vec<_>>()
                        .join(",");
                    csv_table(
                        &header,
                        out.records.iter().zip(&scores).map(|(r, s)| {
                            let mut v = vec![
                                r.ap.clone().unwrap_or_default(),
                                r.frame_class
                                    .map(|c| c.name().to_string())
                                    .unwrap_or_default(),
                            ];
                            v.extend(s.iter().map(|&x| sig6(x)));
                            v
                        }),
                    )
                }
            })
        }
        Command::CeRun => {
            let r = ce_run(cfg)?;
            let body = match format {
                Format::Json => json(&r),
                Format::Csv => csv_table(
                    "index,attempt,channel,gap_ms,within_t_in,via_adversary,slice_status",
                    r.frames.iter().map(|f| {
                        vec![
                            f.index.to_string(),
                            f.attempt.to_string(),
                            f.channel.to_string(),
                            sig6(f.gap_ms),
                            f.within_t_in.to_string(),
                            f.via_adversary.to_string(),
                            serde_json::to_value(f.slice_status)
                                .ok()
                                .and_then(|v| v.as_str().map(str::to_string))
                                .unwrap_or_default(),
                        ]
                    }),
                ),
            };
            CommandOutput {
                body,
                passed: r.ok(),
            }
        }
    })
}

/// Resolves `out` against [`OUT_DIR_ENV`] when relative.
pub fn resolve_out(out: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if out.is_relative() => Path::new(&dir).join(out),
        _ => out.to_path_buf(),
    }
}

/// Writes `body` to `out` through a temporary file in the same directory, so
/// readers never see a partial report.
pub fn write_output(out: &Path, body: &str) -> Result<PathBuf, CommandError> {
    let path = resolve_out(out);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CommandError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CommandError::io(&dir, e))?;
    tmp.write_all(body.as_bytes())
        .map_err(|e| CommandError::io(&path, e))?;
    tmp.persist(&path)
        .map_err(|e| CommandError::io(&path, e.error))?;
    Ok(path)
}
