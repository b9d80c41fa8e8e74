//! End-to-end operations over sessions: train, evaluate, compare, simulate
//! and bench. The service and CLI are thin wrappers around these.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classify::{
    compare_classifiers, split_stratified, train, ClassifierKind, ClassifierParams, ComparisonReport, ConfusionMatrix,
    TrainedModel,
};
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_rows, PreprocessConfig};
use crate::runtime::{CommandDecision, Pipeline, PipelineConfig, PipelineStats};
use crate::signal_io::{replay_frames, ChannelId, Command, SessionDataset};
use crate::spectral::{select_channels, ChannelRanking, WelchParams};
use crate::vehicle::{decode_command, encode_command, Episode, EpisodeRow, SafetyConfig, VehicleState, WorldSpec};
use crate::wavelet::{extract_features_rows, FeatureMode, FeatureSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub classifier: ClassifierKind,
    pub params: ClassifierParams,
    pub seed: u64,
    pub train_fraction: f64,
    pub n_channels: usize,
    pub feature_mode: FeatureMode,
    pub preprocess: PreprocessConfig,
    pub welch: WelchParams,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            classifier: ClassifierKind::Svm,
            params: ClassifierParams::default(),
            seed: 0,
            train_fraction: 0.8,
            n_channels: 5,
            feature_mode: FeatureMode::Details,
            preprocess: PreprocessConfig::default(),
            welch: WelchParams::default(),
        }
    }
}

/// Cleaned, labeled trials that survived artifact rejection.
#[derive(Debug, Clone)]
pub struct PreparedSession {
    pub cleaned: SessionDataset,
    pub labels: Vec<Command>,
    /// Trial ids dropped as artifacts.
    pub rejected: Vec<u64>,
    /// Unlabeled trials skipped.
    pub unlabeled: usize,
}

/// Clean every labeled trial the same way the runtime cleans a window and
/// drop those that fail the artifact check.
pub fn prepare_session(ds: &SessionDataset, cfg: &PreprocessConfig) -> Result<PreparedSession> {
    cfg.validate(ds.sample_rate())?;
    let chain = cfg.notch_chain(ds.sample_rate())?;
    let mut kept = Vec::new();
    let mut labels = Vec::new();
    let mut rejected = Vec::new();
    let mut unlabeled = 0;
    for t in ds.trials() {
        let Some(label) = t.label() else {
            unlabeled += 1;
            continue;
        };
        let (rows, verdict) = preprocess_rows(t.samples(), ds.channels(), &chain, cfg);
        if verdict.is_some_and(|v| !v.accepted) {
            rejected.push(t.trial_id());
            continue;
        }
        kept.push(t.map_samples(rows)?);
        labels.push(label);
    }
    Ok(PreparedSession {
        cleaned: ds.with_trials(kept)?,
        labels,
        rejected,
        unlabeled,
    })
}

fn features_of(prep: &PreparedSession, idx: &[usize], schema: &FeatureSchema) -> Result<Vec<Vec<f64>>> {
    let roster = prep.cleaned.channels();
    idx.iter()
        .map(|&i| extract_features_rows(prep.cleaned.trials()[i].samples(), roster, schema).map(|f| f.values))
        .collect()
}

/// Split, channel ranking and feature matrices shared by train and compare.
#[derive(Debug, Clone)]
pub struct FeatureSplit {
    pub schema: FeatureSchema,
    pub ranking: ChannelRanking,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<Command>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<Command>,
    pub test_trials: Vec<u64>,
    pub rejected: Vec<u64>,
}

/// Clean, split, rank channels on the training part only and extract
/// features for both parts.
pub fn build_features(ds: &SessionDataset, opts: &TrainOptions) -> Result<FeatureSplit> {
    let prep = prepare_session(ds, &opts.preprocess)?;
    if prep.labels.is_empty() {
        return Err(Error::Empty("no labeled, artifact-free trials".into()));
    }
    let split = split_stratified(&prep.labels, opts.train_fraction, opts.seed)?;
    let train_trials = split.train.iter().map(|&i| prep.cleaned.trials()[i].clone()).collect();
    let ranking = select_channels(&prep.cleaned.with_trials(train_trials)?, opts.n_channels, opts.welch)?;
    let schema = FeatureSchema::new(ranking.selected.clone(), opts.feature_mode);
    Ok(FeatureSplit {
        train_x: features_of(&prep, &split.train, &schema)?,
        train_y: split.train.iter().map(|&i| prep.labels[i]).collect(),
        test_x: features_of(&prep, &split.test, &schema)?,
        test_y: split.test.iter().map(|&i| prep.labels[i]).collect(),
        test_trials: split
            .test
            .iter()
            .map(|&i| prep.cleaned.trials()[i].trial_id())
            .collect(),
        schema,
        ranking,
        rejected: prep.rejected,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub confusion: ConfusionMatrix,
    pub ranking: ChannelRanking,
    pub rejected: Vec<u64>,
}

pub fn train_session(ds: &SessionDataset, opts: &TrainOptions) -> Result<TrainOutcome> {
    let fs = build_features(ds, opts)?;
    let mut model =
        train(opts.classifier, &fs.train_x, &fs.train_y, &opts.params, opts.seed)?.bind_schema(fs.schema.clone())?;
    model.preprocess = opts.preprocess.clone();
    model.train_meta.dataset_fingerprint = ds.fingerprint();
    model.train_meta.train_fraction = opts.train_fraction;
    model.train_meta.test_trials = fs.test_trials.clone();
    model.train_meta.sample_rate = ds.sample_rate();
    let confusion = model.evaluate(&fs.test_x, &fs.test_y)?;
    Ok(TrainOutcome {
        model,
        confusion,
        ranking: fs.ranking,
        rejected: fs.rejected,
    })
}

/// Which trials `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalScope {
    /// The model's held-out trials when the session is the one it was
    /// trained on, otherwise every trial.
    #[default]
    Auto,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub confusion: ConfusionMatrix,
    pub held_out: bool,
    pub rejected: Vec<u64>,
}

pub fn eval_session(model: &TrainedModel, ds: &SessionDataset, scope: EvalScope) -> Result<EvalOutcome> {
    let schema = model
        .schema
        .as_ref()
        .ok_or_else(|| Error::ModelFormat("model carries no feature schema".into()))?;
    if model.train_meta.sample_rate > 0.0 && model.train_meta.sample_rate != ds.sample_rate() {
        return Err(Error::Shape(format!(
            "model was trained at {} Hz but the session is sampled at {} Hz",
            model.train_meta.sample_rate,
            ds.sample_rate()
        )));
    }
    let prep = prepare_session(ds, &model.preprocess)?;
    let held_out = scope == EvalScope::Auto && model.train_meta.dataset_fingerprint == ds.fingerprint();
    let idx: Vec<usize> = (0..prep.labels.len())
        .filter(|&i| {
            !held_out
                || model
                    .train_meta
                    .test_trials
                    .contains(&prep.cleaned.trials()[i].trial_id())
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::Empty("no labeled trials to evaluate".into()));
    }
    let x = features_of(&prep, &idx, schema)?;
    let y: Vec<Command> = idx.iter().map(|&i| prep.labels[i]).collect();
    Ok(EvalOutcome {
        confusion: model.evaluate(&x, &y)?,
        held_out,
        rejected: prep.rejected,
    })
}

pub fn compare_session(ds: &SessionDataset, opts: &TrainOptions) -> Result<ComparisonReport> {
    let fs = build_features(ds, opts)?;
    let (report, _) = compare_classifiers(
        &fs.train_x,
        &fs.train_y,
        &fs.test_x,
        &fs.test_y,
        &opts.params,
        opts.seed,
    )?;
    Ok(report)
}

/// Feed a session through a fresh pipeline in `chunk`-sample frames.
pub fn stream_session(
    model: Arc<TrainedModel>,
    ds: &SessionDataset,
    config: PipelineConfig,
    chunk: usize,
) -> Result<(Vec<CommandDecision>, PipelineStats)> {
    let mut p = Pipeline::new(model, config, ds.channels(), ds.sample_rate())?;
    let mut out = Vec::new();
    for frame in replay_frames(ds, chunk, false)? {
        out.extend(p.push(&frame)?);
    }
    Ok((out, p.stats()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    pub world: WorldSpec,
    pub safety: SafetyConfig,
    pub start: VehicleState,
    /// Integration step in seconds.
    pub dt: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            safety: SafetyConfig::default(),
            start: VehicleState::default(),
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub log: Vec<EpisodeRow>,
    pub decisions: Vec<CommandDecision>,
    pub final_state: VehicleState,
    /// Steps where the gate replaced the requested command.
    pub gated_steps: usize,
}

/// Session → pipeline → wire frames → safety gate → simulator. Each window
/// holds the last emitted command for one hop of simulated time.
pub fn simulate_session(
    model: Arc<TrainedModel>,
    ds: &SessionDataset,
    config: PipelineConfig,
    opts: &SimulationOptions,
) -> Result<SimulationOutcome> {
    if !(opts.dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }
    let mut pipeline = Pipeline::new(model, config, ds.channels(), ds.sample_rate())?;
    let mut episode = Episode::new(opts.world.clone(), opts.safety, opts.start)?;
    let hop_s = config.hop_samples as f64 / ds.sample_rate();
    let steps = (hop_s / opts.dt).round().max(1.0) as usize;
    let dt = hop_s / steps as f64;
    let mut active = Command::Stop;
    let mut seq = 0u8;
    let mut decisions = Vec::new();
    for frame in replay_frames(ds, config.hop_samples, false)? {
        for d in pipeline.push(&frame)? {
            if d.emitted() {
                let wire = encode_command(d.command, seq);
                seq = seq.wrapping_add(1);
                active = decode_command(wire.bytes())?.0;
            }
            decisions.push(d);
            for _ in 0..steps {
                episode.step(active, dt)?;
            }
        }
    }
    let gated_steps = episode.log.iter().filter(|r| r.cmd != r.gated_cmd).count();
    Ok(SimulationOutcome {
        final_state: episode.state,
        log: episode.log,
        decisions,
        gated_steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub stats: PipelineStats,
    pub latencies_ms: Vec<f64>,
    pub channels: Vec<ChannelId>,
}

/// Per-window latency of a pipeline fed the whole session.
pub fn bench_session(model: Arc<TrainedModel>, ds: &SessionDataset, config: PipelineConfig) -> Result<BenchReport> {
    let mut p = Pipeline::new(model, config, ds.channels(), ds.sample_rate())?;
    for frame in replay_frames(ds, config.hop_samples, false)? {
        p.push(&frame)?;
    }
    Ok(BenchReport {
        stats: p.stats(),
        latencies_ms: p.latencies_ms().to_vec(),
        channels: ds.channels().to_vec(),
    })
}
