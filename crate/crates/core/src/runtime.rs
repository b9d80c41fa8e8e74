//! Online pipeline: sample frames in, debounced command decisions out.
//!
//! Every completed window is cleaned, featurized and classified exactly as
//! an offline epoch would be (mean removal and the notch chain start from a
//! zeroed state at the window's first sample), so streaming and offline
//! predictions agree bit for bit regardless of how the stream is chunked.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::TrainedModel;
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_rows, NotchChain, PreprocessConfig};
use crate::signal_io::{ChannelId, Command, Frame};
use crate::wavelet::{extract_features_rows, FeatureSchema, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window_samples: usize,
    pub hop_samples: usize,
    /// Consecutive agreeing windows required before a command is emitted.
    pub debounce_wins: usize,
    /// Emit Stop on its first occurrence, bypassing debounce.
    pub stop_immediate: bool,
    pub artifact_limit_uv: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_samples: 1024,
            hop_samples: 512,
            debounce_wins: 2,
            stop_immediate: true,
            artifact_limit_uv: 100.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_samples == 0 {
            return Err(Error::invalid("window_samples must be >= 1"));
        }
        if self.hop_samples == 0 || self.hop_samples > self.window_samples {
            return Err(Error::invalid(format!(
                "hop_samples must lie in 1..={}, got {}",
                self.window_samples, self.hop_samples
            )));
        }
        if self.debounce_wins == 0 {
            return Err(Error::invalid("debounce_wins must be >= 1"));
        }
        if !(self.artifact_limit_uv > 0.0) {
            return Err(Error::invalid("artifact_limit_uv must be > 0"));
        }
        Ok(())
    }
}

/// Outcome of one window. Every window yields one; `suppressed_by_debounce`
/// marks those held back, which carry the raw classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandDecision {
    pub command: Command,
    pub score: f64,
    pub window_index: u64,
    /// Sample clock one past the window's last sample.
    pub t_end: u64,
    pub suppressed_by_debounce: bool,
    pub artifact: bool,
}

impl CommandDecision {
    pub fn emitted(&self) -> bool {
        !self.suppressed_by_debounce
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineStats {
    pub windows_processed: u64,
    pub decisions_emitted: u64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
}

/// Classifier verdict on one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowOutcome {
    Artifact { peak_abs_uv: f64 },
    Predicted { command: Command, score: f64 },
}

/// Clean a window and extract its features. `None` means the window was
/// rejected as an artifact.
pub fn window_features(
    rows: &[Vec<f64>],
    roster: &[ChannelId],
    chain: &NotchChain,
    cfg: &PreprocessConfig,
    schema: &FeatureSchema,
) -> Result<(Option<FeatureVector>, f64)> {
    let (clean, verdict) = preprocess_rows(rows, roster, chain, cfg);
    if let Some(v) = verdict {
        if !v.accepted {
            return Ok((None, v.peak_abs_uv));
        }
    }
    Ok((Some(extract_features_rows(&clean, roster, schema)?), 0.0))
}

/// Stateless per-window path shared by the streaming and offline callers.
#[derive(Debug, Clone)]
pub struct WindowClassifier {
    model: Arc<TrainedModel>,
    schema: FeatureSchema,
    roster: Vec<ChannelId>,
    chain: NotchChain,
    preprocess: PreprocessConfig,
}

impl WindowClassifier {
    pub fn new(
        model: Arc<TrainedModel>,
        roster: &[ChannelId],
        sample_rate: f64,
        artifact_limit_uv: f64,
    ) -> Result<Self> {
        let schema = model
            .schema
            .clone()
            .ok_or_else(|| Error::ModelFormat("model carries no feature schema".into()))?;
        for ch in &schema.channels {
            if !roster.contains(ch) {
                return Err(Error::MissingChannel(ch.label().to_string()));
            }
        }
        let preprocess = PreprocessConfig {
            artifact_limit_uv,
            ..model.preprocess.clone()
        };
        preprocess.validate(sample_rate)?;
        let chain = preprocess.notch_chain(sample_rate)?;
        Ok(Self {
            model,
            schema,
            roster: roster.to_vec(),
            chain,
            preprocess,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn classify(&self, rows: &[Vec<f64>]) -> Result<WindowOutcome> {
        let (features, peak) = window_features(rows, &self.roster, &self.chain, &self.preprocess, &self.schema)?;
        match features {
            None => Ok(WindowOutcome::Artifact { peak_abs_uv: peak }),
            Some(fv) => {
                let (command, score) = self.model.predict(&fv)?;
                Ok(WindowOutcome::Predicted { command, score })
            }
        }
    }
}

/// Offline twin of the pipeline: classifies every window of a continuous
/// recording (channels × T) that the pipeline would complete.
pub fn offline_window_outcomes(
    model: Arc<TrainedModel>,
    roster: &[ChannelId],
    sample_rate: f64,
    rows: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<Vec<(u64, WindowOutcome)>> {
    config.validate()?;
    let wc = WindowClassifier::new(model, roster, sample_rate, config.artifact_limit_uv)?;
    let total = rows.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    let mut end = config.window_samples;
    while end <= total {
        let window: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r[end - config.window_samples..end].to_vec())
            .collect();
        out.push((end as u64, wc.classify(&window)?));
        end += config.hop_samples;
    }
    Ok(out)
}

/// Turns per-window classifier outcomes into decisions.
#[derive(Debug, Clone)]
pub struct Debouncer {
    debounce_wins: usize,
    stop_immediate: bool,
    run: Option<(Command, usize)>,
}

impl Debouncer {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            debounce_wins: config.debounce_wins,
            stop_immediate: config.stop_immediate,
            run: None,
        }
    }

    pub fn reset(&mut self) {
        self.run = None;
    }

    pub fn decide(&mut self, outcome: WindowOutcome, window_index: u64, t_end: u64) -> CommandDecision {
        let base = CommandDecision {
            command: Command::Stop,
            score: 0.0,
            window_index,
            t_end,
            suppressed_by_debounce: false,
            artifact: false,
        };
        match outcome {
            WindowOutcome::Artifact { .. } => {
                self.run = None;
                CommandDecision { artifact: true, ..base }
            }
            WindowOutcome::Predicted { command, score } => {
                let count = match self.run {
                    Some((c, n)) if c == command => n + 1,
                    _ => 1,
                };
                self.run = Some((command, count));
                let immediate = command == Command::Stop && self.stop_immediate;
                CommandDecision {
                    command,
                    score,
                    suppressed_by_debounce: !immediate && count < self.debounce_wins,
                    ..base
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    classifier: WindowClassifier,
    config: PipelineConfig,
    buffer: Vec<VecDeque<f64>>,
    clock: u64,
    next_boundary: u64,
    window_index: u64,
    debouncer: Debouncer,
    emitted: u64,
    latencies_ms: Vec<f64>,
}

impl Pipeline {
    pub fn new(
        model: Arc<TrainedModel>,
        config: PipelineConfig,
        roster: &[ChannelId],
        sample_rate: f64,
    ) -> Result<Self> {
        config.validate()?;
        let classifier = WindowClassifier::new(model, roster, sample_rate, config.artifact_limit_uv)?;
        let block = 1usize << classifier.schema.levels;
        if !config.window_samples.is_multiple_of(block) {
            return Err(Error::invalid(format!(
                "window_samples {} must be a multiple of {block}",
                config.window_samples
            )));
        }
        Ok(Self {
            buffer: vec![VecDeque::with_capacity(config.window_samples); roster.len()],
            classifier,
            config,
            clock: 0,
            next_boundary: config.window_samples as u64,
            window_index: 0,
            debouncer: Debouncer::new(&config),
            emitted: 0,
            latencies_ms: Vec::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn roster(&self) -> &[ChannelId] {
        &self.classifier.roster
    }

    /// Samples consumed so far.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn reset(&mut self) {
        self.buffer.iter_mut().for_each(VecDeque::clear);
        self.clock = 0;
        self.next_boundary = self.config.window_samples as u64;
        self.window_index = 0;
        self.debouncer.reset();
        self.emitted = 0;
        self.latencies_ms.clear();
    }

    /// Consume a frame; returns one decision per window completed by it.
    pub fn push(&mut self, frame: &Frame) -> Result<Vec<CommandDecision>> {
        if frame.n_channels() != self.buffer.len() {
            return Err(Error::Shape(format!(
                "frame has {} channels, pipeline roster has {}",
                frame.n_channels(),
                self.buffer.len()
            )));
        }
        if frame.samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame sample".into()));
        }
        let m = frame.len();
        let mut decisions = Vec::new();
        let mut pos = 0;
        while pos < m {
            let need = (self.next_boundary - self.clock) as usize;
            let take = need.min(m - pos);
            for (buf, row) in self.buffer.iter_mut().zip(&frame.samples) {
                buf.extend(&row[pos..pos + take]);
                let excess = buf.len().saturating_sub(self.config.window_samples);
                buf.drain(..excess);
            }
            pos += take;
            self.clock += take as u64;
            if self.clock == self.next_boundary {
                decisions.push(self.complete_window()?);
                self.next_boundary += self.config.hop_samples as u64;
            }
        }
        Ok(decisions)
    }

    fn complete_window(&mut self) -> Result<CommandDecision> {
        let started = Instant::now();
        let rows: Vec<Vec<f64>> = self.buffer.iter().map(|b| b.iter().copied().collect()).collect();
        let outcome = self.classifier.classify(&rows)?;
        let decision = self.debouncer.decide(outcome, self.window_index, self.clock);
        self.latencies_ms.push(started.elapsed().as_secs_f64() * 1e3);
        if decision.emitted() {
            self.emitted += 1;
        }
        self.window_index += 1;
        Ok(decision)
    }

    pub fn stats(&self) -> PipelineStats {
        let mut sorted = self.latencies_ms.clone();
        sorted.sort_by(f64::total_cmp);
        PipelineStats {
            windows_processed: self.window_index,
            decisions_emitted: self.emitted,
            latency_p50_ms: nearest_rank(&sorted, 0.50),
            latency_p95_ms: nearest_rank(&sorted, 0.95),
        }
    }

    /// Per-window latencies in milliseconds, in window order.
    pub fn latencies_ms(&self) -> &[f64] {
        &self.latencies_ms
    }
}

/// Nearest-rank percentile of ascending data; 0 when empty.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
