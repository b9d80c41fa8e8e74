//! JSON bodies of the HTTP interface. Sessions travel as session-CSV text
//! and models as model-file text, so every artifact a response carries can
//! be written to disk verbatim.

use serde::{Deserialize, Serialize};

use eegchair_core::classify::ComparisonReport;
use eegchair_core::runtime::{CommandDecision, PipelineConfig, PipelineStats};
use eegchair_core::signal_io::{ChannelId, Command, SynthSpec, DEFAULT_SAMPLE_RATE};
use eegchair_core::vehicle::VehicleState;
use eegchair_core::workflow::{EvalScope, SimulationOptions, TrainOptions};
use eegchair_core::ErrorClass;

pub const HEALTH: &str = "/healthz";
pub const SYNTH: &str = "/v1/synth";
pub const TRAIN: &str = "/v1/train";
pub const EVAL: &str = "/v1/eval";
pub const COMPARE: &str = "/v1/compare";
pub const STREAMS: &str = "/v1/streams";
pub const SIMULATE: &str = "/v1/simulate";
pub const BENCH: &str = "/v1/bench";
pub const WIRE_ENCODE: &str = "/v1/wire/encode";
pub const WIRE_DECODE: &str = "/v1/wire/decode";

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: ErrorClass,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// A session in session-CSV form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionText {
    pub csv: String,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub spec: SynthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResponse {
    pub csv: String,
    pub trials: usize,
    pub fingerprint: String,
}

/// Confusion matrix rendered three ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall_accuracy: f64,
    pub table: String,
    pub csv: String,
    pub matrix_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    pub session: SessionText,
    pub options: TrainOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model: String,
    pub report: AccuracyReport,
    pub selected_channels: Vec<ChannelId>,
    pub rejected_trials: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub model: String,
    pub session: SessionText,
    #[serde(default)]
    pub scope: EvalScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub report: AccuracyReport,
    pub held_out: bool,
    pub rejected_trials: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub session: SessionText,
    pub options: TrainOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub report: ComparisonReport,
    pub text: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenStreamRequest {
    pub model: String,
    #[serde(default)]
    pub config: PipelineConfig,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    /// Row order of submitted frames; the full roster when absent.
    #[serde(default)]
    pub channels: Option<Vec<ChannelId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenStreamResponse {
    pub id: u64,
}

/// Channels × samples, rows in roster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRequest {
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResponse {
    pub decisions: Vec<CommandDecision>,
}

pub type StreamStats = PipelineStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub model: String,
    pub session: SessionText,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub simulation: SimulationOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    /// Episode log CSV.
    pub log: String,
    pub decisions: Vec<CommandDecision>,
    pub final_state: VehicleState,
    pub gated_steps: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRequest {
    pub model: String,
    pub session: SessionText,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResponse {
    pub stats: PipelineStats,
    pub latencies_ms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireEncodeRequest {
    pub command: Command,
    pub seq: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFrameHex {
    /// Frame bytes as lowercase hex without separators.
    pub hex: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireDecodeResponse {
    pub command: Command,
    pub seq: u8,
}

/// One line of `stream` output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub win: u64,
    pub cmd: Command,
    pub score: f64,
    pub t_end: u64,
}

impl From<&CommandDecision> for DecisionLine {
    fn from(d: &CommandDecision) -> Self {
        Self {
            win: d.window_index,
            cmd: d.command,
            score: d.score,
            t_end: d.t_end,
        }
    }
}
