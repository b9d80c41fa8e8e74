//! Session and epoch data model, CSV persistence, synthetic EEG generation
//! and timed frame replay.
//!
//! An epoch is a channels × time matrix of microvolt samples. Sessions hold
//! an ordered list of epochs that all share one channel roster and sample
//! rate.

mod csv_io;
mod replay;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_session_csv, read_session_csv, save_session_csv, write_session_csv};
pub use replay::{replay_frames, Frame, FrameReplay};
pub use synth::{generate_synthetic_session, BandSignature, SynthSpec};

/// Default acquisition rate of the headset, in Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 128.0;

/// Default epoch length: 8 s at 128 Hz.
pub const DEFAULT_EPOCH_LEN: usize = 1024;

/// One of the 14 electrode positions of the headset, in roster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ChannelId {
    Af3,
    F7,
    F3,
    Fc5,
    T7,
    P7,
    O1,
    O2,
    P8,
    T8,
    Fc6,
    F4,
    F8,
    Af4,
}

impl ChannelId {
    pub const COUNT: usize = 14;

    pub const ALL: [ChannelId; 14] = [
        ChannelId::Af3,
        ChannelId::F7,
        ChannelId::F3,
        ChannelId::Fc5,
        ChannelId::T7,
        ChannelId::P7,
        ChannelId::O1,
        ChannelId::O2,
        ChannelId::P8,
        ChannelId::T8,
        ChannelId::Fc6,
        ChannelId::F4,
        ChannelId::F8,
        ChannelId::Af4,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ChannelId::Af3 => "AF3",
            ChannelId::F7 => "F7",
            ChannelId::F3 => "F3",
            ChannelId::Fc5 => "FC5",
            ChannelId::T7 => "T7",
            ChannelId::P7 => "P7",
            ChannelId::O1 => "O1",
            ChannelId::O2 => "O2",
            ChannelId::P8 => "P8",
            ChannelId::T8 => "T8",
            ChannelId::Fc6 => "FC6",
            ChannelId::F4 => "F4",
            ChannelId::F8 => "F8",
            ChannelId::Af4 => "AF4",
        }
    }

    /// Position in the fixed roster.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelId::ALL
            .iter()
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

impl TryFrom<String> for ChannelId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelId> for String {
    fn from(c: ChannelId) -> String {
        c.label().to_string()
    }
}

/// The five-way command alphabet. Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Command {
    Left,
    Right,
    Forward,
    Reverse,
    Stop,
}

impl Command {
    pub const COUNT: usize = 5;

    pub const ALL: [Command; 5] = [
        Command::Left,
        Command::Right,
        Command::Forward,
        Command::Reverse,
        Command::Stop,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Command::Left => "LEFT",
            Command::Right => "RIGHT",
            Command::Forward => "FORWARD",
            Command::Reverse => "REVERSE",
            Command::Stop => "STOP",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Command> {
        Command::ALL.get(i).copied()
    }

    pub fn is_movement(self) -> bool {
        self != Command::Stop
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .iter()
            .copied()
            .find(|c| c.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl TryFrom<String> for Command {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Command> for String {
    fn from(c: Command) -> String {
        c.token().to_string()
    }
}

/// One labeled trial: a channels × time matrix of microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegEpoch {
    samples: Vec<Vec<f64>>,
    sample_rate: f64,
    label: Option<Command>,
    trial_id: u64,
}

impl EegEpoch {
    pub fn new(samples: Vec<Vec<f64>>, sample_rate: f64, label: Option<Command>, trial_id: u64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!("sample rate must be > 0, got {sample_rate}")));
        }
        if let Some(first) = samples.first() {
            let len = first.len();
            if let Some((ch, row)) = samples.iter().enumerate().find(|(_, r)| r.len() != len) {
                return Err(Error::Shape(format!(
                    "channel row {ch} has {} samples, expected {len}",
                    row.len()
                )));
            }
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("trial {trial_id}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            label,
            trial_id,
        })
    }

    /// Zero-valued epoch of the given shape.
    pub fn zeros(channels: usize, len: usize, sample_rate: f64) -> Self {
        Self {
            samples: vec![vec![0.0; len]; channels],
            sample_rate,
            label: None,
            trial_id: 0,
        }
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index]
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn label(&self) -> Option<Command> {
        self.label
    }

    pub fn trial_id(&self) -> u64 {
        self.trial_id
    }

    pub fn with_label(mut self, label: Option<Command>) -> Self {
        self.label = label;
        self
    }

    pub fn with_trial_id(mut self, trial_id: u64) -> Self {
        self.trial_id = trial_id;
        self
    }

    /// Same metadata, new sample matrix. The shape is the caller's
    /// responsibility and is checked.
    pub fn map_samples(&self, samples: Vec<Vec<f64>>) -> Result<Self> {
        EegEpoch::new(samples, self.sample_rate, self.label, self.trial_id)
    }
}

/// Ordered collection of epochs sharing one channel roster.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionDataset {
    channels: Vec<ChannelId>,
    trials: Vec<EegEpoch>,
    subject_tag: String,
    seed: Option<u64>,
}

impl SessionDataset {
    pub fn new(
        channels: Vec<ChannelId>,
        trials: Vec<EegEpoch>,
        subject_tag: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].contains(c) {
                return Err(Error::Shape(format!("duplicate channel {c} in roster")));
            }
        }
        if let Some(first) = trials.first() {
            let rate = first.sample_rate();
            for t in &trials {
                if t.n_channels() != channels.len() {
                    return Err(Error::Shape(format!(
                        "trial {} has {} channels, roster has {}",
                        t.trial_id(),
                        t.n_channels(),
                        channels.len()
                    )));
                }
                if t.sample_rate() != rate {
                    return Err(Error::Shape(format!(
                        "trial {} sample rate {} differs from session rate {rate}",
                        t.trial_id(),
                        t.sample_rate()
                    )));
                }
            }
        }
        Ok(Self {
            channels,
            trials,
            subject_tag: subject_tag.into(),
            seed,
        })
    }

    /// Empty session over the full 14-channel roster.
    pub fn empty() -> Self {
        Self {
            channels: ChannelId::ALL.to_vec(),
            trials: Vec::new(),
            subject_tag: String::new(),
            seed: None,
        }
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn trials(&self) -> &[EegEpoch] {
        &self.trials
    }

    pub fn subject_tag(&self) -> &str {
        &self.subject_tag
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.trials.first().map_or(DEFAULT_SAMPLE_RATE, EegEpoch::sample_rate)
    }

    /// Row index of `channel` in this session's roster.
    pub fn channel_index(&self, channel: ChannelId) -> Option<usize> {
        self.channels.iter().position(|&c| c == channel)
    }

    /// Number of trials per command, indexed by [`Command::index`].
    pub fn command_counts(&self) -> [usize; Command::COUNT] {
        let mut counts = [0; Command::COUNT];
        for label in self.trials.iter().filter_map(EegEpoch::label) {
            counts[label.index()] += 1;
        }
        counts
    }

    pub fn count_of(&self, cmd: Command) -> usize {
        self.command_counts()[cmd.index()]
    }

    /// Same roster and metadata with a different trial list.
    pub fn with_trials(&self, trials: Vec<EegEpoch>) -> Result<Self> {
        SessionDataset::new(self.channels.clone(), trials, self.subject_tag.clone(), self.seed)
    }

    /// SHA-256 over roster, labels, trial ids and the exact bits of every
    /// sample. Stable across platforms.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for c in &self.channels {
            h.update(c.label().as_bytes());
            h.update([0]);
        }
        for t in &self.trials {
            h.update(t.trial_id().to_le_bytes());
            h.update(t.label().map_or("", Command::token).as_bytes());
            h.update(t.sample_rate().to_bits().to_le_bytes());
            for row in t.samples() {
                for v in row {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}
