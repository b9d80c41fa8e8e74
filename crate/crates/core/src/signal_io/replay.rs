use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::SessionDataset;
use crate::error::{Error, Result};

/// A block of consecutive samples across all roster channels
/// (channels × m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub samples: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = samples.first() {
            if samples.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Shape("frame rows differ in length".into()));
            }
        }
        Ok(Self { samples })
    }

    /// Build a frame from time-major records (`m` rows of `channels` values).
    pub fn from_records(records: &[Vec<f64>], channels: usize) -> Result<Self> {
        let mut samples = vec![Vec::with_capacity(records.len()); channels];
        for (i, rec) in records.iter().enumerate() {
            if rec.len() != channels {
                return Err(Error::Shape(format!(
                    "record {i} has {} values, expected {channels}",
                    rec.len()
                )));
            }
            for (row, &v) in samples.iter_mut().zip(rec) {
                row.push(v);
            }
        }
        Ok(Self { samples })
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
}

/// Iterator over fixed-size frames of a session's concatenated trials.
#[derive(Debug)]
pub struct FrameReplay<'a> {
    dataset: &'a SessionDataset,
    chunk: usize,
    trial: usize,
    offset: usize,
    pace: Option<Duration>,
    next_due: Option<Instant>,
}

/// Replays a session as `chunk`-sample frames. The last frame may be short.
/// With `realtime`, each frame is released `chunk / sample_rate` seconds
/// after the previous one.
pub fn replay_frames(dataset: &SessionDataset, chunk: usize, realtime: bool) -> Result<FrameReplay<'_>> {
    if chunk == 0 {
        return Err(Error::invalid("chunk must be >= 1"));
    }
    let pace = realtime.then(|| Duration::from_secs_f64(chunk as f64 / dataset.sample_rate()));
    Ok(FrameReplay {
        dataset,
        chunk,
        trial: 0,
        offset: 0,
        pace,
        next_due: None,
    })
}

impl Iterator for FrameReplay<'_> {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        let trials = self.dataset.trials();
        let channels = self.dataset.channels().len();
        let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(self.chunk); channels];
        let mut taken = 0;
        while taken < self.chunk && self.trial < trials.len() {
            let tr = &trials[self.trial];
            let n = (self.chunk - taken).min(tr.len() - self.offset);
            for (row, src) in rows.iter_mut().zip(tr.samples()) {
                row.extend_from_slice(&src[self.offset..self.offset + n]);
            }
            taken += n;
            self.offset += n;
            if self.offset >= tr.len() {
                self.trial += 1;
                self.offset = 0;
            }
        }
        if taken == 0 {
            return None;
        }
        if let Some(pace) = self.pace {
            let now = Instant::now();
            let due = self.next_due.unwrap_or(now);
            if due > now {
                std::thread::sleep(due - now);
            }
            self.next_due = Some(due.max(now) + pace);
        }
        Some(Frame { samples: rows })
    }
}
