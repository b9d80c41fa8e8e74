//! Epoch cleaning: DC removal, power-line notch filtering and amplitude
//! based artifact rejection.
//!
//! The notch is the standard second-order IIR design with unity gain at DC
//! and Nyquist and an exact −3 dB bandwidth of `center / Q`. Filtering is a
//! single causal pass so the offline and streaming paths run identical
//! arithmetic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::{ChannelId, EegEpoch};

pub const DEFAULT_NOTCH_Q: f64 = 30.0;
pub const DEFAULT_ARTIFACT_LIMIT_UV: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchSpec {
    pub center_hz: f64,
    pub q_factor: f64,
    pub sample_rate: f64,
}

impl NotchSpec {
    pub fn new(center_hz: f64, q_factor: f64, sample_rate: f64) -> Result<Self> {
        let spec = Self {
            center_hz,
            q_factor,
            sample_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::invalid("notch sample rate must be > 0"));
        }
        if !(self.center_hz > 0.0 && self.center_hz < self.sample_rate / 2.0) {
            return Err(Error::invalid(format!(
                "notch center {} Hz must lie in (0, {}) Hz",
                self.center_hz,
                self.sample_rate / 2.0
            )));
        }
        if !(self.q_factor > 0.0) {
            return Err(Error::invalid("notch Q must be > 0"));
        }
        Ok(())
    }
}

/// Normalized biquad coefficients (a0 = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn notch(spec: &NotchSpec) -> Result<Self> {
        spec.validate()?;
        let w0 = 2.0 * PI * spec.center_hz / spec.sample_rate;
        let bw = w0 / spec.q_factor;
        let gain = 1.0 / (1.0 + (bw / 2.0).tan());
        let c = w0.cos();
        Ok(Self {
            b: [gain, -2.0 * gain * c, gain],
            a: [-2.0 * gain * c, 2.0 * gain - 1.0],
        })
    }

    /// |H(e^{jw})| at frequency `hz`.
    pub fn magnitude(&self, hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * hz / sample_rate;
        let (z1r, z1i) = (w.cos(), -w.sin());
        let (z2r, z2i) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let nr = self.b[0] + self.b[1] * z1r + self.b[2] * z2r;
        let ni = self.b[1] * z1i + self.b[2] * z2i;
        let dr = 1.0 + self.a[0] * z1r + self.a[1] * z2r;
        let di = self.a[0] * z1i + self.a[1] * z2i;
        (nr.hypot(ni)) / (dr.hypot(di))
    }
}

/// Direct-form I delay line for one biquad on one channel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BiquadState {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl BiquadState {
    #[inline]
    pub fn process(&mut self, q: &Biquad, x: f64) -> f64 {
        let y = q.b[0] * x + q.b[1] * self.x1 + q.b[2] * self.x2 - q.a[0] * self.y1 - q.a[1] * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Cascade of notch sections applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct NotchChain {
    sections: Vec<Biquad>,
}

impl NotchChain {
    pub fn new(specs: &[NotchSpec]) -> Result<Self> {
        let sections = specs.iter().map(Biquad::notch).collect::<Result<_>>()?;
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Filter one channel from a zeroed state.
    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = signal.to_vec();
        self.filter_in_place(&mut out);
        out
    }

    pub fn filter_in_place(&self, signal: &mut [f64]) {
        for q in &self.sections {
            let mut st = BiquadState::default();
            for v in signal.iter_mut() {
                *v = st.process(q, *v);
            }
        }
    }
}

/// Preprocessing stages applied to every epoch or streaming window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub remove_dc: bool,
    /// Notch centers in Hz, applied in order. Empty disables notching.
    pub notch_hz: Vec<f64>,
    pub notch_q: f64,
    pub artifact_limit_uv: f64,
    pub reject_artifacts: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            remove_dc: true,
            notch_hz: vec![50.0, 60.0],
            notch_q: DEFAULT_NOTCH_Q,
            artifact_limit_uv: DEFAULT_ARTIFACT_LIMIT_UV,
            reject_artifacts: true,
        }
    }
}

impl PreprocessConfig {
    pub fn notch_chain(&self, sample_rate: f64) -> Result<NotchChain> {
        let specs: Vec<NotchSpec> = self
            .notch_hz
            .iter()
            .map(|&hz| NotchSpec::new(hz, self.notch_q, sample_rate))
            .collect::<Result<_>>()?;
        NotchChain::new(&specs)
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(self.artifact_limit_uv > 0.0) {
            return Err(Error::invalid("artifact limit must be > 0"));
        }
        self.notch_chain(sample_rate).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactVerdict {
    pub accepted: bool,
    pub peak_abs_uv: f64,
    pub offending_channel: Option<ChannelId>,
}

fn dc_removed(row: &[f64]) -> Vec<f64> {
    if row.is_empty() {
        return Vec::new();
    }
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    let mut out: Vec<f64> = row.iter().map(|v| v - mean).collect();
    // second pass removes the rounding residue of the first
    let resid = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|v| *v -= resid);
    out
}

/// Subtract each channel's mean.
pub fn remove_dc(epoch: &EegEpoch) -> EegEpoch {
    let rows = epoch.samples().iter().map(|r| dc_removed(r)).collect();
    epoch
        .map_samples(rows)
        .expect("mean removal preserves shape and finiteness")
}

/// Apply one notch section to every channel from a zeroed state.
pub fn notch_filter(epoch: &EegEpoch, spec: &NotchSpec) -> Result<EegEpoch> {
    spec.validate()?;
    if spec.sample_rate != epoch.sample_rate() {
        return Err(Error::invalid(format!(
            "notch designed for {} Hz but epoch is sampled at {} Hz",
            spec.sample_rate,
            epoch.sample_rate()
        )));
    }
    let chain = NotchChain::new(std::slice::from_ref(spec))?;
    let rows = epoch.samples().iter().map(|r| chain.filter(r)).collect();
    epoch.map_samples(rows)
}

/// Peak-amplitude artifact check. Rejects iff any |sample| > `limit_uv`.
/// `channels` names the epoch rows for reporting.
pub fn artifact_check(epoch: &EegEpoch, channels: &[ChannelId], limit_uv: f64) -> Result<ArtifactVerdict> {
    if !(limit_uv > 0.0) {
        return Err(Error::invalid(format!("artifact limit must be > 0, got {limit_uv}")));
    }
    Ok(check_rows(epoch.samples(), channels, limit_uv))
}

pub(crate) fn check_rows(rows: &[Vec<f64>], channels: &[ChannelId], limit_uv: f64) -> ArtifactVerdict {
    let mut peak = 0.0f64;
    let mut offending = None;
    for (i, row) in rows.iter().enumerate() {
        let row_peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if row_peak > limit_uv && offending.is_none() {
            offending = channels.get(i).copied();
        }
        peak = peak.max(row_peak);
    }
    ArtifactVerdict {
        accepted: peak <= limit_uv,
        peak_abs_uv: peak,
        offending_channel: offending,
    }
}

/// Run the configured stages over raw channel rows. Returns the cleaned
/// rows and, when artifact rejection is enabled, the verdict.
pub fn preprocess_rows(
    rows: &[Vec<f64>],
    channels: &[ChannelId],
    chain: &NotchChain,
    cfg: &PreprocessConfig,
) -> (Vec<Vec<f64>>, Option<ArtifactVerdict>) {
    let cleaned: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut row = if cfg.remove_dc { dc_removed(r) } else { r.clone() };
            chain.filter_in_place(&mut row);
            row
        })
        .collect();
    let verdict = cfg
        .reject_artifacts
        .then(|| check_rows(&cleaned, channels, cfg.artifact_limit_uv));
    (cleaned, verdict)
}

/// Epoch-level wrapper of [`preprocess_rows`].
pub fn preprocess_epoch(
    epoch: &EegEpoch,
    channels: &[ChannelId],
    cfg: &PreprocessConfig,
) -> Result<(EegEpoch, Option<ArtifactVerdict>)> {
    let chain = cfg.notch_chain(epoch.sample_rate())?;
    let (rows, verdict) = preprocess_rows(epoch.samples(), channels, &chain, cfg);
    Ok((epoch.map_samples(rows)?, verdict))
}
