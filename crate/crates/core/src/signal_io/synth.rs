use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{ChannelId, Command, EegEpoch, SessionDataset, DEFAULT_EPOCH_LEN, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Sinusoid frequency used for each band: the band midpoints, gamma capped
/// at 40 Hz.
pub const BAND_CENTERS_HZ: [f64; 5] = [2.0, 6.0, 11.5, 23.5, 40.0];

/// Per-band sinusoid amplitudes in µV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSignature {
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BandSignature {
    pub const fn new(delta: f64, theta: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            delta,
            theta,
            alpha,
            beta,
            gamma,
        }
    }

    pub fn amplitudes(&self) -> [f64; 5] {
        [self.delta, self.theta, self.alpha, self.beta, self.gamma]
    }

    /// Default signature of each command: a shared background with one
    /// band raised per command.
    pub fn default_for(cmd: Command) -> Self {
        match cmd {
            Command::Left => BandSignature::new(8.0, 5.0, 14.0, 4.0, 2.0),
            Command::Right => BandSignature::new(8.0, 5.0, 4.0, 12.0, 2.0),
            Command::Forward => BandSignature::new(8.0, 12.0, 5.0, 4.0, 2.0),
            Command::Reverse => BandSignature::new(8.0, 5.0, 5.0, 4.0, 8.0),
            Command::Stop => BandSignature::new(14.0, 5.0, 5.0, 4.0, 2.0),
        }
    }
}

/// Recipe for a labeled synthetic session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub trials_per_command: usize,
    pub band_signature: BTreeMap<Command, BandSignature>,
    /// RMS of the 1/f background, µV.
    pub noise_amp: f64,
    /// Each band amplitude is scaled by `1 + jitter·u`, `u ~ U(-1, 1)`, per trial.
    pub amplitude_jitter: f64,
    pub seed: u64,
    /// Multiplier on the band sinusoids per roster channel.
    pub channel_gains: [f64; ChannelId::COUNT],
    /// Commands to generate, in round-robin order.
    pub commands: Vec<Command>,
    pub epoch_len: usize,
    pub sample_rate: f64,
    pub subject_tag: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let mut gains = [0.6; ChannelId::COUNT];
        for c in [
            ChannelId::O1,
            ChannelId::O2,
            ChannelId::P7,
            ChannelId::P8,
            ChannelId::T7,
        ] {
            gains[c.index()] = 1.0;
        }
        Self {
            trials_per_command: 50,
            band_signature: Command::ALL
                .iter()
                .map(|&c| (c, BandSignature::default_for(c)))
                .collect(),
            noise_amp: 6.0,
            amplitude_jitter: 0.25,
            seed: 0,
            channel_gains: gains,
            commands: Command::ALL.to_vec(),
            epoch_len: DEFAULT_EPOCH_LEN,
            sample_rate: DEFAULT_SAMPLE_RATE,
            subject_tag: "synthetic".to_string(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_command < 1 {
            return Err(Error::invalid("trials_per_command must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(Error::invalid("amplitude_jitter must lie in [0, 1)"));
        }
        if !(self.noise_amp >= 0.0) {
            return Err(Error::invalid("noise_amp must be >= 0"));
        }
        if self.epoch_len < 2 {
            return Err(Error::invalid("epoch_len must be >= 2"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate must be > 0"));
        }
        if self.commands.is_empty() {
            return Err(Error::invalid("commands must not be empty"));
        }
        if self.channel_gains.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::invalid("channel gains must be >= 0"));
        }
        for cmd in &self.commands {
            let sig = self
                .band_signature
                .get(cmd)
                .ok_or_else(|| Error::invalid(format!("no band signature for {cmd}")))?;
            if sig.amplitudes().iter().any(|a| !(*a >= 0.0)) {
                return Err(Error::invalid(format!("negative amplitude in {cmd} signature")));
            }
        }
        Ok(())
    }

    pub fn signature(&self, cmd: Command) -> BandSignature {
        self.band_signature
            .get(&cmd)
            .copied()
            .unwrap_or_else(|| BandSignature::default_for(cmd))
    }
}

/// Deterministic labeled session: `trials_per_command` epochs for each
/// command, interleaved round-robin.
pub fn generate_synthetic_session(spec: &SynthSpec) -> Result<SessionDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.epoch_len;
    let fs = spec.sample_rate;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);

    let total = spec.trials_per_command * spec.commands.len();
    let mut trials = Vec::with_capacity(total);
    for k in 0..total {
        let cmd = spec.commands[k % spec.commands.len()];
        let amps = spec.signature(cmd).amplitudes();
        let jittered: Vec<f64> = amps
            .iter()
            .map(|a| a * (1.0 + spec.amplitude_jitter * rng.random_range(-1.0..=1.0)))
            .collect();

        let mut rows = Vec::with_capacity(ChannelId::COUNT);
        for ch in 0..ChannelId::COUNT {
            let gain = spec.channel_gains[ch];
            let phases: Vec<f64> = (0..BAND_CENTERS_HZ.len())
                .map(|_| rng.random_range(0.0..2.0 * PI))
                .collect();
            let mut row = pink_noise(n, spec.noise_amp, &mut rng, ifft.as_ref());
            for (i, v) in row.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let mut s = 0.0;
                for b in 0..BAND_CENTERS_HZ.len() {
                    s += jittered[b] * (2.0 * PI * BAND_CENTERS_HZ[b] * t + phases[b]).sin();
                }
                *v += gain * s;
            }
            rows.push(row);
        }
        trials.push(EegEpoch::new(rows, fs, Some(cmd), k as u64)?);
    }
    SessionDataset::new(
        ChannelId::ALL.to_vec(),
        trials,
        spec.subject_tag.clone(),
        Some(spec.seed),
    )
}

/// Zero-mean noise with a 1/f power spectrum scaled to the requested RMS.
/// Random phases, deterministic magnitudes.
fn pink_noise(n: usize, rms: f64, rng: &mut ChaCha8Rng, ifft: &dyn rustfft::Fft<f64>) -> Vec<f64> {
    if rms == 0.0 {
        return vec![0.0; n];
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let mag = 1.0 / (k as f64).sqrt();
        let phase = rng.random_range(0.0..2.0 * PI);
        let z = Complex64::from_polar(mag, phase);
        if k == n - k {
            spec[k] = Complex64::new(z.re, 0.0);
        } else {
            spec[k] = z;
            spec[n - k] = z.conj();
        }
    }
    ifft.process(&mut spec);
    let mut out: Vec<f64> = spec.iter().map(|z| z.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    let cur = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if cur > 0.0 {
        let scale = rms / cur;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}
