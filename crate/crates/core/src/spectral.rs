//! Welch power spectral density, band powers and maximum-power channel
//! selection.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::{ChannelId, SessionDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Rect,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rect => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: WindowKind,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self {
            segment_len: 256,
            overlap_fraction: 0.5,
            window: WindowKind::Hann,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    /// µV²/Hz per bin, one-sided.
    pub power: Vec<f64>,
    pub bin_width: f64,
    pub params: WelchParams,
}

impl PsdEstimate {
    pub fn nyquist(&self) -> f64 {
        self.freqs.last().copied().unwrap_or(0.0)
    }

    /// Σ power · bin_width over every bin.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.bin_width
    }

    /// Index of the largest bin.
    pub fn peak_bin(&self) -> usize {
        self.power
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            )
            .0
    }
}

/// Averaged modified periodogram. The signal's global mean is removed
/// first; the one-sided density is scaled so that Σ power·bin_width
/// approximates the signal variance.
pub fn welch_psd(signal: &[f64], sample_rate: f64, params: WelchParams) -> Result<PsdEstimate> {
    let n = signal.len();
    let seg = params.segment_len;
    if n == 0 {
        return Err(Error::Empty("signal".into()));
    }
    if seg == 0 || !seg.is_multiple_of(2) {
        return Err(Error::invalid(format!("segment length {seg} must be even and > 0")));
    }
    if seg > n {
        return Err(Error::invalid(format!(
            "segment length {seg} exceeds signal length {n}"
        )));
    }
    if !(0.0..1.0).contains(&params.overlap_fraction) {
        return Err(Error::invalid("overlap fraction must lie in [0, 1)"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be > 0"));
    }

    let step = ((seg as f64) * (1.0 - params.overlap_fraction)).round().max(1.0) as usize;
    let step = step.min(seg);
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window = params.window.coefficients(seg);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);

    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut segments = 0usize;
    let mut start = 0;
    while start + seg <= n {
        for (i, z) in buf.iter_mut().enumerate() {
            *z = Complex64::new((signal[start + i] - mean) * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let scale = 1.0 / (sample_rate * win_energy * segments as f64);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || k == seg / 2 { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let bin_width = sample_rate / seg as f64;
    let freqs = (0..bins).map(|k| k as f64 * bin_width).collect();
    Ok(PsdEstimate {
        freqs,
        power,
        bin_width,
        params,
    })
}

/// Rectangular sum of power·bin_width over bins whose center lies in
/// `[lo, hi)`. `hi` may exceed Nyquist by up to one bin so that the top
/// bin can be included.
pub fn band_power(psd: &PsdEstimate, lo: f64, hi: f64) -> Result<f64> {
    let nyq = psd.nyquist();
    if !(lo >= 0.0 && lo < hi && hi <= nyq + psd.bin_width) {
        return Err(Error::invalid(format!(
            "band [{lo}, {hi}) outside [0, {nyq}] or inverted"
        )));
    }
    Ok(psd
        .freqs
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= lo && **f < hi)
        .map(|(_, p)| p * psd.bin_width)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    /// Half-open edges in Hz.
    pub fn range(self) -> (f64, f64) {
        match self {
            Band::Delta => (0.5, 4.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 15.0),
            Band::Beta => (15.0, 32.0),
            Band::Gamma => (32.0, 45.0),
        }
    }
}

/// Power in each canonical band.
pub fn band_powers(psd: &PsdEstimate) -> Result<[f64; 5]> {
    let mut out = [0.0; 5];
    for (o, b) in out.iter_mut().zip(Band::ALL) {
        let (lo, hi) = b.range();
        *o = band_power(psd, lo, hi)?;
    }
    Ok(out)
}

/// Band used to rank channels; skips DC drift and the line-noise notches.
pub const SELECTION_BAND_HZ: (f64, f64) = (0.5, 45.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRanking {
    /// (channel, mean power in µV²), non-increasing in power.
    pub ranked: Vec<(ChannelId, f64)>,
    pub selected: Vec<ChannelId>,
}

/// Rank channels by mean [0.5, 45) Hz power over all epochs and keep the
/// top `k`. Ties go to the earlier roster channel. Per-epoch powers are
/// summed in sorted order so the result does not depend on trial order.
pub fn select_channels(dataset: &SessionDataset, k: usize, params: WelchParams) -> Result<ChannelRanking> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset has no trials".into()));
    }
    if !(1..=ChannelId::COUNT).contains(&k) {
        return Err(Error::invalid(format!("k must lie in 1..=14, got {k}")));
    }
    let fs = dataset.sample_rate();
    let (lo, hi) = SELECTION_BAND_HZ;
    let mut ranked = Vec::with_capacity(dataset.channels().len());
    for (row, &ch) in dataset.channels().iter().enumerate() {
        let mut powers = dataset
            .trials()
            .iter()
            .map(|t| {
                let psd = welch_psd(t.channel(row), fs, params)?;
                band_power(&psd, lo, hi.min(psd.nyquist() + psd.bin_width))
            })
            .collect::<Result<Vec<f64>>>()?;
        powers.sort_by(f64::total_cmp);
        let mean = powers.iter().sum::<f64>() / powers.len() as f64;
        ranked.push((ch, mean));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let selected = ranked.iter().take(k).map(|(c, _)| *c).collect();
    Ok(ChannelRanking { ranked, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(hz: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * hz * i as f64 / fs).sin()).collect()
    }

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn grid_shape() {
        let psd = welch_psd(&vec![0.0; 1024], 128.0, WelchParams::default()).unwrap();
        assert_eq!(psd.freqs.len(), 129);
        assert_eq!(psd.freqs[0], 0.0);
        assert_eq!(*psd.freqs.last().unwrap(), 64.0);
        assert_eq!(psd.bin_width, 0.5);
        assert!(psd.power.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn ten_hz_sine_peak_and_power() {
        let x = sine(10.0, 1024, 128.0);
        let psd = welch_psd(&x, 128.0, WelchParams::default()).unwrap();
        assert_eq!(psd.freqs[psd.peak_bin()], 10.0);
        let total = psd.total_power();
        assert!((total - 0.5).abs() <= 0.005, "total {total}");
        let alpha = band_power(&psd, 8.0, 15.0).unwrap();
        assert!(alpha >= 0.95 * total);
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..100_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psd = welch_psd(&x, 128.0, WelchParams::default()).unwrap();
        let var = variance(&x);
        assert!((psd.total_power() - var).abs() <= 0.02 * var);
    }

    #[test]
    fn rect_no_overlap_parseval_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut x: Vec<f64> = (0..2048).map(|_| rng.random_range(-3.0..5.0)).collect();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= m);
        let params = WelchParams {
            segment_len: 256,
            overlap_fraction: 0.0,
            window: WindowKind::Rect,
        };
        let psd = welch_psd(&x, 128.0, params).unwrap();
        let var = variance(&x);
        assert!((psd.total_power() - var).abs() <= 1e-6 * var);
    }

    #[test]
    fn psd_errors() {
        assert!(welch_psd(&[], 128.0, WelchParams::default()).is_err());
        assert!(welch_psd(&[0.0; 100], 128.0, WelchParams::default()).is_err());
        let odd = WelchParams {
            segment_len: 63,
            ..WelchParams::default()
        };
        assert!(welch_psd(&[0.0; 100], 128.0, odd).is_err());
    }

    #[test]
    fn band_power_partition_and_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..1024).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psd = welch_psd(&x, 128.0, WelchParams::default()).unwrap();
        let whole = band_power(&psd, 0.0, 64.0 + 1e-9).unwrap();
        assert!((whole - psd.total_power()).abs() <= 1e-12 * whole);
        assert_eq!(band_power(&psd, 10.1, 10.4).unwrap(), 0.0);
        assert!(band_power(&psd, 8.0, 4.0).is_err());
        assert!(band_power(&psd, -1.0, 4.0).is_err());
        assert!(band_power(&psd, 0.0, 80.0).is_err());
    }

    #[test]
    fn band_table_is_disjoint_ascending() {
        for w in Band::ALL.windows(2) {
            assert_eq!(w[0].range().1, w[1].range().0);
            assert!(w[0].range().0 < w[0].range().1);
        }
    }
}
