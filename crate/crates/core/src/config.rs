//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers, `#` comments. Unknown sections and keys are rejected. Every
//! value starts at its owning module's default.
//!
//! ```text
//! [run]
//! seed = 7
//! [classify]
//! classifier = svm
//! [svm]
//! c = 10
//! gamma = auto
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{Gamma, KernelKind};
use crate::error::{Error, Result};
use crate::runtime::PipelineConfig;
use crate::signal_io::{BandSignature, ChannelId, Command, SynthSpec};
use crate::spectral::WindowKind;
use crate::vehicle::{Rect, VehicleState};
use crate::wavelet::FeatureMode;
use crate::workflow::{SimulationOptions, TrainOptions};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "EEGCHAIR_CONFIG";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthSpec,
    pub train: TrainOptions,
    pub pipeline: PipelineConfig,
    pub simulation: SimulationOptions,
}

fn bad(section: &str, key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}] {key} = {value}: {why}"))
}

fn num<T: FromStr>(section: &str, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(section, key, v, e))
}

fn boolean(section: &str, key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(section, key, v, "expected true or false")),
    }
}

fn list<T: FromStr>(section: &str, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| num(section, key, p.trim())).collect()
}

fn fixed<const N: usize>(section: &str, key: &str, v: &str) -> Result<[f64; N]> {
    let vals: Vec<f64> = list(section, key, v)?;
    vals.try_into()
        .map_err(|_| bad(section, key, v, format!("expected {N} comma-separated numbers")))
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, found `{line}`", n + 1)))?;
            if section.is_empty() {
                return Err(Error::Config(format!("line {}: key outside any [section]", n + 1)));
            }
            cfg.set(&section, k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Apply `section.key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (lhs, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not section.key=value")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not section.key=value")))?;
        self.set(&section.to_ascii_lowercase(), key, v.trim())
    }

    pub fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let s = section;
        match (section, key) {
            ("run", "seed") => self.seed = num(s, key, v)?,

            ("paths", "dataset") => self.paths.dataset = opt_path(v),
            ("paths", "model") => self.paths.model = opt_path(v),
            ("paths", "report") => self.paths.report = opt_path(v),
            ("paths", "log") => self.paths.log = opt_path(v),

            ("synth", "trials_per_command") => self.synth.trials_per_command = num(s, key, v)?,
            ("synth", "noise_amp") => self.synth.noise_amp = num(s, key, v)?,
            ("synth", "amplitude_jitter") => self.synth.amplitude_jitter = num(s, key, v)?,
            ("synth", "epoch_len") => self.synth.epoch_len = num(s, key, v)?,
            ("synth", "sample_rate") => self.synth.sample_rate = num(s, key, v)?,
            ("synth", "subject_tag") => self.synth.subject_tag = v.to_string(),
            ("synth", "commands") => self.synth.commands = list(s, key, v)?,
            ("synth", k) if k.starts_with("signature.") => {
                let cmd: Command = num(s, key, &k["signature.".len()..])?;
                let [a, b, c, d, e] = fixed::<5>(s, key, v)?;
                self.synth.band_signature.insert(cmd, BandSignature::new(a, b, c, d, e));
            }
            ("synth", k) if k.starts_with("gain.") => {
                let ch: ChannelId = num(s, key, &k["gain.".len()..])?;
                self.synth.channel_gains[ch.index()] = num(s, key, v)?;
            }

            ("classify", "classifier") => self.train.classifier = num(s, key, v)?,
            ("classify", "train_fraction") => self.train.train_fraction = num(s, key, v)?,
            ("classify", "channels") => self.train.n_channels = num(s, key, v)?,
            ("classify", "features") => self.train.feature_mode = num::<FeatureMode>(s, key, v)?,

            ("svm", "kernel") => {
                self.train.params.svm.kernel = match v.to_ascii_lowercase().as_str() {
                    "linear" => KernelKind::Linear,
                    "rbf" => KernelKind::Rbf,
                    _ => return Err(bad(s, key, v, "expected linear or rbf")),
                }
            }
            ("svm", "c") => self.train.params.svm.c = num(s, key, v)?,
            ("svm", "gamma") => self.train.params.svm.gamma = num::<Gamma>(s, key, v)?,
            ("svm", "tol") => self.train.params.svm.tol = num(s, key, v)?,
            ("svm", "max_passes") => self.train.params.svm.max_passes = num(s, key, v)?,

            ("knn", "k") => self.train.params.knn.k = num(s, key, v)?,

            ("rf", "n_trees") => self.train.params.rf.n_trees = num(s, key, v)?,
            ("rf", "max_depth") => {
                self.train.params.rf.max_depth = match v.to_ascii_lowercase().as_str() {
                    "" | "none" | "unlimited" => None,
                    _ => Some(num(s, key, v)?),
                }
            }
            ("rf", "min_leaf") => self.train.params.rf.min_leaf = num(s, key, v)?,
            ("rf", "bootstrap") => self.train.params.rf.bootstrap = boolean(s, key, v)?,

            ("mlp", "hidden") => self.train.params.mlp.hidden = list(s, key, v)?,
            ("mlp", "epochs") => self.train.params.mlp.epochs = num(s, key, v)?,
            ("mlp", "learning_rate") => self.train.params.mlp.learning_rate = num(s, key, v)?,
            ("mlp", "batch_size") => self.train.params.mlp.batch_size = num(s, key, v)?,

            ("preprocess", "remove_dc") => self.train.preprocess.remove_dc = boolean(s, key, v)?,
            ("preprocess", "notch_hz") => self.train.preprocess.notch_hz = list(s, key, v)?,
            ("preprocess", "notch_q") => self.train.preprocess.notch_q = num(s, key, v)?,
            ("preprocess", "artifact_limit_uv") => self.train.preprocess.artifact_limit_uv = num(s, key, v)?,
            ("preprocess", "reject_artifacts") => self.train.preprocess.reject_artifacts = boolean(s, key, v)?,

            ("spectral", "segment_len") => self.train.welch.segment_len = num(s, key, v)?,
            ("spectral", "overlap") => self.train.welch.overlap_fraction = num(s, key, v)?,
            ("spectral", "window") => {
                self.train.welch.window = match v.to_ascii_lowercase().as_str() {
                    "hann" => WindowKind::Hann,
                    "rect" => WindowKind::Rect,
                    _ => return Err(bad(s, key, v, "expected hann or rect")),
                }
            }

            ("runtime", "window_samples") => self.pipeline.window_samples = num(s, key, v)?,
            ("runtime", "hop_samples") => self.pipeline.hop_samples = num(s, key, v)?,
            ("runtime", "debounce_wins") => self.pipeline.debounce_wins = num(s, key, v)?,
            ("runtime", "stop_immediate") => self.pipeline.stop_immediate = boolean(s, key, v)?,
            ("runtime", "artifact_limit_uv") => self.pipeline.artifact_limit_uv = num(s, key, v)?,

            ("vehicle", "stop_distance_m") => self.simulation.safety.stop_distance_m = num(s, key, v)?,
            ("vehicle", "forward_speed") => self.simulation.safety.forward_speed = num(s, key, v)?,
            ("vehicle", "reverse_speed") => self.simulation.safety.reverse_speed = num(s, key, v)?,
            ("vehicle", "turn_rate_deg_s") => self.simulation.safety.turn_rate_deg_s = num(s, key, v)?,
            ("vehicle", "sensor_range") => self.simulation.world.sensor_range = num(s, key, v)?,
            ("vehicle", "dt") => self.simulation.dt = num(s, key, v)?,
            ("vehicle", "bounds") => {
                let [a, b, c, d] = fixed::<4>(s, key, v)?;
                self.simulation.world.bounds = Rect::new(a, b, c, d);
            }
            ("vehicle", "obstacle") => {
                let [a, b, c, d] = fixed::<4>(s, key, v)?;
                self.simulation.world.obstacles.push(Rect::new(a, b, c, d));
            }
            ("vehicle", "start") => {
                let [x, y, h] = fixed::<3>(s, key, v)?;
                self.simulation.start = VehicleState::at(x, y, h);
            }

            _ => return Err(Error::Config(format!("unknown key `{key}` in [{section}]"))),
        }
        Ok(())
    }

    /// Effective settings in the file format; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let p = |o: &mut String, k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        let path = |v: &Option<PathBuf>| v.as_ref().map_or(String::new(), |p| p.display().to_string());

        o.push_str("[run]\n");
        p(&mut o, "seed", self.seed.to_string());

        o.push_str("\n[paths]\n");
        p(&mut o, "dataset", path(&self.paths.dataset));
        p(&mut o, "model", path(&self.paths.model));
        p(&mut o, "report", path(&self.paths.report));
        p(&mut o, "log", path(&self.paths.log));

        let sy = &self.synth;
        o.push_str("\n[synth]\n");
        p(&mut o, "trials_per_command", sy.trials_per_command.to_string());
        p(&mut o, "noise_amp", sy.noise_amp.to_string());
        p(&mut o, "amplitude_jitter", sy.amplitude_jitter.to_string());
        p(&mut o, "epoch_len", sy.epoch_len.to_string());
        p(&mut o, "sample_rate", sy.sample_rate.to_string());
        p(&mut o, "subject_tag", sy.subject_tag.clone());
        p(&mut o, "commands", join(&sy.commands));
        for (cmd, sig) in &sy.band_signature {
            p(&mut o, &format!("signature.{cmd}"), join(&sig.amplitudes()));
        }
        for ch in ChannelId::ALL {
            p(&mut o, &format!("gain.{ch}"), sy.channel_gains[ch.index()].to_string());
        }

        let t = &self.train;
        o.push_str("\n[classify]\n");
        p(&mut o, "classifier", t.classifier.to_string());
        p(&mut o, "train_fraction", t.train_fraction.to_string());
        p(&mut o, "channels", t.n_channels.to_string());
        p(&mut o, "features", t.feature_mode.name().to_string());

        let svm = &t.params.svm;
        o.push_str("\n[svm]\n");
        p(
            &mut o,
            "kernel",
            match svm.kernel {
                KernelKind::Linear => "linear".into(),
                KernelKind::Rbf => "rbf".into(),
            },
        );
        p(&mut o, "c", svm.c.to_string());
        p(
            &mut o,
            "gamma",
            match svm.gamma {
                Gamma::Value(g) => g.to_string(),
                Gamma::Auto(_) => "auto".into(),
            },
        );
        p(&mut o, "tol", svm.tol.to_string());
        p(&mut o, "max_passes", svm.max_passes.to_string());

        o.push_str("\n[knn]\n");
        p(&mut o, "k", t.params.knn.k.to_string());

        let rf = &t.params.rf;
        o.push_str("\n[rf]\n");
        p(&mut o, "n_trees", rf.n_trees.to_string());
        p(
            &mut o,
            "max_depth",
            rf.max_depth.map_or("none".into(), |d| d.to_string()),
        );
        p(&mut o, "min_leaf", rf.min_leaf.to_string());
        p(&mut o, "bootstrap", rf.bootstrap.to_string());

        let mlp = &t.params.mlp;
        o.push_str("\n[mlp]\n");
        p(&mut o, "hidden", join(&mlp.hidden));
        p(&mut o, "epochs", mlp.epochs.to_string());
        p(&mut o, "learning_rate", mlp.learning_rate.to_string());
        p(&mut o, "batch_size", mlp.batch_size.to_string());

        let pre = &t.preprocess;
        o.push_str("\n[preprocess]\n");
        p(&mut o, "remove_dc", pre.remove_dc.to_string());
        p(&mut o, "notch_hz", join(&pre.notch_hz));
        p(&mut o, "notch_q", pre.notch_q.to_string());
        p(&mut o, "artifact_limit_uv", pre.artifact_limit_uv.to_string());
        p(&mut o, "reject_artifacts", pre.reject_artifacts.to_string());

        o.push_str("\n[spectral]\n");
        p(&mut o, "segment_len", t.welch.segment_len.to_string());
        p(&mut o, "overlap", t.welch.overlap_fraction.to_string());
        p(
            &mut o,
            "window",
            match t.welch.window {
                WindowKind::Hann => "hann".into(),
                WindowKind::Rect => "rect".into(),
            },
        );

        let pl = &self.pipeline;
        o.push_str("\n[runtime]\n");
        p(&mut o, "window_samples", pl.window_samples.to_string());
        p(&mut o, "hop_samples", pl.hop_samples.to_string());
        p(&mut o, "debounce_wins", pl.debounce_wins.to_string());
        p(&mut o, "stop_immediate", pl.stop_immediate.to_string());
        p(&mut o, "artifact_limit_uv", pl.artifact_limit_uv.to_string());

        let sim = &self.simulation;
        let rect = |r: &Rect| join(&[r.x_min, r.y_min, r.x_max, r.y_max]);
        o.push_str("\n[vehicle]\n");
        p(&mut o, "stop_distance_m", sim.safety.stop_distance_m.to_string());
        p(&mut o, "forward_speed", sim.safety.forward_speed.to_string());
        p(&mut o, "reverse_speed", sim.safety.reverse_speed.to_string());
        p(&mut o, "turn_rate_deg_s", sim.safety.turn_rate_deg_s.to_string());
        p(&mut o, "sensor_range", sim.world.sensor_range.to_string());
        p(&mut o, "dt", sim.dt.to_string());
        p(&mut o, "bounds", rect(&sim.world.bounds));
        for ob in &sim.world.obstacles {
            p(&mut o, "obstacle", rect(ob));
        }
        p(&mut o, "start", join(&[sim.start.x, sim.start.y, sim.start.heading]));
        o
    }

    /// Training options with the run seed applied.
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Synthesis recipe with the run seed applied.
    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth_spec().validate()?;
        self.pipeline.validate()?;
        self.simulation.world.validate()?;
        self.simulation.safety.validate()?;
        self.train.params.svm.validate()?;
        self.train.params.mlp.validate()?;
        if !(self.simulation.dt > 0.0) {
            return Err(Error::Config("[vehicle] dt must be > 0".into()));
        }
        Ok(())
    }
}
