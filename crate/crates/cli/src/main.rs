//! `eegchair` command-line tool. Every subcommand is a request to an
//! eegchair service: the one named by `--server`, or one embedded in this
//! process on a loopback port.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eegchair_api::*;
use eegchair_client::{Client, ClientError};
use eegchair_core::classify::ClassifierKind;
use eegchair_core::config::{RunConfig, CONFIG_ENV};
use eegchair_core::workflow::EvalScope;
use eegchair_core::{ChannelId, ErrorClass};

#[derive(Parser)]
#[command(
    name = "eegchair",
    version,
    about = "EEG-to-command pipeline: synthesize, train, evaluate, stream, simulate"
)]
struct Cli {
    /// Base URL of a running eegchair service; an in-process one is used when absent.
    #[arg(long, global = true, env = "EEGCHAIR_SERVER")]
    server: Option<String>,
    /// Configuration file (`[section]` headers, `key = value` lines).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Run seed; overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override one setting, `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic labeled session CSV.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one classifier and write the model plus its held-out report.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report path prefix; `.txt`, `.csv` and `_matrix.csv` are appended.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<ClassifierKind>,
    },
    /// Score a model on a session.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// `auto` uses the model's held-out trials when the session matches.
        #[arg(long, default_value = "auto", value_parser = parse_scope)]
        scope: EvalScope,
    },
    /// Train and score all four classifiers on one split.
    Compare {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Classify `t,v1,...,v14` records from stdin or a TCP connection.
    Stream {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Accept one TCP connection on this port instead of reading stdin.
        #[arg(long)]
        listen: Option<u16>,
        /// Append a wire frame per emitted decision to this file.
        #[arg(long)]
        wire_out: Option<PathBuf>,
        /// Records per request to the service.
        #[arg(long, default_value_t = 64)]
        batch: usize,
    },
    /// Drive the simulated chair from a session and write the episode log.
    Simulate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Per-window pipeline latency over a session.
    Bench {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config,
}

fn parse_scope(s: &str) -> Result<EvalScope, String> {
    match s {
        "auto" => Ok(EvalScope::Auto),
        "all" => Ok(EvalScope::All),
        _ => Err(format!("unknown scope `{s}` (auto|all)")),
    }
}

#[derive(Debug)]
struct Failure {
    class: ErrorClass,
    message: String,
}

impl Failure {
    fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(ErrorClass::Io, format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Usage => 2,
            ErrorClass::Schema => 3,
            ErrorClass::Training => 4,
            ErrorClass::Io => 5,
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Self::new(e.class, e.message)
    }
}

impl From<eegchair_core::Error> for Failure {
    fn from(e: eegchair_core::Error) -> Self {
        Self::new(e.class(), e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn class_name(c: ErrorClass) -> &'static str {
    match c {
        ErrorClass::Usage => "usage error",
        ErrorClass::Schema => "data error",
        ErrorClass::Training => "training error",
        ErrorClass::Io => "i/o error",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("eegchair: i/o error: {e}");
            return ExitCode::from(5);
        }
    };
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("eegchair: {}: {}", class_name(f.class), f.message.replace('\n', " "));
            ExitCode::from(f.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Outcome<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

async fn connect(server: Option<&str>) -> Outcome<Client> {
    if let Some(url) = server {
        return Ok(Client::new(url));
    }
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| Failure::new(ErrorClass::Io, format!("cannot start embedded service: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Failure::new(ErrorClass::Io, e.to_string()))?;
    tokio::spawn(eegchair_service::serve(listener));
    Ok(Client::new(format!("http://{addr}")))
}

fn pick(flag: Option<PathBuf>, configured: &Option<PathBuf>, fallback: &str) -> PathBuf {
    flag.or_else(|| configured.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn read_text(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn session(path: &Path, cfg: &RunConfig) -> Outcome<SessionText> {
    Ok(SessionText {
        csv: read_text(path)?,
        sample_rate: cfg.synth.sample_rate,
    })
}

fn write_accuracy(prefix: &Path, r: &AccuracyReport) -> Outcome {
    write_text(&with_suffix(prefix, ".txt"), &r.table)?;
    write_text(&with_suffix(prefix, ".csv"), &r.csv)?;
    write_text(&with_suffix(prefix, "_matrix.csv"), &r.matrix_csv)
}

async fn run(cli: Cli) -> Outcome {
    let mut cfg = load_config(&cli)?;
    if let Cmd::Config = cli.command {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let client = connect(cli.server.as_deref()).await?;
    let paths = cfg.paths.clone();
    match cli.command {
        Cmd::Synth { out } => {
            let out = pick(out, &paths.dataset, "session.csv");
            let r = client.synth(&SynthRequest { spec: cfg.synth_spec() }).await?;
            write_text(&out, &r.csv)?;
            println!(
                "wrote {} trials to {} (fingerprint {})",
                r.trials,
                out.display(),
                r.fingerprint
            );
        }
        Cmd::Train {
            data,
            model,
            report,
            classifier,
        } => {
            if let Some(k) = classifier {
                cfg.train.classifier = k;
            }
            let data = pick(data, &paths.dataset, "session.csv");
            let model = pick(model, &paths.model, "model.eegchair");
            let report = pick(report, &paths.report, "train_report");
            let r = client
                .train(&TrainRequest {
                    session: session(&data, &cfg)?,
                    options: cfg.train_options(),
                })
                .await?;
            write_text(&model, &r.model)?;
            write_accuracy(&report, &r.report)?;
            let sel: Vec<&str> = r.selected_channels.iter().map(|c| c.label()).collect();
            println!("classifier: {}", cfg.train.classifier.display());
            println!("selected channels: {}", sel.join(" "));
            if !r.rejected_trials.is_empty() {
                println!("rejected trials: {:?}", r.rejected_trials);
            }
            print!("{}", r.report.table);
            println!("model written to {}", model.display());
        }
        Cmd::Eval {
            data,
            model,
            report,
            scope,
        } => {
            let data = pick(data, &paths.dataset, "session.csv");
            let model = pick(model, &paths.model, "model.eegchair");
            let report = pick(report, &paths.report, "eval_report");
            let r = client
                .eval(&EvalRequest {
                    model: read_text(&model)?,
                    session: session(&data, &cfg)?,
                    scope,
                })
                .await?;
            write_accuracy(&report, &r.report)?;
            println!("trials: {}", if r.held_out { "held-out split" } else { "all labeled" });
            print!("{}", r.report.table);
        }
        Cmd::Compare { data, report } => {
            let data = pick(data, &paths.dataset, "session.csv");
            let report = pick(report, &paths.report, "compare_report");
            let r = client
                .compare(&CompareRequest {
                    session: session(&data, &cfg)?,
                    options: cfg.train_options(),
                })
                .await?;
            write_text(&with_suffix(&report, ".txt"), &r.text)?;
            write_text(&with_suffix(&report, ".csv"), &r.csv)?;
            print!("{}", r.text);
        }
        Cmd::Stream {
            model,
            listen,
            wire_out,
            batch,
        } => {
            if batch == 0 {
                return Err(Failure::new(ErrorClass::Usage, "--batch must be >= 1"));
            }
            let model = pick(model, &paths.model, "model.eegchair");
            let req = OpenStreamRequest {
                model: read_text(&model)?,
                config: cfg.pipeline,
                sample_rate: cfg.synth.sample_rate,
                channels: None,
            };
            let sink = match &wire_out {
                Some(p) => Some(std::fs::File::create(p).map_err(|e| Failure::io(p, e))?),
                None => None,
            };
            let mut stream = Stream::open(&client, &req, sink, batch).await?;
            let result = match listen {
                Some(port) => {
                    let listener = std::net::TcpListener::bind(("127.0.0.1", port))
                        .map_err(|e| Failure::new(ErrorClass::Io, format!("cannot listen on port {port}: {e}")))?;
                    eprintln!(
                        "eegchair: listening on {}",
                        listener.local_addr().map_err(|e| Failure::io(Path::new("socket"), e))?
                    );
                    let (conn, _) = listener
                        .accept()
                        .map_err(|e| Failure::new(ErrorClass::Io, e.to_string()))?;
                    stream.consume(BufReader::new(conn)).await
                }
                None => stream.consume(std::io::stdin().lock()).await,
            };
            let stats = client.close_stream(stream.id).await?;
            result?;
            eprintln!(
                "eegchair: {} windows, {} decisions emitted",
                stats.windows_processed, stats.decisions_emitted
            );
        }
        Cmd::Simulate { data, model, log } => {
            let data = pick(data, &paths.dataset, "session.csv");
            let model = pick(model, &paths.model, "model.eegchair");
            let log = pick(log, &paths.log, "episode.csv");
            let r = client
                .simulate(&SimulateRequest {
                    model: read_text(&model)?,
                    session: session(&data, &cfg)?,
                    pipeline: cfg.pipeline,
                    simulation: cfg.simulation.clone(),
                })
                .await?;
            write_text(&log, &r.log)?;
            let emitted = r.decisions.iter().filter(|d| d.emitted()).count();
            println!("steps: {}", r.steps);
            println!("decisions emitted: {emitted} of {} windows", r.decisions.len());
            println!("gated steps: {}", r.gated_steps);
            println!(
                "final state: x={:.3} y={:.3} heading={:.3} t={:.1}",
                r.final_state.x, r.final_state.y, r.final_state.heading, r.final_state.clock
            );
            println!("episode log written to {}", log.display());
        }
        Cmd::Bench { data, model, report } => {
            let data = pick(data, &paths.dataset, "session.csv");
            let model = pick(model, &paths.model, "model.eegchair");
            let report = pick(report, &paths.report, "bench_report");
            let r = client
                .bench(&BenchRequest {
                    model: read_text(&model)?,
                    session: session(&data, &cfg)?,
                    pipeline: cfg.pipeline,
                })
                .await?;
            let s = r.stats;
            let text = format!(
                "Pipeline latency per {}-sample window\nwindows: {}\np50_ms: {:.3}\np95_ms: {:.3}\n",
                cfg.pipeline.window_samples, s.windows_processed, s.latency_p50_ms, s.latency_p95_ms
            );
            let csv = format!(
                "windows,p50_ms,p95_ms\n{},{},{}\n",
                s.windows_processed, s.latency_p50_ms, s.latency_p95_ms
            );
            write_text(&with_suffix(&report, ".txt"), &text)?;
            write_text(&with_suffix(&report, ".csv"), &csv)?;
            print!("{text}");
        }
        Cmd::Config => unreachable!(),
    }
    Ok(())
}

/// Client side of one open service stream.
struct Stream<'a> {
    client: &'a Client,
    id: u64,
    sink: Option<std::fs::File>,
    seq: u8,
    batch: usize,
    /// Set once stdout's reader has gone away.
    closed: bool,
}

impl<'a> Stream<'a> {
    async fn open(
        client: &'a Client,
        req: &OpenStreamRequest,
        sink: Option<std::fs::File>,
        batch: usize,
    ) -> Outcome<Stream<'a>> {
        let id = client.open_stream(req).await?.id;
        Ok(Self {
            client,
            id,
            sink,
            seq: 0,
            batch,
            closed: false,
        })
    }

    async fn consume<R: BufRead>(&mut self, reader: R) -> Outcome {
        let mut records: Vec<Vec<f64>> = Vec::with_capacity(self.batch);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Failure::new(ErrorClass::Io, format!("read failed: {e}")))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            records.push(parse_record(line, n + 1)?);
            if records.len() == self.batch {
                self.flush(&mut records).await?;
                if self.closed {
                    return Ok(());
                }
            }
        }
        self.flush(&mut records).await
    }

    async fn flush(&mut self, records: &mut Vec<Vec<f64>>) -> Outcome {
        if records.is_empty() {
            return Ok(());
        }
        let frame = eegchair_core::signal_io::Frame::from_records(records, ChannelId::COUNT)?;
        records.clear();
        let r = self
            .client
            .push_frames(self.id, &FrameRequest { samples: frame.samples })
            .await?;
        let mut out = std::io::stdout().lock();
        let stdout_failed = |e: std::io::Error| Failure::new(ErrorClass::Io, format!("stdout: {e}"));
        for d in r.decisions.iter().filter(|d| d.emitted()) {
            let line = serde_json::to_string(&DecisionLine::from(d))
                .map_err(|e| Failure::new(ErrorClass::Io, e.to_string()))?;
            match writeln!(out, "{line}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {
                    self.closed = true;
                    return Ok(());
                }
                r => r.map_err(stdout_failed)?,
            }
            if let Some(sink) = &mut self.sink {
                let wire = eegchair_core::vehicle::encode_command(d.command, self.seq);
                self.seq = self.seq.wrapping_add(1);
                sink.write_all(wire.bytes())
                    .map_err(|e| Failure::new(ErrorClass::Io, format!("wire sink: {e}")))?;
            }
        }
        match out.flush() {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {
                self.closed = true;
                Ok(())
            }
            r => r.map_err(stdout_failed),
        }
    }
}

fn parse_record(line: &str, n: usize) -> Outcome<Vec<f64>> {
    let mut fields = line.split(',');
    let t = fields.next().unwrap_or_default().trim();
    t.parse::<u64>()
        .map_err(|_| Failure::new(ErrorClass::Schema, format!("line {n}: bad sample index `{t}`")))?;
    let values =
        fields
            .map(|f| {
                f.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Failure::new(ErrorClass::Schema, format!("line {n}: bad sample value `{}`", f.trim()))
                })
            })
            .collect::<Outcome<Vec<f64>>>()?;
    if values.len() != ChannelId::COUNT {
        return Err(Failure::new(
            ErrorClass::Schema,
            format!(
                "line {n}: expected {} values after the index, found {}",
                ChannelId::COUNT,
                values.len()
            ),
        ));
    }
    Ok(values)
}
