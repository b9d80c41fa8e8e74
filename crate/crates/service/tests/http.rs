use std::sync::Arc;

use eegchair_api::*;
use eegchair_client::Client;
use eegchair_core::classify::{ClassifierKind, TrainedModel};
use eegchair_core::runtime::{Pipeline, PipelineConfig};
use eegchair_core::signal_io::{generate_synthetic_session, replay_frames, SynthSpec};
use eegchair_core::workflow::{EvalScope, TrainOptions};
use eegchair_core::{ChannelId, Command, ErrorClass};

async fn start() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(eegchair_service::serve(listener));
    Client::new(format!("http://{addr}"))
}

fn small() -> SynthSpec {
    SynthSpec {
        trials_per_command: 6,
        seed: 4,
        ..SynthSpec::default()
    }
}

async fn session(c: &Client) -> SessionText {
    let r = c.synth(&SynthRequest { spec: small() }).await.unwrap();
    assert_eq!(r.trials, 30);
    SessionText {
        csv: r.csv,
        sample_rate: 128.0,
    }
}

#[tokio::test]
async fn health_and_wire() {
    let c = start().await;
    assert_eq!(c.health().await.unwrap().status, "ok");
    let hex = c
        .wire_encode(&WireEncodeRequest {
            command: Command::Forward,
            seq: 7,
        })
        .await
        .unwrap();
    assert_eq!(hex.hex.len(), 10);
    let back = c.wire_decode(&hex).await.unwrap();
    assert_eq!((back.command, back.seq), (Command::Forward, 7));
    let err = c
        .wire_decode(&WireFrameHex {
            hex: "aa07460055".into(),
        })
        .await
        .unwrap_err();
    assert_eq!(err.class, ErrorClass::Schema);
    let err = c.wire_decode(&WireFrameHex { hex: "zz".into() }).await.unwrap_err();
    assert_eq!(err.class, ErrorClass::Usage);
}

#[tokio::test]
async fn train_eval_compare_round_trip() {
    let c = start().await;
    let s = session(&c).await;
    let opts = TrainOptions {
        classifier: ClassifierKind::Knn,
        seed: 2,
        ..TrainOptions::default()
    };
    let t = c
        .train(&TrainRequest {
            session: s.clone(),
            options: opts.clone(),
        })
        .await
        .unwrap();
    assert_eq!(t.selected_channels.len(), 5);
    let e = c
        .eval(&EvalRequest {
            model: t.model.clone(),
            session: s.clone(),
            scope: EvalScope::Auto,
        })
        .await
        .unwrap();
    assert!(e.held_out);
    assert_eq!(e.report, t.report);
    let cmp = c
        .compare(&CompareRequest {
            session: s,
            options: opts,
        })
        .await
        .unwrap();
    assert_eq!(cmp.report.rows.len(), 4);
    assert!(cmp.text.starts_with("Accuracy of different classifiers"));
}

#[tokio::test]
async fn errors_carry_their_class() {
    let c = start().await;
    let bad_csv = SessionText {
        csv: "trial,label,t,AF3\n0,LEFT,0,x\n".into(),
        sample_rate: 128.0,
    };
    let err = c
        .train(&TrainRequest {
            session: bad_csv,
            options: TrainOptions::default(),
        })
        .await
        .unwrap_err();
    assert_eq!(err.class, ErrorClass::Schema);
    let err = c
        .eval(&EvalRequest {
            model: "garbage".into(),
            session: session(&c).await,
            scope: EvalScope::All,
        })
        .await
        .unwrap_err();
    assert_eq!(err.class, ErrorClass::Schema);
    let err = c.stream_stats(999).await.unwrap_err();
    assert_eq!(err.class, ErrorClass::Usage);

    let raw = reqwest::Client::new()
        .post(format!("{}{TRAIN}", c.base_url()))
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status(), 400);
    let body: ErrorBody = raw.json().await.unwrap();
    assert_eq!(body.error.kind, ErrorClass::Usage);
    let missing = reqwest::Client::new()
        .get(format!("{}{STREAMS}/999/stats", c.base_url()))
        .send()
        .await
        .unwrap();
    assert_eq!(missing.status(), 404);
}

#[tokio::test]
async fn remote_stream_matches_local_pipeline() {
    let c = start().await;
    let s = session(&c).await;
    let t = c
        .train(&TrainRequest {
            session: s.clone(),
            options: TrainOptions::default(),
        })
        .await
        .unwrap();
    let ds = generate_synthetic_session(&small()).unwrap();
    let model = Arc::new(TrainedModel::from_text(&t.model).unwrap());
    let mut local = Pipeline::new(model, PipelineConfig::default(), &ChannelId::ALL, 128.0).unwrap();

    let id = c
        .open_stream(&OpenStreamRequest {
            model: t.model,
            config: PipelineConfig::default(),
            sample_rate: 128.0,
            channels: None,
        })
        .await
        .unwrap()
        .id;
    let mut remote = Vec::new();
    let mut expected = Vec::new();
    for f in replay_frames(&ds, 700, false).unwrap() {
        expected.extend(local.push(&f).unwrap());
        let r = c.push_frames(id, &FrameRequest { samples: f.samples }).await.unwrap();
        remote.extend(r.decisions);
    }
    assert_eq!(remote, expected);
    let stats = c.stream_stats(id).await.unwrap();
    assert_eq!(stats.windows_processed, expected.len() as u64);
    let err = c
        .push_frames(
            id,
            &FrameRequest {
                samples: vec![vec![0.0; 3]; 13],
            },
        )
        .await
        .unwrap_err();
    assert_eq!(err.class, ErrorClass::Schema);
    c.close_stream(id).await.unwrap();
    assert!(c.stream_stats(id).await.is_err());
}

#[tokio::test]
async fn simulate_and_bench() {
    let c = start().await;
    let s = session(&c).await;
    let t = c
        .train(&TrainRequest {
            session: s.clone(),
            options: TrainOptions::default(),
        })
        .await
        .unwrap();
    let sim = c
        .simulate(&SimulateRequest {
            model: t.model.clone(),
            session: s.clone(),
            pipeline: PipelineConfig::default(),
            simulation: Default::default(),
        })
        .await
        .unwrap();
    assert_eq!(sim.log.lines().count(), sim.steps + 1);
    assert!(sim.log.starts_with("clock,x,y,heading,cmd,front,rear,gated_cmd"));
    let b = c
        .bench(&BenchRequest {
            model: t.model,
            session: s,
            pipeline: PipelineConfig::default(),
        })
        .await
        .unwrap();
    assert_eq!(b.latencies_ms.len() as u64, b.stats.windows_processed);
}
