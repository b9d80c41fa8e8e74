use std::sync::Arc;

use eegchair_core::classify::{ClassifierKind, TrainedModel};
use eegchair_core::runtime::PipelineConfig;
use eegchair_core::signal_io::{generate_synthetic_session, write_session_csv, SynthSpec};
use eegchair_core::vehicle::{Rect, WorldSpec};
use eegchair_core::workflow::{
    bench_session, eval_session, simulate_session, train_session, EvalScope, SimulationOptions, TrainOptions,
};
use eegchair_core::{Command, Error};

fn small(seed: u64, per: usize) -> SynthSpec {
    SynthSpec {
        trials_per_command: per,
        seed,
        ..SynthSpec::default()
    }
}

#[test]
fn eval_on_training_session_reproduces_training_report() {
    let ds = generate_synthetic_session(&small(5, 10)).unwrap();
    for kind in [ClassifierKind::Svm, ClassifierKind::Knn] {
        let opts = TrainOptions {
            classifier: kind,
            seed: 9,
            ..TrainOptions::default()
        };
        let out = train_session(&ds, &opts).unwrap();
        assert_eq!(out.confusion.total(), 10);
        let text = out.model.to_text().unwrap();
        let loaded = TrainedModel::from_text(&text).unwrap();
        let ev = eval_session(&loaded, &ds, EvalScope::Auto).unwrap();
        assert!(ev.held_out);
        assert_eq!(ev.confusion, out.confusion);
        assert_eq!(ev.confusion.render_table(), out.confusion.render_table());
        let all = eval_session(&loaded, &ds, EvalScope::All).unwrap();
        assert_eq!(all.confusion.total(), 50);
    }
}

#[test]
fn training_is_deterministic() {
    let ds = generate_synthetic_session(&small(2, 6)).unwrap();
    for kind in ClassifierKind::ALL {
        let opts = TrainOptions {
            classifier: kind,
            seed: 4,
            ..TrainOptions::default()
        };
        let a = train_session(&ds, &opts).unwrap().model.to_text().unwrap();
        let b = train_session(&ds, &opts).unwrap().model.to_text().unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn synthesis_is_deterministic() {
    let csv = |seed| {
        let ds = generate_synthetic_session(&small(seed, 2)).unwrap();
        let mut buf = Vec::new();
        write_session_csv(&ds, &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(7), csv(7));
    assert_ne!(csv(7), csv(8));
}

#[test]
fn selection_uses_planted_channels() {
    let ds = generate_synthetic_session(&small(1, 6)).unwrap();
    let out = train_session(&ds, &TrainOptions::default()).unwrap();
    let mut sel = out.model.selected_channels().to_vec();
    sel.sort();
    let mut planted = SynthSpec::default()
        .channel_gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g == 1.0)
        .map(|(i, _)| eegchair_core::ChannelId::ALL[i])
        .collect::<Vec<_>>();
    planted.sort();
    assert_eq!(sel, planted);
    assert_eq!(out.model.n_features, 90);
}

#[test]
fn forward_only_session_ends_gated_before_the_wall() {
    let train_ds = generate_synthetic_session(&small(1, 8)).unwrap();
    let model = Arc::new(train_session(&train_ds, &TrainOptions::default()).unwrap().model);
    let drive = generate_synthetic_session(&SynthSpec {
        commands: vec![Command::Forward],
        ..small(11, 6)
    })
    .unwrap();
    let opts = SimulationOptions {
        world: WorldSpec {
            bounds: Rect::centered(2.0, 2.0),
            ..WorldSpec::default()
        },
        ..SimulationOptions::default()
    };
    let out = simulate_session(model, &drive, PipelineConfig::default(), &opts).unwrap();
    let last = out.log.last().unwrap();
    assert_eq!(last.cmd, Command::Forward);
    assert_eq!(last.gated_cmd, Command::Stop);
    assert!(out.gated_steps > 0);
    for r in &out.log {
        if r.gated_cmd == Command::Forward {
            assert!(r.front >= 0.3);
        }
    }
    assert!(out.final_state.x < 2.0 - 0.3 + 1e-9);
}

#[test]
fn bench_reports_every_window() {
    let ds = generate_synthetic_session(&small(1, 4)).unwrap();
    let model = Arc::new(train_session(&ds, &TrainOptions::default()).unwrap().model);
    let r = bench_session(model, &ds, PipelineConfig::default()).unwrap();
    assert_eq!(r.stats.windows_processed as usize, r.latencies_ms.len());
    assert_eq!(r.latencies_ms.len(), (20 * 1024 - 1024) / 512 + 1);
    assert!(r.stats.latency_p50_ms <= r.stats.latency_p95_ms);
}

#[test]
fn single_class_session_is_a_training_error() {
    let ds = generate_synthetic_session(&SynthSpec {
        commands: vec![Command::Left],
        ..small(1, 6)
    })
    .unwrap();
    let err = train_session(&ds, &TrainOptions::default()).unwrap_err();
    assert!(matches!(err, Error::SingleClass(1)), "{err}");
}
