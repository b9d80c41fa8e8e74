//! HTTP/JSON front end over `eegchair_core::workflow` and the streaming
//! runtime. Heavy work runs on the blocking pool; each open stream owns one
//! `Pipeline` behind its own lock.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;

use eegchair_api::*;
use eegchair_core::classify::{ConfusionMatrix, TrainedModel};
use eegchair_core::runtime::Pipeline;
use eegchair_core::signal_io::{generate_synthetic_session, read_session_csv, write_session_csv, Frame};
use eegchair_core::vehicle::{decode_command, encode_command, write_episode_log};
use eegchair_core::workflow::{bench_session, compare_session, eval_session, simulate_session, train_session};
use eegchair_core::{ChannelId, Error, ErrorClass, SessionDataset};

const BODY_LIMIT: usize = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub detail: ErrorDetail,
    pub status: StatusCode,
}

impl ApiError {
    pub fn new(kind: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            detail: ErrorDetail {
                kind,
                message: message.into(),
            },
            status: status_of(kind),
        }
    }

    fn no_stream(id: u64) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            ..Self::new(ErrorClass::Usage, format!("no stream with id {id}"))
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self::new(e.class(), e.to_string())
    }
}

pub fn status_of(kind: ErrorClass) -> StatusCode {
    match kind {
        ErrorClass::Usage => StatusCode::BAD_REQUEST,
        ErrorClass::Schema | ErrorClass::Training => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorClass::Io => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.detail })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorClass::Usage, format!("bad request body: {e}")))
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map(Json),
        Err(e) => Err(ApiError::new(ErrorClass::Io, format!("worker failed: {e}"))),
    }
}

fn session(s: &SessionText) -> Result<SessionDataset, ApiError> {
    Ok(read_session_csv(s.csv.as_bytes(), s.sample_rate)?)
}

fn model(text: &str) -> Result<Arc<TrainedModel>, ApiError> {
    Ok(Arc::new(TrainedModel::from_text(text)?))
}

fn session_csv(ds: &SessionDataset) -> Result<String, ApiError> {
    let mut buf = Vec::new();
    write_session_csv(ds, &mut buf).map_err(|e| ApiError::new(ErrorClass::Io, e.to_string()))?;
    String::from_utf8(buf).map_err(|e| ApiError::new(ErrorClass::Io, e.to_string()))
}

fn accuracy_report(c: &ConfusionMatrix) -> AccuracyReport {
    AccuracyReport {
        overall_accuracy: c.overall_accuracy(),
        table: c.render_table(),
        csv: c.to_csv(),
        matrix_csv: c.matrix_csv(),
    }
}

#[derive(Default)]
struct Streams {
    next: AtomicU64,
    open: Mutex<HashMap<u64, Arc<Mutex<Pipeline>>>>,
}

impl Streams {
    fn get(&self, id: u64) -> Result<Arc<Mutex<Pipeline>>, ApiError> {
        self.open
            .lock()
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::no_stream(id))
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    streams: Arc<Streams>,
}

pub fn router() -> Router {
    Router::new()
        .route(HEALTH, get(health))
        .route(SYNTH, post(synth))
        .route(TRAIN, post(train))
        .route(EVAL, post(eval))
        .route(COMPARE, post(compare))
        .route(STREAMS, post(open_stream))
        .route(&format!("{STREAMS}/{{id}}"), axum::routing::delete(close_stream))
        .route(&format!("{STREAMS}/{{id}}/frames"), post(push_frames))
        .route(&format!("{STREAMS}/{{id}}/stats"), get(stream_stats))
        .route(SIMULATE, post(simulate))
        .route(BENCH, post(bench))
        .route(WIRE_ENCODE, post(wire_encode))
        .route(WIRE_DECODE, post(wire_decode))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(AppState::default())
}

/// Serve until the listener fails or the task is dropped.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

/// Serve until ctrl-c.
pub async fn serve_until_signal(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn synth(body: Bytes) -> ApiResult<SynthResponse> {
    let req: SynthRequest = parse(&body)?;
    blocking(move || {
        let ds = generate_synthetic_session(&req.spec)?;
        Ok(SynthResponse {
            csv: session_csv(&ds)?,
            trials: ds.len(),
            fingerprint: ds.fingerprint(),
        })
    })
    .await
}

async fn train(body: Bytes) -> ApiResult<TrainResponse> {
    let req: TrainRequest = parse(&body)?;
    blocking(move || {
        let ds = session(&req.session)?;
        let out = train_session(&ds, &req.options)?;
        Ok(TrainResponse {
            model: out.model.to_text()?,
            report: accuracy_report(&out.confusion),
            selected_channels: out.model.selected_channels().to_vec(),
            rejected_trials: out.rejected,
        })
    })
    .await
}

async fn eval(body: Bytes) -> ApiResult<EvalResponse> {
    let req: EvalRequest = parse(&body)?;
    blocking(move || {
        let m = model(&req.model)?;
        let ds = session(&req.session)?;
        let out = eval_session(&m, &ds, req.scope)?;
        Ok(EvalResponse {
            report: accuracy_report(&out.confusion),
            held_out: out.held_out,
            rejected_trials: out.rejected,
        })
    })
    .await
}

async fn compare(body: Bytes) -> ApiResult<CompareResponse> {
    let req: CompareRequest = parse(&body)?;
    blocking(move || {
        let ds = session(&req.session)?;
        let report = compare_session(&ds, &req.options)?;
        Ok(CompareResponse {
            text: report.render_text(),
            csv: report.to_csv(),
            report,
        })
    })
    .await
}

async fn open_stream(State(state): State<AppState>, body: Bytes) -> ApiResult<OpenStreamResponse> {
    let req: OpenStreamRequest = parse(&body)?;
    let m = model(&req.model)?;
    let roster = req.channels.unwrap_or_else(|| ChannelId::ALL.to_vec());
    let pipeline = Pipeline::new(m, req.config, &roster, req.sample_rate)?;
    let id = state.streams.next.fetch_add(1, Ordering::Relaxed) + 1;
    state.streams.open.lock().insert(id, Arc::new(Mutex::new(pipeline)));
    tracing::debug!(id, "stream opened");
    Ok(Json(OpenStreamResponse { id }))
}

async fn push_frames(State(state): State<AppState>, Path(id): Path<u64>, body: Bytes) -> ApiResult<FrameResponse> {
    let req: FrameRequest = parse(&body)?;
    let pipeline = state.streams.get(id)?;
    blocking(move || {
        let frame = Frame::new(req.samples)?;
        let decisions = pipeline.lock().push(&frame)?;
        Ok(FrameResponse { decisions })
    })
    .await
}

async fn stream_stats(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<StreamStats> {
    let pipeline = state.streams.get(id)?;
    let stats = pipeline.lock().stats();
    Ok(Json(stats))
}

async fn close_stream(State(state): State<AppState>, Path(id): Path<u64>) -> ApiResult<StreamStats> {
    let pipeline = state
        .streams
        .open
        .lock()
        .remove(&id)
        .ok_or_else(|| ApiError::no_stream(id))?;
    let stats = pipeline.lock().stats();
    tracing::debug!(id, "stream closed");
    Ok(Json(stats))
}

async fn simulate(body: Bytes) -> ApiResult<SimulateResponse> {
    let req: SimulateRequest = parse(&body)?;
    blocking(move || {
        let m = model(&req.model)?;
        let ds = session(&req.session)?;
        let out = simulate_session(m, &ds, req.pipeline, &req.simulation)?;
        let mut log = Vec::new();
        write_episode_log(&out.log, &mut log).map_err(|e| ApiError::new(ErrorClass::Io, e.to_string()))?;
        Ok(SimulateResponse {
            log: String::from_utf8(log).map_err(|e| ApiError::new(ErrorClass::Io, e.to_string()))?,
            steps: out.log.len(),
            decisions: out.decisions,
            final_state: out.final_state,
            gated_steps: out.gated_steps,
        })
    })
    .await
}

async fn bench(body: Bytes) -> ApiResult<BenchResponse> {
    let req: BenchRequest = parse(&body)?;
    blocking(move || {
        let m = model(&req.model)?;
        let ds = session(&req.session)?;
        let r = bench_session(m, &ds, req.pipeline)?;
        Ok(BenchResponse {
            stats: r.stats,
            latencies_ms: r.latencies_ms,
        })
    })
    .await
}

async fn wire_encode(body: Bytes) -> ApiResult<WireFrameHex> {
    let req: WireEncodeRequest = parse(&body)?;
    Ok(Json(WireFrameHex {
        hex: hex::encode(encode_command(req.command, req.seq).bytes()),
    }))
}

async fn wire_decode(body: Bytes) -> ApiResult<WireDecodeResponse> {
    let req: WireFrameHex = parse(&body)?;
    let bytes = hex::decode(req.hex.trim()).map_err(|e| ApiError::new(ErrorClass::Usage, format!("bad hex: {e}")))?;
    let (command, seq) = decode_command(&bytes).map_err(Error::from)?;
    Ok(Json(WireDecodeResponse { command, seq }))
}
