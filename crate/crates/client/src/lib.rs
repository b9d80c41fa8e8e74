//! Thin async client for the eegchair HTTP service. One method per endpoint;
//! service errors come back with their original class.

use serde::de::DeserializeOwned;
use serde::Serialize;

use eegchair_api::*;
use eegchair_core::ErrorClass;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ClientError {
    pub class: ErrorClass,
    pub message: String,
}

impl ClientError {
    fn transport(e: reqwest::Error) -> Self {
        Self {
            class: ErrorClass::Io,
            message: format!("service unreachable: {e}"),
        }
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    /// `base_url` such as `http://127.0.0.1:8750`.
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: base_url.into().trim_end_matches('/').to_string(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> ClientResult<T> {
        let status = resp.status();
        let body = resp.bytes().await.map_err(ClientError::transport)?;
        if status.is_success() {
            return serde_json::from_slice(&body).map_err(|e| ClientError {
                class: ErrorClass::Io,
                message: format!("malformed service response: {e}"),
            });
        }
        match serde_json::from_slice::<ErrorBody>(&body) {
            Ok(b) => Err(ClientError {
                class: b.error.kind,
                message: b.error.message,
            }),
            Err(_) => Err(ClientError {
                class: ErrorClass::Io,
                message: format!("service returned {status}: {}", String::from_utf8_lossy(&body)),
            }),
        }
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> ClientResult<T> {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .map_err(ClientError::transport)?;
        Self::decode(resp).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> ClientResult<T> {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .map_err(ClientError::transport)?;
        Self::decode(resp).await
    }

    pub async fn health(&self) -> ClientResult<Health> {
        self.get(HEALTH).await
    }

    pub async fn synth(&self, req: &SynthRequest) -> ClientResult<SynthResponse> {
        self.post(SYNTH, req).await
    }

    pub async fn train(&self, req: &TrainRequest) -> ClientResult<TrainResponse> {
        self.post(TRAIN, req).await
    }

    pub async fn eval(&self, req: &EvalRequest) -> ClientResult<EvalResponse> {
        self.post(EVAL, req).await
    }

    pub async fn compare(&self, req: &CompareRequest) -> ClientResult<CompareResponse> {
        self.post(COMPARE, req).await
    }

    pub async fn open_stream(&self, req: &OpenStreamRequest) -> ClientResult<OpenStreamResponse> {
        self.post(STREAMS, req).await
    }

    pub async fn push_frames(&self, id: u64, req: &FrameRequest) -> ClientResult<FrameResponse> {
        self.post(&format!("{STREAMS}/{id}/frames"), req).await
    }

    pub async fn stream_stats(&self, id: u64) -> ClientResult<StreamStats> {
        self.get(&format!("{STREAMS}/{id}/stats")).await
    }

    /// Close a stream, returning its final statistics.
    pub async fn close_stream(&self, id: u64) -> ClientResult<StreamStats> {
        let resp = self
            .http
            .delete(format!("{}{STREAMS}/{id}", self.base))
            .send()
            .await
            .map_err(ClientError::transport)?;
        Self::decode(resp).await
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> ClientResult<SimulateResponse> {
        self.post(SIMULATE, req).await
    }

    pub async fn bench(&self, req: &BenchRequest) -> ClientResult<BenchResponse> {
        self.post(BENCH, req).await
    }

    pub async fn wire_encode(&self, req: &WireEncodeRequest) -> ClientResult<WireFrameHex> {
        self.post(WIRE_ENCODE, req).await
    }

    pub async fn wire_decode(&self, req: &WireFrameHex) -> ClientResult<WireDecodeResponse> {
        self.post(WIRE_DECODE, req).await
    }
}
