use std::convert::Infallible;
use std::future::Future;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream;
use layoutsplat::io::{encode_png, CheckpointError};
use serde::Deserialize;
use serde_json::json;

use crate::edit::{EditError, EditOp};
use crate::session::{ControlError, ControlRequest, Published, Session};
use crate::view::{encode_frame, render_view, CameraSpec, Radius};

pub const DEFAULT_PORT: u16 = 7334;
/// Environment variable overriding [`DEFAULT_PORT`].
pub const PORT_ENV: &str = "LAYOUTSPLAT_PORT";

type AppState = Arc<Session>;

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

async fn get_scene(State(session): State<AppState>) -> Response {
    Json(session.report()).into_response()
}

async fn post_edit(State(session): State<AppState>, Json(op): Json<EditOp>) -> Response {
    match blocking(move || session.edit(op)).await {
        Ok(step) => Json(json!({ "applied_at_step": step })).into_response(),
        Err(e @ EditError::UnknownTarget(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e @ EditError::SessionClosed) => error(StatusCode::SERVICE_UNAVAILABLE, e),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
    }
}

async fn post_control(State(session): State<AppState>, Json(req): Json<ControlRequest>) -> Response {
    match blocking(move || session.control(req)).await {
        Ok(report) => Json(report).into_response(),
        Err(e @ ControlError::InvalidTransition { .. }) => error(StatusCode::CONFLICT, e),
        Err(e @ ControlError::Closed) => error(StatusCode::SERVICE_UNAVAILABLE, e),
        Err(e) => error(StatusCode::UNPROCESSABLE_ENTITY, e),
    }
}

fn render_published(session: &Session, published: &Published, spec: &CameraSpec) -> Result<layoutsplat::raster::Image, Response> {
    let cfg = &session.config().optimizer;
    render_view(&published.state, spec, &cfg.scene_cameras, cfg.background, &cfg.raster)
        .map_err(|e| error(StatusCode::BAD_REQUEST, e))
}

async fn get_render(State(session): State<AppState>, Query(spec): Query<CameraSpec>) -> Response {
    let published = session.latest();
    let result = blocking(move || render_published(&session, &published, &spec).map(|img| encode_png(&img))).await;
    match result {
        Ok(png) => ([(header::CONTENT_TYPE, "image/png")], png).into_response(),
        Err(resp) => resp,
    }
}

/// Camera fields are spelled out because flattened query structs lose
/// numeric parsing.
#[derive(Deserialize)]
struct FramesQuery {
    #[serde(default = "one")]
    cadence: usize,
    #[serde(default)]
    azimuth: f64,
    elevation: Option<f64>,
    radius: Option<Radius>,
    width: Option<usize>,
    height: Option<usize>,
}

fn one() -> usize {
    1
}

/// Pushes a frame for every published step that is a positive multiple of
/// `cadence`. A slow reader only ever sees the newest publication, so
/// frames can be skipped but never reordered.
async fn get_frames(State(session): State<AppState>, Query(q): Query<FramesQuery>) -> Response {
    if q.cadence == 0 {
        return error(StatusCode::BAD_REQUEST, "cadence must be >= 1");
    }
    let spec = CameraSpec { azimuth: q.azimuth, elevation: q.elevation, radius: q.radius, width: q.width, height: q.height };
    if let Err(resp) = render_published(&session, &session.latest(), &CameraSpec { width: Some(1), height: Some(1), ..spec.clone() }) {
        return resp;
    }
    let mut rx = session.subscribe();
    rx.borrow_and_update();
    let last = rx.borrow().state.step;
    let cadence = q.cadence;
    let frames = stream::unfold((rx, last, session, spec), move |(mut rx, mut last, session, spec)| async move {
        loop {
            rx.changed().await.ok()?;
            let published = rx.borrow_and_update().clone();
            let step = published.state.step;
            if step <= last || step % cadence != 0 {
                continue;
            }
            last = step;
            let s = session.clone();
            let sp = spec.clone();
            let frame = blocking(move || render_published(&s, &published, &sp).ok().map(|img| encode_frame(step as u64, &img))).await?;
            return Some((Ok::<_, Infallible>(Bytes::from(frame)), (rx, last, session, spec)));
        }
    });
    ([(header::CONTENT_TYPE, "application/octet-stream")], Body::from_stream(frames)).into_response()
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/scene", get(get_scene))
        .route("/edit", post(post_edit))
        .route("/control", post(post_control))
        .route("/render", get(get_render))
        .route("/frames", get(get_frames))
        .with_state(session)
}

/// Serves until `shutdown` resolves, then shuts the session down (closing
/// frame streams and writing the checkpoint) before returning.
pub async fn serve(
    listener: tokio::net::TcpListener,
    session: Arc<Session>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<Arc<Published>, ServeError> {
    let closing = session.clone();
    let graceful = async move {
        shutdown.await;
        blocking(move || closing.stop_worker()).await;
    };
    axum::serve(listener, router(session.clone())).with_graceful_shutdown(graceful).await?;
    Ok(blocking(move || session.shutdown()).await?)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
