//! HTTP in-system test service.
//!
//! Embeds one simulated [`Board`] and exposes the in-system test surface as a
//! JSON API, plus the console page and a multipart BMP motion stream.

use std::convert::Infallible;
use std::future::IntoFuture;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use crate::board::{
    Board, BoardConfig, I2cAddress, I2cTransaction, LedAction, LedBank, PciIdentity, TxnStatus, VideoPipeline,
};
use crate::eeprom::{self, FpgaModel};
use crate::urd;
use crate::video::{self, Frame, VideoInput};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const STREAM_BOUNDARY: &str = "frame";
pub const FRAME_COUNTER_HEADER: &str = "x-frame-counter";
pub const CONSOLE_PAGE: &str = "videofpga.html";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub board: BoardConfig,
    /// Directory holding a built console; its `videofpga.html` replaces the
    /// placeholder page.
    pub console_dir: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(bind: SocketAddr, board_type: FpgaModel, uninitialized: bool) -> Self {
        ServerConfig { bind, board: BoardConfig::new(board_type, uninitialized), console_dir: None }
    }

    /// Loopback on an ephemeral port.
    pub fn ephemeral(board_type: FpgaModel, uninitialized: bool) -> Self {
        Self::new(SocketAddr::from(([127, 0, 0, 1], 0)), board_type, uninitialized)
    }
}

#[derive(Clone)]
struct AppState {
    board: Board,
    console_dir: Option<PathBuf>,
}

type ApiError = (StatusCode, Json<Value>);

fn api_error(status: StatusCode, message: impl Into<String>) -> ApiError {
    (status, Json(json!({ "error": message.into() })))
}

fn bad_request(message: impl Into<String>) -> ApiError {
    api_error(StatusCode::BAD_REQUEST, message)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("malformed body: {e}")))
}

pub fn hex16(v: u16) -> String {
    format!("{v:#06x}")
}

pub fn hex8(v: u8) -> String {
    format!("{v:#04x}")
}

pub fn board_type_name(board_type: Option<FpgaModel>) -> &'static str {
    board_type.map_or("unknown", FpgaModel::name)
}

pub fn identity_json(id: &PciIdentity) -> Value {
    json!({
        "vendor_id": hex16(id.vendor_id),
        "device_id": hex16(id.device_id),
        "subsystem_vendor_id": hex16(id.subsystem_vendor_id),
        "subsystem_device_id": hex16(id.subsystem_device_id),
        "driver_bound": id.driver_bound,
        "board_type": board_type_name(id.board_type),
    })
}

pub fn scan_json(addresses: &[I2cAddress]) -> Value {
    json!({ "addresses": addresses.iter().map(|a| hex8(a.value())).collect::<Vec<_>>() })
}

pub fn led_json(bank: LedBank) -> Value {
    json!({ "mask": hex8(bank.mask), "leds": bank.states() })
}

pub fn pipeline_json(p: &VideoPipeline) -> Value {
    json!({
        "input": p.input.to_string(),
        "running": p.running,
        "frame_counter": p.frame_counter,
        "fps": p.fps,
        "width": p.width,
        "height": p.height,
    })
}

pub fn router(board: Board, console_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/", get(index_page))
        .route("/streamer", get(streamer_page))
        .route("/videofpga.html", get(console_page))
        .route("/api/identity", get(identity))
        .route("/api/i2c/scan", get(i2c_scan))
        .route("/api/i2c/txn", post(i2c_txn))
        .route("/api/eeprom", get(eeprom_dump))
        .route("/api/eeprom/init", post(eeprom_init))
        .route("/api/led", get(led_get).post(led_post))
        .route("/api/video", get(video_get))
        .route("/api/video/input", post(video_input))
        .route("/api/video/start", post(video_start))
        .route("/api/video/stop", post(video_stop))
        .route("/api/grab", get(grab))
        .route("/stream", get(stream))
        .fallback(|| async { api_error(StatusCode::NOT_FOUND, "no such route") })
        .with_state(AppState { board, console_dir })
}

async fn identity(State(s): State<AppState>) -> Json<Value> {
    Json(identity_json(&s.board.pci_identify()))
}

async fn i2c_scan(State(s): State<AppState>) -> Json<Value> {
    Json(scan_json(&s.board.i2c_scan()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AddressField {
    Number(u64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TxnRequest {
    address: AddressField,
    #[serde(default)]
    write: Vec<u64>,
    #[serde(default)]
    read: u64,
}

fn parse_address(field: &AddressField) -> Result<I2cAddress, ApiError> {
    let raw = match field {
        AddressField::Number(n) => *n,
        AddressField::Text(t) => {
            let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => t.parse(),
            };
            parsed.map_err(|_| bad_request(format!("malformed address `{t}`")))?
        }
    };
    u8::try_from(raw)
        .ok()
        .and_then(|v| I2cAddress::new(v).ok())
        .ok_or_else(|| bad_request(format!("address {raw:#x} outside 0x08..=0x77")))
}

async fn i2c_txn(State(s): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: TxnRequest = parse_body(&body)?;
    let address = parse_address(&req.address)?;
    let write = req
        .write
        .iter()
        .map(|&b| u8::try_from(b).map_err(|_| bad_request(format!("write byte {b} exceeds 8 bits"))))
        .collect::<Result<Vec<u8>, _>>()?;
    let read = usize::try_from(req.read).map_err(|_| bad_request("read count too large"))?;
    let txn = I2cTransaction::new(address, write, read).map_err(|e| bad_request(e.to_string()))?;
    let result = s.board.i2c_transaction(&txn);
    Ok(match result.status {
        TxnStatus::Ack => Json(json!({ "status": "ack", "read": result.read_bytes })).into_response(),
        TxnStatus::AddressNack => (StatusCode::CONFLICT, Json(json!({ "status": "nack" }))).into_response(),
        TxnStatus::WriteRejected => {
            (StatusCode::CONFLICT, Json(json!({ "status": "write_rejected" }))).into_response()
        }
    })
}

async fn eeprom_dump(State(s): State<AppState>) -> Response {
    let dump = eeprom::hexdump(&s.board.eeprom_image());
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], dump).into_response()
}

#[derive(Deserialize)]
struct EepromInitRequest {
    board_type: FpgaModel,
}

/// Result of provisioning the EEPROM through the bus with the generated script.
pub fn provision_json(board: &Board, board_type: FpgaModel) -> Value {
    let text = urd::provisioning_script(board_type);
    let script = urd::parse("upcb1b.urd", &text).expect("generated script parses");
    let report = urd::execute(&script, &mut &*board);
    let validation = eeprom::validate(&board.eeprom_image());
    json!({
        "script": if report.passed() { "pass" } else { "fail" },
        "failing_line": report.failing_line(),
        "valid": validation.is_ok(),
        "reason": validation.err().map(|e| e.0),
        "identity": identity_json(&board.pci_identify()),
        "report": urd::format_report(&report),
    })
}

async fn eeprom_init(State(s): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: EepromInitRequest = parse_body(&body)?;
    let board = s.board.clone();
    let result = tokio::task::spawn_blocking(move || provision_json(&board, req.board_type))
        .await
        .map_err(|e| api_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(result))
}

async fn led_get(State(s): State<AppState>) -> Json<Value> {
    Json(led_json(s.board.leds()))
}

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum LedRequest {
    All { all: bool },
    One { index: u64, on: bool },
}

async fn led_post(State(s): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let action = match parse_body::<LedRequest>(&body)? {
        LedRequest::All { all: true } => LedAction::AllOn,
        LedRequest::All { all: false } => LedAction::AllOff,
        LedRequest::One { index, on } => {
            let index = u8::try_from(index).map_err(|_| bad_request(format!("LED index {index} outside 0..=7")))?;
            LedAction::Set { index, on }
        }
    };
    match s.board.led_control(action) {
        Ok(bank) => Ok(Json(led_json(bank))),
        Err(e @ crate::board::BoardError::BadIndex(_)) => Err(bad_request(e.to_string())),
        Err(e) => Err(api_error(StatusCode::CONFLICT, e.to_string())),
    }
}

async fn video_get(State(s): State<AppState>) -> Json<Value> {
    Json(pipeline_json(&s.board.pipeline()))
}

#[derive(Deserialize)]
struct InputRequest {
    input: String,
}

async fn video_input(State(s): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: InputRequest = parse_body(&body)?;
    let input: VideoInput = req.input.parse().map_err(bad_request)?;
    Ok(Json(pipeline_json(&s.board.select_input(input))))
}

/// Maps the driver-error state to 503 and lazily configures the FPGA.
fn ensure_capture_ready(board: &Board) -> Result<(), ApiError> {
    if board.pci_identify().board_type.is_none() {
        return Err(api_error(
            StatusCode::SERVICE_UNAVAILABLE,
            "board not identified: EEPROM content does not validate",
        ));
    }
    board
        .ensure_fpga_loaded()
        .map(drop)
        .map_err(|e| api_error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()))
}

async fn video_start(State(s): State<AppState>) -> Result<Json<Value>, ApiError> {
    ensure_capture_ready(&s.board)?;
    let p = s.board.start_stream().map_err(|e| api_error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()))?;
    Ok(Json(pipeline_json(&p)))
}

async fn video_stop(State(s): State<AppState>) -> Json<Value> {
    Json(pipeline_json(&s.board.stop_stream()))
}

#[derive(Deserialize)]
struct GrabQuery {
    format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrabFormat {
    Ppm,
    Bmp,
}

impl GrabFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            GrabFormat::Ppm => "image/x-portable-pixmap",
            GrabFormat::Bmp => "image/bmp",
        }
    }

    pub fn encode(self, frame: &Frame) -> Vec<u8> {
        match self {
            GrabFormat::Ppm => video::encode_ppm(frame),
            GrabFormat::Bmp => video::encode_bmp(frame),
        }
    }
}

async fn capture(board: &Board) -> Result<Frame, ApiError> {
    let board = board.clone();
    tokio::task::spawn_blocking(move || board.capture_frame())
        .await
        .map_err(|e| api_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| api_error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()))
}

async fn grab(State(s): State<AppState>, Query(q): Query<GrabQuery>) -> Result<Response, ApiError> {
    let format = match q.format.as_deref() {
        None | Some("bmp") => GrabFormat::Bmp,
        Some("ppm") => GrabFormat::Ppm,
        Some(other) => return Err(bad_request(format!("unknown format `{other}`"))),
    };
    ensure_capture_ready(&s.board)?;
    let frame = capture(&s.board).await?;
    let mut resp = format.encode(&frame).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(format.content_type()));
    headers.insert(FRAME_COUNTER_HEADER, HeaderValue::from(frame.counter));
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    Ok(resp)
}

/// One multipart part: boundary line, part headers, BMP payload, CRLF.
pub fn stream_part(frame: &Frame) -> Vec<u8> {
    let bmp = video::encode_bmp(frame);
    let head = format!(
        "--{STREAM_BOUNDARY}\r\nContent-Type: image/bmp\r\nContent-Length: {}\r\nX-Frame-Counter: {}\r\n\r\n",
        bmp.len(),
        frame.counter
    );
    let mut part = Vec::with_capacity(head.len() + bmp.len() + 2);
    part.extend_from_slice(head.as_bytes());
    part.extend_from_slice(&bmp);
    part.extend_from_slice(b"\r\n");
    part
}

async fn stream(State(s): State<AppState>) -> Result<Response, ApiError> {
    ensure_capture_ready(&s.board)?;
    let fps = s.board.pipeline().fps;
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / f64::from(fps)));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    // Each tick grabs a fresh frame; dropping the body on disconnect drops
    // the ticker with it.
    let parts = futures::stream::unfold((s.board, ticker), |(board, mut ticker)| async move {
        ticker.tick().await;
        let frame = capture(&board).await.ok()?;
        Some((Ok::<_, Infallible>(Bytes::from(stream_part(&frame))), (board, ticker)))
    });
    let mut resp = Body::from_stream(parts).into_response();
    let headers = resp.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_str(&format!("multipart/x-mixed-replace; boundary={STREAM_BOUNDARY}")).unwrap(),
    );
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    Ok(resp)
}

const PLACEHOLDER_CONSOLE: &str = r#"<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>VideoFPGA test server</title></head>
<body>
<h1>VideoFPGA test server</h1>
<p>The browser console is not installed. The test API is available:</p>
<ul>
<li>GET <a href="/api/identity">/api/identity</a></li>
<li>GET <a href="/api/grab">/api/grab</a>?format=ppm|bmp (Grab image)</li>
<li>GET <a href="/api/i2c/scan">/api/i2c/scan</a> (I2C scan and detection)</li>
<li>POST /api/i2c/txn</li>
<li>GET/POST <a href="/api/led">/api/led</a> (Control LED test)</li>
<li>GET <a href="/api/eeprom">/api/eeprom</a> (Query EEPROM), POST /api/eeprom/init</li>
<li>POST /api/video/input, /api/video/start, /api/video/stop</li>
<li>GET <a href="/stream">/stream</a> (Streaming video test)</li>
</ul>
</body>
</html>
"#;

async fn console_page(State(s): State<AppState>) -> Html<String> {
    if let Some(dir) = &s.console_dir {
        if let Ok(page) = tokio::fs::read_to_string(dir.join(CONSOLE_PAGE)).await {
            return Html(page);
        }
    }
    Html(PLACEHOLDER_CONSOLE.to_owned())
}

async fn index_page() -> Html<&'static str> {
    Html(
        r#"<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>Video server</title></head>
<body>
<h1>Video server</h1>
<ul>
<li><a href="/streamer">Streamer Output</a></li>
<li><a href="/videofpga.html">Board test page</a></li>
</ul>
</body>
</html>
"#,
    )
}

async fn streamer_page() -> Html<&'static str> {
    Html(
        r#"<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>Streamer Output</title></head>
<body>
<h1>Streamer Output</h1>
<p><a href="/stream">All live cams</a></p>
<img src="/stream" alt="live video">
</body>
</html>
"#,
    )
}

/// Binds the listener and serves until `shutdown` resolves.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    board: Board,
    console_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(board, console_dir)).with_graceful_shutdown(shutdown).await
}

/// A server running on its own runtime thread. Stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    board: Board,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn start(config: ServerConfig) -> std::io::Result<Self> {
        let board = Board::with_config(config.board);
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(config.bind))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel();
        let served = board.clone();
        let thread = thread::Builder::new().name("vfp-server".into()).spawn(move || {
            let result = runtime.block_on(async move {
                let app = router(served, config.console_dir);
                tokio::select! {
                    r = axum::serve(listener, app).into_future() => r,
                    _ = rx => Ok(()),
                }
            });
            runtime.shutdown_timeout(Duration::from_secs(1));
            result
        })?;
        Ok(ServerHandle { addr, board, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// The served board, for inspecting state from tests.
    pub fn board(&self) -> &Board {
        &self.board
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}
