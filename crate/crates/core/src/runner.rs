//! The two test phases.
//!
//! Phase A (functional) runs in-process against a fresh simulated board:
//! identification, EEPROM provisioning, re-identification, FPGA load and a
//! streaming smoke test. Phase B (in-system) drives a running test server
//! over HTTP: main page, grab, I2C scan, LEDs, EEPROM query and the motion
//! stream.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::board::{
    Board, BoardConfig, I2cAddress, I2cBus, I2cTransaction, TransactionResult, TxnStatus, DECODER_DEVICE_ID,
    FPGA_STATUS_REG_MODEL,
};
use crate::eeprom::{self, FpgaModel};
use crate::server::STREAM_BOUNDARY;
use crate::urd;
use crate::video::{self, Frame, VideoInput, COLOR_BARS};

/// Deadline for each HTTP request.
pub const HTTP_STEP_TIMEOUT: Duration = Duration::from_secs(5);
/// How long Phase B watches the motion stream.
pub const STREAM_WINDOW: Duration = Duration::from_secs(1);
/// How long Phase A streams each input.
pub const SMOKE_WINDOW_PER_INPUT: Duration = Duration::from_millis(500);
pub const SMOKE_MIN_FRAMES_PER_INPUT: usize = 3;
pub const STREAM_MIN_PARTS: usize = 2;

/// Addresses every stock board must answer on.
pub const EXPECTED_I2C_DEVICES: [u8; 6] = [0x18, 0x20, 0x24, 0x30, 0x31, 0x50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pass,
    Fail,
    Skip,
}

impl StepStatus {
    fn tag(self) -> &'static str {
        match self {
            StepStatus::Pass => "PASS",
            StepStatus::Fail => "FAIL",
            StepStatus::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub name: String,
    pub status: StepStatus,
    pub detail: String,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub phase: Phase,
    pub steps: Vec<Step>,
    pub overall: Verdict,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }

    pub fn step(&self, name: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.name == name)
    }

    /// 0 on pass, 1 on fail.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

struct ReportBuilder {
    phase: Phase,
    steps: Vec<Step>,
}

impl ReportBuilder {
    fn new(phase: Phase) -> Self {
        ReportBuilder { phase, steps: Vec::new() }
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<String, String>) -> bool {
        let start = Instant::now();
        let result = f();
        let duration_ms = start.elapsed().as_millis() as u64;
        let (status, detail) = match result {
            Ok(d) => (StepStatus::Pass, d),
            Err(d) => (StepStatus::Fail, d),
        };
        self.steps.push(Step { name: name.to_owned(), status, detail, duration_ms });
        status == StepStatus::Pass
    }

    fn skip(&mut self, name: &str, reason: &str) {
        self.steps.push(Step {
            name: name.to_owned(),
            status: StepStatus::Skip,
            detail: reason.to_owned(),
            duration_ms: 0,
        });
    }

    fn finish(self) -> TestReport {
        let overall = if self.steps.iter().any(|s| s.status == StepStatus::Fail) {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        TestReport { phase: self.phase, steps: self.steps, overall }
    }
}

pub const FUNCTIONAL_STEPS: [&str; 5] = ["identification", "eeprom-init", "re-identification", "fpga-load", "streaming"];
pub const INSYSTEM_STEPS: [&str; 6] = ["main-page", "grab", "i2c-scan", "led", "eeprom-query", "streaming"];

/// Phase A on a freshly built board.
pub fn run_functional(board_type: FpgaModel, uninitialized_start: bool) -> TestReport {
    let board = Board::with_config(BoardConfig::new(board_type, uninitialized_start));
    run_functional_on(&board, board_type, uninitialized_start)
}

/// Phase A against an existing board, e.g. one with faults injected.
pub fn run_functional_on(board: &Board, board_type: FpgaModel, uninitialized_start: bool) -> TestReport {
    let mut report = ReportBuilder::new(Phase::A);

    report.run("identification", || {
        let id = board.pci_identify();
        if id.device_id != DECODER_DEVICE_ID {
            return Err(format!("device id {:#06x}, expected {DECODER_DEVICE_ID:#06x}", id.device_id));
        }
        match (uninitialized_start, id.driver_bound) {
            (true, false) => Ok(format!(
                "{:#06x}:{:#06x} present, driver not bound (!) as expected before provisioning",
                id.vendor_id, id.device_id
            )),
            (false, true) => Ok(format!(
                "{:#06x}:{:#06x} present, driver bound as {}",
                id.vendor_id,
                id.device_id,
                crate::server::board_type_name(id.board_type)
            )),
            (true, true) => Err("driver bound before provisioning".into()),
            (false, false) => Err("driver not bound (!) on a provisioned board".into()),
        }
    });

    let provisioned = report.run("eeprom-init", || {
        let text = urd::provisioning_script(board_type);
        let script = urd::parse("upcb1b.urd", &text).map_err(|e| e.to_string())?;
        let run = urd::execute(&script, &mut &*board);
        if !run.passed() {
            let failed = run.outcomes.last().expect("a failing run has an outcome");
            return Err(format!("script failed at line {}: {:?}", failed.line, failed.outcome));
        }
        let image = board.eeprom_image();
        eeprom::validate(&image).map_err(|e| format!("EEPROM does not validate after provisioning: {e}"))?;
        Ok(format!(
            "{} commands ok, byte 2 = {:#04x}, checksum {:#04x}",
            run.outcomes.len(),
            image.0[eeprom::OFFSET_BOARD_TYPE],
            image.0[eeprom::OFFSET_CHECKSUM]
        ))
    });

    let rest = ["re-identification", "fpga-load", "streaming"];
    if !provisioned {
        for name in rest {
            report.skip(name, "board not provisioned");
        }
        return report.finish();
    }

    let identified = report.run("re-identification", || {
        let id = board.pci_identify();
        if !id.driver_bound {
            return Err("driver not bound after provisioning".into());
        }
        match id.board_type {
            Some(t) if t == board_type => Ok(format!("driver bound, board type {t}")),
            other => Err(format!("board type {}, expected {board_type}", crate::server::board_type_name(other))),
        }
    });
    if !identified {
        for name in &rest[1..] {
            report.skip(name, "board not identified");
        }
        return report.finish();
    }

    let loaded = report.run("fpga-load", || {
        let state = board.load_fpga().map_err(|e| e.to_string())?;
        let txn = I2cTransaction::read_at(I2cAddress::FPGA_STATUS, FPGA_STATUS_REG_MODEL, 1).expect("valid");
        let r = board.i2c_transaction(&txn);
        if !r.is_ack() {
            return Err(format!("status register read failed: {}", r.status));
        }
        let code = r.read_bytes[0];
        if code != board_type.code() {
            return Err(format!("status 0x31/0x01 = {code:#04x}, expected {:#04x}", board_type.code()));
        }
        Ok(format!("{} loaded, status 0x31/0x01 = {code:#04x}", state.config_file))
    });
    if !loaded {
        report.skip("streaming", "FPGA not configured");
        return report.finish();
    }

    report.run("streaming", || streaming_smoke(board));
    report.finish()
}

fn expected_bar0(input: VideoInput) -> (u8, u8, u8) {
    match input {
        VideoInput::Vid0 => COLOR_BARS[0],
        VideoInput::Vid1 => COLOR_BARS[7],
    }
}

fn streaming_smoke(board: &Board) -> Result<String, String> {
    let rx = board.subscribe();
    board.select_input(VideoInput::Vid1);
    board.start_stream().map_err(|e| e.to_string())?;
    thread::sleep(SMOKE_WINDOW_PER_INPUT);
    board.select_input(VideoInput::Vid0);
    thread::sleep(SMOKE_WINDOW_PER_INPUT);
    board.stop_stream();

    let frames: Vec<Frame> = rx.try_iter().collect();
    let mut digests = HashSet::new();
    let mut per_input = [0usize; 2];
    for f in &frames {
        if !digests.insert(video::frame_digest(f)) {
            return Err(format!("frame {} repeats an earlier frame", f.counter));
        }
        if f.bar_color(0) != expected_bar0(f.source) {
            return Err(format!("frame {} on {} has wrong palette orientation", f.counter, f.source));
        }
        per_input[f.source as usize] += 1;
    }
    let [vid0, vid1] = per_input;
    if vid1 < SMOKE_MIN_FRAMES_PER_INPUT || vid0 < SMOKE_MIN_FRAMES_PER_INPUT {
        return Err(format!(
            "too few frames: vid1 {vid1}, vid0 {vid0} (need {SMOKE_MIN_FRAMES_PER_INPUT} each)"
        ));
    }
    Ok(format!("{} distinct frames (vid1 {vid1}, vid0 {vid0}), palettes correct", frames.len()))
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("could not reach test server at {url}: {message}")]
    ConnectionFailed { url: String, message: String },
}

/// Phase B against a running test server.
pub fn run_insystem(base_url: &str) -> Result<TestReport, RunnerError> {
    let base = base_url.trim_end_matches('/').to_owned();
    let client = reqwest::blocking::Client::builder()
        .timeout(HTTP_STEP_TIMEOUT)
        .build()
        .map_err(|e| RunnerError::ConnectionFailed { url: base.clone(), message: e.to_string() })?;
    let url = |path: &str| format!("{base}{path}");

    let mut report = ReportBuilder::new(Phase::B);
    let mut unreachable = None;
    report.run("main-page", || {
        let resp = client.get(url("/videofpga.html")).send().map_err(|e| {
            unreachable = Some(e.to_string());
            e.to_string()
        })?;
        let status = resp.status();
        let body = resp.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        if !body.contains("<html") {
            return Err("response is not an HTML page".into());
        }
        Ok(format!("HTTP {status}, {} bytes", body.len()))
    });
    if let Some(message) = unreachable {
        return Err(RunnerError::ConnectionFailed { url: base, message });
    }

    report.run("grab", || {
        let pipeline = get_json(&client, &url("/api/video"))?;
        let width = pipeline["width"].as_u64().ok_or("pipeline has no width")? as u32;
        let height = pipeline["height"].as_u64().ok_or("pipeline has no height")? as u32;
        let input: VideoInput = pipeline["input"].as_str().unwrap_or_default().parse()?;

        let resp = client.get(url("/api/grab?format=ppm")).send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}: {}", resp.text().unwrap_or_default()));
        }
        let counter = resp
            .headers()
            .get(crate::server::FRAME_COUNTER_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse::<u64>().ok());
        let bytes = resp.bytes().map_err(|e| e.to_string())?;
        let frame = parse_ppm(&bytes)?;
        if (frame.width, frame.height) != (width, height) {
            return Err(format!("frame is {}x{}, configured {width}x{height}", frame.width, frame.height));
        }
        if let Some(n) = counter {
            let expected = video::render_frame(width, height, input, n);
            if frame.pixels != expected.pixels {
                return Err(format!("frame {n} does not match the test pattern"));
            }
        }
        Ok(format!("{width}x{height} PPM, {} bytes, frame {}", bytes.len(), counter.map_or("?".into(), |n| n.to_string())))
    });

    report.run("i2c-scan", || {
        let v = get_json(&client, &url("/api/i2c/scan"))?;
        let found: Vec<String> = v["addresses"]
            .as_array()
            .ok_or("no address list")?
            .iter()
            .map(|a| a.as_str().unwrap_or_default().to_owned())
            .collect();
        let expected: Vec<String> = EXPECTED_I2C_DEVICES.iter().map(|a| format!("{a:#04x}")).collect();
        if found != expected {
            return Err(format!("found {found:?}, expected {expected:?}"));
        }
        Ok("18 LM83, 20 MPEG encoder, 24 TDA8444, 30/31 FPGA I2C core, 50 EEPROM".into())
    });

    report.run("led", || {
        let cases = [
            (json!({"all": true}), "0xff"),
            (json!({"all": false}), "0x00"),
            (json!({"index": 0, "on": true}), "0x01"),
        ];
        for (body, expected) in cases {
            let resp = client.post(url("/api/led")).json(&body).send().map_err(|e| e.to_string())?;
            if !resp.status().is_success() {
                return Err(format!("POST /api/led {body} -> HTTP {}", resp.status()));
            }
            let state = get_json(&client, &url("/api/led"))?;
            let mask = state["mask"].as_str().unwrap_or_default();
            if mask != expected {
                return Err(format!("after {body}: mask {mask}, expected {expected}"));
            }
        }
        Ok("all-on 0xff, all-off 0x00, led0 0x01".into())
    });

    report.run("eeprom-query", || {
        let resp = client.get(url("/api/eeprom")).send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        let text = resp.text().map_err(|e| e.to_string())?;
        let image = eeprom::parse_hexdump(&text).map_err(|e| e.to_string())?;
        let desc = eeprom::decode(&image).map_err(|e| format!("EEPROM does not validate: {:?}", e.0))?;
        Ok(format!("16x16 dump validates, board type {}", desc.board_type))
    });

    report.run("streaming", || {
        let resp = client.get(url("/stream")).send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}: {}", resp.status(), resp.text().unwrap_or_default()));
        }
        let parts = read_stream_parts(resp, STREAM_WINDOW)?;
        let mut digests = HashSet::new();
        for part in &parts {
            let frame = parse_bmp(&part.body)?;
            digests.insert(video::frame_digest(&frame));
        }
        if parts.len() < STREAM_MIN_PARTS || digests.len() < STREAM_MIN_PARTS {
            return Err(format!("{} parts, {} distinct frames in {STREAM_WINDOW:?}", parts.len(), digests.len()));
        }
        Ok(format!("{} parts, {} distinct frames in {STREAM_WINDOW:?}", parts.len(), digests.len()))
    });

    Ok(report.finish())
}

fn get_json(client: &reqwest::blocking::Client, url: &str) -> Result<Value, String> {
    let resp = client.get(url).send().map_err(|e| e.to_string())?;
    let status = resp.status();
    let text = resp.text().map_err(|e| e.to_string())?;
    if !status.is_success() {
        return Err(format!("GET {url} -> HTTP {status}: {text}"));
    }
    serde_json::from_str(&text).map_err(|e| format!("GET {url}: bad JSON: {e}"))
}

/// Parses a binary PPM into a frame (counter and source unknown, left at defaults).
pub fn parse_ppm(bytes: &[u8]) -> Result<Frame, String> {
    // header: "P6" ws width ws height ws maxval single-ws
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PPM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII PPM header")?);
    }
    pos += 1;
    if fields[0] != "P6" {
        return Err(format!("not a binary PPM (magic {:?})", fields[0]));
    }
    let width: u32 = fields[1].parse().map_err(|_| "bad PPM width")?;
    let height: u32 = fields[2].parse().map_err(|_| "bad PPM height")?;
    if fields[3] != "255" {
        return Err("PPM maxval is not 255".into());
    }
    let expected = width as usize * height as usize * 3;
    let pixels = bytes.get(pos..).unwrap_or_default();
    if pixels.len() != expected {
        return Err(format!("PPM payload is {} bytes, expected {expected}", pixels.len()));
    }
    Ok(Frame { width, height, counter: 0, source: VideoInput::Vid0, pixels: pixels.to_vec() })
}

/// Parses an uncompressed bottom-up 24-bit BMP.
pub fn parse_bmp(bytes: &[u8]) -> Result<Frame, String> {
    let u32_at = |o: usize| bytes.get(o..o + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()));
    let u16_at = |o: usize| bytes.get(o..o + 2).map(|b| u16::from_le_bytes(b.try_into().unwrap()));
    if bytes.get(0..2) != Some(b"BM") {
        return Err("not a BMP".into());
    }
    let offset = u32_at(10).ok_or("truncated BMP")? as usize;
    let width = u32_at(18).ok_or("truncated BMP")?;
    let height = u32_at(22).ok_or("truncated BMP")? as i32;
    if u16_at(28) != Some(24) || u32_at(30) != Some(0) || height <= 0 {
        return Err("only bottom-up uncompressed 24-bit BMPs are supported".into());
    }
    let height = height as u32;
    let stride = video::bmp_row_stride(width);
    let data = bytes.get(offset..offset + stride * height as usize).ok_or("truncated BMP pixel data")?;
    let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
    for row in data.chunks_exact(stride).rev() {
        for px in row[..width as usize * 3].chunks_exact(3) {
            pixels.extend_from_slice(&[px[2], px[1], px[0]]);
        }
    }
    Ok(Frame { width, height, counter: 0, source: VideoInput::Vid0, pixels })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamPart {
    pub content_type: String,
    pub counter: Option<u64>,
    pub body: Vec<u8>,
}

/// Incremental `multipart/x-mixed-replace` splitter.
#[derive(Debug, Default)]
pub struct MultipartParser {
    buf: Vec<u8>,
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

impl MultipartParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, data: &[u8]) -> Result<Vec<StreamPart>, String> {
        self.buf.extend_from_slice(data);
        let delimiter = format!("--{STREAM_BOUNDARY}\r\n");
        let mut parts = Vec::new();
        while let Some(start) = find(&self.buf, delimiter.as_bytes()) {
            let headers_start = start + delimiter.len();
            let Some(headers_len) = find(&self.buf[headers_start..], b"\r\n\r\n") else { break };
            let headers = std::str::from_utf8(&self.buf[headers_start..headers_start + headers_len])
                .map_err(|_| "non-UTF-8 part headers")?;
            let mut content_type = String::new();
            let mut length = None;
            let mut counter = None;
            for line in headers.split("\r\n") {
                let Some((name, value)) = line.split_once(':') else { continue };
                let value = value.trim();
                match name.trim().to_ascii_lowercase().as_str() {
                    "content-type" => content_type = value.to_owned(),
                    "content-length" => length = Some(value.parse::<usize>().map_err(|_| "bad Content-Length")?),
                    "x-frame-counter" => counter = value.parse().ok(),
                    _ => {}
                }
            }
            let length = length.ok_or("part without Content-Length")?;
            let body_start = headers_start + headers_len + 4;
            if self.buf.len() < body_start + length {
                break;
            }
            let body = self.buf[body_start..body_start + length].to_vec();
            self.buf.drain(..body_start + length);
            parts.push(StreamPart { content_type, counter, body });
        }
        Ok(parts)
    }
}

fn read_stream_parts(mut resp: reqwest::blocking::Response, window: Duration) -> Result<Vec<StreamPart>, String> {
    let deadline = Instant::now() + window;
    let mut parser = MultipartParser::new();
    let mut parts = Vec::new();
    let mut chunk = vec![0u8; 64 * 1024];
    while Instant::now() < deadline {
        let n = resp.read(&mut chunk).map_err(|e| e.to_string())?;
        if n == 0 {
            break;
        }
        parts.extend(parser.push(&chunk[..n])?);
    }
    Ok(parts)
}

/// Human or JSON rendering of a report.
pub fn emit_report(report: &TestReport, json: bool) -> String {
    if json {
        let mut s = serde_json::to_string_pretty(report).expect("report serializes");
        s.push('\n');
        return s;
    }
    let mut out = String::new();
    for step in &report.steps {
        writeln!(out, "[{}] {} ({} ms) — {}", step.status.tag(), step.name, step.duration_ms, step.detail).unwrap();
    }
    writeln!(out, "OVERALL: {}", if report.passed() { "PASS" } else { "FAIL" }).unwrap();
    out
}

/// Carries transactions to a remote board through `POST /api/i2c/txn`.
pub struct HttpBus {
    client: reqwest::blocking::Client,
    url: String,
    /// First transport-level failure; once set, every later transaction NACKs.
    pub error: Option<String>,
}

impl HttpBus {
    pub fn new(base_url: &str) -> Result<Self, RunnerError> {
        let client = reqwest::blocking::Client::builder().timeout(HTTP_STEP_TIMEOUT).build().map_err(|e| {
            RunnerError::ConnectionFailed { url: base_url.to_owned(), message: e.to_string() }
        })?;
        Ok(HttpBus { client, url: format!("{}/api/i2c/txn", base_url.trim_end_matches('/')), error: None })
    }

    fn send(&self, txn: &I2cTransaction) -> Result<TransactionResult, String> {
        let body = json!({
            "address": txn.address().value(),
            "write": txn.write_bytes(),
            "read": txn.read_count(),
        });
        let resp = self.client.post(&self.url).json(&body).send().map_err(|e| e.to_string())?;
        let status = resp.status();
        let v: Value = resp.json().map_err(|e| e.to_string())?;
        let txn_status = match v["status"].as_str() {
            Some("ack") => TxnStatus::Ack,
            Some("nack") => TxnStatus::AddressNack,
            Some("write_rejected") => TxnStatus::WriteRejected,
            _ => return Err(format!("HTTP {status}: {v}")),
        };
        let read_bytes = v["read"]
            .as_array()
            .map(|a| a.iter().filter_map(|b| b.as_u64().map(|b| b as u8)).collect())
            .unwrap_or_default();
        Ok(TransactionResult { status: txn_status, read_bytes })
    }
}

impl I2cBus for HttpBus {
    fn transact(&mut self, txn: &I2cTransaction) -> TransactionResult {
        let nack = TransactionResult { status: TxnStatus::AddressNack, read_bytes: Vec::new() };
        if self.error.is_some() {
            return nack;
        }
        match self.send(txn) {
            Ok(r) => r,
            Err(e) => {
                self.error = Some(e);
                nack
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(statuses: &[StepStatus]) -> TestReport {
        let mut b = ReportBuilder::new(Phase::B);
        for (i, s) in statuses.iter().enumerate() {
            b.steps.push(Step { name: format!("s{i}"), status: *s, detail: "d".into(), duration_ms: 3 });
        }
        b.finish()
    }

    #[test]
    fn overall_follows_failures() {
        assert!(report(&[StepStatus::Pass, StepStatus::Skip]).passed());
        assert!(!report(&[StepStatus::Pass, StepStatus::Fail]).passed());
        assert_eq!(report(&[StepStatus::Fail]).exit_code(), 1);
        assert_eq!(report(&[]).exit_code(), 0);
    }

    #[test]
    fn human_format() {
        let text = emit_report(&report(&[StepStatus::Pass; 6]), false);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "[PASS] s0 (3 ms) — d");
        assert_eq!(lines[6], "OVERALL: PASS");
        let text = emit_report(&report(&[StepStatus::Fail, StepStatus::Skip]), false);
        assert!(text.lines().nth(1).unwrap().starts_with("[SKIP] "));
        assert!(text.ends_with("OVERALL: FAIL\n"));
    }

    #[test]
    fn json_format() {
        let text = emit_report(&report(&[StepStatus::Pass]), true);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["overall"], "pass");
        assert_eq!(v["phase"], "B");
        assert_eq!(v["steps"][0]["status"], "pass");
        assert_eq!(v["steps"][0]["duration_ms"], 3);
    }

    #[test]
    fn functional_variants_pass() {
        let r = run_functional(FpgaModel::Xc2v1000, true);
        assert!(r.passed(), "{}", emit_report(&r, false));
        let names: Vec<&str> = r.steps.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, FUNCTIONAL_STEPS);
        assert!(r.step("re-identification").unwrap().detail.contains("XC2V1000"));

        let r = run_functional(FpgaModel::Xc2v250, false);
        assert!(r.passed(), "{}", emit_report(&r, false));
        assert!(r.step("fpga-load").unwrap().detail.contains("0x02"));
    }

    #[test]
    fn write_protected_eeprom_skips_later_steps() {
        let board = Board::new(FpgaModel::Xc2v1000, true);
        board.set_eeprom_write_protect(true);
        let r = run_functional_on(&board, FpgaModel::Xc2v1000, true);
        let statuses: Vec<StepStatus> = r.steps.iter().map(|s| s.status).collect();
        assert_eq!(
            statuses,
            [StepStatus::Pass, StepStatus::Fail, StepStatus::Skip, StepStatus::Skip, StepStatus::Skip]
        );
        assert_eq!(r.overall, Verdict::Fail);
    }

    #[test]
    fn mismatched_start_state_fails_identification() {
        let board = Board::new(FpgaModel::Xc2v1000, false);
        let r = run_functional_on(&board, FpgaModel::Xc2v1000, true);
        assert_eq!(r.steps[0].status, StepStatus::Fail);
    }

    #[test]
    fn multipart_parser_handles_split_input() {
        let f0 = video::render_frame(4, 2, VideoInput::Vid0, 0);
        let f1 = video::render_frame(4, 2, VideoInput::Vid0, 1);
        let mut wire = crate::server::stream_part(&f0);
        wire.extend(crate::server::stream_part(&f1));
        let mut p = MultipartParser::new();
        let mut parts = Vec::new();
        for chunk in wire.chunks(7) {
            parts.extend(p.push(chunk).unwrap());
        }
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].counter, Some(1));
        assert_eq!(parts[0].content_type, "image/bmp");
        assert_eq!(parse_bmp(&parts[0].body).unwrap().pixels, f0.pixels);
    }

    #[test]
    fn ppm_parser() {
        let f = video::render_frame(5, 3, VideoInput::Vid1, 2);
        assert_eq!(parse_ppm(&video::encode_ppm(&f)).unwrap().pixels, f.pixels);
        assert!(parse_ppm(b"P5\n1 1\n255\n\0").is_err());
        assert!(parse_ppm(b"P6\n2 1\n255\n\0\0\0").is_err());
    }
}
