//! Deterministic color-bar test pattern and frame serializations.
//!
//! The pattern stands in for the analog source on the capture inputs: eight
//! vertical 100% color bars with an 8-row grey band that moves down 4 rows per
//! frame. `Vid1` shows the bars in reverse order so the active input can be
//! told apart from a single grab.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_WIDTH: u32 = 720;
pub const DEFAULT_HEIGHT: u32 = 576;
pub const DEFAULT_FPS: u32 = 10;

/// Rows the overlay band moves per frame.
pub const OVERLAY_STEP: u64 = 4;
/// Height of the overlay band in rows.
pub const OVERLAY_ROWS: u64 = 8;
pub const OVERLAY_COLOR: Rgb = (128, 128, 128);

pub type Rgb = (u8, u8, u8);

pub const COLOR_BARS: [Rgb; 8] = [
    (255, 255, 255),
    (255, 255, 0),
    (0, 255, 255),
    (0, 255, 0),
    (255, 0, 255),
    (255, 0, 0),
    (0, 0, 255),
    (0, 0, 0),
];

pub const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Capture input. `Vid0` carries the tuner, `Vid1` the composite input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoInput {
    #[default]
    Vid0,
    Vid1,
}

impl VideoInput {
    pub fn label(self) -> &'static str {
        match self {
            VideoInput::Vid0 => "Video Tuner",
            VideoInput::Vid1 => "Video Composite",
        }
    }
}

impl fmt::Display for VideoInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VideoInput::Vid0 => "vid0",
            VideoInput::Vid1 => "vid1",
        })
    }
}

impl std::str::FromStr for VideoInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vid0" => Ok(VideoInput::Vid0),
            "vid1" => Ok(VideoInput::Vid1),
            other => Err(format!("unknown video input `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("pixel ({x}, {y}) outside {width}x{height} frame")]
pub struct OutOfRange {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Index of the bar covering column `x`.
fn bar_index(x: u32, width: u32) -> usize {
    ((u64::from(x) * 8) / u64::from(width)) as usize
}

/// First row covered by the overlay band in frame `counter`.
pub fn overlay_top(counter: u64, height: u32) -> u64 {
    let h = u64::from(height);
    ((counter % h) * OVERLAY_STEP) % h
}

fn in_overlay(y: u32, top: u64, height: u32) -> bool {
    let h = u64::from(height);
    (u64::from(y) + h - top) % h < OVERLAY_ROWS
}

pub fn pixel_at(
    x: u32,
    y: u32,
    counter: u64,
    source: VideoInput,
    width: u32,
    height: u32,
) -> Result<Rgb, OutOfRange> {
    if x >= width || y >= height {
        return Err(OutOfRange { x, y, width, height });
    }
    if in_overlay(y, overlay_top(counter, height), height) {
        return Ok(OVERLAY_COLOR);
    }
    let bar = bar_index(x, width);
    Ok(match source {
        VideoInput::Vid0 => COLOR_BARS[bar],
        VideoInput::Vid1 => COLOR_BARS[7 - bar],
    })
}

/// One captured frame, RGB row-major, top row first.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub counter: u64,
    pub source: VideoInput,
    pub pixels: Vec<u8>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("counter", &self.counter)
            .field("source", &self.source)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    /// Reads the bar color of column `x` on a row the overlay does not cover.
    pub fn bar_color(&self, x: u32) -> Rgb {
        let top = overlay_top(self.counter, self.height);
        let y = ((top + OVERLAY_ROWS + u64::from(self.height) / 2) % u64::from(self.height)) as u32;
        self.pixel(x, y)
    }
}

/// Renders a full frame. Panics if either dimension is zero.
pub fn render_frame(width: u32, height: u32, source: VideoInput, counter: u64) -> Frame {
    assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
    let row_colors: Vec<Rgb> = (0..width)
        .map(|x| {
            let bar = bar_index(x, width);
            match source {
                VideoInput::Vid0 => COLOR_BARS[bar],
                VideoInput::Vid1 => COLOR_BARS[7 - bar],
            }
        })
        .collect();
    let bar_row: Vec<u8> = row_colors.iter().flat_map(|&(r, g, b)| [r, g, b]).collect();
    let grey_row: Vec<u8> = std::iter::repeat_n([OVERLAY_COLOR.0, OVERLAY_COLOR.1, OVERLAY_COLOR.2], width as usize)
        .flatten()
        .collect();

    let top = overlay_top(counter, height);
    let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        if in_overlay(y, top, height) {
            pixels.extend_from_slice(&grey_row);
        } else {
            pixels.extend_from_slice(&bar_row);
        }
    }
    Frame { width, height, counter, source, pixels }
}

pub fn ppm_header(width: u32, height: u32) -> String {
    format!("P6\n{width} {height}\n255\n")
}

/// Binary PPM (P6).
pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let header = ppm_header(frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.pixels);
    out
}

pub const BMP_HEADER_LEN: usize = 54;

pub fn bmp_row_stride(width: u32) -> usize {
    (width as usize * 3).div_ceil(4) * 4
}

pub fn bmp_file_size(width: u32, height: u32) -> usize {
    BMP_HEADER_LEN + bmp_row_stride(width) * height as usize
}

/// Uncompressed 24-bit BMP, bottom-up rows in BGR order.
pub fn encode_bmp(frame: &Frame) -> Vec<u8> {
    let stride = bmp_row_stride(frame.width);
    let image_size = stride * frame.height as usize;
    let file_size = BMP_HEADER_LEN + image_size;
    let mut out = Vec::with_capacity(file_size);

    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(file_size as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(BMP_HEADER_LEN as u32).to_le_bytes());

    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&(frame.width as i32).to_le_bytes());
    out.extend_from_slice(&(frame.height as i32).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&24u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(image_size as u32).to_le_bytes());
    out.extend_from_slice(&[0; 16]);

    let row_len = frame.width as usize * 3;
    let pad = stride - row_len;
    for row in frame.pixels.chunks_exact(row_len).rev() {
        for px in row.chunks_exact(3) {
            out.extend_from_slice(&[px[2], px[1], px[0]]);
        }
        out.extend(std::iter::repeat_n(0u8, pad));
    }
    out
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |hash, &b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// FNV-1a over the PPM serialization of the frame.
pub fn frame_digest(frame: &Frame) -> u64 {
    let header = ppm_header(frame.width, frame.height);
    let hash = header
        .bytes()
        .fold(FNV_OFFSET_BASIS, |hash, b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME));
    frame
        .pixels
        .iter()
        .fold(hash, |hash, &b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}
