//! Board-descriptor EEPROM map.
//!
//! The 256-byte EEPROM identifies the board variant to the capture driver and
//! selects the FPGA configuration file. Layout:
//!
//! | offset | content                                   |
//! |--------|-------------------------------------------|
//! | 0      | magic `0xA5`                              |
//! | 1      | map version `0x01`                        |
//! | 2      | board-type code (`0x02` XC2V250, `0x04` XC2V1000) |
//! | 3..=4  | subsystem vendor id, little-endian        |
//! | 5..=6  | subsystem device id, little-endian        |
//! | 7      | video input count (2)                     |
//! | 8      | LED count (8)                             |
//! | 9..=254| zero                                      |
//! | 255    | checksum: all 256 bytes sum to 0 mod 256  |

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EEPROM_SIZE: usize = 256;
pub const MAGIC: u8 = 0xA5;
pub const MAP_VERSION: u8 = 0x01;
pub const VIDEO_INPUT_COUNT: u8 = 2;
pub const LED_COUNT: u8 = 8;

pub const OFFSET_MAGIC: usize = 0;
pub const OFFSET_VERSION: usize = 1;
pub const OFFSET_BOARD_TYPE: usize = 2;
pub const OFFSET_SUBSYS_VENDOR: usize = 3;
pub const OFFSET_SUBSYS_DEVICE: usize = 5;
pub const OFFSET_VIDEO_INPUTS: usize = 7;
pub const OFFSET_LED_COUNT: usize = 8;
pub const OFFSET_CHECKSUM: usize = 255;

/// FPGA variant fitted to the board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FpgaModel {
    Xc2v250,
    Xc2v1000,
}

impl FpgaModel {
    pub const ALL: [FpgaModel; 2] = [FpgaModel::Xc2v250, FpgaModel::Xc2v1000];

    /// Type code stored at EEPROM offset 2 and mirrored by the FPGA status register.
    pub const fn code(self) -> u8 {
        match self {
            FpgaModel::Xc2v250 => 0x02,
            FpgaModel::Xc2v1000 => 0x04,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0x02 => Some(FpgaModel::Xc2v250),
            0x04 => Some(FpgaModel::Xc2v1000),
            _ => None,
        }
    }

    pub const fn config_file(self) -> &'static str {
        match self {
            FpgaModel::Xc2v250 => "xc2v250.bit",
            FpgaModel::Xc2v1000 => "xc2v1000.bit",
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            FpgaModel::Xc2v250 => "xc2v250",
            FpgaModel::Xc2v1000 => "xc2v1000",
        }
    }
}

impl fmt::Display for FpgaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FpgaModel::Xc2v250 => "XC2V250",
            FpgaModel::Xc2v1000 => "XC2V1000",
        })
    }
}

impl std::str::FromStr for FpgaModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xc2v250" => Ok(FpgaModel::Xc2v250),
            "xc2v1000" => Ok(FpgaModel::Xc2v1000),
            other => Err(format!("unknown board type `{other}` (expected xc2v250 or xc2v1000)")),
        }
    }
}

/// Why an EEPROM image failed validation. Checks run in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    #[error("bad magic byte")]
    BadMagic,
    #[error("unsupported map version")]
    BadVersion,
    #[error("checksum mismatch")]
    BadChecksum,
    #[error("unknown board type code")]
    UnknownBoardType,
    #[error("capability fields out of range")]
    BadCapabilities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("invalid EEPROM image: {0}")]
pub struct Invalid(pub InvalidReason);

/// Decoded EEPROM content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardDescriptor {
    pub board_type: FpgaModel,
    pub subsystem_vendor_id: u16,
    pub subsystem_device_id: u16,
    pub video_input_count: u8,
    pub led_count: u8,
}

impl BoardDescriptor {
    pub fn new(board_type: FpgaModel, subsystem_vendor_id: u16, subsystem_device_id: u16) -> Self {
        BoardDescriptor {
            board_type,
            subsystem_vendor_id,
            subsystem_device_id,
            video_input_count: VIDEO_INPUT_COUNT,
            led_count: LED_COUNT,
        }
    }

    /// Descriptor a stock board of the given variant is provisioned with.
    pub fn stock(board_type: FpgaModel) -> Self {
        Self::new(
            board_type,
            crate::board::DECODER_VENDOR_ID,
            crate::board::DECODER_DEVICE_ID,
        )
    }
}

/// Raw 256-byte EEPROM content.
#[derive(Clone, PartialEq, Eq)]
pub struct EepromImage(pub [u8; EEPROM_SIZE]);

impl EepromImage {
    /// Factory state of an unprogrammed part.
    pub fn blank() -> Self {
        EepromImage([0xFF; EEPROM_SIZE])
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        <[u8; EEPROM_SIZE]>::try_from(bytes).ok().map(EepromImage)
    }

    pub fn as_bytes(&self) -> &[u8; EEPROM_SIZE] {
        &self.0
    }

    /// Rewrites the checksum byte so the image sums to zero.
    pub fn refit_checksum(&mut self) {
        self.0[OFFSET_CHECKSUM] = checksum_byte(&self.0[..OFFSET_CHECKSUM]);
    }
}

impl Default for EepromImage {
    fn default() -> Self {
        Self::blank()
    }
}

impl fmt::Debug for EepromImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EepromImage({:02x?}..)", &self.0[..9])
    }
}

/// Two's complement of the byte sum, so that `sum(bytes) + result ≡ 0 (mod 256)`.
pub fn checksum_byte(bytes: &[u8]) -> u8 {
    let sum = bytes.iter().fold(0u8, |acc, &b| acc.wrapping_add(b));
    sum.wrapping_neg()
}

pub fn encode(desc: &BoardDescriptor) -> EepromImage {
    let mut bytes = [0u8; EEPROM_SIZE];
    bytes[OFFSET_MAGIC] = MAGIC;
    bytes[OFFSET_VERSION] = MAP_VERSION;
    bytes[OFFSET_BOARD_TYPE] = desc.board_type.code();
    bytes[OFFSET_SUBSYS_VENDOR..OFFSET_SUBSYS_VENDOR + 2]
        .copy_from_slice(&desc.subsystem_vendor_id.to_le_bytes());
    bytes[OFFSET_SUBSYS_DEVICE..OFFSET_SUBSYS_DEVICE + 2]
        .copy_from_slice(&desc.subsystem_device_id.to_le_bytes());
    bytes[OFFSET_VIDEO_INPUTS] = desc.video_input_count;
    bytes[OFFSET_LED_COUNT] = desc.led_count;
    let mut img = EepromImage(bytes);
    img.refit_checksum();
    img
}

/// Checks magic, version, checksum, board type and capability fields, in
/// that order, and reports the first failure.
pub fn validate(img: &EepromImage) -> Result<(), Invalid> {
    let b = &img.0;
    if b[OFFSET_MAGIC] != MAGIC {
        return Err(Invalid(InvalidReason::BadMagic));
    }
    if b[OFFSET_VERSION] != MAP_VERSION {
        return Err(Invalid(InvalidReason::BadVersion));
    }
    if b.iter().fold(0u8, |acc, &x| acc.wrapping_add(x)) != 0 {
        return Err(Invalid(InvalidReason::BadChecksum));
    }
    if FpgaModel::from_code(b[OFFSET_BOARD_TYPE]).is_none() {
        return Err(Invalid(InvalidReason::UnknownBoardType));
    }
    if b[OFFSET_VIDEO_INPUTS] != VIDEO_INPUT_COUNT || b[OFFSET_LED_COUNT] != LED_COUNT {
        return Err(Invalid(InvalidReason::BadCapabilities));
    }
    Ok(())
}

pub fn decode(img: &EepromImage) -> Result<BoardDescriptor, Invalid> {
    validate(img)?;
    let b = &img.0;
    let board_type = FpgaModel::from_code(b[OFFSET_BOARD_TYPE])
        .ok_or(Invalid(InvalidReason::UnknownBoardType))?;
    Ok(BoardDescriptor {
        board_type,
        subsystem_vendor_id: u16::from_le_bytes([b[OFFSET_SUBSYS_VENDOR], b[OFFSET_SUBSYS_VENDOR + 1]]),
        subsystem_device_id: u16::from_le_bytes([b[OFFSET_SUBSYS_DEVICE], b[OFFSET_SUBSYS_DEVICE + 1]]),
        video_input_count: b[OFFSET_VIDEO_INPUTS],
        led_count: b[OFFSET_LED_COUNT],
    })
}

/// Sixteen lines of `oooo: xx xx .. xx`, lowercase, each newline-terminated.
pub fn hexdump(img: &EepromImage) -> String {
    let mut out = String::with_capacity(16 * 54);
    for (row, chunk) in img.0.chunks(16).enumerate() {
        write!(out, "{:04x}:", row * 16).unwrap();
        for byte in chunk {
            write!(out, " {byte:02x}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("hexdump line {line}: {message}")]
pub struct HexdumpError {
    pub line: usize,
    pub message: String,
}

/// Inverse of [`hexdump`]. Requires exactly 16 lines of 16 bytes with
/// consecutive offsets.
pub fn parse_hexdump(text: &str) -> Result<EepromImage, HexdumpError> {
    let err = |line: usize, message: &str| HexdumpError { line, message: message.to_owned() };
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != 16 {
        return Err(err(lines.len(), &format!("expected 16 lines, found {}", lines.len())));
    }
    let mut bytes = [0u8; EEPROM_SIZE];
    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        let (offset, rest) = line.split_once(": ").ok_or_else(|| err(lineno, "missing offset"))?;
        let offset = usize::from_str_radix(offset, 16).map_err(|_| err(lineno, "bad offset"))?;
        if offset != i * 16 {
            return Err(err(lineno, "offset out of sequence"));
        }
        let values: Vec<&str> = rest.split(' ').collect();
        if values.len() != 16 {
            return Err(err(lineno, "expected 16 bytes"));
        }
        for (j, v) in values.iter().enumerate() {
            if v.len() != 2 {
                return Err(err(lineno, "byte is not two hex digits"));
            }
            bytes[offset + j] = u8::from_str_radix(v, 16).map_err(|_| err(lineno, "bad hex byte"))?;
        }
    }
    Ok(EepromImage(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xc2v1000() -> BoardDescriptor {
        BoardDescriptor::new(FpgaModel::Xc2v1000, 0x1131, 0x7134)
    }

    #[test]
    fn third_byte_distinguishes_variants() {
        assert_eq!(encode(&xc2v1000()).0[2], 0x04);
        let d250 = BoardDescriptor::new(FpgaModel::Xc2v250, 0x1131, 0x7134);
        assert_eq!(encode(&d250).0[2], 0x02);
    }

    #[test]
    fn checksum_of_reference_descriptor() {
        // a5+01+04+31+11+34+71+02+08 = 0x19b; 0x100 - 0x9b = 0x65
        assert_eq!(encode(&xc2v1000()).0[255], 0x65);
    }

    #[test]
    fn round_trip_and_validate() {
        let img = encode(&xc2v1000());
        assert_eq!(validate(&img), Ok(()));
        assert_eq!(decode(&img), Ok(xc2v1000()));
    }

    #[test]
    fn blank_and_zero_images_have_bad_magic() {
        assert_eq!(decode(&EepromImage::blank()), Err(Invalid(InvalidReason::BadMagic)));
        assert_eq!(validate(&EepromImage([0; 256])), Err(Invalid(InvalidReason::BadMagic)));
    }

    #[test]
    fn unknown_type_with_refitted_checksum() {
        let mut img = encode(&xc2v1000());
        img.0[2] = 0x07;
        img.refit_checksum();
        assert_eq!(validate(&img), Err(Invalid(InvalidReason::UnknownBoardType)));
    }

    #[test]
    fn version_checked_before_checksum() {
        let mut img = encode(&xc2v1000());
        img.0[1] = 0x02;
        assert_eq!(validate(&img), Err(Invalid(InvalidReason::BadVersion)));
    }

    #[test]
    fn capabilities_are_checked() {
        let mut img = encode(&xc2v1000());
        img.0[7] = 3;
        img.refit_checksum();
        assert_eq!(validate(&img), Err(Invalid(InvalidReason::BadCapabilities)));
    }

    #[test]
    fn every_single_byte_flip_is_detected() {
        let img = encode(&xc2v1000());
        for offset in 0..EEPROM_SIZE {
            for delta in 1..=255u8 {
                let mut bad = img.clone();
                bad.0[offset] = bad.0[offset].wrapping_add(delta);
                assert!(validate(&bad).is_err(), "offset {offset} delta {delta}");
            }
        }
    }

    #[test]
    fn hexdump_format() {
        let dump = hexdump(&EepromImage::blank());
        assert_eq!(dump.lines().count(), 16);
        assert!(dump.ends_with('\n'));
        assert_eq!(
            dump.lines().next().unwrap(),
            "0000: ff ff ff ff ff ff ff ff ff ff ff ff ff ff ff ff"
        );
        let dump = hexdump(&encode(&xc2v1000()));
        assert!(dump.starts_with("0000: a5 01 04 31 11 34 71 02 08"));
        assert!(dump.lines().last().unwrap().starts_with("00f0: "));
        assert!(dump.lines().last().unwrap().ends_with(" 65"));
    }

    #[test]
    fn parse_hexdump_rejects_garbage() {
        assert!(parse_hexdump("").is_err());
        let mut dump = hexdump(&EepromImage::blank());
        dump = dump.replacen("0010:", "0020:", 1);
        assert_eq!(parse_hexdump(&dump).unwrap_err().line, 2);
    }

    #[test]
    fn golden_hexdump_matches_encoder() {
        let golden = include_str!("../data/upcb1b.eeprom.hex");
        assert_eq!(hexdump(&encode(&BoardDescriptor::stock(FpgaModel::Xc2v1000))), golden);
    }
}
