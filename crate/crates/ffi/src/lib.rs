//! C ABI for the board simulator.
//!
//! Boards are opaque handles created with `vfp_board_new` and released with
//! `vfp_board_free`. Every call returns a `VfpStatus`; on failure a message is
//! available from `vfp_last_error` on the calling thread. Buffers and strings
//! handed out by the library are released with `vfp_buffer_free` /
//! `vfp_string_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;
use std::slice;

use vfpbench::board::{Board, BoardError, I2cAddress, I2cTransaction, LedAction, TxnStatus};
use vfpbench::eeprom::{self, BoardDescriptor, EepromImage, FpgaModel, InvalidReason, EEPROM_SIZE};
use vfpbench::urd;
use vfpbench::video::{self, VideoInput};

/// Opaque board handle.
pub struct VfpBoard {
    board: Board,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    AddressNack = 3,
    WriteRejected = 4,
    ConfigRefused = 5,
    NotConfigured = 6,
    BadIndex = 7,
    BadMagic = 8,
    BadVersion = 9,
    BadChecksum = 10,
    UnknownBoardType = 11,
    BadCapabilities = 12,
    ScriptParse = 13,
    ScriptFailed = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfpBoardType {
    Unknown = 0,
    Xc2v250 = 2,
    Xc2v1000 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfpVideoInput {
    Vid0 = 0,
    Vid1 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfpImageFormat {
    Ppm = 0,
    Bmp = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VfpPciIdentity {
    pub vendor_id: u16,
    pub device_id: u16,
    pub subsystem_vendor_id: u16,
    pub subsystem_device_id: u16,
    pub driver_bound: bool,
    pub board_type: u8,
}

/// Byte buffer owned by the library.
#[repr(C)]
pub struct VfpBuffer {
    pub data: *mut u8,
    pub len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: VfpStatus, msg: impl Into<String>) -> VfpStatus {
    set_error(msg);
    status
}

fn board_error(e: BoardError) -> VfpStatus {
    let status = match e {
        BoardError::InvalidAddress(_) | BoardError::WriteTooLong(_) | BoardError::ReadTooLong(_) => {
            VfpStatus::InvalidArgument
        }
        BoardError::ConfigRefused => VfpStatus::ConfigRefused,
        BoardError::NotConfigured => VfpStatus::NotConfigured,
        BoardError::BadIndex(_) => VfpStatus::BadIndex,
        BoardError::Bus(TxnStatus::WriteRejected) => VfpStatus::WriteRejected,
        BoardError::Bus(_) => VfpStatus::AddressNack,
    };
    fail(status, e.to_string())
}

fn invalid_status(reason: InvalidReason) -> VfpStatus {
    match reason {
        InvalidReason::BadMagic => VfpStatus::BadMagic,
        InvalidReason::BadVersion => VfpStatus::BadVersion,
        InvalidReason::BadChecksum => VfpStatus::BadChecksum,
        InvalidReason::UnknownBoardType => VfpStatus::UnknownBoardType,
        InvalidReason::BadCapabilities => VfpStatus::BadCapabilities,
    }
}

fn model(t: VfpBoardType) -> Option<FpgaModel> {
    match t {
        VfpBoardType::Xc2v250 => Some(FpgaModel::Xc2v250),
        VfpBoardType::Xc2v1000 => Some(FpgaModel::Xc2v1000),
        VfpBoardType::Unknown => None,
    }
}

/// Runs `f`, converting a panic into `VfpStatus::Panic`.
fn guard(f: impl FnOnce() -> VfpStatus) -> VfpStatus {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(VfpStatus::Panic, "internal panic"))
}

unsafe fn board_ref<'a>(board: *const VfpBoard) -> Option<&'a Board> {
    board.as_ref().map(|b| &b.board)
}

macro_rules! try_board {
    ($ptr:expr) => {
        match board_ref($ptr) {
            Some(b) => b,
            None => return fail(VfpStatus::NullPointer, "board handle is null"),
        }
    };
}

/// Thread-local message for the last failing call, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn vfp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn vfp_status_name(status: VfpStatus) -> *const c_char {
    let name: &'static CStr = match status {
        VfpStatus::Ok => c"ok",
        VfpStatus::NullPointer => c"null pointer",
        VfpStatus::InvalidArgument => c"invalid argument",
        VfpStatus::AddressNack => c"address nack",
        VfpStatus::WriteRejected => c"write rejected",
        VfpStatus::ConfigRefused => c"configuration refused",
        VfpStatus::NotConfigured => c"not configured",
        VfpStatus::BadIndex => c"bad index",
        VfpStatus::BadMagic => c"bad magic",
        VfpStatus::BadVersion => c"bad version",
        VfpStatus::BadChecksum => c"bad checksum",
        VfpStatus::UnknownBoardType => c"unknown board type",
        VfpStatus::BadCapabilities => c"bad capabilities",
        VfpStatus::ScriptParse => c"script parse error",
        VfpStatus::ScriptFailed => c"script failed",
        VfpStatus::Panic => c"panic",
    };
    name.as_ptr()
}

/// Creates a board. Returns NULL for `VFP_BOARD_TYPE_UNKNOWN`.
#[no_mangle]
pub extern "C" fn vfp_board_new(board_type: VfpBoardType, uninitialized: bool) -> *mut VfpBoard {
    match model(board_type) {
        Some(m) => Box::into_raw(Box::new(VfpBoard { board: Board::new(m, uninitialized) })),
        None => {
            set_error("board type must be XC2V250 or XC2V1000");
            ptr::null_mut()
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn vfp_board_free(board: *mut VfpBoard) {
    if !board.is_null() {
        drop(Box::from_raw(board));
    }
}

/// One bus transaction. `read_buf` must hold `read_len` bytes; it may be NULL
/// when `read_len` is 0, as may `write` when `write_len` is 0.
#[no_mangle]
pub unsafe extern "C" fn vfp_i2c_transaction(
    board: *const VfpBoard,
    address: u8,
    write: *const u8,
    write_len: usize,
    read_buf: *mut u8,
    read_len: usize,
) -> VfpStatus {
    let board = try_board!(board);
    if (write.is_null() && write_len > 0) || (read_buf.is_null() && read_len > 0) {
        return fail(VfpStatus::NullPointer, "buffer is null");
    }
    let write = if write_len == 0 { Vec::new() } else { slice::from_raw_parts(write, write_len).to_vec() };
    guard(|| {
        let txn = match I2cAddress::new(address).and_then(|a| I2cTransaction::new(a, write, read_len)) {
            Ok(t) => t,
            Err(e) => return board_error(e),
        };
        let r = board.i2c_transaction(&txn);
        match r.status {
            TxnStatus::Ack => {
                if read_len > 0 {
                    slice::from_raw_parts_mut(read_buf, read_len).copy_from_slice(&r.read_bytes);
                }
                VfpStatus::Ok
            }
            TxnStatus::AddressNack => fail(VfpStatus::AddressNack, format!("no device at {address:#04x}")),
            TxnStatus::WriteRejected => fail(VfpStatus::WriteRejected, format!("device {address:#04x} rejected access")),
        }
    })
}

/// Writes responding addresses to `out` (capacity `cap`) and the total count
/// to `count`. Returns `InvalidArgument` if `cap` is too small; `count` is
/// still set.
#[no_mangle]
pub unsafe extern "C" fn vfp_i2c_scan(board: *const VfpBoard, out: *mut u8, cap: usize, count: *mut usize) -> VfpStatus {
    let board = try_board!(board);
    if count.is_null() || (out.is_null() && cap > 0) {
        return fail(VfpStatus::NullPointer, "output pointer is null");
    }
    let found = board.i2c_scan();
    *count = found.len();
    if found.len() > cap {
        return fail(VfpStatus::InvalidArgument, format!("need room for {} addresses", found.len()));
    }
    for (i, a) in found.iter().enumerate() {
        *out.add(i) = a.value();
    }
    VfpStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn vfp_pci_identify(board: *const VfpBoard, out: *mut VfpPciIdentity) -> VfpStatus {
    let board = try_board!(board);
    let Some(out) = out.as_mut() else {
        return fail(VfpStatus::NullPointer, "output pointer is null");
    };
    let id = board.pci_identify();
    *out = VfpPciIdentity {
        vendor_id: id.vendor_id,
        device_id: id.device_id,
        subsystem_vendor_id: id.subsystem_vendor_id,
        subsystem_device_id: id.subsystem_device_id,
        driver_bound: id.driver_bound,
        board_type: id.board_type.map_or(0, FpgaModel::code),
    };
    VfpStatus::Ok
}

/// Configures the FPGA from the EEPROM board type. `model_code` (optional)
/// receives the status-register code (0x02 / 0x04).
#[no_mangle]
pub unsafe extern "C" fn vfp_load_fpga(board: *const VfpBoard, model_code: *mut u8) -> VfpStatus {
    let board = try_board!(board);
    match board.load_fpga() {
        Ok(state) => {
            if let Some(out) = model_code.as_mut() {
                *out = state.model_code();
            }
            VfpStatus::Ok
        }
        Err(e) => board_error(e),
    }
}

/// `index` < 0 applies `on` to all LEDs. `mask` (optional) receives the result.
#[no_mangle]
pub unsafe extern "C" fn vfp_led_set(board: *const VfpBoard, index: i32, on: bool, mask: *mut u8) -> VfpStatus {
    let board = try_board!(board);
    let action = match (index, on) {
        (i, true) if i < 0 => LedAction::AllOn,
        (i, false) if i < 0 => LedAction::AllOff,
        (i, on) => match u8::try_from(i) {
            Ok(index) => LedAction::Set { index, on },
            Err(_) => return fail(VfpStatus::BadIndex, format!("LED index {i} outside 0..=7")),
        },
    };
    match board.led_control(action) {
        Ok(bank) => {
            if let Some(out) = mask.as_mut() {
                *out = bank.mask;
            }
            VfpStatus::Ok
        }
        Err(e) => board_error(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn vfp_select_input(board: *const VfpBoard, input: VfpVideoInput) -> VfpStatus {
    let board = try_board!(board);
    board.select_input(match input {
        VfpVideoInput::Vid0 => VideoInput::Vid0,
        VfpVideoInput::Vid1 => VideoInput::Vid1,
    });
    VfpStatus::Ok
}

/// Grabs one frame and serializes it. Release `out` with `vfp_buffer_free`.
#[no_mangle]
pub unsafe extern "C" fn vfp_capture_frame(
    board: *const VfpBoard,
    format: VfpImageFormat,
    out: *mut VfpBuffer,
    counter: *mut u64,
) -> VfpStatus {
    let board = try_board!(board);
    if out.is_null() {
        return fail(VfpStatus::NullPointer, "output pointer is null");
    }
    guard(|| {
        let frame = match board.capture_frame() {
            Ok(f) => f,
            Err(e) => return board_error(e),
        };
        let bytes = match format {
            VfpImageFormat::Ppm => video::encode_ppm(&frame),
            VfpImageFormat::Bmp => video::encode_bmp(&frame),
        };
        if let Some(c) = counter.as_mut() {
            *c = frame.counter;
        }
        *out = into_buffer(bytes);
        VfpStatus::Ok
    })
}

fn into_buffer(bytes: Vec<u8>) -> VfpBuffer {
    let boxed = bytes.into_boxed_slice();
    let len = boxed.len();
    VfpBuffer { data: Box::into_raw(boxed) as *mut u8, len }
}

#[no_mangle]
pub unsafe extern "C" fn vfp_buffer_free(buf: *mut VfpBuffer) {
    let Some(buf) = buf.as_mut() else { return };
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
    buf.data = ptr::null_mut();
    buf.len = 0;
}

/// Copies the 256 EEPROM bytes into `out`.
#[no_mangle]
pub unsafe extern "C" fn vfp_board_eeprom(board: *const VfpBoard, out: *mut u8) -> VfpStatus {
    let board = try_board!(board);
    if out.is_null() {
        return fail(VfpStatus::NullPointer, "output pointer is null");
    }
    slice::from_raw_parts_mut(out, EEPROM_SIZE).copy_from_slice(board.eeprom_image().as_bytes());
    VfpStatus::Ok
}

/// Encodes a stock descriptor into `out` (256 bytes).
#[no_mangle]
pub unsafe extern "C" fn vfp_eeprom_encode(
    board_type: VfpBoardType,
    subsystem_vendor_id: u16,
    subsystem_device_id: u16,
    out: *mut u8,
) -> VfpStatus {
    let Some(m) = model(board_type) else {
        return fail(VfpStatus::InvalidArgument, "board type must be XC2V250 or XC2V1000");
    };
    if out.is_null() {
        return fail(VfpStatus::NullPointer, "output pointer is null");
    }
    let img = eeprom::encode(&BoardDescriptor::new(m, subsystem_vendor_id, subsystem_device_id));
    slice::from_raw_parts_mut(out, EEPROM_SIZE).copy_from_slice(img.as_bytes());
    VfpStatus::Ok
}

/// Validates 256 bytes at `bytes`; returns the first failing check.
#[no_mangle]
pub unsafe extern "C" fn vfp_eeprom_validate(bytes: *const u8) -> VfpStatus {
    if bytes.is_null() {
        return fail(VfpStatus::NullPointer, "input pointer is null");
    }
    let img = EepromImage::from_slice(slice::from_raw_parts(bytes, EEPROM_SIZE)).expect("256 bytes");
    match eeprom::validate(&img) {
        Ok(()) => VfpStatus::Ok,
        Err(e) => fail(invalid_status(e.0), e.to_string()),
    }
}

/// Hexdump of 256 bytes. Release with `vfp_string_free`.
#[no_mangle]
pub unsafe extern "C" fn vfp_eeprom_hexdump(bytes: *const u8) -> *mut c_char {
    if bytes.is_null() {
        set_error("input pointer is null");
        return ptr::null_mut();
    }
    let img = EepromImage::from_slice(slice::from_raw_parts(bytes, EEPROM_SIZE)).expect("256 bytes");
    CString::new(eeprom::hexdump(&img)).expect("hexdump has no NUL").into_raw()
}

/// Parses and runs a register-debugger script on the board. When `report` is
/// non-NULL it receives the formatted report (release with `vfp_string_free`).
#[no_mangle]
pub unsafe extern "C" fn vfp_urd_run(board: *const VfpBoard, script: *const c_char, report: *mut *mut c_char) -> VfpStatus {
    let board = try_board!(board);
    if script.is_null() {
        return fail(VfpStatus::NullPointer, "script is null");
    }
    let Ok(text) = CStr::from_ptr(script).to_str() else {
        return fail(VfpStatus::InvalidArgument, "script is not UTF-8");
    };
    guard(|| {
        let parsed = match urd::parse("script", text) {
            Ok(s) => s,
            Err(e) => return fail(VfpStatus::ScriptParse, e.to_string()),
        };
        let run = urd::execute(&parsed, &mut &*board);
        if let Some(out) = report.as_mut() {
            *out = CString::new(urd::format_report(&run)).map_or(ptr::null_mut(), CString::into_raw);
        }
        match run.failing_line() {
            None => VfpStatus::Ok,
            Some(line) => fail(VfpStatus::ScriptFailed, format!("script failed at line {line}")),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn vfp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
