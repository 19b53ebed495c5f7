//! Behavioral model of the VideoFPGA acquisition board.
//!
//! The board is a shared handle: clones of [`Board`] refer to the same
//! simulated hardware, and every operation takes the board lock exactly once,
//! so each call is atomic with respect to every other call. Frame rendering
//! happens outside the lock.
//!
//! Bus map:
//!
//! | addr | device        | registers                                         |
//! |------|---------------|---------------------------------------------------|
//! | 0x18 | LM83          | 0x00 temperature (ro), 0xFE manufacturer id (ro)  |
//! | 0x20 | MPEG encoder  | 0x00 chip id 0x4D (ro), 0x01 status (ro)          |
//! | 0x24 | TDA8444       | write-only, 8 six-bit DACs                        |
//! | 0x30 | FPGA control  | 0x00 id 0xF0 (ro), 0x01 config, 0x02 LED mask     |
//! | 0x31 | FPGA status   | 0x00 bit0 done (ro), 0x01 model code (ro)         |
//! | 0x50 | EEPROM        | 256 bytes, word pointer with auto-increment       |

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard, Weak};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eeprom::{self, BoardDescriptor, EepromImage, FpgaModel, EEPROM_SIZE};
use crate::video::{self, Frame, VideoInput};

pub const DECODER_VENDOR_ID: u16 = 0x1131;
pub const DECODER_DEVICE_ID: u16 = 0x7134;

pub const DEFAULT_TEMPERATURE_C: i8 = 42;

pub const MAX_WRITE_LEN: usize = EEPROM_SIZE + 1;
pub const MAX_READ_LEN: usize = EEPROM_SIZE;

pub const LM83_REG_TEMP: u8 = 0x00;
pub const LM83_REG_MFR_ID: u8 = 0xFE;
pub const LM83_MFR_ID: u8 = 0x01;
pub const MPEG_REG_CHIP_ID: u8 = 0x00;
pub const MPEG_REG_STATUS: u8 = 0x01;
pub const MPEG_CHIP_ID: u8 = 0x4D;
pub const MPEG_STATUS_READY: u8 = 0x01;
pub const FPGA_REG_ID: u8 = 0x00;
pub const FPGA_REG_CONFIG: u8 = 0x01;
pub const FPGA_REG_LEDS: u8 = 0x02;
pub const FPGA_CORE_ID: u8 = 0xF0;
pub const FPGA_STATUS_REG_DONE: u8 = 0x00;
pub const FPGA_STATUS_REG_MODEL: u8 = 0x01;
pub const TDA8444_CHANNELS: u8 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoardError {
    #[error("I2C address {0:#04x} outside 0x08..=0x77")]
    InvalidAddress(u8),
    #[error("write of {0} bytes exceeds {MAX_WRITE_LEN}")]
    WriteTooLong(usize),
    #[error("read of {0} bytes exceeds {MAX_READ_LEN}")]
    ReadTooLong(usize),
    #[error("FPGA configuration refused: board type unknown")]
    ConfigRefused,
    #[error("FPGA not configured")]
    NotConfigured,
    #[error("LED index {0} outside 0..=7")]
    BadIndex(u8),
    #[error("bus transaction failed: {0}")]
    Bus(TxnStatus),
}

/// Seven-bit I2C address in the non-reserved range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct I2cAddress(u8);

impl I2cAddress {
    pub const MIN: u8 = 0x08;
    pub const MAX: u8 = 0x77;

    pub const LM83: I2cAddress = I2cAddress(0x18);
    pub const MPEG_ENCODER: I2cAddress = I2cAddress(0x20);
    pub const TDA8444: I2cAddress = I2cAddress(0x24);
    pub const FPGA_CONTROL: I2cAddress = I2cAddress(0x30);
    pub const FPGA_STATUS: I2cAddress = I2cAddress(0x31);
    pub const EEPROM: I2cAddress = I2cAddress(0x50);

    pub fn new(value: u8) -> Result<Self, BoardError> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(I2cAddress(value))
        } else {
            Err(BoardError::InvalidAddress(value))
        }
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = I2cAddress> {
        (Self::MIN..=Self::MAX).map(I2cAddress)
    }
}

impl TryFrom<u8> for I2cAddress {
    type Error = BoardError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        I2cAddress::new(value)
    }
}

impl From<I2cAddress> for u8 {
    fn from(a: I2cAddress) -> u8 {
        a.0
    }
}

impl fmt::Display for I2cAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

/// One write-then-optional-read bus transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct I2cTransaction {
    address: I2cAddress,
    write: Vec<u8>,
    read_count: usize,
}

impl I2cTransaction {
    pub fn new(address: I2cAddress, write: Vec<u8>, read_count: usize) -> Result<Self, BoardError> {
        if write.len() > MAX_WRITE_LEN {
            return Err(BoardError::WriteTooLong(write.len()));
        }
        if read_count > MAX_READ_LEN {
            return Err(BoardError::ReadTooLong(read_count));
        }
        Ok(I2cTransaction { address, write, read_count })
    }

    /// Empty write with no read: the quick probe used by scans.
    pub fn probe(address: I2cAddress) -> Self {
        I2cTransaction { address, write: Vec::new(), read_count: 0 }
    }

    /// Register read: write the pointer, then read `count` bytes.
    pub fn read_at(address: I2cAddress, pointer: u8, count: usize) -> Result<Self, BoardError> {
        Self::new(address, vec![pointer], count)
    }

    pub fn address(&self) -> I2cAddress {
        self.address
    }

    pub fn write_bytes(&self) -> &[u8] {
        &self.write
    }

    pub fn read_count(&self) -> usize {
        self.read_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxnStatus {
    Ack,
    AddressNack,
    WriteRejected,
}

impl fmt::Display for TxnStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxnStatus::Ack => "ack",
            TxnStatus::AddressNack => "address nack",
            TxnStatus::WriteRejected => "write rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionResult {
    pub status: TxnStatus,
    pub read_bytes: Vec<u8>,
}

impl TransactionResult {
    fn ack(read_bytes: Vec<u8>) -> Self {
        TransactionResult { status: TxnStatus::Ack, read_bytes }
    }

    fn fail(status: TxnStatus) -> Self {
        TransactionResult { status, read_bytes: Vec::new() }
    }

    pub fn is_ack(&self) -> bool {
        self.status == TxnStatus::Ack
    }
}

/// Anything that can carry I2C transactions: the simulated board, a remote
/// board behind the HTTP API, or a test stub.
pub trait I2cBus {
    fn transact(&mut self, txn: &I2cTransaction) -> TransactionResult;
}

impl<F> I2cBus for F
where
    F: FnMut(&I2cTransaction) -> TransactionResult,
{
    fn transact(&mut self, txn: &I2cTransaction) -> TransactionResult {
        self(txn)
    }
}

impl I2cBus for Board {
    fn transact(&mut self, txn: &I2cTransaction) -> TransactionResult {
        self.i2c_transaction(txn)
    }
}

impl I2cBus for &Board {
    fn transact(&mut self, txn: &I2cTransaction) -> TransactionResult {
        self.i2c_transaction(txn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedBank {
    pub mask: u8,
}

impl LedBank {
    pub const COUNT: u8 = 8;

    pub fn is_lit(self, index: u8) -> bool {
        index < Self::COUNT && self.mask & (1 << index) != 0
    }

    pub fn states(self) -> [bool; 8] {
        std::array::from_fn(|i| self.is_lit(i as u8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedAction {
    AllOn,
    AllOff,
    Set { index: u8, on: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FpgaState {
    pub done: bool,
    pub loaded_model: Option<FpgaModel>,
    pub config_file: String,
}

impl FpgaState {
    fn loaded(model: FpgaModel) -> Self {
        FpgaState { done: true, loaded_model: Some(model), config_file: model.config_file().to_owned() }
    }

    /// Value of the status register 0x31/0x01.
    pub fn model_code(&self) -> u8 {
        self.loaded_model.map_or(0x00, FpgaModel::code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoPipeline {
    pub input: VideoInput,
    pub running: bool,
    pub frame_counter: u64,
    pub fps: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PciIdentity {
    pub vendor_id: u16,
    pub device_id: u16,
    pub subsystem_vendor_id: u16,
    pub subsystem_device_id: u16,
    pub driver_bound: bool,
    /// `None` when the EEPROM does not validate.
    pub board_type: Option<FpgaModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Lm83,
    MpegEncoder,
    Tda8444,
    FpgaControl,
    FpgaStatus,
    Eeprom,
}

impl DeviceKind {
    const COUNT: usize = 6;

    fn slot(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            DeviceKind::Lm83 => "LM83",
            DeviceKind::MpegEncoder => "MPEG encoder",
            DeviceKind::Tda8444 => "TDA8444",
            DeviceKind::FpgaControl => "FPGA I2C core",
            DeviceKind::FpgaStatus => "FPGA I2C core",
            DeviceKind::Eeprom => "EEPROM",
        }
    }
}

/// The stock device map.
pub fn stock_devices() -> BTreeMap<I2cAddress, DeviceKind> {
    BTreeMap::from([
        (I2cAddress::LM83, DeviceKind::Lm83),
        (I2cAddress::MPEG_ENCODER, DeviceKind::MpegEncoder),
        (I2cAddress::TDA8444, DeviceKind::Tda8444),
        (I2cAddress::FPGA_CONTROL, DeviceKind::FpgaControl),
        (I2cAddress::FPGA_STATUS, DeviceKind::FpgaStatus),
        (I2cAddress::EEPROM, DeviceKind::Eeprom),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoardConfig {
    pub board_type: FpgaModel,
    pub uninitialized: bool,
    pub fps: u32,
    pub width: u32,
    pub height: u32,
}

impl BoardConfig {
    pub fn new(board_type: FpgaModel, uninitialized: bool) -> Self {
        BoardConfig {
            board_type,
            uninitialized,
            fps: video::DEFAULT_FPS,
            width: video::DEFAULT_WIDTH,
            height: video::DEFAULT_HEIGHT,
        }
    }
}

/// One logged bus transaction, in the order the board serialized it.
pub type LoggedTransaction = (I2cTransaction, TransactionResult);

struct BoardState {
    device_id: u16,
    devices: BTreeMap<I2cAddress, DeviceKind>,
    /// Backing store per device. For the EEPROM this is the memory array.
    registers: [[u8; 256]; DeviceKind::COUNT],
    pointers: [u8; DeviceKind::COUNT],
    dacs: [u8; TDA8444_CHANNELS as usize],
    eeprom_write_protect: bool,
    temperature_c: i8,
    fpga: FpgaState,
    video: VideoPipeline,
    stream_generation: u64,
    subscribers: Vec<mpsc::Sender<Frame>>,
    txn_log: Option<Vec<LoggedTransaction>>,
}

impl BoardState {
    fn eeprom(&self) -> &[u8; 256] {
        &self.registers[DeviceKind::Eeprom.slot()]
    }

    fn eeprom_image(&self) -> EepromImage {
        EepromImage(*self.eeprom())
    }

    fn identify(&self) -> PciIdentity {
        let img = self.eeprom_image();
        let board_type = eeprom::decode(&img).ok().map(|d| d.board_type);
        let raw = self.eeprom();
        PciIdentity {
            vendor_id: DECODER_VENDOR_ID,
            device_id: self.device_id,
            subsystem_vendor_id: u16::from_le_bytes([raw[3], raw[4]]),
            subsystem_device_id: u16::from_le_bytes([raw[5], raw[6]]),
            driver_bound: self.device_id == DECODER_DEVICE_ID && board_type.is_some(),
            board_type,
        }
    }

    fn load_fpga(&mut self) -> Result<FpgaState, BoardError> {
        let model = self.identify().board_type.ok_or(BoardError::ConfigRefused)?;
        self.fpga = FpgaState::loaded(model);
        Ok(self.fpga.clone())
    }

    fn led_mask(&self) -> u8 {
        self.registers[DeviceKind::FpgaControl.slot()][FPGA_REG_LEDS as usize]
    }

    fn read_register(&self, kind: DeviceKind, reg: u8) -> u8 {
        match (kind, reg) {
            (DeviceKind::Lm83, LM83_REG_TEMP) => self.temperature_c as u8,
            (DeviceKind::Lm83, LM83_REG_MFR_ID) => LM83_MFR_ID,
            (DeviceKind::MpegEncoder, MPEG_REG_CHIP_ID) => MPEG_CHIP_ID,
            (DeviceKind::MpegEncoder, MPEG_REG_STATUS) => MPEG_STATUS_READY,
            (DeviceKind::FpgaControl, FPGA_REG_ID) => FPGA_CORE_ID,
            (DeviceKind::FpgaStatus, FPGA_STATUS_REG_DONE) => u8::from(self.fpga.done),
            (DeviceKind::FpgaStatus, FPGA_STATUS_REG_MODEL) => self.fpga.model_code(),
            _ => self.registers[kind.slot()][reg as usize],
        }
    }

    fn register_writable(&self, kind: DeviceKind, reg: u8) -> bool {
        match kind {
            DeviceKind::Lm83 => !matches!(reg, LM83_REG_TEMP | LM83_REG_MFR_ID),
            DeviceKind::MpegEncoder => !matches!(reg, MPEG_REG_CHIP_ID | MPEG_REG_STATUS),
            DeviceKind::FpgaControl => reg != FPGA_REG_ID,
            DeviceKind::FpgaStatus => false,
            DeviceKind::Eeprom => !self.eeprom_write_protect,
            DeviceKind::Tda8444 => unreachable!("TDA8444 has no register file"),
        }
    }

    fn transact(&mut self, txn: &I2cTransaction) -> TransactionResult {
        let result = match self.devices.get(&txn.address).copied() {
            None => TransactionResult::fail(TxnStatus::AddressNack),
            Some(DeviceKind::Tda8444) => self.transact_dac(txn),
            Some(kind) => self.transact_registers(kind, txn),
        };
        if let Some(log) = self.txn_log.as_mut() {
            log.push((txn.clone(), result.clone()));
        }
        result
    }

    fn transact_dac(&mut self, txn: &I2cTransaction) -> TransactionResult {
        if txn.read_count > 0 {
            return TransactionResult::fail(TxnStatus::WriteRejected);
        }
        let Some((&sub, data)) = txn.write.split_first() else {
            return TransactionResult::ack(Vec::new());
        };
        if sub >= TDA8444_CHANNELS {
            return TransactionResult::fail(TxnStatus::WriteRejected);
        }
        let mut channel = sub;
        for &value in data {
            self.dacs[channel as usize] = value & 0x3F;
            channel = (channel + 1) % TDA8444_CHANNELS;
        }
        self.pointers[DeviceKind::Tda8444.slot()] = channel;
        TransactionResult::ack(Vec::new())
    }

    fn transact_registers(&mut self, kind: DeviceKind, txn: &I2cTransaction) -> TransactionResult {
        let slot = kind.slot();
        let mut pointer = self.pointers[slot];
        if let Some((&start, data)) = txn.write.split_first() {
            pointer = start;
            let all_writable = (0..data.len()).all(|i| self.register_writable(kind, start.wrapping_add(i as u8)));
            if !all_writable {
                return TransactionResult::fail(TxnStatus::WriteRejected);
            }
            let config_offset = (kind == DeviceKind::FpgaControl)
                .then(|| data.iter().enumerate().find(|&(i, _)| start.wrapping_add(i as u8) == FPGA_REG_CONFIG))
                .flatten();
            if let Some((_, &value)) = config_offset {
                if value & 0x01 != 0 && self.identify().board_type.is_none() {
                    return TransactionResult::fail(TxnStatus::WriteRejected);
                }
            }
            for &value in data {
                self.registers[slot][pointer as usize] = value;
                pointer = pointer.wrapping_add(1);
            }
            if let Some((_, &value)) = config_offset {
                if value & 0x01 != 0 {
                    self.load_fpga().expect("checked above");
                }
            }
        }
        let mut read = Vec::with_capacity(txn.read_count);
        for _ in 0..txn.read_count {
            read.push(self.read_register(kind, pointer));
            pointer = pointer.wrapping_add(1);
        }
        self.pointers[slot] = pointer;
        TransactionResult::ack(read)
    }

    /// Takes the next counter value. Rendering is left to the caller.
    fn next_frame_slot(&mut self) -> Result<(u32, u32, VideoInput, u64), BoardError> {
        if !self.fpga.done {
            return Err(BoardError::NotConfigured);
        }
        let v = &mut self.video;
        let counter = v.frame_counter;
        v.frame_counter += 1;
        Ok((v.width, v.height, v.input, counter))
    }
}

struct Shared {
    state: Mutex<BoardState>,
}

/// Handle to a simulated board. Clones share the same hardware.
#[derive(Clone)]
pub struct Board {
    shared: Arc<Shared>,
}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Board").field("pci", &self.pci_identify()).finish_non_exhaustive()
    }
}

impl Board {
    pub fn new(board_type: FpgaModel, uninitialized: bool) -> Self {
        Self::with_config(BoardConfig::new(board_type, uninitialized))
    }

    pub fn with_config(config: BoardConfig) -> Self {
        assert!(config.fps > 0 && config.width > 0 && config.height > 0);
        let mut registers = [[0u8; 256]; DeviceKind::COUNT];
        registers[DeviceKind::Eeprom.slot()] = if config.uninitialized {
            EepromImage::blank().0
        } else {
            eeprom::encode(&BoardDescriptor::stock(config.board_type)).0
        };
        let state = BoardState {
            device_id: DECODER_DEVICE_ID,
            devices: stock_devices(),
            registers,
            pointers: [0; DeviceKind::COUNT],
            dacs: [0; TDA8444_CHANNELS as usize],
            eeprom_write_protect: false,
            temperature_c: DEFAULT_TEMPERATURE_C,
            fpga: FpgaState::default(),
            video: VideoPipeline {
                input: VideoInput::Vid0,
                running: false,
                frame_counter: 0,
                fps: config.fps,
                width: config.width,
                height: config.height,
            },
            stream_generation: 0,
            subscribers: Vec::new(),
            txn_log: None,
        };
        Board { shared: Arc::new(Shared { state: Mutex::new(state) }) }
    }

    fn lock(&self) -> MutexGuard<'_, BoardState> {
        // A panic inside an operation cannot leave the state half-updated in a
        // way later calls depend on, so poisoning is ignored.
        self.shared.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn i2c_transaction(&self, txn: &I2cTransaction) -> TransactionResult {
        self.lock().transact(txn)
    }

    /// Probes every address in 0x08..=0x77 with an empty transaction.
    pub fn i2c_scan(&self) -> Vec<I2cAddress> {
        let mut state = self.lock();
        let log = state.txn_log.take();
        let found = I2cAddress::all()
            .filter(|&addr| state.transact(&I2cTransaction::probe(addr)).is_ack())
            .collect();
        state.txn_log = log;
        found
    }

    pub fn pci_identify(&self) -> PciIdentity {
        self.lock().identify()
    }

    pub fn load_fpga(&self) -> Result<FpgaState, BoardError> {
        self.lock().load_fpga()
    }

    /// Loads the FPGA unless it is already configured.
    pub fn ensure_fpga_loaded(&self) -> Result<FpgaState, BoardError> {
        let mut state = self.lock();
        if state.fpga.done {
            Ok(state.fpga.clone())
        } else {
            state.load_fpga()
        }
    }

    pub fn fpga_state(&self) -> FpgaState {
        self.lock().fpga.clone()
    }

    /// Drives the LED register on the FPGA core over the bus.
    pub fn led_control(&self, action: LedAction) -> Result<LedBank, BoardError> {
        let mut state = self.lock();
        let ctrl = I2cAddress::FPGA_CONTROL;
        let mask = match action {
            LedAction::AllOn => 0xFF,
            LedAction::AllOff => 0x00,
            LedAction::Set { index, on } => {
                if index >= LedBank::COUNT {
                    return Err(BoardError::BadIndex(index));
                }
                let current = bus_ok(state.transact(&I2cTransaction::read_at(ctrl, FPGA_REG_LEDS, 1)?))?;
                let bit = 1u8 << index;
                if on {
                    current[0] | bit
                } else {
                    current[0] & !bit
                }
            }
        };
        bus_ok(state.transact(&I2cTransaction::new(ctrl, vec![FPGA_REG_LEDS, mask], 0)?))?;
        Ok(LedBank { mask: state.led_mask() })
    }

    /// Current LED bank, read back from the FPGA core register.
    pub fn leds(&self) -> LedBank {
        LedBank { mask: self.lock().led_mask() }
    }

    pub fn select_input(&self, input: VideoInput) -> VideoPipeline {
        let mut state = self.lock();
        state.video.input = input;
        state.video
    }

    pub fn pipeline(&self) -> VideoPipeline {
        self.lock().video
    }

    /// Single-shot grab. Consumes exactly one counter value.
    pub fn capture_frame(&self) -> Result<Frame, BoardError> {
        let (w, h, input, counter) = self.lock().next_frame_slot()?;
        Ok(video::render_frame(w, h, input, counter))
    }

    /// Starts the pipeline ticker. A no-op if it is already running.
    pub fn start_stream(&self) -> Result<VideoPipeline, BoardError> {
        let mut state = self.lock();
        if !state.fpga.done {
            return Err(BoardError::NotConfigured);
        }
        if state.video.running {
            return Ok(state.video);
        }
        state.video.running = true;
        state.stream_generation += 1;
        let generation = state.stream_generation;
        let period = Duration::from_secs_f64(1.0 / f64::from(state.video.fps));
        let weak = Arc::downgrade(&self.shared);
        thread::Builder::new()
            .name("vfp-stream".into())
            .spawn(move || run_ticker(weak, generation, period))
            .expect("spawn stream ticker");
        Ok(state.video)
    }

    pub fn stop_stream(&self) -> VideoPipeline {
        let mut state = self.lock();
        state.video.running = false;
        state.video
    }

    /// Receives every frame the pipeline ticker emits from now on.
    pub fn subscribe(&self) -> mpsc::Receiver<Frame> {
        let (tx, rx) = mpsc::channel();
        self.lock().subscribers.push(tx);
        rx
    }

    /// Snapshot of the EEPROM array, bypassing the bus.
    pub fn eeprom_image(&self) -> EepromImage {
        self.lock().eeprom_image()
    }

    pub fn temperature_c(&self) -> i8 {
        self.lock().temperature_c
    }

    pub fn dac_values(&self) -> [u8; 8] {
        self.lock().dacs
    }

    pub fn device_map(&self) -> BTreeMap<I2cAddress, DeviceKind> {
        self.lock().devices.clone()
    }

    // Test hooks.

    pub fn set_temperature(&self, celsius: i8) {
        self.lock().temperature_c = celsius;
    }

    pub fn remove_device(&self, addr: I2cAddress) -> Option<DeviceKind> {
        self.lock().devices.remove(&addr)
    }

    /// Places a device model at an extra address. Devices of the same kind
    /// share their backing state.
    pub fn attach_device(&self, addr: I2cAddress, kind: DeviceKind) {
        self.lock().devices.insert(addr, kind);
    }

    pub fn set_eeprom_write_protect(&self, on: bool) {
        self.lock().eeprom_write_protect = on;
    }

    pub fn set_device_id(&self, device_id: u16) {
        self.lock().device_id = device_id;
    }

    /// Overwrites the EEPROM array directly, as a programmer would.
    pub fn poke_eeprom(&self, offset: u8, value: u8) {
        self.lock().registers[DeviceKind::Eeprom.slot()][offset as usize] = value;
    }

    /// Starts recording every bus transaction in serialization order.
    pub fn enable_txn_log(&self) {
        self.lock().txn_log = Some(Vec::new());
    }

    pub fn take_txn_log(&self) -> Vec<LoggedTransaction> {
        self.lock().txn_log.take().unwrap_or_default()
    }
}

fn bus_ok(result: TransactionResult) -> Result<Vec<u8>, BoardError> {
    match result.status {
        TxnStatus::Ack => Ok(result.read_bytes),
        status => Err(BoardError::Bus(status)),
    }
}

fn run_ticker(board: Weak<Shared>, generation: u64, period: Duration) {
    let start = Instant::now();
    let mut tick: u32 = 0;
    loop {
        let Some(shared) = board.upgrade() else { return };
        let slot = {
            let mut state = shared.state.lock().unwrap_or_else(|e| e.into_inner());
            if !state.video.running || state.stream_generation != generation {
                return;
            }
            match state.next_frame_slot() {
                Ok(slot) => slot,
                Err(_) => {
                    state.video.running = false;
                    return;
                }
            }
        };
        let frame = video::render_frame(slot.0, slot.1, slot.2, slot.3);
        {
            let mut state = shared.state.lock().unwrap_or_else(|e| e.into_inner());
            state.subscribers.retain(|tx| tx.send(frame.clone()).is_ok());
        }
        drop(shared);

        tick += 1;
        let deadline = start + period * tick;
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        }
    }
}
