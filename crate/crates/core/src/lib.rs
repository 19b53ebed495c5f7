//! Simulator and two-phase test bench for the VideoFPGA PC104+ video
//! acquisition board.
//!
//! * [`board`]: behavioral board model (PCI identity, I2C bus with six
//!   device models, LED bank, FPGA configuration, capture pipeline).
//! * [`eeprom`]: board-descriptor EEPROM map.
//! * [`video`]: color-bar test pattern and PPM/BMP serialization.
//! * [`urd`]: register-debugger script interpreter used for provisioning.
//! * [`server`]: HTTP in-system test service.
//! * [`runner`]: functional (in-process) and in-system (HTTP) test phases.

pub mod board;
pub mod eeprom;
pub mod runner;
pub mod server;
pub mod urd;
pub mod video;

pub use board::{Board, BoardConfig, BoardError, I2cAddress, I2cBus, I2cTransaction, TransactionResult, TxnStatus};
pub use eeprom::{BoardDescriptor, EepromImage, FpgaModel};
pub use video::{Frame, VideoInput};
