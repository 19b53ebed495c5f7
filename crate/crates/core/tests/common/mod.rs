//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except to build inputs.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use vfpbench::board::{I2cTransaction, TransactionResult, TxnStatus};

pub const EEPROM_ADDR: u8 = 0x50;
pub const STOCK_DEVICES: [u8; 6] = [0x18, 0x20, 0x24, 0x30, 0x31, 0x50];

/// Color bars written out longhand, not taken from the library.
const BARS: [[u8; 3]; 8] = [
    [255, 255, 255],
    [255, 255, 0],
    [0, 255, 255],
    [0, 255, 0],
    [255, 0, 255],
    [255, 0, 0],
    [0, 0, 255],
    [0, 0, 0],
];

/// Reference pixel: bar from x, palette reversed for the second input, grey
/// band 8 rows tall starting at 4n mod H.
pub fn oracle_pixel(x: u64, y: u64, n: u64, second_input: bool, w: u64, h: u64) -> (u8, u8, u8) {
    let top = (4 * (n % h)) % h;
    if (y + h - top) % h < 8 {
        return (128, 128, 128);
    }
    let mut bar = (x * 8 / w) as usize;
    if second_input {
        bar = 7 - bar;
    }
    let [r, g, b] = BARS[bar];
    (r, g, b)
}

/// Sum-to-zero checksum computed without the library.
pub fn oracle_checksum(bytes: &[u8]) -> u8 {
    let sum: u32 = bytes.iter().map(|&b| b as u32).sum();
    ((256 - sum % 256) % 256) as u8
}

/// A bare 256-byte memory with a wrapping word pointer.
#[derive(Clone)]
pub struct FlatEeprom {
    pub mem: [u8; 256],
    pub ptr: u8,
}

impl FlatEeprom {
    pub fn new(mem: [u8; 256]) -> Self {
        FlatEeprom { mem, ptr: 0 }
    }

    /// Applies an acknowledged transaction and returns the bytes it reads.
    pub fn apply(&mut self, write: &[u8], read_count: usize) -> Vec<u8> {
        if let Some((&p, data)) = write.split_first() {
            self.ptr = p;
            for &b in data {
                self.mem[self.ptr as usize] = b;
                self.ptr = self.ptr.wrapping_add(1);
            }
        }
        (0..read_count)
            .map(|_| {
                let b = self.mem[self.ptr as usize];
                self.ptr = self.ptr.wrapping_add(1);
                b
            })
            .collect()
    }

    /// Replays a logged serial order, checking every read against the oracle.
    pub fn replay(&mut self, log: &[(I2cTransaction, TransactionResult)]) -> Result<(), String> {
        for (i, (txn, res)) in log.iter().enumerate() {
            if txn.address().value() != EEPROM_ADDR || res.status != TxnStatus::Ack {
                continue;
            }
            let expect = self.apply(txn.write_bytes(), txn.read_count());
            if expect != res.read_bytes {
                return Err(format!("entry {i}: board read {:02x?}, oracle read {expect:02x?}", res.read_bytes));
            }
        }
        Ok(())
    }
}

/// Malformed scripts and the 1-based line the parser must blame.
pub const MALFORMED_SCRIPTS: [(&str, usize); 20] = [
    ("w 0x50 0x100", 1),
    ("q 0x50", 1),
    ("# header\nw 0x50 0x00 0xa5\nr 0x50 0x00", 3),
    ("p \"unterminated", 1),
    ("s\ns\nw 0x07 0x00", 3),
    ("w 0x78 0x00", 1),
    ("\n\nr 0x50 0x00 0", 3),
    ("r 0x50 0x00 257", 1),
    ("x 0x50 0x02", 1),
    ("w 0x50", 1),
    ("d", 1),
    ("d 0xzz", 1),
    ("p hello", 1),
    ("s 0x50", 1),
    ("w 0x50 0x00\n\n# ok so far\nx 0x50 0x00 256", 4),
    ("r 0x50 0x1ff 1", 1),
    ("w 0x50 0x", 1),
    ("p \"a\" \"b\"", 1),
    ("s\nw 0x50 -1", 2),
    ("\"w\" 0x50 0x00", 1),
];

pub fn bin_path() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_vfpbench"))
}

/// A `vfpbench serve` child process on an ephemeral port.
pub struct ServeProcess {
    pub child: Child,
    pub url: String,
}

impl ServeProcess {
    pub fn spawn(extra: &[&str]) -> Self {
        let mut child = Command::new(bin_path())
            .args(["serve", "--bind", "127.0.0.1:0"])
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn vfpbench serve");
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).expect("read banner");
        let url = line.split_whitespace().last().filter(|u| u.starts_with("http://")).unwrap_or_else(|| {
            let _ = child.kill();
            panic!("unexpected banner {line:?}")
        });
        let url = url.to_owned();
        ServeProcess { child, url }
    }
}

impl Drop for ServeProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Blocking HTTP client with a per-request timeout.
pub fn http() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder().timeout(Duration::from_secs(5)).build().unwrap()
}
