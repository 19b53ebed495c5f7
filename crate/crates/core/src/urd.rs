//! Register-debugger scripts for I2C provisioning and verification.
//!
//! One command per line, `#` starts a comment, numbers are decimal or
//! `0x`-prefixed hex:
//!
//! ```text
//! w <addr> <byte>+          write bytes (first byte is the register pointer)
//! r <addr> <ptr> <count>    read count bytes from ptr
//! x <addr> <ptr> <byte>+    read and compare
//! d <ms>                    delay
//! p "<text>"                print
//! s                         scan the bus
//! ```
//!
//! Execution halts at the first NACK or mismatch.

use std::fmt::{self, Write as _};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::board::{I2cAddress, I2cBus, I2cTransaction, TxnStatus, MAX_READ_LEN, MAX_WRITE_LEN};
use crate::eeprom::{self, BoardDescriptor, FpgaModel, EEPROM_SIZE};

/// Golden provisioning script for the XC2V1000 build.
pub const UPCB1B_SCRIPT: &str = include_str!("../scripts/upcb1b.urd");

/// Bytes per page write in generated provisioning scripts.
pub const PAGE_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Write { addr: I2cAddress, bytes: Vec<u8> },
    Read { addr: I2cAddress, pointer: u8, count: usize },
    Expect { addr: I2cAddress, pointer: u8, bytes: Vec<u8> },
    Delay { ms: u64 },
    Print { text: String },
    Scan,
}

impl Command {
    pub fn mnemonic(&self) -> char {
        match self {
            Command::Write { .. } => 'w',
            Command::Read { .. } => 'r',
            Command::Expect { .. } => 'x',
            Command::Delay { .. } => 'd',
            Command::Print { .. } => 'p',
            Command::Scan => 's',
        }
    }
}

fn write_hex_bytes(f: &mut fmt::Formatter<'_>, bytes: &[u8]) -> fmt::Result {
    for b in bytes {
        write!(f, " {b:#04x}")?;
    }
    Ok(())
}

/// Canonical source form; parsing it yields the same command.
impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Write { addr, bytes } => {
                write!(f, "w {addr}")?;
                write_hex_bytes(f, bytes)
            }
            Command::Read { addr, pointer, count } => write!(f, "r {addr} {pointer:#04x} {count}"),
            Command::Expect { addr, pointer, bytes } => {
                write!(f, "x {addr} {pointer:#04x}")?;
                write_hex_bytes(f, bytes)
            }
            Command::Delay { ms } => write!(f, "d {ms}"),
            Command::Print { text } => write!(f, "p \"{text}\""),
            Command::Scan => f.write_str("s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub name: String,
    pub commands: Vec<(usize, Command)>,
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (_, cmd) in &self.commands {
            writeln!(f, "{cmd}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

enum Token<'a> {
    Word(&'a str),
    Quoted(&'a str),
}

/// Splits a line into tokens, dropping any comment. `#` inside a quoted
/// string is literal.
fn tokenize(line: &str) -> Result<Vec<Token<'_>>, String> {
    let mut tokens = Vec::new();
    let mut rest = line;
    loop {
        rest = rest.trim_start();
        if rest.is_empty() || rest.starts_with('#') {
            return Ok(tokens);
        }
        if let Some(body) = rest.strip_prefix('"') {
            let end = body.find('"').ok_or("unterminated string")?;
            tokens.push(Token::Quoted(&body[..end]));
            rest = &body[end + 1..];
            if !(rest.is_empty() || rest.starts_with(char::is_whitespace) || rest.starts_with('#')) {
                return Err("unexpected text after closing quote".into());
            }
        } else {
            let end = rest.find(|c: char| c.is_whitespace() || c == '#' || c == '"').unwrap_or(rest.len());
            if end == 0 {
                return Err("unexpected quote".into());
            }
            tokens.push(Token::Word(&rest[..end]));
            rest = &rest[end..];
        }
    }
}

fn parse_number(tok: &Token<'_>) -> Result<u64, String> {
    let Token::Word(s) = tok else {
        return Err("expected a number, found a string".into());
    };
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) if !hex.is_empty() => u64::from_str_radix(hex, 16),
        Some(_) => return Err(format!("malformed number `{s}`")),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|_| format!("malformed number `{s}`"))
}

fn parse_byte(tok: &Token<'_>) -> Result<u8, String> {
    let v = parse_number(tok)?;
    u8::try_from(v).map_err(|_| format!("value {v:#x} exceeds 8 bits"))
}

fn parse_addr(tok: &Token<'_>) -> Result<I2cAddress, String> {
    let v = parse_number(tok)?;
    u8::try_from(v)
        .ok()
        .and_then(|b| I2cAddress::new(b).ok())
        .ok_or_else(|| format!("address {v:#x} outside 0x08..=0x77"))
}

fn parse_command(tokens: &[Token<'_>]) -> Result<Command, String> {
    let (head, args) = tokens.split_first().expect("non-empty line");
    let Token::Word(mnemonic) = head else {
        return Err("line must start with a command".into());
    };
    let arity = |ok: bool, usage: &str| if ok { Ok(()) } else { Err(format!("usage: {usage}")) };
    match *mnemonic {
        "w" => {
            arity(args.len() >= 2, "w <addr> <byte>+")?;
            arity(args.len() - 1 <= MAX_WRITE_LEN, "w <addr> <byte>+ (at most 257 bytes)")?;
            let bytes = args[1..].iter().map(parse_byte).collect::<Result<_, _>>()?;
            Ok(Command::Write { addr: parse_addr(&args[0])?, bytes })
        }
        "r" => {
            arity(args.len() == 3, "r <addr> <ptr> <count>")?;
            let addr = parse_addr(&args[0])?;
            let pointer = parse_byte(&args[1])?;
            let count = parse_number(&args[2])?;
            if count == 0 || count > MAX_READ_LEN as u64 {
                return Err(format!("read count {count} outside 1..={MAX_READ_LEN}"));
            }
            Ok(Command::Read { addr, pointer, count: count as usize })
        }
        "x" => {
            arity(args.len() >= 3, "x <addr> <ptr> <byte>+")?;
            arity(args.len() - 2 <= MAX_READ_LEN, "x <addr> <ptr> <byte>+ (at most 256 bytes)")?;
            let addr = parse_addr(&args[0])?;
            let pointer = parse_byte(&args[1])?;
            let bytes = args[2..].iter().map(parse_byte).collect::<Result<_, _>>()?;
            Ok(Command::Expect { addr, pointer, bytes })
        }
        "d" => {
            arity(args.len() == 1, "d <ms>")?;
            Ok(Command::Delay { ms: parse_number(&args[0])? })
        }
        "p" => {
            arity(args.len() == 1, "p \"<text>\"")?;
            match &args[0] {
                Token::Quoted(text) => Ok(Command::Print { text: (*text).to_owned() }),
                Token::Word(_) => Err("p expects a quoted string".into()),
            }
        }
        "s" => {
            arity(args.is_empty(), "s")?;
            Ok(Command::Scan)
        }
        other => Err(format!("unknown command `{other}`")),
    }
}

pub fn parse(name: &str, text: &str) -> Result<Script, ParseError> {
    let mut commands = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let tokens = tokenize(line).map_err(|message| ParseError { line: lineno, message })?;
        if tokens.is_empty() {
            continue;
        }
        let cmd = parse_command(&tokens).map_err(|message| ParseError { line: lineno, message })?;
        commands.push((lineno, cmd));
    }
    Ok(Script { name: name.to_owned(), commands })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Nack(TxnStatus),
    Mismatch { expected: Vec<u8>, observed: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub line: usize,
    pub command: Command,
    pub outcome: Outcome,
    /// Bytes read back, or responding addresses for a scan.
    pub observed: Vec<u8>,
    /// Text recorded by `p`.
    pub message: Option<String>,
}

impl CommandOutcome {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionReport {
    pub script: String,
    pub outcomes: Vec<CommandOutcome>,
}

impl ExecutionReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(CommandOutcome::passed)
    }

    pub fn failing_line(&self) -> Option<usize> {
        self.outcomes.iter().find(|o| !o.passed()).map(|o| o.line)
    }
}

/// Runs the script against `bus`, stopping at the first failure.
pub fn execute<B: I2cBus + ?Sized>(script: &Script, bus: &mut B) -> ExecutionReport {
    let mut outcomes = Vec::with_capacity(script.commands.len());
    for (line, cmd) in &script.commands {
        let mut observed = Vec::new();
        let mut message = None;
        let outcome = match cmd {
            Command::Write { addr, bytes } => {
                let txn = I2cTransaction::new(*addr, bytes.clone(), 0).expect("parser bounds write length");
                status_outcome(bus.transact(&txn).status)
            }
            Command::Read { addr, pointer, count } => {
                let txn = I2cTransaction::read_at(*addr, *pointer, *count).expect("parser bounds read count");
                let r = bus.transact(&txn);
                observed = r.read_bytes;
                status_outcome(r.status)
            }
            Command::Expect { addr, pointer, bytes } => {
                let txn = I2cTransaction::read_at(*addr, *pointer, bytes.len()).expect("parser bounds read count");
                let r = bus.transact(&txn);
                observed = r.read_bytes;
                match status_outcome(r.status) {
                    Outcome::Ok if observed != *bytes => {
                        Outcome::Mismatch { expected: bytes.clone(), observed: observed.clone() }
                    }
                    other => other,
                }
            }
            Command::Delay { ms } => {
                thread::sleep(Duration::from_millis(*ms));
                Outcome::Ok
            }
            Command::Print { text } => {
                message = Some(text.clone());
                Outcome::Ok
            }
            Command::Scan => {
                observed = I2cAddress::all()
                    .filter(|&a| bus.transact(&I2cTransaction::probe(a)).is_ack())
                    .map(u8::from)
                    .collect();
                Outcome::Ok
            }
        };
        let failed = outcome != Outcome::Ok;
        outcomes.push(CommandOutcome { line: *line, command: cmd.clone(), outcome, observed, message });
        if failed {
            break;
        }
    }
    ExecutionReport { script: script.name.clone(), outcomes }
}

fn status_outcome(status: TxnStatus) -> Outcome {
    match status {
        TxnStatus::Ack => Outcome::Ok,
        s => Outcome::Nack(s),
    }
}

fn hex_list(bytes: &[u8]) -> String {
    let items: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("[{}]", items.join(" "))
}

pub fn format_report(report: &ExecutionReport) -> String {
    let mut out = String::new();
    for o in &report.outcomes {
        write!(out, "{}: {}", o.line, o.command).unwrap();
        match &o.outcome {
            Outcome::Ok => {
                match (&o.command, &o.message) {
                    (_, Some(text)) => write!(out, " => {text}").unwrap(),
                    (Command::Read { .. }, _) => write!(out, " => {}", hex_list(&o.observed)).unwrap(),
                    (Command::Scan, _) => write!(out, " => {}", hex_list(&o.observed)).unwrap(),
                    _ => {}
                }
                out.push_str(" OK\n");
            }
            Outcome::Nack(status) => writeln!(out, " FAIL: {status}").unwrap(),
            Outcome::Mismatch { expected, observed } => writeln!(
                out,
                " FAIL: expected {} observed {}",
                hex_list(expected),
                hex_list(observed)
            )
            .unwrap(),
        }
    }
    out.push_str(if report.passed() { "RESULT: PASS\n" } else { "RESULT: FAIL\n" });
    out
}

/// Provisioning script for a board variant: page-writes the full EEPROM
/// image and verifies the header bytes and checksum.
pub fn provisioning_script(board_type: FpgaModel) -> String {
    let img = eeprom::encode(&BoardDescriptor::stock(board_type));
    let eeprom_addr = I2cAddress::EEPROM;
    let mut out = String::new();
    let name = match board_type {
        FpgaModel::Xc2v250 => "UPCB1B-250",
        FpgaModel::Xc2v1000 => "UPCB1B",
    };
    writeln!(out, "# {name}: board-descriptor EEPROM initialization for {board_type}").unwrap();
    writeln!(out, "p \"initializing EEPROM for {board_type}\"").unwrap();
    writeln!(out, "s").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "# write the image in {PAGE_SIZE}-byte pages").unwrap();
    for (page, chunk) in img.0.chunks(PAGE_SIZE).enumerate() {
        let mut bytes = vec![(page * PAGE_SIZE) as u8];
        bytes.extend_from_slice(chunk);
        writeln!(out, "{}", Command::Write { addr: eeprom_addr, bytes }).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "# verify header and checksum").unwrap();
    writeln!(out, "{}", Command::Expect { addr: eeprom_addr, pointer: 0, bytes: img.0[..9].to_vec() }).unwrap();
    writeln!(
        out,
        "{}",
        Command::Expect { addr: eeprom_addr, pointer: (EEPROM_SIZE - 1) as u8, bytes: vec![img.0[EEPROM_SIZE - 1]] }
    )
    .unwrap();
    writeln!(out, "p \"EEPROM programmed\"").unwrap();
    out
}
