use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vfpbench::board::{Board, BoardConfig};
use vfpbench::eeprom::{self, BoardDescriptor, EepromImage, FpgaModel};
use vfpbench::runner::{self, HttpBus};
use vfpbench::server::{self, ServerConfig};
use vfpbench::urd;
use vfpbench::video;

/// Simulator and test bench for the VideoFPGA acquisition board.
#[derive(Parser)]
#[command(name = "vfpbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the in-system test server around a simulated board.
    Serve(ServeArgs),
    /// Phase A: functional test against an in-process board.
    Functional {
        #[arg(long, default_value = "xc2v1000")]
        board: FpgaModel,
        /// Start from a blank EEPROM (the "(!)" driver state).
        #[arg(long)]
        start_uninitialized: bool,
        #[arg(long)]
        json: bool,
    },
    /// Phase B: in-system test against a running server.
    Insystem {
        #[arg(long)]
        url: String,
        #[arg(long)]
        json: bool,
    },
    /// Register-debugger scripts.
    Urd {
        #[command(subcommand)]
        command: UrdCommand,
    },
    /// EEPROM image utilities.
    Eeprom {
        #[command(subcommand)]
        command: EepromCommand,
    },
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long, env = "VFPBENCH_BIND", default_value = server::DEFAULT_BIND)]
    bind: SocketAddr,
    #[arg(long, env = "VFPBENCH_BOARD", default_value = "xc2v1000")]
    board: FpgaModel,
    #[arg(long)]
    uninitialized: bool,
    #[arg(long, default_value_t = video::DEFAULT_FPS, value_parser = clap::value_parser!(u32).range(1..=120))]
    fps: u32,
    #[arg(long, default_value = "720x576", value_parser = parse_size)]
    size: (u32, u32),
    /// Directory containing a built console (videofpga.html).
    #[arg(long, env = "VFPBENCH_CONSOLE_DIR")]
    console_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum UrdCommand {
    /// Execute a script against an in-process board or a remote server.
    Run {
        file: PathBuf,
        /// Run against a test server instead of an in-process board.
        #[arg(long)]
        url: Option<String>,
        #[arg(long, default_value = "xc2v1000")]
        board: FpgaModel,
        /// In-process board starts with a blank EEPROM.
        #[arg(long)]
        uninitialized: bool,
    },
    /// Print the provisioning script for a board variant.
    Gen {
        #[arg(long, default_value = "xc2v1000")]
        board: FpgaModel,
    },
}

#[derive(Subcommand)]
enum EepromCommand {
    /// Print the hexdump of the stock image for a board variant.
    Dump {
        #[arg(long, default_value = "xc2v1000")]
        board: FpgaModel,
        #[arg(long)]
        blank: bool,
    },
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: u32 = w.parse().map_err(|_| "bad width")?;
    let h: u32 = h.parse().map_err(|_| "bad height")?;
    if w == 0 || h == 0 || w > 4096 || h > 4096 {
        return Err("dimensions must be in 1..=4096".into());
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Serve(args) => serve(args),
        Command::Functional { board, start_uninitialized, json } => {
            let report = runner::run_functional(board, start_uninitialized);
            print!("{}", runner::emit_report(&report, json));
            report.exit_code()
        }
        Command::Insystem { url, json } => match runner::run_insystem(&url) {
            Ok(report) => {
                print!("{}", runner::emit_report(&report, json));
                report.exit_code()
            }
            Err(e) => {
                eprintln!("vfpbench: {e}");
                2
            }
        },
        Command::Urd { command: UrdCommand::Run { file, url, board, uninitialized } } => {
            urd_run(&file, url.as_deref(), board, uninitialized)
        }
        Command::Urd { command: UrdCommand::Gen { board } } => {
            print!("{}", urd::provisioning_script(board));
            0
        }
        Command::Eeprom { command: EepromCommand::Dump { board, blank } } => {
            let img = if blank { EepromImage::blank() } else { eeprom::encode(&BoardDescriptor::stock(board)) };
            print!("{}", eeprom::hexdump(&img));
            0
        }
    };
    ExitCode::from(code as u8)
}

fn serve(args: ServeArgs) -> i32 {
    let mut config = ServerConfig::new(args.bind, args.board, args.uninitialized);
    config.board = BoardConfig { fps: args.fps, width: args.size.0, height: args.size.1, ..config.board };
    config.console_dir = args.console_dir;

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("vfpbench: {e}");
            return 2;
        }
    };
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.bind).await?;
        let addr = listener.local_addr()?;
        println!("vfpbench: serving {} board on http://{addr}", config.board.board_type);
        std::io::stdout().flush()?;
        let board = Board::with_config(config.board);
        server::serve_until(listener, board, config.console_dir, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vfpbench: {e}");
            2
        }
    }
}

fn urd_run(file: &std::path::Path, url: Option<&str>, board_type: FpgaModel, uninitialized: bool) -> i32 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("vfpbench: {}: {e}", file.display());
            return 2;
        }
    };
    let name = file.file_name().map_or_else(|| "script".into(), |n| n.to_string_lossy().into_owned());
    let script = match urd::parse(&name, &text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("vfpbench: {name}: {e}");
            return 2;
        }
    };
    let report = match url {
        Some(url) => {
            let mut bus = match HttpBus::new(url) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("vfpbench: {e}");
                    return 2;
                }
            };
            let report = urd::execute(&script, &mut bus);
            if let Some(e) = bus.error {
                eprintln!("vfpbench: could not reach {url}: {e}");
                return 2;
            }
            report
        }
        None => {
            let board = Board::new(board_type, uninitialized);
            urd::execute(&script, &mut &board)
        }
    };
    print!("{}", urd::format_report(&report));
    if report.passed() {
        0
    } else {
        1
    }
}
