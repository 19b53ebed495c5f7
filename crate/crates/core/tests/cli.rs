mod common;

use std::process::Command;

use serde_json::Value;
use vfpbench::board::Board;
use vfpbench::eeprom::FpgaModel;
use vfpbench::runner::{emit_report, run_functional, run_functional_on, run_insystem, RunnerError, StepStatus};
use vfpbench::server::{ServerConfig, ServerHandle};

fn vfpbench(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(common::bin_path()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn statuses(r: &vfpbench::runner::TestReport) -> Vec<StepStatus> {
    r.steps.iter().map(|s| s.status).collect()
}

#[test]
fn functional_variants() {
    use StepStatus::*;
    let r = run_functional(FpgaModel::Xc2v250, false);
    assert!(r.passed(), "{}", emit_report(&r, false));
    assert!(r.step("fpga-load").unwrap().detail.contains("0x02"));
    let r = run_functional(FpgaModel::Xc2v1000, true);
    assert!(r.step("re-identification").unwrap().detail.contains("XC2V1000"));
    assert_eq!(statuses(&r), vec![Pass; 5]);

    let board = Board::new(FpgaModel::Xc2v1000, true);
    board.set_eeprom_write_protect(true);
    let r = run_functional_on(&board, FpgaModel::Xc2v1000, true);
    assert_eq!(statuses(&r), vec![Pass, Fail, Skip, Skip, Skip]);
    assert_eq!(r.exit_code(), 1);
    let text = emit_report(&r, false);
    assert!(text.lines().any(|l| l.starts_with("[SKIP] fpga-load")));
    assert!(text.ends_with("OVERALL: FAIL\n"));

    let board = Board::new(FpgaModel::Xc2v1000, false);
    board.set_device_id(0x7130);
    let r = run_functional_on(&board, FpgaModel::Xc2v1000, false);
    assert_eq!(r.steps[0].status, Fail);
}

#[test]
fn functional_is_deterministic() {
    std::thread::scope(|s| {
        for bt in FpgaModel::ALL {
            for blank in [false, true] {
                s.spawn(move || {
                    let a = run_functional(bt, blank);
                    let b = run_functional(bt, blank);
                    assert_eq!(statuses(&a), statuses(&b));
                });
            }
        }
    });
}

#[test]
fn insystem_self_consistency() {
    let srv = ServerHandle::start(ServerConfig::ephemeral(FpgaModel::Xc2v250, false)).unwrap();
    let r = run_insystem(&srv.url()).unwrap();
    assert!(r.passed(), "{}", emit_report(&r, false));
    let names: Vec<_> = r.steps.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["main-page", "grab", "i2c-scan", "led", "eeprom-query", "streaming"]);

    let json: Value = serde_json::from_str(&emit_report(&r, true)).unwrap();
    assert_eq!(json["overall"], "pass");
    assert_eq!(json["phase"], "B");
    assert_eq!(json["steps"].as_array().unwrap().len(), 6);
    let text = emit_report(&r, false);
    assert_eq!(text.lines().count(), 7);
    assert!(text.ends_with("OVERALL: PASS\n"));
}

#[test]
fn insystem_dead_port() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}");
    assert!(matches!(run_insystem(&url), Err(RunnerError::ConnectionFailed { .. })));
    let (code, stdout, _) = vfpbench(&["insystem", "--url", &url]);
    assert_eq!(code, 2);
    assert!(!stdout.contains("[PASS]") && !stdout.contains("[FAIL]"));
}

#[test]
fn functional_binary_json() {
    let (code, stdout, _) = vfpbench(&["functional", "--board", "xc2v250", "--json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["overall"], "pass");
    assert_eq!(v["phase"], "A");
}

#[test]
fn urd_subcommands() {
    let (code, script, _) = vfpbench(&["urd", "gen"]);
    assert_eq!(code, 0);
    assert_eq!(script, vfpbench::urd::UPCB1B_SCRIPT);

    let golden = concat!(env!("CARGO_MANIFEST_DIR"), "/scripts/upcb1b.urd");
    let (code, out, _) = vfpbench(&["urd", "run", golden, "--uninitialized"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.ends_with("RESULT: PASS\n"));
    let (code, out, _) = vfpbench(&["urd", "run", golden, "--board", "xc2v250"]);
    assert_eq!(code, 0, "{out}");

    let dir = std::env::temp_dir().join(format!("vfpbench-urd-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let fail = dir.join("fail.urd");
    std::fs::write(&fail, "p \"check\"\nx 0x50 0x02 0x04\n").unwrap();
    let (code, out, _) = vfpbench(&["urd", "run", fail.to_str().unwrap(), "--board", "xc2v250"]);
    assert_eq!(code, 1);
    assert!(out.contains("2: x 0x50 0x02 0x04 FAIL: expected [04] observed [02]"), "{out}");
    let bad = dir.join("bad.urd");
    std::fs::write(&bad, "s\nw 0x50 0x100\n").unwrap();
    let (code, _, err) = vfpbench(&["urd", "run", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");

    let srv = ServerHandle::start(ServerConfig::ephemeral(FpgaModel::Xc2v1000, true)).unwrap();
    let (code, out, _) = vfpbench(&["urd", "run", golden, "--url", &srv.url()]);
    assert_eq!(code, 0, "{out}");
    assert!(srv.board().pci_identify().driver_bound);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn eeprom_dump() {
    let (code, out, _) = vfpbench(&["eeprom", "dump"]);
    assert_eq!(code, 0);
    assert_eq!(out, include_str!("../data/upcb1b.eeprom.hex"));
    let (_, out, _) = vfpbench(&["eeprom", "dump", "--blank"]);
    assert!(out.lines().all(|l| l.ends_with(" ff ff")));
}
