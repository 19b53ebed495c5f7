mod common;

use proptest::prelude::*;
use vfpbench::board::{Board, I2cAddress, I2cTransaction, TransactionResult, TxnStatus};
use vfpbench::eeprom::{validate, FpgaModel};
use vfpbench::urd::{self, execute, format_report, parse, Command, Outcome, UPCB1B_SCRIPT};

fn addr() -> impl Strategy<Value = I2cAddress> {
    (0x08u8..=0x77).prop_map(|a| I2cAddress::new(a).unwrap())
}

fn command() -> impl Strategy<Value = Command> {
    let bytes = |lo| proptest::collection::vec(any::<u8>(), lo..12);
    prop_oneof![
        (addr(), bytes(1)).prop_map(|(addr, bytes)| Command::Write { addr, bytes }),
        (addr(), any::<u8>(), 1usize..=256).prop_map(|(addr, pointer, count)| Command::Read { addr, pointer, count }),
        (addr(), any::<u8>(), bytes(1)).prop_map(|(addr, pointer, bytes)| Command::Expect { addr, pointer, bytes }),
        (0u64..100_000).prop_map(|ms| Command::Delay { ms }),
        "[a-zA-Z0-9 #:.,()-]{0,30}".prop_map(|text| Command::Print { text }),
        Just(Command::Scan),
    ]
}

fn ack(read_bytes: Vec<u8>) -> TransactionResult {
    TransactionResult { status: TxnStatus::Ack, read_bytes }
}

/// Script that page-writes `img` then verifies every page.
fn write_then_verify(img: &[u8; 256]) -> String {
    let mut s = String::new();
    for (i, page) in img.chunks(16).enumerate() {
        s.push_str(&format!("w 0x50 {:#04x}", i * 16));
        page.iter().for_each(|b| s.push_str(&format!(" {b:#04x}")));
        s.push('\n');
    }
    for (i, page) in img.chunks(16).enumerate() {
        s.push_str(&format!("x 0x50 {:#04x}", i * 16));
        page.iter().for_each(|b| s.push_str(&format!(" {b:#04x}")));
        s.push('\n');
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_then_parse_is_a_fixed_point(cmds in proptest::collection::vec(command(), 0..20)) {
        let text: String = cmds.iter().map(|c| format!("{c}\n")).collect();
        let first = parse("a", &text).unwrap();
        let parsed: Vec<Command> = first.commands.iter().map(|(_, c)| c.clone()).collect();
        prop_assert_eq!(&parsed, &cmds);
        let second = parse("a", &first.to_string()).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn line_numbers_increase(text in "(w 0x50 0x00 0x01|s|# note|)(\n(w 0x50 0x00 0x01|s|# note|)){0,15}") {
        let script = parse("a", &text).unwrap();
        prop_assert!(script.commands.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn verify_passes_iff_store_is_faithful(
        img in proptest::collection::vec(any::<u8>(), 256),
        fault in proptest::option::of((any::<u8>(), 1u8..=255)),
    ) {
        let img: [u8; 256] = img.try_into().unwrap();
        let script = parse("img", &write_then_verify(&img)).unwrap();
        let mut store = common::FlatEeprom::new([0xFF; 256]);
        let mut bus = |t: &I2cTransaction| {
            let mut read = store.apply(t.write_bytes(), t.read_count());
            // a faulty store corrupts one cell on readback
            if let Some((cell, delta)) = fault {
                let start = t.write_bytes().first().copied().unwrap_or(0);
                for (i, b) in read.iter_mut().enumerate() {
                    if start.wrapping_add(i as u8) == cell {
                        *b = b.wrapping_add(delta);
                    }
                }
            }
            ack(read)
        };
        let report = execute(&script, &mut bus);
        prop_assert_eq!(report.passed(), fault.is_none());
        if let Some((cell, _)) = fault {
            prop_assert_eq!(report.failing_line(), Some(17 + cell as usize / 16));
        }
    }

    #[test]
    fn nothing_runs_after_a_failure(n_before in 0usize..10, n_after in 1usize..10, nack in any::<bool>()) {
        let mut text = "w 0x50 0x00 0x01\n".repeat(n_before);
        text.push_str(if nack { "w 0x40 0x00\n" } else { "x 0x50 0x00 0x02\n" });
        text.push_str(&"w 0x50 0x00 0x01\n".repeat(n_after));
        let script = parse("a", &text).unwrap();
        let mut calls = 0;
        let mut bus = |t: &I2cTransaction| {
            calls += 1;
            if t.address().value() == 0x50 { ack(vec![0x01; t.read_count()]) }
            else { TransactionResult { status: TxnStatus::AddressNack, read_bytes: vec![] } }
        };
        let report = execute(&script, &mut bus);
        prop_assert_eq!(calls, n_before + 1);
        prop_assert_eq!(report.outcomes.len(), n_before + 1);
        prop_assert_eq!(report.failing_line(), Some(n_before + 1));
    }
}

#[test]
fn malformed_scripts_blame_the_right_line() {
    for (text, line) in common::MALFORMED_SCRIPTS {
        let err = parse("bad", text).expect_err(text);
        assert_eq!(err.line, line, "{text:?}: {err}");
    }
    assert!(parse("bad", "w 0x50 0x100").unwrap_err().message.contains("8 bits"));
}

#[test]
fn grammar_examples() {
    let s = parse("t", "w 0x50 0x00 0xA5\n").unwrap();
    assert_eq!(s.commands, vec![(1, Command::Write { addr: I2cAddress::EEPROM, bytes: vec![0x00, 0xA5] })]);
    let s = parse("t", "x 0x50 0x02 0x04").unwrap();
    assert_eq!(s.commands[0].1, Command::Expect { addr: I2cAddress::EEPROM, pointer: 2, bytes: vec![4] });
    let s = parse("t", "  # c\n\nd 10 # wait\np \"a # b\"\ns\nr 80 0 3").unwrap();
    assert_eq!(s.commands.iter().map(|(l, _)| *l).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
    assert_eq!(s.commands[1].1, Command::Print { text: "a # b".into() });
    assert_eq!(s.commands[3].1, Command::Read { addr: I2cAddress::EEPROM, pointer: 0, count: 3 });
}

#[test]
fn execution_examples() {
    let b250 = Board::new(FpgaModel::Xc2v250, false);
    let r = execute(&parse("t", "x 0x50 0x02 0x04").unwrap(), &mut &b250);
    assert_eq!(r.failing_line(), Some(1));
    assert_eq!(r.outcomes[0].outcome, Outcome::Mismatch { expected: vec![0x04], observed: vec![0x02] });
    let text = format_report(&r);
    assert!(text.contains("expected [04] observed [02]"), "{text}");
    assert!(text.ends_with("RESULT: FAIL\n"));

    let r = execute(&parse("t", "w 0x40 0x00").unwrap(), &mut &b250);
    assert_eq!(r.outcomes[0].outcome, Outcome::Nack(TxnStatus::AddressNack));

    let r = execute(&parse("t", "s\nr 0x50 0x00 2").unwrap(), &mut &b250);
    assert_eq!(r.outcomes[0].observed, common::STOCK_DEVICES.to_vec());
    assert_eq!(r.outcomes[1].observed, vec![0xA5, 0x01]);
    let text = format_report(&r);
    assert_eq!(text.lines().count(), 3);
    assert!(text.ends_with("RESULT: PASS\n"));

    assert_eq!(format_report(&execute(&parse("t", "").unwrap(), &mut &b250)), "RESULT: PASS\n");
}

#[test]
fn golden_script_provisions_and_is_idempotent() {
    assert_eq!(UPCB1B_SCRIPT, urd::provisioning_script(FpgaModel::Xc2v1000));
    let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scripts/upcb1b.urd")).unwrap();
    assert_eq!(golden, UPCB1B_SCRIPT);

    let board = Board::new(FpgaModel::Xc2v1000, true);
    let script = parse("upcb1b.urd", UPCB1B_SCRIPT).unwrap();
    assert!(execute(&script, &mut &board).passed());
    let once = board.eeprom_image();
    assert!(validate(&once).is_ok());
    assert_eq!(once.0[2], 0x04);
    assert!(board.pci_identify().driver_bound);
    assert!(execute(&script, &mut &board).passed());
    assert_eq!(board.eeprom_image(), once);
}
