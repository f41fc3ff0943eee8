// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aim::pgm::parse_pgm_header;
use aim::report::sha256_hex;

fn aim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> toml::Table {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let doc: toml::Table = text.parse().expect("report is TOML");
    doc["report"].as_table().unwrap().clone()
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn mul_writes_products_and_checksum() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "0xffffffff\n0x0\n0x1f\n").unwrap();
    fs::write(dir.path().join("b.txt"), "0xffffffff\n0x5\n0x2\n").unwrap();
    let out = aim(
        &["mul", "--bits", "32", "--a", "a.txt", "--b", "b.txt", "--out", "p.txt", "--verify", "--parallel"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let products = fs::read(dir.path().join("p.txt")).unwrap();
    assert_eq!(products, b"0xfffffffe00000001\n0x0\n0x3e\n");
    let rep = report(&out);
    assert_eq!(rep["checksums"]["out"].as_str().unwrap(), sha256_hex(&products));
    assert_eq!(rep["counters"]["multiplications"].as_integer(), Some(3));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "0x1ff\n").unwrap();
    fs::write(dir.path().join("bad.txt"), "0xq\n").unwrap();
    let too_wide = aim(&["mul", "--bits", "8", "--a", "a.txt", "--b", "a.txt", "--out", "p"], dir.path());
    assert_eq!(too_wide.status.code(), Some(2));
    let unparsable = aim(&["mul", "--bits", "8", "--a", "bad.txt", "--b", "a.txt", "--out", "p"], dir.path());
    assert_eq!(unparsable.status.code(), Some(2));
    let missing = aim(&["dse", "--bits", "64", "--profile", "nope", "--out", "x"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn dse_selects_calibrated_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = aim(
        &[
            "dse",
            "--bits",
            "65536",
            "--profile",
            &fixture("calibrated_65536.profile"),
            "--caps",
            &fixture("device.caps"),
            "--out",
            "dse.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("dse.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("P_intra0,P_intra1,P_inter,S0,S1,bottleneck"));
    assert!(lines.next().unwrap().starts_with("11,12,3,193,184,aie,"));
}

#[test]
fn dse_without_room_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("caps"), "lut = 0.01\n").unwrap();
    let out = aim(&["dse", "--bits", "1024", "--caps", "caps", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn place_outputs_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let out = aim(
        &["place", "--bits", "65536", "--intra0", "11", "--intra1", "12", "--tasks", "3", "--out", "p.csv", "--grid", "g.txt"],
        dir.path(),
    );
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(rep["counters"]["cells"].as_integer(), Some(396));
    assert_eq!(rep["counters"]["violations"].as_integer(), Some(0));
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(csv.lines().count(), 397);
    let grid = fs::read_to_string(dir.path().join("g.txt")).unwrap();
    assert_eq!(grid.chars().filter(|&c| c == '.').count(), 4);

    let long = aim(&["place", "--chains", "1", "--length", "51"], dir.path());
    assert_eq!(long.status.code(), Some(3));
    let full = aim(&["place", "--chains", "41", "--length", "10"], dir.path());
    assert_eq!(full.status.code(), Some(3));
}

#[test]
fn rsa_round_trip_restores_plaintext() {
    let dir = tempfile::tempdir().unwrap();
    let key = "modulus = 0xca1\ne_pub = 0x11\ne_prv = 0xac1\np = 0x3d\nq = 0x35\n";
    fs::write(dir.path().join("key"), key).unwrap();
    fs::write(dir.path().join("m.txt"), "0x41\n0x0\n0xca0\n").unwrap();
    let enc = aim(
        &["rsa", "encrypt", "--key", "key", "--in", "m.txt", "--out", "c.txt", "--trace", "t.csv"],
        dir.path(),
    );
    assert!(enc.status.success(), "{}", String::from_utf8_lossy(&enc.stderr));
    assert!(fs::read_to_string(dir.path().join("c.txt")).unwrap().starts_with("0xae6\n"));
    let trace = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("kernel,task,iteration,mont,step,start,end"));
    let dec = aim(&["rsa", "decrypt", "--key", "key", "--in", "c.txt", "--out", "d.txt"], dir.path());
    assert!(dec.status.success());
    assert_eq!(
        fs::read(dir.path().join("d.txt")).unwrap(),
        fs::read(dir.path().join("m.txt")).unwrap()
    );
    // e_pub * e_prv is not 1 mod phi
    fs::write(dir.path().join("bad"), key.replace("0xac1", "0xac3")).unwrap();
    let bad = aim(&["rsa", "encrypt", "--key", "bad", "--in", "m.txt", "--out", "c"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn mandelbrot_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "mandelbrot", "--center-re", "-0.5", "--center-im", "0", "--scale", "1.5", "--width", "12",
        "--height", "9", "--max-iter", "30", "--frac-bits", "40",
    ];
    let run = |extra: &[&str], out: &str| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out]);
        let o = aim(&args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(out)).unwrap()
    };
    let one = run(&[], "a.pgm");
    let (w, h, max, off) = parse_pgm_header(&one).unwrap();
    assert_eq!((w, h, max), (12, 9, 255));
    assert_eq!(one.len() - off, 108);
    assert_eq!(run(&["--slots", "16"], "b.pgm"), one);
    assert_eq!(run(&["--threads", "3"], "c.pgm"), one);
}
