use std::path::PathBuf;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halting-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(args: &[&str]) -> (i32, serde_json::Value) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = lab(&all);
    let v = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o)));
    (o.status.code().unwrap(), v)
}

fn temp_file(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("halting-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn encode_and_decode_roundtrip() {
    let path = temp_file("halt.asm", "HALT\n");
    let o = lab(&["encode", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "102672");
    let o = lab(&["decode", "0x19110"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("HALT"));
}

#[test]
fn run_exit_codes() {
    let halt = temp_file("inc.asm", "INC r0\nHALT\n");
    let o = lab(&["run", halt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("output=1"));
    let spin = temp_file("spin.asm", "JMP 0\n");
    let o = lab(&["run", spin.to_str().unwrap(), "--fuel", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FuelExhausted"));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(lab(&["run"]).status.code(), Some(1));
    assert_eq!(lab(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(lab(&["run", "/no/such/file.asm"]).status.code(), Some(1));
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn trace_is_json_lines() {
    let spin = temp_file("count.asm", "INC r1\nJMP -1\n");
    let o = lab(&["run", spin.to_str().unwrap(), "--fuel", "50", "--trace", "10"]);
    let lines: Vec<serde_json::Value> =
        stdout(&o).lines().filter(|l| l.starts_with('{')).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() >= 5);
    assert!(lines.iter().all(|l| l.get("step").is_some() && l.get("regs").is_some()));
}

#[test]
fn decide_on_the_diagonal_pair() {
    let (code, v) = json(&["decide", "@k", "--input", "@s"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["verdict"]["verdict"], "NotHalts", "{v}");
    let (code, v) = json(&["decide", "@s", "--input", "0", "--fuel", "1000"]);
    assert_eq!(code, 2);
    assert_eq!(v["verdict"]["verdict"], "Unknown", "{v}");
}

#[test]
fn liar_sentences() {
    for (s, want) in [("self: not-true", "GAP"), ("quote(self: not-true): not-true", "T"), ("self: not-words(7)", "F")] {
        let o = lab(&["liar", s]);
        assert_eq!(o.status.code(), Some(0), "{s}");
        assert!(stdout(&o).contains(want), "{s}: {}", stdout(&o));
    }
}

#[test]
fn demos_succeed() {
    let manifest = std::env::temp_dir().join(format!("halting-lab-manifest-{}.json", std::process::id()));
    let o = lab(&["demo-diagonal", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["programs"].as_array().unwrap().len(), 5);
    assert_eq!(lab(&["demo-recursion"]).status.code(), Some(0));
    assert_eq!(lab(&["tables"]).status.code(), Some(0));
    assert_eq!(lab(&["bridge"]).status.code(), Some(0));
}

#[test]
fn sweep_is_deterministic() {
    let args = ["sweep", "--range", "50", "--fuel", "1000", "--budget", "1000", "--format", "json"];
    let (a, b) = (lab(&args), lab(&args));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 51);
    let v: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(v["summary"]["counts"]["not_halts"], 50, "{v}");
    assert_eq!(v["summary"]["audit_passed"], true);
}

#[test]
fn tables_check_rows_from_a_file() {
    let ok = temp_file("rows.txt", "GAP T\nT T\nF F\n");
    assert_eq!(lab(&["tables", "--rows", ok.to_str().unwrap()]).status.code(), Some(0));
    let bad = temp_file("bad-rows.txt", "T F\n");
    let (code, v) = json(&["tables", "--rows", bad.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["necessitation_holds"], false);
}
