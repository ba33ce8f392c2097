use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hsrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsrc"))
        .args(args)
        .output()
        .expect("run hsrc")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SPEC: &str = r#"
name = "tiny"
replicates = 4
seed = 5

[scenario]
scenario = "II"
types = 3
d = 80
q = 0.4

[accuracy]
epsilon = 0.1
delta = 0.2
ell = 64

[sweep]
variable = "q"
values = [0.2, 0.4]
"#;

#[test]
fn decoder_dump_has_a_row_per_outcome() {
    let text = stdout(&hsrc(&["decoder", "dump", "--T", "7"]));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains(','));
    assert!(lines.count() > 0);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "tiny.toml", SPEC);
    let a = stdout(&hsrc(&["simulate", &spec, "--out", "-"]));
    let b = stdout(&hsrc(&["simulate", &spec, "--sequential", "--out", "-"]));
    assert_eq!(a, b);
    let mut rdr = csv::Reader::from_reader(a.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.len(), 14);
    assert_eq!(rdr.records().count(), 6);
    let c = stdout(&hsrc(&["simulate", &spec, "--seed", "6", "--out", "-"]));
    assert_ne!(a, c);
}

#[test]
fn simulate_writes_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "tiny.toml", SPEC);
    let out = dir.path().join("rows.json");
    stdout(&hsrc(&["simulate", &spec, "--format", "json", "--out", out.to_str().unwrap()]));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);
}

#[test]
fn omt_greedy_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "line.omt",
        "[stops]\n4\n[costs]\n0 1 2 3\n1 0 1 2\n2 1 0 1\n3 2 1 0\n[coverage]\n0 0 1 0\n0 0 0 1\n[energy]\n0 0 1 0\n0 0 0 1\n[budget]\n10\n",
    );
    let greedy: serde_json::Value =
        serde_json::from_str(&stdout(&hsrc(&["omt", "solve", &inst, "--greedy", "--format", "json"]))).unwrap();
    let exact: serde_json::Value =
        serde_json::from_str(&stdout(&hsrc(&["omt", "solve", &inst, "--exact", "--format", "json"]))).unwrap();
    assert_eq!(greedy["cost"], 6.0);
    assert_eq!(exact["cost"], 6.0);
    assert_eq!(greedy["feasible"], true);
}

#[test]
fn invalid_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.omt", "[stops]\nthree\n");
    let o = hsrc(&["omt", "solve", &bad, "--greedy"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert!(!hsrc(&["simulate", "/nonexistent/spec.toml"]).status.success());
    assert!(!hsrc(&["decoder", "dump", "--T", "1"]).status.success());
}

#[test]
fn scenario_dump_writes_nodes_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "scenario = \"III\"\ntypes = 2\nd = 50\nq = 0.5\n");
    let out = dir.path().join("dump");
    stdout(&hsrc(&["scenario", "generate", &cfg, "--seed", "3", "--dump", "--out", out.to_str().unwrap()]));
    let nodes = fs::read_to_string(out.join("nodes.csv")).unwrap();
    let stops = fs::read_to_string(out.join("stops.csv")).unwrap();
    assert!(nodes.lines().count() > 50);
    assert_eq!(stops.lines().count(), 9);
}

#[test]
fn analyze_emits_a_row_per_stop() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = write(
        dir.path(),
        "ctx.toml",
        "[[stops]]\nn_bar = [100, 50]\nxi = [0.5, 0.5]\npsi = [true, true]\ni = [1, 1]\nell = 128\nt = 16\nw = 30\nslot_width_bits = 96\n\n\
         [[stops]]\nn_bar = [10, 300]\nxi = [0.3, 0.9]\npsi = [true, false]\ni = [1, 2]\nell = 128\nt = 16\nw = 30\nslot_width_bits = 96\n",
    );
    let text = stdout(&hsrc(&["analyze", &ctx]));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(&rdr.headers().unwrap()[0], "stop");
    assert_eq!(rdr.records().count(), 2);
}
