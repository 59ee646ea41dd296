use std::fs;
use std::process::{Command, Output};

fn cyldla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyldla")).args(args).env_remove("CYLDLA_SEED").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_writes_growth_table() {
    let o = cyldla(&["simulate", "cycle:16", "--layers", "10", "--replicas", "20", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let csv = String::from_utf8(o.stdout).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# cyldla v1 config_hash="));
    assert_eq!(lines.next(), Some("replica,m,T_m"));
    assert_eq!(lines.count(), 20 * 24);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&cyldla(&["simulate"])), 2);
    assert_eq!(code(&cyldla(&["simulate", "cycle:16", "--bogus"])), 2);
    assert_eq!(code(&cyldla(&["simulate", "cycle:16", "--replicas", "0"])), 2);
    let capped = cyldla(&["simulate", "cycle:16", "--cap", "10"]);
    assert_eq!(code(&capped), 3);
    assert!(String::from_utf8(capped.stderr).unwrap().contains("exceeded the cap"));
    assert_eq!(code(&cyldla(&["verify", "walk1d"])), 0);
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cyldla"));
        c.args(["simulate", "cycle:8", "--layers", "5", "--replicas", "3"]).env_remove("CYLDLA_SEED");
        if let Some(v) = env {
            c.env("CYLDLA_SEED", v);
        }
        c.output().unwrap()
    };
    let a = run(Some("5"));
    let b = cyldla(&["simulate", "cycle:8", "--layers", "5", "--replicas", "3", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8(a.stderr).unwrap().contains("# resolved seed=5"));
    assert_ne!(run(None).stdout, a.stdout);
}

#[test]
fn snapshot_and_render_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("c.snap");
    let snap_s = snap.to_str().unwrap();
    let o = cyldla(&["simulate", "cycle:12", "--layers", "6", "--replicas", "2", "--out", dir.path().to_str().unwrap(), "--snapshot", snap_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["growth.csv", "density.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let text = fs::read_to_string(&snap).unwrap();
    assert!(text.starts_with("cyldla v1 n=12 d=2 "));

    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    assert_eq!(code(&cyldla(&["render", snap_s, "--scale", "2", "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&cyldla(&["render", snap_s, "--scale", "2", "--out", b.to_str().unwrap()])), 0);
    let img = fs::read(&a).unwrap();
    assert!(img.starts_with(b"P6\n24 "));
    assert_eq!(img, fs::read(&b).unwrap());

    let o = cyldla(&["render", snap_s, "--style", "bars"]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(snap.with_extension("svg")).unwrap().starts_with("<svg"));
}

#[test]
fn render_falls_back_for_other_bases() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("k.snap");
    fs::write(&snap, "cyldla v1 n=4 d=3 t=0 M=1\n0 0 0\n0 1 0\n0 2 0\n0 3 0\n").unwrap();
    let o = cyldla(&["render", snap.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stderr).unwrap().contains("warning"));
    assert!(snap.with_extension("svg").exists());
    assert_eq!(code(&cyldla(&["render", dir.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn small_commands_run() {
    let o = cyldla(&["gen-graph", "complete:3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "# complete:3 n=3 d=2\n0 1\n0 2\n1 2\n");
    let o = cyldla(&["spectra", "complete:4", "--all"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "n,d,lambda,gap,mixing_time\n4,3,0.333333333333,0.666666666667,1\n");
    assert_eq!(String::from_utf8(o.stderr).unwrap().matches("# eigenvalue").count(), 4);
    let o = cyldla(&["mixing", "complete:3"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "n,d,lambda,gap,mixing_time\n3,2,0.500000000000,0.500000000000,1\n");
    assert!(String::from_utf8(o.stderr).unwrap().contains("fast-mixing threshold undefined"));
    let o = cyldla(&["excursions", "cycle:4", "--mode", "exact", "--alpha", "2", "--trials", "2000"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("-> pass"));
    assert_eq!(code(&cyldla(&["fit-gamma", "complete:4", "complete:5"])), 2);
    let o = cyldla(&["density", "cycle:8", "--layers", "4", "--overshoot", "3", "--replicas", "5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("D(m) = "));
}
