use std::process::{Command, Output};

fn hsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsm"))
        .args(args)
        .env_remove("HSM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn datasets_are_listed_and_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = hsm(&["datasets", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("table pewee: shape [4, 4, 4], n = 198"));
    assert!(dir.path().join("wam.json").exists());
    assert!(dir.path().join("pewee-model1.json").exists());
}

#[test]
fn fit_reports_wam_deviance() {
    let o = hsm(&["fit", "--table", "builtin:wam", "--model", "builtin:wam-model2", "--alt-model", "builtin:wam-model1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("G2 vs alternative: 1.85071"), "{s}");
    assert!(s.contains("df vs alternative: 2"));
}

#[test]
fn decompose_five_way() {
    let o = hsm(&["decompose", "--model", "builtin:five-way", "--hsm-of", "1,2;1,3;2,3;2,4;3,5;4,5;1,4"]);
    let s = stdout(&o);
    assert!(s.contains("closure: {1,2} {1,3} {2,3} {2,4} {3,5} {4,5}"), "{s}");
    assert!(s.contains("closure dividers: {2,3}"));
    assert!(s.contains("tight: false"));
    assert!(s.contains(": true"));
}

#[test]
fn test_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = Command::new(env!("CARGO_BIN_EXE_hsm"))
            .args(["test", "--table", "builtin:pewee", "--model", "builtin:pewee-model1", "--steps", "20000", "--burn-in", "2000"])
            .arg("--basis-cache")
            .arg(&cache)
            .arg("--out")
            .arg(&out)
            .env("HSM_SEED", "5")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("test.json")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert!(a.contains("\"seed\": 5"));
    assert!(dir.path().join("a/histogram.csv").exists());
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
}

#[test]
fn exit_codes() {
    let o = hsm(&["test", "--table", "builtin:pewee", "--model", "builtin:pewee-model1", "--steps", "0", "--burn-in", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hsm(&["fit", "--table", "missing.json", "--model", "builtin:wam-model1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hsm(&["basis", "--model", "builtin:uniform-common"]);
    assert_eq!(o.status.code(), Some(4));
    let o = hsm(&["basis", "--model", "builtin:uniform-common", "--allow-lattice-basis"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn basis_prints_degree_three_loop() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("qi.json");
    std::fs::write(
        &spec,
        r#"{"shape": [4, 4], "structural_zeros": [[1,1],[2,2],[3,3],[4,4]], "facets": [[1],[2]]}"#,
    )
    .unwrap();
    let o = hsm(&["basis", "--model", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("[{(1,2),(2,3),(3,1)}||{(1,3),(2,1),(3,2)}]"));
}
