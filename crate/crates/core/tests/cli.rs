use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phototaxis"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "
[suspension]
incidence_deg = 40.0
extinction = 1.0
diffuse = 0.5

[solver]
n_z = 81
";

#[test]
fn basic_state_output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let st = bin()
            .args(["basic-state", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        outs.push(std::fs::read_to_string(out.join("basic_state.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let header = outs[0].lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "z,n_s,G_s,G_s_coll,G_s_diff,q_s,T_s");
    assert_eq!(outs[0].lines().filter(|l| !l.starts_with('#')).count(), 82);
}

#[test]
fn ndjson_rows_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let st = bin()
        .args(["uniform-intensity", "--format", "ndjson", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .status()
        .unwrap();
    assert!(st.success());
    let file = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "ndjson"))
        .unwrap();
    let text = std::fs::read_to_string(file).unwrap();
    let mut n = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.is_object());
        n += 1;
    }
    assert!(n > 10);
}

#[test]
fn bad_configuration_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write_config(tmp.path(), "[suspension]\nswim_sped = 3.0\n");
    let st = bin().args(["basic-state", "--config"]).arg(&unknown).arg("--out").arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let invalid = write_config(tmp.path(), "[suspension]\nalbedo = 1.5\n");
    let st = bin().args(["basic-state", "--config"]).arg(&invalid).arg("--out").arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn unknown_table_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let st = bin().args(["reproduce-table", "7", "--out"]).arg(tmp.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));
}
