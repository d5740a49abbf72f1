#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub const SMALL: &str = r#"
months = [1]
scenarios = ["no-phev", "uniform-tc"]
[data]
days = 2
[svr]
c = 10.0
[grid]
c = [10.0]
nu = [0.5]
gamma = [10.0]
"#;

pub fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phev-demand"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

pub fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// JSON without the wall-clock field.
pub fn stable_json(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("generated_at");
    v
}

/// Runs every command twice into separate directories.
pub fn all_commands_are_byte_identical(work: &Path) -> Result<(), String> {
    let cfg = write_config(work, SMALL);
    let runs: [&[&str]; 6] = [
        &["demand-curve"],
        &["synth-profile"],
        &["train"],
        &["evaluate", "--model", "a0/model.json"],
        &["grid-search"],
        &["table"],
    ];
    for tag in ["a", "b"] {
        for (i, args) in runs.iter().enumerate() {
            let mut full: Vec<String> = args.iter().map(|s| s.replace("a0", &format!("{tag}2"))).collect();
            full.extend(["--config".into(), cfg.clone(), "--seed".into(), "5".into(), "--out".into(), format!("{tag}{i}")]);
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            let out = bin(&refs, work);
            if !out.status.success() {
                return Err(format!("{args:?}: {}", text(&out.stderr)));
            }
        }
    }
    for i in 0..runs.len() {
        let a = work.join(format!("a{i}"));
        let b = work.join(format!("b{i}"));
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        if names.is_empty() {
            return Err(format!("{:?} wrote nothing", runs[i]));
        }
        for name in names {
            let (pa, pb) = (a.join(&name), b.join(&name));
            let first_line = fs::read_to_string(&pa).unwrap().lines().next().unwrap_or("").to_string();
            if name.to_string_lossy().ends_with(".json") {
                let (va, vb) = (stable_json(&pa), stable_json(&pb));
                if va != vb {
                    return Err(format!("{} differs", pa.display()));
                }
                if !fs::read_to_string(&pa).unwrap().contains("config_hash") {
                    return Err(format!("{} has no config hash", pa.display()));
                }
            } else {
                if fs::read(&pa).unwrap() != fs::read(&pb).unwrap() {
                    return Err(format!("{} differs", pa.display()));
                }
                if !first_line.starts_with("# config_hash=") {
                    return Err(format!("{} has no config hash", pa.display()));
                }
            }
        }
    }
    Ok(())
}
