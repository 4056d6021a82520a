use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn pifit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pifit"))
}

fn examples(dir: &Path) -> PathBuf {
    let p = dir.join("examples.csv");
    fs::write(&p, pifit::examples::example_csv()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    pifit().args(args).output().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn version_and_help() {
    let out = run(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("pifit "));
    assert!(run(&["--help"]).status.success());
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn fit_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let out = run(&["--quiet", "fit", input.to_str().unwrap(), "--model", "LS5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dataset,model,quantity,kind,estimate,se,lower,upper,reason"));
    // 8 experiments x (2 parameters + 7 statistics)
    assert_eq!(lines.count(), 8 * 9);
}

#[test]
fn fit_auto_writes_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&["-q", "fit", input.to_str().unwrap(), "--model", "auto", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(&out_dir), ["fit_results.json", "fit_tidy.csv"]);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("fit_results.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "pifit.results");
    let tidy = fs::read_to_string(out_dir.join("fit_tidy.csv")).unwrap();
    assert!(tidy.contains(",Ph10,"), "photoinhibited examples switch to Ph10");
    assert!(tidy.contains(",LS5,"));
}

#[test]
fn reads_standard_input() {
    let mut child = pifit()
        .args(["-q", "fit", "-", "--model", "lm"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"pi_information,I,P\nX,0,0.1\nX,100,1.9\nX,200,4.1\nX,300,6.0\nX,400,8.1\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("X,lm,alpha,parameter,"));
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "pi_information,I,P\nA,0,0\nA,10,x\nA,20,2\nA,30,3\nA,40,4\n").unwrap();
    let out = run(&["fit", bad.to_str().unwrap(), "--model", "LS5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2"), "{err}");

    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["fit", missing.to_str().unwrap(), "--model", "LS5"]).status.code(), Some(2));

    let good = examples(dir.path());
    assert_eq!(run(&["fit", good.to_str().unwrap(), "--model", "LS99"]).status.code(), Some(2));
    assert_eq!(run(&["fit", good.to_str().unwrap(), "--model", "LS5", "--level", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["--threads", "0", "fit", good.to_str().unwrap(), "--model", "LS5"]).status.code(), Some(2));
}

#[test]
fn underdetermined_fit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("five.csv");
    fs::write(&p, "pi_information,I,P\nA,0,0\nA,100,4\nA,200,6\nA,400,5\nA,800,3\n").unwrap();
    let out = run(&["-q", "fit", p.to_str().unwrap(), "--model", "Ph11", "--respiration"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn classify_with_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let out_dir = dir.path().join("c");
    let out = run(&["classify", input.to_str().unwrap(), "--summary", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(&out_dir), ["class_frequency.svg", "classify.csv"]);
    let csv = fs::read_to_string(out_dir.join("classify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("dataset,label,model,aicc_lm,aicc_LS5,aicc_Ph10,guards,error\n"));
    let svg = fs::read_to_string(out_dir.join("class_frequency.svg")).unwrap();
    assert!(roxmltree::Document::parse(&svg).is_ok());
    assert!(String::from_utf8_lossy(&out.stderr).contains("photoinhibited"));
}

#[test]
fn predict_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let out_dir = dir.path().join("p");
    let o = out_dir.to_str().unwrap();
    let out = run(&["-q", "predict", input.to_str().unwrap(), "--model", "LS2", "--grid-points", "50", "--ci", "--out", o]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("predict.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("dataset,model,I,P,lower,upper"));
    assert_eq!(csv.lines().count(), 1 + 8 * 50);

    let out = run(&["-q", "plot", input.to_str().unwrap(), "--model", "LS2", "--ci", "--out", o]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let svgs: Vec<String> = listing(&out_dir).into_iter().filter(|f| f.ends_with("_LS2.svg")).collect();
    assert_eq!(svgs.len(), 8);
    for f in svgs {
        assert!(roxmltree::Document::parse(&fs::read_to_string(out_dir.join(f)).unwrap()).is_ok());
    }
    assert!(!listing(&out_dir).iter().any(|f| f.contains(".tmp")));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let i = input.to_str().unwrap();
    let one = run(&["-q", "--threads", "1", "fit", i, "--model", "Ph10"]);
    let env = pifit().env("PIFIT_THREADS", "3").args(["-q", "fit", i, "--model", "Ph10"]).output().unwrap();
    assert!(one.status.success() && env.status.success());
    assert_eq!(one.stdout, env.stdout);
}
