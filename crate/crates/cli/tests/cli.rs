use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn hatch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hatch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn hatch_stdin(args: &[&str], cwd: &Path, input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hatch"))
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout_lines(o: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn synth(dir: &Path, views: usize) {
    let o = hatch(&["synth", "--seed", "1", "--views", &views.to_string(), "--out", "scene"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn supervise_three_views() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 3);
    let o = hatch(&["supervise", "scene/manifest.json", "--out", "bundle"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    assert_eq!(lines.len(), 3);
    assert_eq!((lines[2]["from"].as_u64(), lines[2]["to"].as_u64()), (Some(1), Some(2)));
    assert!(lines.iter().all(|l| l["mean_s"].as_f64().unwrap() > 0.0));
    assert!(tmp.path().join("bundle/S_0_2.hsup").is_file());
}

#[test]
fn supervise_single_view_warns() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 1);
    let o = hatch(&["supervise", "scene/manifest.json", "--out", "bundle"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("single-view"));
    assert_eq!(fs::read_to_string(tmp.path().join("bundle/actions.json")).unwrap(), "[]");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = hatch(&["supervise", "nowhere/manifest.json", "--out", "b"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    fs::write(tmp.path().join("manifest.json"), r#"{"schema":"hatch-manifest/9","scene_id":"x","views":[]}"#).unwrap();
    let invalid = hatch(&["supervise", "manifest.json", "--out", "b"], tmp.path());
    assert_eq!(invalid.status.code(), Some(1));

    synth(tmp.path(), 2);
    fs::remove_file(tmp.path().join("scene/depth_1.pfm")).unwrap();
    let gone = hatch(&["supervise", "scene/manifest.json", "--out", "b"], tmp.path());
    assert_eq!(gone.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gone.stderr).contains("view 1"));

    assert_eq!(hatch(&["no-such-command"], tmp.path()).status.code(), Some(1));
    assert_eq!(hatch(&["--config", "absent.json", "selfcheck"], tmp.path()).status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 2);
    fs::write(tmp.path().join("cfg.json"), r#"{"correspondence": {"n": 2}, "stride": 2}"#).unwrap();
    let o = hatch(&["--config", "cfg.json", "supervise", "scene/manifest.json", "--out", "a"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let cfg: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("a/config.json")).unwrap()).unwrap();
    assert_eq!((cfg["correspondence"]["n"].as_u64(), cfg["stride"].as_u64()), (Some(2), Some(2)));

    let o = hatch(&["--config", "cfg.json", "supervise", "scene/manifest.json", "--out", "b", "--n", "3"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let cfg: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("b/config.json")).unwrap()).unwrap();
    assert_eq!((cfg["correspondence"]["n"].as_u64(), cfg["stride"].as_u64()), (Some(3), Some(2)));

    fs::write(tmp.path().join("bad.json"), r#"{"correspondence": {"n": 0}}"#).unwrap();
    let o = hatch(&["--config", "bad.json", "supervise", "scene/manifest.json", "--out", "c"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!tmp.path().join("c").exists());
}

#[test]
fn teacher_actions_match_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 3);
    let o = hatch(&["teacher-actions", "scene/manifest.json"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    hatch(&["supervise", "scene/manifest.json", "--out", "bundle"], tmp.path());
    let bundled = fs::read_to_string(tmp.path().join("bundle/actions.json")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim_end(), bundled);
}

const GT: &str = r#"{"gold_actions":[{"from":0,"to":1,"action":[{"turn_left_deg":20}]}],"gold_answer":"2.5","sub_category":"general","question_type":"fill","n_views":2}"#;

#[test]
fn reward_streams_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let good = r#"<action>[{"from":0,"to":1,"action":[{"turn_left_deg":20}]}]</action><answer>2.5</answer>"#;
    let mut input = String::new();
    for k in 0..300 {
        let raw = if k % 3 == 0 { good } else { "<answer>2.5" };
        input += &format!("{}\n", serde_json::json!({"id": k, "raw_output": raw, "ground_truth": serde_json::from_str::<serde_json::Value>(GT).unwrap()}));
        if k == 7 {
            input += "\n";
        }
    }
    let o = hatch_stdin(&["--jobs", "3", "reward"], tmp.path(), &input);
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    assert_eq!(lines.len(), 301);
    for (k, l) in lines[..300].iter().enumerate() {
        assert_eq!(l["id"], k);
        let expected = if k % 3 == 0 { 3.0 } else { 0.0 };
        assert_eq!(l["total"], expected);
    }
    assert_eq!(lines[300]["summary"]["records"], 300);
    assert_eq!(lines[300]["summary"]["total"], 1.0);
}

#[test]
fn reward_reports_bad_records_and_empty_batches() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hatch_stdin(&["reward", "-"], tmp.path(), "");
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["summary"]["records"], 0);

    let input = format!(
        "{}\nnot json\n",
        serde_json::json!({"id": "a", "raw_output": "<action>oops</action><answer>2.5</answer>", "ground_truth": serde_json::from_str::<serde_json::Value>(GT).unwrap()})
    );
    let o = hatch_stdin(&["reward"], tmp.path(), &input);
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    assert_eq!(lines.len(), 3);
    assert_eq!((lines[0]["format"].as_u64(), lines[0]["act_acc"].as_f64()), (Some(0), Some(0.0)));
    assert_eq!(lines[0]["ans_acc"], 1.0);
    assert!(lines[1]["error"].is_string());
    assert_eq!(lines[2]["summary"]["errors"], 1);
}

#[test]
fn reward_with_ground_truth_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("gt.jsonl"), format!("{{\"id\":\"q1\",\"ground_truth\":{GT}}}\n")).unwrap();
    let input = r#"{"id":"q1","raw_output":"<answer>2.5</answer>"}
{"id":"q2","raw_output":"<answer>2.5</answer>"}
"#;
    fs::write(tmp.path().join("batch.jsonl"), input).unwrap();
    let o = hatch(&["reward", "batch.jsonl", "--gt", "gt.jsonl"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    assert_eq!(lines[0]["ans_acc"], 1.0);
    assert!(lines[1]["error"].as_str().unwrap().contains("no ground truth"));

    fs::write(tmp.path().join("bad_gt.jsonl"), "{\"id\":1}\n").unwrap();
    let o = hatch(&["reward", "batch.jsonl", "--gt", "bad_gt.jsonl"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn selfcheck_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hatch(&["selfcheck", "--seed", "0", "--trials", "1000"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let lines = stdout_lines(&o);
    assert!(lines.iter().all(|l| l["pass"] == true));

    let o = hatch(&["selfcheck", "--trials", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vacuous"));

    let o = hatch(&["selfcheck", "--trials", "20", "--inject-fault"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout_lines(&o).iter().any(|l| l["pass"] == false));
}

#[test]
fn synth_is_deterministic_and_honors_spec() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("spec.json"), r#"{"views": 4, "width": 20, "height": 16}"#).unwrap();
    for out in ["a", "b"] {
        let o = hatch(&["synth", "spec.json", "--seed", "5", "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["manifest.json", "depth_0.pfm", "depth_3.pfm"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(name)).unwrap(),
            fs::read(tmp.path().join("b").join(name)).unwrap()
        );
    }
    fs::write(tmp.path().join("typo.json"), r#"{"veiws": 4}"#).unwrap();
    let o = hatch(&["synth", "typo.json", "--out", "c"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
