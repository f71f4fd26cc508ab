use std::path::PathBuf;

use assert_cmd::Command;

fn corpus(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(file)
}

fn cli() -> Command {
    Command::cargo_bin("litmus-axiom").unwrap()
}

fn sb(n: u32) -> tempfile::NamedTempFile {
    let out = cli().args(["gen-sb", &n.to_string()]).output().unwrap();
    assert!(out.status.success());
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), out.stdout).unwrap();
    f
}

#[test]
fn store_buffering_has_three_states() {
    let f = sb(2);
    let out = cli().args(["run", "--model", "c11_simp"]).arg(f.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Test SB2 model=c11_simp");
    assert_eq!(lines[1], "Undefined: no");
    assert_eq!(lines[2], "States 3");
    assert!(!text.contains("r1=0; r2=0"));
    assert_eq!(lines[6], "Query: not-witnessed");
    assert_eq!(lines.len(), 7);
}

#[test]
fn data_race_exits_two() {
    let out = cli().args(["run", "--model", "opencl_simp"]).arg(corpus("mp_wg_split.litmus")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout).unwrap().contains("Undefined: yes"));
}

#[test]
fn region_choice_decides_relaxed_outcome() {
    let query = |file| {
        let out = cli().args(["run", "--model", "opencl_simp"]).arg(corpus(file)).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        String::from_utf8(out.stdout).unwrap().lines().last().unwrap().to_string()
    };
    assert_eq!(query("sb_fgb.litmus"), "Query: witnessed");
    assert_eq!(query("sb_global.litmus"), "Query: not-witnessed");
}

#[test]
fn cat_file_matches_builtin() {
    let model = litmus_axiom::models::model_text("c11_simp", Default::default()).unwrap();
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), model).unwrap();
    let sbf = sb(3);
    let by_name = cli().args(["run", "--model", "c11_simp"]).arg(sbf.path()).output().unwrap();
    let by_file = cli().args(["run", "--cat"]).arg(f.path()).arg(sbf.path()).output().unwrap();
    let strip = |o: &[u8]| String::from_utf8(o.to_vec()).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&by_name.stdout), strip(&by_file.stdout));
}

#[test]
fn errors_exit_one() {
    cli().args(["run", "--model", "c11_simp", "/nonexistent.litmus"]).assert().code(1);
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), "test bad c11\natomic int x;\n{ store(x, 1, ACQ); }\n").unwrap();
    cli().args(["run", "--model", "c11_simp"]).arg(f.path()).assert().code(1);
    // exactly one model source
    cli().args(["run"]).arg(corpus("sb_fgb.litmus")).assert().failure();
}

#[test]
fn work_item_scope_needs_flag() {
    let file = corpus("lb_work_item.litmus");
    cli().args(["run", "--model", "opencl_simp"]).arg(&file).assert().code(1);
    cli().args(["run", "--model", "opencl_simp", "--allow-wi"]).arg(&file).assert().code(2);
}

#[test]
fn csv_run_output() {
    let f = sb(2);
    let out = cli().args(["run", "--model", "c11_simp", "--format", "csv"]).arg(f.path()).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "test,model,undefined,outcome,candidates,truncated");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn workers_from_environment_do_not_change_results() {
    let f = sb(3);
    let run = |w: &str| {
        cli().env("LITMUS_AXIOM_WORKERS", w).args(["run", "--model", "c11_simp"]).arg(f.path()).output().unwrap().stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn bench_csv() {
    let out = cli()
        .args(["bench", "--models", "c11_simp", "--from", "2", "--to", "3", "--repeats", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "model,N,mean_seconds,states,timed_out");
    assert!(lines[1].starts_with("c11_simp,2,") && lines[1].ends_with(",3,false"));
    assert!(lines[2].starts_with("c11_simp,3,") && lines[2].ends_with(",7,false"));
}

#[test]
fn oracle_reports_zero_violations() {
    let out = cli().args(["oracle", "--seeds", "200"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("instances 200"));
    assert!(text.contains("\nviolations 0\n"));
    assert!(text.contains("throughput"));
}

#[test]
fn gen_sb_bounds() {
    cli().args(["gen-sb", "1"]).assert().failure();
    cli().args(["gen-sb", "11"]).assert().failure();
    cli().args(["gen-sb", "10"]).assert().success();
}
