use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).display().to_string()
}

fn nbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbd")).args(args).output().expect("failed to run nbd")
}

fn stdout(args: &[&str]) -> String {
    let out = nbd(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden(which: &str) {
    let expected = std::fs::read_to_string(root().join(format!("fixtures/tables/table{which}.csv"))).unwrap();
    let got = stdout(&["tables", "--which", which, "--format", "csv"]);
    assert_eq!(got, expected);
}

#[test]
fn table1_matches_golden() {
    golden("1");
}

#[test]
fn table2_matches_golden() {
    golden("2");
}

#[test]
fn table3_matches_golden() {
    golden("3");
}

#[test]
fn verify_reports_cnbd2() {
    let out = stdout(&["verify", &fixture("cnbd2_t5.design")]);
    assert!(out.contains("CNBD2: yes, ℓ = 1\n"), "{out}");
    let out = stdout(&["verify", &fixture("cnbd2_t4.design")]);
    assert!(out.contains("CNBD2: yes, ℓ = 1\n"), "{out}");
}

#[test]
fn verify_self_neighbor_design() {
    let out = stdout(&["verify", &fixture("self_neighbor_t5.design"), "--format", "csv"]);
    assert!(out.contains("cnbd,false\n"));
    assert!(out.contains("no_self_neighbor_d1,false\n"));
}

#[test]
fn optseq_k14() {
    let out = stdout(&["optseq", "--k", "14", "--model", "m1"]);
    assert!(out.contains("v*=5"), "{out}");
    assert!(out.contains("(a,a,b,b,b,c,c,c,d,d,d,e,e,e)"), "{out}");
}

#[test]
fn optseq_csv_uses_fractions() {
    let out = stdout(&["optseq", "--k", "5", "--format", "csv"]);
    assert_eq!(out, "k,v_star,v_minus,v_plus,n_minus,n_plus,value,representative\n5,3,1,2,1,2,17/10,1 2 2 3 3\n");
}

#[test]
fn info_csv_is_exact() {
    let out = stdout(&["info", &fixture("cnbd2_t5.design"), "--format", "csv"]);
    let first = out.lines().next().unwrap();
    assert_eq!(first, "6/5,-3/10,-3/10,-3/10,-3/10");
    assert!(out.contains("trace,6\n"));
    assert!(out.contains("upper_bound_attained,true\n"));
}

#[test]
fn eff_for_block_size() {
    let out = stdout(&["eff", "--k", "6", "--model", "m2", "--format", "csv"]);
    assert!(out.contains("3/4,0.75,"), "{out}");
}

#[test]
fn optdesign_is_loadable() {
    let text = stdout(&["optdesign", "--k", "4", "--t", "4", "--format", "csv"]);
    let d = nbdesign::parse_design(&text).unwrap();
    assert_eq!((d.t(), d.b(), d.k()), (4, 12, 4));
}

#[test]
fn every_subcommand_is_deterministic() {
    let t5 = fixture("cnbd2_t5.design");
    let runs: Vec<Vec<&str>> = vec![
        vec!["verify", &t5],
        vec!["info", &t5, "--model", "m2"],
        vec!["eff", &t5],
        vec!["optseq", "--k", "12"],
        vec!["optdesign", "--k", "5", "--t", "5"],
        vec!["tables", "--which", "1"],
        vec!["simulate", &t5, "--contrast", "1,-1,0,0,0", "--replicates", "1000", "--seed", "9"],
    ];
    for args in runs {
        assert_eq!(stdout(&args), stdout(&args), "{args:?}");
    }
}

#[test]
fn simulate_seed_changes_output() {
    let t5 = fixture("cnbd2_t5.design");
    let a = stdout(&["simulate", &t5, "--contrast", "1,-1,0,0,0", "--replicates", "1000", "--seed", "1"]);
    let b = stdout(&["simulate", &t5, "--contrast", "1,-1,0,0,0", "--replicates", "1000", "--seed", "2"]);
    assert_ne!(a, b);
}

#[test]
fn exit_codes() {
    assert_eq!(nbd(&["tables", "--which", "4"]).status.code(), Some(2));
    assert_eq!(nbd(&["optseq"]).status.code(), Some(2));
    assert_eq!(nbd(&["bogus"]).status.code(), Some(2));
    let t5 = fixture("cnbd2_t5.design");
    assert_eq!(nbd(&["simulate", &t5, "--contrast", "1,x"]).status.code(), Some(2));

    let bad = std::env::temp_dir().join("nbd_cli_bad.design");
    std::fs::write(&bad, "t=3 b=1 k=2\n1 7\n").unwrap();
    assert_eq!(nbd(&["verify", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(nbd(&["optseq", "--k", "2"]).status.code(), Some(1));
    assert_eq!(nbd(&["optdesign", "--k", "5", "--t", "2"]).status.code(), Some(1));
    assert_eq!(nbd(&["simulate", &t5, "--contrast", "1,1,0,0,0"]).status.code(), Some(1));
    assert_eq!(nbd(&["simulate", &t5, "--contrast", "1,-1,0,0,0", "--replicates", "10"]).status.code(), Some(1));
    assert_eq!(nbd(&["verify", "/nonexistent/file.design"]).status.code(), Some(1));
}
