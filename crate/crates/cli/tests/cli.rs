use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_greedyperm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line_points(dir: &Path) -> PathBuf {
    write(dir, "line.txt", "0\n1\n3\n7\n")
}

fn grid(dir: &Path, n: usize) -> PathBuf {
    let mut body = String::new();
    for i in 0..n {
        let x = (i * 7919 % 1000) as f64 / 997.0;
        let y = (i * 104729 % 1000) as f64 / 991.0 + i as f64 * 1e-7;
        body.push_str(&format!("{x} {y}\n"));
    }
    write(dir, "grid.txt", &body)
}

#[test]
fn permute_gonzalez_line_example() {
    let d = TempDir::new().unwrap();
    let p = line_points(d.path());
    let o = run(&["permute", "--points", s(&p), "--algorithm", "gonzalez"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o),
        "greedyperm v1 n=4 start=0 factor_claim=1\n0 0 - -\n1 3 0 7\n2 2 0 3\n3 1 0 1\n"
    );
}

#[test]
fn exact_clarkson_file_equals_gonzalez() {
    let d = TempDir::new().unwrap();
    let p = line_points(d.path());
    let g = run(&["permute", "--points", s(&p), "--algorithm", "gonzalez"]);
    let c = run(&[
        "permute",
        "--points",
        s(&p),
        "--algorithm",
        "clarkson",
        "--lazy",
        "1",
        "--cell-approx",
        "1",
        "--heap-approx",
        "1",
    ]);
    assert_eq!(g.stdout, c.stdout);
}

#[test]
fn check_appends_factor_and_refuses_large_inputs() {
    let d = TempDir::new().unwrap();
    let p = line_points(d.path());
    let o = run(&[
        "permute",
        "--points",
        s(&p),
        "--algorithm",
        "gonzalez",
        "--check",
    ]);
    assert!(stdout(&o).ends_with("greedy_factor=1\n"));
    let big = write(
        d.path(),
        "big.txt",
        &(0..20_001).map(|i| format!("{i}\n")).collect::<String>(),
    );
    let o = run(&[
        "permute",
        "--points",
        s(&big),
        "--algorithm",
        "clarkson-bb",
        "--check",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["permute"])), 1);
    assert_eq!(code(&run(&["permute", "--points", "missing.txt"])), 2);
    let bad = write(d.path(), "bad.txt", "1 2\n3\n");
    assert_eq!(code(&run(&["permute", "--points", s(&bad)])), 2);
    let p = line_points(d.path());
    assert_eq!(
        code(&run(&["permute", "--points", s(&p), "--start", "9"])),
        1
    );
    assert_eq!(
        code(&run(&["permute", "--points", s(&p), "--metric", "l3"])),
        1
    );
    assert_eq!(code(&run(&["bench", "--gen", "uniform:2:0"])), 1);
    let dup = write(d.path(), "dup.txt", "0\n1\n1\n");
    assert_eq!(
        code(&run(&[
            "permute",
            "--points",
            s(&dup),
            "--algorithm",
            "clarkson-bb"
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "permute",
            "--points",
            s(&dup),
            "--algorithm",
            "gonzalez"
        ])),
        0
    );
    assert_eq!(code(&run(&["verify", "--points", s(&p)])), 1);
}

#[test]
fn tree_refine_round_trip() {
    let d = TempDir::new().unwrap();
    let p = grid(d.path(), 300);
    let t = d.path().join("t.txt");
    assert_eq!(code(&run(&["tree", "--points", s(&p), "--out", s(&t)])), 0);
    assert!(fs::read_to_string(&t)
        .unwrap()
        .starts_with("greedytree v1 n=300 alpha=0.5 delta=3 gamma=48 root=0\n"));
    let o = run(&["refine", "--points", s(&p), "--in", s(&t), "--check"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let f: f64 = out
        .lines()
        .last()
        .unwrap()
        .strip_prefix("greedy_factor=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(f <= 1.0 + 1.0 / 300.0 + 1e-9);
    let v = run(&[
        "verify",
        "--points",
        s(&p),
        "--tree",
        s(&t),
        "--packing",
        "0.027777777777777776",
        "--covering",
        "4",
    ]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    assert!(stdout(&v)
        .lines()
        .all(|l| l.contains(" PASS") || l.contains(" VACUOUS")));
}

#[test]
fn merge_of_subset_trees() {
    let d = TempDir::new().unwrap();
    let p = grid(d.path(), 400);
    let (a, b, m) = (d.path().join("a"), d.path().join("b"), d.path().join("m"));
    assert_eq!(
        code(&run(&[
            "tree",
            "--points",
            s(&p),
            "--subset",
            "0:150",
            "--out",
            s(&a)
        ])),
        0
    );
    let o = run(&[
        "tree",
        "--points",
        s(&p),
        "--subset",
        "150:400",
        "--algorithm",
        "clarkson-bb",
        "--start",
        "200",
        "--out",
        s(&b),
    ]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&b).unwrap().contains("root=200"));
    let tr = d.path().join("trace");
    assert_eq!(
        code(&run(&[
            "merge",
            "--points",
            s(&p),
            "--a",
            s(&a),
            "--b",
            s(&b),
            "--out",
            s(&m),
            "--trace",
            s(&tr)
        ])),
        0
    );
    let v = run(&[
        "verify",
        "--points",
        s(&p),
        "--tree",
        s(&m),
        "--trace",
        s(&tr),
    ]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));
    assert!(stdout(&v).contains("trace.consistent PASS"));
    // overlapping inputs are rejected
    assert_ne!(
        code(&run(&[
            "merge",
            "--points",
            s(&p),
            "--a",
            s(&a),
            "--b",
            s(&a)
        ])),
        0
    );
    assert_eq!(
        code(&run(&["tree", "--points", s(&p), "--subset", "5:5"])),
        1
    );
}

#[test]
fn verify_flags_a_bad_permutation() {
    let d = TempDir::new().unwrap();
    let p = line_points(d.path());
    let bad = write(
        d.path(),
        "perm.txt",
        "greedyperm v1 n=4 start=0 factor_claim=1\n0 0 - -\n1 1 0 1\n2 2 1 2\n3 3 2 4\n",
    );
    let o = run(&["verify", "--points", s(&p), "--perm", s(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("perm.greedy FAIL"));
}

#[test]
fn verify_audits_runs() {
    let d = TempDir::new().unwrap();
    let p = grid(d.path(), 120);
    for alg in ["clarkson", "clarkson-bb"] {
        let o = run(&["verify", "--points", s(&p), "--audit", alg]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        let out = stdout(&o);
        for check in [
            "fvd.cell",
            "fvd.neighbor",
            "fvd.pruning",
            "fvd.aspect_ratio",
            "bb.isolation",
        ] {
            assert!(out.contains(check), "{check} missing in {out}");
        }
    }
    assert_eq!(
        code(&run(&["verify", "--points", s(&p), "--audit", "gonzalez"])),
        1
    );
}

#[test]
fn bench_rows_and_trace() {
    let d = TempDir::new().unwrap();
    let tr = d.path().join("trace");
    let o = run(&[
        "bench",
        "--gen",
        "expline:64",
        "--algorithm",
        "clarkson-bb",
        "--trace",
        s(&tr),
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("n,algorithm,seconds,distance_evals,touches,max_degree,max_cell_entries")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "64");
    assert_eq!(row[1], "clarkson-bb");
    assert!(row[4].parse::<u64>().unwrap() > 0);
    assert_eq!(
        fs::read_to_string(&tr)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with("site="))
            .count(),
        63
    );
    for alg in ["gonzalez", "clarkson", "build"] {
        assert_eq!(
            code(&run(&[
                "bench",
                "--gen",
                "uniform:2:600",
                "--algorithm",
                alg
            ])),
            0
        );
    }
    assert_eq!(
        code(&run(&[
            "bench",
            "--gen",
            "uniform:2:60",
            "--algorithm",
            "build",
            "--trace",
            s(&tr)
        ])),
        1
    );
}

#[test]
fn lifo_backburner_gives_the_same_tree() {
    let d = TempDir::new().unwrap();
    let mut body = String::new();
    for i in 0..200 {
        let (x, y) = ((i * 37 % 101) as f64 / 101.0, (i * 53 % 103) as f64 / 103.0);
        if i % 2 == 0 {
            body.push_str(&format!("{x} {y}\n"));
        } else {
            body.push_str(&format!("{} {}\n", 3.0 + x * 1e-6, 3.0 + y * 1e-6));
        }
    }
    let p = write(d.path(), "two.txt", &body);
    let f = run(&[
        "tree",
        "--points",
        s(&p),
        "--algorithm",
        "clarkson-bb",
        "--backburner",
        "fifo",
    ]);
    let l = run(&[
        "tree",
        "--points",
        s(&p),
        "--algorithm",
        "clarkson-bb",
        "--backburner",
        "lifo",
    ]);
    assert_eq!(code(&f), 0);
    assert_eq!(f.stdout, l.stdout);
}
