use std::path::Path;
use std::process::{Command, Output};

fn misinfo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misinfo"))
        .current_dir(dir)
        .env_remove("MISINFO_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(out: Output) -> Output {
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn corpus(dir: &Path, n: usize) {
    ok(misinfo(
        dir,
        &[
            "generate",
            "--out",
            "c.jsonl",
            "--n-articles",
            &n.to_string(),
        ],
    ));
}

const SMALL: &[&str] = &[
    "--rank-tta",
    "3",
    "--rank-hta",
    "4",
    "--rank-tags",
    "4",
    "--n-perm",
    "10",
    "--k",
    "5",
];

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 120);
    ok(misinfo(
        d,
        &[
            &["build-aspects", "--corpus", "c.jsonl", "--out", "a.bin"],
            SMALL,
        ]
        .concat(),
    ));
    assert!(d.join("a.bin.json").exists());
    ok(misinfo(
        d,
        &[
            &[
                "decompose",
                "--input",
                "a.bin",
                "--out",
                "e.bin",
                "--normalization",
                "zscore",
                "--r-joint",
                "3",
            ],
            SMALL,
        ]
        .concat(),
    ));
    ok(misinfo(
        d,
        &[
            "infer",
            "--embedding",
            "e.bin",
            "--corpus",
            "c.jsonl",
            "--out",
            "b.csv",
            "--edges",
            "g.txt",
            "--k",
            "5",
        ],
    ));
    let beliefs = std::fs::read_to_string(d.join("b.csv")).unwrap();
    let mut lines = beliefs.lines();
    assert_eq!(
        lines.next(),
        Some("article_id,belief,predicted_label,was_labeled")
    );
    assert_eq!(lines.count(), 120);
    let edges = std::fs::read_to_string(d.join("g.txt")).unwrap();
    for line in edges.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(f.len(), 3);
        assert!(f[0].parse::<usize>().unwrap() < f[1].parse::<usize>().unwrap());
        assert!(f[2].parse::<f64>().unwrap() > 0.0);
    }

    let out = ok(misinfo(
        d,
        &["evaluate", "--beliefs", "b.csv", "--truth", "c.jsonl"],
    ));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // label_fraction 0.1 of 120 reveals 12
    assert_eq!(metrics["n"], 108);
    let f1 = metrics["f1"].as_f64().unwrap();
    assert!(f1 > 0.5, "f1 {f1}");
}

#[test]
fn infer_accepts_a_labels_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 80);
    ok(misinfo(
        d,
        &[
            &["build-aspects", "--corpus", "c.jsonl", "--out", "a.bin"],
            SMALL,
        ]
        .concat(),
    ));
    ok(misinfo(
        d,
        &[
            &[
                "decompose",
                "--input",
                "a.bin",
                "--out",
                "e.bin",
                "--normalization",
                "zscore",
                "--r-joint",
                "2",
            ],
            SMALL,
        ]
        .concat(),
    ));
    let text = std::fs::read_to_string(d.join("c.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let fake = records.iter().find(|r| r["label"] == "fake").unwrap()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    let real = records.iter().find(|r| r["label"] == "real").unwrap()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    std::fs::write(
        d.join("l.csv"),
        format!("article_id,label\n{fake},fake\n{real},real\n"),
    )
    .unwrap();
    ok(misinfo(
        d,
        &[
            "infer",
            "--embedding",
            "e.bin",
            "--labels",
            "l.csv",
            "--out",
            "b.csv",
            "--k",
            "5",
        ],
    ));
    let beliefs = std::fs::read_to_string(d.join("b.csv")).unwrap();
    let labeled = beliefs.lines().filter(|l| l.ends_with(",true")).count();
    assert_eq!(labeled, 2);

    std::fs::write(
        d.join("only_fake.csv"),
        format!("article_id,label\n{fake},fake\n"),
    )
    .unwrap();
    let out = misinfo(
        d,
        &[
            "infer",
            "--embedding",
            "e.bin",
            "--labels",
            "only_fake.csv",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(code(&out), 4);
}

#[test]
fn run_writes_reports_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 80);
    std::fs::write(
        d.join("run.conf"),
        "# small run\nrank_tta = 3\nrank_hta = 4\nrank_tags = 4\nn_perm = 10\nk = 9\ntrials = 5\nr_joint = 2\nnormalization = zscore\nlabel_fraction = 0.2\n",
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let base = [
            "--config", "run.conf", "run", "--corpus", "c.jsonl", "--trials", "2", "--k", "5",
        ];
        ok(misinfo(d, &[&base[..], extra].concat()))
    };
    run(&["--report", "r.json", "--trials-csv", "t.csv"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    // flags beat the file
    assert_eq!(report["trials"].as_array().unwrap().len(), 2);
    assert_eq!(report["config"]["k"], 5);
    assert_eq!(report["config"]["n_perm"], 10);
    let csv = std::fs::read_to_string(d.join("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    run(&["--report", "s.json", "--sweep", "k=3,7"]);
    for k in [3, 7] {
        let path = d.join(format!("s.k={k}.json"));
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["config"]["k"], k);
    }

    run(&["--report", "again.json", "--trials-csv", "t2.csv"]);
    assert_eq!(
        std::fs::read(d.join("t.csv")).unwrap(),
        std::fs::read(d.join("t2.csv")).unwrap()
    );
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 60);

    let missing = misinfo(d, &["run", "--corpus", "nope.jsonl"]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.jsonl"));

    std::fs::write(d.join("bad.conf"), "k = 5\nbogus = 1\n").unwrap();
    assert_eq!(
        code(&misinfo(
            d,
            &["--config", "bad.conf", "run", "--corpus", "c.jsonl"]
        )),
        2
    );
    assert_eq!(
        code(&misinfo(
            d,
            &["run", "--corpus", "c.jsonl", "--trials", "0"]
        )),
        2
    );

    std::fs::write(d.join("broken.jsonl"), "{\"id\": \"a\"\n").unwrap();
    assert_eq!(
        code(&misinfo(
            d,
            &[
                "build-aspects",
                "--corpus",
                "broken.jsonl",
                "--out",
                "a.bin"
            ]
        )),
        2
    );

    // too few labels to reveal one per class
    let protocol = misinfo(
        d,
        &[
            &[
                "run",
                "--corpus",
                "c.jsonl",
                "--label-fraction",
                "0.001",
                "--trials",
                "1",
            ],
            SMALL,
        ]
        .concat(),
    );
    assert_eq!(code(&protocol), 4);

    let threads = Command::new(env!("CARGO_BIN_EXE_misinfo"))
        .current_dir(d)
        .env("MISINFO_THREADS", "many")
        .args(["generate", "--out", "x.jsonl"])
        .output()
        .unwrap();
    assert_eq!(code(&threads), 2);
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 60);
    ok(misinfo(
        d,
        &[
            &["build-aspects", "--corpus", "c.jsonl", "--out", "a.bin"],
            SMALL,
        ]
        .concat(),
    ));
    // unit-column blocks share only their mean offset, which the permutation test rejects
    let out = misinfo(
        d,
        &[&["decompose", "--input", "a.bin", "--out", "e.bin"], SMALL].concat(),
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("joint rank is 0"));
    let out = misinfo(
        d,
        &[
            &[
                "decompose",
                "--input",
                "a.bin",
                "--out",
                "e.bin",
                "--r-joint",
                "500",
            ],
            SMALL,
        ]
        .concat(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d, 80);
    let mut reports = Vec::new();
    for (n, name) in [("1", "one.csv"), ("3", "three.csv")] {
        let out = Command::new(env!("CARGO_BIN_EXE_misinfo"))
            .current_dir(d)
            .env("MISINFO_THREADS", n)
            .args(
                [
                    &[
                        "run",
                        "--corpus",
                        "c.jsonl",
                        "--trials",
                        "2",
                        "--r-joint",
                        "2",
                        "--normalization",
                        "zscore",
                    ],
                    SMALL,
                ]
                .concat(),
            )
            .args([
                "--label-fraction",
                "0.2",
                "--trials-csv",
                name,
                "--report",
                &format!("{name}.json"),
            ])
            .output()
            .unwrap();
        ok(out);
        reports.push(std::fs::read(d.join(name)).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
