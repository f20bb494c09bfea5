use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nngp-info"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_code(out: &Output) -> String {
    assert!(!out.status.success());
    assert!(out.stdout.is_empty(), "no records on failure");
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    err["error"]["code"].as_str().unwrap().to_string()
}

/// 20x20 random images, 40 per digit, so every variant can draw 30.
struct ToyMnist {
    _dir: TempDir,
    images: PathBuf,
    labels: PathBuf,
}

impl ToyMnist {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let (count, side) = (400u32, 20u32);
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut img = Vec::new();
        for v in [0x803u32, count, side, side] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        img.extend((0..count * side * side).map(|_| (next() >> 56) as u8));
        let mut lab = Vec::new();
        for v in [0x801u32, count] {
            lab.extend_from_slice(&v.to_be_bytes());
        }
        lab.extend((0..count).map(|i| (i % 10) as u8));
        let images = dir.path().join("images.idx");
        let labels = dir.path().join("labels.idx");
        fs::write(&images, img).unwrap();
        fs::write(&labels, lab).unwrap();
        Self {
            _dir: dir,
            images,
            labels,
        }
    }

    fn args(&self) -> [String; 4] {
        [
            "--mnist-images".into(),
            self.images.display().to_string(),
            "--mnist-labels".into(),
            self.labels.display().to_string(),
        ]
    }
}

fn run_with(base: &[&str], extra: &[String]) -> Output {
    bin().args(base).args(extra).output().unwrap()
}

type Row = BTreeMap<String, String>;

/// Comment lines, then header and rows.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Row>) {
    let comments: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(String::from)
        .collect();
    let body: String = text
        .lines()
        .skip(comments.len())
        .collect::<Vec<_>>()
        .join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let rows = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            header
                .iter()
                .zip(r.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect();
    (comments, rows)
}

fn csv_tables(text: &str) -> Vec<(Vec<String>, Vec<Row>)> {
    text.split("\n\n")
        .filter(|t| !t.trim().is_empty())
        .map(parse_csv)
        .collect()
}

#[test]
fn error_codes() {
    assert_eq!(error_code(&run(&["bound", "--n", "1"])), "INVALID_N");
    assert_eq!(
        error_code(&run(&["sweep", "--n-list", ""])),
        "INVALID_SWEEP"
    );
    assert_eq!(
        error_code(&run(&["sweep", "--n-list", "100,100"])),
        "INVALID_SWEEP"
    );
    assert_eq!(
        error_code(&run(&["sweep", "--n-list", "200,100"])),
        "INVALID_SWEEP"
    );
    assert_eq!(error_code(&run(&["sweep", "--seeds", ""])), "INVALID_SWEEP");
    assert_eq!(
        error_code(&run(&["oracle", "--fixture", "identity", "--n", "20"])),
        "N_TOO_LARGE"
    );
    assert_eq!(
        error_code(&run(&["oracle", "--variant", "synthetic", "--n", "13"])),
        "N_TOO_LARGE"
    );
    assert_eq!(
        error_code(&run(&["symmetry", "--weight-bits", "0"])),
        "INVALID_ARGUMENT"
    );
    assert_eq!(
        error_code(&run(&["info", "--delta", "1.5"])),
        "INVALID_ARGUMENT"
    );
    assert_eq!(
        error_code(&run(&["info", "--jitter=-1"])),
        "INVALID_ARGUMENT"
    );
    let missing = run(&[
        "info",
        "--mnist-images",
        "/nonexistent/images",
        "--mnist-labels",
        "/nonexistent/labels",
    ]);
    assert_eq!(error_code(&missing), "DATASET_NOT_FOUND");
    assert_eq!(
        error_code(&run(&[
            "info",
            "--variant",
            "synthetic",
            "--intra-cos",
            "2"
        ])),
        "INVALID_ARGUMENT"
    );

    let usage = run(&["info", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_code(&usage), "USAGE");
}

#[test]
fn singular_kernel_fails_without_jitter_and_succeeds_with_it() {
    // Images differ only in the brightness of one pixel, so all normalise
    // to the same input.
    let dir = tempfile::tempdir().unwrap();
    let count = 40u32;
    let mut img = Vec::new();
    for v in [0x803u32, count, 2, 2] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for i in 0..count {
        img.extend_from_slice(&[1 + (i % 2) as u8, 0, 0, 0]);
    }
    let mut lab = Vec::new();
    for v in [0x801u32, count] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend((0..count).map(|i| (i % 10) as u8));
    let images = dir.path().join("i");
    let labels = dir.path().join("l");
    fs::write(&images, img).unwrap();
    fs::write(&labels, lab).unwrap();
    let paths = [
        "--mnist-images".to_string(),
        images.display().to_string(),
        "--mnist-labels".into(),
        labels.display().to_string(),
    ];
    let out = run_with(&["info", "--n", "2", "--samples", "100"], &paths);
    let code = error_code(&out);
    assert!(
        code == "NOT_POSITIVE_DEFINITE" || code == "RESIDUAL_TOO_LARGE",
        "{code}"
    );

    let out = run_with(
        &["info", "--n", "2", "--samples", "100", "--jitter", "0.1"],
        &paths,
    );
    let (_, rows) = parse_csv(&stdout(&out));
    assert_eq!(rows.len(), 1);
}

#[test]
fn csv_and_json_carry_identical_values() {
    let base = [
        "info",
        "--variant",
        "synthetic",
        "--n",
        "30",
        "--d0",
        "64",
        "--samples",
        "3000",
        "--seed",
        "4",
    ];
    let csv_text = stdout(&run(&[&base[..], &["--format", "csv"]].concat()));
    let json_text = stdout(&run(&[&base[..], &["--format", "json"]].concat()));

    let (comments, rows) = parse_csv(&csv_text);
    let records: Vec<Value> = serde_json::from_str(&json_text).unwrap();
    assert_eq!(rows.len(), records.len());
    assert_eq!(rows.len(), 1);

    let version = comments[0].trim_start_matches("# nngp-info ").to_string();
    let config: Value = serde_json::from_str(comments[1].trim_start_matches("# config: ")).unwrap();
    let rec = records[0].as_object().unwrap();
    assert_eq!(rec["version"], Value::from(version));
    let mut json_cfg = rec["config"].clone();
    json_cfg["format"] = Value::from("csv");
    assert_eq!(json_cfg, config);

    for (key, text) in &rows[0] {
        if key == "wall_ms" {
            continue;
        }
        let v = &rec[key];
        match v {
            Value::Number(x) => {
                let parsed: f64 = text.parse().unwrap();
                assert_eq!(parsed.to_bits(), x.as_f64().unwrap().to_bits(), "{key}");
            }
            Value::Bool(b) => assert_eq!(text, &b.to_string(), "{key}"),
            Value::String(s) => assert_eq!(text, s, "{key}"),
            Value::Null => assert!(text.is_empty(), "{key}"),
            other => panic!("unexpected {other} for {key}"),
        }
    }
    assert_eq!(rec.len(), rows[0].len() + 2);
}

#[test]
fn standard_columns_in_fixed_order() {
    let text = stdout(&run(&[
        "info",
        "--variant",
        "synthetic",
        "--n",
        "10",
        "--d0",
        "16",
        "--samples",
        "100",
    ]));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "variant,n,seed,depth,samples,c0_nats,c0_stderr,c1_nats,info_upper_nats,raw_bound_c0,error_bound_c0,\
         raw_bound_c1,error_bound_c1,vacuous,wall_ms,c0_per_sample_nats"
    );
}

#[test]
fn bits_are_nats_over_ln2() {
    let base = [
        "info",
        "--variant",
        "synthetic",
        "--n",
        "12",
        "--d0",
        "32",
        "--samples",
        "500",
    ];
    let (_, nats) = parse_csv(&stdout(&run(&base)));
    let (_, bits) = parse_csv(&stdout(&run(&[&base[..], &["--units", "bits"]].concat())));
    for q in ["c0", "c1", "info_upper", "c0_per_sample"] {
        let a: f64 = nats[0][&format!("{q}_nats")].parse().unwrap();
        let b: f64 = bits[0][&format!("{q}_bits")].parse().unwrap();
        assert!(
            (a / std::f64::consts::LN_2 - b).abs() <= 1e-12 * b.abs().max(1.0),
            "{q}"
        );
    }
    assert_eq!(nats[0]["error_bound_c0"], bits[0]["error_bound_c0"]);
}

#[test]
fn sweep_emits_rows_and_aggregates() {
    let toy = ToyMnist::new();
    let out = run_with(
        &[
            "sweep",
            "--n-list",
            "10,20,30",
            "--samples",
            "300",
            "--depth",
            "3",
        ],
        &toy.args(),
    );
    let tables = csv_tables(&stdout(&out));
    assert_eq!(tables.len(), 2);
    let (_, rows) = &tables[0];
    let (_, aggregates) = &tables[1];
    assert_eq!(rows.len(), 27);
    assert_eq!(aggregates.len(), 9);

    let keys: Vec<(String, usize, u64)> = rows
        .iter()
        .map(|r| {
            (
                r["variant"].clone(),
                r["n"].parse().unwrap(),
                r["seed"].parse().unwrap(),
            )
        })
        .collect();
    let order = ["binary_digits", "decimal_digits", "random_labels"];
    let mut sorted = keys.clone();
    sorted.sort_by_key(|(v, n, s)| (order.iter().position(|o| o == v).unwrap(), *n, *s));
    assert_eq!(keys, sorted);

    for agg in aggregates {
        let group: Vec<f64> = rows
            .iter()
            .filter(|r| r["variant"] == agg["variant"] && r["n"] == agg["n"])
            .map(|r| r["c0_nats"].parse().unwrap())
            .collect();
        assert_eq!(group.len(), 3);
        let mean: f64 = agg["c0_nats_mean"].parse().unwrap();
        let min: f64 = agg["c0_nats_min"].parse().unwrap();
        let max: f64 = agg["c0_nats_max"].parse().unwrap();
        assert!((mean - group.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        assert_eq!(min, group.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(max, group.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn sweep_writes_summary_beside_output() {
    let toy = ToyMnist::new();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("runs.json");
    let out = run_with(
        &[
            "sweep",
            "--variant",
            "random_labels,binary_digits",
            "--n-list",
            "8,16",
            "--seeds",
            "5",
            "--samples",
            "200",
            "--format",
            "json",
            "--out",
            out_path.to_str().unwrap(),
        ],
        &toy.args(),
    );
    assert!(stdout(&out).is_empty());
    let rows: Vec<Value> = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let summary: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("runs.summary.json")).unwrap())
            .unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(summary.len(), 4);
    assert_eq!(rows[0]["variant"], "binary_digits");
    assert!(rows
        .iter()
        .all(|r| r["config"]["seeds"] == serde_json::json!([5])));
}

#[test]
fn sweep_is_reproducible() {
    let toy = ToyMnist::new();
    let args = [
        "sweep",
        "--variant",
        "decimal_digits",
        "--n-list",
        "10,15",
        "--samples",
        "400",
    ];
    let strip = |text: String| -> Vec<Vec<(String, String)>> {
        csv_tables(&text)[0]
            .1
            .iter()
            .map(|r| {
                r.iter()
                    .filter(|(k, _)| *k != "wall_ms")
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            })
            .collect()
    };
    let a = strip(stdout(&run_with(&args, &toy.args())));
    let b = strip(stdout(&run_with(&args, &toy.args())));
    assert_eq!(a, b);
}

#[test]
fn bound_with_zero_information() {
    let (_, rows) = parse_csv(&stdout(&run(&["bound", "--n", "50", "--info-nats", "0"])));
    let raw: f64 = rows[0]["raw_bound_c0"].parse().unwrap();
    assert!((raw - (100.0f64 / 0.01).ln() / 49.0).abs() < 1e-15);
    assert!(rows[0]["raw_bound_c1"].is_empty());
}

#[test]
fn bound_reports_both_certificates() {
    let toy = ToyMnist::new();
    let out = run_with(
        &[
            "bound",
            "--variant",
            "decimal_digits",
            "--n",
            "40",
            "--samples",
            "2000",
        ],
        &toy.args(),
    );
    let (_, rows) = parse_csv(&stdout(&out));
    let r = &rows[0];
    assert_eq!(r["bounds_consistent"], "true");
    let e0: f64 = r["error_bound_c0"].parse().unwrap();
    let e1: f64 = r["error_bound_c1"].parse().unwrap();
    assert!((0.0..=1.0).contains(&e0) && (0.0..=1.0).contains(&e1));
    assert_eq!(r["vacuous"], (e0 >= 0.5).to_string());
}

#[test]
fn oracle_fixtures_agree() {
    let (_, rows) = parse_csv(&stdout(&run(&[
        "oracle",
        "--fixture",
        "bivariate",
        "--rho",
        "0.5",
    ])));
    assert_eq!(rows[0]["agree"], "true");
    let p: f64 = rows[0]["oracle_p"].parse().unwrap();
    assert!((p - 1.0 / 3.0).abs() < 0.003);

    let (_, rows) = parse_csv(&stdout(&run(&[
        "oracle",
        "--fixture",
        "identity",
        "--n",
        "10",
    ])));
    assert_eq!(rows[0]["agree"], "true");
    let p: f64 = rows[0]["estimator_p"].parse().unwrap();
    assert_eq!(p, 2f64.powi(-10));
    assert_eq!(rows[0]["estimator_stderr"], "0.0");

    let (_, rows) = parse_csv(&stdout(&run(&[
        "oracle",
        "--variant",
        "synthetic",
        "--d0",
        "32",
        "--n",
        "6",
        "--depth",
        "3",
    ])));
    assert_eq!(rows[0]["agree"], "true");
}

#[test]
fn symmetry_matches_log_gamma_arithmetic() {
    let (_, rows) = parse_csv(&stdout(&run(&[
        "symmetry",
        "--d0",
        "784",
        "--widths",
        "512,512",
        "--weight-bits",
        "32",
    ])));
    let v: f64 = rows[0]["symmetry_nats"].parse().unwrap();
    assert!((v - 14_724_038.737_020_252).abs() < 1e-6);
    assert_eq!(rows[0]["dims"], "784-512-512-1");
    assert!(rows[0]["c0_nats"].is_empty());

    let wide: f64 = parse_csv(&stdout(&run(&[
        "symmetry",
        "--d0",
        "784",
        "--widths",
        "1024,1024",
    ])))
    .1[0]["symmetry_nats"]
        .parse()
        .unwrap();
    assert!(wide / v > 2.0 && wide / v < 4.5);
}

#[test]
fn symmetry_with_information_estimate() {
    let out = run(&[
        "symmetry",
        "--d0",
        "16",
        "--widths",
        "8",
        "--weight-bits",
        "4",
        "--with-c0",
        "--variant",
        "synthetic",
        "--n",
        "10",
        "--samples",
        "200",
    ]);
    let (_, rows) = parse_csv(&stdout(&out));
    assert!(rows[0]["c0_nats"].parse::<f64>().unwrap() >= 0.0);
    assert_eq!(rows[0]["variant"], "synthetic");
}

#[test]
fn kernel_summary() {
    let out = run(&[
        "kernel",
        "--variant",
        "synthetic",
        "--intra-cos",
        "0",
        "--d0",
        "512",
        "--n",
        "50",
        "--depth",
        "2",
    ]);
    let (_, rows) = parse_csv(&stdout(&out));
    let mean: f64 = rows[0]["offdiag_mean"].parse().unwrap();
    assert!((mean - 1.0 / std::f64::consts::PI).abs() < 0.05);
    let residual: f64 = rows[0]["inverse_residual"].parse().unwrap();
    assert!(residual < 1e-3);
}

#[test]
fn records_embed_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("info.csv");
    let out = run(&[
        "info",
        "--variant",
        "synthetic",
        "--n",
        "8",
        "--d0",
        "16",
        "--samples",
        "50",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(stdout(&out).is_empty());
    let text = fs::read_to_string(&out_path).unwrap();
    let (comments, _) = parse_csv(&text);
    let cfg: Value = serde_json::from_str(comments[1].trim_start_matches("# config: ")).unwrap();
    assert_eq!(cfg["command"], "info");
    assert_eq!(cfg["depth"], 7);
    assert_eq!(cfg["samples"], 50);
    assert_eq!(cfg["delta"], 0.01);
    assert_eq!(cfg["synthetic"]["d0"], 16);
    assert!(!Path::new(&dir.path().join("info.summary.csv")).exists());
}
