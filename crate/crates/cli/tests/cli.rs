use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_robustprice"));
    c.env_remove("ROBUSTPRICE_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn inline_refs(v: Value, market: &Value) -> Value {
    match v {
        Value::Object(o) if o.get("$ref").and_then(Value::as_str) == Some("market.json") => market.clone(),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, inline_refs(v, market))).collect()),
        Value::Array(a) => Value::Array(a.into_iter().map(|v| inline_refs(v, market)).collect()),
        v => v,
    }
}

fn load_schema(name: &str) -> Value {
    let read = |n: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(manifest_path(&format!("schemas/{n}"))).unwrap()).unwrap()
    };
    let mut market = read("market.json");
    let m = market.as_object_mut().unwrap();
    m.remove("$schema");
    m.remove("$id");
    inline_refs(read(name), &market)
}

fn assert_valid(schema: &str, instance: &Value) {
    let validator = jsonschema::validator_for(&load_schema(schema)).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}\n{instance}");
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn price_example() {
    let v = stdout_json(&run(&["price", "--mu", "0.5", "--sigma", "0.3", "--beta", "1"]));
    assert!((v["price"].as_f64().unwrap() - 0.2967).abs() < 5e-4);
    assert!((v["value"].as_f64().unwrap() - 0.3147).abs() < 5e-4);
    assert_valid("price.json", &v);
}

#[test]
fn price_both_objectives() {
    let v = stdout_json(&run(&["price", "--mu", "0.5", "--sigma", "0.1", "--beta", "1", "--objective", "both"]));
    assert_valid("price.json", &v);
    assert_eq!(v["revenue"]["objective"], "revenue");
    assert!(v["revenue"]["price"].as_f64().unwrap() < v["price"].as_f64().unwrap());
}

#[test]
fn ratio_example() {
    let v = stdout_json(&run(&["cr", "--mu", "0.5", "--sigma", "0.5", "--beta", "1.2", "--p", "0.6"]));
    assert!((v["cr"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_valid("cr.json", &v);
}

#[test]
fn bounds_dist_and_compare_follow_their_schemas() {
    let m = ["--mu", "0.5", "--sigma", "0.3", "--beta", "1"];
    for p in ["0.2", "0.4", "0.8"] {
        let b = stdout_json(&run(&[&["bounds", "--p", p], &m[..]].concat()));
        assert_valid("bounds.json", &b);
        let d = stdout_json(&run(&[&["dist", "--p", p], &m[..]].concat()));
        assert_valid("dist.json", &d);
        let inf = b["inf_tail"].as_f64().unwrap();
        let tail: f64 = d["supports"]
            .as_array()
            .unwrap()
            .iter()
            .zip(d["masses"].as_array().unwrap())
            .filter(|(x, _)| x.as_f64().unwrap() >= p.parse::<f64>().unwrap())
            .map(|(_, w)| w.as_f64().unwrap())
            .sum();
        assert!((tail - inf).abs() < 1e-6, "p = {p}: {tail} vs {inf}");
    }
    assert_valid("compare.json", &stdout_json(&run(&["compare", "--mu", "0.5", "--sigma", "0.3", "--beta", "1"])));
    let ub = stdout_json(&run(&[
        "bounds",
        "--p",
        "0.4",
        "--mode",
        "upper-bound",
        "--mu",
        "0.5",
        "--sigma",
        "0.3",
        "--beta",
        "1",
    ]));
    assert_valid("bounds.json", &ub);
    assert_eq!(ub["remark_level"], true);
    let power = stdout_json(&run(&["price", "--mu", "0.5", "--s", "0.4", "--phi", "power:q=1.5", "--beta", "1"]));
    assert_valid("price.json", &power);
}

#[test]
fn infeasible_market_exits_2_with_diagnostic() {
    let out = run(&["price", "--mu", "0.5", "--sigma", "0.8", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_valid("error.json", &v);
    assert_eq!(v["error"], "infeasible");
    assert!((v["tau2"].as_f64().unwrap() - 1.78).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["price", "--mu", "0.5", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["price", "--sigma", "0.3"]).status.code(), Some(1));
    assert_eq!(
        run(&["sweep", "--vary", "sigma", "--from", "1", "--to", "0", "--steps", "3", "--mu", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_3() {
    let out = run(&["price", "--mu", "0.5", "--sigma", "0.3", "--beta", "1", "--out", "/nonexistent-dir/x/out.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn output_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("robustprice-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sweep.csv");
    let args = ["sweep", "--vary", "sigma", "--from", "0", "--to", "0.5", "--steps", "6", "--mu", "0.5", "--beta", "1"];
    let out = run(&args);
    let written = run(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
    assert!(written.status.success() && written.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), out.stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn output_is_byte_deterministic() {
    let args = [
        "sweep",
        "--vary",
        "sigma",
        "--from",
        "0",
        "--to",
        "0.5",
        "--steps",
        "51",
        "--mu",
        "0.5",
        "--beta",
        "1",
        "--objective",
        "both",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let args = ["price", "--mu", "0.7", "--s", "0.8", "--phi", "power:q=1.7", "--beta", "2"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn logging_never_touches_stdout() {
    let args = ["price", "--mu", "0.5", "--sigma", "0.3", "--beta", "1"];
    let quiet = run(&args);
    let loud = bin().args(args).env("ROBUSTPRICE_LOG", "debug").output().unwrap();
    assert_eq!(quiet.stdout, loud.stdout);
    assert!(!loud.stderr.is_empty());
}

const SIGMA_ROWS: [(f64, f64, f64, f64, f64); 11] = [
    // sigma, price with beta = 1, ratio, price with no cap, ratio of that price when beta = 1
    (0.00, 0.5000, 1.0000, 0.5000, 1.0000),
    (0.05, 0.4076, 0.7734, 0.4076, 0.7734),
    (0.10, 0.3672, 0.6382, 0.3672, 0.6382),
    (0.15, 0.3404, 0.5310, 0.3404, 0.5310),
    (0.20, 0.3213, 0.4439, 0.3213, 0.4439),
    (0.25, 0.3073, 0.3728, 0.3073, 0.3728),
    (0.30, 0.2967, 0.3147, 0.2967, 0.3147),
    (0.35, 0.3725, 0.3524, 0.2886, 0.2886),
    (0.40, 0.4763, 0.4763, 0.2823, 0.2823),
    (0.45, 0.6406, 0.6406, 0.2773, 0.2773),
    (0.50, 1.0000, 1.0000, 0.2733, 0.2733),
];

fn sweep(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn sigma_sweep_reproduces_reference_table() {
    let capped = sweep(&[
        "sweep", "--vary", "sigma", "--from", "0", "--to", "0.5", "--steps", "11", "--mu", "0.5", "--beta", "1",
    ]);
    let free = sweep(&[
        "sweep", "--vary", "sigma", "--from", "0", "--to", "0.5", "--steps", "11", "--mu", "0.5", "--beta", "inf",
    ]);
    for ((row, c), f) in SIGMA_ROWS.iter().zip(csv_rows(&capped)).zip(csv_rows(&free)) {
        assert!((num(&c[0]) - row.0).abs() < 1e-9);
        assert!((num(&c[1]) - row.1).abs() <= 5e-4 && (num(&c[3]) - row.2).abs() <= 5e-4, "{c:?}");
        assert!((num(&f[1]) - row.3).abs() <= 5e-4, "{f:?}");
        // the ratio column of the uncapped price is taken in the capped market
        let cr = stdout_json(&run(&["cr", "--mu", "0.5", "--sigma", &c[0], "--beta", "1", "--p", &f[1]]));
        assert!((cr["cr"].as_f64().unwrap() - row.4).abs() <= 5e-4 + 1e-6, "{f:?} {cr}");
    }
    assert_eq!(csv_rows(&free)[10][3], "0.170516");
}

#[test]
fn beta_sweep_reproduces_reference_table() {
    let values = "1.0,1.1,1.2,1.3,1.4,1.5,1.6,1.8,2.0,inf";
    let half = sweep(&["sweep", "--vary", "beta", "--values", values, "--mu", "0.5", "--sigma", "0.5"]);
    let expected = [
        ("p_h1", 1.0, 1.0),
        ("p_h1", 0.7146, 0.6496),
        ("p_h1", 0.6, 0.5),
        ("p_h1", 0.5077, 0.3906),
        ("p_h2", 0.5, 0.3086),
        ("p_h2", 0.5, 0.25),
        ("p_h2", 0.5, 0.2066),
        ("p_l", 0.2733, 0.1705),
        ("p_l", 0.2733, 0.1705),
        ("p_l", 0.2733, 0.1705),
    ];
    for (r, (label, p, v)) in csv_rows(&half).iter().zip(expected) {
        assert_eq!(r[2], label, "{r:?}");
        assert!((num(&r[1]) - p).abs() <= 5e-4 && (num(&r[3]) - v).abs() <= 5e-4, "{r:?}");
    }
    assert_eq!(csv_rows(&half)[9][0], "inf");

    let other = sweep(&["sweep", "--vary", "beta", "--values", values, "--mu", "1", "--sigma", "0.5"]);
    let expected = [
        None,
        None,
        None,
        Some(("p_h1", 1.0188, 0.7837)),
        Some(("p_h1", 0.8606, 0.6147)),
        Some(("p_h1", 0.75, 0.5)),
        Some(("p_h1", 0.6565, 0.4103)),
        Some(("p_l", 0.6145, 0.3728)),
        Some(("p_l", 0.6145, 0.3728)),
        Some(("p_l", 0.6145, 0.3728)),
    ];
    for (r, e) in csv_rows(&other).iter().zip(expected) {
        match e {
            None => assert_eq!(&r[1..], ["", "infeasible", ""]),
            Some((label, p, v)) => {
                assert_eq!(r[2], label, "{r:?}");
                assert!((num(&r[1]) - p).abs() <= 5e-4 && (num(&r[3]) - v).abs() <= 5e-4, "{r:?}");
            }
        }
    }
}

#[test]
fn sweeps_match_golden_files() {
    let values = "1.0,1.1,1.2,1.3,1.4,1.5,1.6,1.8,2.0,inf";
    let cases: [(&str, Vec<&str>); 4] = [
        (
            "sigma_beta1.csv",
            vec!["--vary", "sigma", "--from", "0", "--to", "0.5", "--steps", "11", "--mu", "0.5", "--beta", "1"],
        ),
        (
            "sigma_uncapped.csv",
            vec!["--vary", "sigma", "--from", "0", "--to", "0.5", "--steps", "11", "--mu", "0.5", "--beta", "inf"],
        ),
        ("beta_mu05.csv", vec!["--vary", "beta", "--values", values, "--mu", "0.5", "--sigma", "0.5"]),
        ("beta_mu1.csv", vec!["--vary", "beta", "--values", values, "--mu", "1", "--sigma", "0.5"]),
    ];
    for (file, args) in cases {
        let golden = std::fs::read_to_string(manifest_path(&format!("tests/golden/{file}"))).unwrap();
        assert_eq!(sweep(&[&["sweep"][..], &args[..]].concat()), golden, "{file}");
    }
}

#[test]
fn both_objectives_show_the_price_ordering() {
    let text = sweep(&[
        "sweep",
        "--vary",
        "sigma",
        "--from",
        "0.05",
        "--to",
        "0.25",
        "--steps",
        "5",
        "--mu",
        "0.5",
        "--beta",
        "1",
        "--objective",
        "both",
    ]);
    let header = text.lines().next().unwrap();
    assert_eq!(header, "param,price,regime,value,price_rev,value_rev");
    for r in csv_rows(&text) {
        assert!(num(&r[4]) < num(&r[1]), "{r:?}");
    }
}

#[test]
fn power_sweeps_run() {
    let q = sweep(&[
        "sweep", "--vary", "q", "--from", "1.5", "--to", "3", "--steps", "4", "--mu", "0.5", "--s", "0.4", "--beta",
        "1",
    ]);
    assert_eq!(csv_rows(&q).len(), 4);
    let s = sweep(&[
        "sweep",
        "--vary",
        "s",
        "--from",
        "0.36",
        "--to",
        "0.5",
        "--steps",
        "4",
        "--mu",
        "0.5",
        "--phi",
        "power:q=1.5",
        "--beta",
        "1",
    ]);
    assert!(csv_rows(&s).iter().all(|r| r[2] != "infeasible"));
}

#[test]
fn quick_verification_passes() {
    let out = run(&["verify", "--trials", "1", "--grid", "21"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "check,instances,max_deviation,tolerance,result");
    assert!(text.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn unsquared_low_price_fails_verification() {
    let out = run(&["verify", "--trials", "1", "--grid", "21", "--compat-printed-pl"]);
    assert_eq!(out.status.code(), Some(4));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("sigma_sweep_table,") && l.ends_with(",fail")));
}
