use std::fs;
use std::path::Path;

use structembed::bounds::cor1_threshold;
use structembed::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut log = Vec::new();
    let mut argv = vec!["structembed"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut log);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(log).unwrap())
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn sample_dataset(rows: usize, dim: usize) -> String {
    let mut s = String::new();
    for r in 0..rows {
        let v: Vec<String> = (0..dim).map(|c| format!("{}", ((r * 31 + c * 17) % 23) as f64 / 7.0 - 1.5)).collect();
        s.push_str(&v.join(","));
        s.push('\n');
    }
    s
}

#[test]
fn orthogonal_pair_has_zero_linear_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "orth.csv", "1,0,0,0\n0,1,0,0\n");
    let (code, out, log) = call(&["estimate", "--family", "circulant", "--m", "8", "--f", "identity", "--dataset", &data]);
    assert_eq!(code, EXIT_OK, "{log}");
    let exact: f64 = column(&out, "exact")[0].parse().unwrap();
    assert_eq!(exact, 0.0);
}

#[test]
fn duplicate_vector_sincos_estimate_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "dup.csv", "0.3,-1.2,0.5,2.0\n0.3,-1.2,0.5,2.0\n");
    let (code, out, log) = call(&["estimate", "--family", "toeplitz", "--m", "16", "--f", "sincos", "--dataset", &data]);
    assert_eq!(code, EXIT_OK, "{log}");
    let est: f64 = column(&out, "estimate")[0].parse().unwrap();
    assert_eq!(est, 1.0);
}

#[test]
fn malformed_dataset_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "bad.csv", "1,2\n3,4\n5,oops\n");
    let (code, _, log) = call(&["estimate", "--family", "circulant", "--dataset", &data]);
    assert_eq!(code, EXIT_DATA);
    assert!(log.contains("line 3"), "{log}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &sample_dataset(4, 8));
    let (code, _, _) = call(&["sweep", "--family", "circulant", "--m-values", "", "--dataset", &data]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["estimate", "--family", "nonsense", "--dataset", &data]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["diagnose", "--family", "circulant", "--seed", "0xZZ"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn sweep_threshold_column_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &sample_dataset(6, 16));
    let (code, out, log) = call(&[
        "sweep", "--family", "circulant", "--f", "heaviside", "--m-values", "4,16,64", "--reps", "2", "--tau", "0.3",
        "--dataset", &data,
    ]);
    assert_eq!(code, EXIT_OK, "{log}");
    let ms = column(&out, "m");
    let th = column(&out, "cor1_threshold");
    assert_eq!(ms.len(), 3);
    for (m, t) in ms.iter().zip(&th) {
        let want = cor1_threshold(m.parse().unwrap(), 0.3).unwrap();
        assert_eq!(t.parse::<f64>().unwrap(), want);
    }
    assert!(column(&out, "bound_note").iter().all(|s| s == "up-to-constant"));
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &sample_dataset(8, 32));
    let args = [
        "sweep", "--family", "circulant,toeplitz", "--f", "relu", "--m-values", "8,32", "--reps", "3", "--dataset", &data,
    ];
    let at = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| call(&args))
    };
    let (c1, one, _) = at(1);
    let (c4, four, _) = at(4);
    assert_eq!((c1, c4), (EXIT_OK, EXIT_OK));
    assert_eq!(one, four);

    let est = ["estimate", "--family", "hankel", "--m", "16", "--f", "sine", "--oracle", "20000", "--dataset", &data];
    let (_, a, _) = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| call(&est));
    let (_, b, _) = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| call(&est));
    assert_eq!(a, b);
}

#[test]
fn bench_covers_every_requested_family() {
    let (code, out, log) = call(&["bench", "--family", "toeplitz,hankel,circulant", "--n", "256", "--m", "256", "--reps", "3"]);
    assert_eq!(code, EXIT_OK, "{log}");
    let fams = column(&out, "family");
    assert_eq!(fams, ["toeplitz", "hankel", "circulant"]);
    assert!(column(&out, "dense_status").iter().all(|s| s == "ok"));
}

#[test]
fn bench_skips_oversized_dense_baseline() {
    let (code, out, log) = call(&["bench", "--family", "circulant", "--n", "1024", "--m", "1024", "--dense-cap", "1000"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(column(&out, "dense_status"), ["skipped"]);
    assert!(log.contains("warning"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "# defaults\nfamily = toeplitz\nm = 4\nn = 8\n");
    let (code, out, _) = call(&["diagnose", "--config", &cfg]);
    assert_eq!(code, EXIT_OK);
    let rec = records(&out);
    assert_eq!((&rec[0][0], &rec[0][1], &rec[0][2]), ("toeplitz", "4", "8"));

    let (code, out, _) = call(&["diagnose", "--config", &cfg, "--m", "6", "--family", "hankel"]);
    assert_eq!(code, EXIT_OK);
    let rec = records(&out);
    assert_eq!((&rec[0][0], &rec[0][1], &rec[0][2]), ("hankel", "6", "8"));
}

#[test]
fn diagnose_writes_graphs_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = dir.path().join("graphs");
    let csv_path = dir.path().join("diag.csv");
    let (code, out, log) = call(&[
        "diagnose", "--family", "circulant", "--n", "8", "--m", "3", "--exact", "--graph-out",
        graphs.to_str().unwrap(), "--output", csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{log}");
    assert!(out.is_empty());
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(column(&csv, "chi_is_exact"), ["true"]);
    let files: Vec<_> = fs::read_dir(&graphs).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(files.iter().any(|f| f == "circulant_0_1.txt"), "{files:?}");
}

#[test]
fn verify_only_runs_selected_criteria() {
    let (code, out, _) = call(&["verify", "--only", "matvec,11"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let lines: Vec<&str> = out.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("PASS [1] matvec"));
    assert!(lines[1].starts_with("PASS [11] bounds"));
    let (code, _, _) = call(&["verify", "--only", "no-such-criterion"]);
    assert_eq!(code, EXIT_USAGE);
}
