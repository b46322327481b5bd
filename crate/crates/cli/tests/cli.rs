use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spgls_cli::commands::CliError;
use spgls_cli::io::{format_csv, format_sparse, load_csv, load_sparse, CsvSchema};
use spgls_cli::record::{rel_err, BenchRow, CompareRow};
use spgls_core::synth::{generate, GenSpec};
use spgls_core::Error;

fn spgls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spgls")).args(args).output().unwrap()
}

fn spgls_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spgls")).args(args).env(key, value).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {:?} stderr {:?}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/run_record.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(record: &Value) {
    let v = validator();
    let errors: Vec<String> = v.iter_errors(record).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_writes_two_files_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inst");
    let args = ["gen", "--m", "100", "--n", "50", "--density", "1", "--seed", "1", "--out", s(&out)];
    let first = spgls(&args);
    assert_eq!(first.status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["instance.csv", "instance.json"]);
    let desc = json(&first);
    assert_eq!(desc["m"], 100);
    assert_eq!(desc["data_file"], "instance.csv");
    assert_eq!(fs::read_to_string(out.join("instance.json")).unwrap().as_bytes(), &first.stdout[..]);

    let csv = fs::read(out.join("instance.csv")).unwrap();
    let second = spgls(&args);
    assert_eq!(second.stdout, first.stdout);
    assert_eq!(fs::read(out.join("instance.csv")).unwrap(), csv);
}

#[test]
fn gen_picks_the_sparse_format_below_full_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = spgls(&["gen", "--m", "40", "--n", "30", "--density", "0.05", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["format"], "sparse");
    assert!(dir.path().join("instance.txt").exists());
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = spgls(&["gen", "--bogus", "--out", "x"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
    assert_eq!(spgls(&["--help"]).status.code(), Some(0));
}

#[test]
fn written_instances_load_back_exactly() {
    for density in [1.0, 0.1] {
        let spec = GenSpec { density, ..GenSpec::new(25, 7, 4) };
        let data = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sparse_path = dir.path().join("a.txt");
        fs::write(&sparse_path, format_sparse(&data)).unwrap();
        let back = load_sparse(&sparse_path, spec.gamma).unwrap();
        assert_eq!(back.x.to_dense(), data.x.to_dense());
        assert_eq!((&back.y, &back.z), (&data.y, &data.z));

        let csv_path = dir.path().join("a.csv");
        fs::write(&csv_path, format_csv(&data)).unwrap();
        let back = load_csv(&csv_path, &CsvSchema::standard(spec.gamma)).unwrap();
        assert_eq!(back.x.to_dense(), data.x.to_dense());
        assert_eq!((&back.y, &back.z), (&data.y, &data.z));
    }
}

#[test]
fn cd_admm_record_on_a_generated_instance() {
    let dir = tempfile::tempdir().unwrap();
    spgls(&["gen", "--m", "60", "--n", "10", "--seed", "2", "--out", s(dir.path())]);
    let trace = dir.path().join("trace.csv");
    let out = spgls(&[
        "solve",
        "--instance",
        s(&dir.path().join("instance.json")),
        "--method",
        "cd-admm",
        "--rho",
        "5",
        "--trace",
        s(&trace),
        "--vs-oracle",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rec = json(&out);
    assert_valid(&rec);
    assert_eq!(rec["converged"], true);
    assert_eq!(rec["factorizations"], 1);
    let iters = rec["iterations"].as_u64().unwrap();
    assert_eq!(rec["triangular_solves"].as_u64().unwrap(), 2 * iters);
    let f = rec["objective"].as_f64().unwrap();
    let fo = rec["oracle_objective"].as_f64().unwrap();
    assert_eq!(rec["rel_err_vs_oracle"].as_f64().unwrap(), rel_err(f, fo));
    assert!(rel_err(f, fo).abs() <= 1e-6);

    let mut reader = csv::Reader::from_path(&trace).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["iter", "r_pri", "r_dual", "objective"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len() as u64, iters);
    let last = rows.last().unwrap();
    assert_eq!(last[0] as u64, iters);
    assert_eq!(last[1], rec["r_pri"].as_f64().unwrap());
    assert_eq!(last[2], rec["r_dual"].as_f64().unwrap());
    assert_eq!(last[3], f);
}

#[test]
fn oracle_record_is_certified() {
    let out = spgls(&["solve", "--method", "oracle", "--m", "30", "--n", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let rec = json(&out);
    assert_valid(&rec);
    assert_eq!(rec["certified"], true);
    assert_eq!(rec["converged"], true);
    assert_eq!(rec["rel_err_vs_oracle"], 0.0);
    assert!(rec["w_recovered"].as_array().unwrap().len() == 6);
}

#[test]
fn admm_record_matches_cd_admm() {
    let a = json(&spgls(&["solve", "--method", "admm", "--m", "50", "--n", "8", "--rho", "50"]));
    let b = json(&spgls(&["solve", "--method", "cd-admm", "--m", "50", "--n", "8", "--rho", "50"]));
    assert_valid(&a);
    assert_eq!(a["iterations"], b["iterations"]);
    assert_eq!(a["factorizations"], 0);
    assert!((a["objective"].as_f64().unwrap() - b["objective"].as_f64().unwrap()).abs() <= 1e-9);
}

#[test]
fn exit_codes() {
    let out = spgls(&["solve", "--rho", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));

    let out = spgls(&["solve", "--max-iters", "3", "--m", "20", "--n", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = json(&out);
    assert_valid(&rec);
    assert_eq!(rec["converged"], false);
    assert_eq!(rec["iterations"], 3);

    assert_eq!(spgls(&["solve", "--init", "sideways"]).status.code(), Some(3));
    assert_eq!(spgls(&["solve", "--instance", "/nonexistent/file.csv"]).status.code(), Some(3));

    assert_eq!(CliError::Core(Error::SingularSystem).exit_code(), 4);
    assert_eq!(CliError::Core(Error::NotPositiveDefinite { pivot: 0, value: -1.0 }).exit_code(), 4);
    assert_eq!(CliError::Core(Error::Empty).exit_code(), 3);
}

#[test]
fn malformed_csv_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b,y,z\n1,2,3,4\n5,6,seven,8\n").unwrap();
    let out = spgls(&["solve", "--instance", s(&path)]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3") && msg.contains("column 3"), "{msg}");
}

#[test]
fn csv_without_targets_synthesizes_them() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noz.csv");
    fs::write(&path, "a,b,y\n1,0,1\n0,1,2\n1,1,2.5\n2,-1,0.5\n").unwrap();
    let args = ["solve", "--instance", s(&path), "--synthesize-z", "--seed", "5", "--method", "oracle"];
    let a = json(&spgls(&args));
    let b = json(&spgls(&args));
    assert_valid(&a);
    assert_eq!(a["objective"], b["objective"]);
    assert_eq!(a["instance"]["scenario"], "modest");
    assert_eq!(spgls(&["solve", "--instance", s(&path)]).status.code(), Some(3));
}

fn compare_rows(out: &Output) -> Vec<CompareRow> {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn compare_grid_reaches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let args = [
        "compare",
        "--sizes",
        "60x30,30x30,20x30",
        "--gammas",
        "0.1,0.01",
        "--scenarios",
        "modest",
        "--trials",
        "10",
        "--out",
        s(&table),
    ];
    let out = spgls(&args);
    assert_eq!(out.status.code(), Some(0));
    let rows = compare_rows(&out);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!(r.status, "ok");
        assert_eq!(r.trials, 10);
        assert!(r.rel_err_max.unwrap().abs() <= 1e-6 && r.rel_err_min.unwrap().abs() <= 1e-6);
        assert_eq!(r.factorizations_avg, Some(1.0));
    }
    let from_csv: Vec<CompareRow> =
        csv::Reader::from_path(&table).unwrap().deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(from_csv.len(), 6);
    assert_eq!(from_csv[0].rel_err_avg, rows[0].rel_err_avg);

    // identical flags give identical non-timing fields, whatever the thread count
    let again = compare_rows(&spgls_env(&args, "SPG_SCLS_THREADS", "1"));
    let strip = |rows: &[CompareRow]| {
        rows.iter()
            .map(|r| CompareRow { time_avg: None, oracle_time_avg: None, ..r.clone() })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&rows), strip(&again));
}

#[test]
fn compare_single_trial_and_skipped_cells() {
    let out = spgls(&["compare", "--sizes", "30x10", "--gammas", "0.1", "--trials", "1", "--methods", "cd-admm,admm"]);
    let rows = compare_rows(&out);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.rel_err_avg, r.rel_err_min);
        assert_eq!(r.rel_err_avg, r.rel_err_max);
    }

    let out = spgls(&[
        "compare", "--sizes", "30x10,10x2001", "--gammas", "0.1", "--scenarios", "modest", "--density", "0.001",
        "--trials", "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows = compare_rows(&out);
    assert_eq!(rows[0].status, "ok");
    assert_eq!(rows[1].status, "skipped");
    assert!(rows[1].message.as_ref().unwrap().contains("2002"));
    assert_eq!(rows[1].rel_err_avg, None);
}

#[test]
fn compare_rejects_a_bad_thread_cap() {
    let out = spgls_env(&["compare", "--sizes", "10x3", "--trials", "1"], "SPG_SCLS_THREADS", "many");
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_sparse_grid_factors_once() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("b.csv");
    let out = spgls(&[
        "bench", "--sizes", "500x1000,1000x1000", "--gammas", "0.1", "--scenarios", "modest", "--density", "1e-4",
        "--repeats", "2", "--out", s(&table),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<BenchRow> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.cd_factorizations, 1);
        assert_eq!(r.cd_factor_path, "sparse");
        assert_eq!(r.ratio2, r.admm_total / r.cd_total);
        assert_eq!(r.admm_iterations, r.cd_iterations);
    }
    assert!(table.exists());
}

#[test]
fn bench_dense_smoke() {
    let out = spgls(&[
        "bench", "--sizes", "1000x1000", "--gammas", "0.1", "--scenarios", "modest", "--repeats", "1",
        "--max-iters", "200",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<BenchRow> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows[0].cd_factor_path, "dense");
    assert_eq!(rows[0].ratio1, None);
}

#[test]
fn schema_rejects_malformed_records() {
    let rec = json(&spgls(&["solve", "--m", "20", "--n", "3"]));
    let v = validator();
    assert!(v.is_valid(&rec));
    let mut missing = rec.clone();
    missing.as_object_mut().unwrap().remove("objective");
    assert!(!v.is_valid(&missing));
    let mut wrong = rec;
    wrong["method"] = "newton".into();
    assert!(!v.is_valid(&wrong));
}
