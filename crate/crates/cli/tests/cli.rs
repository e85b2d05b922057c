use std::path::Path;
use std::process::{Command, Output};

use completability::model::{observe, random_factorization, read_matrix_csv, write_matrix_csv};
use completability::patterns::gen_uniform_random;
use completability::seeding::rng_from_seed;
use completability::ObservationMask;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_completability"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn example1_checks_and_certifies_unique() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("e1.txt");
    assert!(run(&["generate", "example1", "-d", "6", "-r", "2", "--out", p(&mask)]).status.success());

    let check = run(&["check", p(&mask), "-r", "2"]);
    assert_eq!(check.status.code(), Some(0));
    assert!(stdout(&check).starts_with("condition (i): holds; condition (ii) per block: holds\n"), "{}", stdout(&check));

    let cert = dir.path().join("cert.json");
    let out = run(&["certify", p(&mask), "-r", "2", "--seed", "7", "--out", p(&cert)]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(json["verdict"], "unique");
    assert_eq!(json["seed"], 7);
}

#[test]
fn example6_is_not_unique() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("e6.txt");
    assert!(run(&["generate", "example6", "--out", p(&mask)]).status.success());
    for seed in ["0", "1", "2"] {
        let code = run(&["certify", p(&mask), "-r", "2", "--seed", seed]).status.code();
        assert!(matches!(code, Some(2) | Some(3)), "{code:?}");
    }
}

#[test]
fn too_few_columns_fail() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("three.txt");
    std::fs::write(&mask, "6 3\n0 1 2\n1 2 3\n3 4 5\n").unwrap();
    let out = run(&["certify", p(&mask), "-r", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("\"verdict\": \"fail\""));
    assert_eq!(run(&["check", p(&mask), "-r", "2"]).status.code(), Some(4));
}

#[test]
fn duplicate_columns_print_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("dup.txt");
    std::fs::write(&mask, "3 2\n0 1\n0 1\n").unwrap();
    let out = run(&["check", p(&mask), "-r", "1"]);
    assert_eq!(out.status.code(), Some(4));
    let text = stdout(&out);
    assert!(text.contains("condition (ii) per block: fails"), "{text}");
    assert!(text.contains("witness columns [0, 1]: n = 2, m = 2"), "{text}");

    let exhaustive = stdout(&run(&["check", p(&mask), "-r", "1", "--exhaustive"]));
    assert!(exhaustive.starts_with("condition (i): fails;"), "{exhaustive}");
    assert!(exhaustive.contains("condition (i) witness: columns [0, 1]"), "{exhaustive}");
}

#[test]
fn exact_and_float_modes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut decided = 0;
    let mut holds = 0;
    for seed in 0..50u64 {
        let mut rng = rng_from_seed(seed);
        let d = 6 + (seed % 5) as usize;
        let r = 1 + (seed % 3) as usize;
        let mask = gen_uniform_random(d, r * (d - r) + (seed % 2) as usize * (d - r), r + 1, &mut rng).unwrap();
        let path = dir.path().join(format!("m{seed}.txt"));
        mask.save(&path).unwrap();
        let rs = r.to_string();
        let exact = run(&["check", p(&path), "-r", &rs, "--mode", "exact", "--seed", "1"]);
        let float = run(&["check", p(&path), "-r", &rs, "--mode", "float", "--seed", "1"]);
        if float.status.code() == Some(3) {
            continue;
        }
        decided += 1;
        holds += usize::from(exact.status.code() == Some(0));
        assert_eq!(exact.status.code(), float.status.code(), "seed {seed}");
        assert_eq!(stdout(&exact), stdout(&float), "seed {seed}");
    }
    assert!(decided >= 45, "{decided}");
    assert!(holds > 0 && holds < decided, "{holds}/{decided}");
}

#[test]
fn generate_is_deterministic_and_valid() {
    let a = run(&["generate", "uniform", "-d", "40", "-r", "2", "-n", "10", "--ell", "7", "--seed", "5"]);
    let b = run(&["generate", "uniform", "-d", "40", "-r", "2", "-n", "10", "--ell", "7", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    let mask = ObservationMask::parse(&stdout(&a)).unwrap();
    assert_eq!((mask.rows(), mask.cols(), mask.min_support()), (40, 10, 7));

    let bounded = run(&["generate", "uniform", "-d", "200", "-r", "2", "-n", "3", "--eps", "0.5"]);
    let mask = ObservationMask::parse(&stdout(&bounded)).unwrap();
    assert_eq!(mask.min_support(), 84);

    let dir = tempfile::tempdir().unwrap();
    let e8 = dir.path().join("e8.txt");
    assert!(run(&["generate", "example8", "--out", p(&e8)]).status.success());
    assert!(ObservationMask::load(dir.path().join("e8.txt.reduced")).is_ok());
    assert!(!run(&["generate", "example1", "-d", "3", "-r", "3"]).status.success());
}

#[test]
fn complete_writes_estimate_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng_from_seed(11);
    let f = random_factorization(30, 30, 2, &mut rng).unwrap();
    let x = f.matrix();
    let mask = gen_uniform_random(30, 30, 18, &mut rng).unwrap();
    let pm = observe(&x, &mask).unwrap();
    let (mpath, vpath, upath) = (dir.path().join("m.txt"), dir.path().join("v.txt"), dir.path().join("u.csv"));
    mask.save(&mpath).unwrap();
    std::fs::write(&vpath, pm.values_to_text()).unwrap();
    write_matrix_csv(&upath, &f.ustar).unwrap();

    let out = dir.path().join("x.csv");
    let res = run(&["complete", p(&mpath), p(&vpath), "-r", "2", "--max-iters", "500", "--seed", "9", "--out", p(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let est = read_matrix_csv(&out).unwrap();
    assert!((&est - &x).norm() <= 1e-9 * x.norm());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("x.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["converged"], true);
    assert_eq!(meta["seed"], 9);
    assert!(meta["iterations"].as_u64().unwrap() >= 1);

    let exact = dir.path().join("y.csv");
    let res = run(&["complete", p(&mpath), p(&vpath), "-r", "2", "--basis", p(&upath), "--out", p(&exact)]);
    assert!(res.status.success());
    let est = read_matrix_csv(&exact).unwrap();
    assert!((&est - &x).norm() <= 1e-9 * x.norm());
}

#[test]
fn experiment_smoke_run_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind": "figure9", "d": [12], "r": [2], "n": [10, 20], "trials": 50, "seed": 1}"#).unwrap();
    let csv = dir.path().join("out.csv");
    let res = run(&["experiment", p(&spec), "--trials", "1", "--seed", "4", "--out", p(&csv)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("config,kind,"));
    assert!(lines[1..].iter().all(|l| l.contains(",figure9,") && l.contains(",1,")));
    assert!(!text.contains('\r'));

    let again = run(&["experiment", p(&spec), "--trials", "1", "--seed", "4"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    std::fs::write(&spec, r#"{"kind": "figure9", "trials": 0, "n": [3]}"#).unwrap();
    assert_eq!(run(&["experiment", p(&spec)]).status.code(), Some(1));
}
