use std::fs;
use std::process::{Command, Output};

fn kaclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kaclab"))
        .args(args)
        .env_remove("KACLAB_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["bogus"][..],
        &["theorem", "--law", "cauchy"],
        &["theorem", "--regime", "quarter"],
        &["smallball", "--k", "n/x"],
        &["smallball", "--c1", "1"],
        &["eval"],
    ] {
        assert_eq!(kaclab(args).status.code(), Some(1), "{args:?}");
    }
    // invalid values that only the library rejects
    assert_eq!(kaclab(&["theorem", "--n", "256,128", "--trials", "1"]).status.code(), Some(1));
    assert_eq!(kaclab(&["roots", "--n", "100000", "--trials", "1000"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(kaclab(&["--help"]).status.code(), Some(0));
    assert_eq!(kaclab(&["--version"]).status.code(), Some(0));
    assert!(stdout(&kaclab(&["theorem", "--help"])).contains("--workers"));
}

#[test]
fn gram_verify_passes() {
    let o = kaclab(&["gram", "verify", "--n", "8,12"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 1 + 7 + 11);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn failed_domination_exits_two() {
    let args = ["smallball", "--n", "16", "--k", "1", "--t", "1", "--trials", "10000", "--c1", "1e-9", "--c2", "1"];
    let o = kaclab(&args);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout(&o).lines().count(), 2);
    let ok = kaclab(&["smallball", "--n", "16", "--k", "1", "--t", "1", "--trials", "10000", "--c1", "1e3", "--c2", "1"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn env_overrides_out_flag() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kaclab"))
        .args(["region", "dump", "--n", "16", "--out"])
        .arg(flag.path())
        .env("KACLAB_OUT", env.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env.path().join("region.csv").exists());
    assert!(env.path().join("region.svg").exists());
    assert!(!flag.path().join("region.csv").exists());
    assert_eq!(fs::read_to_string(env.path().join("region.csv")).unwrap(), stdout(&o));
}

#[test]
fn theorem_output_is_worker_independent() {
    let dirs: Vec<_> = ["1", "4"]
        .iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            let o = kaclab(&[
                "theorem", "--n", "64,128", "--trials", "20", "--seed", "9", "--workers", w, "--roots", "--out",
                dir.path().to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0));
            assert_eq!(stdout(&o), fs::read_to_string(dir.path().join("theorem.csv")).unwrap());
            dir
        })
        .collect();
    for name in ["theorem.csv", "theorem.json", "theorem_fit.csv"] {
        assert_eq!(
            fs::read(dirs[0].path().join(name)).unwrap(),
            fs::read(dirs[1].path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn roots_and_eval_shapes() {
    let o = kaclab(&["roots", "--n", "64", "--trials", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), "trial,re,im,modulus,argument,residual");
    assert_eq!(csv.lines().count(), 1 + 2 * 63);

    let o = kaclab(&["eval", "--n", "8", "--beta", "0", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), "l,phi,min_modulus,argmin_k,max_modulus");
    assert!(csv.lines().count() > 2);
}
