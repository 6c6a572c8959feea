use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn wavelat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavelat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 stdout")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path()
        .join(name)
        .to_str()
        .expect("utf-8 path")
        .to_owned()
}

fn keypair(dir: &TempDir) -> (String, String) {
    let prefix = path(dir, "k");
    let o = wavelat(&["keygen", "--seed", "5", "--out", &prefix]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (format!("{prefix}.sk"), format!("{prefix}.pk"))
}

#[test]
fn encrypt_is_seeded_and_decrypts() {
    let dir = TempDir::new().unwrap();
    let (sk, pk) = keypair(&dir);
    let (c1, c2) = (path(&dir, "c1"), path(&dir, "c2"));
    for c in [&c1, &c2] {
        assert!(
            wavelat(&["encrypt", "--bit", "0", "--key", &pk, "--seed", "7", "--out", c])
                .status
                .success()
        );
    }
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());
    let o = wavelat(&["decrypt", "--key", &sk, "--in", &c1]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0\n");

    let c3 = path(&dir, "c3");
    assert!(
        wavelat(&["encrypt", "--bit", "1", "--key", &pk, "--seed", "8", "--out", &c3])
            .status
            .success()
    );
    assert_eq!(
        stdout(&wavelat(&["decrypt", "--key", &sk, "--in", &c3])),
        "1\n"
    );
}

#[test]
fn keygen_is_seeded() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (ska, pka) = keypair(&a);
    let (skb, pkb) = keypair(&b);
    assert_eq!(fs::read(ska).unwrap(), fs::read(skb).unwrap());
    assert_eq!(fs::read(pka).unwrap(), fs::read(pkb).unwrap());
}

#[test]
fn dist_test_of_identical_specs_is_small() {
    let o = wavelat(&[
        "dist-test",
        "--a",
        "T:4:0.05",
        "--b",
        "T:4:0.05",
        "--samples",
        "100000",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!(d < 0.02, "{d}");
}

#[test]
fn hash_and_collide() {
    let dir = TempDir::new().unwrap();
    let key = path(&dir, "hk");
    assert!(wavelat(&[
        "keygen",
        "--hash",
        "--modulus-bits",
        "10",
        "--m",
        "12",
        "--seed",
        "3",
        "--out",
        &key
    ])
    .status
    .success());
    let bits = path(&dir, "bits");
    fs::write(&bits, "101100111000\n").unwrap();
    let h = wavelat(&["hash", "--key", &key, "--in", &bits]);
    assert!(h.status.success());
    assert!(u64::from_str_radix(stdout(&h).trim(), 16).unwrap() < 1024);

    let c = wavelat(&["hash-collide", "--key", &key]);
    assert!(c.status.success());
    let w: Vec<i64> = stdout(&c)
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(w.len(), 12);
    assert!(w.iter().any(|&x| x != 0) && w.iter().all(|x| x.abs() <= 1));
}

#[test]
fn usvp_solve_recovers_planted_vector() {
    let dir = TempDir::new().unwrap();
    let basis = path(&dir, "basis");
    // The lattice spanned by (1, 5) and (0, 11) has shortest vector ±(2, -1).
    fs::write(&basis, "2\n1 5\n0 11\n").unwrap();
    let trace = path(&dir, "trace.tsv");
    let o = wavelat(&["usvp-solve", "--in", &basis, "--p", "3", "--trace", &trace]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Vec<i64> = stdout(&o)
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert!(v == [2, -1] || v == [-2, 1], "{v:?}");
    assert!(Path::new(&trace).exists());
}

#[test]
fn experiment_writes_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "exp.cfg");
    fs::write(
        &cfg,
        "# dihedral sanity run\nkind = dihedral\ngames = 50\noracle = TD:9\nk = 9\n",
    )
    .unwrap();
    let out = path(&dir, "report.csv");
    let o = wavelat(&["experiment", "--config", &cfg, "--seed", "4", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("seed,hidden,decision,k,r\n"));
    assert_eq!(csv.lines().count(), 51);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dihedral: games=50"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = wavelat(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn truncated_files_exit_with_data_error() {
    let dir = TempDir::new().unwrap();
    let (sk, pk) = keypair(&dir);
    let ct = path(&dir, "ct");
    assert!(
        wavelat(&["encrypt", "--bit", "1", "--key", &pk, "--seed", "2", "--out", &ct])
            .status
            .success()
    );
    let hk = path(&dir, "hk");
    assert!(wavelat(&["keygen", "--hash", "--seed", "2", "--out", &hk])
        .status
        .success());
    let basis = path(&dir, "basis");
    fs::write(&basis, "2\n1 5\n0 11\n").unwrap();

    let cut = path(&dir, "cut");
    let cases: [(&str, Box<dyn Fn(&str) -> Vec<String>>); 5] = [
        (
            &pk,
            Box::new(|f| {
                vec![
                    "encrypt".into(),
                    "--bit".into(),
                    "0".into(),
                    "--key".into(),
                    f.into(),
                ]
            }),
        ),
        (
            &sk,
            Box::new(|f| {
                vec![
                    "decrypt".into(),
                    "--key".into(),
                    f.into(),
                    "--in".into(),
                    ct.clone(),
                ]
            }),
        ),
        (
            &ct,
            Box::new(|f| {
                vec![
                    "decrypt".into(),
                    "--key".into(),
                    sk.clone(),
                    "--in".into(),
                    f.into(),
                ]
            }),
        ),
        (
            &hk,
            Box::new(|f| vec!["hash-collide".into(), "--key".into(), f.into()]),
        ),
        (
            &basis,
            Box::new(|f| {
                vec![
                    "usvp-solve".into(),
                    "--in".into(),
                    f.into(),
                    "--p".into(),
                    "3".into(),
                ]
            }),
        ),
    ];
    for (file, argv) in &cases {
        let full = fs::read(file).unwrap();
        // A cut inside the last line can leave a valid shorter number, so cut
        // everywhere before the last line starts: at least one line goes missing.
        let body = &full[..full.len() - 1];
        let last_start = body.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let mut cuts: Vec<usize> = (0..last_start).step_by(5).collect();
        cuts.extend(
            body.iter()
                .enumerate()
                .filter(|(_, &b)| b == b'\n')
                .map(|(i, _)| i + 1),
        );
        cuts.push(0);
        cuts.sort_unstable();
        cuts.dedup();
        for n in cuts.into_iter().filter(|&n| n <= last_start) {
            fs::write(&cut, &full[..n]).unwrap();
            let args = argv(&cut);
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let o = wavelat(&args);
            assert_eq!(
                o.status.code(),
                Some(2),
                "{file} cut at {n}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            assert!(o.stdout.is_empty());
        }
    }
}
