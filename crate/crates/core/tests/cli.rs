//! End-to-end runs of the `gamow` binary: exit codes, headers and output files.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use gamow::cli::FORMAT_VERSION;

fn gamow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gamow"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn kernels_lists_families() {
    let dir = tempfile::tempdir().unwrap();
    let o = gamow(&["kernels", "--kernel", "exp:mu=1", "--dim", "2"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("exp:mu=1 N=2"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "kernel = const:c=1\nwibble = 3\n").unwrap();
    let o = gamow(&["verify", "--config", "bad.cfg"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("wibble"));
    assert_eq!(code(&gamow(&["minimize", "--dim", "5"], dir.path())), 2);
    assert_eq!(code(&gamow(&["minimize", "--kernel", "riesz:alpha=7"], dir.path())), 2);
    assert_eq!(code(&gamow(&["minimize", "--no-such-flag"], dir.path())), 2);
}

#[test]
fn verify_passes_and_fails_on_demand() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), "kernel = const:c=1\ndim = 2\nshapes = 1\ngrid2 = 32\n").unwrap();
    let o = gamow(&["verify", "--config", "small.cfg", "--out", "ok"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = std::fs::read_to_string(dir.path().join("ok/verify.txt")).unwrap();
    assert!(report.starts_with(&format!("# {FORMAT_VERSION}")));
    assert!(report.contains("summary.failed = 0"));

    std::fs::write(dir.path().join("zero.cfg"), "kernel = const:c=1\ndim = 2\nshapes = 1\ngrid2 = 32\nceiling.gradient_energy = 0\n").unwrap();
    let o = gamow(&["verify", "--config", "zero.cfg", "--out", "bad"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn energy_of_ball_and_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ball.txt"), "# the unit ball\n3 12 1\n0\n0\n0\n0\n").unwrap();
    let o = gamow(&["energy", "ball.txt", "--kernel", "riesz:alpha=2", "--eps", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.starts_with(&format!("# {FORMAT_VERSION}")));
    let exact = 4.0 * PI + 32.0 * PI * PI / 15.0;
    assert!((field(&text, "f_eps") / exact - 1.0).abs() < 1e-3);

    let o = gamow(&["energy", "ball.txt", "--eps", "0"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(field(&text, "f_eps"), field(&text, "perimeter"));

    std::fs::write(dir.path().join("broken.txt"), "3 12 1\n0\nnot-a-number\n").unwrap();
    assert_eq!(code(&gamow(&["energy", "broken.txt"], dir.path())), 2);
    assert_eq!(code(&gamow(&["energy", "missing.txt"], dir.path())), 2);
    assert_eq!(code(&gamow(&["energy", "ball.txt", "--dim", "2"], dir.path())), 2);
}

#[test]
fn single_epsilon_sweep_reaches_the_ball() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--kernel", "riesz:alpha=2", "--dim", "2", "--grid", "32", "--eps-list", "1e-3", "--plot-data",
    ];
    std::fs::write(dir.path().join("r.cfg"), "restarts = 1\n").unwrap();
    let o = gamow(&[&args[..], &["--config", "r.cfg"]].concat(), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let row: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap().split(',').collect();
    assert!(row[1].parse::<f64>().unwrap() < 1e-2, "{csv}");
    for f in ["shape.txt", "trace.csv", "sweep_plot.dat"] {
        let text = std::fs::read_to_string(dir.path().join("out").join(f)).unwrap();
        assert!(text.starts_with(&format!("# {FORMAT_VERSION}")), "{f}");
    }
    let shape = std::fs::read_to_string(dir.path().join("out/shape.txt")).unwrap();
    assert_eq!(code(&gamow(&["energy", "out/shape.txt"], dir.path())), 0, "{shape}");
}

#[test]
fn forced_nonconvergence_exits_five_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("short.cfg"), "max_iters = 1\nrestarts = 1\n").unwrap();
    let o = gamow(
        &["minimize", "--config", "short.cfg", "--dim", "2", "--grid", "32", "--eps", "1e-3"],
        dir.path(),
    );
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["shape.txt", "trace.csv", "report.txt"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("converged = false"));
}
