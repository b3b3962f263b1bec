use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wavefirst::io::{read_metrics, GridData, GridFile};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn wavefirst(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavefirst"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("WAVEFIRST_THREADS")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(format!("{name}.toml")).display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn metric(dir: &Path, key: &str) -> f64 {
    read_metrics(&dir.join("metrics.txt")).unwrap()[key].parse().unwrap()
}

#[test]
fn small_coupler_design_is_monotone_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = wavefirst(&["design", &config("coupler_small")], &a);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    let rows: Vec<Vec<f64>> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 40);
    let half: Vec<f64> = rows.concat();
    assert!(half.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8)));
    for f in ["structure.grid", "structure.png", "field_0.grid", "field_0_abs.png", "field_0_re.png", "metrics.txt"] {
        assert!(a.join(f).exists(), "{f} missing");
    }

    let second = wavefirst(&["design", &config("coupler_small")], &b);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("structure.grid")).unwrap(), std::fs::read(b.join("structure.grid")).unwrap());

    // simulating the written structure reproduces the reported efficiency
    let sim = tmp.path().join("sim");
    let structure = a.join("structure.grid").display().to_string();
    let o = wavefirst(&["simulate", &config("coupler_small"), "--structure", &structure], &sim);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (designed, simulated) = (metric(&a, "objective_0.efficiency"), metric(&sim, "objective_0.efficiency"));
    assert!((designed - simulated).abs() <= 1e-9, "{designed} vs {simulated}");
}

#[test]
fn low_permittivity_bound_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "kind = \"coupler\"\n[coupler]\neps_lo = 0.5\n").unwrap();
    let o = wavefirst(&["design", path.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps_lo"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "kind = \"coupler\"\n[coupler]\nbox_wdth = 3\n").unwrap();
    let o = wavefirst(&["design", path.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("box_wdth"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wavefirst"))
        .args(["design", &config("coupler_small"), "--out"])
        .arg(tmp.path())
        .env("WAVEFIRST_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("WAVEFIRST_THREADS"));
}

#[test]
fn missing_structure_file_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wavefirst(&["simulate", &config("vacuum"), "--structure", "/nonexistent/structure.grid"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn vacuum_plane_wave_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wavefirst(&["simulate", &config("vacuum")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let f = GridFile::read(&tmp.path().join("field_0.grid")).unwrap();
    let GridData::Complex(x) = &f.data else { panic!("field file is not complex") };
    // columns between the source and the right absorber
    let mags: Vec<f64> = (20..f.nx - 12).flat_map(|i| (0..f.ny).map(move |j| (i, j))).map(|(i, j)| x[i * f.ny + j].norm()).collect();
    let (lo, hi) = mags.iter().fold((f64::MAX, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!((hi - lo) / (hi + lo) <= 0.01, "ripple {}", (hi - lo) / (hi + lo));
    assert!((metric(tmp.path(), "objective_0.efficiency") - 1.0).abs() < 1e-3);
}

fn betas(o: &Output) -> Vec<f64> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            it.next()?.parse::<usize>().ok()?;
            it.next()?.parse().ok()
        })
        .collect()
}

#[test]
fn slab_has_three_ordered_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wavefirst(&["modes", &config("slab_modes")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let b = betas(&o);
    assert_eq!(b.len(), 3, "{b:?}");
    assert!(b.windows(2).all(|w| w[0] > w[1]));
    for k in 0..3 {
        assert!(tmp.path().join(format!("mode_{k}.grid")).exists());
    }
}

#[test]
fn vacuum_mode_follows_discrete_dispersion() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wavefirst(&["modes", &config("vacuum_modes")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let b = betas(&o);
    let omega = 2.0 * std::f64::consts::PI / 25.0;
    assert!((2.0 * (b[0] / 2.0).sin() - omega).abs() <= 1e-10, "{b:?}");
}

#[test]
fn missing_mode_index_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("modes.toml");
    let text = std::fs::read_to_string(configs().join("slab_modes.toml")).unwrap();
    std::fs::write(&path, text.replace("periodic = false", "periodic = false\nmode_index = 9")).unwrap();
    let o = wavefirst(&["modes", path.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains('9'));
}
