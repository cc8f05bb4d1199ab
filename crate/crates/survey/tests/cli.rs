use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn spec_text(name: &str) -> String {
    fs::read_to_string(root().join("specs").join(name)).unwrap()
}

fn survey(args: &[&str], spec: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survey"))
        .args(args)
        .arg(spec)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn write_spec(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("spec.toml");
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn table_spec_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = survey(&["plan"], &root().join("specs/table1.toml"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        listing(&out),
        [
            "baseline.csv",
            "markers.csv",
            "report.json",
            "trajectory.csv",
            "trajectory_smooth.csv",
            "waypoints.json"
        ]
    );
    let report = json(&out.join("report.json"));
    assert_eq!(report["pass"], Value::Bool(true));
    let wps = json(&out.join("waypoints.json"));
    assert_eq!(wps["count"].as_u64().unwrap() as usize, wps["waypoints"].as_array().unwrap().len());

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x,y,z,vx,vy,vz,ax,ay,az,speed,accel");
    let t: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    let total = report["planner"]["total_time_s"].as_f64().unwrap();
    assert_eq!(*t.last().unwrap(), total);
    assert!((t[1] - t[0] - 0.02).abs() < 1e-12);
}

#[test]
fn waypoints_only_writes_one_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = survey(&["plan", "--waypoints-only"], &root().join("specs/table1.toml"), &out);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(&out), ["waypoints.json"]);
}

#[test]
fn altitude_and_gsd_together_is_a_spec_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = spec_text("table1.toml").replace("altitude_m = 10.0", "altitude_m = 10.0\ngsd_m_per_px = 0.01");
    let spec = write_spec(tmp.path(), &text);
    let o = survey(&["plan"], &spec, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exactly one of"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = root().join("specs/table1.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(survey(&["plan"], &spec, &a).status.code(), Some(0));
    assert_eq!(survey(&["plan"], &spec, &b).status.code(), Some(0));
    for name in listing(&a) {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

fn compare_times(text: &str) -> (Value, f64, f64) {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), text);
    let out = tmp.path().join("out");
    let o = survey(&["compare"], &spec, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out.join("compare.json"));
    let time = |i: usize| rep["rows"][i]["total_time_s"].as_f64().unwrap();
    let (nlp, base) = (time(0), time(1));
    (rep, nlp, base)
}

#[test]
fn zero_area_compare_takes_no_time() {
    let text = spec_text("comparison.toml")
        .replace("width_m = 30.0", "width_m = 0.0")
        .replace("height_m = 20.0", "height_m = 0.0");
    let (rep, nlp, base) = compare_times(&text);
    assert!(nlp < 1e-9 && base == 0.0, "{nlp} {base}");
    assert_eq!(rep["complete"], Value::Bool(true));
}

#[test]
fn single_line_compare_matches_closed_form() {
    let text = spec_text("comparison.toml").replace("height_m = 20.0", "height_m = 0.0");
    let (_, nlp, base) = compare_times(&text);
    // rest to rest over 30 m, cruise capped at 7 m/s, 12 m/s² along the axis
    let exact = 30.0 / 7.0 + 7.0 / 12.0;
    assert!((nlp - exact).abs() < 1e-6, "{nlp} vs {exact}");
    assert!((base - exact).abs() < 1e-9, "{base} vs {exact}");
}

#[test]
fn comparison_spec_nlp_beats_baseline() {
    let (rep, nlp, base) = compare_times(&spec_text("comparison.toml"));
    assert!(nlp < base);
    assert!(rep["relative_delta"].as_f64().unwrap() < 0.0);
}
