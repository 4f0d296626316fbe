use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_datareward")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn preset_file(dir: &Path, id: &str) -> String {
    let o = run(&["preset", id]);
    assert!(o.status.success());
    let path = dir.join(format!("{id}.toml"));
    std::fs::write(&path, &o.stdout).unwrap();
    path.to_str().unwrap().to_owned()
}

fn field<'a>(header: &'a str, row: &'a str, name: &str) -> &'a str {
    let i = header.split(',').position(|h| h == name).unwrap();
    row.split(',').nth(i).unwrap()
}

#[test]
fn sar_exhausts_capacity_from_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = preset_file(dir.path(), "fig5a");
    let o = run(&["solve", "--scenario", &path, "--scheme", "sar", "--capacity", "1.6e7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "scheme,omega_star,p_star,p_star_I,p_star_II,r_data,r_ad,r_total,demand,case,capacity_binding"
    );
    let row = lines.next().unwrap();
    assert_eq!(field(header, row, "capacity_binding"), "true");
    assert_eq!(field(header, row, "scheme"), "SAR");
}

#[test]
fn unused_capacity_scenario_as_json() {
    let o = run(&["solve", "--preset", "appK", "--scheme", "sar", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let w = v["omega_star"].as_f64().unwrap();
    assert!((w - 0.137).abs() < 0.005, "{w}");
    assert_eq!(v["capacity_binding"], false);
}

#[test]
fn distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = preset_file(dir.path(), "fig5a");
    let text = std::fs::read_to_string(&path).unwrap();
    let zero_a = dir.path().join("zero_a.toml");
    std::fs::write(&zero_a, text.replace("A = 0.6", "A = 0.0")).unwrap();
    assert_ne!(text, std::fs::read_to_string(&zero_a).unwrap());
    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "N = [").unwrap();

    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["solve", "--scenario", zero_a.to_str().unwrap()]), 5);
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&["solve", "--scenario", missing.to_str().unwrap()]), 3);
    assert_eq!(code(&["solve", "--scenario", broken.to_str().unwrap()]), 4);
    assert_eq!(code(&["reproduce", "fig9z"]), 6);
    assert_eq!(code(&["sweep", "--preset", "fig5a", "--from", "2e7", "--to", "1e7", "--steps", "3"]), 2);
    let stderr = String::from_utf8(run(&["solve", "--scenario", zero_a.to_str().unwrap()]).stderr).unwrap();
    assert!(stderr.contains('A'), "{stderr}");
}

#[test]
fn sweep_rows_and_determinism() {
    let args = ["sweep", "--preset", "fig5a", "--from", "1e7", "--to", "1.5e7", "--steps", "2"];
    let a = run(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    let schemes: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(schemes, ["SAR", "SUR", "SURD", "SAR", "SUR", "SURD"]);
    assert_eq!(a.stdout, run(&args).stdout);
}

#[test]
fn weak_wear_out_reproduction() {
    let o = run(&["reproduce", "fig5d", "--steps", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 24);
    for chunk in rows.chunks(3) {
        let r = |i: usize| field(header, chunk[i], "r_total").parse::<f64>().unwrap();
        let (sar, sur, surd) = (r(0), r(1), r(2));
        assert!(sur >= sar * (1.0 - 1e-6));
        assert!((surd - sur).abs() <= 1e-6 * sur);
    }
}

#[test]
fn preset_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let toml = preset_file(dir.path(), "fig7c");
    let from_file = run(&["solve", "--scenario", &toml]);
    let from_preset = run(&["solve", "--preset", "fig7c"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_preset.stdout);

    let json = dir.path().join("fig7c.json");
    std::fs::write(&json, run(&["preset", "fig7c", "--json"]).stdout).unwrap();
    assert_eq!(run(&["solve", "--scenario", json.to_str().unwrap()]).stdout, from_preset.stdout);
}

#[test]
fn threshold_and_response_tables() {
    let o = run(&["thresholds", "--preset", "fig7c", "--from", "0.01", "--to", "0.03", "--steps", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "omega,case,theta0,theta1,theta2,theta3,theta4");
    assert_eq!(text.lines().count(), 6);

    let o = run(&["responses", "--preset", "fig5a", "--omega", "0.005", "--steps", "10", "--scheme", "sar"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 11);
}

#[test]
fn verify_passes_on_a_preset() {
    let o = run(&["verify", "--preset", "fig5a", "--draws", "100"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}
