use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use billiard_lab::geometry::{build_domain, DomainSpec};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_billiard-lab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_spec(dir: &Path, name: &str, spec: &DomainSpec) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn circle_file(dir: &TempDir) -> String {
    write_spec(dir.path(), "circle.json", &DomainSpec::circle(1.0, 1024))
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

/// CSV as a header plus rows of numbers; non-numeric cells become NaN.
fn read_table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

#[test]
fn domain_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let spec = DomainSpec::ellipse(1.5, 1.0, 512);
    let input = write_spec(dir.path(), "e.json", &spec);
    let out_path = path(&dir, "canonical.json");
    let out = run(&["domain", "--domain", &input, "-o", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let back = DomainSpec::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(build_domain(&back).unwrap().canonical_hash(), build_domain(&spec).unwrap().canonical_hash());
}

#[test]
fn beta_on_circle_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let circle = circle_file(&dir);
    let out = run(&["beta", "--domain", &circle, "--q", "3..=64"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_table(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 62);
    let (qc, bc, mc) = (column(&header, "q"), column(&header, "beta"), column(&header, "mls"));
    for r in &rows {
        let q = r[qc];
        assert!((r[bc] + 2.0 * (PI / q).sin()).abs() < 1e-8, "q {q}");
        assert!((r[mc] + q * r[bc]).abs() < 1e-12 * r[mc]);
    }
}

#[test]
fn invariants_and_verify_on_circle() {
    let dir = TempDir::new().unwrap();
    let circle = circle_file(&dir);
    let out = run(&["invariants", "--domain", &circle]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["I1"].as_f64().unwrap() - TAU).abs() < 1e-10 * TAU);
    assert!(json["checks"]["ibp_gap"].is_number());

    let report = path(&dir, "verify.json");
    let out = run(&["verify", "--domain", &circle, "-o", report.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("PASS") && !stderr.contains("FAIL"));
    assert!(std::fs::read_to_string(report).unwrap().contains("twist"));
}

#[test]
fn orbit_json_has_the_documented_fields() {
    let dir = TempDir::new().unwrap();
    let circle = circle_file(&dir);
    let out = run(&["orbit", "--domain", &circle, "--p", "2", "--q", "5"]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["p"], 2);
    assert_eq!(json["q"], 5);
    assert_eq!(json["thetas"].as_array().unwrap().len(), 5);
    assert!((json["length"].as_f64().unwrap() - 10.0 * (2.0 * PI / 5.0).sin()).abs() < 1e-10);
    assert!(json["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn map_runs_backwards() {
    let dir = TempDir::new().unwrap();
    let e = write_spec(dir.path(), "e.json", &DomainSpec::ellipse(2.0, 1.0, 1024));
    let fwd = run(&["map", "--domain", &e, "--s", "0.3", "--phi", "1.0", "--steps", "7"]);
    assert_eq!(code(&fwd), 0);
    let (header, rows) = read_table(&String::from_utf8(fwd.stdout).unwrap());
    assert_eq!(header, ["k", "s", "phi", "x", "y"]);
    assert_eq!(rows.len(), 8);
    let last = &rows[7];
    let back = run(&["map", "--domain", &e, "--s", &last[1].to_string(), "--phi", &last[2].to_string(), "--steps", "-7"]);
    assert_eq!(code(&back), 0);
    let (_, rows) = read_table(&String::from_utf8(back.stdout).unwrap());
    assert_eq!(rows[7][0], -7.0);
    assert!((rows[7][1] - 0.3).abs() < 1e-9 && (rows[7][2] - 1.0).abs() < 1e-9);
}

#[test]
fn pipeline_from_caustics_to_ratios() {
    let dir = TempDir::new().unwrap();
    let circle = circle_file(&dir);
    let p = |n: &str| path(&dir, n).to_str().unwrap().to_string();
    let (caustics, fit, plot, inv) = (p("c.csv"), p("fit.json"), p("plot.csv"), p("inv.json"));

    assert_eq!(code(&run(&["caustics", "--domain", &circle, "--q", "16..=64", "-o", &caustics])), 0);
    let (header, rows) = read_table(&std::fs::read_to_string(&caustics).unwrap());
    assert_eq!(header, ["q", "omega", "gamma_length", "Q", "err_bar"]);
    assert_eq!(rows.len(), 49);

    let out = run(&["fit", "--caustics", &caustics, "--domain", &circle, "-o", &fit, "--plot", &plot]);
    assert_eq!(code(&out), 0);
    let (plot_header, plot_rows) = read_table(&std::fs::read_to_string(&plot).unwrap());
    assert_eq!(plot_header, ["u", "y", "y_fit"]);
    assert_eq!(plot_rows.len(), 49);

    assert_eq!(code(&run(&["invariants", "--domain", &circle, "-o", &inv])), 0);
    let out = run(&["ratios", "--fit", &fit, "--invariants", &inv]);
    assert_eq!(code(&out), 0);
    let (header, rows) = read_table(&String::from_utf8(out.stdout).unwrap());
    let ratio = rows[0][column(&header, "ratio")];
    assert!((ratio + 1.5f64.powf(2.0 / 3.0) / 2.0).abs() < 1e-2 * ratio.abs());

    // the beta table re-enters the caustic stage
    let beta = p("beta.csv");
    assert_eq!(code(&run(&["beta", "--domain", &circle, "--q", "15..=65", "-o", &beta])), 0);
    let out = run(&["caustics", "--beta-csv", &beta, "--perimeter", &TAU.to_string(), "--q", "16..=64"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(&caustics).unwrap());
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let e = write_spec(dir.path(), "e.json", &DomainSpec::ellipse(1.3, 1.0, 1024));
    let beta = |threads: &str| run(&["beta", "--domain", &e, "--q", "5..40", "--threads", threads]).stdout;
    let one = beta("1");
    assert_eq!(one, beta("1"));
    let (_, a) = read_table(&String::from_utf8(one).unwrap());
    let (_, b) = read_table(&String::from_utf8(beta("4")).unwrap());
    for (x, y) in a.iter().zip(&b) {
        assert!(x.iter().zip(y).all(|(u, v)| (u - v).abs() <= 1e-12 * u.abs().max(1.0)));
    }
}

#[test]
fn cache_directory_is_reused() {
    let dir = TempDir::new().unwrap();
    let circle = circle_file(&dir);
    let cache = path(&dir, "cache");
    std::fs::create_dir(&cache).unwrap();
    let args = ["beta", "--domain", &circle, "--q", "3..20", "--cache-dir", cache.to_str().unwrap()];
    let first = run(&args);
    assert_eq!(code(&first), 0);
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(files.len(), 1);
    assert_eq!(run(&args).stdout, first.stdout);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let circle = circle_file(&dir);
    // usage and configuration errors
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["invariants", "--domain", "/nonexistent/domain.json"])), 2);
    assert_eq!(code(&run(&["orbit", "--domain", &circle, "--p", "2", "--q", "4"])), 2);
    assert_eq!(code(&run(&["map", "--domain", &circle, "--phi", "0.0"])), 2);
    let nonconvex = write_spec(dir.path(), "bad.json", &DomainSpec::support_fourier(1.0, vec![(2, 0.6, 0.0)], 256));
    assert_eq!(code(&run(&["domain", "--domain", &nonconvex])), 2);

    // numerical failure: a beta table whose caustic lengths do not increase
    let beta = path(&dir, "beta.csv");
    assert_eq!(code(&run(&["beta", "--domain", &circle, "--q", "10..=20", "-o", beta.to_str().unwrap()])), 0);
    let text = std::fs::read_to_string(&beta).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let fields: Vec<&str> = lines[6].split(',').collect();
    let mls: f64 = fields[3].parse::<f64>().unwrap() * 0.999;
    let q: f64 = fields[1].parse().unwrap();
    lines[6] = format!("{},{},{},{},{}", fields[0], fields[1], fields[2], mls, -mls / q);
    std::fs::write(&beta, lines.join("\n")).unwrap();
    assert_eq!(code(&run(&["caustics", "--beta-csv", beta.to_str().unwrap()])), 3);
}
