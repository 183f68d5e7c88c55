//! Acceptance suite: runs every preset through the CLI binary and prints one
//! line per criterion. Exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_mvlevy");

struct Run {
    status: i32,
    summary: Value,
    elapsed: Duration,
    dir: PathBuf,
}

fn run(command: &str, preset: &str, dir: &Path, extra: &[&str]) -> Run {
    let start = Instant::now();
    let output = Command::new(BIN)
        .args([command, "--preset", preset, "--out"])
        .arg(dir)
        .args(extra)
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let summary = std::fs::read_to_string(dir.join("summary.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(Value::Null);
    if !output.status.success() {
        eprint!("{}", String::from_utf8_lossy(&output.stderr));
    }
    Run {
        status: output.status.code().unwrap_or(-1),
        summary,
        elapsed,
        dir: dir.to_path_buf(),
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(run: &Run, limit_s: f64) -> (bool, String) {
    let s = run.elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s < {limit_s}s"))
}

fn ac1(root: &Path) -> Verdict {
    let r = run("validate-sampler", "AC1", &root.join("AC1"), &[]);
    let batteries = r.summary["report"]["batteries"].as_array().cloned().unwrap_or_default();
    let worst = batteries.iter().map(|b| f(&b["sup_gap"])).fold(0.0, f64::max);
    let moments = batteries.iter().filter_map(|b| b["gaussian_moments"].as_object()).all(|g| g["pass"] == true);
    let (fast, t) = within(&r, 30.0);
    verdict(
        r.status == 0 && batteries.len() == 5 && worst <= 5e-3 && moments && fast,
        format!("worst CF gap {worst:.2e} ≤ 5e-3 over 5 α, α=2 moments ok={moments}, {t}"),
    )
}

fn ac2(root: &Path) -> Verdict {
    let r = run("metrics", "AC2", &root.join("AC2"), &[]);
    let table = &r.summary["report"]["empirical_gap"];
    let est: Vec<String> = table["rows"]
        .as_array()
        .map(|rows| rows.iter().map(|row| format!("{:.3e}", f(&row["estimate"]))).collect())
        .unwrap_or_default();
    let (fast, t) = within(&r, 60.0);
    verdict(
        r.status == 0 && table["within_bound"] == true && table["decreasing"] == true && fast,
        format!("E d² = [{}] ≤ 4, decreasing within 2 SE, {t}", est.join(", ")),
    )
}

fn ac3(root: &Path) -> Verdict {
    let r = run("metrics", "AC3", &root.join("AC3"), &[]);
    let v = &r.summary["report"]["vasdis"];
    verdict(
        r.status == 0 && v["pairs"] == 10_000 && v["violations"] == 0,
        format!("{} violations in {} pairs, max ratio {:.6}", v["violations"], v["pairs"], f(&v["max_ratio"])),
    )
}

fn slope_line(r: &Run) -> (f64, String) {
    let table = &r.summary["report"]["table"];
    let slope = f(&table["fit"]["slope"]);
    let ci = &table["fit"]["ci95"];
    (slope, format!("slope {slope:.3} (95% CI [{:.3}, {:.3}])", f(&ci[0]), f(&ci[1])))
}

fn ac4(root: &Path) -> Verdict {
    let r = run("chaos-rate", "AC4", &root.join("AC4"), &[]);
    let (slope, line) = slope_line(&r);
    let (fast, t) = within(&r, 600.0);
    verdict(r.status == 0 && slope <= -0.8 && fast, format!("{line} ≤ -0.8, {t}"))
}

fn ac5(root: &Path) -> Verdict {
    let r = run("chaos-rate", "AC5", &root.join("AC5"), &[]);
    let (slope, line) = slope_line(&r);
    let monotone = r.summary["report"]["monotone_within_2se"] == true;
    let (fast, t) = within(&r, 600.0);
    verdict(
        r.status == 0 && slope <= -0.3 && monotone && fast,
        format!("{line} ≤ -0.3, monotone within 2 SE={monotone}, {t}"),
    )
}

fn ac6(root: &Path) -> Verdict {
    let r = run("pde", "AC6", &root.join("AC6"), &[]);
    let log = std::fs::read_to_string(r.dir.join("log.csv")).unwrap_or_default();
    let masses: Vec<f64> = log
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.parse().ok())
        .collect();
    let worst = masses.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        r.status == 0 && !masses.is_empty() && worst <= 1e-9,
        format!("max |mass - 1| = {worst:.2e} ≤ 1e-9 over {} steps", masses.len()),
    )
}

fn ac7(root: &Path) -> Verdict {
    let r = run("pde", "AC7", &root.join("AC7"), &[]);
    let rows = r.summary["report"]["oracle"]["rows"].as_array().cloned().unwrap_or_default();
    let ok = rows.len() == 2
        && rows
            .iter()
            .all(|row| f(&row["error"]) <= 1e-6 && (12.0..=20.0).contains(&f(&row["ratio"])));
    let detail: Vec<String> = rows
        .iter()
        .map(|row| format!("α={}: err {:.2e}, ratio {:.2}", row["alpha"], f(&row["error"]), f(&row["ratio"])))
        .collect();
    verdict(r.status == 0 && ok, detail.join("; "))
}

fn ac8(root: &Path) -> Verdict {
    let r = run("compare", "AC8", &root.join("AC8"), &[]);
    let rep = &r.summary["report"]["report"];
    let finals: Vec<f64> = rep["rows"]
        .as_array()
        .map(|rows| rows.iter().map(|row| f(row["l1"].as_array().and_then(|a| a.last()).unwrap_or(&Value::Null))).collect())
        .unwrap_or_default();
    let decreasing = finals.windows(2).all(|w| w[1] < w[0]);
    let last = finals.last().copied().unwrap_or(f64::NAN);
    let (fast, t) = within(&r, 300.0);
    let shown: Vec<String> = finals.iter().map(|v| format!("{v:.3e}")).collect();
    verdict(
        r.status == 0 && finals.len() == 3 && decreasing && last <= 0.05 && fast,
        format!("L¹(T) = [{}] decreasing, last ≤ 0.05, {t}", shown.join(", ")),
    )
}

fn ac9(root: &Path) -> Verdict {
    let r = run("adjoint", "AC9", &root.join("AC9"), &[]);
    let cases = r.summary["report"]["cases"].as_array().cloned().unwrap_or_default();
    let worst = cases.iter().map(|c| f(&c["relative_error"])).fold(0.0, f64::max);
    verdict(
        r.status == 0 && cases.len() == 3 && worst <= 1e-4,
        format!("worst relative error {worst:.2e} ≤ 1e-4 over {} cases", cases.len()),
    )
}

fn ac10(root: &Path) -> Verdict {
    let r = run("check-h1", "AC10", &root.join("AC10"), &[]);
    let checks = r.summary["report"]["checks"].as_array().cloned().unwrap_or_default();
    let find = |name: &str| checks.iter().find(|c| c["name"] == name).cloned().unwrap_or(Value::Null);
    let k1 = find("k_at_one_is_zero");
    let names = ["majosk_k", "majosk_dk", "majosk_k_over_y"];
    let majosk = names.iter().all(|n| find(n)["pass"] == true && f(&find(n)["margin"]) > 0.0);
    let margins: Vec<String> = names.iter().map(|n| format!("{n} {:.2e}", f(&find(n)["margin"]))).collect();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| c["pass"] != true)
        .map(|c| c["name"].as_str().unwrap_or("?").to_string())
        .collect();
    verdict(
        r.status == 0 && failed.is_empty() && f(&k1["value"]) == 0.0 && majosk,
        format!(
            "{} checks, failed: [{}], k_ε(1) = {}, margins > 0: {}",
            checks.len(),
            failed.join(", "),
            k1["value"],
            margins.join(", ")
        ),
    )
}

fn ac11(root: &Path) -> Verdict {
    let one = run("chaos-rate", "AC4", &root.join("AC11-t1"), &["--threads", "1"]);
    let eight = run("chaos-rate", "AC4", &root.join("AC11-t8"), &["--threads", "8"]);
    let read = |r: &Run, name: &str| std::fs::read(r.dir.join(name)).ok();
    let same = ["chaos.csv", "slope.json"]
        .iter()
        .all(|n| read(&one, n).is_some() && read(&one, n) == read(&eight, n));
    verdict(
        one.status == 0 && eight.status == 0 && same,
        format!("chaos.csv and slope.json identical for --threads 1 and 8: {same}"),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let root = tempfile::tempdir().expect("temp dir");
    let criteria: [(&str, fn(&Path) -> Verdict); 11] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
        ("AC11", ac11),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f.eq_ignore_ascii_case(name)) {
            continue;
        }
        let v = check(root.path());
        println!("{name:<5} {}  {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
