use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mvlevy::coefficient::CoefficientSpec;
use mvlevy::consistency::{compare_particles_pde, kde_on_grid, silverman_bandwidth};
use mvlevy::fractional_fp::{
    adjoint_identity_check, solve_linear_exact, write_density_csv, FpOptions, FpSolver, FractionalParams,
    TestFunction,
};
use mvlevy::grid::DensityGrid;
use mvlevy::levy_driver::{Driver, StableDriverSpec};
use mvlevy::particles::{chaos_rate_experiment, simulate_run, InitialLaw, SimulationConfig};
use mvlevy::rng::derive_seed;
use mvlevy::validation::{cf_battery, lemma4_experiment, vasdis_battery};
use mvlevy::variation_checks::{verify_h1, PerturbationParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, OracleSection, PdeSection};

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing configuration.
    Config(String),
    /// The computation itself failed.
    Run(String),
}

impl From<mvlevy::Error> for CliError {
    fn from(e: mvlevy::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn missing(section: &str, command: &str) -> CliError {
    CliError::Config(format!("`{command}` needs a [{section}] section"))
}

/// Output directory with helpers for the file formats used by every command.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn file(&self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Run(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn with<F>(&self, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> mvlevy::Result<()>,
    {
        let mut w = self.file(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Header plus rows; floats in `{:e}` so reruns compare byte for byte.
    fn table(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let mut w = self.file(name)?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn e(x: f64) -> String {
    format!("{x:e}")
}

/// What every command hands back to `main`.
pub struct Outcome {
    pub pass: bool,
    pub report: Value,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn initial_grid(law: &InitialLaw, half_width: f64, m: usize) -> CliResult<DensityGrid> {
    if law.density(0.0).is_none() {
        return Err(CliError::Config("initial_law must have a density for grid runs".into()));
    }
    Ok(DensityGrid::from_fn(half_width, m, |x| law.density(x).unwrap_or(0.0))?)
}

pub fn simulate(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sim = cfg.simulation.clone().ok_or_else(|| missing("simulation", "simulate"))?;
    let sim = sim.with_seed(cfg.seed);
    let opts = cfg.simulate.clone().unwrap_or_default();
    let run = simulate_run(&sim)?;
    let flow = &run.flow;
    out.with("flow.csv", |w| flow.write_csv(w))?;
    out.with("flow.bin", |w| flow.write_binary(w))?;
    out.table(
        "moments.csv",
        &["time", "mean", "second_moment"],
        flow.times()
            .iter()
            .zip(flow.marginals())
            .map(|(t, m)| vec![e(*t), e(m.mean()), e(m.second_moment())]),
    )?;

    let last = flow.last();
    let carrier = DensityGrid::from_fn(opts.kde_half_width, opts.kde_points, |_| 1.0)?;
    let h = silverman_bandwidth(last.samples());
    let kde = kde_on_grid(last.samples(), h, &carrier);
    out.table(
        "kde.csv",
        &["x", "p"],
        carrier.nodes().iter().zip(&kde).map(|(x, p)| vec![e(*x), e(*p)]),
    )?;

    let cf = cf_check(&sim, last.samples(), &opts.cf_xis, opts.cf_tolerance);
    let pass = cf.as_ref().is_none_or(|c| c["pass"] == Value::Bool(true));
    Ok(Outcome {
        pass,
        report: json!({
            "n_particles": sim.n_particles,
            "steps": sim.steps,
            "dt": sim.dt,
            "recorded_times": flow.len(),
            "final_mean": last.mean(),
            "final_second_moment": last.second_moment(),
            "kde_bandwidth": h,
            "cf_check": cf,
        }),
    })
}

/// With constant σ, a stable driver and a point-mass start, `X_T - x₀ = σ Z_T` has a known characteristic function.
fn cf_check(sim: &SimulationConfig, xs: &[f64], xis: &[f64], tolerance: Option<f64>) -> Option<Value> {
    let (CoefficientSpec::Constant { value }, Driver::Stable(spec), InitialLaw::PointMass { x: x0 }, None) =
        (&sim.sigma, &sim.driver, &sim.initial_law, sim.truncation)
    else {
        return None;
    };
    let n = xs.len() as f64;
    let tol = tolerance.unwrap_or(5.0 / n.sqrt());
    let rows: Vec<Value> = xis
        .iter()
        .map(|&xi| {
            let empirical = xs.iter().map(|x| (xi * (x - x0)).cos()).sum::<f64>() / n;
            let exact = spec.characteristic_function(xi * value.abs(), sim.horizon);
            json!({"xi": xi, "empirical": empirical, "exact": exact, "gap": (empirical - exact).abs()})
        })
        .collect();
    let sup = rows.iter().map(|r| r["gap"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    Some(json!({"rows": rows, "sup_gap": sup, "tolerance": tol, "pass": sup <= tol}))
}

pub fn pde(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sec = cfg.pde.as_ref().ok_or_else(|| missing("pde", "pde"))?;
    let p0 = initial_grid(&sec.initial_law, sec.half_width, sec.grid_points)?;
    let params = FractionalParams::new(sec.alpha, sec.k_prime)?;
    let solver = FpSolver::new(&p0, sec.sigma.clone(), params, sec.options.clone())?;
    let dt = match sec.dt {
        Some(dt) => dt,
        None => (0.9 * solver.stability_bound(&p0)?).min(sec.horizon),
    };
    let solution = solver.solve(&p0, sec.horizon, dt)?;

    out.with("log.csv", |w| solution.write_log_csv(w))?;
    out.with("snapshots.bin", |w| solution.write_binary(w))?;
    out.with("density_final.csv", |w| write_density_csv(solution.last(), w))?;
    for (k, snap) in solution.snapshots.iter().enumerate() {
        out.with(&format!("density_{k:04}.csv"), |w| write_density_csv(snap, w))?;
    }

    let max_mass_error = solution.max_mass_error();
    let mass_pass = max_mass_error <= sec.options.mass_drift_tol;
    let exact_gap = match sec.sigma {
        CoefficientSpec::Constant { value } if value == 0.0 => Some(sup_gap(solution.last(), &p0)),
        CoefficientSpec::Constant { value } => {
            let scaled = FractionalParams::new(sec.alpha, sec.k_prime * value.abs().powf(sec.alpha))?;
            let exact = solve_linear_exact(&p0, sec.horizon, &scaled)?;
            Some(sup_gap(solution.last(), &exact))
        }
        _ => None,
    };
    let oracle = match &sec.oracle {
        Some(o) => Some(linear_oracle(sec, o, &p0)?),
        None => None,
    };
    let oracle_pass = oracle.as_ref().is_none_or(|o| o["pass"] == Value::Bool(true));
    Ok(Outcome {
        pass: mass_pass && oracle_pass,
        report: json!({
            "dt": solution.dt,
            "steps": solution.steps,
            "snapshot_times": solution.times,
            "max_mass_error": max_mass_error,
            "mass_tolerance": sec.options.mass_drift_tol,
            "mass_pass": mass_pass,
            "max_boundary_density": solution.max_boundary_density(),
            "min_value": solution.log.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min),
            "max_error_vs_exact": exact_gap,
            "oracle": oracle,
        }),
    })
}

fn sup_gap(a: &DensityGrid, b: &DensityGrid) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn linear_oracle(sec: &PdeSection, o: &OracleSection, p0: &DensityGrid) -> CliResult<Value> {
    let CoefficientSpec::Constant { value } = sec.sigma else {
        return Err(CliError::Config("pde.oracle needs a constant sigma".into()));
    };
    let mut rows = Vec::new();
    let mut all = true;
    for &alpha in &o.alphas {
        let params = FractionalParams::new(alpha, sec.k_prime)?;
        let scaled = FractionalParams::new(alpha, sec.k_prime * value.abs().powf(alpha))?;
        let exact = solve_linear_exact(p0, sec.horizon, &scaled)?;
        let options = FpOptions {
            snapshot_every: None,
            ..sec.options.clone()
        };
        let solver = FpSolver::new(p0, sec.sigma.clone(), params, options)?;
        let dt = match o.dt {
            Some(dt) => dt,
            None => (0.9 * solver.stability_bound(p0)?).min(sec.horizon),
        };
        let coarse = sup_gap(solver.solve(p0, sec.horizon, dt)?.last(), &exact);
        let fine = sup_gap(solver.solve(p0, sec.horizon, dt / 2.0)?.last(), &exact);
        let ratio = coarse / fine;
        let pass = coarse <= o.max_error && ratio >= o.ratio_window.0 && ratio <= o.ratio_window.1;
        all &= pass;
        rows.push(json!({
            "alpha": alpha, "dt": dt, "error": coarse, "error_half_dt": fine, "ratio": ratio, "pass": pass,
        }));
    }
    Ok(json!({"rows": rows, "max_error": o.max_error, "ratio_window": o.ratio_window, "pass": all}))
}

pub fn chaos_rate(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sim = cfg.simulation.as_ref().ok_or_else(|| missing("simulation", "chaos-rate"))?;
    let sec = cfg.chaos.as_ref().ok_or_else(|| missing("chaos", "chaos-rate"))?;
    let table = chaos_rate_experiment(&sim.with_seed(cfg.seed), &sec.n_list, sec.reps, sec.n_ref)?;
    out.with("chaos.csv", |w| table.write_csv(w))?;
    out.json("slope.json", &json!({"status": table.status, "fit": table.fit}))?;

    let monotone = table.is_monotone_decreasing(2.0);
    let slope_pass = match sec.max_slope {
        Some(max) => table.fitted_slope().is_some_and(|s| s <= max),
        None => true,
    };
    let pass = slope_pass && (!sec.require_monotone || monotone) && table.vasdis_violations == 0;
    Ok(Outcome {
        pass,
        report: json!({
            "table": table,
            "monotone_within_2se": monotone,
            "max_slope": sec.max_slope,
            "slope_pass": slope_pass,
        }),
    })
}

pub fn compare(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sec = cfg.compare.as_ref().ok_or_else(|| missing("compare", "compare"))?;
    let mut setup = sec.setup.clone();
    setup.seed = cfg.seed;
    let report = compare_particles_pde(&setup)?;
    out.table(
        "l1.csv",
        &["n", "time", "l1", "bandwidth"],
        report.rows.iter().flat_map(|r| {
            report
                .times
                .iter()
                .zip(&r.l1)
                .map(|(t, l)| vec![r.n.to_string(), e(*t), e(*l), e(r.bandwidth)])
                .collect::<Vec<_>>()
        }),
    )?;
    let last = report.final_l1().last().copied().unwrap_or(f64::INFINITY);
    let l1_pass = sec.max_final_l1.is_none_or(|m| last <= m);
    let mass_pass = report.pde_max_mass_error <= setup.pde.mass_drift_tol;
    let pass = l1_pass && mass_pass && (!sec.require_decreasing || report.decreasing_at_horizon);
    Ok(Outcome {
        pass,
        report: json!({
            "report": report,
            "final_l1_at_largest_n": last,
            "max_final_l1": sec.max_final_l1,
        }),
    })
}

pub fn validate_sampler(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sec = cfg.sampler.as_ref().ok_or_else(|| missing("sampler", "validate-sampler"))?;
    let mut batteries = Vec::new();
    for (k, &alpha) in sec.alphas.iter().enumerate() {
        let spec = StableDriverSpec::new(alpha, sec.scale)?;
        let seed = derive_seed(cfg.seed, &[k as u64]);
        batteries.push(cf_battery(&spec, sec.dt, sec.draws, &sec.xis, sec.tolerance, seed)?);
    }
    out.table(
        "cf.csv",
        &["alpha", "xi", "empirical", "exact", "gap"],
        batteries.iter().flat_map(|b| {
            b.rows
                .iter()
                .map(|r| vec![e(b.alpha), e(r.xi), e(r.empirical), e(r.exact), e(r.gap)])
                .collect::<Vec<_>>()
        }),
    )?;
    Ok(Outcome {
        pass: batteries.iter().all(|b| b.pass),
        report: json!({ "batteries": batteries }),
    })
}

pub fn check_h1(cfg: &ExperimentConfig, _out: &Output) -> CliResult<Outcome> {
    let sec = cfg.h1.as_ref().ok_or_else(|| missing("h1", "check-h1"))?;
    let params = PerturbationParams::new(sec.gamma, sec.eps, sec.alpha, sec.k1)?;
    let report = verify_h1(&params, &sec.grids)?;
    Ok(Outcome {
        pass: report.all_pass(),
        report: to_value(&report),
    })
}

pub fn metrics(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sec = cfg.metrics.as_ref().ok_or_else(|| missing("metrics", "metrics"))?;
    if sec.empirical_gap.is_none() && sec.vasdis.is_none() {
        return Err(CliError::Config("[metrics] needs an empirical_gap or vasdis table".into()));
    }
    let mut pass = true;
    let gap = match &sec.empirical_gap {
        Some(g) => {
            let table = lemma4_experiment(&g.n_list, g.reps, g.reference_size, derive_seed(cfg.seed, &[1]))?;
            out.table(
                "empirical_gap.csv",
                &["n", "estimate", "std_error"],
                table.rows.iter().map(|r| vec![r.n.to_string(), e(r.estimate), e(r.std_error)]),
            )?;
            pass &= table.within_bound && table.decreasing;
            Some(table)
        }
        None => None,
    };
    let vasdis = match &sec.vasdis {
        Some(v) => {
            let report = vasdis_battery(v.pairs, (v.n_min, v.n_max), derive_seed(cfg.seed, &[2]))?;
            pass &= report.violations == 0;
            Some(report)
        }
        None => None,
    };
    Ok(Outcome {
        pass,
        report: json!({ "empirical_gap": gap, "vasdis": vasdis }),
    })
}

pub fn adjoint(cfg: &ExperimentConfig, out: &Output) -> CliResult<Outcome> {
    let sec = cfg.adjoint.as_ref().ok_or_else(|| missing("adjoint", "adjoint"))?;
    let params = FractionalParams::from_levy_density(sec.alpha, sec.k)?;
    let mut rows = Vec::new();
    for case in &sec.cases {
        let nu = initial_grid(&case.nu, sec.half_width, sec.grid_points)?;
        let phi = TestFunction::new(case.phi.clone())?;
        let psi = TestFunction::new(case.psi.clone())?;
        let report = adjoint_identity_check(&case.sigma, &nu, &phi, &psi, &params)?;
        rows.push((case.name.clone(), report));
    }
    out.table(
        "adjoint.csv",
        &["case", "left", "right", "relative_error"],
        rows.iter().map(|(n, r)| vec![n.clone(), e(r.left), e(r.right), e(r.relative_error)]),
    )?;
    let pass = rows.iter().all(|(_, r)| r.relative_error <= sec.tolerance);
    let cases: Vec<Value> = rows
        .iter()
        .map(|(n, r)| json!({"name": n, "left": r.left, "right": r.right, "relative_error": r.relative_error}))
        .collect();
    Ok(Outcome {
        pass,
        report: json!({"k_prime": params.k_prime(), "tolerance": sec.tolerance, "cases": cases}),
    })
}
