use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use stefan_core::analysis::{
    cylinder_ladder, fit_log_modulus, geometric_cases, geometric_convergence, intrinsic_theta, ladder_oscillations,
    lemma_iter_grid, lemma_iter_verify, measure_density, sample_omega0, Cylinder, DensityReport, ModulusReport,
};
use stefan_core::config::{ProblemSpec, RunConfig};
use stefan_core::continuation::{band_fraction, convergence_report, limit_pair, run_family};
use stefan_core::lattice::io::{field_to_csv, fmt_f64};
use stefan_core::lattice::{tail as tail_value, Point, TimeSlice};
use stefan_core::solver::{
    caccioppoli_audit, comparison_defect, max_principle_check, normalization_defect, read_trajectory, solve,
    write_trajectory, CaccioppoliReport, RadialCutoff,
};
use stefan_core::{Error, LatticeProblem, Trajectory, Truncation};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{what}: {}", failed.join("; "))]
    Contract { what: &'static str, failed: Vec<String> },
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

impl CliError {
    pub fn to_json(&self) -> Value {
        match self {
            CliError::Core(Error::SchemaViolation(v)) => {
                json!({"kind": "schema-violation", "message": self.to_string(), "violations": v})
            }
            CliError::Core(e) => json!({"kind": e.kind(), "message": e.to_string()}),
            CliError::Io(e) => json!({"kind": "io", "message": e.to_string()}),
            CliError::Contract { what, failed } => {
                json!({"kind": "contract-failed", "message": self.to_string(), "contract": what, "failed": failed})
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn problem(config: &RunConfig) -> CliResult<(ProblemSpec, LatticeProblem)> {
    let spec = config.problem.resolve()?;
    let built = spec.build()?;
    Ok((spec, built))
}

fn anchors(config: &RunConfig, problem: &LatticeProblem) -> Vec<(Point, f64)> {
    config
        .analysis
        .points
        .iter()
        .map(|z| {
            let x = [z.x[0], z.x.get(1).copied().unwrap_or(0.0)];
            (x, z.t.unwrap_or_else(|| problem.end_time()))
        })
        .collect()
}

fn theta_for(config: &RunConfig, traj: &Trajectory) -> (f64, f64) {
    let omega0 = config.analysis.omega0.unwrap_or_else(|| sample_omega0(traj));
    let theta = config
        .analysis
        .ladder
        .theta
        .unwrap_or_else(|| intrinsic_theta(omega0, traj.exps.p));
    (omega0, theta)
}

fn ensure(what: &'static str, failed: Vec<String>) -> CliResult<()> {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Contract { what, failed })
    }
}

fn max_residual(traj: &Trajectory) -> f64 {
    traj.diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max)
}

pub fn run_solve(config: &RunConfig, out: &Path) -> CliResult<Value> {
    let (_, problem) = problem(config)?;
    let traj = solve(&problem, &config.solver)?;
    write_trajectory(&traj, out, serde_json::to_value(config)?)?;
    fs::write(out.join("config.json"), config.to_canonical_json() + "\n")?;
    Ok(json!({
        "command": "solve",
        "output": out.display().to_string(),
        "slices": traj.len(),
        "final_time": traj.times.last(),
        "max_residual": max_residual(&traj),
        "newton_iterations": traj.diagnostics.iter().map(|d| d.newton_iterations).sum::<usize>(),
    }))
}

fn load_or_solve(config: &RunConfig, from: Option<&Path>) -> CliResult<(LatticeProblem, Trajectory)> {
    match from {
        None => {
            let (_, problem) = problem(config)?;
            let traj = solve(&problem, &config.solver)?;
            Ok((problem, traj))
        }
        Some(dir) => {
            let (manifest, fields) = read_trajectory(dir)?;
            let stored: RunConfig = serde_json::from_value(manifest.config.clone())
                .map_err(|e| Error::Malformed(format!("manifest config: {e}")))?;
            let (_, problem) = self::problem(&stored)?;
            if problem.grid != manifest.grid {
                return Err(Error::Malformed("manifest grid does not match its configuration".into()).into());
            }
            let traj = Trajectory::from_samples(&problem, manifest.times, fields, manifest.diagnostics)?;
            Ok((problem, traj))
        }
    }
}

#[derive(Serialize)]
struct AnchorModulus {
    x: Point,
    t: f64,
    omega0: f64,
    theta: f64,
    samples: Vec<(f64, f64)>,
    nonincreasing: bool,
    fit: Option<ModulusReport>,
    error: Option<Value>,
}

fn ladder_fit(config: &RunConfig, traj: &Trajectory, x: Point, t: f64) -> AnchorModulus {
    let (omega0, theta) = theta_for(config, traj);
    let l = config.analysis.ladder;
    let mut row = AnchorModulus {
        x,
        t,
        omega0,
        theta,
        samples: Vec::new(),
        nonincreasing: false,
        fit: None,
        error: None,
    };
    let osc = cylinder_ladder(x, t, l.rho0, l.q, l.levels, theta).and_then(|ladder| ladder_oscillations(traj, &ladder));
    match osc {
        Ok(osc) => {
            row.nonincreasing = osc.windows(2).all(|w| w[1].1 <= w[0].1);
            match fit_log_modulus(&osc, traj.epsilon(), l.rho0, config.analysis.model) {
                Ok(f) => row.fit = Some(f),
                Err(e) => row.error = Some(CliError::from(e).to_json()),
            }
            row.samples = osc;
        }
        Err(e) => row.error = Some(CliError::from(e).to_json()),
    }
    row
}

pub fn analyze_modulus(config: &RunConfig, out: &Path, from: Option<&Path>) -> CliResult<Value> {
    let (problem, traj) = load_or_solve(config, from)?;
    let rows: Vec<AnchorModulus> = anchors(config, &problem)
        .into_iter()
        .map(|(x, t)| ladder_fit(config, &traj, x, t))
        .collect();
    let mut failed = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let mut csv = String::from("level,rho,theta,osc\n");
        for (i, (r, o)) in row.samples.iter().enumerate() {
            let _ = writeln!(csv, "{i},{},{},{}", fmt_f64(*r), fmt_f64(row.theta), fmt_f64(*o));
        }
        fs::write(out.join(format!("ladder_{k}.csv")), csv)?;
        if !row.nonincreasing {
            failed.push(format!("anchor {k}: oscillation increases along the ladder"));
        }
        if let Some(e) = &row.error {
            failed.push(format!("anchor {k}: {}", e["message"]));
        }
    }
    write_json(&out.join("modulus.json"), &rows)?;
    ensure("modulus", failed)?;
    Ok(json!({
        "command": "analyze-modulus",
        "output": out.display().to_string(),
        "fits": rows.iter().map(|r| r.fit.as_ref().map(|f| json!({"c": f.c, "varsigma": f.varsigma, "residual": f.residual}))).collect::<Vec<_>>(),
    }))
}

pub fn continuation(config: &RunConfig, out: &Path) -> CliResult<Value> {
    let (_, problem) = problem(config)?;
    let c = &config.continuation;
    let family = run_family(&problem, &c.epsilons, &config.solver)?;
    let anchor = anchors(config, &problem)[0];
    let mut fits = Vec::new();
    let mut bands = Vec::new();
    for (i, entry) in family.entries.iter().enumerate() {
        match entry {
            Ok(traj) => {
                write_trajectory(traj, &out.join(format!("eps_{i}")), serde_json::to_value(config)?)?;
                fits.push(ladder_fit(config, traj, anchor.0, anchor.1).fit);
                bands.push(Some(band_fraction(traj, c.delta_resolve)));
            }
            Err(_) => {
                fits.push(None);
                bands.push(None);
            }
        }
    }
    let report = convergence_report(&family, &fits, c.spread_limit)?;
    let mut failed = report.issues.clone();
    let pair_summary = match limit_pair(&family, c.delta_resolve, c.band_limit) {
        Ok(p) => {
            let last = p.w.len() - 1;
            fs::write(out.join("limit_w.csv"), field_to_csv(&problem.grid, &p.w[last]))?;
            fs::write(out.join("limit_v.csv"), field_to_csv(&problem.grid, &p.v[last]))?;
            json!({"epsilon": p.epsilon, "delta": p.delta, "band_fraction": p.band_fraction})
        }
        Err(e) => {
            failed.push(e.to_string());
            json!({"error": CliError::from(e).to_json()})
        }
    };
    let manifest = json!({
        "epsilons": family.epsilons,
        "distances": family.distances,
        "successive": family.successive(),
        "band_fractions": bands,
        "report": report,
        "limit_pair": pair_summary,
    });
    write_json(&out.join("family.json"), &manifest)?;
    ensure("continuation", failed)?;
    Ok(json!({
        "command": "continuation",
        "output": out.display().to_string(),
        "successive": family.successive(),
        "band_fractions": bands,
    }))
}

pub fn lemma_check(config: &RunConfig, out: &Path) -> CliResult<Value> {
    let l = config.lemma;
    let grid = lemma_iter_grid(l.n_max)?;
    let mut failed = Vec::new();
    let mut csv = String::from("m2,n2,l2,omega0,epsilon,checked,first_violation,min_margin,passed\n");
    for v in &grid {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            v.m2,
            v.n2,
            v.l2,
            v.omega0,
            fmt_f64(v.epsilon),
            v.checked,
            v.first_violation.map(|n| n.to_string()).unwrap_or_default(),
            fmt_f64(v.min_margin),
            v.passed()
        );
        if !v.passed() {
            failed.push(format!(
                "iteration lemma fails for (M2, N2, L2, ω0) = ({}, {}, {}, {})",
                v.m2, v.n2, v.l2, v.omega0
            ));
        }
    }
    fs::write(out.join("lemma_iter.csv"), csv)?;
    let control = lemma_iter_verify(4.0, 4.0, 4.0, 1.0, l.n_max, Some(0.5))?;
    if control.passed() {
        failed.push("negative control ε = 0.5 found no violation".into());
    }

    let mut csv = String::from("c,b,alpha,a0,threshold,first_violation,diverged,final,passed\n");
    let mut rows = Vec::new();
    for (c, b, alpha) in geometric_cases(config.seed, l.tech1_samples) {
        let threshold = (-c.ln() / alpha - b.ln() / (alpha * alpha)).exp();
        rows.push((geometric_convergence(c, b, alpha, threshold, l.tech1_iterations)?, true));
    }
    // c = 1, b = 2, α = 1: threshold 1/2, started 50% above it
    let neg = geometric_convergence(1.0, 2.0, 1.0, 0.75, l.tech1_iterations)?;
    rows.push((neg, false));
    for (r, expect_pass) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.c),
            fmt_f64(r.b),
            fmt_f64(r.alpha),
            fmt_f64(r.a0),
            fmt_f64(r.threshold),
            r.first_violation.map(|n| n.to_string()).unwrap_or_default(),
            r.diverged,
            fmt_f64(*r.sequence.last().expect("nonempty")),
            r.passed()
        );
        if *expect_pass && !r.passed() {
            failed.push(format!(
                "geometric lemma fails for (c, b, α) = ({}, {}, {})",
                r.c, r.b, r.alpha
            ));
        }
        if !*expect_pass && !r.diverged {
            failed.push("negative control A0 × 1.5 did not diverge".into());
        }
    }
    fs::write(out.join("tech1.csv"), csv)?;
    let summary = json!({
        "command": "lemma-check",
        "output": out.display().to_string(),
        "iteration_cases": grid.len(),
        "iteration_passed": grid.iter().filter(|v| v.passed()).count(),
        "iteration_control_violation": control.first_violation,
        "geometric_cases": rows.len() - 1,
        "geometric_passed": rows.iter().filter(|(r, e)| *e && r.passed()).count(),
        "geometric_control_diverged": rows.last().map(|(r, _)| r.diverged),
        "failed": failed,
    });
    write_json(&out.join("lemma.json"), &summary)?;
    ensure("lemma-check", failed)?;
    Ok(summary)
}

#[derive(Serialize)]
struct CaccioppoliRow {
    x: Point,
    t: f64,
    report: Option<CaccioppoliReport>,
    error: Option<Value>,
}

pub fn verify(config: &RunConfig, out: &Path) -> CliResult<Value> {
    let (spec, problem) = problem(config)?;
    let tol = config.solver.newton_tol;
    let traj = solve(&problem, &config.solver)?;
    let mut failed = Vec::new();

    let residual = max_residual(&traj);
    if residual > tol {
        failed.push(format!("step residual {residual:e} exceeds {tol:e}"));
    }
    let mp = max_principle_check(&traj);
    if !mp.passed(tol) {
        failed.push(format!("maximum principle defect {:e}", mp.defect));
    }
    let upper = solve(&problem.shifted(0.1), &config.solver)?;
    let comparison = comparison_defect(&traj, &upper)?;
    if comparison > 10.0 * tol {
        failed.push(format!("comparison defect {comparison:e}"));
    }
    let normalization = normalization_defect(&problem, &traj, 2.0, &config.solver)?;
    if normalization > 10.0 * tol {
        failed.push(format!("normalization defect {normalization:e}"));
    }
    let energy: Vec<f64> = traj.diagnostics.iter().map(|d| d.energy).collect();
    let energy_increases = energy
        .windows(2)
        .filter(|w| w[1] > w[0] + 1e-12 * (1.0 + w[0].abs()))
        .count();
    if energy_increases > 0 {
        failed.push(format!("energy increased in {energy_increases} steps"));
    }

    let (_, theta) = theta_for(config, &traj);
    let rho = config.analysis.ladder.rho0;
    let mut cacc = Vec::new();
    for (x, t) in anchors(config, &problem) {
        for sign in [Truncation::Plus, Truncation::Minus] {
            let result = Cylinder::new(x, t, rho, theta).and_then(|cyl| {
                let cutoff = RadialCutoff::new(x, 0.5 * rho, rho)?;
                caccioppoli_audit(&traj, 0.0, sign, &cutoff, &cyl)
            });
            let row = match result {
                Ok(r) => {
                    if !r.passed(config.analysis.c_audit) {
                        failed.push(format!(
                            "Caccioppoli ratio {} exceeds {} at x = {:?}",
                            r.ratio, config.analysis.c_audit, x
                        ));
                    }
                    CaccioppoliRow {
                        x,
                        t,
                        report: Some(r),
                        error: None,
                    }
                }
                Err(e) => {
                    failed.push(format!("Caccioppoli audit at x = {x:?}: {e}"));
                    CaccioppoliRow {
                        x,
                        t,
                        report: None,
                        error: Some(CliError::from(e).to_json()),
                    }
                }
            };
            cacc.push(row);
        }
    }

    let dim = spec.dim();
    let density: Vec<DensityReport> = spec
        .omega
        .boundary_points(dim)
        .into_iter()
        .map(|pt| measure_density(&problem.grid, &problem.omega_mask, pt, &config.analysis.density_radii))
        .collect::<Result<_, _>>()?;
    for d in &density {
        if !d.passed(f64::MIN_POSITIVE) {
            failed.push(format!("no exterior mass near boundary point {:?}", d.x0));
        }
    }

    let report = json!({
        "max_residual": residual,
        "max_principle": mp,
        "comparison_defect": comparison,
        "normalization_defect": normalization,
        "energy_increases": energy_increases,
        "caccioppoli": cacc,
        "measure_density": density,
        "failed": failed,
    });
    write_json(&out.join("verify.json"), &report)?;
    ensure("verify", failed)?;
    Ok(json!({
        "command": "verify",
        "output": out.display().to_string(),
        "max_principle_defect": mp.defect,
        "comparison_defect": comparison,
        "normalization_defect": normalization,
    }))
}

pub fn tail(config: &RunConfig, out: &Path) -> CliResult<Value> {
    let (_, problem) = problem(config)?;
    let traj = solve(&problem, &config.solver)?;
    let (_, theta) = theta_for(config, &traj);
    let sp = traj.exps.sp();
    let mut csv = String::from("x0,x1,t,rho,theta,tail\n");
    let mut values = Vec::new();
    for (x, t) in anchors(config, &problem) {
        for &rho in &config.analysis.tail_radii {
            let cyl = Cylinder::new(x, t, rho, theta)?;
            let slices = cyl.slices(&traj, sp);
            if slices.is_empty() {
                return Err(Error::EmptyWindow.into());
            }
            let fields: Vec<_> = slices.iter().map(|&m| traj.field(m)).collect();
            let ts: Vec<TimeSlice<'_>> = slices
                .iter()
                .zip(&fields)
                .map(|(&m, f)| TimeSlice {
                    t: traj.times[m],
                    field: f,
                })
                .collect();
            let window = (traj.times[slices[0]], traj.times[*slices.last().expect("nonempty")]);
            let v = tail_value(&traj.grid, &ts, x, rho, window, traj.exps, |u| u)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_f64(x[0]),
                fmt_f64(x[1]),
                fmt_f64(t),
                fmt_f64(rho),
                fmt_f64(theta),
                fmt_f64(v)
            );
            values.push(json!({"x": x, "t": t, "rho": rho, "theta": theta, "tail": v}));
        }
    }
    fs::write(out.join("tail.csv"), csv)?;
    Ok(json!({"command": "tail", "output": out.display().to_string(), "values": values}))
}
