//! Config-driven runs writing CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use super::config::{fmt_num, ConfigError, LqParams, ProblemConfig, RunConfig, Variant};
use crate::error::Error;
use crate::grid::Grid;
use crate::metrics::{relative_errors, ErrorNorms};
use crate::mfg::{IterationRecord, MfgSolution, MfgSolver, SolveConfig};
use crate::problem::{CongestionProblem, LqAnalytic, LqProblem, Problem};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The configuration parsed but cannot be discretized.
    #[error("invalid setup: {0}")]
    Setup(#[source] Error),
    #[error("solver failed: {0}")]
    Solve(#[source] Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Setup(_) => 2,
            CliError::Solve(_) | CliError::Write { .. } => 3,
        }
    }
}

/// An instantiated problem.
pub enum BuiltProblem {
    Lq(LqProblem),
    Congestion(CongestionProblem),
}

pub fn lq_problem(p: &LqParams) -> crate::Result<LqProblem> {
    Ok(LqProblem {
        analytic: LqAnalytic::new(p.horizon, vec![p.mean], vec![p.variance])?,
        control_radius: p.control_radius,
        lower: vec![p.lower],
        upper: vec![p.upper],
        dirichlet: true,
    })
}

/// Builds the problem and its grid for spacing `dx`.
pub fn build(cfg: &RunConfig, dx: f64) -> Result<(BuiltProblem, Grid), CliError> {
    let out = match &cfg.problem {
        ProblemConfig::Lq1d(p) => {
            let prob = lq_problem(p).map_err(CliError::Setup)?;
            let (lo, hi) = prob.domain();
            let grid = Grid::lattice_in_box(&lo, &hi, dx).map_err(CliError::Setup)?;
            (BuiltProblem::Lq(prob), grid)
        }
        ProblemConfig::Congestion2d(p) => {
            let (lo, hi) = CongestionProblem::box_for(p);
            let grid = Grid::lattice_in_box(&lo, &hi, dx).map_err(CliError::Setup)?;
            let prob = CongestionProblem::new(p.clone(), &grid).map_err(CliError::Setup)?;
            (BuiltProblem::Congestion(prob), grid)
        }
    };
    Ok(out)
}

/// Validates everything short of solving: parameters, grid, time step and
/// mollifier. Returns the number of cells and time steps.
pub fn check(cfg: &RunConfig) -> Result<(usize, usize), CliError> {
    let dxs: Vec<f64> = match cfg.dx {
        Some(dx) => vec![dx],
        None => cfg.dx_list.clone(),
    };
    let mut shape = (0, 0);
    for dx in dxs {
        let (problem, grid) = build(cfg, dx)?;
        let sc = cfg.solve_config(dx, cfg.mode);
        sc.fixed_point.validate().map_err(CliError::Setup)?;
        shape = with_solver(&problem, grid, &sc, |s| Ok((s.grid().len(), s.time().steps))).map_err(CliError::Setup)?;
    }
    Ok(shape)
}

fn with_solver<R>(
    problem: &BuiltProblem,
    grid: Grid,
    sc: &SolveConfig,
    f: impl FnOnce(&MfgSolver<'_, dyn Problem>) -> crate::Result<R>,
) -> crate::Result<R> {
    let p: &dyn Problem = match problem {
        BuiltProblem::Lq(p) => p,
        BuiltProblem::Congestion(p) => p,
    };
    f(&MfgSolver::on_grid(p, grid, sc)?)
}

/// Outcome of a single solve.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub steps: usize,
    pub dt: f64,
    pub cells: usize,
    pub wall_s: f64,
    pub final_mean: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Files staged in memory and renamed into place together, so a failed run
/// leaves nothing half-written.
struct Staged {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Staged {
    fn new(dir: &Path) -> Self {
        Staged {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Write { path, source }
        };
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let mut tmp = Vec::new();
        for (name, body) in &self.files {
            let t = self.dir.join(format!(".{name}.tmp"));
            fs::write(&t, body).map_err(io(&t))?;
            tmp.push((t, self.dir.join(name)));
        }
        let mut out = Vec::new();
        for (t, dst) in tmp {
            fs::rename(&t, &dst).map_err(io(&dst))?;
            out.push(dst);
        }
        Ok(out)
    }
}

fn coord_header(d: usize) -> String {
    (1..=d).map(|l| format!("x{l}")).collect::<Vec<_>>().join(",")
}

fn node_row(out: &mut String, grid: &Grid, n: usize) {
    for l in 0..grid.dim() {
        let _ = write!(out, "{},", fmt_num(grid.node_coord(n, l)));
    }
}

fn final_density_csv(grid: &Grid, m: &[f64]) -> String {
    let mut s = format!("{},m\n", coord_header(grid.dim()));
    for (n, v) in m.iter().enumerate() {
        node_row(&mut s, grid, n);
        let _ = writeln!(s, "{}", fmt_num(*v));
    }
    s
}

/// Every level in 1D, every fifth (plus the last) otherwise.
fn evolution_csv(sol: &MfgSolution) -> String {
    let grid = &sol.density.grid;
    let time = &sol.density.time;
    let stride = if grid.dim() == 1 { 1 } else { 5 };
    let mut s = format!("t,{},value\n", coord_header(grid.dim()));
    for (k, level) in sol.density.levels.iter().enumerate() {
        if k % stride != 0 && k != time.steps {
            continue;
        }
        let t = time.time(k);
        for (n, v) in level.iter().enumerate() {
            let _ = write!(s, "{},", fmt_num(t));
            node_row(&mut s, grid, n);
            let _ = writeln!(s, "{}", fmt_num(*v));
        }
    }
    s
}

fn value_csv(grid: &Grid, v: &[f64]) -> String {
    let mut s = format!("{},v\n", coord_header(grid.dim()));
    for (n, x) in v.iter().enumerate() {
        node_row(&mut s, grid, n);
        let _ = writeln!(s, "{}", fmt_num(*x));
    }
    s
}

fn residuals_csv(history: &[f64]) -> String {
    let mut s = String::from("iteration,residual\n");
    for (i, r) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, fmt_num(*r));
    }
    s
}

fn mean_of(grid: &Grid, m: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let mass: f64 = m.iter().sum();
    (0..d)
        .map(|l| {
            m.iter()
                .enumerate()
                .map(|(n, v)| v * grid.node_coord(n, l))
                .sum::<f64>()
                / mass
        })
        .collect()
}

/// A solved configuration.
pub struct Solved {
    pub solution: MfgSolution,
    pub steps: usize,
    pub dt: f64,
}

/// Solves the configured problem at `cfg.dx` without writing anything.
pub fn solve(cfg: &RunConfig, observer: impl FnMut(&IterationRecord)) -> Result<Solved, CliError> {
    let dx = cfg.dx.ok_or(ConfigError::Missing("dx"))?;
    let (problem, grid) = build(cfg, dx)?;
    let sc = cfg.solve_config(dx, cfg.mode);
    sc.fixed_point.validate().map_err(CliError::Setup)?;
    let mut setup_ok = false;
    let result = with_solver(&problem, grid, &sc, |s| {
        setup_ok = true;
        let solution = s.picard(&sc.fixed_point, observer)?;
        Ok(Solved {
            solution,
            steps: s.time().steps,
            dt: s.time().dt(),
        })
    });
    match result {
        Ok(r) => Ok(r),
        Err(e) if !setup_ok => Err(CliError::Setup(e)),
        Err(e) => Err(CliError::Solve(e)),
    }
}

/// Solves the configured problem at `cfg.dx` and writes
/// `density_final.csv`, `density_evolution.csv`, `value_initial.csv`,
/// `residuals.csv` and `run_meta.txt` into `cfg.output`.
pub fn run_single(cfg: &RunConfig, observer: impl FnMut(&IterationRecord)) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let Solved {
        solution: sol,
        steps,
        dt,
    } = solve(cfg, observer)?;
    let dx = cfg.dx.expect("checked by solve");
    let wall_s = start.elapsed().as_secs_f64();
    let grid = sol.density.grid.clone();
    let last = sol.density.levels.last().expect("at least one level");
    let final_mean = mean_of(&grid, last);

    let mut meta = cfg.resolved(dx).to_text();
    let _ = writeln!(
        meta,
        "# status = {}",
        if sol.converged { "converged" } else { "not_converged" }
    );
    let _ = writeln!(meta, "# iterations = {}", sol.iterations);
    let _ = writeln!(meta, "# residual = {}", fmt_num(sol.residual));
    let _ = writeln!(meta, "# steps = {steps}");
    let _ = writeln!(meta, "# dt_effective = {}", fmt_num(dt));
    let _ = writeln!(meta, "# cells = {}", grid.len());
    let _ = writeln!(
        meta,
        "# final_mean = {}",
        final_mean.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(meta, "# wall_s = {wall_s}");

    let mut staged = Staged::new(&cfg.output);
    staged.add("density_final.csv", final_density_csv(&grid, last));
    staged.add("density_evolution.csv", evolution_csv(&sol));
    staged.add("value_initial.csv", value_csv(&grid, sol.value.level(0)));
    staged.add("residuals.csv", residuals_csv(&sol.history));
    staged.add("run_meta.txt", meta);
    let files = staged.commit()?;

    Ok(RunSummary {
        converged: sol.converged,
        iterations: sol.iterations,
        residual: sol.residual,
        steps,
        dt,
        cells: grid.len(),
        wall_s,
        final_mean,
        files,
    })
}

/// Errors of one LQ solve against the closed-form solution.
#[derive(Clone, Copy, Debug)]
pub struct LqErrors {
    /// Density at the final time.
    pub density: ErrorNorms,
    /// Value at time 0.
    pub value: ErrorNorms,
    /// Mollified value at time 0.
    pub mollified: ErrorNorms,
}

pub fn lq_errors(problem: &LqProblem, sol: &MfgSolution) -> crate::Result<LqErrors> {
    let grid = &sol.density.grid;
    let horizon = sol.density.time.horizon;
    let a = &problem.analytic;
    let m_exact = (0..grid.len())
        .map(|n| a.exact_density(horizon, &grid.node(n)))
        .collect::<crate::Result<Vec<_>>>()?;
    let v_exact = (0..grid.len())
        .map(|n| a.exact_value(0.0, &grid.node(n)))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(LqErrors {
        density: relative_errors(sol.density.levels.last().expect("levels"), &m_exact, None)?,
        value: relative_errors(sol.value.level(0), &v_exact, None)?,
        mollified: relative_errors(&sol.mollified.values[0], &v_exact, None)?,
    })
}

/// One line of `sweep.csv`.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub dx: f64,
    pub variant: Variant,
    pub steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub errors: LqErrors,
    pub wall_s: f64,
}

/// Solves the LQ benchmark for every `dx` in `dx_list` and every variant,
/// writing `sweep.csv` into `cfg.output`. `progress` sees each row.
pub fn run_table_sweep(cfg: &RunConfig, mut progress: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>, CliError> {
    let params = match &cfg.problem {
        ProblemConfig::Lq1d(p) => p,
        other => {
            return Err(ConfigError::Constraint {
                key: "problem".into(),
                reason: format!("sweep needs the closed-form solution of lq1d, not {}", other.name()),
            }
            .into())
        }
    };
    let problem = lq_problem(params).map_err(CliError::Setup)?;
    // Validate every resolution before spending time on any of them.
    for &dx in &cfg.dx_list {
        check(&RunConfig {
            dx: Some(dx),
            ..cfg.clone()
        })?;
    }
    let mut rows = Vec::new();
    for &dx in &cfg.dx_list {
        for &variant in &cfg.variants {
            let sc = cfg.solve_config(dx, variant);
            let start = Instant::now();
            let solver = MfgSolver::new(&problem, &sc).map_err(CliError::Setup)?;
            let sol = solver.picard(&sc.fixed_point, |_| {}).map_err(CliError::Solve)?;
            let errors = lq_errors(&problem, &sol).map_err(CliError::Solve)?;
            let row = SweepRow {
                dx,
                variant,
                steps: solver.time().steps,
                iterations: sol.iterations,
                converged: sol.converged,
                errors,
                wall_s: start.elapsed().as_secs_f64(),
            };
            progress(&row);
            rows.push(row);
        }
    }
    let mut csv = String::from(
        "dx,variant,steps,iterations,converged,density_sup,density_l2,value_sup,value_l2,mollified_value_sup,mollified_value_l2\n",
    );
    for r in &rows {
        let e = &r.errors;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_num(r.dx),
            r.variant.tag(),
            r.steps,
            r.iterations,
            r.converged,
            fmt_num(e.density.sup),
            fmt_num(e.density.l2),
            fmt_num(e.value.sup),
            fmt_num(e.value.l2),
            fmt_num(e.mollified.sup),
            fmt_num(e.mollified.l2)
        );
    }
    let mut staged = Staged::new(&cfg.output);
    staged.add("sweep.csv", csv);
    staged.commit()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::super::config::parse_str;
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(ConfigError::Missing("dx")).exit_code(), 2);
        assert_eq!(CliError::Setup(Error::ZeroMass).exit_code(), 2);
        assert_eq!(CliError::Solve(Error::ZeroMass).exit_code(), 3);
    }

    #[test]
    fn check_reports_shape() {
        let c = parse_str("problem = lq1d\ndx = 0.048\n").unwrap();
        // 83 lattice points in [-2, 2]; N = round(0.25 / 0.066) = 4.
        assert_eq!(check(&c).unwrap(), (83, 4));
    }

    #[test]
    fn degenerate_mollifier_is_a_setup_error() {
        let c = parse_str("problem = lq1d\ndx = 0.1\neps = 0.01\n").unwrap();
        let err = check(&c).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn sweep_rejects_congestion() {
        let c = parse_str("problem = congestion2d\ndx = 0.1\n").unwrap();
        assert!(matches!(run_table_sweep(&c, |_| {}), Err(CliError::Config(_))));
    }

    #[test]
    fn csv_layout() {
        let g = Grid::new(&[0.0, 0.0], &[0.5, 0.5], 0.5).unwrap();
        let s = final_density_csv(&g, &[1.0, 2.0, 3.0, 4.0]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x1,x2,m");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "0,0.5,2");
        assert_eq!(residuals_csv(&[0.5, 0.25]), "iteration,residual\n1,0.5\n2,0.25\n");
    }
}
