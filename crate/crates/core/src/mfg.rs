//! The discrete MFG fixed point: density path -> HJB solve -> mollified
//! feedback -> LG transport -> new density path, iterated with damping.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{Grid, TimeGrid};
use crate::hjb::{ControlSettings, SlSolver, ValueField};
use crate::mollify::{MollifiedValue, MollifierKernel};
use crate::problem::Problem;
use crate::transport::{cell_average_initial, lg_step, DensityField, DiscreteFlow, IntegralMode};

/// Damped Picard iteration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointConfig {
    /// `theta` in `(0, 1]`; 1 is the undamped iteration.
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            damping: 1.0,
            tolerance: 1e-3,
            max_iterations: 200,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param(
                "theta",
                format!("must lie in (0, 1], got {}", self.damping),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Everything needed to discretize one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub dx: f64,
    /// Requested time step; the solver uses the nearest divisor of `T`.
    pub dt: f64,
    pub eps: f64,
    pub controls: ControlSettings,
    pub mode: IntegralMode,
    pub fixed_point: FixedPointConfig,
}

impl SolveConfig {
    /// `dt = dx^{2/3} / 2`, `eps = sqrt(dt)`: the 1D benchmark schedule.
    pub fn lq_schedule(dx: f64, mode: IntegralMode) -> Self {
        let dt = dx.powf(2.0 / 3.0) / 2.0;
        SolveConfig {
            dx,
            dt,
            eps: dt.sqrt(),
            controls: ControlSettings::default_for_dim(1),
            mode,
            fixed_point: FixedPointConfig::default(),
        }
    }

    /// `dt = dx^{2/3}`, `eps = sqrt(dt) / 2`, damping 0.5: the 2D schedule.
    pub fn congestion_schedule(dx: f64) -> Self {
        let dt = dx.powf(2.0 / 3.0);
        SolveConfig {
            dx,
            dt,
            eps: dt.sqrt() / 2.0,
            controls: ControlSettings::default_for_dim(2),
            mode: IntegralMode::AreaWeighted,
            fixed_point: FixedPointConfig {
                damping: 0.5,
                ..Default::default()
            },
        }
    }
}

/// Warning text when `(dx, dt, eps)` leaves the regime
/// `dx <= 4 dt`, `dt <= 4 eps^2` in which the scheme is known to converge.
pub fn regime_warning(dx: f64, dt: f64, eps: f64) -> Option<String> {
    let mut issues = Vec::new();
    if dx > 4.0 * dt {
        issues.push(format!("dx = {dx:.3e} exceeds 4 dt = {:.3e}", 4.0 * dt));
    }
    if dt > 4.0 * eps * eps {
        issues.push(format!("dt = {dt:.3e} exceeds 4 eps^2 = {:.3e}", 4.0 * eps * eps));
    }
    if issues.is_empty() {
        None
    } else {
        Some(format!(
            "discretization outside the convergent regime: {}",
            issues.join("; ")
        ))
    }
}

/// `max_{k,i} |a_{k,i} - b_{k,i}|`.
pub fn residual(a: &DensityField, b: &DensityField) -> Result<f64> {
    if a.levels.len() != b.levels.len() || a.levels.iter().zip(&b.levels).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::ShapeMismatch("density fields differ in shape".into()));
    }
    Ok(a.levels
        .iter()
        .zip(&b.levels)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max))
}

/// One evaluation of the fixed-point map.
#[derive(Clone, Debug)]
pub struct MapOutput {
    pub density: DensityField,
    pub value: ValueField,
    pub mollified: MollifiedValue,
    /// Largest `|D_pH|` over the transported points.
    pub max_speed: f64,
    /// Node-steps whose optimal control hit the control-ball boundary.
    pub saturated: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub elapsed: Duration,
}

/// Result of the Picard loop.
#[derive(Clone, Debug)]
pub struct MfgSolution {
    pub density: DensityField,
    /// Value and feedback from the last map evaluation.
    pub value: ValueField,
    pub mollified: MollifiedValue,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    pub max_speed: f64,
}

/// Discretized problem ready to iterate.
pub struct MfgSolver<'a, P: Problem + ?Sized> {
    problem: &'a P,
    grid: Grid,
    time: TimeGrid,
    kernel: MollifierKernel,
    controls: ControlSettings,
    mode: IntegralMode,
    initial: Vec<f64>,
}

impl<'a, P: Problem + ?Sized> MfgSolver<'a, P> {
    /// Discretizes `problem` on the lattice points of its domain.
    pub fn new(problem: &'a P, config: &SolveConfig) -> Result<Self> {
        let (lower, upper) = problem.domain();
        let grid = Grid::lattice_in_box(&lower, &upper, config.dx)?;
        Self::on_grid(problem, grid, config)
    }

    pub fn on_grid(problem: &'a P, grid: Grid, config: &SolveConfig) -> Result<Self> {
        if grid.dim() != problem.dim() {
            return Err(Error::Dimension {
                expected: problem.dim(),
                found: grid.dim(),
            });
        }
        if let IntegralMode::Quadrature { subdivisions: 0, .. } = config.mode {
            return Err(Error::param("subdivisions", "must be at least 1"));
        }
        let time = TimeGrid::with_step_near(problem.horizon(), config.dt)?;
        if let Some(msg) = regime_warning(grid.dx(), time.dt(), config.eps) {
            log::warn!("{msg}");
        }
        let kernel = MollifierKernel::new(config.eps, &grid)?;
        let initial = cell_average_initial(&grid, |x| problem.initial_density(x), 1)?;
        Ok(MfgSolver {
            problem,
            grid,
            time,
            kernel,
            controls: config.controls,
            mode: config.mode,
            initial,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn mode(&self) -> IntegralMode {
        self.mode
    }

    /// Cell-averaged initial density.
    pub fn initial_density(&self) -> &[f64] {
        &self.initial
    }

    /// The initial density repeated over all time levels.
    pub fn initial_guess(&self) -> DensityField {
        DensityField {
            grid: self.grid.clone(),
            time: self.time,
            levels: vec![self.initial.clone(); self.time.levels()],
        }
    }

    fn check_path(&self, mu: &DensityField) -> Result<()> {
        if mu.levels.len() != self.time.levels() {
            return Err(Error::ShapeMismatch(format!(
                "density path has {} levels, expected {}",
                mu.levels.len(),
                self.time.levels()
            )));
        }
        mu.levels.iter().try_for_each(|l| self.grid.check_field(l))
    }

    /// Value function and its mollification for the density path `mu`.
    pub fn value_for(&self, mu: &DensityField) -> Result<(ValueField, MollifiedValue, usize)> {
        self.check_path(mu)?;
        let sl = SlSolver::new(&self.grid, self.problem, self.controls, self.time.dt())?;
        let (value, stats) = sl.solve_backward(&mu.levels, &self.time)?;
        let mollified = MollifiedValue::new(&value, &self.kernel)?;
        Ok((value, mollified, stats.saturated))
    }

    /// Transports the initial density along the feedback of `mollified`.
    pub fn transport(&self, mollified: &MollifiedValue) -> Result<(DensityField, f64)> {
        let dt = self.time.dt();
        let mut levels = Vec::with_capacity(self.time.levels());
        levels.push(self.initial.clone());
        let mut max_disp: f64 = 0.0;
        for k in 0..self.time.steps {
            let flow = DiscreteFlow {
                mollified,
                problem: self.problem,
                k,
                dt,
            };
            let step = lg_step(&self.grid, &levels[k], &flow, self.mode)?;
            max_disp = max_disp.max(step.max_displacement);
            levels.push(step.coeffs);
        }
        Ok((
            DensityField {
                grid: self.grid.clone(),
                time: self.time,
                levels,
            },
            max_disp / dt,
        ))
    }

    /// The fixed-point map `mu -> m[mu]`.
    pub fn map(&self, mu: &DensityField) -> Result<MapOutput> {
        let (value, mollified, saturated) = self.value_for(mu)?;
        let (density, max_speed) = self.transport(&mollified)?;
        Ok(MapOutput {
            density,
            value,
            mollified,
            max_speed,
            saturated,
        })
    }

    /// Damped Picard iteration from the time-constant initial density.
    ///
    /// `observer` sees every iteration. Running out of iterations is not an
    /// error; the result is flagged `converged = false`.
    pub fn picard(&self, config: &FixedPointConfig, mut observer: impl FnMut(&IterationRecord)) -> Result<MfgSolution> {
        config.validate()?;
        let start = Instant::now();
        let theta = config.damping;
        let mut mu = self.initial_guess();
        let mut history = Vec::new();
        let mut last = None;
        let mut converged = false;
        for iteration in 1..=config.max_iterations {
            let out = self.map(&mu)?;
            let next = DensityField {
                grid: self.grid.clone(),
                time: self.time,
                levels: mu
                    .levels
                    .iter()
                    .zip(&out.density.levels)
                    .map(|(old, new)| {
                        old.iter()
                            .zip(new)
                            .map(|(o, n)| (1.0 - theta) * o + theta * n)
                            .collect()
                    })
                    .collect(),
            };
            let res = residual(&next, &mu)?;
            history.push(res);
            observer(&IterationRecord {
                iteration,
                residual: res,
                elapsed: start.elapsed(),
            });
            mu = next;
            last = Some(out);
            if res < config.tolerance {
                converged = true;
                break;
            }
        }
        let out = last.expect("at least one iteration");
        if !converged {
            log::warn!(
                "fixed point not reached after {} iterations (residual {:.3e})",
                config.max_iterations,
                history.last().copied().unwrap_or(f64::NAN)
            );
        }
        Ok(MfgSolution {
            density: mu,
            value: out.value,
            mollified: out.mollified,
            residual: *history.last().expect("nonempty"),
            iterations: history.len(),
            converged,
            history,
            max_speed: out.max_speed,
        })
    }
}
