//! Backward semi-Lagrangian solver for the HJB equation.
//!
//! One step computes, at every node `x_i`,
//!
//! ```text
//! v_{k,i} = min_{|a| <= C_b} [ dt L(x_i, a) + I1[v_{k+1}](x_i - dt a) ] + dt F(x_i, m_k)
//! ```
//!
//! with the minimum taken over a Cartesian control grid and optionally
//! polished by a local line search around the best sample. Characteristic
//! feet leaving the box are projected back onto it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, TimeGrid, MAX_DIM};
use crate::problem::{DensitySnapshot, Problem};

const GOLDEN_ITERS: usize = 48;

/// Samples of the closed control ball, `(2n + 1)^d` Cartesian points on
/// `[-C_b, C_b]^d` that fall inside the ball, in lexicographic order.
#[derive(Clone, Debug)]
pub struct ControlGrid {
    dim: usize,
    radius: f64,
    spacing: f64,
    points: Vec<f64>,
}

impl ControlGrid {
    pub fn new(dim: usize, radius: f64, samples_per_side: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param("control_radius", "must be positive"));
        }
        if samples_per_side == 0 {
            return Err(Error::param("control_samples", "must be at least 1"));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::param("dim", format!("must be in 1..={MAX_DIM}")));
        }
        let n = samples_per_side as i64;
        let spacing = radius / samples_per_side as f64;
        let side = 2 * n + 1;
        let total = (side as usize).pow(dim as u32);
        let mut points = Vec::new();
        let mut a = [0.0; MAX_DIM];
        for flat in 0..total {
            let mut rem = flat;
            let mut r2 = 0.0;
            for l in (0..dim).rev() {
                let c = (rem % side as usize) as i64 - n;
                rem /= side as usize;
                a[l] = c as f64 * spacing;
                r2 += a[l] * a[l];
            }
            if r2 <= radius * radius * (1.0 + 1e-12) {
                points.extend_from_slice(&a[..dim]);
            }
        }
        Ok(ControlGrid {
            dim,
            radius,
            spacing,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }
}

/// How the infimum over controls is realized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlSettings {
    /// `n_a`: the grid has `2 n_a + 1` samples per axis.
    pub samples_per_side: usize,
    /// Local golden-section (1D) / coordinate-descent (d >= 2) polish.
    pub refine: bool,
}

impl ControlSettings {
    /// 20 samples per side in 1D, 12 otherwise, with refinement.
    pub fn default_for_dim(dim: usize) -> Self {
        ControlSettings {
            samples_per_side: if dim == 1 { 20 } else { 12 },
            refine: true,
        }
    }
}

/// Node values `v_{k,i}` for all time levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub grid: Grid,
    pub time: TimeGrid,
    pub levels: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    /// Piecewise-constant-in-time extension: level `k` on `[t_k, t_{k+1})`.
    pub fn at_time(&self, t: f64) -> Result<&[f64]> {
        if !(0.0..=self.time.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.time.horizon,
            });
        }
        let k = ((t / self.time.dt()).floor() as usize).min(self.time.steps);
        Ok(&self.levels[k])
    }
}

/// Result of one backward step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub values: Vec<f64>,
    /// Nodes whose optimal control sits on the boundary of the control ball.
    pub saturated: usize,
}

/// Backward sweep diagnostics.
#[derive(Clone, Debug, Default)]
pub struct SweepStats {
    pub saturated: usize,
}

/// Semi-Lagrangian stepper bound to one grid, problem and time step.
pub struct SlSolver<'a, P: Problem + ?Sized> {
    grid: &'a Grid,
    problem: &'a P,
    controls: ControlGrid,
    refine: bool,
    dt: f64,
}

impl<'a, P: Problem + ?Sized> SlSolver<'a, P> {
    pub fn new(grid: &'a Grid, problem: &'a P, settings: ControlSettings, dt: f64) -> Result<Self> {
        if grid.dim() != problem.dim() {
            return Err(Error::Dimension {
                expected: problem.dim(),
                found: grid.dim(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let controls = ControlGrid::new(grid.dim(), problem.control_radius(), settings.samples_per_side)?;
        Ok(SlSolver {
            grid,
            problem,
            controls,
            refine: settings.refine,
            dt,
        })
    }

    pub fn controls(&self) -> &ControlGrid {
        &self.controls
    }

    /// One step with precomputed running-coupling node values `coupling`.
    pub fn step_with_coupling(&self, v_next: &[f64], t_k: f64, coupling: &[f64]) -> Result<StepOutput> {
        self.grid.check_field(v_next)?;
        self.grid.check_field(coupling)?;
        let g = self.grid;
        let d = g.dim();
        let results: Vec<(f64, bool)> = (0..g.len())
            .into_par_iter()
            .map(|n| {
                let mut x = [0.0; MAX_DIM];
                g.node_into(n, &mut x);
                let f = coupling[n];
                if !f.is_finite() {
                    return Err(Error::NonFinite {
                        what: "running coupling",
                        node: x[..d].to_vec(),
                        control: vec![],
                    });
                }
                let (best, a) = self.minimize(&x[..d], v_next)?;
                let norm: f64 = a[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                let saturated = norm >= self.controls.radius * (1.0 - 1e-9);
                Ok((best + self.dt * f, saturated))
            })
            .collect::<Result<_>>()?;

        let mut values: Vec<f64> = results.iter().map(|r| r.0).collect();
        let saturated = results.iter().filter(|r| r.1).count();
        self.apply_dirichlet(&mut values, t_k);
        Ok(StepOutput { values, saturated })
    }

    /// One backward step `v_{k+1} -> v_k` against the density at `t_k`.
    pub fn step(&self, v_next: &[f64], t_k: f64, density: &DensitySnapshot<'_>) -> Result<StepOutput> {
        let coupling = self.problem.running_coupling_nodes(density);
        self.step_with_coupling(v_next, t_k, &coupling)
    }

    /// Terminal condition then `N` backward steps. `density_path` holds one
    /// coefficient vector per time level.
    pub fn solve_backward(&self, density_path: &[Vec<f64>], time: &TimeGrid) -> Result<(ValueField, SweepStats)> {
        if density_path.len() != time.levels() {
            return Err(Error::ShapeMismatch(format!(
                "density path has {} levels, time grid has {}",
                density_path.len(),
                time.levels()
            )));
        }
        if (time.dt() - self.dt).abs() > 1e-14 * self.dt {
            return Err(Error::param("dt", "solver step differs from the time grid"));
        }
        let n = time.steps;
        let terminal = DensitySnapshot::new(self.grid, &density_path[n])?;
        let mut last = self.problem.terminal_coupling_nodes(&terminal);
        if let Some(bad) = last.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "terminal coupling",
                node: self.grid.node(bad),
                control: vec![],
            });
        }
        self.apply_dirichlet(&mut last, time.horizon);

        let mut levels = vec![Vec::new(); n + 1];
        levels[n] = last;
        let mut stats = SweepStats::default();
        for k in (0..n).rev() {
            let snap = DensitySnapshot::new(self.grid, &density_path[k])?;
            let out = self.step(&levels[k + 1], time.time(k), &snap)?;
            stats.saturated += out.saturated;
            levels[k] = out.values;
        }
        if stats.saturated > 0 {
            log::warn!(
                "{} node-steps chose a control on the boundary of the control ball (radius {}); \
                 the radius may be too small",
                stats.saturated,
                self.controls.radius
            );
        }
        Ok((
            ValueField {
                grid: self.grid.clone(),
                time: *time,
                levels,
            },
            stats,
        ))
    }

    fn apply_dirichlet(&self, values: &mut [f64], t: f64) {
        let g = self.grid;
        let mut x = [0.0; MAX_DIM];
        for (n, v) in values.iter_mut().enumerate() {
            if g.is_boundary_node(n) {
                g.node_into(n, &mut x);
                if let Some(b) = self.problem.dirichlet_value(t, &x[..g.dim()]) {
                    *v = b;
                }
            }
        }
    }

    #[inline]
    fn objective(&self, x: &[f64], a: &[f64], v_next: &[f64]) -> Result<f64> {
        let d = x.len();
        let running = self.problem.lagrangian(x, a);
        if !running.is_finite() {
            return Err(Error::NonFinite {
                what: "lagrangian",
                node: x.to_vec(),
                control: a.to_vec(),
            });
        }
        let mut foot = [0.0; MAX_DIM];
        for l in 0..d {
            foot[l] = x[l] - self.dt * a[l];
        }
        self.grid.clamp_point(&mut foot[..d]);
        Ok(self.dt * running + self.grid.interpolate_clamped(v_next, &foot[..d]))
    }

    /// Minimum of the SL objective at node `x` and its minimizer.
    fn minimize(&self, x: &[f64], v_next: &[f64]) -> Result<(f64, [f64; MAX_DIM])> {
        let d = x.len();
        let mut best = f64::INFINITY;
        let mut best_a = [0.0; MAX_DIM];
        for a in self.controls.iter() {
            let val = self.objective(x, a, v_next)?;
            // strict comparison: ties keep the first sample in scan order
            if val < best {
                best = val;
                best_a[..d].copy_from_slice(a);
            }
        }
        if !self.refine {
            return Ok((best, best_a));
        }

        let h = self.controls.spacing;
        let r = self.controls.radius;
        let sweeps = if d == 1 { 1 } else { 2 };
        let mut cand = best_a;
        for _ in 0..sweeps {
            for l in 0..d {
                let others: f64 = (0..d).filter(|&m| m != l).map(|m| cand[m] * cand[m]).sum();
                let reach = (r * r - others).max(0.0).sqrt();
                let lo = (cand[l] - h).max(-reach);
                let hi = (cand[l] + h).min(reach);
                if hi <= lo {
                    continue;
                }
                let mut probe = cand;
                let mut eval = |s: f64| -> Result<f64> {
                    probe[l] = s;
                    self.objective(x, &probe[..d], v_next)
                };
                let (s, val) = golden_section(lo, hi, &mut eval)?;
                if val < best {
                    best = val;
                    cand[l] = s;
                    best_a = cand;
                } else {
                    cand = best_a;
                }
            }
        }
        Ok((best, best_a))
    }
}

/// Golden-section search on `[lo, hi]`; returns the best point visited.
fn golden_section(lo: f64, hi: f64, f: &mut impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fe = f(e)?;
    for _ in 0..GOLDEN_ITERS {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e)?;
        }
    }
    Ok(if fc <= fe { (c, fc) } else { (e, fe) })
}

/// Largest difference quotient between axis-adjacent nodes.
pub fn lipschitz_estimate(grid: &Grid, v: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for n in 0..grid.len() {
        let idx = grid.unravel(n);
        for l in 0..grid.dim() {
            if (idx.as_slice()[l] as usize) + 1 < grid.counts()[l] {
                let m = n + grid.stride(l);
                best = best.max((v[m] - v[n]).abs() / grid.dx());
            }
        }
    }
    best
}
