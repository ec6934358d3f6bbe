//! Problem data: Lagrangian, Hamiltonian gradient, couplings and initial
//! density, together with the two built-in instances (the linear-quadratic
//! benchmark with a closed-form solution, and the 2D congestion model).

use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_DIM};

/// One time slice of a piecewise-constant density: cell coefficients `m_i`
/// with `sum_i m_i dx^d = 1`.
#[derive(Clone, Copy, Debug)]
pub struct DensitySnapshot<'a> {
    pub grid: &'a Grid,
    pub coeffs: &'a [f64],
}

impl<'a> DensitySnapshot<'a> {
    pub fn new(grid: &'a Grid, coeffs: &'a [f64]) -> Result<Self> {
        grid.check_field(coeffs)?;
        Ok(DensitySnapshot { grid, coeffs })
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// First moment `sum_i x_i m_i dx^d`.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let vol = self.grid.cell_volume();
        let mut mean = vec![0.0; d];
        for (n, &m) in self.coeffs.iter().enumerate() {
            if m != 0.0 {
                for (l, acc) in mean.iter_mut().enumerate() {
                    *acc += self.grid.node_coord(n, l) * m * vol;
                }
            }
        }
        mean
    }
}

/// A first-order mean field game.
///
/// Couplings receive density snapshots on the solver grid. The `_nodes`
/// variants evaluate a coupling on every node at once and may be
/// overridden when the coupling has exploitable structure.
pub trait Problem: Sync {
    fn dim(&self) -> usize;

    fn horizon(&self) -> f64;

    /// Radius of the closed control ball.
    fn control_radius(&self) -> f64;

    /// Computational box `(lower, upper)`.
    fn domain(&self) -> (Vec<f64>, Vec<f64>);

    fn lagrangian(&self, x: &[f64], a: &[f64]) -> f64;

    /// `D_p H(x, p)` written into `out`.
    fn hamiltonian_gradient(&self, x: &[f64], p: &[f64], out: &mut [f64]);

    fn running_coupling(&self, x: &[f64], m: &DensitySnapshot<'_>) -> f64;

    fn terminal_coupling(&self, x: &[f64], m: &DensitySnapshot<'_>) -> f64;

    /// Initial density `m_0^*` (not necessarily normalized).
    fn initial_density(&self, x: &[f64]) -> f64;

    /// Exact value imposed on boundary nodes after each HJB step, if any.
    fn dirichlet_value(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    fn running_coupling_nodes(&self, m: &DensitySnapshot<'_>) -> Vec<f64> {
        let g = m.grid;
        let mut x = [0.0; MAX_DIM];
        (0..g.len())
            .map(|n| {
                g.node_into(n, &mut x);
                self.running_coupling(&x[..g.dim()], m)
            })
            .collect()
    }

    fn terminal_coupling_nodes(&self, m: &DensitySnapshot<'_>) -> Vec<f64> {
        let g = m.grid;
        let mut x = [0.0; MAX_DIM];
        (0..g.len())
            .map(|n| {
                g.node_into(n, &mut x);
                self.terminal_coupling(&x[..g.dim()], m)
            })
            .collect()
    }
}

type PointFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type CouplingFn = Box<dyn Fn(&[f64], &DensitySnapshot<'_>) -> f64 + Send + Sync>;

/// Problem assembled from user closures.
///
/// Starts from the quadratic Hamiltonian `H(x, p) = |p|^2 / 2` with zero
/// couplings and a uniform initial density; each piece can be replaced.
pub struct ProblemSpec {
    pub horizon: f64,
    pub control_radius: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    lagrangian: Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    hamiltonian_gradient: Box<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>,
    running: CouplingFn,
    terminal: CouplingFn,
    initial: PointFn,
}

impl ProblemSpec {
    pub fn quadratic(lower: &[f64], upper: &[f64], horizon: f64, control_radius: f64) -> Self {
        ProblemSpec {
            horizon,
            control_radius,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            lagrangian: Box::new(|_, a| 0.5 * norm_sq(a)),
            hamiltonian_gradient: Box::new(|_, p, out| out.copy_from_slice(p)),
            running: Box::new(|_, _| 0.0),
            terminal: Box::new(|_, _| 0.0),
            initial: Box::new(|_| 1.0),
        }
    }

    pub fn with_lagrangian(
        mut self,
        lagrangian: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        hamiltonian_gradient: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.lagrangian = Box::new(lagrangian);
        self.hamiltonian_gradient = Box::new(hamiltonian_gradient);
        self
    }

    pub fn with_running(mut self, f: impl Fn(&[f64], &DensitySnapshot<'_>) -> f64 + Send + Sync + 'static) -> Self {
        self.running = Box::new(f);
        self
    }

    pub fn with_terminal(mut self, g: impl Fn(&[f64], &DensitySnapshot<'_>) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal = Box::new(g);
        self
    }

    pub fn with_initial_density(mut self, m0: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.initial = Box::new(m0);
        self
    }
}

impl Problem for ProblemSpec {
    fn dim(&self) -> usize {
        self.lower.len()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn control_radius(&self) -> f64 {
        self.control_radius
    }
    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
    fn lagrangian(&self, x: &[f64], a: &[f64]) -> f64 {
        (self.lagrangian)(x, a)
    }
    fn hamiltonian_gradient(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        (self.hamiltonian_gradient)(x, p, out)
    }
    fn running_coupling(&self, x: &[f64], m: &DensitySnapshot<'_>) -> f64 {
        (self.running)(x, m)
    }
    fn terminal_coupling(&self, x: &[f64], m: &DensitySnapshot<'_>) -> f64 {
        (self.terminal)(x, m)
    }
    fn initial_density(&self, x: &[f64]) -> f64 {
        (self.initial)(x)
    }
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Closed-form solution of the linear-quadratic benchmark
/// (`H = |p|^2/2`, `F(x, m) = |x - mean(m)|^2 / 2`, `G = 0`, Gaussian `m_0`).
#[derive(Clone, Debug, PartialEq)]
pub struct LqAnalytic {
    pub horizon: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the initial covariance.
    pub variance0: Vec<f64>,
}

impl LqAnalytic {
    pub fn new(horizon: f64, mean: Vec<f64>, variance0: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if mean.len() != variance0.len() || mean.is_empty() {
            return Err(Error::param("variance0", "dimension must match the mean"));
        }
        if variance0.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::param("variance0", "entries must be positive"));
        }
        Ok(LqAnalytic {
            horizon,
            mean,
            variance0,
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Scalar factor of `Pi(t) = pi(t) I`, the Riccati solution.
    pub fn pi(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        // (e^{2T-t} - e^t) / (e^{2T-t} + e^t) == tanh(T - t)
        Ok((self.horizon - t).tanh())
    }

    pub fn exact_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let pi = self.pi(t)?;
        let mut v = 0.0;
        for (xl, ml) in x.iter().zip(&self.mean) {
            // 1/2 pi x^2 - pi mu x + 1/2 pi mu^2
            v += 0.5 * pi * (xl - ml) * (xl - ml);
        }
        Ok(v)
    }

    /// Means and variances of the exact density at time `t`.
    pub fn density_params(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_time(t)?;
        let factor = ((self.horizon - t).cosh() / self.horizon.cosh()).powi(2);
        let vars = self.variance0.iter().map(|s| factor * s).collect();
        Ok((self.mean.clone(), vars))
    }

    pub fn exact_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        let (means, vars) = self.density_params(t)?;
        Ok(gaussian_pdf(x, &means, &vars))
    }
}

pub(crate) fn gaussian_pdf(x: &[f64], means: &[f64], vars: &[f64]) -> f64 {
    x.iter()
        .zip(means)
        .zip(vars)
        .map(|((xl, m), s)| (-(xl - m) * (xl - m) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt())
        .product()
}

/// `F(x, m) = |x - mean(m)|^2 / 2`.
pub fn lq_coupling(x: &[f64], m: &DensitySnapshot<'_>) -> f64 {
    let mean = m.mean();
    0.5 * x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Linear-quadratic benchmark with known solution.
#[derive(Clone, Debug)]
pub struct LqProblem {
    pub analytic: LqAnalytic,
    pub control_radius: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Impose the exact value on boundary nodes of the HJB solve.
    pub dirichlet: bool,
}

impl LqProblem {
    /// The 1D instance: `T = 0.25`, `mu* = 0.1`, `Sigma_0 = 0.105` on `[-2, 2]`.
    pub fn benchmark() -> Self {
        LqProblem {
            analytic: LqAnalytic::new(0.25, vec![0.1], vec![0.105]).expect("valid constants"),
            control_radius: 5.0,
            lower: vec![-2.0],
            upper: vec![2.0],
            dirichlet: true,
        }
    }
}

impl Problem for LqProblem {
    fn dim(&self) -> usize {
        self.analytic.mean.len()
    }
    fn horizon(&self) -> f64 {
        self.analytic.horizon
    }
    fn control_radius(&self) -> f64 {
        self.control_radius
    }
    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
    fn lagrangian(&self, _x: &[f64], a: &[f64]) -> f64 {
        0.5 * norm_sq(a)
    }
    fn hamiltonian_gradient(&self, _x: &[f64], p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(p);
    }
    fn running_coupling(&self, x: &[f64], m: &DensitySnapshot<'_>) -> f64 {
        lq_coupling(x, m)
    }
    fn terminal_coupling(&self, _x: &[f64], _m: &DensitySnapshot<'_>) -> f64 {
        0.0
    }
    fn initial_density(&self, x: &[f64]) -> f64 {
        gaussian_pdf(x, &self.analytic.mean, &self.analytic.variance0)
    }
    fn dirichlet_value(&self, t: f64, x: &[f64]) -> Option<f64> {
        if self.dirichlet {
            self.analytic.exact_value(t.clamp(0.0, self.horizon()), x).ok()
        } else {
            None
        }
    }
    fn running_coupling_nodes(&self, m: &DensitySnapshot<'_>) -> Vec<f64> {
        let mean = m.mean();
        let d = m.grid.dim();
        (0..m.grid.len())
            .map(|n| {
                0.5 * (0..d)
                    .map(|l| {
                        let r = m.grid.node_coord(n, l) - mean[l];
                        r * r
                    })
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Parameters of the 2D congestion model
/// `F(x, m) = gamma min(|x - target|^2, R) + (r_sigma * m)(x)`, `G = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CongestionParams {
    pub gamma: f64,
    pub target: Vec<f64>,
    pub cap: f64,
    pub sigma: f64,
    /// Side of the square `[0, ell]^2` holding the initial density.
    pub ell: f64,
    pub start: Vec<f64>,
    pub start_sigma: f64,
    pub horizon: f64,
    pub control_radius: f64,
}

impl Default for CongestionParams {
    fn default() -> Self {
        CongestionParams {
            gamma: 0.5,
            target: vec![1.75, 1.75],
            cap: 5.0,
            sigma: 0.25,
            ell: 2.0,
            start: vec![0.75, 0.75],
            start_sigma: 0.07,
            horizon: 1.0,
            control_radius: 5.0,
        }
    }
}

impl CongestionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if !(self.cap > 0.0) {
            return Err(Error::param("cap", "must be positive"));
        }
        if !(self.ell > 0.0) {
            return Err(Error::param("ell", "must be positive"));
        }
        if !(self.start_sigma > 0.0) {
            return Err(Error::param("start_sigma", "must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if !(self.control_radius > 0.0) {
            return Err(Error::param("control_radius", "must be positive"));
        }
        if self.target.len() != 2 || self.start.len() != 2 {
            return Err(Error::param("target", "target and start must be 2D points"));
        }
        if self.start.iter().any(|&s| !(s > 0.0 && s < self.ell)) {
            return Err(Error::param("start", "must lie inside (0, ell)^2"));
        }
        Ok(())
    }
}

/// Truncated quadratic attraction plus Gaussian-kernel congestion.
pub fn congestion_coupling(x: &[f64], m: &DensitySnapshot<'_>, p: &CongestionParams) -> f64 {
    let attraction = p.gamma
        * x.iter()
            .zip(&p.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .min(p.cap);
    attraction + gaussian_convolution(x, m, p.sigma)
}

/// `sum_j r_sigma(x - x_j) m_j dx^d` over `|x - x_j|_inf <= 4 sigma`, with
/// `r_sigma(z) = exp(-|z|^2 / 2 sigma^2) / (2 pi sigma^2)`.
pub fn gaussian_convolution(x: &[f64], m: &DensitySnapshot<'_>, sigma: f64) -> f64 {
    let g = m.grid;
    let d = g.dim();
    let reach = 4.0 * sigma;
    let mut lo = [0usize; MAX_DIM];
    let mut hi = [0usize; MAX_DIM];
    for l in 0..d {
        let a = ((x[l] - reach - g.lower()[l]) / g.dx()).ceil().max(0.0);
        let b = ((x[l] + reach - g.lower()[l]) / g.dx()).floor();
        let b = b.min((g.counts()[l] - 1) as f64);
        if b < a {
            return 0.0;
        }
        lo[l] = a as usize;
        hi[l] = b as usize;
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).powf(d as f64 / 2.0);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let vol = g.cell_volume();
    let mut idx = lo;
    let mut total = 0.0;
    loop {
        let mut flat = 0;
        let mut r2 = 0.0;
        for l in 0..d {
            flat += idx[l] * g.stride(l);
            let dz = x[l] - (g.lower()[l] + idx[l] as f64 * g.dx());
            r2 += dz * dz;
        }
        let mj = m.coeffs[flat];
        if mj != 0.0 {
            total += norm * (-r2 * inv2s2).exp() * mj * vol;
        }
        // odometer increment, last axis fastest
        let mut l = d;
        loop {
            if l == 0 {
                return total;
            }
            l -= 1;
            if idx[l] < hi[l] {
                idx[l] += 1;
                break;
            }
            idx[l] = lo[l];
        }
    }
}

/// Unnormalized initial profile `exp(-|x - x0|^2 / 2 s0^2)` on `[0, ell]^2`.
fn congestion_profile(x: &[f64], p: &CongestionParams) -> f64 {
    if x.iter().any(|&v| !(0.0..=p.ell).contains(&v)) {
        return 0.0;
    }
    let r2: f64 = x.iter().zip(&p.start).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (2.0 * p.start_sigma * p.start_sigma)).exp()
}

/// 2D congestion model on `[0, ell]^2`.
#[derive(Clone, Debug)]
pub struct CongestionProblem {
    pub params: CongestionParams,
    normalizer: f64,
}

impl CongestionProblem {
    /// Builds the problem, normalizing the initial density by midpoint
    /// quadrature on `grid` so that its cell average has unit mass.
    pub fn new(params: CongestionParams, grid: &Grid) -> Result<Self> {
        params.validate()?;
        if grid.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                found: grid.dim(),
            });
        }
        let normalizer = grid.sample(|x| congestion_profile(x, &params)).iter().sum::<f64>() * grid.cell_volume();
        if !(normalizer > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(CongestionProblem { params, normalizer })
    }

    /// The computational box `[0, ell]^2`.
    pub fn box_for(params: &CongestionParams) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0, 0.0], vec![params.ell, params.ell])
    }
}

impl Problem for CongestionProblem {
    fn dim(&self) -> usize {
        2
    }
    fn horizon(&self) -> f64 {
        self.params.horizon
    }
    fn control_radius(&self) -> f64 {
        self.params.control_radius
    }
    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        Self::box_for(&self.params)
    }
    fn lagrangian(&self, _x: &[f64], a: &[f64]) -> f64 {
        0.5 * norm_sq(a)
    }
    fn hamiltonian_gradient(&self, _x: &[f64], p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(p);
    }
    fn running_coupling(&self, x: &[f64], m: &DensitySnapshot<'_>) -> f64 {
        congestion_coupling(x, m, &self.params)
    }
    fn terminal_coupling(&self, _x: &[f64], _m: &DensitySnapshot<'_>) -> f64 {
        0.0
    }
    fn initial_density(&self, x: &[f64]) -> f64 {
        congestion_profile(x, &self.params) / self.normalizer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn literal_pi(horizon: f64, t: f64) -> f64 {
        let (a, b) = ((2.0 * horizon - t).exp(), t.exp());
        (a - b) / (a + b)
    }

    #[test]
    fn pi_closed_form() {
        let lq = LqAnalytic::new(0.25, vec![0.1], vec![0.105]).unwrap();
        assert_eq!(lq.pi(0.25).unwrap(), 0.0);
        for t in [0.0, 0.05, 0.125, 0.2] {
            assert!((lq.pi(t).unwrap() - literal_pi(0.25, t)).abs() < 1e-15);
        }
        // (e^{0.5} - 1) / (e^{0.5} + 1)
        assert!((lq.pi(0.0).unwrap() - 0.244_918_662_403_709_13).abs() < 1e-15);
        assert!(lq.pi(0.3).is_err());
        assert!(lq.pi(-0.01).is_err());

        let long = LqAnalytic::new(2.0, vec![0.0], vec![1.0]).unwrap();
        assert!((long.pi(0.0).unwrap() - 2.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn exact_value_examples() {
        let lq = LqAnalytic::new(0.25, vec![0.1], vec![0.105]).unwrap();
        assert_eq!(lq.exact_value(0.25, &[1.3]).unwrap(), 0.0);
        for t in [0.0, 0.1, 0.2] {
            assert!(lq.exact_value(t, &[0.1]).unwrap().abs() < 1e-16);
        }
        let p = literal_pi(0.25, 0.0);
        let expected = 0.5 * p * 1.0 - p * 0.1 + 0.5 * p * 0.01;
        assert!((lq.exact_value(0.0, &[1.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn density_params_examples() {
        let lq = LqAnalytic::new(0.25, vec![0.1], vec![0.105]).unwrap();
        let (m0, v0) = lq.density_params(0.0).unwrap();
        assert_eq!(m0, vec![0.1]);
        assert!((v0[0] - 0.105).abs() < 1e-16);
        let (mt, vt) = lq.density_params(0.25).unwrap();
        assert_eq!(mt, vec![0.1]);
        let literal = (2.0 * 0.25f64.exp() / (0.5f64.exp() + 1.0)).powi(2) * 0.105;
        assert!((vt[0] - literal).abs() < 1e-14);
        assert!((vt[0] - 0.0987).abs() < 1e-4);
        for k in 0..=50 {
            let t = 0.25 * k as f64 / 50.0;
            let (a, b) = ((2.0 * 0.25 - t).exp(), t.exp());
            let lit = ((a + b) / (0.5f64.exp() + 1.0)).powi(2) * 0.105;
            assert!((lq.density_params(t).unwrap().1[0] - lit).abs() < 1e-12);
        }
    }

    #[test]
    fn lq_coupling_examples() {
        let g = Grid::new(&[-1.0], &[1.0], 0.25).unwrap();
        let mut single = vec![0.0; g.len()];
        let j = 5;
        single[j] = 1.0 / g.cell_volume();
        let snap = DensitySnapshot::new(&g, &single).unwrap();
        let xj = g.node_coord(j, 0);
        assert!(lq_coupling(&[xj], &snap).abs() < 1e-15);
        assert!((lq_coupling(&[xj + 1.0], &snap) - 0.5).abs() < 1e-14);

        let uniform = vec![1.0 / (g.len() as f64 * g.cell_volume()); g.len()];
        let snap = DensitySnapshot::new(&g, &uniform).unwrap();
        assert!(lq_coupling(&[0.0], &snap).abs() < 1e-28);

        let lq = LqProblem::benchmark();
        let nodes = lq.running_coupling_nodes(&snap);
        for (n, v) in nodes.iter().enumerate() {
            assert!((v - lq_coupling(&g.node(n), &snap)).abs() < 1e-15);
        }
    }

    #[test]
    fn congestion_coupling_examples() {
        let g = Grid::new(&[0.0, 0.0], &[2.0, 2.0], 0.05).unwrap();
        let p = CongestionParams {
            gamma: 3.0,
            ..Default::default()
        };
        let mut m = vec![0.0; g.len()];
        let far = g.ravel(&crate::grid::MultiIndex::new(&[2, 2])).unwrap();
        m[far] = 1.0 / g.cell_volume();
        let snap = DensitySnapshot::new(&g, &m).unwrap();
        assert_eq!(congestion_coupling(&[1.75, 1.75], &snap, &p), 0.0);

        let xj = g.node(far);
        let attraction = 3.0 * ((xj[0] - 1.75f64).powi(2) + (xj[1] - 1.75f64).powi(2)).min(5.0);
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 0.0625);
        assert!((peak - 2.546_479_089_470_325).abs() < 1e-12);
        let got = congestion_coupling(&xj, &snap, &p);
        assert!((got - attraction - peak).abs() < 1e-12, "{got}");
        // truncation of the attraction term: |x - target|^2 = 6.125 >= R
        assert!(attraction == 15.0);
    }

    #[test]
    fn congestion_initial_density_properties() {
        let g = Grid::new(&[0.0, 0.0], &[2.0, 2.0], 0.05).unwrap();
        let prob = CongestionProblem::new(CongestionParams::default(), &g).unwrap();
        assert_eq!(prob.initial_density(&[-0.1, 1.0]), 0.0);
        assert_eq!(prob.initial_density(&[1.0, 2.1]), 0.0);
        let peak = prob.initial_density(&[0.75, 0.75]);
        let samples = g.sample(|x| prob.initial_density(x));
        assert!(samples.iter().all(|&v| v <= peak));
        let mass: f64 = samples.iter().sum::<f64>() * g.cell_volume();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_consistency_quadratic() {
        let lq = LqProblem::benchmark();
        let spec = ProblemSpec::quadratic(&[0.0, 0.0], &[1.0, 1.0], 1.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = [rng.gen_range(-2.0..2.0)];
            let p = [rng.gen_range(-5.0..5.0)];
            let mut a = [0.0];
            lq.hamiltonian_gradient(&x, &p, &mut a);
            let h = a[0] * p[0] - lq.lagrangian(&x, &a);
            assert!((h - 0.5 * p[0] * p[0]).abs() < 1e-12);

            let x2 = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let p2 = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let mut a2 = [0.0; 2];
            spec.hamiltonian_gradient(&x2, &p2, &mut a2);
            let h2 = a2[0] * p2[0] + a2[1] * p2[1] - spec.lagrangian(&x2, &a2);
            assert!((h2 - 0.5 * norm_sq(&p2)).abs() < 1e-12);
        }
    }

    #[test]
    fn lagrangian_bounded_below_on_control_ball() {
        let lq = LqProblem::benchmark();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = [rng.gen_range(-5.0..=5.0)];
            assert!(lq.lagrangian(&[rng.gen_range(-2.0..2.0)], &a) >= 0.0);
        }
    }
}
