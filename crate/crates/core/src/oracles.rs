//! Brute-force reference computations used to validate the solvers.
//!
//! Nothing here shares code with the transport or HJB paths beyond the
//! `Grid` geometry accessors; binning and minimization are done locally.

use rayon::prelude::*;

use crate::grid::{Grid, TimeGrid};

/// Weighted point masses.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    pub dim: usize,
    /// Flattened `positions[p * dim + l]`.
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ParticleCloud {
    /// `per_axis^d` stratified particles in every cell with nonzero
    /// coefficient, each carrying an equal share of the cell mass.
    pub fn from_cells(grid: &Grid, coeffs: &[f64], per_axis: usize) -> Self {
        let d = grid.dim();
        let dx = grid.dx();
        let per_cell = per_axis.pow(d as u32);
        let total: f64 = coeffs.iter().sum();
        let mut positions = Vec::new();
        let mut weights = Vec::new();
        for (n, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let centre = grid.node(n);
            for q in 0..per_cell {
                let mut rem = q;
                let mut p = vec![0.0; d];
                for l in (0..d).rev() {
                    let s = rem % per_axis;
                    rem /= per_axis;
                    p[l] = centre[l] - 0.5 * dx + (s as f64 + 0.5) * dx / per_axis as f64;
                }
                positions.extend(p);
                weights.push(c / total / per_cell as f64);
            }
        }
        ParticleCloud {
            dim: d,
            positions,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Piecewise-constant density on the cells of `grid`: each particle goes
    /// to the nearest node (ties upward), positions outside the cell union
    /// to the nearest boundary cell.
    pub fn bin(&self, grid: &Grid) -> Vec<f64> {
        let d = self.dim;
        let dx = grid.dx();
        let mut out = vec![0.0; grid.len()];
        for (p, w) in self.weights.iter().enumerate() {
            let mut flat = 0;
            let mut stride = 1;
            for l in (0..d).rev() {
                let n = grid.counts()[l] as i64;
                let x = self.positions[p * d + l];
                let i = ((x - grid.lower()[l]) / dx + 0.5).floor() as i64;
                flat += i.clamp(0, n - 1) as usize * stride;
                stride *= n as usize;
            }
            out[flat] += w;
        }
        let vol = grid.cell_volume();
        out.iter_mut().for_each(|v| *v /= vol);
        out
    }
}

/// Stratified particles per axis and cell: 16 in 1D, 32 (1024 per cell)
/// otherwise, enough to push binning noise below the LG error at `dx >= 0.0125`.
pub fn default_particles_per_axis(dim: usize) -> usize {
    if dim == 1 {
        16
    } else {
        32
    }
}

/// Forward-Euler push-forward of cell-average data `m0` by the velocity field
/// `velocity(t, x, out)`, with `per_axis^d` particles per cell confined to
/// the node box.
pub fn pushforward_oracle(
    grid: &Grid,
    m0: &[f64],
    velocity: impl Fn(f64, &[f64], &mut [f64]) + Sync,
    time: &TimeGrid,
    per_axis: usize,
) -> ParticleCloud {
    let mut cloud = ParticleCloud::from_cells(grid, m0, per_axis);
    let d = cloud.dim;
    let dt = time.dt();
    let lower = grid.lower().to_vec();
    let upper = grid.upper();
    for k in 0..time.steps {
        let t = time.time(k);
        cloud.positions.par_chunks_mut(d).for_each(|x| {
            let mut b = vec![0.0; d];
            velocity(t, x, &mut b);
            for l in 0..d {
                x[l] = (x[l] + dt * b[l]).clamp(lower[l], upper[l]);
            }
        });
    }
    cloud
}

/// Hopf-Lax formula `min_y G(y) + |x - y|^2 / (2 (T - t))`, minimized over a
/// uniform `y`-grid.
#[derive(Clone, Debug)]
pub struct HopfLax {
    pub horizon: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub spacing: f64,
}

impl HopfLax {
    /// `y`-grid ten times finer than `grid`, over its box inflated by
    /// `speed * horizon` in every direction.
    pub fn for_grid(grid: &Grid, horizon: f64, speed: f64) -> Self {
        let pad = speed * horizon;
        HopfLax {
            horizon,
            lower: grid.lower().iter().map(|a| a - pad).collect(),
            upper: grid.upper().iter().map(|b| b + pad).collect(),
            spacing: grid.dx() / 10.0,
        }
    }

    /// Value at `(t, x)`; at `t >= T` this is `G(x)`.
    pub fn value(&self, g: impl Fn(&[f64]) -> f64, t: f64, x: &[f64]) -> f64 {
        let tau = self.horizon - t;
        if tau <= 0.0 {
            return g(x);
        }
        let d = x.len();
        let counts: Vec<usize> = (0..d)
            .map(|l| ((self.upper[l] - self.lower[l]) / self.spacing).round() as usize + 1)
            .collect();
        let mut idx = vec![0usize; d];
        let mut y = vec![0.0; d];
        let mut best = f64::INFINITY;
        loop {
            let mut dist = 0.0;
            for l in 0..d {
                y[l] = self.lower[l] + idx[l] as f64 * self.spacing;
                dist += (x[l] - y[l]) * (x[l] - y[l]);
            }
            best = best.min(g(&y) + dist / (2.0 * tau));
            let mut l = d;
            loop {
                if l == 0 {
                    return best;
                }
                l -= 1;
                idx[l] += 1;
                if idx[l] < counts[l] {
                    break;
                }
                idx[l] = 0;
            }
        }
    }

    /// Values at every node of `grid` at time `t`.
    pub fn on_grid(&self, g: impl Fn(&[f64]) -> f64 + Sync, grid: &Grid, t: f64) -> Vec<f64> {
        (0..grid.len())
            .into_par_iter()
            .map(|n| self.value(&g, t, &grid.node(n)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abs_envelope(x: f64, tau: f64) -> f64 {
        if x.abs() <= tau {
            x * x / (2.0 * tau)
        } else {
            x.abs() - tau / 2.0
        }
    }

    #[test]
    fn hopf_lax_examples() {
        let g = Grid::new(&[-2.0], &[2.0], 0.01).unwrap();
        let hl = HopfLax::for_grid(&g, 1.0, 5.0);
        assert!((hl.value(|_| 0.7, 0.3, &[0.4]) - 0.7).abs() < 1e-15);
        assert!((hl.value(|y| y[0].abs(), 0.0, &[2.0]) - 1.5).abs() < 1e-6);
        assert!(hl.value(|y| y[0].abs(), -9.0, &[0.0]).abs() < 1e-12);
        for x in [-1.7, -0.4, 0.0, 0.25, 0.9, 1.99] {
            for t in [0.0, 0.5, 0.9] {
                let exact = abs_envelope(x, 1.0 - t);
                assert!((hl.value(|y| y[0].abs(), t, &[x]) - exact).abs() < 1e-6, "x {x} t {t}");
            }
        }
        assert_eq!(hl.value(|y| y[0].abs(), 1.0, &[0.3]), 0.3);
    }

    #[test]
    fn hopf_lax_in_2d() {
        let g = Grid::new(&[-1.0, -1.0], &[1.0, 1.0], 0.1).unwrap();
        let hl = HopfLax::for_grid(&g, 1.0, 1.0);
        // G = |y|^2 / 2 gives |x|^2 / (2 (1 + T - t))
        let v = hl.value(|y| 0.5 * (y[0] * y[0] + y[1] * y[1]), 0.0, &[0.6, -0.3]);
        assert!((v - 0.45 / 4.0).abs() < 1e-4);
    }

    #[test]
    fn zero_velocity_reproduces_cells() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let m0: Vec<f64> = (0..g.len()).map(|i| (i % 7) as f64).collect();
        let mass: f64 = m0.iter().sum::<f64>() * g.cell_volume();
        let cloud = pushforward_oracle(&g, &m0, |_, _, b| b.fill(0.0), &TimeGrid::new(1.0, 5).unwrap(), 3);
        assert!((cloud.total_weight() - 1.0).abs() < 1e-12);
        for (a, b) in cloud.bin(&g).iter().zip(&m0) {
            assert!((a - b / mass).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_velocity_shifts_one_cell_per_step() {
        let g = Grid::new(&[0.0], &[1.0], 0.05).unwrap();
        let mut m0 = vec![0.0; g.len()];
        m0[3] = 2.0;
        m0[4] = 1.0;
        // dt * b = dx
        let tg = TimeGrid::new(0.2, 4).unwrap();
        let cloud = pushforward_oracle(&g, &m0, |_, _, b| b[0] = 0.05 / 0.05, &tg, 16);
        let out = cloud.bin(&g);
        let mass = 3.0 * g.cell_volume();
        assert!((out[7] - 2.0 / mass).abs() < 1e-12);
        assert!((out[8] - 1.0 / mass).abs() < 1e-12);
        assert!((out.iter().sum::<f64>() * g.cell_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_particles_stay_on_boundary_cells() {
        let g = Grid::new(&[0.0], &[1.0], 0.1).unwrap();
        let mut m0 = vec![0.0; g.len()];
        m0[9] = 1.0;
        let out = pushforward_oracle(&g, &m0, |_, _, b| b[0] = 10.0, &TimeGrid::new(1.0, 3).unwrap(), 16).bin(&g);
        assert!((out[10] * g.cell_volume() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hopf_lax_monotone_in_terminal_data(a in -1.0f64..1.0, b in 0.0f64..1.0, shift in 0.0f64..0.5,
                                             x in -1.5f64..1.5, t in 0.0f64..0.9) {
            let g = Grid::new(&[-2.0], &[2.0], 0.05).unwrap();
            let hl = HopfLax::for_grid(&g, 1.0, 2.0);
            let g1 = |y: &[f64]| a * y[0] + b * y[0].abs();
            let g2 = |y: &[f64]| a * y[0] + b * y[0].abs() + shift * (1.0 + y[0].sin());
            prop_assert!(hl.value(g1, t, &[x]) <= hl.value(g2, t, &[x]) + 1e-15);
        }

        #[test]
        fn pushforward_conserves_weight(vx in -2.0f64..2.0, vy in -2.0f64..2.0, steps in 1usize..6) {
            let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
            let m0: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64).collect();
            let cloud = pushforward_oracle(&g, &m0, |_, x, b| { b[0] = vx * x[1]; b[1] = vy * x[0]; },
                                           &TimeGrid::new(0.5, steps).unwrap(), 3);
            prop_assert!((cloud.total_weight() - 1.0).abs() < 1e-12);
            prop_assert!((cloud.bin(&g).iter().sum::<f64>() * g.cell_volume() - 1.0).abs() < 1e-12);
        }
    }
}
