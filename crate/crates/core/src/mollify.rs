//! Gaussian mollification of node fields and of their gradients.
//!
//! The Gaussian `rho_eps` is sampled on the grid offsets inside the ball of
//! radius `4 eps`. Zeroth-order weights are renormalized to unit sum.
//! Gradient weights are sampled from `grad rho_eps`, antisymmetric by
//! construction, and rescaled so that the discrete first moment is exactly
//! the identity; gradients of affine fields are then reproduced away from
//! the boundary. Out-of-box samples use the nearest in-box node.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_DIM};
use crate::hjb::ValueField;

/// Sampled Gaussian mollifier on a fixed grid spacing.
#[derive(Clone, Debug)]
pub struct MollifierKernel {
    eps: f64,
    dim: usize,
    center_weight: f64,
    /// Offsets `j > 0` in lexicographic order; `-j` is implied.
    offsets: Vec<[i64; MAX_DIM]>,
    weights: Vec<f64>,
    grad: Vec<[f64; MAX_DIM]>,
}

impl MollifierKernel {
    pub fn new(eps: f64, grid: &Grid) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param("eps", "must be positive"));
        }
        let dx = grid.dx();
        let d = grid.dim();
        let cut = 4.0 * eps;
        let r = (cut / dx + 1e-9).floor() as i64;
        if r < 1 {
            return Err(Error::DegenerateKernel { eps, dx });
        }
        if r < 2 {
            log::warn!("mollifier support spans fewer than two cells (eps = {eps}, dx = {dx})");
        }

        let rho = |r2: f64| (-r2 / (2.0 * eps * eps)).exp();
        let side = (2 * r + 1) as usize;
        let mut offsets = Vec::new();
        let mut raw_w = Vec::new();
        let mut raw_g = Vec::new();
        let center_raw = rho(0.0);
        for flat in 0..side.pow(d as u32) {
            let mut j = [0i64; MAX_DIM];
            let mut rem = flat;
            for l in (0..d).rev() {
                j[l] = (rem % side) as i64 - r;
                rem /= side;
            }
            // keep the half j > 0 (first nonzero component positive)
            match j[..d].iter().find(|&&c| c != 0) {
                Some(&c) if c > 0 => {}
                _ => continue,
            }
            let r2: f64 = j[..d].iter().map(|&c| (c as f64 * dx).powi(2)).sum();
            if r2.sqrt() > cut * (1.0 + 1e-12) {
                continue;
            }
            let w = rho(r2);
            let mut gj = [0.0; MAX_DIM];
            for l in 0..d {
                gj[l] = -(j[l] as f64 * dx) / (eps * eps) * w;
            }
            offsets.push(j);
            raw_w.push(w);
            raw_g.push(gj);
        }

        let total = center_raw + 2.0 * raw_w.iter().sum::<f64>();
        let weights: Vec<f64> = raw_w.iter().map(|w| w / total).collect();

        // first moment per axis: sum over +-j of -g_j(l) * (j_l dx)
        let mut moment = [0.0; MAX_DIM];
        for (j, g) in offsets.iter().zip(&raw_g) {
            for l in 0..d {
                moment[l] += -2.0 * g[l] * j[l] as f64 * dx;
            }
        }
        let grad = raw_g
            .iter()
            .map(|g| {
                let mut out = [0.0; MAX_DIM];
                for l in 0..d {
                    out[l] = g[l] / moment[l];
                }
                out
            })
            .collect();

        Ok(MollifierKernel {
            eps,
            dim: d,
            center_weight: center_raw / total,
            offsets,
            weights,
            grad,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Full list of `(offset, w_j)` including the center and `-j` mirrors.
    pub fn weights(&self) -> Vec<(Vec<i64>, f64)> {
        let d = self.dim;
        let mut out = vec![(vec![0; d], self.center_weight)];
        for (j, &w) in self.offsets.iter().zip(&self.weights) {
            out.push((j[..d].to_vec(), w));
            out.push((j[..d].iter().map(|c| -c).collect(), w));
        }
        out
    }

    /// Full list of `(offset, g_j)` including `-j` mirrors.
    pub fn gradient_weights(&self) -> Vec<(Vec<i64>, Vec<f64>)> {
        let d = self.dim;
        let mut out = vec![(vec![0; d], vec![0.0; d])];
        for (j, g) in self.offsets.iter().zip(&self.grad) {
            out.push((j[..d].to_vec(), g[..d].to_vec()));
            out.push((j[..d].iter().map(|c| -c).collect(), g[..d].iter().map(|c| -c).collect()));
        }
        out
    }

    /// Flat indices of `n - j` and `n + j`, replicated at the box faces.
    #[inline]
    fn mirrored(grid: &Grid, idx: &[i64], j: &[i64]) -> (usize, usize) {
        let mut minus = 0;
        let mut plus = 0;
        for l in 0..idx.len() {
            let top = grid.counts()[l] as i64 - 1;
            minus += (idx[l] - j[l]).clamp(0, top) as usize * grid.stride(l);
            plus += (idx[l] + j[l]).clamp(0, top) as usize * grid.stride(l);
        }
        (minus, plus)
    }

    fn check(&self, grid: &Grid, v: &[f64]) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: grid.dim(),
            });
        }
        grid.check_field(v)
    }

    /// `rho_eps * v` at every node.
    pub fn smooth_field(&self, grid: &Grid, v: &[f64]) -> Result<Vec<f64>> {
        self.check(grid, v)?;
        let d = self.dim;
        Ok((0..grid.len())
            .into_par_iter()
            .map(|n| {
                let idx = grid.unravel(n);
                let mut acc = self.center_weight * v[n];
                for (j, &w) in self.offsets.iter().zip(&self.weights) {
                    let (a, b) = Self::mirrored(grid, idx.as_slice(), &j[..d]);
                    acc += w * (v[a] + v[b]);
                }
                acc
            })
            .collect())
    }

    /// `grad(rho_eps * v)` at every node, stored node-major (`n * d + l`).
    pub fn smooth_gradient(&self, grid: &Grid, v: &[f64]) -> Result<Vec<f64>> {
        self.check(grid, v)?;
        let d = self.dim;
        let per_node: Vec<[f64; MAX_DIM]> = (0..grid.len())
            .into_par_iter()
            .map(|n| {
                let idx = grid.unravel(n);
                let mut acc = [0.0; MAX_DIM];
                for (j, g) in self.offsets.iter().zip(&self.grad) {
                    let (a, b) = Self::mirrored(grid, idx.as_slice(), &j[..d]);
                    // g_{-j} = -g_j: sum g_j v(n - j) + g_{-j} v(n + j)
                    let diff = v[a] - v[b];
                    for l in 0..d {
                        acc[l] += g[l] * diff;
                    }
                }
                acc
            })
            .collect();
        Ok(per_node.iter().flat_map(|a| a[..d].iter().copied()).collect())
    }
}

/// Mollified value function and gradient at every time level.
#[derive(Clone, Debug)]
pub struct MollifiedValue {
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
    /// Node-major gradients, `gradients[k][n * d + l]`.
    pub gradients: Vec<Vec<f64>>,
}

impl MollifiedValue {
    pub fn new(value: &ValueField, kernel: &MollifierKernel) -> Result<Self> {
        let g = &value.grid;
        let mut values = Vec::with_capacity(value.levels.len());
        let mut gradients = Vec::with_capacity(value.levels.len());
        for lvl in &value.levels {
            values.push(kernel.smooth_field(g, lvl)?);
            gradients.push(kernel.smooth_gradient(g, lvl)?);
        }
        Ok(MollifiedValue {
            grid: g.clone(),
            values,
            gradients,
        })
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    /// P1 interpolation of the smoothed gradient at level `k`.
    pub fn gradient_at(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        if !self.grid.contains(x) {
            return Err(Error::OutOfBox { point: x.to_vec() });
        }
        let mut out = vec![0.0; self.grid.dim()];
        self.gradient_into(k, x, &mut out);
        Ok(out)
    }

    /// As [`gradient_at`](Self::gradient_at) for a point projected onto the box.
    #[inline]
    pub fn gradient_into(&self, k: usize, x: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        let grads = &self.gradients[k];
        out[..d].iter_mut().for_each(|o| *o = 0.0);
        for (n, w) in self.grid.p1_stencil(x).iter() {
            for l in 0..d {
                out[l] += w * grads[n * d + l];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_sums() {
        for (eps, g) in [
            (0.1, Grid::new(&[-1.0], &[1.0], 0.02).unwrap()),
            (0.2, Grid::new(&[0.0, 0.0], &[2.0, 2.0], 0.05).unwrap()),
            (0.013, Grid::new(&[0.0], &[1.0], 0.01).unwrap()),
        ] {
            let k = MollifierKernel::new(eps, &g).unwrap();
            let s: f64 = k.weights().iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-14);
            let gw = k.gradient_weights();
            for l in 0..g.dim() {
                let s: f64 = gw.iter().map(|(_, v)| v[l]).sum();
                assert!(s.abs() < 1e-12, "{s}");
            }
        }
    }

    #[test]
    fn kernel_symmetric_with_peak_at_origin() {
        let g = Grid::new(&[0.0], &[1.0], 0.01).unwrap();
        let k = MollifierKernel::new(0.02, &g).unwrap();
        let w = k.weights();
        let center = w[0].1;
        assert!(w.iter().all(|(_, v)| *v <= center));
        for pair in w[1..].chunks(2) {
            assert_eq!(pair[0].0[0], -pair[1].0[0]);
            assert_eq!(pair[0].1, pair[1].1);
        }
    }

    #[test]
    fn degenerate_support_is_rejected() {
        let g = Grid::new(&[0.0], &[1.0], 0.1).unwrap();
        assert!(matches!(
            MollifierKernel::new(0.02, &g),
            Err(Error::DegenerateKernel { .. })
        ));
    }

    #[test]
    fn constants_and_affine_fields() {
        let g = Grid::new(&[-1.0, -1.0], &[1.0, 1.0], 0.05).unwrap();
        let k = MollifierKernel::new(0.1, &g).unwrap();
        let c = vec![1.7; g.len()];
        assert!(k.smooth_field(&g, &c).unwrap().iter().all(|v| (v - 1.7).abs() < 1e-14));
        assert!(k.smooth_gradient(&g, &c).unwrap().iter().all(|&v| v == 0.0));

        let aff = g.sample(|x| 0.7 * x[0] - 1.3 * x[1] + 0.2);
        let sm = k.smooth_field(&g, &aff).unwrap();
        let gr = k.smooth_gradient(&g, &aff).unwrap();
        for n in 0..g.len() {
            let x = g.node(n);
            if x.iter().all(|v| v.abs() <= 1.0 - 0.4 - 1e-9) {
                assert!((sm[n] - aff[n]).abs() < 1e-12);
                assert!((gr[2 * n] - 0.7).abs() < 1e-10);
                assert!((gr[2 * n + 1] + 1.3).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn smoothing_abs_at_origin() {
        // oracle: int rho_eps(y) |y| dy = eps sqrt(2/pi), by dense quadrature
        let eps = 0.1;
        let oracle = {
            let n = 200_000;
            let h = 16.0 * eps / n as f64;
            (0..n)
                .map(|i| {
                    let y = -8.0 * eps + (i as f64 + 0.5) * h;
                    (-y * y / (2.0 * eps * eps)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * eps) * y.abs() * h
                })
                .sum::<f64>()
        };
        assert!((oracle - eps * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-8);
        for dx in [0.02, 0.01, 0.005] {
            let g = Grid::new(&[-1.0], &[1.0], dx).unwrap();
            let k = MollifierKernel::new(eps, &g).unwrap();
            let v = g.sample(|x| x[0].abs());
            let sm = k.smooth_field(&g, &v).unwrap();
            let mid = g.len() / 2;
            assert!((sm[mid] - oracle).abs() < 2.0 * dx * dx / eps, "dx {dx}: {}", sm[mid]);
            let gr = k.smooth_gradient(&g, &v).unwrap();
            assert!(gr[mid].abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_of_half_square() {
        let g = Grid::new(&[-1.0], &[1.0], 0.01).unwrap();
        let k = MollifierKernel::new(0.1, &g).unwrap();
        let vf = ValueField {
            grid: g.clone(),
            time: TimeGrid::new(1.0, 1).unwrap(),
            levels: vec![g.sample(|x| 0.5 * x[0] * x[0]); 2],
        };
        let mv = MollifiedValue::new(&vf, &k).unwrap();
        for x in [-0.3, 0.0, 0.123, 0.45] {
            let p = mv.gradient_at(0, &[x]).unwrap();
            assert!((p[0] - x).abs() < 1e-3, "{x}: {}", p[0]);
        }
        let node = g.len() / 2 + 7;
        assert_eq!(mv.gradient_at(1, &g.node(node)).unwrap()[0], mv.gradients[1][node]);
        assert!(mv.gradient_at(0, &[1.5]).is_err());
    }

    #[test]
    fn perturbation_lipschitz_and_stability_bounds() {
        let g = Grid::new(&[-1.0, -1.0], &[1.0, 1.0], 0.025).unwrap();
        let eps = 0.08;
        let k = MollifierKernel::new(eps, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let (a, b, c) = (
                rng.gen_range(0.5..3.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            // Lipschitz with constant sqrt(a^2 + 1)
            let lip = (a * a + 1.0f64).sqrt();
            let v = g.sample(|x| (a * (x[0] - b)).sin() + (x[1] - c).abs());
            let sm = k.smooth_field(&g, &v).unwrap();
            for n in 0..g.len() {
                let x = g.node(n);
                if x.iter().all(|t| t.abs() <= 1.0 - 4.0 * eps) {
                    assert!((sm[n] - v[n]).abs() <= 1.05 * eps * lip);
                }
            }
            let est = crate::hjb::lipschitz_estimate;
            assert!(est(&g, &sm) <= est(&g, &v) + 1e-10);
            let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(sm.iter().all(|x| x.abs() <= vmax + 1e-12));
        }
    }
}
