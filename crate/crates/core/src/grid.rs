//! Uniform lattice geometry, the P0/P1 bases and multilinear interpolation.
//!
//! Nodes sit at `lower + i * dx`. Every node `x_i` is also the center of the
//! cell `E_i`, the half-open box `[x_i - dx/2, x_i + dx/2)` in each
//! coordinate, so node fields (values) and cell fields (densities) share one
//! flat row-major index.

use crate::error::{Error, Result};

/// Largest supported state dimension.
pub const MAX_DIM: usize = 3;

const STENCIL_LEN: usize = 1 << MAX_DIM;

/// Reference hat function `max(0, 1 - |xi|)`.
#[inline]
pub fn hat_basis(xi: f64) -> f64 {
    (1.0 - xi.abs()).max(0.0)
}

/// Integer multi-index, relative to the lower corner of a [`Grid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    comps: [i64; MAX_DIM],
    dim: usize,
}

impl MultiIndex {
    pub fn new(comps: &[i64]) -> Self {
        assert!(
            !comps.is_empty() && comps.len() <= MAX_DIM,
            "multi-index dimension must be in 1..={MAX_DIM}"
        );
        let mut c = [0; MAX_DIM];
        c[..comps.len()].copy_from_slice(comps);
        MultiIndex {
            comps: c,
            dim: comps.len(),
        }
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.comps[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Shift component `axis` by `delta`.
    pub fn offset(mut self, axis: usize, delta: i64) -> Self {
        self.comps[axis] += delta;
        self
    }
}

/// The (at most `2^d`) nodes carrying nonzero P1 weight at a point.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub nodes: [usize; STENCIL_LEN],
    pub weights: [f64; STENCIL_LEN],
    pub len: usize,
}

impl Stencil {
    pub(crate) fn empty() -> Self {
        Stencil {
            nodes: [0; STENCIL_LEN],
            weights: [0.0; STENCIL_LEN],
            len: 0,
        }
    }

    pub(crate) fn push(&mut self, node: usize, weight: f64) {
        self.nodes[self.len] = node;
        self.weights[self.len] = weight;
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes[..self.len]
            .iter()
            .copied()
            .zip(self.weights[..self.len].iter().copied())
    }
}

/// Uniform d-dimensional lattice truncated to a box.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dx: f64,
    lower: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    /// Grid whose first and last nodes are exactly `lower` and `upper`.
    ///
    /// `upper - lower` must be an integer multiple of `dx` in every
    /// dimension.
    pub fn new(lower: &[f64], upper: &[f64], dx: f64) -> Result<Self> {
        Self::check_args(lower, upper, dx)?;
        let mut counts = Vec::with_capacity(lower.len());
        for (l, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
            let ratio = (hi - lo) / dx;
            let n = ratio.round();
            if (ratio - n).abs() > 1e-12 * n.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent {} in dimension {l} is not a multiple of dx = {dx}",
                    hi - lo
                )));
            }
            counts.push(n as usize + 1);
        }
        Self::from_parts(dx, lower.to_vec(), counts)
    }

    /// Grid made of the lattice points `i * dx` (`i` integer) contained in
    /// the closed box `[lower, upper]`.
    pub fn lattice_in_box(lower: &[f64], upper: &[f64], dx: f64) -> Result<Self> {
        Self::check_args(lower, upper, dx)?;
        let tol = 1e-9;
        let mut first = Vec::with_capacity(lower.len());
        let mut counts = Vec::with_capacity(lower.len());
        for (&lo, &hi) in lower.iter().zip(upper) {
            let i0 = (lo / dx - tol).ceil() as i64;
            let i1 = (hi / dx + tol).floor() as i64;
            if i1 <= i0 {
                return Err(Error::InvalidGrid(format!(
                    "box [{lo}, {hi}] holds fewer than two lattice points at dx = {dx}"
                )));
            }
            first.push(i0 as f64 * dx);
            counts.push((i1 - i0 + 1) as usize);
        }
        Self::from_parts(dx, first, counts)
    }

    fn check_args(lower: &[f64], upper: &[f64], dx: f64) -> Result<()> {
        if lower.is_empty() || lower.len() > MAX_DIM || lower.len() != upper.len() {
            return Err(Error::InvalidGrid(format!(
                "box corners must have equal dimension in 1..={MAX_DIM}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if lower.iter().zip(upper).any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::InvalidGrid("upper corner must exceed lower".into()));
        }
        Ok(())
    }

    fn from_parts(dx: f64, lower: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if counts.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid("every dimension needs at least two nodes".into()));
        }
        let d = counts.len();
        let mut strides = vec![1; d];
        for l in (0..d.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * counts[l + 1];
        }
        Ok(Grid {
            dx,
            lower,
            counts,
            strides,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `dx^d`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim() as i32)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim()).map(|l| self.upper_at(l)).collect()
    }

    #[inline]
    fn upper_at(&self, l: usize) -> f64 {
        self.lower[l] + (self.counts[l] - 1) as f64 * self.dx
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of nodes (equivalently, cells).
    #[inline]
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ravel(&self, i: &MultiIndex) -> Option<usize> {
        if i.dim() != self.dim() {
            return None;
        }
        let mut flat = 0;
        for (l, &c) in i.as_slice().iter().enumerate() {
            if c < 0 || c as usize >= self.counts[l] {
                return None;
            }
            flat += c as usize * self.strides[l];
        }
        Some(flat)
    }

    pub fn unravel(&self, flat: usize) -> MultiIndex {
        let mut comps = [0i64; MAX_DIM];
        let mut rem = flat;
        for l in 0..self.dim() {
            comps[l] = (rem / self.strides[l]) as i64;
            rem %= self.strides[l];
        }
        MultiIndex { comps, dim: self.dim() }
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Coordinate `axis` of node `flat`.
    #[inline]
    pub fn node_coord(&self, flat: usize, axis: usize) -> f64 {
        let c = (flat / self.strides[axis]) % self.counts[axis];
        self.lower[axis] + c as f64 * self.dx
    }

    /// Writes the coordinates of node `flat` into `out[..d]`.
    #[inline]
    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        for (l, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = self.node_coord(flat, l);
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(flat, &mut x);
        x
    }

    /// Node field sampled from `f`.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut x = [0.0; MAX_DIM];
        (0..self.len())
            .map(|n| {
                self.node_into(n, &mut x);
                f(&x[..self.dim()])
            })
            .collect()
    }

    /// True if the node lies on a face of the box.
    pub fn is_boundary_node(&self, flat: usize) -> bool {
        (0..self.dim()).any(|l| {
            let c = (flat / self.strides[l]) % self.counts[l];
            c == 0 || c + 1 == self.counts[l]
        })
    }

    /// True if `x` lies in the closed node box `[lower, upper]`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|l| x[l] >= self.lower[l] && x[l] <= self.upper_at(l))
    }

    /// Componentwise projection onto the node box.
    #[inline]
    pub fn clamp_point(&self, x: &mut [f64]) {
        for (l, v) in x.iter_mut().enumerate().take(self.dim()) {
            *v = v.clamp(self.lower[l], self.upper_at(l));
        }
    }

    /// `beta^1_i(x)`, the tensor-product hat centered at node `i`.
    pub fn p1_basis(&self, i: &MultiIndex, x: &[f64]) -> f64 {
        i.as_slice()
            .iter()
            .zip(x)
            .zip(&self.lower)
            .map(|((&il, &xl), &lo)| hat_basis((xl - lo) / self.dx - il as f64))
            .product()
    }

    /// `beta^0_i(x)`, the indicator of the half-open cell `E_i`.
    pub fn p0_basis(&self, i: &MultiIndex, x: &[f64]) -> f64 {
        match self.cell_of(x) {
            Ok(c) if Some(c) == self.ravel(i) => 1.0,
            _ => 0.0,
        }
    }

    /// Flat index of the cell containing `x`.
    ///
    /// The cells cover `[lower - dx/2, upper + dx/2)`; anything outside is an
    /// error.
    pub fn cell_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut flat = 0;
        for l in 0..self.dim() {
            let s = ((x[l] - self.lower[l]) / self.dx + 0.5).floor();
            if !(s >= 0.0 && s < self.counts[l] as f64) {
                return Err(Error::OutOfBox { point: x.to_vec() });
            }
            flat += s as usize * self.strides[l];
        }
        Ok(flat)
    }

    /// Cell index of a point already clamped to the node box.
    #[inline]
    pub(crate) fn cell_of_clamped(&self, x: &[f64]) -> usize {
        let mut flat = 0;
        for l in 0..self.dim() {
            let s = ((x[l] - self.lower[l]) / self.dx + 0.5).floor() as usize;
            flat += s.min(self.counts[l] - 1) * self.strides[l];
        }
        flat
    }

    /// P1 stencil of a point inside the node box.
    ///
    /// Coordinates slightly outside are projected first; the weights are
    /// nonnegative and sum to one.
    #[inline]
    pub fn p1_stencil(&self, x: &[f64]) -> Stencil {
        let d = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for l in 0..d {
            let mut s = ((x[l] - self.lower[l]) / self.dx).clamp(0.0, (self.counts[l] - 1) as f64);
            // Snap round-off so that nodes map to themselves exactly.
            if (s - s.round()).abs() < 1e-10 {
                s = s.round();
            }
            let b = (s.floor() as usize).min(self.counts[l] - 2);
            base[l] = b;
            frac[l] = s - b as f64;
        }
        let len = 1 << d;
        let mut st = Stencil {
            nodes: [0; STENCIL_LEN],
            weights: [0.0; STENCIL_LEN],
            len,
        };
        for corner in 0..len {
            let mut flat = 0;
            let mut w = 1.0;
            for l in 0..d {
                let up = (corner >> (d - 1 - l)) & 1;
                flat += (base[l] + up) * self.strides[l];
                w *= if up == 1 { frac[l] } else { 1.0 - frac[l] };
            }
            st.nodes[corner] = flat;
            st.weights[corner] = w;
        }
        st
    }

    /// `I^1[values](x)`; `x` must lie in the node box.
    pub fn interpolate_p1(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        self.check_field(values)?;
        if !self.contains(x) {
            return Err(Error::OutOfBox { point: x.to_vec() });
        }
        Ok(self.interpolate_clamped(values, x))
    }

    /// Interpolation without the box check; `x` is projected onto the box.
    #[inline]
    pub fn interpolate_clamped(&self, values: &[f64], x: &[f64]) -> f64 {
        self.p1_stencil(x).iter().map(|(n, w)| w * values[n]).sum()
    }

    pub(crate) fn check_field(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} entries, grid has {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Uniform time levels `t_k = k * dt`, `k = 0..=steps`, with `steps * dt = T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if steps == 0 {
            return Err(Error::param("steps", "need at least one time step"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    /// Time grid whose step is the closest to `dt` that divides the horizon.
    pub fn with_step_near(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        Self::new(horizon, ((horizon / dt).round() as usize).max(1))
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Number of levels, `steps + 1`.
    pub fn levels(&self) -> usize {
        self.steps + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid2() -> Grid {
        Grid::new(&[0.0, -1.0], &[2.0, 1.0], 0.25).unwrap()
    }

    #[test]
    fn hat_values() {
        assert_eq!(hat_basis(0.0), 1.0);
        assert_eq!(hat_basis(0.5), 0.5);
        assert_eq!(hat_basis(-0.5), 0.5);
        assert_eq!(hat_basis(1.7), 0.0);
    }

    #[test]
    fn p1_basis_is_kronecker_at_nodes() {
        let g = grid2();
        let i = MultiIndex::new(&[3, 4]);
        let xi = g.node(g.ravel(&i).unwrap());
        assert_eq!(g.p1_basis(&i, &xi), 1.0);
        let j = MultiIndex::new(&[4, 4]);
        let xj = g.node(g.ravel(&j).unwrap());
        assert_eq!(g.p1_basis(&i, &xj), 0.0);

        let g1 = Grid::new(&[0.0], &[1.0], 0.25).unwrap();
        let i = MultiIndex::new(&[1]);
        assert_eq!(g1.p1_basis(&i, &[0.25 + 0.125]), 0.5);
    }

    #[test]
    fn p0_basis_half_open_faces() {
        let g = grid2();
        let i = MultiIndex::new(&[2, 3]);
        let mut x = g.node(g.ravel(&i).unwrap());
        assert_eq!(g.p0_basis(&i, &x), 1.0);
        x[0] += 0.125;
        assert_eq!(g.p0_basis(&i, &x), 0.0);
        assert_eq!(g.p0_basis(&i.offset(0, 1), &x), 1.0);

        let outside = [5.0, 0.0];
        assert!((0..g.len()).all(|n| g.p0_basis(&g.unravel(n), &outside) == 0.0));
    }

    #[test]
    fn cell_of_examples() {
        let g = grid2();
        let i = MultiIndex::new(&[2, 3]);
        let n = g.ravel(&i).unwrap();
        let mut x = g.node(n);
        assert_eq!(g.cell_of(&x).unwrap(), n);
        x[0] += 0.125;
        assert_eq!(g.cell_of(&x).unwrap(), g.ravel(&i.offset(0, 1)).unwrap());
        assert_eq!(g.cell_of(&[0.0, -1.0]).unwrap(), 0);
        assert!(g.cell_of(&[2.2, 0.0]).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let g = grid2();
        let c = g.sample(|_| 3.5);
        assert!((g.interpolate_p1(&c, &[0.31, 0.77]).unwrap() - 3.5).abs() < 1e-14);

        let aff = g.sample(|x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        for x in [[0.1, 0.2], [1.99, -0.99], [2.0, 1.0], [0.0, -1.0]] {
            let exact = 2.0 * x[0] - 0.5 * x[1] + 1.0;
            assert!((g.interpolate_p1(&aff, &x).unwrap() - exact).abs() < 1e-13);
        }

        let g1 = Grid::new(&[0.0], &[1.0], 1.0).unwrap();
        assert_eq!(g1.interpolate_p1(&[0.0, 1.0], &[0.5]).unwrap(), 0.5);
        assert!(g1.interpolate_p1(&[0.0, 1.0], &[1.5]).is_err());
    }

    #[test]
    fn partition_of_unity_random_points() {
        let g = Grid::new(&[-1.0, 0.0], &[1.0, 3.0], 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(0.0..=3.0)];
            let st = g.p1_stencil(&x);
            let s: f64 = st.iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() <= 1e-12);
            // explicit basis evaluation over the stencil agrees
            let direct: f64 = st.iter().map(|(n, _)| g.p1_basis(&g.unravel(n), &x)).sum();
            assert!((direct - 1.0).abs() <= 1e-12);

            let cell = g.cell_of(&x).unwrap();
            let p0_sum: f64 = (0..g.len()).map(|n| g.p0_basis(&g.unravel(n), &x)).sum();
            assert_eq!(p0_sum, 1.0);
            assert_eq!(g.p0_basis(&g.unravel(cell), &x), 1.0);
        }
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let err = |dx: f64| {
            let g = Grid::new(&[-1.0, -1.0], &[1.0, 1.0], dx).unwrap();
            let v = g.sample(|x| x[0] * x[0] + x[1] * x[1]);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..4000)
                .map(|_| {
                    let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
                    (g.interpolate_p1(&v, &x).unwrap() - (x[0] * x[0] + x[1] * x[1])).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lattice_in_box_keeps_lattice_points() {
        let g = Grid::lattice_in_box(&[-2.0], &[2.0], 0.048).unwrap();
        assert_eq!(g.counts(), &[83]);
        assert!((g.lower()[0] + 41.0 * 0.048).abs() < 1e-12);
        assert!(Grid::new(&[-2.0], &[2.0], 0.048).is_err());
    }

    #[test]
    fn time_grid_rounds_to_divisor() {
        let tg = TimeGrid::with_step_near(0.25, 0.048f64.powf(2.0 / 3.0) / 2.0).unwrap();
        assert_eq!(tg.steps, 4);
        assert_eq!(tg.time(4), 0.25);
        assert!((tg.dt() - 0.0625).abs() < 1e-16);
        assert!(TimeGrid::with_step_near(1.0, 0.0).is_err());
    }

    #[test]
    fn ravel_unravel_roundtrip() {
        let g = Grid::new(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], 0.5).unwrap();
        for n in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(n)), Some(n));
        }
        assert_eq!(g.ravel(&MultiIndex::new(&[3, 0, 0])), None);
    }
}
