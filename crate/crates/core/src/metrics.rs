//! Error norms and distances between grid functions.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Relative sup- and Euclidean errors, both as fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub sup: f64,
    pub l2: f64,
}

impl ErrorNorms {
    pub fn as_percent(&self) -> (f64, f64) {
        (100.0 * self.sup, 100.0 * self.l2)
    }
}

/// `max|a - b| / max|b|` and `|a - b|_2 / |b|_2` over the entries selected
/// by `mask` (all entries if `None`).
pub fn relative_errors(approx: &[f64], reference: &[f64], mask: Option<&[bool]>) -> Result<ErrorNorms> {
    if approx.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "approximation has {} entries, reference {}",
            approx.len(),
            reference.len()
        )));
    }
    if let Some(m) = mask {
        if m.len() != reference.len() {
            return Err(Error::ShapeMismatch("mask length differs from data".into()));
        }
    }
    let (mut d_sup, mut r_sup, mut d_sq, mut r_sq) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, (a, r)) in approx.iter().zip(reference).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let d = a - r;
        d_sup = d_sup.max(d.abs());
        r_sup = r_sup.max(r.abs());
        d_sq += d * d;
        r_sq += r * r;
    }
    if r_sup == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ErrorNorms {
        sup: d_sup / r_sup,
        l2: (d_sq / r_sq).sqrt(),
    })
}

/// Discrete `L^p` norm `(dx^d sum |v|^p)^{1/p}`; `p = inf` gives the max.
pub fn lp_norm(grid: &Grid, v: &[f64], p: f64) -> Result<f64> {
    grid.check_field(v)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::param("p", format!("must be at least 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(v.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let s: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
    Ok((grid.cell_volume() * s).powf(1.0 / p))
}

/// Wasserstein-1 distance between two piecewise-constant densities on a 1D
/// grid: the `L^1` distance of their cumulative distribution functions.
///
/// Both inputs are normalized to unit mass first.
pub fn wasserstein1_1d(grid: &Grid, a: &[f64], b: &[f64]) -> Result<f64> {
    if grid.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: grid.dim(),
        });
    }
    grid.check_field(a)?;
    grid.check_field(b)?;
    let (ma, mb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if ma <= 0.0 || mb <= 0.0 {
        return Err(Error::ZeroMass);
    }
    // Within a cell both CDFs are linear, so |F_a - F_b| is piecewise linear
    // and its integral has a closed form even when the sign changes.
    let dx = grid.dx();
    let (mut fa, mut fb, mut total) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let d0 = fa - fb;
        fa += x / ma;
        fb += y / mb;
        let d1 = fa - fb;
        total += dx * abs_linear_integral(d0, d1);
    }
    Ok(total)
}

/// `int_0^1 |(1 - s) d0 + s d1| ds`.
fn abs_linear_integral(d0: f64, d1: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs())
    } else {
        0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}
