//! Periodic cubic grids on `[0, 2π)³` and the two WENO kernels the solver is
//! built from: interpolation at characteristic feet, and one-sided HJ-WENO
//! derivatives combined by the Godunov flux of `|∇G|`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::TWO_PI;

/// `n` points per axis with spacing `h = 2π/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid3 {
    n: usize,
}

impl Grid3 {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidArgument(format!("grid needs n >= 8, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Flat index, z fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Stride of `axis` in the flat array.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.n * self.n,
            1 => self.n,
            2 => 1,
            _ => panic!("axis {axis} out of range"),
        }
    }

    /// Flat index of the first node of the line along `axis` through the two
    /// transverse indices `(a, b)`, taken in increasing axis order.
    pub fn line_start(&self, axis: usize, a: usize, b: usize) -> usize {
        match axis {
            0 => self.index(0, a, b),
            1 => self.index(a, 0, b),
            2 => self.index(a, b, 0),
            _ => panic!("axis {axis} out of range"),
        }
    }
}

#[inline]
pub fn wrapped_index(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// A real function sampled on a [`Grid3`], periodic in every direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    grid: Grid3,
    data: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid3, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid3, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data.push(f(grid.coord(i), grid.coord(j), grid.coord(k)));
                }
            }
        }
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid3, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    /// Periodic access with arbitrary integer indices.
    pub fn get_wrapped(&self, i: isize, j: isize, k: isize) -> f64 {
        let n = self.grid.n();
        self.get(wrapped_index(i, n), wrapped_index(j, n), wrapped_index(k, n))
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.grid.index(i, j, k);
        self.data[idx] = v;
    }

    /// Copy of the line along `axis` through transverse indices `(a, b)`.
    pub fn line(&self, axis: usize, a: usize, b: usize) -> Vec<f64> {
        let start = self.grid.line_start(axis, a, b);
        let stride = self.grid.stride(axis);
        (0..self.grid.n()).map(|m| self.data[start + m * stride]).collect()
    }

    /// Spatial mean, summed in a fixed order so that results are reproducible.
    pub fn mean(&self) -> f64 {
        let n = self.grid.n();
        let partial: Vec<f64> = self
            .data
            .par_chunks(n * n)
            .map(|slab| slab.iter().sum::<f64>())
            .collect();
        partial.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// WENO interpolation along `axis` on the line through `(a, b)`, at the
    /// coordinate `target` (wrapped into the period).
    pub fn interp_along(&self, axis: usize, (a, b): (usize, usize), target: f64, bias: Bias) -> f64 {
        let line = self.line(axis, a, b);
        weno_interp_1d(&line, target / self.grid.h(), bias)
    }
}

/// Which side the five-point interpolation stencil leans to. For
/// semi-Lagrangian transport with velocity `c`, `Left` is upwind when `c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bias {
    Left,
    Right,
}

impl Bias {
    pub fn upwind(velocity: f64) -> Self {
        if velocity >= 0.0 {
            Bias::Left
        } else {
            Bias::Right
        }
    }
}

pub const WENO_INTERP_EPS: f64 = 1e-6;

/// Nonlinear weights of the two cubic candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilWeights {
    pub left: f64,
    pub right: f64,
}

/// Cubic Lagrange interpolants on the nodes `{-2,-1,0,1}` and `{-1,0,1,2}`,
/// evaluated at `lam ∈ [0, 1)`.
#[inline]
fn cubic_candidates(f: &[f64; 5], lam: f64) -> (f64, f64) {
    let (lp2, lp1, lm1, lm2) = (lam + 2.0, lam + 1.0, lam - 1.0, lam - 2.0);
    let left = -lp1 * lam * lm1 / 6.0 * f[0] + lp2 * lam * lm1 / 2.0 * f[1]
        - lp2 * lp1 * lm1 / 2.0 * f[2]
        + lp2 * lp1 * lam / 6.0 * f[3];
    let right = -lam * lm1 * lm2 / 6.0 * f[1] + lp1 * lm1 * lm2 / 2.0 * f[2]
        - lp1 * lam * lm2 / 2.0 * f[3]
        + lp1 * lam * lm1 / 6.0 * f[4];
    (left, right)
}

#[inline]
fn cubic_smoothness(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let d2a = a - 2.0 * b + c;
    let d2b = b - 2.0 * c + d;
    let d3 = d - 3.0 * c + 3.0 * b - a;
    d2a * d2a + d2b * d2b + d3 * d3
}

/// Linear weights for which the blend equals the quartic through all five nodes.
#[inline]
fn ideal_weights(lam: f64) -> (f64, f64) {
    ((2.0 - lam) / 4.0, (2.0 + lam) / 4.0)
}

#[inline]
pub fn stencil_weights(f: &[f64; 5], lam: f64) -> StencilWeights {
    let (gl, gr) = ideal_weights(lam);
    let bl = cubic_smoothness(f[0], f[1], f[2], f[3]);
    let br = cubic_smoothness(f[1], f[2], f[3], f[4]);
    // WENO-Z: weights stay near ideal unless the indicators disagree
    let tau = (bl - br).abs();
    let al = gl * (1.0 + (tau / (WENO_INTERP_EPS + bl)).powi(2));
    let ar = gr * (1.0 + (tau / (WENO_INTERP_EPS + br)).powi(2));
    let s = al + ar;
    let w = StencilWeights { left: al / s, right: ar / s };
    debug_assert!(w.left >= 0.0 && w.right >= 0.0 && (w.left + w.right - 1.0).abs() < 1e-12);
    w
}

/// Left-leaning WENO interpolation: `f` holds the nodes `-2..=2` around the
/// cell `[0, 1]` and `lam` is the position inside it.
#[inline]
pub fn weno_interp_stencil(f: &[f64; 5], lam: f64) -> f64 {
    if lam == 0.0 {
        return f[2];
    }
    let (pl, pr) = cubic_candidates(f, lam);
    let w = stencil_weights(f, lam);
    w.left * pl + w.right * pr
}

/// The same blend with the linear weights only (fifth order, not
/// non-oscillatory).
pub fn linear_interp_stencil(f: &[f64; 5], lam: f64) -> f64 {
    let (pl, pr) = cubic_candidates(f, lam);
    let (gl, gr) = ideal_weights(lam);
    gl * pl + gr * pr
}

/// Two-point linear interpolation `(1-λ) f_i + λ f_{i+1}` on a periodic line.
pub fn linear_interp_1d(line: &[f64], s: f64) -> f64 {
    let n = line.len();
    let base = s.floor();
    let lam = s - base;
    let i = wrapped_index(base as isize, n);
    (1.0 - lam) * line[i] + lam * line[(i + 1) % n]
}

/// WENO interpolation on a periodic line at fractional index `s`.
///
/// Exact at the nodes and for cubic data; fifth order on smooth data.
pub fn weno_interp_1d(line: &[f64], s: f64, bias: Bias) -> f64 {
    let n = line.len() as isize;
    let base = s.floor();
    let lam = s - base;
    let i = base as isize;
    let at = |m: isize| line[(i + m).rem_euclid(n) as usize];
    match bias {
        Bias::Left => weno_interp_stencil(&[at(-2), at(-1), at(0), at(1), at(2)], lam),
        Bias::Right => {
            if lam == 0.0 {
                return at(0);
            }
            // mirror image of the left-leaning stencil about the cell
            weno_interp_stencil(&[at(3), at(2), at(1), at(0), at(-1)], 1.0 - lam)
        }
    }
}

/// Shift every node of a periodic line by the same fractional amount:
/// `out[m] = I[line](m - shift)`.
pub fn shift_line(line: &[f64], shift: f64, out: &mut [f64]) {
    let n = line.len();
    debug_assert_eq!(out.len(), n);
    if shift == 0.0 {
        out.copy_from_slice(line);
        return;
    }
    let bias = Bias::upwind(shift);
    // all feet share the same cell offset and position inside the cell
    let s = -shift;
    let base = s.floor();
    let lam = s - base;
    let off = base as isize;
    let ni = n as isize;
    let at = |m: isize| line[m.rem_euclid(ni) as usize];
    for (m, o) in out.iter_mut().enumerate() {
        let c = m as isize + off;
        *o = match bias {
            Bias::Left => weno_interp_stencil(&[at(c - 2), at(c - 1), at(c), at(c + 1), at(c + 2)], lam),
            Bias::Right => {
                if lam == 0.0 {
                    at(c)
                } else {
                    weno_interp_stencil(&[at(c + 3), at(c + 2), at(c + 1), at(c), at(c - 1)], 1.0 - lam)
                }
            }
        };
    }
}

pub const HJ_WENO_EPS: f64 = 1e-6;

/// Fifth-order HJ-WENO combination of five consecutive one-sided differences,
/// ordered from farthest-upwind to farthest-downwind.
#[inline]
pub fn hj_weno5(v1: f64, v2: f64, v3: f64, v4: f64, v5: f64) -> f64 {
    let phi1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0;
    let phi2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0;
    let phi3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0;
    let s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3).powi(2) + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3).powi(2);
    let s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4).powi(2) + 0.25 * (v2 - v4).powi(2);
    let s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5).powi(2) + 0.25 * (3.0 * v3 - 4.0 * v4 + v5).powi(2);
    let a1 = 0.1 / (s1 + HJ_WENO_EPS).powi(2);
    let a2 = 0.6 / (s2 + HJ_WENO_EPS).powi(2);
    let a3 = 0.3 / (s3 + HJ_WENO_EPS).powi(2);
    (a1 * phi1 + a2 * phi2 + a3 * phi3) / (a1 + a2 + a3)
}

/// Godunov selection for `|p|`: `max(max(D⁻,0)², min(D⁺,0)²)`.
#[inline]
pub fn godunov_sq(minus: f64, plus: f64) -> f64 {
    let a = minus.max(0.0);
    let b = plus.min(0.0);
    (a * a).max(b * b)
}

/// One-sided HJ-WENO derivatives `(D⁻, D⁺)` at node `m` of a periodic line,
/// with grid spacing `h`.
pub fn one_sided_derivatives(line: &[f64], m: usize, h: f64) -> (f64, f64) {
    let n = line.len() as isize;
    let at = |o: isize| line[(m as isize + o).rem_euclid(n) as usize];
    // d[o] = (u_{m+o} - u_{m+o-1}) / h for o = -2..=3
    let d = |o: isize| (at(o) - at(o - 1)) / h;
    let minus = hj_weno5(d(-2), d(-1), d(0), d(1), d(2));
    let plus = hj_weno5(d(3), d(2), d(1), d(0), d(-1));
    (minus, plus)
}

/// `|∇u + slope|` at node `(i,j,k)` with one-sided HJ-WENO derivatives and the
/// Godunov flux. `slope` is a constant gradient added to the periodic part
/// (for `G = x + U` it is `e₁`).
pub fn godunov_gradient_magnitude(field: &ScalarField3, (i, j, k): (usize, usize, usize), slope: [f64; 3]) -> f64 {
    let h = field.grid().h();
    let lines = [field.line(0, j, k), field.line(1, i, k), field.line(2, i, j)];
    let pos = [i, j, k];
    let mut sum = 0.0;
    for axis in 0..3 {
        let (dm, dp) = one_sided_derivatives(&lines[axis], pos[axis], h);
        sum += godunov_sq(dm + slope[axis], dp + slope[axis]);
    }
    sum.sqrt()
}

/// Apply `f(line, out)` to every line along `axis` (in parallel), returning
/// the outputs in line-major order: line `a*n + b` holds transverse indices
/// `(a, b)`.
pub(crate) fn map_lines<F>(field: &ScalarField3, axis: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &[f64], &mut [f64]) + Sync,
{
    let grid = field.grid();
    let n = grid.n();
    let stride = grid.stride(axis);
    let data = field.data();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(n).enumerate().for_each_init(
        || vec![0.0; n],
        |line, (id, dst)| {
            let start = grid.line_start(axis, id / n, id % n);
            for (m, v) in line.iter_mut().enumerate() {
                *v = data[start + m * stride];
            }
            f(id, line, dst);
        },
    );
    out
}

/// Inverse of the layout produced by [`map_lines`].
pub(crate) fn scatter_lines(grid: Grid3, axis: usize, lines: &[f64], mut put: impl FnMut(usize, f64)) {
    let n = grid.n();
    let stride = grid.stride(axis);
    for (id, chunk) in lines.chunks_exact(n).enumerate() {
        let start = grid.line_start(axis, id / n, id % n);
        for (m, &v) in chunk.iter().enumerate() {
            put(start + m * stride, v);
        }
    }
}

/// `|∇u + slope|` at every node; same values as [`godunov_gradient_magnitude`].
pub fn godunov_magnitude_field(field: &ScalarField3, slope: [f64; 3]) -> ScalarField3 {
    let grid = field.grid();
    let h = grid.h();
    let mut acc = vec![0.0; grid.len()];
    for (axis, &sl) in slope.iter().enumerate() {
        let contrib = map_lines(field, axis, |_, line, out| {
            for (m, o) in out.iter_mut().enumerate() {
                let (dm, dp) = one_sided_derivatives(line, m, h);
                *o = godunov_sq(dm + sl, dp + sl);
            }
        });
        scatter_lines(grid, axis, &contrib, |idx, v| acc[idx] += v);
    }
    acc.par_iter_mut().for_each(|v| *v = v.sqrt());
    ScalarField3 { grid, data: acc }
}
