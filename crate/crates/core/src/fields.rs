//! Periodic uniform grids on the unit torus and scalar fields living on them.
//!
//! Grid points sit at `x = i·h` with `h = 1/n` on every axis and values are
//! stored row-major (last axis fastest). All stencils wrap modulo `n`.
//!
//! Pointwise operators are evaluated in parallel; reductions go through
//! [`fixed_order_sum`], which sums fixed-length blocks and then the block
//! sums in index order, so the result does not depend on the thread count.

use rayon::prelude::*;

use crate::{Error, Real, Result};

/// Maximum spatial dimension supported by the grid.
pub const MAX_DIM: usize = 3;

/// Evaluation policy for grid loops. Both policies produce bitwise-identical
/// results; `Serial` exists for verification and for tiny grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::key("d", format!("dimension must be 2 or 3, got {d}")));
        }
        if n < 16 {
            return Err(Error::key("n", format!("need at least 16 cells per axis, got {n}")));
        }
        Ok(Self { d, n })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `1/n`.
    #[inline]
    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_count(self.n)
    }

    /// Volume of one cell, `h^d`.
    #[inline]
    pub fn cell_volume<T: Real>(&self) -> T {
        self.h::<T>().powi(self.d as i32)
    }

    /// Index stride of `axis` (axis 0 is the slowest).
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Integer coordinates of a flat index; unused trailing axes are zero.
    #[inline]
    pub fn coords(&self, index: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        let mut rem = index;
        for axis in (0..self.d).rev() {
            c[axis] = rem % self.n;
            rem /= self.n;
        }
        c
    }

    #[inline]
    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.n + (c % self.n))
    }

    /// Physical position of a grid point in `[0,1)^d`.
    #[inline]
    pub fn point<T: Real>(&self, index: usize) -> [T; MAX_DIM] {
        let c = self.coords(index);
        let h = self.h::<T>();
        let mut x = [T::zero(); MAX_DIM];
        for axis in 0..self.d {
            x[axis] = T::from_count(c[axis]) * h;
        }
        x
    }

    /// Index of the grid point nearest to a physical position (wrapping).
    pub fn nearest_index<T: Real>(&self, x: &[T]) -> usize {
        let n = T::from_count(self.n);
        let mut c = [0usize; MAX_DIM];
        for axis in 0..self.d {
            let v = (x[axis] * n).round();
            let v = v.to_i64().unwrap_or(0).rem_euclid(self.n as i64);
            c[axis] = v as usize;
        }
        self.index(&c[..self.d])
    }

    /// Neighbour of `index` one cell forward (`+1`) or backward along `axis`.
    #[inline]
    pub fn neighbor(&self, index: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let c = (index / s) % self.n;
        if forward {
            if c + 1 == self.n {
                index + s - self.n * s
            } else {
                index + s
            }
        } else if c == 0 {
            index + self.n * s - s
        } else {
            index - s
        }
    }

    pub(crate) fn describe(&self) -> String {
        format!("d={} n={}", self.d, self.n)
    }

    pub fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                expected: self.describe(),
                found: other.describe(),
            });
        }
        Ok(())
    }
}

/// Minimum-image difference of two torus coordinates, in `[-1/2, 1/2]`.
#[inline]
pub fn periodic_delta<T: Real>(a: T, b: T) -> T {
    let diff = a - b;
    diff - diff.round()
}

/// Periodic (minimum-image) Euclidean distance between two points.
#[inline]
pub fn periodic_distance<T: Real>(a: &[T], b: &[T], d: usize) -> T {
    let mut acc = T::zero();
    for axis in 0..d {
        let dx = periodic_delta(a[axis], b[axis]);
        acc = acc + dx * dx;
    }
    acc.sqrt()
}

/// Deterministic sum: contiguous blocks of `block` entries are summed
/// sequentially, then the block sums are added in block order.
pub fn fixed_order_sum<T: Real>(values: &[T], block: usize, exec: Exec) -> T {
    let block = block.max(1);
    let partial: Vec<T> = match exec {
        Exec::Serial => values
            .chunks(block)
            .map(|c| c.iter().fold(T::zero(), |a, &v| a + v))
            .collect(),
        Exec::Parallel => values
            .par_chunks(block)
            .map(|c| c.iter().fold(T::zero(), |a, &v| a + v))
            .collect(),
    };
    partial.into_iter().fold(T::zero(), |a, v| a + v)
}

/// Real-valued field on a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: TorusGrid,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn constant(grid: TorusGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_values(grid: TorusGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: format!("{} values for {}", grid.len(), grid.describe()),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: TorusGrid, f: F) -> Self
    where
        F: Fn(&[T]) -> T + Sync,
    {
        let d = grid.d();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point::<T>(i);
                f(&x[..d])
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, index: usize) -> T {
        self.values[index]
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(T) -> T + Sync,
    {
        Self {
            grid: self.grid,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(T, T) -> T + Sync,
    {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    /// Largest absolute value and its index.
    pub fn max_abs(&self) -> (T, usize) {
        let mut best = (T::zero(), 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v.abs() > best.0 {
                best = (v.abs(), i);
            }
        }
        best
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .fold(T::neg_infinity(), |a, &v| if v > a { v } else { a })
    }

    /// Midpoint-rule integral `h^d · Σ values` over the unit torus.
    pub fn integrate(&self) -> T {
        self.integrate_with(Exec::Parallel)
    }

    pub fn integrate_with(&self, exec: Exec) -> T {
        fixed_order_sum(&self.values, self.grid.n(), exec) * self.grid.cell_volume::<T>()
    }

    /// Second-order `2d+1`-point periodic Laplacian.
    pub fn laplacian(&self) -> Self {
        self.laplacian_with(Exec::Parallel)
    }

    pub fn laplacian_with(&self, exec: Exec) -> Self {
        let grid = self.grid;
        let h = grid.h::<T>();
        let inv_h2 = T::one() / (h * h);
        let two = T::lit(2.0);
        let f = &self.values;
        let point = |i: usize| {
            let mut acc = T::zero();
            for axis in 0..grid.d() {
                let fp = f[grid.neighbor(i, axis, true)];
                let fm = f[grid.neighbor(i, axis, false)];
                acc = acc + (fp - two * f[i] + fm);
            }
            acc * inv_h2
        };
        let values = match exec {
            Exec::Serial => (0..grid.len()).map(point).collect(),
            Exec::Parallel => (0..grid.len()).into_par_iter().map(point).collect(),
        };
        Self { grid, values }
    }

    /// Pointwise `Σ_axes ((f_{i+e} − f_{i−e}) / 2h)²`.
    pub fn grad_sq(&self) -> Self {
        self.grad_sq_with(Exec::Parallel)
    }

    pub fn grad_sq_with(&self, exec: Exec) -> Self {
        let grid = self.grid;
        let inv_2h = T::one() / (T::lit(2.0) * grid.h::<T>());
        let f = &self.values;
        let point = |i: usize| {
            let mut acc = T::zero();
            for axis in 0..grid.d() {
                let g = (f[grid.neighbor(i, axis, true)] - f[grid.neighbor(i, axis, false)]) * inv_2h;
                acc = acc + g * g;
            }
            acc
        };
        let values = match exec {
            Exec::Serial => (0..grid.len()).map(point).collect(),
            Exec::Parallel => (0..grid.len()).into_par_iter().map(point).collect(),
        };
        Self { grid, values }
    }

    /// Pointwise `Σ_axes ((f_{i+e} − f_i) / h)²`.
    ///
    /// Half of its integral is the discrete Dirichlet energy whose gradient
    /// is exactly `−laplacian`, which makes it the consistent choice when
    /// balancing energy against the stencil dynamics.
    pub fn forward_grad_sq(&self) -> Self {
        let grid = self.grid;
        let inv_h = T::one() / grid.h::<T>();
        let f = &self.values;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = T::zero();
                for axis in 0..grid.d() {
                    let g = (f[grid.neighbor(i, axis, true)] - f[i]) * inv_h;
                    acc = acc + g * g;
                }
                acc
            })
            .collect();
        Self { grid, values }
    }

    /// Largest centered-difference gradient magnitude.
    pub fn max_grad(&self) -> T {
        self.grad_sq().max().sqrt()
    }
}

impl<T: Real> std::ops::Index<usize> for ScalarField<T> {
    type Output = T;

    fn index(&self, index: usize) -> &T {
        &self.values[index]
    }
}
