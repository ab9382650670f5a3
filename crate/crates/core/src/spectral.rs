//! Discrete Fourier diagonalization of periodic operators.
//!
//! Two Laplacian symbols are available: the symbol of the centered stencil,
//! `−(2/h²) Σ (1 − cos(2πk/n))`, which reproduces [`ScalarField::laplacian`]
//! up to roundoff, and the analytic symbol `−4π²|k|²`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::fields::{ScalarField, TorusGrid};
use crate::{Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    /// Eigenvalues of the `2d+1`-point stencil.
    Stencil,
    /// Continuum eigenvalues `−4π²|k|²`.
    Analytic,
}

pub struct SpectralOps<T: Real> {
    grid: TorusGrid,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    stencil: Vec<T>,
    analytic: Vec<T>,
}

impl<T: Real> SpectralOps<T> {
    pub fn new(grid: TorusGrid) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let h = grid.h::<T>();
        let two = T::lit(2.0);
        let two_pi = T::TAU();
        let per_axis_stencil: Vec<T> = (0..n)
            .map(|k| -(two / (h * h)) * (T::one() - (two_pi * T::from_count(k) * h).cos()))
            .collect();
        let per_axis_analytic: Vec<T> = (0..n)
            .map(|k| {
                let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let w = two_pi * T::lit(signed);
                -(w * w)
            })
            .collect();

        let len = grid.len();
        let mut stencil = vec![T::zero(); len];
        let mut analytic = vec![T::zero(); len];
        for i in 0..len {
            let c = grid.coords(i);
            for axis in 0..grid.d() {
                stencil[i] = stencil[i] + per_axis_stencil[c[axis]];
                analytic[i] = analytic[i] + per_axis_analytic[c[axis]];
            }
        }
        Self {
            grid,
            forward,
            inverse,
            stencil,
            analytic,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn symbol(&self, which: Symbol) -> &[T] {
        match which {
            Symbol::Stencil => &self.stencil,
            Symbol::Analytic => &self.analytic,
        }
    }

    fn transform(&self, buf: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let n = self.grid.n();
        let d = self.grid.d();
        for axis in 0..d {
            let s = self.grid.stride(axis);
            if s == 1 {
                buf.par_chunks_mut(n).for_each(|line| fft.process(line));
                continue;
            }
            // lines along a strided axis: gather, transform, scatter
            let block = n * s;
            let outer = buf.len() / block;
            let lines: Vec<(usize, Vec<Complex<T>>)> = (0..outer * s)
                .into_par_iter()
                .map(|line| {
                    let base = (line / s) * block + line % s;
                    let mut tmp: Vec<Complex<T>> = (0..n).map(|k| buf[base + k * s]).collect();
                    fft.process(&mut tmp);
                    (base, tmp)
                })
                .collect();
            for (base, tmp) in lines {
                for (k, v) in tmp.into_iter().enumerate() {
                    buf[base + k * s] = v;
                }
            }
        }
    }

    pub fn forward(&self, f: &ScalarField<T>) -> Result<Vec<Complex<T>>> {
        self.grid.check_same(f.grid())?;
        let mut buf: Vec<Complex<T>> = f.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, &self.forward);
        Ok(buf)
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> ScalarField<T> {
        self.transform(&mut buf, &self.inverse);
        let scale = T::one() / T::from_count(self.grid.len());
        let values = buf.into_iter().map(|c| c.re * scale).collect();
        ScalarField::from_values(self.grid, values).expect("length matches grid")
    }

    /// Applies a diagonal multiplier in Fourier space.
    pub fn apply<F>(&self, f: &ScalarField<T>, multiplier: F) -> Result<ScalarField<T>>
    where
        F: Fn(usize) -> T + Sync,
    {
        let mut hat = self.forward(f)?;
        hat.par_iter_mut()
            .enumerate()
            .for_each(|(i, c)| *c = *c * multiplier(i));
        Ok(self.inverse_real(hat))
    }

    pub fn laplacian(&self, f: &ScalarField<T>, which: Symbol) -> Result<ScalarField<T>> {
        let sym = self.symbol(which);
        self.apply(f, |i| sym[i])
    }

    /// Solves `(I − dt·Δ_h) u = rhs` with the stencil symbol.
    pub fn solve_shifted(&self, rhs: &ScalarField<T>, dt: T) -> Result<ScalarField<T>> {
        let sym = &self.stencil;
        self.apply(rhs, |i| T::one() / (T::one() - dt * sym[i]))
    }
}
