//! Periodic spectral operators on [`Grid3`] data.
//!
//! The box `[-L, L]` is treated as one period. Transforms are unnormalised
//! forward, `1/N` inverse.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid3;
use crate::num::Real;

pub struct Fft3<T: Real> {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<T>>; 3],
    inv: [Arc<dyn Fft<T>>; 3],
    /// Angular wavenumbers per axis in FFT order.
    pub k: [Vec<T>; 3],
    /// Wavenumbers for first derivatives: the Nyquist mode of even axes is zeroed.
    pub k_deriv: [Vec<T>; 3],
}

impl<T: Real> Fft3<T> {
    pub fn new(grid: &Grid3<T>) -> Self {
        let mut planner = FftPlanner::new();
        let dims = grid.dims;
        let fwd = dims.map(|n| planner.plan_fft_forward(n));
        let inv = dims.map(|n| planner.plan_fft_inverse(n));
        let k = [0, 1, 2].map(|a| wavenumbers(dims[a], grid.halfwidth[a]));
        let k_deriv = [0, 1, 2].map(|a| {
            let mut kd = k[a].clone();
            if dims[a].is_multiple_of(2) {
                kd[dims[a] / 2] = T::zero();
            }
            kd
        });
        Self {
            dims,
            fwd,
            inv,
            k,
            k_deriv,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inv);
        let scale = T::one() / T::of_usize(data.len());
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }

    fn transform(&self, data: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>; 3]) {
        let [nx, ny, nz] = self.dims;
        assert_eq!(
            data.len(),
            nx * ny * nz,
            "data length does not match FFT grid"
        );
        let max_scratch = plans
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); max_scratch];

        // x lines are contiguous
        plans[0].process_with_scratch(data, &mut scratch);

        let mut line = vec![Complex::new(T::zero(), T::zero()); ny.max(nz)];
        if ny > 1 {
            for k in 0..nz {
                for i in 0..nx {
                    let base = i + nx * ny * k;
                    for j in 0..ny {
                        line[j] = data[base + nx * j];
                    }
                    plans[1].process_with_scratch(&mut line[..ny], &mut scratch);
                    for j in 0..ny {
                        data[base + nx * j] = line[j];
                    }
                }
            }
        }
        if nz > 1 {
            let stride = nx * ny;
            for base in 0..stride {
                for k in 0..nz {
                    line[k] = data[base + stride * k];
                }
                plans[2].process_with_scratch(&mut line[..nz], &mut scratch);
                for k in 0..nz {
                    data[base + stride * k] = line[k];
                }
            }
        }
    }

    /// Applies `f(kx, ky, kz)` as a multiplier in wavenumber space.
    pub fn apply_multiplier(&self, data: &mut [Complex<T>], f: impl Fn(T, T, T) -> Complex<T>) {
        self.forward(data);
        let [nx, ny, _] = self.dims;
        for (idx, v) in data.iter_mut().enumerate() {
            let i = idx % nx;
            let r = idx / nx;
            *v = *v * f(self.k[0][i], self.k[1][r % ny], self.k[2][r / ny]);
        }
        self.inverse(data);
    }

    /// ∂/∂x_axis by spectral differentiation.
    pub fn derivative(&self, data: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut out = data.to_vec();
        self.forward(&mut out);
        let [nx, ny, _] = self.dims;
        for (idx, v) in out.iter_mut().enumerate() {
            let i = idx % nx;
            let r = idx / nx;
            let kk = match axis {
                0 => self.k_deriv[0][i],
                1 => self.k_deriv[1][r % ny],
                _ => self.k_deriv[2][r / ny],
            };
            *v = Complex::new(-v.im * kk, v.re * kk);
        }
        self.inverse(&mut out);
        out
    }

    /// All three first derivatives.
    pub fn gradient(&self, data: &[Complex<T>]) -> [Vec<Complex<T>>; 3] {
        let mut spec = data.to_vec();
        self.forward(&mut spec);
        let [nx, ny, _] = self.dims;
        [0, 1, 2].map(|axis| {
            let mut out = spec.clone();
            for (idx, v) in out.iter_mut().enumerate() {
                let i = idx % nx;
                let r = idx / nx;
                let kk = match axis {
                    0 => self.k_deriv[0][i],
                    1 => self.k_deriv[1][r % ny],
                    _ => self.k_deriv[2][r / ny],
                };
                *v = Complex::new(-v.im * kk, v.re * kk);
            }
            self.inverse(&mut out);
            out
        })
    }
}

/// Angular wavenumbers `2π m / (2L)` in FFT order for `n` samples over `[-L, L]`.
pub fn wavenumbers<T: Real>(n: usize, halfwidth: T) -> Vec<T> {
    let dk = T::PI() / halfwidth;
    (0..n)
        .map(|m| {
            let signed = if m <= (n - 1) / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
            T::lit(signed) * dk
        })
        .collect()
}
