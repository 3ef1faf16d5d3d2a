//! Periodic FFT helpers on row-major lattices (last axis fastest).
//!
//! Wavenumbers follow the usual FFT ordering. Derivative multipliers zero the
//! Nyquist mode of even-length axes so that spectral derivatives of real data
//! stay real and the discrete derivative is skew-adjoint.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Spectral {
    shape: Vec<usize>,
    lengths: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("shape", &self.shape)
            .field("lengths", &self.lengths)
            .finish()
    }
}

impl Spectral {
    pub fn new(shape: &[usize], lengths: &[f64]) -> Self {
        assert_eq!(shape.len(), lengths.len());
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
            forward,
            inverse,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        for axis in 0..self.shape.len() {
            let n = self.shape[axis];
            if n == 1 {
                continue;
            }
            let stride = self.stride(axis);
            let plan = &plans[axis];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut line = vec![Complex64::default(); n];
            for outer in 0..data.len() / block {
                let base = outer * block;
                for inner in 0..stride {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + inner + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + inner + j * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(real.len(), self.len());
        let mut data: Vec<Complex64> = real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform (normalized); returns the real part.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    pub fn inverse_complex(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut spec, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        spec.iter_mut().for_each(|c| *c *= scale);
        spec
    }

    /// Signed integer mode index for position `i` along `axis`.
    pub fn mode(&self, axis: usize, i: usize) -> i64 {
        let n = self.shape[axis];
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn is_nyquist(&self, axis: usize, i: usize) -> bool {
        let n = self.shape[axis];
        n % 2 == 0 && i == n / 2
    }

    /// Angular wavenumber 2*pi*m/L, Nyquist kept.
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        2.0 * PI * self.mode(axis, i) as f64 / self.lengths[axis]
    }

    /// Angular wavenumber used for derivatives (Nyquist zeroed).
    pub fn deriv_wavenumber(&self, axis: usize, i: usize) -> f64 {
        if self.is_nyquist(axis, i) {
            0.0
        } else {
            self.wavenumber(axis, i)
        }
    }

    /// Multi-index of flat position `flat`.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.shape.len()).rev() {
            out[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
    }

    /// Per-axis derivative wavenumber tables.
    pub fn deriv_tables(&self) -> Vec<Vec<f64>> {
        (0..self.shape.len())
            .map(|a| (0..self.shape[a]).map(|i| self.deriv_wavenumber(a, i)).collect())
            .collect()
    }

    /// Derivative wavenumber of each flat mode along `axis`.
    pub fn deriv_wavenumbers_flat(&self, axis: usize) -> Vec<f64> {
        let stride = self.stride(axis);
        let n = self.shape[axis];
        (0..self.len())
            .map(|flat| self.deriv_wavenumber(axis, (flat / stride) % n))
            .collect()
    }

    /// Apply a real multiplier `m(flat_index)` in Fourier space.
    pub fn apply_multiplier(&self, real: &[f64], mult: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut spec = self.forward(real);
        for (i, c) in spec.iter_mut().enumerate() {
            *c *= mult(i);
        }
        self.inverse(spec)
    }

    pub fn derivative(&self, real: &[f64], axis: usize) -> Vec<f64> {
        let spec = self.forward(real);
        self.derivative_of_spectrum(&spec, axis)
    }

    pub fn derivative_of_spectrum(&self, spec: &[Complex64], axis: usize) -> Vec<f64> {
        let stride = self.stride(axis);
        let n = self.shape[axis];
        let out: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(flat, c)| {
                let k = self.deriv_wavenumber(axis, (flat / stride) % n);
                Complex64::new(-k * c.im, k * c.re)
            })
            .collect();
        self.inverse(out)
    }

    /// Zero every mode with |m_a| > cutoff_fraction * N_a / 2 on some axis.
    pub fn dealias_mask(&self, cutoff_fraction: f64) -> Vec<bool> {
        let mut idx = vec![0; self.shape.len()];
        (0..self.len())
            .map(|flat| {
                self.unravel(flat, &mut idx);
                idx.iter().enumerate().all(|(a, &i)| {
                    let m = self.mode(a, i).unsigned_abs() as f64;
                    !self.is_nyquist(a, i) && m <= cutoff_fraction * self.shape[a] as f64 / 2.0
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let sp = Spectral::new(&[8, 6], &[1.0, 2.0]);
        let data: Vec<f64> = (0..48).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let back = sp.inverse(sp.forward(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let n = 32;
        let sp = Spectral::new(&[n], &[1.0]);
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * 3.0 * x).sin()).collect();
        let df = sp.derivative(&f, 0);
        for (xi, d) in x.iter().zip(&df) {
            let exact = 6.0 * PI * (6.0 * PI * xi).cos();
            assert!((d - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_along_first_axis() {
        let (n0, n1) = (16, 8);
        let sp = Spectral::new(&[n0, n1], &[1.0, 1.0]);
        let mut f = vec![0.0; n0 * n1];
        for i in 0..n0 {
            for j in 0..n1 {
                f[i * n1 + j] = (2.0 * PI * i as f64 / n0 as f64).cos();
            }
        }
        let dx = sp.derivative(&f, 0);
        let dy = sp.derivative(&f, 1);
        for i in 0..n0 {
            let exact = -2.0 * PI * (2.0 * PI * i as f64 / n0 as f64).sin();
            assert!((dx[i * n1 + 3] - exact).abs() < 1e-11);
            assert!(dy[i * n1 + 3].abs() < 1e-11);
        }
    }
}
