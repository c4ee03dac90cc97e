use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square two-dimensional complex FFT.
///
/// `forward` maps grid values `u(x_p)` to series coefficients
/// `c(k) = N^-2 sum_p u(x_p) exp(-i k.x_p)`; `inverse` evaluates the series
/// on the grid. The pair is therefore an exact inverse, and the only volume
/// constant in the crate is the `L^2` factor applied by the inner products.
pub struct Transform2d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Transform2d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        Self::pass(&*self.forward, data, self.n, &mut self.scratch);
        let scale = 1.0 / (self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        Self::pass(&*self.inverse, data, self.n, &mut self.scratch);
    }

    fn pass(fft: &dyn Fft<f64>, data: &mut [Complex64], n: usize, scratch: &mut [Complex64]) {
        fft.process_with_scratch(data, scratch);
        transpose(data, n);
        fft.process_with_scratch(data, scratch);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
