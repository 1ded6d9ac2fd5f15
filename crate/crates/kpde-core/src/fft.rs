//! Crate-internal FFT helpers over the flattened periodic grid.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

/// Forward/inverse transforms for one grid layout (d = 1 or 2, row-major,
/// x fastest). Inverse is normalized by 1/n per axis.
pub(crate) struct GridFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl GridFft {
    pub fn new(spec: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.points_per_axis());
        let inverse = planner.plan_fft_inverse(spec.points_per_axis());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len())
            .max(spec.points_per_axis());
        Self {
            n: spec.points_per_axis(),
            dim: spec.dim(),
            forward,
            inverse,
            scratch: vec![Complex::default(); scratch_len],
        }
    }

    pub fn forward(&mut self, data: &mut [Complex<f64>]) {
        self.transform(data, true);
    }

    /// Inverse transform including the 1/n^d normalization.
    pub fn inverse(&mut self, data: &mut [Complex<f64>]) {
        self.transform(data, false);
        let scale = 1.0 / (self.n as f64).powi(self.dim as i32);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&mut self, data: &mut [Complex<f64>], fwd: bool) {
        debug_assert_eq!(data.len(), self.n.pow(self.dim as u32));
        let plan = if fwd { &self.forward } else { &self.inverse };
        // Rows (x direction) are contiguous.
        plan.process_with_scratch(data, &mut self.scratch);
        if self.dim == 2 {
            // Columns: gather with stride n, transform, scatter back.
            let n = self.n;
            let mut col = vec![Complex::default(); n];
            for ix in 0..n {
                for iy in 0..n {
                    col[iy] = data[iy * n + ix];
                }
                plan.process_with_scratch(&mut col, &mut self.scratch);
                for iy in 0..n {
                    data[iy * n + ix] = col[iy];
                }
            }
        }
    }
}

/// Copy a real field into a complex buffer.
pub(crate) fn to_complex(values: &[f64], out: &mut Vec<Complex<f64>>) {
    out.clear();
    out.extend(values.iter().map(|&v| Complex::new(v, 0.0)));
}

/// Real parts of a complex buffer.
pub(crate) fn to_real(values: &[Complex<f64>], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(values) {
        *o = v.re;
    }
}
