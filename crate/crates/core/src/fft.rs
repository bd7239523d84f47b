//! Thin wrapper over `realfft` sized for one frame length.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

pub type Complex64 = Complex<f64>;

#[derive(Clone)]
pub struct FramePlan {
    size: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for FramePlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FramePlan").field("size", &self.size).finish()
    }
}

impl FramePlan {
    pub fn new(size: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bins(&self) -> usize {
        self.size / 2 + 1
    }

    /// One-sided spectrum of `frame`, zero-padded to the plan size.
    pub fn forward(&self, frame: &[f64]) -> Vec<Complex64> {
        let mut input = self.forward.make_input_vec();
        input[..frame.len()].copy_from_slice(frame);
        let mut output = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        self.forward
            .process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("buffer sizes come from the plan");
        output
    }

    pub fn magnitude(&self, frame: &[f64]) -> Vec<f64> {
        self.forward(frame).iter().map(|c| c.norm()).collect()
    }

    /// Inverse of [`FramePlan::forward`], scaled by `1/N`. The imaginary parts
    /// of the DC and Nyquist bins are ignored.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut input = spectrum.to_vec();
        input[0].im = 0.0;
        if self.size.is_multiple_of(2) {
            let last = input.len() - 1;
            input[last].im = 0.0;
        }
        let mut output = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        self.inverse
            .process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / self.size as f64;
        output.iter_mut().for_each(|v| *v *= scale);
        output
    }
}
