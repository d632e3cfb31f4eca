//! Toeplitz matrix-vector products through a circulant embedding of size 2N.

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dense::DEFAULT_DENSE_CAP;
use crate::error::{check_len, Error, Result};
use crate::gl::ToeplitzDescriptor;

/// A Toeplitz operator with the spectrum of its circulant embedding cached.
#[derive(Clone)]
pub struct ToeplitzOperator {
    descriptor: ToeplitzDescriptor,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ToeplitzOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzOperator")
            .field("size", &self.size())
            .finish_non_exhaustive()
    }
}

impl ToeplitzOperator {
    pub fn new(descriptor: ToeplitzDescriptor) -> Self {
        let n = descriptor.size();
        let len = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);

        // [c_0 .. c_{n-1}, 0, r_{n-1} .. r_1]
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        for (k, &c) in descriptor.first_col().iter().enumerate() {
            spectrum[k].re = c;
        }
        for k in 1..n {
            spectrum[len - k].re = descriptor.first_row()[k];
        }
        forward.process(&mut spectrum);

        Self {
            descriptor,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn descriptor(&self) -> &ToeplitzDescriptor {
        &self.descriptor
    }

    pub fn size(&self) -> usize {
        self.descriptor.size()
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.size(), x.len())?;
        Ok(self.apply(x, false))
    }

    /// `T^T x`; the transposed embedding has the conjugate spectrum.
    pub fn matvec_adjoint(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.size(), x.len())?;
        Ok(self.apply(x, true))
    }

    pub(crate) fn apply(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let n = self.size();
        let len = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())];
        self.forward.process_with_scratch(&mut buf, &mut scratch);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= if transpose { s.conj() } else { *s };
        }
        self.inverse.process_with_scratch(&mut buf, &mut scratch);
        let scale = 1.0 / len as f64;
        buf[..n].iter().map(|c| c.re * scale).collect()
    }

    /// Applies the operator to each column of `x`.
    pub fn matmat(&self, x: &Mat<f64>, transpose: bool) -> Result<Mat<f64>> {
        check_len(self.size(), x.nrows())?;
        let mut out = Mat::zeros(x.nrows(), x.ncols());
        for j in 0..x.ncols() {
            let y = self.apply(x.col_as_slice(j), transpose);
            out.col_as_slice_mut(j).copy_from_slice(&y);
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<Mat<f64>> {
        toeplitz_to_dense(&self.descriptor, DEFAULT_DENSE_CAP)
    }
}

/// Entrywise materialization, refused above `cap`.
pub fn toeplitz_to_dense(descriptor: &ToeplitzDescriptor, cap: usize) -> Result<Mat<f64>> {
    let n = descriptor.size();
    if n > cap {
        return Err(Error::Resource {
            what: "Toeplitz matrix",
            size: n,
            cap,
        });
    }
    Ok(Mat::from_fn(n, n, |i, j| descriptor.entry(i, j)))
}
