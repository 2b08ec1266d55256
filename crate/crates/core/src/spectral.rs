//! FFT plumbing: zero-padded 2D linear convolution and a fast Dirichlet
//! solver for `(s - Δ_h) z = f` built on the type-I discrete sine transform.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::par;

type C64 = Complex<f64>;

const ROWS_PER_BLOCK: usize = 16;

fn fft_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [C64], row_len: usize) {
    par::for_each_block_mut(data, row_len, ROWS_PER_BLOCK, |block| {
        let mut scratch = vec![C64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(block, &mut scratch);
    });
}

fn transpose<T: Copy + Default + Send + Sync>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut dst = vec![T::default(); rows * cols];
    par::for_each_row_mut(&mut dst, rows, |c, out| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = src[r * cols + c];
        }
    });
    dst
}

/// Linear convolution of `N x N` arrays through a `2N x 2N` zero-padded FFT.
pub(crate) struct PaddedConvolver {
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl PaddedConvolver {
    pub(crate) fn new(n: usize) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        Self {
            n,
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub(crate) fn padded_len(&self) -> usize {
        self.m
    }

    /// Spectrum of a real `rows x cols` array placed in the top-left corner of
    /// the padded domain. The result is stored transposed (frequency of the
    /// second axis varies slowest); only [`Self::convolve`] consumes it.
    pub(crate) fn forward(&self, data: &[f64], rows: usize, cols: usize) -> Vec<C64> {
        let m = self.m;
        let mut buf = vec![C64::default(); m * m];
        for r in 0..rows {
            for c in 0..cols {
                buf[r * m + c] = C64::new(data[r * cols + c], 0.0);
            }
        }
        fft_rows(&self.fwd, &mut buf[..rows * m], m);
        let mut t = transpose(&buf, m, m);
        fft_rows(&self.fwd, &mut t, m);
        t
    }

    /// `out[i] = Σ_k kernel[i - k] data[k]` for the `N x N` corner, given the
    /// kernel's spectrum from [`Self::forward`].
    pub(crate) fn convolve(&self, kernel_hat: &[C64], data: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut spec = self.forward(data, n, n);
        for (s, k) in spec.iter_mut().zip(kernel_hat) {
            *s *= k;
        }
        fft_rows(&self.inv, &mut spec, m);
        // spec[c'][r]; gather the first n spatial rows back into row-major order
        let mut rows = vec![C64::default(); n * m];
        par::for_each_row_mut(&mut rows, m, |r, out| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = spec[c * m + r];
            }
        });
        fft_rows(&self.inv, &mut rows, m);
        let scale = 1.0 / (m * m) as f64;
        let mut out = vec![0.0; n * n];
        par::for_each_row_mut(&mut out, n, |r, o| {
            for (c, v) in o.iter_mut().enumerate() {
                *v = rows[r * m + c].re * scale;
            }
        });
        out
    }
}

/// Solves `(shift - Δ_h) z = f` exactly for the 5-point Laplacian with zero
/// ghost cells, which the type-I sine transform diagonalises.
pub(crate) struct DirichletSolver {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    eig: Vec<f64>,
}

impl DirichletSolver {
    pub(crate) fn new(n: usize, spacing: f64) -> Self {
        let mut planner = FftPlanner::new();
        let eig = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k + 1) as f64 / (2.0 * (n + 1) as f64)).sin();
                4.0 * s * s / (spacing * spacing)
            })
            .collect();
        Self {
            n,
            fft: planner.plan_fft_forward(2 * (n + 1)),
            eig,
        }
    }

    /// Eigenvalues of the 1D operator `-d²/dx²` (discrete), ascending.
    #[cfg(test)]
    pub(crate) fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    /// Unnormalised DST-I of every row, two rows per complex FFT.
    fn dst_rows(&self, data: &mut [f64]) {
        let n = self.n;
        let len = 2 * (n + 1);
        let fft = &self.fft;
        // n is even, so rows pair up exactly
        par::for_each_block_mut(data, n, 2 * ROWS_PER_BLOCK, |block| {
            let mut buf = vec![C64::default(); len];
            let mut scratch = vec![C64::default(); fft.get_inplace_scratch_len()];
            for pair in block.chunks_mut(2 * n) {
                let (a, b) = pair.split_at_mut(n);
                buf[0] = C64::default();
                buf[n + 1] = C64::default();
                for k in 0..n {
                    buf[k + 1] = C64::new(a[k], b[k]);
                    buf[len - 1 - k] = C64::new(-a[k], -b[k]);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for k in 0..n {
                    let y = buf[k + 1];
                    a[k] = -0.5 * y.im;
                    b[k] = 0.5 * y.re;
                }
            }
        });
    }

    pub(crate) fn solve(&self, rhs: &[f64], shift: f64) -> Vec<f64> {
        let n = self.n;
        let mut a = rhs.to_vec();
        self.dst_rows(&mut a);
        let mut t = transpose(&a, n, n);
        self.dst_rows(&mut t);
        let norm = {
            let s = 2.0 / (n + 1) as f64;
            s * s
        };
        let eig = &self.eig;
        par::for_each_row_mut(&mut t, n, |r, row| {
            for (c, v) in row.iter_mut().enumerate() {
                *v *= norm / (shift + eig[r] + eig[c]);
            }
        });
        self.dst_rows(&mut t);
        let mut z = transpose(&t, n, n);
        self.dst_rows(&mut z);
        z
    }
}
