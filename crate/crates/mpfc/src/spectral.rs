//! Internal 2D DFT plumbing shared by the `H^-1` norm machinery and the
//! stepper's spectral preconditioner.
//!
//! The discrete Fourier modes diagonalize every periodic difference operator
//! in this crate; the symbol of the negated 5-point Laplacian on mode
//! `(k, l)` is
//!
//! ```text
//! lambda(k, l) = (4/h^2) * ( sin^2(pi k / m) + sin^2(pi l / n) )
//! ```
//!
//! which is nonnegative and vanishes only on the constant mode.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Planned complex 2D FFT of fixed size `m x n` (row-major, `j` fastest).
pub(crate) struct Fft2 {
    m: usize,
    n: usize,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(m: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            m,
            n,
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
        }
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        assert_eq!(buf.len(), self.m * self.n);
        let (row_fft, col_fft) = if forward {
            (&self.fwd_n, &self.fwd_m)
        } else {
            (&self.inv_n, &self.inv_m)
        };
        let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(self.n) {
            row_fft.process_with_scratch(row, &mut scratch);
        }
        let mut col = vec![Complex64::default(); self.m];
        let mut scratch = vec![Complex64::default(); col_fft.get_inplace_scratch_len()];
        for j in 0..self.n {
            for i in 0..self.m {
                col[i] = buf[i * self.n + j];
            }
            col_fft.process_with_scratch(&mut col, &mut scratch);
            for i in 0..self.m {
                buf[i * self.n + j] = col[i];
            }
        }
    }

    /// Unnormalized forward transform of real data.
    pub fn forward(&self, real: &[f64], out: &mut Vec<Complex64>) {
        assert_eq!(real.len(), self.m * self.n);
        out.clear();
        out.extend(real.iter().map(|&v| Complex64::new(v, 0.0)));
        self.transform(out, true);
    }

    /// Inverse transform with `1/(m n)` normalization; writes the real part.
    ///
    /// The imaginary residue of a spectrum obtained from real data by
    /// [`Fft2::forward`] and modified by a real, conjugate-symmetric symbol is
    /// pure roundoff and is discarded.
    pub fn inverse_real(&self, freq: &mut [Complex64], out: &mut [f64]) {
        assert_eq!(out.len(), self.m * self.n);
        self.transform(freq, false);
        let scale = 1.0 / (self.m as f64 * self.n as f64);
        for (dst, src) in out.iter_mut().zip(freq.iter()) {
            *dst = src.re * scale;
        }
    }
}

/// Symbol of the negated 5-point Laplacian, indexed like the spectrum
/// (`k*n + l`).
pub(crate) fn neg_laplacian_symbol(m: usize, n: usize, h: f64) -> Vec<f64> {
    let mut sym = vec![0.0; m * n];
    let c = 4.0 / (h * h);
    for k in 0..m {
        let sx = (std::f64::consts::PI * k as f64 / m as f64).sin();
        for l in 0..n {
            let sy = (std::f64::consts::PI * l as f64 / n as f64).sin();
            sym[k * n + l] = c * (sx * sx + sy * sy);
        }
    }
    sym
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use crate::ops;

    fn test_field(m: usize, n: usize, h: f64) -> GridFunction {
        GridFunction::sample(m, n, h, |x, y| {
            (1.3 * x).sin() * (0.4 * y).cos() + 0.2 * (x * y).sin()
        })
    }

    #[test]
    fn roundtrip_is_identity() {
        for (m, n) in [(8, 8), (9, 7), (16, 12), (3, 3)] {
            let f = test_field(m, n, 0.5);
            let fft = Fft2::new(m, n);
            let mut spec = Vec::new();
            fft.forward(f.values(), &mut spec);
            let mut back = vec![0.0; m * n];
            fft.inverse_real(&mut spec, &mut back);
            for (a, b) in back.iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let (m, n, h) = (12, 10, 0.7);
        let f = test_field(m, n, h);
        let fft = Fft2::new(m, n);
        let mut spec = Vec::new();
        fft.forward(f.values(), &mut spec);
        let spectral = h * h / (m as f64 * n as f64) * spec.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let physical = f.dot(&f);
        assert!((spectral - physical).abs() < 1e-12 * physical);
    }

    #[test]
    fn symbol_matches_stencil_on_every_mode() {
        let (m, n, h) = (10, 6, 0.5);
        let sym = neg_laplacian_symbol(m, n, h);
        let fft = Fft2::new(m, n);
        let f = test_field(m, n, h);
        // -lap applied in physical space must equal the symbol applied in
        // frequency space.
        let neg_lap = ops::laplacian(&f).map(|v| -v);
        let mut spec_f = Vec::new();
        let mut spec_l = Vec::new();
        fft.forward(f.values(), &mut spec_f);
        fft.forward(neg_lap.values(), &mut spec_l);
        let amp = spec_f.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let lam_max = 8.0 / (h * h);
        for idx in 0..m * n {
            let predicted = spec_f[idx] * sym[idx];
            assert!((predicted - spec_l[idx]).norm() < 1e-12 * amp * lam_max);
        }
    }

    #[test]
    fn symbol_vanishes_only_on_constants() {
        let sym = neg_laplacian_symbol(8, 8, 0.25);
        assert_eq!(sym[0], 0.0);
        assert!(sym.iter().skip(1).all(|&v| v > 0.0));
    }
}
