//! Discrete norms on periodic cell-centered fields, including the lattice
//! `H^-1` norm that the pseudo energy of the damped-wave flow is built on.
//!
//! All norms carry the `h^2` cell-area weight, so they converge to their
//! continuum counterparts under refinement. The `H^-1` quantities apply only
//! to mean-zero fields (the inverse Laplacian is defined on the complement of
//! the constants); [`MeanZeroField`] encodes that restriction in the types.
//! Inequalities relating these norms hold with explicit constants that depend
//! only on the domain lengths; the randomized suite in [`crate::verify`]
//! exercises them with the constants frozen here.

use crate::error::Error;
use crate::grid::GridFunction;
use crate::ops;
use crate::spectral::{neg_laplacian_symbol, Fft2};
use num_complex::Complex64;

/// `sqrt(h^2 * sum(phi^2))`.
pub fn norm2(phi: &GridFunction) -> f64 {
    phi.dot(phi).sqrt()
}

/// `(h^2 * sum(phi^4))^(1/4)`.
pub fn norm4(phi: &GridFunction) -> f64 {
    let h2 = phi.h() * phi.h();
    (h2 * phi.values().iter().map(|&v| v * v * v * v).sum::<f64>()).powf(0.25)
}

/// `max |phi|`.
pub fn norm_inf(phi: &GridFunction) -> f64 {
    phi.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// Staggered gradient 2-norm.
pub fn grad_norm2(phi: &GridFunction) -> f64 {
    ops::gradient(phi).norm2_sq().sqrt()
}

/// Staggered gradient 4-norm.
pub fn grad_norm4(phi: &GridFunction) -> f64 {
    ops::gradient(phi).norm4_pow4().powf(0.25)
}

/// First Sobolev norm: `sqrt(|phi|_2^2 + |grad phi|_2^2)`.
pub fn norm_h1(phi: &GridFunction) -> f64 {
    (phi.dot(phi) + ops::gradient(phi).norm2_sq()).sqrt()
}

/// Second Sobolev norm: `sqrt(|phi|_2^2 + |grad phi|_2^2 + |lap phi|_2^2)`.
pub fn norm_h2(phi: &GridFunction) -> f64 {
    let lap = ops::laplacian(phi);
    (phi.dot(phi) + ops::gradient(phi).norm2_sq() + lap.dot(&lap)).sqrt()
}

/// Copy of `phi` with its mean subtracted.
pub fn demean(phi: &GridFunction) -> GridFunction {
    let mu = phi.mean();
    phi.map(|v| v - mu)
}

/// Constant `C` of the discrete embedding `|phi|_4 <= C * |phi|_H1`,
/// valid for every periodic grid function on an `lx` by `ly` domain.
pub fn l4_embedding_constant(lx: f64, ly: f64) -> f64 {
    let cx = (1.0 / lx).max(lx);
    let cy = (1.0 / ly).max(ly);
    (2.0 * cx.max(cy)).powf(0.25)
}

/// Constant `C` of the discrete embedding `|phi|_inf^2 <= C * |phi|_H2^2`.
pub fn sup_embedding_constant(lx: f64, ly: f64) -> f64 {
    4.0 * (1.0 / (lx * ly))
        .max(lx / ly)
        .max(ly / lx)
        .max(lx * ly / 2.0)
}

/// Poincare constant for mean-zero fields: `|phi|_2 <= C * |grad phi|_2`.
///
/// `max(lx, ly) / 2` overshoots the sharp constant by design; the check that
/// uses it is informational.
pub fn poincare_constant(lx: f64, ly: f64) -> f64 {
    lx.max(ly) / 2.0
}

/// Constant `C` of `|grad phi|_4 <= C * |lap phi|_2` for mean-zero fields,
/// derived from the `L4` embedding and the Poincare constant.
pub fn grad_l4_embedding_constant(lx: f64, ly: f64) -> f64 {
    let c3 = poincare_constant(lx, ly);
    l4_embedding_constant(lx, ly) * (c3 * c3 + 1.0).sqrt()
}

/// Borrow of a grid function whose mean is negligible against its amplitude.
///
/// Construction verifies `|mean| <= 1e-12 * |phi|_inf` (the zero field
/// passes), which is what the inverse Laplacian and the `H^-1` norm require.
#[derive(Debug)]
pub struct MeanZeroField<'a> {
    inner: &'a GridFunction,
}

impl<'a> MeanZeroField<'a> {
    pub fn new(phi: &'a GridFunction) -> Result<Self, Error> {
        let mean = phi.mean();
        let amplitude = norm_inf(phi);
        if mean.abs() <= 1e-12 * amplitude || (mean == 0.0 && amplitude == 0.0) {
            Ok(MeanZeroField { inner: phi })
        } else {
            Err(Error::NonZeroMean { mean, amplitude })
        }
    }

    pub fn get(&self) -> &GridFunction {
        self.inner
    }
}

/// FFT-backed inverse of the negated 5-point Laplacian on mean-zero fields.
///
/// Immutable after construction and shareable across threads; all methods
/// take `&self`.
pub struct PoissonSolver {
    m: usize,
    n: usize,
    h: f64,
    fft: Fft2,
    /// Symbol of `-lap`; entry 0 (the constant mode) is zero and is pinned
    /// rather than divided by.
    lambda: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(m: usize, n: usize, h: f64) -> Self {
        PoissonSolver {
            m,
            n,
            h,
            fft: Fft2::new(m, n),
            lambda: neg_laplacian_symbol(m, n, h),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn check_shape(&self, phi: &GridFunction) -> Result<(), Error> {
        if phi.m() != self.m || phi.n() != self.n {
            return Err(Error::ShapeMismatch {
                expected_m: self.m,
                expected_n: self.n,
                got_m: phi.m(),
                got_n: phi.n(),
            });
        }
        Ok(())
    }

    /// Solve `-lap(psi) = phi` with `mean(psi) = 0`.
    pub fn inv_laplacian(&self, phi: &MeanZeroField) -> Result<GridFunction, Error> {
        self.check_shape(phi.get())?;
        let mut spec = Vec::new();
        self.fft.forward(phi.get().values(), &mut spec);
        spec[0] = Complex64::default();
        for (c, &lam) in spec.iter_mut().zip(&self.lambda).skip(1) {
            *c /= lam;
        }
        let mut out = GridFunction::zeros(self.m, self.n, self.h);
        self.fft.inverse_real(&mut spec, out.values_mut());
        Ok(out)
    }

    /// `H^-1` inner product `h^2 * <a, (-lap)^{-1} b>`, computed spectrally
    /// (exactly symmetric in its arguments).
    pub fn inner_minus1(&self, a: &MeanZeroField, b: &MeanZeroField) -> Result<f64, Error> {
        self.check_shape(a.get())?;
        self.check_shape(b.get())?;
        let mut sa = Vec::new();
        let mut sb = Vec::new();
        self.fft.forward(a.get().values(), &mut sa);
        self.fft.forward(b.get().values(), &mut sb);
        let mut acc = 0.0;
        for idx in 1..self.m * self.n {
            acc += (sa[idx].conj() * sb[idx]).re / self.lambda[idx];
        }
        Ok(acc * self.h * self.h / (self.m as f64 * self.n as f64))
    }

    /// `H^-1` norm `sqrt(h^2 * <phi, (-lap)^{-1} phi>)`.
    pub fn norm_minus1(&self, phi: &MeanZeroField) -> Result<f64, Error> {
        Ok(self.inner_minus1(phi, phi)?.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_mode(m: usize, n: usize, h: f64, k: usize, l: usize, amp: f64) -> GridFunction {
        let (lx, ly) = (m as f64 * h, n as f64 * h);
        GridFunction::sample(m, n, h, |x, y| {
            amp * (2.0 * PI * k as f64 * x / lx).cos() * (2.0 * PI * l as f64 * y / ly).cos()
        })
    }

    fn lam(m: usize, n: usize, h: f64, k: usize, l: usize) -> f64 {
        4.0 / (h * h)
            * ((PI * k as f64 / m as f64).sin().powi(2) + (PI * l as f64 / n as f64).sin().powi(2))
    }

    #[test]
    fn constant_field_norms() {
        let c = GridFunction::constant(16, 8, 0.5, -2.0);
        let area: f64 = 8.0 * 4.0;
        assert!((norm2(&c) - 2.0 * area.sqrt()).abs() < 1e-12);
        assert!((norm4(&c) - 2.0 * area.powf(0.25)).abs() < 1e-12);
        assert_eq!(norm_inf(&c), 2.0);
        assert_eq!(grad_norm2(&c), 0.0);
    }

    #[test]
    fn single_axis_mode_l2_norm() {
        // For 1 <= k with 2k not a multiple of m, sum of cos^2 over the grid
        // is exactly m*n/2.
        let (m, n, h, k) = (16, 12, 0.5, 3);
        let phi = cos_mode(m, n, h, k, 0, 0.7);
        let expect = 0.7 * (m as f64 * h * n as f64 * h / 2.0).sqrt();
        assert!((norm2(&phi) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn mode_sobolev_norms_follow_the_symbol() {
        let (m, n, h, k, l) = (24, 18, 0.25, 2, 5);
        let phi = cos_mode(m, n, h, k, l, 1.3);
        let lam = lam(m, n, h, k, l);
        let l2 = norm2(&phi);
        assert!((grad_norm2(&phi) - lam.sqrt() * l2).abs() < 1e-11 * grad_norm2(&phi));
        let h1 = (1.0 + lam).sqrt() * l2;
        let h2 = (1.0 + lam + lam * lam).sqrt() * l2;
        assert!((norm_h1(&phi) - h1).abs() < 1e-11 * h1);
        assert!((norm_h2(&phi) - h2).abs() < 1e-11 * h2);
    }

    #[test]
    fn inv_laplacian_inverts_the_stencil() {
        for (m, n) in [(32, 24), (9, 9), (3, 5)] {
            let h = 0.5;
            let raw = GridFunction::sample(m, n, h, |x, y| {
                (0.9 * x).sin() * (1.7 * y).cos() + 0.1 * (x + y).sin()
            });
            let phi = demean(&raw);
            let mz = MeanZeroField::new(&phi).unwrap();
            let solver = PoissonSolver::new(m, n, h);
            let psi = solver.inv_laplacian(&mz).unwrap();
            let neg_lap = crate::ops::laplacian(&psi).map(|v| -v);
            let err = norm2(&GridFunction::lin_comb(1.0, &neg_lap, -1.0, &phi));
            assert!(err <= 1e-12 * norm2(&phi).max(1e-300), "residual {err:e} on {m}x{n}");
            assert!(psi.mean().abs() < 1e-12 * norm_inf(&psi).max(1e-300));
        }
    }

    #[test]
    fn inv_laplacian_scales_single_modes() {
        let (m, n, h, k, l) = (16, 16, 0.5, 1, 2);
        let phi = cos_mode(m, n, h, k, l, 0.4);
        let mz = MeanZeroField::new(&phi).unwrap();
        let solver = PoissonSolver::new(m, n, h);
        let psi = solver.inv_laplacian(&mz).unwrap();
        let lam = lam(m, n, h, k, l);
        for (a, b) in psi.values().iter().zip(phi.values()) {
            assert!((a - b / lam).abs() < 1e-13);
        }
    }

    #[test]
    fn minus1_norm_of_single_mode_matches_symbol() {
        for (m, k, l) in [(8usize, 1usize, 0usize), (8, 2, 3), (32, 1, 1), (32, 7, 0)] {
            let (n, h) = (m, 32.0 / m as f64);
            let phi = cos_mode(m, n, h, k, l, 0.9);
            let mz = MeanZeroField::new(&phi).unwrap();
            let solver = PoissonSolver::new(m, n, h);
            let got = solver.norm_minus1(&mz).unwrap();
            let expect = norm2(&phi) / lam(m, n, h, k, l).sqrt();
            assert!(
                (got - expect).abs() <= 1e-12 * expect,
                "m={m} mode=({k},{l}): {got:e} vs {expect:e}"
            );
        }
    }

    #[test]
    fn minus1_inner_product_is_symmetric_and_positive() {
        let (m, n, h) = (12, 10, 0.4);
        let a = demean(&GridFunction::sample(m, n, h, |x, y| (x * 0.8).sin() * y));
        let b = demean(&GridFunction::sample(m, n, h, |x, y| (y * 1.1).cos() + 0.2 * x));
        let solver = PoissonSolver::new(m, n, h);
        let (za, zb) = (MeanZeroField::new(&a).unwrap(), MeanZeroField::new(&b).unwrap());
        let ab = solver.inner_minus1(&za, &zb).unwrap();
        let ba = solver.inner_minus1(&zb, &za).unwrap();
        assert_eq!(ab, ba);
        let aa = solver.inner_minus1(&za, &za).unwrap();
        let bb = solver.inner_minus1(&zb, &zb).unwrap();
        assert!(aa > 0.0 && bb > 0.0);
        assert!(ab * ab <= aa * bb * (1.0 + 1e-12));
        // Physical-space evaluation agrees with the spectral one.
        let psi = solver.inv_laplacian(&zb).unwrap();
        assert!((a.dot(&psi) - ab).abs() < 1e-11 * ab.abs().max(1e-300));
    }

    #[test]
    fn mean_zero_gate_rejects_offsets() {
        let offset = GridFunction::constant(8, 8, 1.0, 0.3);
        match MeanZeroField::new(&offset) {
            Err(Error::NonZeroMean { mean, .. }) => assert!((mean - 0.3).abs() < 1e-15),
            other => panic!("expected NonZeroMean, got {other:?}"),
        }
        let zero = GridFunction::zeros(8, 8, 1.0);
        assert!(MeanZeroField::new(&zero).is_ok());
    }

    #[test]
    fn poisson_solver_rejects_shape_mismatch() {
        let solver = PoissonSolver::new(8, 8, 1.0);
        let wrong = demean(&GridFunction::sample(4, 4, 1.0, |x, _| x));
        let mz = MeanZeroField::new(&wrong).unwrap();
        assert!(matches!(
            solver.inv_laplacian(&mz),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
