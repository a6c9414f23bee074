//! Cell-centered periodic grids on rectangular domains.
//!
//! A field value with indices `(i, j)`, `0 <= i < m`, `0 <= j < n`, lives at
//! the cell center `((i + 1/2) h, (j + 1/2) h)`; the domain is
//! `[0, m*h] x [0, n*h]` and index arithmetic wraps periodically in both
//! directions. Storage is row-major with `j` varying fastest. Ghost cells are
//! never stored: accessors reduce any integer index into range, so the
//! periodic extension is exact by construction rather than by copying.

use crate::error::Error;

/// Reduce an arbitrary integer index into `0..extent` periodically.
#[inline]
pub fn wrap_index(i: isize, extent: usize) -> usize {
    debug_assert!(extent > 0);
    i.rem_euclid(extent as isize) as usize
}

/// Physical and discretization parameters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Coefficient of the second time derivative (`>= 0`; zero recovers the
    /// first-order phase field crystal flow).
    pub beta: f64,
    /// Coefficient of the quadratic bulk energy term (`> 0`, which keeps the
    /// implicit part of the splitting convex).
    pub alpha: f64,
    /// Cells along x (`>= 3`).
    pub m: usize,
    /// Cells along y (`>= 3`).
    pub n: usize,
    /// Uniform mesh spacing (`> 0`); the domain is `m*h` by `n*h`.
    pub h: f64,
    /// Time step (`> 0`).
    pub s: f64,
    /// Relative residual tolerance of the nonlinear step solver.
    pub tol_rel: f64,
    /// Absolute residual floor of the nonlinear step solver.
    pub tol_abs: f64,
    /// Newton iteration cap per time step.
    pub max_newton: usize,
}

impl Params {
    /// Parameters with the default solver tolerances.
    pub fn new(beta: f64, alpha: f64, m: usize, n: usize, h: f64, s: f64) -> Self {
        Params {
            beta,
            alpha,
            m,
            n,
            h,
            s,
            tol_rel: 1e-10,
            tol_abs: 1e-13,
            max_newton: 50,
        }
    }

    /// Domain length along x.
    pub fn lx(&self) -> f64 {
        self.m as f64 * self.h
    }

    /// Domain length along y.
    pub fn ly(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Check every parameter invariant, naming the violated rule.
    pub fn validate(&self) -> Result<(), Error> {
        fn fail(rule: &str, got: impl std::fmt::Display) -> Result<(), Error> {
            Err(Error::InvalidParams(format!("{rule} (got {got})")))
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return fail("beta >= 0", self.beta);
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return fail("alpha > 0", self.alpha);
        }
        if self.m < 3 {
            return fail("m >= 3", self.m);
        }
        if self.n < 3 {
            return fail("n >= 3", self.n);
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return fail("h > 0", self.h);
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return fail("s > 0", self.s);
        }
        if !(self.tol_rel > 0.0) || !self.tol_rel.is_finite() {
            return fail("tol_rel > 0", self.tol_rel);
        }
        if !(self.tol_abs >= 0.0) || !self.tol_abs.is_finite() {
            return fail("tol_abs >= 0", self.tol_abs);
        }
        if self.max_newton == 0 {
            return fail("max_newton >= 1", self.max_newton);
        }
        Ok(())
    }
}

/// A scalar field on the cell centers of a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    m: usize,
    n: usize,
    h: f64,
    data: Vec<f64>,
}

impl GridFunction {
    /// The zero field.
    pub fn zeros(m: usize, n: usize, h: f64) -> Self {
        Self::constant(m, n, h, 0.0)
    }

    /// A constant field.
    pub fn constant(m: usize, n: usize, h: f64, value: f64) -> Self {
        assert!(m > 0 && n > 0 && h > 0.0);
        GridFunction {
            m,
            n,
            h,
            data: vec![value; m * n],
        }
    }

    /// Sample `f(x, y)` at the cell centers.
    pub fn sample(m: usize, n: usize, h: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(m, n, h);
        for i in 0..m {
            let x = (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = (j as f64 + 0.5) * h;
                g.data[i * n + j] = f(x, y);
            }
        }
        g
    }

    /// Wrap an existing value buffer (row-major, `j` fastest).
    pub fn from_raw(m: usize, n: usize, h: f64, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), m * n, "buffer length must equal m*n");
        assert!(m > 0 && n > 0 && h > 0.0);
        GridFunction { m, n, h, data }
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

    /// Domain length along x.
    pub fn lx(&self) -> f64 {
        self.m as f64 * self.h
    }

    /// Domain length along y.
    pub fn ly(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Coordinates of the cell center `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    #[inline]
    pub(crate) fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.m && j < self.n);
        i * self.n + j
    }

    /// Value at in-range indices.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    /// Value at arbitrary integer indices, reduced periodically.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.data[wrap_index(i, self.m) * self.n + wrap_index(j, self.n)]
    }

    /// Set the value at in-range indices.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    /// Raw values, row-major with `j` fastest.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Arithmetic mean of all cell values.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / (self.data.len() as f64)
    }

    /// Discrete integral `h^2 * sum(phi)`, the conserved total mass.
    pub fn mass(&self) -> f64 {
        self.h * self.h * self.data.iter().sum::<f64>()
    }

    /// `h^2`-weighted inner product `h^2 * sum(self * other)`.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.assert_same_grid(other);
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum();
        self.h * self.h * s
    }

    /// True when `other` lives on the same grid (same `m`, `n`, `h`).
    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.m == other.m && self.n == other.n && self.h == other.h
    }

    pub(crate) fn assert_same_grid(&self, other: &GridFunction) {
        assert!(
            self.same_grid(other),
            "grid mismatch: {}x{} (h={}) vs {}x{} (h={})",
            self.m,
            self.n,
            self.h,
            other.m,
            other.n,
            other.h
        );
    }

    /// Apply `f` to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            m: self.m,
            n: self.n,
            h: self.h,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combine with `other` pointwise.
    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        self.assert_same_grid(other);
        GridFunction {
            m: self.m,
            n: self.n,
            h: self.h,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `a*x + b*y` pointwise.
    pub fn lin_comb(a: f64, x: &GridFunction, b: f64, y: &GridFunction) -> GridFunction {
        x.zip_map(y, |u, v| a * u + b * v)
    }

    /// Add `c` to every value in place.
    pub fn shift(&mut self, c: f64) {
        for v in &mut self.data {
            *v += c;
        }
    }
}

/// Values on the two staggered face sets of a periodic cell-centered grid.
///
/// Entry `(i, j)` of `x` lives on the face between cells `(i, j)` and
/// `(i+1 mod m, j)`; entry `(i, j)` of `y` on the face between `(i, j)` and
/// `(i, j+1 mod n)`. Every periodic face is stored exactly once, so the two
/// copies of a seam face seen from either side of the wrap boundary are the
/// same stored value.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    /// Face values with x-normal (east faces).
    pub x: GridFunction,
    /// Face values with y-normal (north faces).
    pub y: GridFunction,
}

impl EdgeField {
    pub fn zeros(m: usize, n: usize, h: f64) -> Self {
        EdgeField {
            x: GridFunction::zeros(m, n, h),
            y: GridFunction::zeros(m, n, h),
        }
    }

    pub fn m(&self) -> usize {
        self.x.m()
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn h(&self) -> f64 {
        self.x.h()
    }

    /// `h^2 * (sum(x^2) + sum(y^2))`, the squared discrete gradient norm
    /// when the field holds a staggered gradient.
    pub fn norm2_sq(&self) -> f64 {
        let s: f64 = self.x.values().iter().map(|v| v * v).sum::<f64>()
            + self.y.values().iter().map(|v| v * v).sum::<f64>();
        self.h() * self.h() * s
    }

    /// `h^2 * (sum(x^4) + sum(y^4))`, the fourth power of the discrete
    /// 4-norm of a staggered gradient.
    pub fn norm4_pow4(&self) -> f64 {
        let s: f64 = self.x.values().iter().map(|v| v * v * v * v).sum::<f64>()
            + self.y.values().iter().map(|v| v * v * v * v).sum::<f64>();
        self.h() * self.h() * s
    }
}
