//! Staggered second-order difference operators on periodic cell-centered
//! grids.
//!
//! Center-to-edge differences and averages produce face values indexed by the
//! cell that owns the face (see [`EdgeField`]); edge-to-center differences
//! bring them back. Their compositions give the compact 5-point Laplacian and,
//! by repeated application, the bilaplacian and trilaplacian. All operators
//! commute with the periodic shift, annihilate constants where they should,
//! and satisfy exact summation-by-parts identities (no boundary terms on a
//! periodic grid); the randomized identity suite in [`crate::verify`] checks
//! those to near roundoff.

use crate::grid::{EdgeField, GridFunction};

/// Coordinate axis selector for the one-dimensional operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Forward difference from cell centers to faces along `axis`.
///
/// Entry `(i, j)` of the result lives on the face between cell `(i, j)` and
/// its positive-`axis` neighbor.
pub fn d_center_to_edge(phi: &GridFunction, axis: Axis) -> GridFunction {
    let (m, n) = (phi.m(), phi.n());
    let inv_h = 1.0 / phi.h();
    let mut out = GridFunction::zeros(m, n, phi.h());
    for i in 0..m {
        for j in 0..n {
            let d = match axis {
                Axis::X => phi.at(i as isize + 1, j as isize) - phi.get(i, j),
                Axis::Y => phi.at(i as isize, j as isize + 1) - phi.get(i, j),
            };
            out.set(i, j, d * inv_h);
        }
    }
    out
}

/// Two-point average from cell centers to faces along `axis`, indexed like
/// [`d_center_to_edge`].
pub fn a_center_to_edge(phi: &GridFunction, axis: Axis) -> GridFunction {
    let (m, n) = (phi.m(), phi.n());
    let mut out = GridFunction::zeros(m, n, phi.h());
    for i in 0..m {
        for j in 0..n {
            let a = match axis {
                Axis::X => phi.at(i as isize + 1, j as isize) + phi.get(i, j),
                Axis::Y => phi.at(i as isize, j as isize + 1) + phi.get(i, j),
            };
            out.set(i, j, 0.5 * a);
        }
    }
    out
}

/// Backward difference from faces to cell centers along `axis`: cell `(i, j)`
/// receives the difference of its positive-axis face and the face it shares
/// with its negative-axis neighbor.
pub fn d_edge_to_center(edge: &GridFunction, axis: Axis) -> GridFunction {
    let (m, n) = (edge.m(), edge.n());
    let inv_h = 1.0 / edge.h();
    let mut out = GridFunction::zeros(m, n, edge.h());
    for i in 0..m {
        for j in 0..n {
            let d = match axis {
                Axis::X => edge.get(i, j) - edge.at(i as isize - 1, j as isize),
                Axis::Y => edge.get(i, j) - edge.at(i as isize, j as isize - 1),
            };
            out.set(i, j, d * inv_h);
        }
    }
    out
}

/// Staggered gradient: forward differences to both face sets.
pub fn gradient(phi: &GridFunction) -> EdgeField {
    EdgeField {
        x: d_center_to_edge(phi, Axis::X),
        y: d_center_to_edge(phi, Axis::Y),
    }
}

/// Divergence of a face field: the adjoint-compatible counterpart of
/// [`gradient`], so `divergence(gradient(phi))` is the 5-point Laplacian.
pub fn divergence(edges: &EdgeField) -> GridFunction {
    let dx = d_edge_to_center(&edges.x, Axis::X);
    let dy = d_edge_to_center(&edges.y, Axis::Y);
    GridFunction::lin_comb(1.0, &dx, 1.0, &dy)
}

/// 5-point periodic Laplacian on a flat row-major buffer (the solver hot
/// path; `src` and `dst` must not alias).
pub(crate) fn laplacian_flat(m: usize, n: usize, h: f64, src: &[f64], dst: &mut [f64]) {
    debug_assert_eq!(src.len(), m * n);
    debug_assert_eq!(dst.len(), m * n);
    let inv_h2 = 1.0 / (h * h);
    for i in 0..m {
        let rp = (if i + 1 == m { 0 } else { i + 1 }) * n;
        let rm = (if i == 0 { m - 1 } else { i - 1 }) * n;
        let r = i * n;
        for j in 0..n {
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let jm = if j == 0 { n - 1 } else { j - 1 };
            dst[r + j] = (src[rp + j] + src[rm + j] + src[r + jp] + src[r + jm]
                - 4.0 * src[r + j])
                * inv_h2;
        }
    }
}

/// 5-point periodic Laplacian, written into `out`.
pub fn laplacian_into(phi: &GridFunction, out: &mut GridFunction) {
    phi.assert_same_grid(out);
    let (m, n, h) = (phi.m(), phi.n(), phi.h());
    laplacian_flat(m, n, h, phi.values(), out.values_mut());
}

/// 5-point periodic Laplacian.
pub fn laplacian(phi: &GridFunction) -> GridFunction {
    let mut out = GridFunction::zeros(phi.m(), phi.n(), phi.h());
    laplacian_into(phi, &mut out);
    out
}

/// One-dimensional second difference along x (the x part of the Laplacian).
pub fn laplacian_x(phi: &GridFunction) -> GridFunction {
    let (m, n) = (phi.m(), phi.n());
    let inv_h2 = 1.0 / (phi.h() * phi.h());
    let mut out = GridFunction::zeros(m, n, phi.h());
    for i in 0..m {
        for j in 0..n {
            let d = phi.at(i as isize + 1, j as isize) - 2.0 * phi.get(i, j)
                + phi.at(i as isize - 1, j as isize);
            out.set(i, j, d * inv_h2);
        }
    }
    out
}

/// One-dimensional second difference along y (the y part of the Laplacian).
pub fn laplacian_y(phi: &GridFunction) -> GridFunction {
    let (m, n) = (phi.m(), phi.n());
    let inv_h2 = 1.0 / (phi.h() * phi.h());
    let mut out = GridFunction::zeros(m, n, phi.h());
    for i in 0..m {
        for j in 0..n {
            let d = phi.at(i as isize, j as isize + 1) - 2.0 * phi.get(i, j)
                + phi.at(i as isize, j as isize - 1);
            out.set(i, j, d * inv_h2);
        }
    }
    out
}

/// Bilaplacian by composition of the 5-point Laplacian with itself.
pub fn bilaplacian(phi: &GridFunction) -> GridFunction {
    laplacian(&laplacian(phi))
}

/// Trilaplacian by threefold composition of the 5-point Laplacian.
pub fn trilaplacian(phi: &GridFunction) -> GridFunction {
    laplacian(&laplacian(&laplacian(phi)))
}

/// Cross term `h^2 * <lap_x(phi), lap_y(phi)>`.
///
/// Nonnegative for every periodic field (it equals the squared norm of the
/// mixed staggered second difference), which makes the directional estimate
/// `|lap_x(phi)|_2^2 <= |lap(phi)|_2^2` exact rather than asymptotic.
pub fn mixed_cross_sum(phi: &GridFunction) -> f64 {
    laplacian_x(phi).dot(&laplacian_y(phi))
}
