//! Restarted GMRES with right preconditioning, used by the implicit step
//! solver. Works on flat slices in the Euclidean metric; callers translate
//! tolerances from the `h`-weighted norms.

/// Controls for one linear solve.
pub(crate) struct GmresOptions {
    /// Krylov subspace size between restarts.
    pub restart: usize,
    /// Total operator-application budget.
    pub max_iters: usize,
    /// Convergence target relative to `|b|`.
    pub rel_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 50,
            max_iters: 400,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug)]
pub(crate) struct GmresOutcome {
    pub iters: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn nrm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` to `rel_tol` via right-preconditioned restarted GMRES:
/// the Krylov space is built for `A M^{-1}`, and the returned `x` already
/// includes the `M^{-1}` factor. `x` must come in zeroed or holding an
/// initial guess.
pub(crate) fn gmres(
    mut apply_a: impl FnMut(&[f64], &mut [f64]),
    mut apply_minv: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opts: &GmresOptions,
) -> GmresOutcome {
    let dim = b.len();
    assert_eq!(x.len(), dim);
    let norm_b = nrm2(b);
    if norm_b == 0.0 {
        x.fill(0.0);
        return GmresOutcome {
            iters: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let target = opts.rel_tol * norm_b;

    let mut r = vec![0.0; dim];
    let mut work = vec![0.0; dim];
    let mut iters = 0usize;

    // r = b - A x.
    apply_a(x, &mut r);
    for i in 0..dim {
        r[i] = b[i] - r[i];
    }

    loop {
        let beta = nrm2(&r);
        if beta <= target {
            return GmresOutcome {
                iters,
                rel_residual: beta / norm_b,
                converged: true,
            };
        }
        if iters >= opts.max_iters {
            return GmresOutcome {
                iters,
                rel_residual: beta / norm_b,
                converged: false,
            };
        }

        let k_max = opts.restart.min(opts.max_iters - iters);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_max + 1);
        basis.push(r.iter().map(|&v| v / beta).collect());
        // Column-major Hessenberg factors after Givens triangularization.
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        let mut cs = Vec::with_capacity(k_max);
        let mut sn = Vec::with_capacity(k_max);
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_used = 0;

        for j in 0..k_max {
            apply_minv(&basis[j], &mut work);
            let mut w = vec![0.0; dim];
            apply_a(&work, &mut w);
            iters += 1;

            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                for (wv, &vv) in w.iter_mut().zip(v.iter()) {
                    *wv -= hij * vv;
                }
            }
            let hnext = nrm2(&w);
            col[j + 1] = hnext;

            for i in 0..j {
                let (c, s): (f64, f64) = (cs[i], sn[i]);
                let t = c * col[i] + s * col[i + 1];
                col[i + 1] = -s * col[i] + c * col[i + 1];
                col[i] = t;
            }
            let denom = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / denom, col[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[j] = denom;
            col[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            hcols.push(col);
            k_used = j + 1;

            let happy = hnext <= 1e-14 * norm_b;
            if g[j + 1].abs() <= target || happy {
                break;
            }
            if j + 1 < k_max {
                basis.push(w.iter().map(|&v| v / hnext).collect());
            }
        }

        // Back substitution for y, then x += M^{-1} (V y).
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hcols[j][i] * y[j];
            }
            y[i] = acc / hcols[i][i];
        }
        let mut vy = vec![0.0; dim];
        for (j, yj) in y.iter().enumerate() {
            for (av, &bv) in vy.iter_mut().zip(basis[j].iter()) {
                *av += yj * bv;
            }
        }
        apply_minv(&vy, &mut work);
        for (xv, &wv) in x.iter_mut().zip(work.iter()) {
            *xv += wv;
        }

        // True residual for the restart/convergence decision.
        apply_a(x, &mut r);
        for i in 0..dim {
            r[i] = b[i] - r[i];
        }
    }
}
