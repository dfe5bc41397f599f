//! Derivative-free one- and multi-dimensional minimizers.

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Initial simplex edge along each coordinate.
    pub step: f64,
    /// Largest vertex distance (max-norm) from the best vertex.
    pub x_tol: f64,
    /// Largest objective spread across vertices.
    pub f_tol: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead with dimension-adaptive coefficients. After each apparent
/// convergence the simplex is rebuilt around the best vertex; the search
/// stops once a rebuild no longer improves the objective by more than
/// `f_tol`.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &SimplexOptions) -> Minimum {
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if dim == 0 {
        let fx = eval(x0, &mut evals);
        return Minimum { x: Vec::new(), f: fx, evals, converged: true };
    }

    let d = dim as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / d, 0.75 - 0.5 / d, 1.0 - 1.0 / d);

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut step = opts.step;
    loop {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..dim {
            let mut x = best_x.clone();
            x[i] += step;
            let fx = eval(&x, &mut evals);
            simplex.push((x, fx));
        }

        let mut converged = false;
        while evals < opts.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[dim].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if diameter < opts.x_tol && spread.abs() < opts.f_tol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for (x, _) in &simplex[..dim] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / d;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-alpha * gamma);
                let fe = eval(&xe, &mut evals);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = along(-alpha * rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(simplex[dim].1) {
                simplex[dim] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = anchor
                    .iter()
                    .zip(&vertex.0)
                    .map(|(a, v)| a + sigma * (v - a))
                    .collect();
                let fx = eval(&x, &mut evals);
                *vertex = (x, fx);
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, fx) = simplex.swap_remove(0);
        let improved = best_f - fx > opts.f_tol;
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        if !converged {
            return Minimum { x: best_x, f: best_f, evals, converged: false };
        }
        if !improved && step <= opts.step * 1e-2 {
            return Minimum { x: best_x, f: best_f, evals, converged: true };
        }
        step = if improved { opts.step * 0.1 } else { step * 0.1 };
    }
}

/// Golden-section search on `[lo, hi]` until the bracket is narrower than
/// `tol`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
