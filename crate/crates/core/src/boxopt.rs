//! Box-constrained maximization by projected-gradient ascent with
//! Barzilai–Borwein curvature steps and Armijo backtracking. Gradients come
//! from central finite differences (one-sided at the box faces), so the
//! scalar field only ever gets evaluated inside the box.

pub(crate) struct BoxOptOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
}

impl Default for BoxOptOptions {
    fn default() -> Self {
        Self { max_iters: 100, grad_tol: 1e-6, fd_step: 1e-5 }
    }
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    bounds: &[(f64, f64)],
    h: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let (lo, hi) = bounds[i];
        let up_ok = x[i] + h <= hi;
        let down_ok = x[i] - h >= lo;
        g[i] = match (up_ok, down_ok) {
            (true, true) => {
                probe[i] = x[i] + h;
                let f_up = f(&probe);
                probe[i] = x[i] - h;
                let f_down = f(&probe);
                (f_up - f_down) / (2.0 * h)
            }
            (true, false) => {
                probe[i] = x[i] + h;
                (f(&probe) - fx) / h
            }
            (false, true) => {
                probe[i] = x[i] - h;
                (fx - f(&probe)) / h
            }
            (false, false) => 0.0,
        };
        probe[i] = x[i];
        if !g[i].is_finite() {
            g[i] = 0.0;
        }
    }
    g
}

/// Ascend `f` from `x0`, staying inside `bounds`; returns the best point
/// seen and its value. If `f(x0)` is not finite the start is returned
/// unchanged with that value so callers can rank or discard it.
pub(crate) fn maximize_from<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &BoxOptOptions,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut g = fd_gradient(f, &x, fx, bounds, opts.fd_step);
    let mut step = {
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        1.0 / norm.max(1.0)
    };

    for _ in 0..opts.max_iters {
        // stationarity on the projected gradient (unit trial step)
        let mut stationary = true;
        for i in 0..x.len() {
            let moved = (x[i] + g[i]).clamp(bounds[i].0, bounds[i].1) - x[i];
            if moved.abs() > opts.grad_tol {
                stationary = false;
                break;
            }
        }
        if stationary {
            break;
        }

        let mut trial = x.clone();
        for i in 0..x.len() {
            trial[i] = (x[i] + step * g[i]).clamp(bounds[i].0, bounds[i].1);
        }
        let d: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let slope: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        if slope <= 0.0 || d.iter().all(|di| di.abs() < 1e-15) {
            break;
        }

        // Armijo backtracking along the projected direction
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc >= fx + 1e-4 * alpha * slope {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else { break };

        let g_new = fd_gradient(f, &x_new, f_new, bounds, opts.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        // curvature pair for ascent: concave stretches have sᵀy < 0
        step = if sy < -1e-16 {
            (-ss / sy).clamp(1e-10, 1e3)
        } else {
            let norm = g_new.iter().map(|v| v * v).sum::<f64>().sqrt();
            1.0 / norm.max(1.0)
        };
        x = x_new;
        fx = f_new;
        g = g_new;
        if fx > best_f {
            best_f = fx;
            best_x = x.clone();
        }
    }
    (best_x, best_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOUNDS2: [(f64, f64); 2] = [(-1.0, 1.0), (-1.0, 1.0)];

    #[test]
    fn concave_quadratic_reaches_center() {
        let c = [0.3, -0.45];
        let f = |x: &[f64]| -x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let (x, v) = maximize_from(&f, &[-0.9, 0.9], &BOUNDS2, &BoxOptOptions::default());
        assert!((x[0] - c[0]).abs() < 1e-4 && (x[1] - c[1]).abs() < 1e-4, "{x:?}");
        assert!(v > -1e-8);
    }

    #[test]
    fn maximum_on_boundary() {
        let f = |x: &[f64]| x[0] + 0.5 * x[1];
        let (x, _) = maximize_from(&f, &[0.0, 0.0], &BOUNDS2, &BoxOptOptions::default());
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn constant_field_stays_put() {
        let f = |_: &[f64]| 2.5;
        let (x, v) = maximize_from(&f, &[0.2, -0.7], &BOUNDS2, &BoxOptOptions::default());
        assert_eq!(x, vec![0.2, -0.7]);
        assert_eq!(v, 2.5);
    }

    #[test]
    fn never_worse_than_start() {
        // rippled field: whatever the path, the result beats the start
        let f = |x: &[f64]| (7.0 * x[0]).sin() + (11.0 * x[1]).cos() - 0.3 * x[0] * x[1];
        for start in [[-0.8, -0.8], [0.1, 0.9], [0.7, -0.2]] {
            let (x, v) = maximize_from(&f, &start, &BOUNDS2, &BoxOptOptions::default());
            assert!(v >= f(&start) - 1e-12);
            assert!(x.iter().zip(&BOUNDS2).all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi));
        }
    }

    #[test]
    fn non_finite_start_returned_for_ranking() {
        let f = |_: &[f64]| f64::NAN;
        let (x, v) = maximize_from(&f, &[0.0, 0.0], &BOUNDS2, &BoxOptOptions::default());
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(v.is_nan());
    }
}
