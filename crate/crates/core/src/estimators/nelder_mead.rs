//! Derivative-free simplex minimization.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once every vertex lies within this distance (∞-norm) of the best one.
    pub tolerance: f64,
    /// Relative size of the initial simplex.
    pub initial_step: f64,
    /// Fresh simplices started from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 2000, tolerance: 1e-8, initial_step: 0.05, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn initial_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += if x0[i] != 0.0 { step * x0[i].abs().max(1e-3) } else { 2.5e-4 };
        simplex.push(v);
    }
    simplex
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Minimizes `f` from `x0`. Non-finite values are treated as +∞.
pub fn minimize(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let k = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if k == 0 {
        return Minimum { x: vec![], value: eval(x0), iterations: 0, converged: true };
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut best = x0.to_vec();
    let mut best_value = eval(x0);
    let mut iterations = 0;
    let mut converged = false;

    for _round in 0..=opts.restarts {
        let mut simplex = initial_simplex(&best, opts.initial_step);
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
        converged = false;
        while iterations < opts.max_iter {
            let mut idx: Vec<usize> = (0..=k).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            values = idx.iter().map(|&i| values[i]).collect();
            if diameter(&simplex) < opts.tolerance {
                converged = true;
                break;
            }
            iterations += 1;
            let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64).collect();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[k]).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = along(gamma);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[k] = xe;
                    values[k] = fe;
                } else {
                    simplex[k] = xr;
                    values[k] = fr;
                }
                continue;
            }
            if fr < values[k - 1] {
                simplex[k] = xr;
                values[k] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[k] {
                let xc = along(rho);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[k].min(fr) {
                simplex[k] = xc;
                values[k] = fc;
                continue;
            }
            for i in 1..=k {
                let shrunk: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, v)| b + sigma * (v - b)).collect();
                values[i] = eval(&shrunk);
                simplex[i] = shrunk;
            }
        }
        let i = (0..=k).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let moved = simplex[i].iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if values[i] <= best_value {
            best = simplex[i].clone();
            best_value = values[i];
        }
        if !converged || moved < opts.tolerance {
            break;
        }
    }
    Minimum { x: best, value: best_value, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &NelderMeadOptions { max_iter: 5000, ..Default::default() });
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
    }

    #[test]
    fn quadratic_in_eight_dimensions() {
        let target: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let f = |x: &[f64]| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (1.0 + i as f64) * (a - b).powi(2)).sum();
        let m = minimize(f, &[0.0; 8], &NelderMeadOptions { max_iter: 20_000, ..Default::default() });
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn nan_is_treated_as_infinite() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = minimize(f, &[2.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum();
        let m = minimize(f, &[10.0, -10.0, 3.0], &NelderMeadOptions { max_iter: 5, restarts: 0, ..Default::default() });
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
    }
}
