//! Derivative-free minimization used by the Banach–Mazur searches.

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Stop when the simplex diameter (max-norm) drops below this.
    pub x_tol: f64,
    /// ... and the spread of function values drops below this.
    pub f_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            x_tol: 1e-10,
            f_tol: 1e-13,
            max_iterations: 4000,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start` with an initial simplex of edge `step`.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64) -> Minimum {
        let dim = start.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(start.to_vec());
        for i in 0..dim {
            let mut p = start.to_vec();
            p[i] += step;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            iterations += 1;
            // stable ordering keeps runs deterministic on ties
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[dim] - values[0];
            let diameter = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if diameter < self.x_tol && spread.abs() <= self.f_tol.max(1e-15 * values[0].abs()) {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; dim];
            for p in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(p) {
                    *c += x / dim as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = along(-alpha);
            let fr = f(&reflected);
            if fr < values[0] {
                let expanded = along(-gamma);
                let fe = f(&expanded);
                if fe < fr {
                    simplex[dim] = expanded;
                    values[dim] = fe;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = fr;
                }
                continue;
            }
            if fr < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[dim] {
                let c = along(-rho);
                let v = f(&c);
                (c, v)
            } else {
                let c = along(rho);
                let v = f(&c);
                (c, v)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for i in 1..=dim {
                for (x, b) in simplex[i].iter_mut().zip(&best) {
                    *x = b + sigma * (*x - b);
                }
                values[i] = f(&simplex[i]);
            }
        }
        let (mut bi, mut bv) = (0, values[0]);
        for (i, v) in values.iter().enumerate() {
            if *v < bv {
                bi = i;
                bv = *v;
            }
        }
        Minimum {
            x: simplex[bi].clone(),
            value: bv,
            iterations,
            converged,
        }
    }

    /// Runs [`NelderMead::minimize`] and restarts from the result with a fresh
    /// simplex, which un-sticks the method on non-smooth objectives.
    pub fn minimize_with_restarts(
        &self,
        f: impl Fn(&[f64]) -> f64,
        start: &[f64],
        step: f64,
        restarts: usize,
    ) -> Minimum {
        let mut best = self.minimize(&f, start, step);
        let mut total = best.iterations;
        let mut s = step;
        for _ in 0..restarts {
            s *= 0.5;
            let next = self.minimize(&f, &best.x, s);
            total += next.iterations;
            if next.value < best.value {
                best = next;
            } else {
                best.converged |= next.converged;
                break;
            }
        }
        best.iterations = total;
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2);
        let m = NelderMead::default().minimize(f, &[0.0, 0.0], 0.3);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn handles_kinked_objective() {
        let f = |x: &[f64]| (x[0] - 0.2).abs().max(2.0 * (x[1] + 0.1).abs()) + 0.1 * x[0];
        let m = NelderMead::default().minimize_with_restarts(f, &[0.5, 0.5], 0.2, 3);
        assert!(m.value <= f(&[0.2, -0.1]) + 1e-9);
    }

    #[test]
    fn rosenbrock_4d() {
        let f = |x: &[f64]| {
            (0..3)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum::<f64>()
        };
        let nm = NelderMead {
            max_iterations: 20000,
            ..Default::default()
        };
        let m = nm.minimize_with_restarts(f, &[0.0; 4], 0.5, 4);
        assert!(m.value < 1e-8, "value {}", m.value);
    }
}
