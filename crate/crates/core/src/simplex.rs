//! Nelder-Mead simplex minimizer with dimension-adaptive coefficients.

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below this.
    pub f_tolerance: f64,
    /// ... and the simplex diameter below this.
    pub x_tolerance: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-7,
            initial_step: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> SimplexResult {
        let n = x0.len();
        if n == 0 {
            return SimplexResult {
                x: Vec::new(),
                value: f(x0),
                evals: 1,
                converged: true,
            };
        }
        let nf = n as f64;
        let (alpha, gamma, rho, shrink) = if n > 2 {
            (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
        } else {
            (1.0, 2.0, 0.5, 0.5)
        };
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

        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += self.initial_step;
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
        let mut converged = false;

        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();

            let spread = vals[n] - vals[0];
            let diameter = pts[1..]
                .iter()
                .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread.abs() <= self.f_tolerance && diameter <= self.x_tolerance {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for p in &pts[..n] {
                for (cj, pj) in centroid.iter_mut().zip(p) {
                    *cj += pj / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&pts[n])
                    .map(|(cj, wj)| cj + t * (cj - wj))
                    .collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < vals[0] {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    pts[n] = xe;
                    vals[n] = fe;
                } else {
                    pts[n] = xr;
                    vals[n] = fr;
                }
                continue;
            }
            if fr < vals[n - 1] {
                pts[n] = xr;
                vals[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < vals[n] {
                let xc = along(alpha * rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(vals[n]) {
                pts[n] = xc;
                vals[n] = fc;
                continue;
            }
            let best = pts[0].clone();
            for i in 1..=n {
                for (pj, bj) in pts[i].iter_mut().zip(&best) {
                    *pj = bj + shrink * (*pj - bj);
                }
                vals[i] = eval(&pts[i], &mut evals);
            }
        }

        let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        SimplexResult {
            x: pts[best].clone(),
            value: vals[best],
            evals,
            converged,
        }
    }
}
