//! Box-constrained quasi-Newton minimisation (projected L-BFGS with Armijo
//! backtracking). Used for GP hyperparameter fitting.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const FREE: Bounds = Bounds {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub gtol: f64,
    /// Stop when the relative decrease of one step falls below this.
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            memory: 8,
            gtol: 1e-6,
            ftol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
}

fn project(x: &mut [f64], bounds: &[Bounds]) {
    for (xi, b) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(b.lo, b.hi);
    }
}

/// Gradient with components zeroed where a bound blocks descent.
fn projected_gradient(x: &[f64], g: &[f64], bounds: &[Bounds]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((&xi, &gi), b)| {
            if (xi <= b.lo && gi > 0.0) || (xi >= b.hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f` over the box. `f` returns `None` where it cannot be evaluated
/// (treated as +inf by the line search). Returns `None` if the start point
/// itself cannot be evaluated.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: &[Bounds], opts: &LbfgsOptions) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    assert_eq!(x0.len(), bounds.len());
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        let pg = projected_gradient(&x, &g, bounds);
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.gtol {
            break;
        }

        // two-loop recursion restricted to the free coordinates
        let free: Vec<f64> = pg
            .iter()
            .zip(&g)
            .map(|(p, g)| if *p == 0.0 && *g != 0.0 { 0.0 } else { 1.0 })
            .collect();
        let masked: Vec<(Vec<f64>, Vec<f64>, f64)> = history
            .iter()
            .filter_map(|(s, y, _)| {
                let s: Vec<f64> = s.iter().zip(&free).map(|(a, m)| a * m).collect();
                let y: Vec<f64> = y.iter().zip(&free).map(|(a, m)| a * m).collect();
                let sy = dot(&s, &y);
                (sy > 1e-12).then(|| (s, y, 1.0 / sy))
            })
            .collect();
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(masked.len());
        for (s, y, rho) in masked.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = masked.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        } else {
            let norm = dot(&pg, &pg).sqrt();
            if norm > 1.0 {
                q.iter_mut().for_each(|qi| *qi /= norm);
            }
        }
        for ((s, y, rho), a) in masked.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        for (i, d) in dir.iter_mut().enumerate() {
            if (x[i] <= bounds[i].lo && *d < 0.0) || (x[i] >= bounds[i].hi && *d > 0.0) {
                *d = 0.0;
            }
        }
        if dot(&dir, &pg) >= 0.0 {
            history.clear();
            dir = pg.iter().map(|v| -v).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut xn, bounds);
            let decrease: f64 = dot(&g, &xn.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease.min(0.0) && fn_ <= fx {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > opts.memory {
                history.pop_front();
            }
        }
        let rel = (fx - fn_).abs() / (1.0 + fx.abs());
        x = xn;
        fx = fn_;
        g = gn;
        if rel < opts.ftol {
            // a stalled quasi-Newton step gets one retry along the gradient
            if step < 1.0 && !history.is_empty() {
                history.clear();
                continue;
            }
            break;
        }
    }
    Some(Minimum { x, value: fx, iters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Some((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let opts = LbfgsOptions {
            max_iters: 500,
            ftol: 0.0,
            gtol: 1e-9,
            ..Default::default()
        };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &[Bounds::FREE; 2], &opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m);
    }

    #[test]
    fn active_bound() {
        // min (x-3)^2 + (y+1)^2 on [0,2] x [0,2] -> (2, 0)
        let f = |x: &[f64]| {
            Some((
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)],
            ))
        };
        let m = minimize(f, &[1.0, 1.0], &[Bounds::new(0.0, 2.0); 2], &LbfgsOptions::default()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-12 && m.x[1].abs() < 1e-12, "{:?}", m.x);
    }

    #[test]
    fn unevaluable_start() {
        let f = |_: &[f64]| None;
        assert!(minimize(f, &[0.0], &[Bounds::FREE], &LbfgsOptions::default()).is_none());
    }
}
