//! Derivative-free local minimization (Nelder-Mead with restarts).

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Objective evaluations allowed, restarts included.
    pub max_evaluations: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Converged when the simplex values span at most this much...
    pub f_tolerance: f64,
    /// ...and every vertex lies within this distance of the best one.
    pub x_tolerance: f64,
    /// Stop immediately once the best value is at or below this.
    pub f_target: f64,
    /// Fresh simplices built around the best point after convergence.
    pub max_restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evaluations: 2_000,
            initial_step: 0.5,
            f_tolerance: 1e-20,
            x_tolerance: 1e-10,
            f_target: 1e-30,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Budget<F> {
    f: F,
    used: usize,
    limit: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.used += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.used >= self.limit
    }
}

/// Minimize `f` from `start`. Deterministic for a deterministic `f`.
pub fn nelder_mead<F>(f: F, start: &[f64], config: &NelderMeadConfig) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut budget = Budget {
        f,
        used: 0,
        limit: config.max_evaluations.max(1),
    };
    let mut best_x = start.to_vec();
    let mut best_value = budget.eval(start);
    if start.is_empty() {
        return Minimum {
            x: best_x,
            value: best_value,
            evaluations: budget.used,
            converged: true,
        };
    }

    let mut step = config.initial_step;
    let mut converged = false;
    for restart in 0..=config.max_restarts {
        let (x, value, done) = run_simplex(&mut budget, &best_x, best_value, step, config);
        let improvement = best_value - value;
        if value <= best_value {
            best_x = x;
            best_value = value;
        }
        converged = done;
        if !done || budget.exhausted() || best_value <= config.f_target {
            break;
        }
        if restart > 0 && improvement <= config.f_tolerance {
            break;
        }
        step *= 0.5;
    }
    Minimum {
        x: best_x,
        value: best_value,
        evaluations: budget.used,
        converged: converged || best_value <= config.f_target,
    }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    budget: &mut Budget<F>,
    start: &[f64],
    start_value: f64,
    step: f64,
    config: &NelderMeadConfig,
) -> (Vec<f64>, f64, bool) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), start_value));
    for axis in 0..dim {
        let mut vertex = start.to_vec();
        vertex[axis] += step;
        let value = budget.eval(&vertex);
        simplex.push((vertex, value));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if best <= config.f_target {
            return (simplex[0].0.clone(), best, true);
        }
        let spread = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if worst - best <= config.f_tolerance && spread <= config.x_tolerance {
            return (simplex[0].0.clone(), best, true);
        }
        if budget.exhausted() {
            return (simplex[0].0.clone(), best, false);
        }

        let mut centroid = vec![0.0; dim];
        for (vertex, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(vertex) {
                *c += v / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(REFLECT);
        let reflected_value = budget.eval(&reflected);
        if reflected_value < best {
            let expanded = along(EXPAND);
            let expanded_value = budget.eval(&expanded);
            simplex[dim] = if expanded_value < reflected_value {
                (expanded, expanded_value)
            } else {
                (reflected, reflected_value)
            };
            continue;
        }
        if reflected_value < simplex[dim - 1].1 {
            simplex[dim] = (reflected, reflected_value);
            continue;
        }
        let (contracted, contracted_value) = if reflected_value < worst {
            let c = along(CONTRACT * REFLECT);
            let v = budget.eval(&c);
            (c, v)
        } else {
            let c = along(-CONTRACT);
            let v = budget.eval(&c);
            (c, v)
        };
        if contracted_value < reflected_value.min(worst) {
            simplex[dim] = (contracted, contracted_value);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (vertex, value) in simplex.iter_mut().skip(1) {
            for (x, a) in vertex.iter_mut().zip(&anchor) {
                *x = a + SHRINK * (*x - a);
            }
            *value = budget.eval(vertex);
        }
    }
}
