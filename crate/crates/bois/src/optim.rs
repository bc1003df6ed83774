//! Small derivative-free and finite-difference local optimizers shared by the
//! acquisition search, the kernel hyperparameter fit, and the ansatz builder.
//! All routines are deterministic given their inputs.

/// Clamp `x` into `[lo, hi]` component-wise.
pub(crate) fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Nelder-Mead simplex minimization inside a box.
///
/// Starts from `x0` with per-dimension initial steps `scale`; every trial
/// point is projected back into the box. Returns the best vertex found after
/// at most `max_evals` objective evaluations.
pub(crate) fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
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

    // Initial simplex: x0 plus one step along each axis, stepping inward when
    // the forward step leaves the box.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut x0c = x0.to_vec();
    clamp_into(&mut x0c, lo, hi);
    simplex.push(x0c.clone());
    for j in 0..d {
        let mut v = x0c.clone();
        let step = if v[j] + scale[j] <= hi[j] {
            scale[j]
        } else {
            -scale[j]
        };
        v[j] = (v[j] + step).clamp(lo[j], hi[j]);
        if v[j] == x0c[j] {
            v[j] = (v[j] + 1e-8).clamp(lo[j], hi[j]);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    while evals < max_evals {
        // Order vertices best..worst.
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[d];
        let second_worst = order[d - 1];

        if (values[worst] - values[best]).abs() < 1e-14 * (1.0 + values[best].abs()) {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; d];
        for &i in order.iter().take(d) {
            for j in 0..d {
                centroid[j] += simplex[i][j];
            }
        }
        for c in centroid.iter_mut() {
            *c /= d as f64;
        }

        let project = |p: Vec<f64>| {
            let mut p = p;
            clamp_into(&mut p, lo, hi);
            p
        };
        let reflected = project(
            (0..d)
                .map(|j| centroid[j] + (centroid[j] - simplex[worst][j]))
                .collect(),
        );
        let f_r = eval(&reflected, &mut evals);

        if f_r < values[best] {
            let expanded = project(
                (0..d)
                    .map(|j| centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]))
                    .collect(),
            );
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
        } else if f_r < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_r;
        } else {
            let contracted = project(
                (0..d)
                    .map(|j| centroid[j] + 0.5 * (simplex[worst][j] - centroid[j]))
                    .collect(),
            );
            let f_c = eval(&contracted, &mut evals);
            if f_c < values[worst] {
                simplex[worst] = contracted;
                values[worst] = f_c;
            } else {
                // Shrink toward the best vertex.
                let best_point = simplex[best].clone();
                for i in 0..=d {
                    if i == best {
                        continue;
                    }
                    for j in 0..d {
                        simplex[i][j] = best_point[j] + 0.5 * (simplex[i][j] - best_point[j]);
                    }
                    values[i] = eval(&simplex[i].clone(), &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=d {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex.swap_remove(best), values[best])
}

/// Gradient descent with central finite-difference gradients and a
/// backtracking (Armijo) line search.
///
/// The step length adapts: it doubles after an immediately accepted step and
/// halves on rejection. Terminates on the step budget, a gradient norm below
/// `grad_tol`, or a fully stalled line search.
pub(crate) fn gradient_descent<F>(
    mut f: F,
    x0: &[f64],
    max_steps: usize,
    grad_tol: f64,
    fd_step: f64,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut step = 0.5;

    for _ in 0..max_steps {
        // Central differences.
        let mut grad = vec![0.0; d];
        let mut gnorm2 = 0.0;
        for j in 0..d {
            let old = x[j];
            x[j] = old + fd_step;
            let fp = f(&x);
            x[j] = old - fd_step;
            let fm = f(&x);
            x[j] = old;
            grad[j] = (fp - fm) / (2.0 * fd_step);
            gnorm2 += grad[j] * grad[j];
        }
        if gnorm2.sqrt() < grad_tol {
            break;
        }

        let mut t = step;
        let mut accepted = false;
        for bt in 0..40 {
            let trial: Vec<f64> = (0..d).map(|j| x[j] - t * grad[j]).collect();
            let ft = f(&trial);
            if ft <= fx - 1e-4 * t * gnorm2 {
                x = trial;
                fx = ft;
                step = if bt == 0 { (t * 2.0).min(8.0) } else { t };
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2);
        let (x, v) = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], &[-4.0, -4.0], &[4.0, 4.0], 400);
        assert!(v < 1e-8, "v = {v}");
        assert!((x[0] - 1.5).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let f = |x: &[f64]| -x[0];
        let (x, _) = nelder_mead(f, &[0.2], &[0.3], &[0.0], &[1.0], 200);
        assert!(x[0] <= 1.0 + 1e-12);
        assert!(x[0] > 0.99);
    }

    #[test]
    fn gradient_descent_converges_on_rosenbrock_valley_floor() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2) + 10.0 * (x[1] - 1.0).powi(2);
        let (x, v) = gradient_descent(f, &[0.0, 0.0], 500, 1e-9, 1e-6);
        assert!(v < 1e-10, "v = {v}");
        assert!((x[0] - 2.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }
}
