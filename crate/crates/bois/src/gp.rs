//! Gaussian-process regression with the Matern-5/2 kernel.
//!
//! Targets are standardized (mean removed, scaled by the standard deviation)
//! before fitting, so the kernel hyperparameters live on O(1) data whatever
//! the energy scale of the Hamiltonian; predictions are de-standardized on
//! the way out. Hyperparameters are fitted by maximizing the log marginal
//! likelihood with a derivative-free simplex search in log-space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::optim::nelder_mead;

/// Hard box for signal variance and lengthscale during fitting.
pub const PARAM_LO: f64 = 1e-6;
pub const PARAM_HI: f64 = 1e6;
const NOISE_LO: f64 = 1e-12;
const NOISE_HI: f64 = 1e2;

const JITTER_BASE: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Floor under the target standard deviation used for standardization.
const STD_FLOOR: f64 = 1e-12;

/// Matern-5/2 kernel hyperparameters (single isotropic lengthscale), in
/// standardized-target units.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        let p = Self {
            signal_variance,
            lengthscale,
            noise_variance,
        };
        if !(signal_variance.is_finite() && lengthscale.is_finite() && noise_variance.is_finite())
            || signal_variance <= 0.0
            || lengthscale <= 0.0
            || noise_variance < 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "invalid kernel parameters {p:?}"
            )));
        }
        Ok(p)
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            signal_variance: 1.0,
            lengthscale: 1.0,
            noise_variance: 1e-6,
        }
    }
}

/// Matern-5/2 covariance at distance `r`:
/// `sigma_f^2 (1 + sqrt5 r/l + 5 r^2 / (3 l^2)) exp(-sqrt5 r/l)`.
pub fn matern52(r: f64, params: &KernelParams) -> f64 {
    debug_assert!(r >= 0.0);
    let sqrt5 = 5.0f64.sqrt();
    let s = sqrt5 * r / params.lengthscale;
    params.signal_variance
        * (1.0 + s + 5.0 * r * r / (3.0 * params.lengthscale * params.lengthscale))
        * (-s).exp()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A fitted GP posterior over one optimizer's cost landscape. Immutable once
/// built; refitting produces a fresh model.
#[derive(Clone, Debug)]
pub struct SurrogateModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    y_offset: f64,
    y_scale: f64,
    params: KernelParams,
    /// Lower Cholesky factor of K + (noise + jitter) I; empty when M = 0.
    l_factor: DMatrix<f64>,
    /// Factor-solved standardized targets.
    alpha_vec: DVector<f64>,
    jitter: f64,
    dims: usize,
}

impl SurrogateModel {
    /// The data-free prior: mean 0, variance `sigma_f^2` everywhere.
    pub fn prior(dims: usize, params: KernelParams) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            y_offset: 0.0,
            y_scale: 1.0,
            params,
            l_factor: DMatrix::zeros(0, 0),
            alpha_vec: DVector::zeros(0),
            jitter: 0.0,
            dims,
        }
    }

    /// Fit hyperparameters by marginal likelihood from 5 log-uniform
    /// multi-starts, then factorize.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], fixed_noise: Option<f64>) -> Result<Self> {
        Self::fit_impl(inputs, targets, fixed_noise, None)
    }

    /// Refit warm-started from a previous model's hyperparameters (one
    /// simplex from `init` plus one fresh start); used on the refit schedule
    /// once datasets grow and full multi-start fits would dominate runtime.
    pub fn fit_warm(
        inputs: &[Vec<f64>],
        targets: &[f64],
        fixed_noise: Option<f64>,
        init: KernelParams,
    ) -> Result<Self> {
        Self::fit_impl(inputs, targets, fixed_noise, Some(init))
    }

    /// Factorize with the given hyperparameters, no search.
    pub fn fit_with_params(
        inputs: &[Vec<f64>],
        targets: &[f64],
        params: KernelParams,
    ) -> Result<Self> {
        let (x, y, dims) = Self::validate(inputs, targets)?;
        if params.noise_variance < STD_FLOOR {
            Self::check_conflicting_duplicates(&x, &y)?;
        }
        let (offset, scale, y_std) = standardize(&y);
        let (l, alpha, jitter) = factorize(&x, &y_std, &params)?;
        Ok(Self {
            inputs: x,
            targets: y,
            y_offset: offset,
            y_scale: scale,
            params,
            l_factor: l,
            alpha_vec: alpha,
            jitter,
            dims,
        })
    }

    fn fit_impl(
        inputs: &[Vec<f64>],
        targets: &[f64],
        fixed_noise: Option<f64>,
        warm: Option<KernelParams>,
    ) -> Result<Self> {
        let (x, y, dims) = Self::validate(inputs, targets)?;
        if fixed_noise.is_some_and(|v| v < STD_FLOOR) {
            Self::check_conflicting_duplicates(&x, &y)?;
        }
        let (offset, scale, y_std) = standardize(&y);

        // Warm refits track a slowly moving optimum: one simplex from the
        // previous hyperparameters with a reduced budget. Fresh fits get the
        // full 5-start search.
        let starts = match warm {
            Some(init) => vec![init],
            None => multistart_seeds(&x, 5),
        };
        let evals_per_start = if warm.is_some() { 25 } else { 40 };

        // Search in log space; the noise dimension is dropped when fixed.
        let opt_noise = fixed_noise.is_none();
        let zdim = if opt_noise { 3 } else { 2 };
        let lo: Vec<f64> = if opt_noise {
            vec![PARAM_LO.ln(), PARAM_LO.ln(), NOISE_LO.ln()]
        } else {
            vec![PARAM_LO.ln(), PARAM_LO.ln()]
        };
        let hi: Vec<f64> = if opt_noise {
            vec![PARAM_HI.ln(), PARAM_HI.ln(), NOISE_HI.ln()]
        } else {
            vec![PARAM_HI.ln(), PARAM_HI.ln()]
        };
        let to_params = |z: &[f64]| -> KernelParams {
            KernelParams {
                signal_variance: z[0].exp(),
                lengthscale: z[1].exp(),
                noise_variance: if opt_noise {
                    z[2].exp()
                } else {
                    fixed_noise.unwrap()
                },
            }
        };

        let mut best: Option<(KernelParams, f64)> = None;
        for start in &starts {
            let z0: Vec<f64> = if opt_noise {
                vec![
                    start.signal_variance.ln(),
                    start.lengthscale.ln(),
                    start.noise_variance.max(NOISE_LO).ln(),
                ]
            } else {
                vec![start.signal_variance.ln(), start.lengthscale.ln()]
            };
            let objective = |z: &[f64]| -> f64 {
                match log_marginal_for(&x, &y_std, &to_params(z)) {
                    Some(lml) => -lml,
                    None => f64::INFINITY,
                }
            };
            let (z_best, neg_lml) = nelder_mead(
                objective,
                &z0,
                &vec![0.7; zdim],
                &lo,
                &hi,
                evals_per_start * (zdim + 1),
            );
            if neg_lml.is_finite() && best.as_ref().is_none_or(|(_, b)| -neg_lml > *b) {
                best = Some((to_params(&z_best), -neg_lml));
            }
        }
        let params = match best {
            Some((p, _)) => p,
            None => {
                if x.iter().all(|row| row == &x[0]) {
                    return Err(Error::DegenerateData(
                        "all inputs identical; no kernel factorizes without jitter".into(),
                    ));
                }
                // Near-duplicate inputs under a tiny noise floor can leave
                // every candidate jitter-dependent; fall back to a
                // conservative factorization and let the jitter ladder
                // absorb the singular directions.
                let mut p = warm.unwrap_or_else(|| multistart_seeds(&x, 1)[0]);
                if fixed_noise.is_none() {
                    p.noise_variance = p.noise_variance.max(1e-6);
                }
                p
            }
        };

        let (l, alpha, jitter) = factorize(&x, &y_std, &params)?;
        Ok(Self {
            inputs: x,
            targets: y,
            y_offset: offset,
            y_scale: scale,
            params,
            l_factor: l,
            alpha_vec: alpha,
            jitter,
            dims,
        })
    }

    fn validate(inputs: &[Vec<f64>], targets: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>, usize)> {
        if inputs.is_empty() {
            return Err(Error::DegenerateData("empty training set".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let dims = inputs[0].len();
        if dims == 0 {
            return Err(Error::InvalidSize("zero-dimensional inputs".into()));
        }
        for (i, row) in inputs.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "input {i} has {} dimensions, expected {dims}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "input {i} has a non-finite value"
                )));
            }
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("target {i} is not finite")));
        }
        Ok((inputs.to_vec(), targets.to_vec(), dims))
    }

    /// With zero observation noise, exact duplicate inputs that disagree on
    /// the target make the model inconsistent rather than merely ill
    /// conditioned; jitter must not paper over that.
    fn check_conflicting_duplicates(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                if x[i] == x[j] && (y[i] - y[j]).abs() > 1e-12 {
                    return Err(Error::DegenerateData(format!(
                        "noiseless model given duplicate inputs {i} and {j} with conflicting targets"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_data(&self) -> usize {
        self.targets.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn kernel_params(&self) -> KernelParams {
        self.params
    }

    /// Jitter that had to be added to the kernel diagonal, 0 if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// (offset, scale) mapping standardized targets back to raw ones.
    pub fn target_standardization(&self) -> (f64, f64) {
        (self.y_offset, self.y_scale)
    }

    /// Posterior mean and variance in raw target units.
    pub fn predict(&self, theta: &[f64]) -> (f64, f64) {
        let (mu, var) = self.predict_standardized(theta);
        (
            self.y_offset + self.y_scale * mu,
            self.y_scale * self.y_scale * var,
        )
    }

    /// Posterior mean and variance in standardized target units, the space
    /// the kernel parameters are defined in.
    pub fn predict_standardized(&self, theta: &[f64]) -> (f64, f64) {
        debug_assert_eq!(theta.len(), self.dims);
        let m = self.num_data();
        if m == 0 {
            return (0.0, self.params.signal_variance);
        }
        let k_star = DVector::from_iterator(
            m,
            self.inputs
                .iter()
                .map(|x| matern52(euclid(theta, x), &self.params)),
        );
        let mu = k_star.dot(&self.alpha_vec);
        let v = self
            .l_factor
            .solve_lower_triangular(&k_star)
            .expect("Cholesky factor is nonsingular");
        let var = (self.params.signal_variance - v.norm_squared()).max(0.0);
        (mu, var)
    }

    /// Batched prediction in raw units; one triangular solve for all queries.
    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let m = self.num_data();
        if m == 0 {
            return queries
                .iter()
                .map(|_| {
                    (
                        self.y_offset,
                        self.y_scale * self.y_scale * self.params.signal_variance,
                    )
                })
                .collect();
        }
        let b = queries.len();
        let mut k_star = DMatrix::zeros(m, b);
        for (col, q) in queries.iter().enumerate() {
            for (row, x) in self.inputs.iter().enumerate() {
                k_star[(row, col)] = matern52(euclid(q, x), &self.params);
            }
        }
        let v = self
            .l_factor
            .solve_lower_triangular(&k_star)
            .expect("Cholesky factor is nonsingular");
        (0..b)
            .map(|col| {
                let mu = k_star.column(col).dot(&self.alpha_vec);
                let var = (self.params.signal_variance - v.column(col).norm_squared()).max(0.0);
                (
                    self.y_offset + self.y_scale * mu,
                    self.y_scale * self.y_scale * var,
                )
            })
            .collect()
    }

    /// Log marginal likelihood of the standardized targets under the fitted
    /// factorization (computed from the triangular factor, no inverse).
    pub fn log_marginal_likelihood(&self) -> f64 {
        let m = self.num_data();
        if m == 0 {
            return 0.0;
        }
        let y_std = DVector::from_iterator(
            m,
            self.targets
                .iter()
                .map(|y| (y - self.y_offset) / self.y_scale),
        );
        lml_from_factor(&self.l_factor, &self.alpha_vec, &y_std)
    }
}

fn standardize(y: &[f64]) -> (f64, f64, DVector<f64>) {
    let m = y.len() as f64;
    let mean = y.iter().sum::<f64>() / m;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    let scale = var.sqrt().max(STD_FLOOR);
    let y_std = DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / scale));
    (mean, scale, y_std)
}

fn kernel_matrix(x: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let m = x.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            // One distance per pair keeps K exactly symmetric.
            let v = matern52(euclid(&x[i], &x[j]), params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

type Factorization = (DMatrix<f64>, DVector<f64>, f64);

/// Cholesky of K + (noise + jitter) I with the escalating jitter ladder.
fn factorize(x: &[Vec<f64>], y_std: &DVector<f64>, params: &KernelParams) -> Result<Factorization> {
    let base = kernel_matrix(x, params);
    match cholesky_with_jitter(&base, params.noise_variance) {
        Some((chol, jitter)) => {
            let l = chol.l();
            let alpha = chol.solve(y_std);
            Ok((l, alpha, jitter))
        }
        None => Err(Error::DegenerateData(format!(
            "kernel factorization failed after maximum jitter {JITTER_MAX:e} \
             (e.g. all inputs identical)"
        ))),
    }
}

fn cholesky_with_jitter(base: &DMatrix<f64>, noise: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let m = base.nrows();
    let max_diag = (0..m).map(|i| base[(i, i)]).fold(0.0f64, f64::max) + noise;
    let mut jitter = 0.0f64;
    loop {
        let mut k = base.clone();
        for i in 0..m {
            k[(i, i)] += noise + jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            // An exactly singular matrix can slip through with a zero-ish
            // pivot; treat that as a failure and keep escalating.
            let min_pivot = (0..m)
                .map(|i| chol.l_dirty()[(i, i)])
                .fold(f64::INFINITY, f64::min);
            if m == 0 || min_pivot * min_pivot > 1e-12 * max_diag {
                return Some((chol, jitter));
            }
        }
        jitter = if jitter == 0.0 {
            JITTER_BASE
        } else {
            jitter * 10.0
        };
        if jitter > JITTER_MAX {
            return None;
        }
    }
}

fn lml_from_factor(l: &DMatrix<f64>, alpha: &DVector<f64>, y_std: &DVector<f64>) -> f64 {
    let m = y_std.len() as f64;
    let log_det_half: f64 = (0..y_std.len()).map(|i| l[(i, i)].ln()).sum();
    -0.5 * y_std.dot(alpha) - log_det_half - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
}

/// Search objective: hyperparameters whose kernel only factorizes with added
/// jitter are rejected outright, so the fit cannot settle on a near-singular
/// kernel that jitter would silently turn into extra noise.
fn log_marginal_for(x: &[Vec<f64>], y_std: &DVector<f64>, params: &KernelParams) -> Option<f64> {
    let base = kernel_matrix(x, params);
    let (chol, jitter) = cholesky_with_jitter(&base, params.noise_variance)?;
    if jitter > 0.0 {
        return None;
    }
    let alpha = chol.solve(y_std);
    Some(lml_from_factor(&chol.l(), &alpha, y_std))
}

/// Deterministic log-uniform multi-start seeds, scaled to the input cloud.
pub(crate) fn multistart_seeds(x: &[Vec<f64>], count: usize) -> Vec<KernelParams> {
    // The mean pairwise distance sets the lengthscale decade.
    let m = x.len();
    let mut dist_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in 0..i {
            dist_sum += euclid(&x[i], &x[j]);
            pairs += 1;
        }
    }
    let scale = if pairs == 0 || dist_sum == 0.0 {
        1.0
    } else {
        dist_sum / pairs as f64
    };

    let mut state = 0x5eed_cafe_f00d_0001u64;
    let mut uniform = || {
        // splitmix64
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    let log_uniform = |lo: f64, hi: f64, u: f64| (lo.ln() + u * (hi.ln() - lo.ln())).exp();

    (0..count)
        .map(|_| KernelParams {
            signal_variance: log_uniform(0.1, 10.0, uniform()).clamp(PARAM_LO, PARAM_HI),
            lengthscale: log_uniform(0.1 * scale, 10.0 * scale, uniform())
                .clamp(PARAM_LO, PARAM_HI),
            noise_variance: log_uniform(1e-8, 0.1, uniform()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    #[test]
    fn matern_values() {
        let p = KernelParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(matern52(0.0, &p), 1.0);
        let direct = (1.0 + 5.0f64.sqrt() + 5.0 / 3.0) * (-(5.0f64.sqrt())).exp();
        assert!((matern52(1.0, &p) - direct).abs() < 1e-15);
        // Scaled by the signal variance at r = 0, exactly.
        let p2 = KernelParams::new(3.7, 2.0, 0.0).unwrap();
        assert_eq!(matern52(0.0, &p2), 3.7);
        // Monotone decay past the origin region.
        let mut prev = matern52(1.0, &p);
        for k in 3..40 {
            let v = matern52(k as f64 * 0.5, &p);
            assert!(v < prev);
            prev = v;
        }
        assert!(matern52(60.0, &p) < 1e-20);
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let inputs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let targets = vec![2.5; 6];
        let model = SurrogateModel::fit(&inputs, &targets, Some(1e-8)).unwrap();
        for q in [-1.0, 0.3, 2.7, 9.0] {
            let (mu, var) = model.predict(&[q]);
            assert!((mu - 2.5).abs() < 1e-6, "mu = {mu}");
            let (_, var_std) = model.predict_standardized(&[q]);
            assert!(var_std <= model.kernel_params().signal_variance + 1e-8);
            assert!(var >= 0.0);
        }
    }

    #[test]
    fn noiseless_fit_interpolates_sine_samples() {
        let m = 10;
        let inputs: Vec<Vec<f64>> = (0..m)
            .map(|i| vec![2.0 * PI * i as f64 / (m - 1) as f64])
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|x| x[0].sin()).collect();
        let model = SurrogateModel::fit(&inputs, &targets, Some(1e-8)).unwrap();

        // Interpolation at the training points.
        for (x, y) in inputs.iter().zip(&targets) {
            let (mu, _) = model.predict(x);
            assert!((mu - y).abs() < 1e-6, "{mu} vs {y}");
        }
        // Held-out accuracy.
        let mut sq = 0.0;
        let holdout = 50;
        for k in 0..holdout {
            let x = 2.0 * PI * (k as f64 + 0.5) / holdout as f64;
            let (mu, _) = model.predict(&[x]);
            sq += (mu - x.sin()).powi(2);
        }
        let rms = (sq / holdout as f64).sqrt();
        assert!(rms < 0.05, "rms = {rms}");
    }

    #[test]
    fn strict_interpolation_at_zero_noise() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let inputs: Vec<Vec<f64>> = (0..8)
            .map(|_| vec![rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)])
            .collect();
        let targets: Vec<f64> = inputs
            .iter()
            .map(|x| (x[0] - 2.0).cos() + 0.3 * x[1])
            .collect();
        let model = SurrogateModel::fit(&inputs, &targets, Some(0.0)).unwrap();
        for (x, y) in inputs.iter().zip(&targets) {
            let (mu, var) = model.predict(x);
            assert!((mu - y).abs() < 1e-8, "{mu} vs {y}");
            let (_, var_std) = model.predict_standardized(x);
            assert!(var_std < 1e-8 * model.kernel_params().signal_variance);
            assert!(var >= 0.0);
        }
    }

    #[test]
    fn conflicting_duplicates_without_noise_are_degenerate() {
        let inputs = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, 0.5]];
        let targets = vec![0.0, 1.0, 0.3];
        let err = SurrogateModel::fit(&inputs, &targets, Some(0.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)), "{err}");
        // The same duplicates are fine once noise is fitted.
        assert!(SurrogateModel::fit(&inputs, &targets, None).is_ok());
    }

    #[test]
    fn prior_predictions() {
        let params = KernelParams::new(2.0, 1.0, 0.0).unwrap();
        let model = SurrogateModel::prior(3, params);
        let (mu, var) = model.predict(&[0.1, 0.2, 0.3]);
        assert_eq!(mu, 0.0);
        assert_eq!(var, 2.0);
    }

    #[test]
    fn posterior_matches_dense_inverse_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let m = 5;
        let inputs: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)])
            .collect();
        let targets: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let params = KernelParams::new(1.4, 1.2, 0.05).unwrap();
        let model = SurrogateModel::fit_with_params(&inputs, &targets, params).unwrap();
        assert_eq!(model.jitter(), 0.0);

        let (offset, scale) = model.target_standardization();
        let y_std: Vec<f64> = targets.iter().map(|y| (y - offset) / scale).collect();
        let k_inv = dense_inverse(&dense_kernel(&inputs, &params));

        for _ in 0..10 {
            let q = vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)];
            let k_star: Vec<f64> = inputs
                .iter()
                .map(|x| matern52(euclid(&q, x), &params))
                .collect();
            let mut mu_oracle = 0.0;
            let mut quad = 0.0;
            for i in 0..m {
                let mut ki = 0.0;
                for j in 0..m {
                    ki += k_inv[i][j] * k_star[j];
                }
                mu_oracle += ki * y_std[i];
                quad += ki * k_star[i];
            }
            let var_oracle = params.signal_variance - quad;
            let (mu, var) = model.predict(&q);
            assert!((mu - (offset + scale * mu_oracle)).abs() < 1e-8);
            assert!((var - scale * scale * var_oracle).abs() < 1e-8 * scale * scale);
        }
    }

    #[test]
    fn lml_scalar_case_and_dense_oracle() {
        // M = 1, y = 0: lml = -0.5 ln(sigma_f^2 + sigma_n^2) - 0.5 ln(2 pi).
        let params = KernelParams::new(1.7, 1.0, 0.3).unwrap();
        let model = SurrogateModel::fit_with_params(&[vec![0.0]], &[0.0], params).unwrap();
        let expected = -0.5 * (1.7f64 + 0.3).ln() - 0.5 * (2.0 * PI).ln();
        assert!((model.log_marginal_likelihood() - expected).abs() < 1e-12);

        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let inputs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0.0..4.0)]).collect();
        let targets: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = KernelParams::new(0.9, 0.8, 0.2).unwrap();
        let model = SurrogateModel::fit_with_params(&inputs, &targets, params).unwrap();
        assert!(
            (model.log_marginal_likelihood() - dense_lml(&inputs, &targets, &params)).abs() < 1e-8
        );
    }

    #[test]
    fn more_noise_raises_lml_on_pure_noise_data() {
        // Incoherent targets at unit variance: the likelihood should prefer
        // noise of about the data scale over a tiny noise floor.
        let inputs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.2]).collect();
        let targets: Vec<f64> = (0..12)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + 0.1 * (i as f64).sin()))
            .collect();
        let mut last = f64::NEG_INFINITY;
        for noise in [1e-4, 1e-2, 1e-1, 1.0] {
            let params = KernelParams::new(1.0, 1.0, noise).unwrap();
            let model = SurrogateModel::fit_with_params(&inputs, &targets, params).unwrap();
            let lml = model.log_marginal_likelihood();
            assert!((lml - dense_lml(&inputs, &targets, &params)).abs() < 1e-8);
            assert!(lml > last, "lml {lml} did not increase at noise {noise}");
            last = lml;
        }
    }

    #[test]
    fn posterior_variance_never_exceeds_prior() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let inputs: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                vec![
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                ]
            })
            .collect();
        let targets: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let model = SurrogateModel::fit(&inputs, &targets, None).unwrap();
        let p = model.kernel_params();
        for _ in 0..500 {
            let q = vec![rng.random_range(-1.0..7.3), rng.random_range(-1.0..7.3)];
            let (_, var) = model.predict_standardized(&q);
            assert!(var <= p.signal_variance + p.noise_variance + 1e-8);
        }
    }

    #[test]
    fn adding_data_never_increases_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let params = KernelParams::new(1.0, 1.5, 1e-6).unwrap();
        for _ in 0..5 {
            let mut inputs: Vec<Vec<f64>> = (0..8)
                .map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)])
                .collect();
            let mut targets: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let before = SurrogateModel::fit_with_params(&inputs, &targets, params).unwrap();
            let queries: Vec<Vec<f64>> = (0..30)
                .map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)])
                .collect();
            let var_before: Vec<f64> = queries
                .iter()
                .map(|q| before.predict_standardized(q).1)
                .collect();
            inputs.push(vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]);
            targets.push(rng.random_range(-1.0..1.0));
            let after = SurrogateModel::fit_with_params(&inputs, &targets, params).unwrap();
            for (q, vb) in queries.iter().zip(&var_before) {
                let va = after.predict_standardized(q).1;
                assert!(va <= vb + 1e-9, "variance rose from {vb} to {va}");
            }
        }
    }

    #[test]
    fn fitted_lml_dominates_every_multistart_seed() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let inputs: Vec<Vec<f64>> = (0..15)
            .map(|_| vec![rng.random_range(0.0..2.0 * PI)])
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|x| (x[0]).sin() + 0.01 * x[0]).collect();
        let model = SurrogateModel::fit(&inputs, &targets, None).unwrap();
        let final_lml = model.log_marginal_likelihood();
        for seed in multistart_seeds(&inputs, 5) {
            let at_seed = SurrogateModel::fit_with_params(&inputs, &targets, seed)
                .unwrap()
                .log_marginal_likelihood();
            assert!(
                final_lml >= at_seed - 1e-9,
                "final {final_lml} below seed value {at_seed}"
            );
        }
    }

    #[test]
    fn kernel_matrix_is_exactly_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let inputs: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let k = kernel_matrix(&inputs, &KernelParams::default());
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }

    #[test]
    fn fitting_on_only_identical_inputs_is_degenerate() {
        // Every hyperparameter candidate needs jitter here, so the search
        // rejects them all.
        let inputs = vec![vec![2.0, 1.0]; 4];
        let targets = vec![0.3; 4];
        let err = SurrogateModel::fit(&inputs, &targets, Some(0.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateData(_)), "{err}");
    }

    #[test]
    fn identical_inputs_without_conflict_survive_via_jitter() {
        let inputs = vec![vec![1.0], vec![1.0], vec![2.0]];
        let targets = vec![0.5, 0.5, 1.0];
        let model = SurrogateModel::fit_with_params(
            &inputs,
            &targets,
            KernelParams::new(1.0, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        assert!(model.jitter() > 0.0);
    }

    // --- dense test oracles, independent of the Cholesky path ---

    fn dense_kernel(x: &[Vec<f64>], params: &KernelParams) -> Vec<Vec<f64>> {
        let m = x.len();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let base = matern52(euclid(&x[i], &x[j]), params);
                        if i == j {
                            base + params.noise_variance
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Gauss-Jordan elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = a.len();
        let mut aug: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            for row in 0..m {
                if row != col {
                    let factor = aug[row][col];
                    for k in 0..2 * m {
                        aug[row][k] -= factor * aug[col][k];
                    }
                }
            }
        }
        aug.into_iter().map(|row| row[m..].to_vec()).collect()
    }

    #[allow(clippy::needless_range_loop)]
    fn dense_determinant(a: &[Vec<f64>]) -> f64 {
        let m = a.len();
        let mut mat: Vec<Vec<f64>> = a.to_vec();
        let mut det = 1.0;
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&i, &j| mat[i][col].abs().partial_cmp(&mat[j][col].abs()).unwrap())
                .unwrap();
            if pivot != col {
                mat.swap(col, pivot);
                det = -det;
            }
            det *= mat[col][col];
            for row in col + 1..m {
                let factor = mat[row][col] / mat[col][col];
                for k in col..m {
                    mat[row][k] -= factor * mat[col][k];
                }
            }
        }
        det
    }

    fn dense_lml(inputs: &[Vec<f64>], targets: &[f64], params: &KernelParams) -> f64 {
        let m = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / m;
        let var = targets.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let scale = var.sqrt().max(1e-12);
        let y: Vec<f64> = targets.iter().map(|v| (v - mean) / scale).collect();
        let k = dense_kernel(inputs, params);
        let k_inv = dense_inverse(&k);
        let mut quad = 0.0;
        for i in 0..targets.len() {
            for j in 0..targets.len() {
                quad += y[i] * k_inv[i][j] * y[j];
            }
        }
        -0.5 * quad - 0.5 * dense_determinant(&k).ln() - 0.5 * m * (2.0 * PI).ln()
    }
}
