//! One Bayesian optimizer: Latin-hypercube initial design, LCB acquisition
//! with a linearly decaying kappa, acquisition minimization over a bounds
//! box, and dataset management for a single grid point's cost function.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::gp::{KernelParams, SurrogateModel};
use crate::optim::nelder_mead;

/// Uniform candidates scanned per acquisition minimization.
const ACQ_CANDIDATES: usize = 2048;
/// Local simplex refinements started from the best candidates.
const ACQ_REFINEMENTS: usize = 5;
/// Objective-evaluation budget per refinement.
const ACQ_REFINE_EVALS: usize = 200;
/// Hyperparameters are refit every ingest while the dataset is at most this
/// large, and every 5th ingest beyond it.
const REFIT_EVERY_BELOW: usize = 100;
const REFIT_STRIDE_ABOVE: usize = 5;

/// Per-dimension search intervals for the circuit parameters (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsBox {
    lows: Vec<f64>,
    highs: Vec<f64>,
}

impl BoundsBox {
    pub fn new(lows: Vec<f64>, highs: Vec<f64>) -> Result<Self> {
        if lows.is_empty() || lows.len() != highs.len() {
            return Err(Error::InvalidSize(
                "bounds need matching nonempty low/high lists".into(),
            ));
        }
        for (i, (lo, hi)) in lows.iter().zip(&highs).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "dimension {i}: invalid interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lows, highs })
    }

    /// The default box for rotation angles: [0, 2pi] in every dimension.
    pub fn full_period(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![2.0 * std::f64::consts::PI; d])
    }

    pub fn dims(&self) -> usize {
        self.lows.len()
    }

    pub fn lows(&self) -> &[f64] {
        &self.lows
    }

    pub fn highs(&self) -> &[f64] {
        &self.highs
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x.iter().zip(&self.lows).all(|(v, lo)| v >= lo)
            && x.iter().zip(&self.highs).all(|(v, hi)| v <= hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lows).zip(&self.highs) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lows
            .iter()
            .zip(&self.highs)
            .map(|(&lo, &hi)| rng.random_range(lo..hi))
            .collect()
    }
}

/// Latin hypercube design: for every dimension, exactly one point falls in
/// each of the `m` equal-width strata, with uniform placement inside a
/// stratum and independently permuted strata per dimension.
pub fn lhs_sample<R: Rng>(m: usize, bounds: &BoundsBox, rng: &mut R) -> Vec<Vec<f64>> {
    assert!(m >= 1, "need at least one sample");
    let d = bounds.dims();
    let mut points = vec![vec![0.0; d]; m];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..m).collect();
        // Fisher-Yates with the caller's stream.
        for i in (1..m).rev() {
            let k = rng.random_range(0..=i);
            strata.swap(i, k);
        }
        let width = (bounds.highs[j] - bounds.lows[j]) / m as f64;
        for (i, point) in points.iter_mut().enumerate() {
            let u: f64 = rng.random();
            point[j] = bounds.lows[j] + (strata[i] as f64 + u) * width;
        }
    }
    points
}

/// Exploration weight at iteration `t` of `n_total`: `kappa0 (N - t) / N`.
/// Hits exactly zero at the final iteration.
pub fn kappa(t: usize, n_total: usize, kappa0: f64) -> f64 {
    debug_assert!((1..=n_total).contains(&t));
    kappa0 * (n_total - t) as f64 / n_total as f64
}

/// Lower confidence bound `mu(theta) - kappa * sigma(theta)`.
pub fn acquisition_lcb(model: &SurrogateModel, theta: &[f64], kappa: f64) -> f64 {
    let (mu, var) = model.predict(theta);
    mu - kappa * var.sqrt()
}

/// One grid point's Bayesian optimizer.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    bounds: BoundsBox,
    inputs: Vec<Vec<f64>>,
    costs: Vec<f64>,
    model: Option<SurrogateModel>,
    kappa0: f64,
    total_iterations: usize,
    t: usize,
    rng: ChaCha12Rng,
    fixed_noise: Option<f64>,
    ingest_batches: usize,
}

impl OptimizerState {
    pub fn new(
        bounds: BoundsBox,
        kappa0: f64,
        total_iterations: usize,
        fixed_noise: Option<f64>,
        rng: ChaCha12Rng,
    ) -> Result<Self> {
        if kappa0 <= 0.0 || !kappa0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kappa0 must be positive, got {kappa0}"
            )));
        }
        if total_iterations == 0 {
            return Err(Error::InvalidArgument("need at least one iteration".into()));
        }
        Ok(Self {
            bounds,
            inputs: Vec::new(),
            costs: Vec::new(),
            model: None,
            kappa0,
            total_iterations,
            t: 0,
            rng,
            fixed_noise,
            ingest_batches: 0,
        })
    }

    pub fn bounds(&self) -> &BoundsBox {
        &self.bounds
    }

    pub fn data_len(&self) -> usize {
        self.costs.len()
    }

    pub fn data(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs
            .iter()
            .map(|x| x.as_slice())
            .zip(self.costs.iter().copied())
    }

    pub fn model(&self) -> Option<&SurrogateModel> {
        self.model.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    /// Draw this optimizer's own Latin hypercube design from its stream.
    pub fn draw_initial_design(&mut self, m: usize) -> Vec<Vec<f64>> {
        lhs_sample(m, &self.bounds, &mut self.rng)
    }

    /// Draw a uniform-random point from this optimizer's stream.
    pub fn draw_uniform(&mut self) -> Vec<f64> {
        self.bounds.sample_uniform(&mut self.rng)
    }

    /// Mark one optimization iteration as finished.
    pub fn advance_iteration(&mut self) {
        debug_assert!(self.t < self.total_iterations);
        self.t += 1;
    }

    /// Kappa for the iteration about to be proposed.
    fn next_kappa(&self) -> f64 {
        let t_next = (self.t + 1).min(self.total_iterations);
        kappa(t_next, self.total_iterations, self.kappa0)
    }

    /// Approximate global minimizer of the LCB over the bounds box: the best
    /// of 2048 uniform candidates, refined by a local simplex from the top 5.
    pub fn propose_next(&mut self) -> Result<Vec<f64>> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::State("propose_next called before any model fit".into()))?;
        if self.t >= self.total_iterations {
            return Err(Error::State(format!(
                "optimizer exhausted its {} iterations",
                self.total_iterations
            )));
        }
        let kap = self.next_kappa();

        // Uniform coverage of the box, plus every observed input: in higher
        // dimensions uniform candidates alone essentially never land inside
        // the incumbent basin the surrogate minimum sits in.
        let mut candidates: Vec<Vec<f64>> = (0..ACQ_CANDIDATES)
            .map(|_| self.bounds.sample_uniform(&mut self.rng))
            .collect();
        candidates.extend(self.inputs.iter().cloned());
        let values: Vec<f64> = model
            .predict_batch(&candidates)
            .into_iter()
            .map(|(mu, var)| mu - kap * var.sqrt())
            .collect();

        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));

        let scale: Vec<f64> = self
            .bounds
            .lows
            .iter()
            .zip(&self.bounds.highs)
            .map(|(lo, hi)| 0.05 * (hi - lo))
            .collect();
        let mut best_x = candidates[order[0]].clone();
        let mut best_v = values[order[0]];
        for &idx in order.iter().take(ACQ_REFINEMENTS) {
            let objective = |x: &[f64]| acquisition_lcb(model, x, kap);
            let (x, v) = nelder_mead(
                objective,
                &candidates[idx],
                &scale,
                &self.bounds.lows,
                &self.bounds.highs,
                ACQ_REFINE_EVALS,
            );
            if v < best_v {
                best_v = v;
                best_x = x;
            }
        }
        self.bounds.clamp(&mut best_x);
        Ok(best_x)
    }

    /// Append evaluation records and refit the surrogate on the schedule.
    ///
    /// Duplicate inputs are accepted (they carry independent shot noise);
    /// non-finite costs and out-of-bounds points are rejected.
    pub fn ingest(&mut self, records: &[(Vec<f64>, f64)]) -> Result<()> {
        for (theta, cost) in records {
            if !cost.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "rejected non-finite cost {cost} at theta {theta:?}"
                )));
            }
            if !self.bounds.contains(theta) {
                return Err(Error::InvalidArgument(format!(
                    "rejected out-of-bounds theta {theta:?}"
                )));
            }
        }
        for (theta, cost) in records {
            self.inputs.push(theta.clone());
            self.costs.push(*cost);
        }
        self.ingest_batches += 1;

        let m = self.costs.len();
        let refit_hypers =
            m <= REFIT_EVERY_BELOW || self.ingest_batches.is_multiple_of(REFIT_STRIDE_ABOVE);
        let model = match (&self.model, refit_hypers) {
            (None, _) => SurrogateModel::fit(&self.inputs, &self.costs, self.fixed_noise)?,
            (Some(prev), true) => SurrogateModel::fit_warm(
                &self.inputs,
                &self.costs,
                self.fixed_noise,
                prev.kernel_params(),
            )?,
            (Some(prev), false) => {
                SurrogateModel::fit_with_params(&self.inputs, &self.costs, prev.kernel_params())?
            }
        };
        self.model = Some(model);
        Ok(())
    }

    /// The stored pair with minimal observed cost; ties break to the
    /// earliest insertion.
    pub fn best_point(&self) -> Result<(&[f64], f64)> {
        if self.costs.is_empty() {
            return Err(Error::State("best_point on an empty dataset".into()));
        }
        let mut best = 0;
        for i in 1..self.costs.len() {
            if self.costs[i] < self.costs[best] {
                best = i;
            }
        }
        Ok((&self.inputs[best], self.costs[best]))
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best_point().ok().map(|(_, c)| c)
    }

    pub fn hyperparams(&self) -> Option<KernelParams> {
        self.model.as_ref().map(|m| m.kernel_params())
    }
}
