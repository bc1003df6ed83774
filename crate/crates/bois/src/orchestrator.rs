//! The optimizer array over the physical grid: shared initialization, the
//! per-iteration propose/measure/cross-evaluate/update cycle under a sharing
//! topology, and final high-shot reporting.
//!
//! Each iteration runs in lockstep: every proposal is generated against the
//! models from the end of the previous iteration, the full Pauli set is
//! evaluated once per proposal, and the resulting expectation vectors are
//! re-weighted into the energy of every receiving grid point. Per-optimizer
//! work may fan out across workers; all randomness flows through
//! counter-derived streams, so results are identical at any worker count.

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bo::{lhs_sample, BoundsBox, OptimizerState};
use crate::circuit::{measure_pauli_set, AnsatzCircuit, ExpectationSet, Shots};
use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::oracle;
use crate::pauli::{ParameterizedHamiltonian, PhysicalGrid};
use crate::stream;

/// Which optimizers receive each circuit evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingStrategy {
    /// One isolated optimizer per grid point.
    Independent,
    /// Isolated optimizers, each spending this many additional private
    /// evaluations at uniform-random parameter points per iteration.
    IndependentPlusRandom(usize),
    /// Cross-evaluations flow between adjacent grid points (two neighbours
    /// in 1D, the 4-neighbourhood in 2D).
    NearestNeighbour,
    /// Every optimizer sees every measurement.
    AllToAll,
}

impl SharingStrategy {
    /// True when measurement results are reused across grid points, which
    /// also makes the initial design shared.
    pub fn shares_measurements(&self) -> bool {
        matches!(
            self,
            SharingStrategy::NearestNeighbour | SharingStrategy::AllToAll
        )
    }

    /// Extra private evaluations per optimizer per iteration.
    pub fn extra_evaluations(&self) -> usize {
        match self {
            SharingStrategy::IndependentPlusRandom(k) => *k,
            _ => 0,
        }
    }

    /// Grid points whose evaluations optimizer `alpha` receives (excluding
    /// its own), in ascending index order.
    pub fn neighbors(&self, grid: &PhysicalGrid, alpha: usize) -> Vec<usize> {
        match self {
            SharingStrategy::Independent | SharingStrategy::IndependentPlusRandom(_) => vec![],
            SharingStrategy::AllToAll => (0..grid.num_points()).filter(|&b| b != alpha).collect(),
            SharingStrategy::NearestNeighbour => {
                let idx = grid.multi_index(alpha);
                let mut out = Vec::new();
                for dim in 0..grid.dims() {
                    let len = grid.axes()[dim].len();
                    if idx[dim] > 0 {
                        let mut j = idx.clone();
                        j[dim] -= 1;
                        out.push(grid.flat_index(&j));
                    }
                    if idx[dim] + 1 < len {
                        let mut j = idx.clone();
                        j[dim] += 1;
                        out.push(grid.flat_index(&j));
                    }
                }
                out.sort_unstable();
                out
            }
        }
    }

    /// Stable text label for file names and tables.
    pub fn label(&self) -> String {
        match self {
            SharingStrategy::Independent => "independent".into(),
            SharingStrategy::IndependentPlusRandom(k) => format!("independent_plus_random_{k}"),
            SharingStrategy::NearestNeighbour => "nearest_neighbour".into(),
            SharingStrategy::AllToAll => "all_to_all".into(),
        }
    }
}

/// Expectation backend: exact statevector contraction or binomial shot
/// sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Exact,
    #[serde(rename = "shots", alias = "sampled")]
    Sampled,
}

fn default_initial_points() -> usize {
    10
}
fn default_iterations() -> usize {
    30
}
fn default_kappa0() -> f64 {
    2.0
}
fn default_shots_opt() -> u32 {
    1024
}
fn default_shots_final() -> u32 {
    8192
}

/// Parameters of one optimizer-array run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: SharingStrategy,
    pub backend: BackendMode,
    /// Initial design size M.
    #[serde(default = "default_initial_points")]
    pub initial_points: usize,
    /// Optimization iterations N.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_kappa0")]
    pub kappa0: f64,
    #[serde(default = "default_shots_opt")]
    pub shots_opt: u32,
    #[serde(default = "default_shots_final")]
    pub shots_final: u32,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.initial_points < 1 {
            return Err(Error::Config("initial_points must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return Err(Error::Config(format!(
                "kappa0 must be positive, got {}",
                self.kappa0
            )));
        }
        if self.backend == BackendMode::Sampled && (self.shots_opt == 0 || self.shots_final == 0) {
            return Err(Error::Config("shot counts must be at least 1".into()));
        }
        Ok(())
    }

    fn opt_shots(&self) -> Shots {
        match self.backend {
            BackendMode::Exact => Shots::Exact,
            BackendMode::Sampled => Shots::Count(self.shots_opt),
        }
    }

    fn final_shots(&self) -> Shots {
        match self.backend {
            BackendMode::Exact => Shots::Exact,
            BackendMode::Sampled => Shots::Count(self.shots_final),
        }
    }
}

/// One measured parameter point: the shared unit of information.
#[derive(Clone, Debug)]
pub struct EvaluationRecord {
    pub theta: Vec<f64>,
    pub expectations: ExpectationSet,
    /// Proposing optimizer, or `None` for the shared initial design.
    pub origin: Option<usize>,
    /// 0 for initialization, then 1..=N.
    pub iteration: usize,
}

/// In-flight state of an optimizer-array run.
#[derive(Debug)]
pub struct RunState<'a> {
    hamiltonian: &'a ParameterizedHamiltonian,
    ansatz: &'a AnsatzCircuit,
    config: RunConfig,
    optimizers: Vec<OptimizerState>,
    measurement_rngs: Vec<ChaCha12Rng>,
    ledger: Vec<EvaluationRecord>,
    t: usize,
    total_theta_evaluations: usize,
    evaluations_seen: Vec<usize>,
    traces: Vec<Vec<f64>>,
}

/// Outcome for one grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaOutcome {
    /// Physical coordinates of the grid point.
    pub x: Vec<f64>,
    /// Best observed parameter point.
    pub theta_star: Vec<f64>,
    /// Best observed cost during optimization.
    pub best_observed: f64,
    /// Energy re-measured at `theta_star` with the final shot budget.
    pub final_energy: f64,
    /// Best-so-far cost after initialization and after each iteration.
    pub trace: Vec<f64>,
    /// Final fitted surrogate hyperparameters.
    pub hyperparams: Option<KernelParams>,
}

/// Full result document of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: SharingStrategy,
    pub backend: BackendMode,
    pub initial_points: usize,
    pub iterations: usize,
    pub kappa0: f64,
    pub shots_opt: u32,
    pub shots_final: u32,
    pub seed: u64,
    pub axis_names: Vec<String>,
    pub per_alpha: Vec<AlphaOutcome>,
    /// Distinct parameter points evaluated on the backend, initialization
    /// included. Final re-measurements are counted separately.
    pub total_theta_evaluations: usize,
    pub final_remeasurements: usize,
    /// Records ingested per optimizer over the whole run.
    pub evaluations_seen: Vec<usize>,
}

/// Draw the initial design(s), evaluate them, and seed every optimizer.
///
/// Sharing strategies draw one design of M points and feed it to every
/// optimizer through its own coefficient row; independent strategies give
/// each optimizer a private design of M points.
pub fn initialize<'a>(
    hamiltonian: &'a ParameterizedHamiltonian,
    ansatz: &'a AnsatzCircuit,
    config: RunConfig,
) -> Result<RunState<'a>> {
    config.validate()?;
    if ansatz.num_qubits() != hamiltonian.num_qubits() {
        return Err(Error::Config(format!(
            "ansatz acts on {} qubits but the Hamiltonian has {}",
            ansatz.num_qubits(),
            hamiltonian.num_qubits()
        )));
    }
    if ansatz.num_params() == 0 {
        return Err(Error::Config(
            "ansatz has no free parameters to optimize".into(),
        ));
    }

    let grid_size = hamiltonian.grid().num_points();
    let d = ansatz.num_params();
    let bounds = BoundsBox::full_period(d)?;
    // Exact evaluations carry no shot noise; pin a tiny fixed noise floor so
    // repeated proposals of the same point stay factorizable.
    let fixed_noise = match config.backend {
        BackendMode::Exact => Some(1e-8),
        BackendMode::Sampled => None,
    };

    let mut optimizers = (0..grid_size)
        .map(|alpha| {
            OptimizerState::new(
                bounds.clone(),
                config.kappa0,
                config.iterations,
                fixed_noise,
                stream::derive_rng(config.seed, stream::optimizer_stream(alpha)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut measurement_rngs: Vec<ChaCha12Rng> = (0..grid_size)
        .map(|alpha| stream::derive_rng(config.seed, stream::measurement_stream(alpha)))
        .collect();

    let mut ledger = Vec::new();
    let mut total_theta_evaluations = 0usize;
    let mut evaluations_seen = vec![0usize; grid_size];
    let paulis = hamiltonian.paulis();
    let shots = config.opt_shots();

    if config.strategy.shares_measurements() {
        let mut shared_rng = stream::derive_rng(config.seed, stream::SHARED_INIT);
        let points = lhs_sample(config.initial_points, &bounds, &mut shared_rng);
        for theta in points {
            let expectations = measure_pauli_set(ansatz, &theta, paulis, shots, &mut shared_rng)?;
            ledger.push(EvaluationRecord {
                theta,
                expectations,
                origin: None,
                iteration: 0,
            });
            total_theta_evaluations += 1;
        }
        let records = &ledger;
        let seen: Vec<usize> = optimizers
            .par_iter_mut()
            .enumerate()
            .map(|(alpha, opt)| -> Result<usize> {
                let batch: Vec<(Vec<f64>, f64)> = records
                    .iter()
                    .map(|rec| {
                        Ok((
                            rec.theta.clone(),
                            hamiltonian
                                .energy_from_expectations(alpha, &rec.expectations.values)?,
                        ))
                    })
                    .collect::<Result<_>>()?;
                opt.ingest(&batch)?;
                Ok(batch.len())
            })
            .collect::<Result<_>>()?;
        for (alpha, s) in seen.into_iter().enumerate() {
            evaluations_seen[alpha] += s;
        }
    } else {
        let per_alpha: Vec<Vec<EvaluationRecord>> = optimizers
            .par_iter_mut()
            .zip(measurement_rngs.par_iter_mut())
            .enumerate()
            .map(|(alpha, (opt, mrng))| -> Result<Vec<EvaluationRecord>> {
                let design = opt.draw_initial_design(config.initial_points);
                let mut records = Vec::with_capacity(design.len());
                let mut batch = Vec::with_capacity(design.len());
                for theta in design {
                    let expectations = measure_pauli_set(ansatz, &theta, paulis, shots, mrng)?;
                    let cost = hamiltonian.energy_from_expectations(alpha, &expectations.values)?;
                    batch.push((theta.clone(), cost));
                    records.push(EvaluationRecord {
                        theta,
                        expectations,
                        origin: Some(alpha),
                        iteration: 0,
                    });
                }
                opt.ingest(&batch)?;
                Ok(records)
            })
            .collect::<Result<_>>()?;
        for (alpha, records) in per_alpha.into_iter().enumerate() {
            evaluations_seen[alpha] += records.len();
            total_theta_evaluations += records.len();
            ledger.extend(records);
        }
    }

    let traces: Vec<Vec<f64>> = optimizers
        .iter()
        .map(|o| vec![o.best_cost().expect("seeded dataset")])
        .collect();

    Ok(RunState {
        hamiltonian,
        ansatz,
        config,
        optimizers,
        measurement_rngs,
        ledger,
        t: 0,
        total_theta_evaluations,
        evaluations_seen,
        traces,
    })
}

impl RunState<'_> {
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn ledger(&self) -> &[EvaluationRecord] {
        &self.ledger
    }

    pub fn total_theta_evaluations(&self) -> usize {
        self.total_theta_evaluations
    }

    pub fn evaluations_seen(&self) -> &[usize] {
        &self.evaluations_seen
    }

    pub fn optimizer(&self, alpha: usize) -> &OptimizerState {
        &self.optimizers[alpha]
    }

    /// One synchronous iteration: propose everywhere, evaluate the Pauli set
    /// once per proposal, share cross-evaluations, update every model.
    pub fn iterate(&mut self) -> Result<()> {
        if self.t >= self.config.iterations {
            return Err(Error::State(format!(
                "run already completed its {} iterations",
                self.config.iterations
            )));
        }
        let hamiltonian = self.hamiltonian;
        let ansatz = self.ansatz;
        let paulis = hamiltonian.paulis();
        let shots = self.config.opt_shots();
        let extra = self.config.strategy.extra_evaluations();
        let strategy = self.config.strategy;
        let iteration = self.t + 1;

        // Propose against last iteration's models, then evaluate. Proposals
        // never interleave with model updates, so scheduling cannot change
        // results.
        type Bundle = (EvaluationRecord, Vec<EvaluationRecord>);
        let bundles: Vec<Bundle> = self
            .optimizers
            .par_iter_mut()
            .zip(self.measurement_rngs.par_iter_mut())
            .enumerate()
            .map(|(alpha, (opt, mrng))| -> Result<Bundle> {
                let theta = opt.propose_next()?;
                let expectations = measure_pauli_set(ansatz, &theta, paulis, shots, mrng)?;
                let proposal = EvaluationRecord {
                    theta,
                    expectations,
                    origin: Some(alpha),
                    iteration,
                };
                let extras = (0..extra)
                    .map(|_| {
                        let th = opt.draw_uniform();
                        let ex = measure_pauli_set(ansatz, &th, paulis, shots, mrng)?;
                        Ok(EvaluationRecord {
                            theta: th,
                            expectations: ex,
                            origin: Some(alpha),
                            iteration,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((proposal, extras))
            })
            .collect::<Result<_>>()?;

        let proposals: Vec<&EvaluationRecord> = bundles.iter().map(|(p, _)| p).collect();

        // Cross-evaluate and update. Receivers convert each record through
        // their own coefficient row; nothing is re-measured.
        let seen: Vec<usize> = self
            .optimizers
            .par_iter_mut()
            .enumerate()
            .map(|(alpha, opt)| -> Result<usize> {
                let mut batch: Vec<(Vec<f64>, f64)> = Vec::new();
                if strategy.shares_measurements() {
                    let mut sources = strategy.neighbors(hamiltonian.grid(), alpha);
                    sources.push(alpha);
                    sources.sort_unstable();
                    for beta in sources {
                        let rec = proposals[beta];
                        batch.push((
                            rec.theta.clone(),
                            hamiltonian
                                .energy_from_expectations(alpha, &rec.expectations.values)?,
                        ));
                    }
                } else {
                    let (proposal, extras) = &bundles[alpha];
                    batch.push((
                        proposal.theta.clone(),
                        hamiltonian
                            .energy_from_expectations(alpha, &proposal.expectations.values)?,
                    ));
                    for rec in extras {
                        batch.push((
                            rec.theta.clone(),
                            hamiltonian
                                .energy_from_expectations(alpha, &rec.expectations.values)?,
                        ));
                    }
                }
                opt.ingest(&batch)?;
                opt.advance_iteration();
                Ok(batch.len())
            })
            .collect::<Result<_>>()?;

        // Merge the ledger at the barrier: proposals first, then extras,
        // both in grid order.
        let grid_size = self.optimizers.len();
        self.total_theta_evaluations += grid_size * (1 + extra);
        for (alpha, s) in seen.into_iter().enumerate() {
            self.evaluations_seen[alpha] += s;
        }
        let mut extras_by_alpha = Vec::with_capacity(grid_size);
        for (proposal, extras) in bundles {
            self.ledger.push(proposal);
            extras_by_alpha.push(extras);
        }
        for extras in extras_by_alpha {
            self.ledger.extend(extras);
        }
        for (opt, trace) in self.optimizers.iter().zip(self.traces.iter_mut()) {
            trace.push(opt.best_cost().expect("nonempty dataset"));
        }
        self.t += 1;
        Ok(())
    }

    /// Re-measure every optimizer's best point with the final shot budget
    /// and assemble the result document.
    pub fn finalize(mut self) -> Result<RunResult> {
        if self.t != self.config.iterations {
            return Err(Error::State(format!(
                "finalize called at iteration {} of {}",
                self.t, self.config.iterations
            )));
        }
        let hamiltonian = self.hamiltonian;
        let ansatz = self.ansatz;
        let paulis = hamiltonian.paulis();
        let shots = self.config.final_shots();

        let mut per_alpha: Vec<AlphaOutcome> = self
            .optimizers
            .par_iter_mut()
            .zip(self.measurement_rngs.par_iter_mut())
            .enumerate()
            .map(|(alpha, (opt, mrng))| -> Result<AlphaOutcome> {
                let (theta_star, best_observed) = {
                    let (t, c) = opt.best_point()?;
                    (t.to_vec(), c)
                };
                let expectations = measure_pauli_set(ansatz, &theta_star, paulis, shots, mrng)?;
                let final_energy =
                    hamiltonian.energy_from_expectations(alpha, &expectations.values)?;
                Ok(AlphaOutcome {
                    x: hamiltonian.grid().point(alpha),
                    theta_star,
                    best_observed,
                    final_energy,
                    trace: Vec::new(),
                    hyperparams: opt.hyperparams(),
                })
            })
            .collect::<Result<_>>()?;

        for (outcome, trace) in per_alpha.iter_mut().zip(self.traces.drain(..)) {
            outcome.trace = trace;
        }
        let grid_size = per_alpha.len();

        Ok(RunResult {
            strategy: self.config.strategy,
            backend: self.config.backend,
            initial_points: self.config.initial_points,
            iterations: self.config.iterations,
            kappa0: self.config.kappa0,
            shots_opt: self.config.shots_opt,
            shots_final: self.config.shots_final,
            seed: self.config.seed,
            axis_names: hamiltonian.grid().axis_names().to_vec(),
            per_alpha,
            total_theta_evaluations: self.total_theta_evaluations,
            final_remeasurements: grid_size,
            evaluations_seen: self.evaluations_seen,
        })
    }
}

/// Initialize, iterate N times, finalize.
pub fn run(
    hamiltonian: &ParameterizedHamiltonian,
    ansatz: &AnsatzCircuit,
    config: RunConfig,
) -> Result<RunResult> {
    let mut state = initialize(hamiltonian, ansatz, config)?;
    for _ in 0..config.iterations {
        state.iterate()?;
    }
    state.finalize()
}

/// Quantile summary of an error sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
}

impl ErrorSummary {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            // Linear interpolation between order statistics.
            let h = (sorted.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Some(Self {
            count: samples.len(),
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            median: q(0.5),
            q10: q(0.1),
            q25: q(0.25),
            q75: q(0.75),
            q90: q(0.9),
        })
    }
}

/// Error distribution of one strategy over repeated runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrategyDistribution {
    pub strategy: SharingStrategy,
    /// `raw_errors[rep][alpha] = E*(alpha) - E_exact(alpha)`.
    pub raw_errors: Vec<Vec<f64>>,
    pub per_alpha: Vec<ErrorSummary>,
    pub aggregate: Option<ErrorSummary>,
}

/// Comparison of several sharing strategies on one problem family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareResult {
    pub exact_energies: Vec<f64>,
    pub repetitions: usize,
    pub strategies: Vec<StrategyDistribution>,
}

/// Run every strategy `repetitions` times against the exact ground energies
/// and collect final-error distributions. Repetition seeds derive from the
/// template seed, so each strategy sees the same seed sequence.
pub fn compare_strategies(
    hamiltonian: &ParameterizedHamiltonian,
    ansatz: &AnsatzCircuit,
    template: RunConfig,
    strategies: &[SharingStrategy],
    repetitions: usize,
) -> Result<CompareResult> {
    let exact_energies = oracle::exact_ground_energies(hamiltonian)?;
    let mut out = Vec::with_capacity(strategies.len());
    for (si, &strategy) in strategies.iter().enumerate() {
        let raw_errors: Vec<Vec<f64>> = (0..repetitions)
            .into_par_iter()
            .map(|rep| -> Result<Vec<f64>> {
                let config = RunConfig {
                    strategy,
                    seed: stream::derive_seed(template.seed, si as u64, rep as u64),
                    ..template
                };
                let result = run(hamiltonian, ansatz, config)?;
                Ok(result
                    .per_alpha
                    .iter()
                    .zip(&exact_energies)
                    .map(|(a, e)| a.final_energy - e)
                    .collect())
            })
            .collect::<Result<_>>()?;
        let grid_size = exact_energies.len();
        let per_alpha: Vec<ErrorSummary> = (0..grid_size)
            .filter_map(|alpha| {
                let column: Vec<f64> = raw_errors.iter().map(|row| row[alpha]).collect();
                ErrorSummary::from_samples(&column)
            })
            .collect();
        let flat: Vec<f64> = raw_errors.iter().flatten().copied().collect();
        out.push(StrategyDistribution {
            strategy,
            raw_errors,
            per_alpha,
            aggregate: ErrorSummary::from_samples(&flat),
        });
    }
    Ok(CompareResult {
        exact_energies,
        repetitions,
        strategies: out,
    })
}
