//! Configuration-driven commands: build ansatz circuits, run single
//! experiments, compare sharing strategies, and emit exact reference tables.
//!
//! Each command consumes one JSON configuration document and writes
//! deterministic data files (JSON result documents and CSV tables with
//! 12-significant-digit floats) into the output directory. The worker count
//! changes wall-clock time only, never file contents.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::builder::{self, ConnectivityGraph, GrowthConfig, RotationSet, ShrinkConfig};
use crate::circuit::AnsatzCircuit;
use crate::error::{Error, Result};
use crate::oracle;
use crate::orchestrator::{compare_strategies, BackendMode, RunConfig, RunResult, SharingStrategy};
use crate::pauli::{ParameterizedHamiltonian, PhysicalGrid};
use crate::stream;

/// Where the Hamiltonian family comes from: a file in the standard format,
/// or the built-in spin-chain generator.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianSource {
    Path(PathBuf),
    SpinChain { spin_chain: SpinChainSpec },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinChainSpec {
    pub n: usize,
    pub axes: Vec<Vec<f64>>,
    pub axis_names: Vec<String>,
}

fn default_backend() -> BackendMode {
    BackendMode::Exact
}
fn default_rotation() -> RotationSet {
    RotationSet::RealValued
}
fn default_threshold() -> f64 {
    1e-7
}
fn default_max_blocks() -> usize {
    12
}
fn default_removal_tol() -> f64 {
    0.05
}
fn default_const_tol() -> f64 {
    0.02
}
fn default_true() -> bool {
    true
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

/// Ansatz-builder settings inside the experiment configuration.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderSettings {
    /// Physical coordinates of the build target (generator-backed
    /// Hamiltonians only). Must not coincide with any optimizer grid point.
    #[serde(default)]
    pub target_point: Option<Vec<f64>>,
    /// Alternative: a Hamiltonian file holding the target, plus the grid
    /// index to use from it.
    #[serde(default)]
    pub target_file: Option<PathBuf>,
    #[serde(default)]
    pub target_alpha: usize,
    /// Allowed two-qubit couplings as an edge list.
    pub connectivity: Vec<(usize, usize)>,
    #[serde(default = "default_rotation")]
    pub rotation: RotationSet,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_blocks")]
    pub max_blocks: usize,
    #[serde(default = "default_removal_tol")]
    pub removal_tol: f64,
    #[serde(default = "default_const_tol")]
    pub const_tol: f64,
    #[serde(default)]
    pub eta_schedule: Option<Vec<f64>>,
    /// Freeze angles that stay constant across the grid after shrinking.
    #[serde(default = "default_true")]
    pub fix_constant: bool,
}

/// One experiment configuration document.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianSource,
    #[serde(default)]
    pub ansatz: Option<PathBuf>,
    #[serde(default = "default_backend")]
    pub backend: BackendMode,
    #[serde(default)]
    pub strategy: Option<SharingStrategy>,
    #[serde(default)]
    pub strategies: Vec<SharingStrategy>,
    #[serde(default = "default_initial_points")]
    pub initial_points: usize,
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
    #[serde(default)]
    pub repetitions: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub builder: Option<BuilderSettings>,
}

/// A parsed configuration with paths resolved against the config location.
pub struct Experiment {
    pub config: ExperimentConfig,
    base_dir: PathBuf,
}

impl Experiment {
    pub fn load(config_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(config_path)
            .map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
        let base_dir = config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Ok(Self { config, base_dir })
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn hamiltonian(&self) -> Result<ParameterizedHamiltonian> {
        match &self.config.hamiltonian {
            HamiltonianSource::Path(path) => {
                let full = self.resolve(path);
                ParameterizedHamiltonian::load(&full)
                    .map_err(|e| Error::Config(format!("{}: {e}", full.display())))
            }
            HamiltonianSource::SpinChain { spin_chain } => {
                let grid =
                    PhysicalGrid::new(spin_chain.axes.clone(), spin_chain.axis_names.clone())?;
                ParameterizedHamiltonian::spin_chain(spin_chain.n, grid)
            }
        }
    }

    pub fn ansatz(&self) -> Result<AnsatzCircuit> {
        let path = self
            .config
            .ansatz
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing the \"ansatz\" path".into()))?;
        let full = self.resolve(path);
        AnsatzCircuit::load(&full).map_err(|e| Error::Config(format!("{}: {e}", full.display())))
    }

    pub fn run_config(&self, strategy: SharingStrategy, seed: u64) -> RunConfig {
        RunConfig {
            strategy,
            backend: self.config.backend,
            initial_points: self.config.initial_points,
            iterations: self.config.iterations,
            kappa0: self.config.kappa0,
            shots_opt: self.config.shots_opt,
            shots_final: self.config.shots_final,
            seed,
        }
    }

    pub fn out_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match (override_dir, &self.config.out_dir) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => self.resolve(d),
            (None, None) => self.base_dir.join("out"),
        }
    }
}

fn fmt_float(x: f64) -> String {
    // 12 significant digits.
    format!("{x:.11e}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Run one experiment and write `result.json`, `per_alpha.csv` and
/// `traces.csv`.
pub fn cmd_run(
    config_path: &Path,
    seed_override: Option<u64>,
    workers: usize,
    out_override: Option<&Path>,
) -> Result<()> {
    let experiment = Experiment::load(config_path)?;
    let hamiltonian = experiment.hamiltonian()?;
    let ansatz = experiment.ansatz()?;
    let strategy = experiment
        .config
        .strategy
        .ok_or_else(|| Error::Config("config is missing \"strategy\"".into()))?;
    let seed = seed_override.unwrap_or(experiment.config.seed);
    let run_config = experiment.run_config(strategy, seed);

    let exact = oracle::exact_ground_energies(&hamiltonian)?;
    let result = with_pool(workers, || {
        crate::orchestrator::run(&hamiltonian, &ansatz, run_config)
    })?;

    let out = experiment.out_dir(out_override);
    std::fs::create_dir_all(&out)?;
    write_run_outputs(&out, &result, &exact)?;
    println!(
        "run complete: {} grid points, {} theta evaluations (+{} final re-measurements)",
        result.per_alpha.len(),
        result.total_theta_evaluations,
        result.final_remeasurements
    );
    println!("wrote {}", out.join("result.json").display());
    Ok(())
}

fn write_run_outputs(out: &Path, result: &RunResult, exact: &[f64]) -> Result<()> {
    std::fs::write(
        out.join("result.json"),
        serde_json::to_string_pretty(result)?,
    )?;

    let mut header: Vec<&str> = result.axis_names.iter().map(|s| s.as_str()).collect();
    header.extend(["e_star", "e_exact", "error"]);
    let rows: Vec<Vec<String>> = result
        .per_alpha
        .iter()
        .zip(exact)
        .map(|(a, &e)| {
            let mut row: Vec<String> = a.x.iter().map(|&v| fmt_float(v)).collect();
            row.push(fmt_float(a.final_energy));
            row.push(fmt_float(e));
            row.push(fmt_float(a.final_energy - e));
            row
        })
        .collect();
    write_csv(&out.join("per_alpha.csv"), &header, &rows)?;

    let mut trace_rows = Vec::new();
    for (alpha, a) in result.per_alpha.iter().enumerate() {
        for (t, &best) in a.trace.iter().enumerate() {
            trace_rows.push(vec![alpha.to_string(), t.to_string(), fmt_float(best)]);
        }
    }
    write_csv(
        &out.join("traces.csv"),
        &["alpha", "iteration", "best_so_far"],
        &trace_rows,
    )?;
    Ok(())
}

/// Compare the configured strategies over repeated runs; writes
/// `compare.json`, `compare_raw.csv`, and one summary table per strategy.
pub fn cmd_compare(
    config_path: &Path,
    seed_override: Option<u64>,
    workers: usize,
    out_override: Option<&Path>,
) -> Result<()> {
    let experiment = Experiment::load(config_path)?;
    if experiment.config.backend != BackendMode::Exact {
        return Err(Error::Config(
            "compare needs the exact backend (the error reference is the exact oracle)".into(),
        ));
    }
    let strategies = experiment.config.strategies.clone();
    if strategies.is_empty() {
        return Err(Error::Config(
            "config is missing a nonempty \"strategies\" list".into(),
        ));
    }
    let hamiltonian = experiment.hamiltonian()?;
    let ansatz = experiment.ansatz()?;
    let seed = seed_override.unwrap_or(experiment.config.seed);
    let template = experiment.run_config(strategies[0], seed);
    let repetitions = experiment.config.repetitions;

    let comparison = with_pool(workers, || {
        compare_strategies(&hamiltonian, &ansatz, template, &strategies, repetitions)
    })?;

    let out = experiment.out_dir(out_override);
    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("compare.json"),
        serde_json::to_string_pretty(&comparison)?,
    )?;

    let mut raw_rows = Vec::new();
    for dist in &comparison.strategies {
        for (rep, row) in dist.raw_errors.iter().enumerate() {
            for (alpha, &err) in row.iter().enumerate() {
                raw_rows.push(vec![
                    dist.strategy.label(),
                    rep.to_string(),
                    alpha.to_string(),
                    fmt_float(err),
                ]);
            }
        }
    }
    write_csv(
        &out.join("compare_raw.csv"),
        &["strategy", "repetition", "alpha", "error"],
        &raw_rows,
    )?;

    for dist in &comparison.strategies {
        let mut rows: Vec<Vec<String>> = dist
            .per_alpha
            .iter()
            .enumerate()
            .map(|(alpha, s)| summary_row(alpha.to_string(), s))
            .collect();
        if let Some(agg) = &dist.aggregate {
            rows.push(summary_row("aggregate".into(), agg));
        }
        write_csv(
            &out.join(format!("compare_summary_{}.csv", dist.strategy.label())),
            &[
                "alpha", "count", "mean", "median", "q10", "q25", "q75", "q90",
            ],
            &rows,
        )?;
    }
    println!(
        "compared {} strategies x {} repetitions on {} grid points",
        comparison.strategies.len(),
        repetitions,
        comparison.exact_energies.len()
    );
    println!("wrote {}", out.join("compare.json").display());
    Ok(())
}

fn summary_row(label: String, s: &crate::orchestrator::ErrorSummary) -> Vec<String> {
    vec![
        label,
        s.count.to_string(),
        fmt_float(s.mean),
        fmt_float(s.median),
        fmt_float(s.q10),
        fmt_float(s.q25),
        fmt_float(s.q75),
        fmt_float(s.q90),
    ]
}

/// Exact ground-state reference energies for every grid point.
pub fn cmd_exact(config_path: &Path, workers: usize, out_override: Option<&Path>) -> Result<()> {
    let experiment = Experiment::load(config_path)?;
    let hamiltonian = experiment.hamiltonian()?;
    let exact = with_pool(workers, || oracle::exact_ground_energies(&hamiltonian))?;

    let out = experiment.out_dir(out_override);
    std::fs::create_dir_all(&out)?;
    let grid = hamiltonian.grid();
    let mut header: Vec<&str> = grid.axis_names().iter().map(|s| s.as_str()).collect();
    header.push("e_exact");
    let rows: Vec<Vec<String>> = exact
        .iter()
        .enumerate()
        .map(|(alpha, &e)| {
            let mut row: Vec<String> = grid.point(alpha).iter().map(|&v| fmt_float(v)).collect();
            row.push(fmt_float(e));
            row
        })
        .collect();
    write_csv(&out.join("exact.csv"), &header, &rows)?;
    println!(
        "wrote {} ({} rows)",
        out.join("exact.csv").display(),
        exact.len()
    );
    Ok(())
}

/// Build an ansatz for the configured target state: grow, shrink, optionally
/// freeze constant angles, and write the ansatz file. Returns whether the
/// build converged.
pub fn cmd_build_ansatz(
    config_path: &Path,
    seed_override: Option<u64>,
    workers: usize,
    out_override: Option<&Path>,
) -> Result<bool> {
    let experiment = Experiment::load(config_path)?;
    let settings = experiment
        .config
        .builder
        .clone()
        .ok_or_else(|| Error::Config("config is missing the \"builder\" section".into()))?;
    let hamiltonian = experiment.hamiltonian()?;
    let seed = seed_override.unwrap_or(experiment.config.seed);

    // Resolve the build target, which must not sit on an optimizer grid
    // point.
    let target_hamiltonian: ParameterizedHamiltonian;
    let target_alpha: usize;
    let target_x: Vec<f64>;
    match (&settings.target_point, &settings.target_file) {
        (Some(point), None) => {
            let spec = match &experiment.config.hamiltonian {
                HamiltonianSource::SpinChain { spin_chain } => spin_chain,
                HamiltonianSource::Path(_) => {
                    return Err(Error::Config(
                        "target_point needs a generator-backed Hamiltonian; \
                         file-backed families must use target_file"
                            .into(),
                    ))
                }
            };
            if point.len() != spec.axes.len() {
                return Err(Error::Config(format!(
                    "target_point has {} coordinates for a {}-axis grid",
                    point.len(),
                    spec.axes.len()
                )));
            }
            let axes: Vec<Vec<f64>> = point.iter().map(|&v| vec![v]).collect();
            let grid = PhysicalGrid::new(axes, spec.axis_names.clone())?;
            target_hamiltonian = ParameterizedHamiltonian::spin_chain(spec.n, grid)?;
            target_alpha = 0;
            target_x = point.clone();
        }
        (None, Some(file)) => {
            let full = experiment.resolve(file);
            target_hamiltonian = ParameterizedHamiltonian::load(&full)
                .map_err(|e| Error::Config(format!("{}: {e}", full.display())))?;
            target_alpha = settings.target_alpha;
            if target_alpha >= target_hamiltonian.grid().num_points() {
                return Err(Error::Config(format!(
                    "target_alpha {target_alpha} out of range for {}",
                    full.display()
                )));
            }
            target_x = target_hamiltonian.grid().point(target_alpha);
        }
        _ => {
            return Err(Error::Config(
                "builder needs exactly one of target_point or target_file".into(),
            ))
        }
    }
    for alpha in 0..hamiltonian.grid().num_points() {
        let x = hamiltonian.grid().point(alpha);
        if x.len() == target_x.len() && x.iter().zip(&target_x).all(|(a, b)| (a - b).abs() < 1e-12)
        {
            return Err(Error::Config(format!(
                "build target {target_x:?} coincides with optimizer grid point {alpha}"
            )));
        }
    }

    let graph = ConnectivityGraph::new(hamiltonian.num_qubits(), &settings.connectivity)?;
    let (_, target_state) = oracle::dense_matrix(&target_hamiltonian, target_alpha)?.ground_state();

    let growth = GrowthConfig::new(
        settings.threshold,
        settings.max_blocks,
        settings.rotation,
        seed,
    )?;
    let mut shrink_config = ShrinkConfig::new(10.0 * settings.threshold, seed);
    shrink_config.removal_tol = settings.removal_tol;
    if let Some(etas) = &settings.eta_schedule {
        shrink_config.eta_schedule = etas.clone();
    }

    let (shrunk, fixed_circuit, grid_points) = with_pool(workers, || -> Result<_> {
        let grown = builder::grow(&target_state, &graph, &growth)?;
        let shrunk = builder::shrink(&grown, &target_state, &shrink_config)?;

        if !settings.fix_constant {
            let circuit = shrunk.circuit.clone();
            return Ok((shrunk, circuit, 0usize));
        }
        // Optimal angles against every grid point's exact target,
        // warm-started along the grid, then freeze the ones that never move.
        let points = hamiltonian.grid().num_points();
        let mut optima: Vec<Vec<f64>> = Vec::with_capacity(points);
        let mut warm = shrunk.theta.clone();
        for alpha in 0..points {
            let (_, point_target) = oracle::dense_matrix(&hamiltonian, alpha)?.ground_state();
            let mut rng = stream::derive_rng(seed, 4_000_000 + alpha as u64);
            let (theta, _) = builder::optimize_angles_from(
                &shrunk.circuit,
                &warm,
                &point_target,
                1,
                1500,
                1e-8,
                &mut rng,
            );
            warm = theta.clone();
            optima.push(theta);
        }
        let report = builder::fix_constant_angles(&shrunk.circuit, &optima, settings.const_tol)?;
        Ok((shrunk, report.circuit, points))
    })?;

    let out = experiment.out_dir(out_override);
    std::fs::create_dir_all(&out)?;
    let ansatz_path = out.join("ansatz.json");
    fixed_circuit.save(&ansatz_path)?;

    println!(
        "final infidelity (1 - F) at the build target: {:.3e}",
        shrunk.infidelity
    );
    println!("entangling blocks: {}", shrunk.blocks);
    println!(
        "free parameters: {} (constants frozen over {} grid points)",
        fixed_circuit.num_params(),
        grid_points
    );
    println!("wrote {}", ansatz_path.display());
    if !shrunk.converged {
        eprintln!(
            "warning: build did not reach the requested threshold {:.1e}",
            settings.threshold
        );
    }
    Ok(shrunk.converged)
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(f)
    }
}
