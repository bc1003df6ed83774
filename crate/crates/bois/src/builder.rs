//! Adaptive construction of depth- and parameter-efficient ansatz circuits
//! for a known target state: greedy growth of entangling blocks, then
//! regularized shrinkage of redundant rotations, then fixing of angles that
//! stay constant across the physical grid.
//!
//! Growth starts from one parameterized rotation per qubit and repeatedly
//! tries an entangling block (a CNOT padded with parameterized rotations) at
//! every legal location at both ends of the circuit, keeping the placement
//! with the greatest fidelity gain. Candidate angle optimization warm-starts
//! from the current circuit with the new block at identity, so accepted
//! fidelities never decrease.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::circuit::{fidelity, AngleSpec, AnsatzCircuit, Gate, QuantumState};
use crate::error::{Error, Result};
use crate::optim::gradient_descent;
use crate::stream;

/// Undirected coupling graph the entangling gates must live on.
#[derive(Clone, Debug)]
pub struct ConnectivityGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl ConnectivityGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(
                "connectivity graph needs at least 2 qubits".into(),
            ));
        }
        let mut normalized: Vec<(usize, usize)> = Vec::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) outside [0, {n})"
                )));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on qubit {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !normalized.contains(&e) {
                normalized.push(e);
            }
        }
        normalized.sort_unstable();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &normalized {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in adjacency.iter_mut() {
            adj.sort_unstable();
        }
        // Connectivity check: breadth-first from qubit 0.
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(q) = queue.pop() {
            for &r in &adjacency[q] {
                if !seen[r] {
                    seen[r] = true;
                    queue.push(r);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(
                "connectivity graph is not connected".into(),
            ));
        }
        Ok(Self {
            n,
            edges: normalized,
            adjacency,
        })
    }

    /// Nearest-neighbour line 0-1-2-...-(n-1).
    pub fn line(n: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::new(n, &edges)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }
}

/// Single-qubit rotation flavour used for the padding rotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSet {
    /// Arbitrary Bloch rotations as RZ.RY.RZ triples.
    Generic,
    /// A single RY per rotation; sufficient for real-valued targets.
    RealValued,
}

impl RotationSet {
    fn gates(&self, q: usize, next_param: &mut usize) -> Vec<Gate> {
        let mut free = || {
            let j = *next_param;
            *next_param += 1;
            AngleSpec::Free(j)
        };
        match self {
            RotationSet::RealValued => vec![Gate::ry(q, free())],
            RotationSet::Generic => {
                vec![
                    Gate::rz(q, free()),
                    Gate::ry(q, free()),
                    Gate::rz(q, free()),
                ]
            }
        }
    }
}

/// Growth-phase settings.
#[derive(Clone, Debug)]
pub struct GrowthConfig {
    /// Stop once 1 - F drops below this.
    pub threshold: f64,
    pub max_blocks: usize,
    pub rotation: RotationSet,
    /// Optimizer restarts per candidate placement (the first is the warm
    /// start).
    pub restarts: usize,
    /// Gradient steps per restart.
    pub opt_steps: usize,
    /// Gradient steps for polishing the accepted circuit.
    pub polish_steps: usize,
    pub seed: u64,
}

impl GrowthConfig {
    pub fn new(
        threshold: f64,
        max_blocks: usize,
        rotation: RotationSet,
        seed: u64,
    ) -> Result<Self> {
        if threshold <= 0.0 {
            return Err(Error::InvalidArgument(
                "growth threshold must be positive".into(),
            ));
        }
        Ok(Self {
            threshold,
            max_blocks,
            rotation,
            restarts: 3,
            opt_steps: 500,
            polish_steps: 4000,
            seed,
        })
    }
}

/// Shrinkage-phase settings.
#[derive(Clone, Debug)]
pub struct ShrinkConfig {
    /// Increasing regularization weights.
    pub eta_schedule: Vec<f64>,
    /// A rotation is removable when every angle sits within this of a
    /// multiple of 2 pi (radians).
    pub removal_tol: f64,
    /// Hard ceiling on 1 - F after removals; conventionally 10x the growth
    /// threshold.
    pub infidelity_budget: f64,
    pub opt_steps: usize,
    pub seed: u64,
}

impl ShrinkConfig {
    pub fn new(infidelity_budget: f64, seed: u64) -> Self {
        Self {
            eta_schedule: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
            removal_tol: 0.05,
            infidelity_budget,
            opt_steps: 1500,
            seed,
        }
    }
}

/// A grown (and possibly shrunk) circuit with its optimal angles.
#[derive(Clone, Debug)]
pub struct GrownAnsatz {
    pub circuit: AnsatzCircuit,
    pub theta: Vec<f64>,
    /// 1 - F against the build target at `theta`.
    pub infidelity: f64,
    pub blocks: usize,
    pub converged: bool,
    /// Virtual-to-physical qubit assignment pinned by accepted entanglers.
    pub mapping: Vec<Option<usize>>,
    /// Fidelity after the initial layer and after each accepted block.
    pub fidelity_history: Vec<f64>,
}

impl GrownAnsatz {
    /// Every CNOT lies on a graph edge under the final mapping.
    pub fn respects_connectivity(&self, graph: &ConnectivityGraph) -> bool {
        self.circuit.gates().iter().all(|g| {
            if g.qubits.len() != 2 {
                return true;
            }
            match (self.mapping[g.qubits[0]], self.mapping[g.qubits[1]]) {
                (Some(p), Some(q)) => graph.has_edge(p, q),
                _ => false,
            }
        })
    }
}

/// Absolute distance from `phi` to its nearest multiple of 2 pi; lies in
/// [0, pi], vanishes exactly on multiples, and is continuous.
pub fn periodic_distance(phi: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = phi.rem_euclid(tau);
    r.min(tau - r)
}

/// Multi-start gradient descent on C = 1 - F from zero angles.
pub fn optimize_angles(
    circuit: &AnsatzCircuit,
    target: &QuantumState,
    restarts: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    let mut rng = stream::derive_rng(seed, 0);
    let theta0 = vec![0.0; circuit.num_params()];
    optimize_angles_from(circuit, &theta0, target, restarts, 2000, 1e-8, &mut rng)
}

/// Multi-start gradient descent on C = 1 - F warm-started from `theta0`.
/// Returns the best (theta, fidelity) over all restarts.
pub fn optimize_angles_from(
    circuit: &AnsatzCircuit,
    theta0: &[f64],
    target: &QuantumState,
    restarts: usize,
    max_steps: usize,
    grad_tol: f64,
    rng: &mut ChaCha12Rng,
) -> (Vec<f64>, f64) {
    let cost =
        |theta: &[f64]| 1.0 - fidelity(&circuit.simulate(theta).expect("valid theta"), target);
    let mut best_theta = theta0.to_vec();
    let mut best_cost = f64::INFINITY;
    for r in 0..restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            theta0.to_vec()
        } else {
            (0..circuit.num_params())
                .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
                .collect()
        };
        let (theta, c) = gradient_descent(cost, &start, max_steps, grad_tol, 1e-5);
        if c < best_cost {
            best_cost = c;
            best_theta = theta;
        }
    }
    (best_theta, 1.0 - best_cost)
}

/// Where a candidate block goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Position {
    Start,
    End,
}

#[derive(Clone, Debug)]
struct Candidate {
    position: Position,
    control: usize,
    target_q: usize,
    /// Physical assignments this placement would pin, as (virtual, physical)
    /// pairs; empty when both qubits are already mapped.
    commits: Vec<(usize, usize)>,
}

/// Enumerate legal placements under the current partial mapping, in
/// (position, control, target) lexicographic order with `Start` first.
fn legal_candidates(
    n: usize,
    graph: &ConnectivityGraph,
    mapping: &[Option<usize>],
) -> Vec<Candidate> {
    let used: Vec<bool> = {
        let mut u = vec![false; n];
        for m in mapping.iter().flatten() {
            u[*m] = true;
        }
        u
    };
    let mut out = Vec::new();
    for position in [Position::Start, Position::End] {
        for control in 0..n {
            for target_q in 0..n {
                if control == target_q {
                    continue;
                }
                let commits = match (mapping[control], mapping[target_q]) {
                    (Some(p), Some(q)) => {
                        if graph.has_edge(p, q) {
                            Some(vec![])
                        } else {
                            None
                        }
                    }
                    (Some(p), None) => graph
                        .neighbors(p)
                        .iter()
                        .find(|&&r| !used[r])
                        .map(|&r| vec![(target_q, r)]),
                    (None, Some(q)) => graph
                        .neighbors(q)
                        .iter()
                        .find(|&&r| !used[r])
                        .map(|&r| vec![(control, r)]),
                    (None, None) => {
                        let mut found = None;
                        'search: for &(a, b) in graph.edges() {
                            for (p, q) in [(a, b), (b, a)] {
                                if !used[p] && !used[q] {
                                    found = Some(vec![(control, p), (target_q, q)]);
                                    break 'search;
                                }
                            }
                        }
                        found
                    }
                };
                if let Some(commits) = commits {
                    out.push(Candidate {
                        position,
                        control,
                        target_q,
                        commits,
                    });
                }
            }
        }
    }
    out
}

/// In the single-RY gate set, a pad rotation that would sit directly against
/// an existing free RY on the same qubit composes with it exactly
/// (RY(a) RY(b) = RY(a+b)), so emitting it only adds a redundant parameter.
fn pad_absorbed(gates: &[Gate], q: usize, against_end: bool, rotation: RotationSet) -> bool {
    if rotation != RotationSet::RealValued {
        return false;
    }
    let neighbour = if against_end {
        gates.iter().rev().find(|g| g.qubits.contains(&q))
    } else {
        gates.iter().find(|g| g.qubits.contains(&q))
    };
    matches!(
        neighbour,
        Some(g) if g.kind == crate::circuit::GateKind::RY
            && matches!(g.angles[0], AngleSpec::Free(_))
    )
}

/// Build the trial circuit for a candidate: the entangling block (pad
/// rotations, CNOT, pad rotations) spliced at the chosen end, with fresh
/// parameter indices appended after the existing ones. Pads that would
/// compose with an adjacent free rotation are skipped.
fn with_block(
    base: &AnsatzCircuit,
    candidate: &Candidate,
    rotation: RotationSet,
) -> Result<(AnsatzCircuit, usize)> {
    let (u, v) = (candidate.control, candidate.target_q);
    let mut next_param = base.num_params();
    let mut block = Vec::new();
    match candidate.position {
        Position::Start => {
            // Pads before the CNOT act on |0...0> and stay; pads after it
            // face the start of the existing circuit.
            block.extend(rotation.gates(u, &mut next_param));
            block.extend(rotation.gates(v, &mut next_param));
            block.push(Gate::cnot(u, v));
            for q in [u, v] {
                if !pad_absorbed(base.gates(), q, false, rotation) {
                    block.extend(rotation.gates(q, &mut next_param));
                }
            }
        }
        Position::End => {
            for q in [u, v] {
                if !pad_absorbed(base.gates(), q, true, rotation) {
                    block.extend(rotation.gates(q, &mut next_param));
                }
            }
            block.push(Gate::cnot(u, v));
            block.extend(rotation.gates(u, &mut next_param));
            block.extend(rotation.gates(v, &mut next_param));
        }
    }

    let mut gates = Vec::with_capacity(base.gates().len() + block.len());
    match candidate.position {
        Position::Start => {
            gates.extend(block);
            gates.extend(base.gates().iter().cloned());
        }
        Position::End => {
            gates.extend(base.gates().iter().cloned());
            gates.extend(block);
        }
    }
    let new_params = next_param - base.num_params();
    Ok((AnsatzCircuit::new(base.num_qubits(), gates)?, new_params))
}

/// Greedy growth toward `target`: add the entangling block with the greatest
/// fidelity gain until 1 - F < threshold or the block budget runs out.
pub fn grow(
    target: &QuantumState,
    graph: &ConnectivityGraph,
    config: &GrowthConfig,
) -> Result<GrownAnsatz> {
    let n = target.num_qubits();
    if graph.num_qubits() != n {
        return Err(Error::DimensionMismatch(format!(
            "graph on {} qubits, target on {n}",
            graph.num_qubits()
        )));
    }

    // Separable starting layer: one rotation per qubit.
    let mut next_param = 0usize;
    let mut gates = Vec::new();
    for q in 0..n {
        gates.extend(config.rotation.gates(q, &mut next_param));
    }
    let mut circuit = AnsatzCircuit::new(n, gates)?;
    let mut rng = stream::derive_rng(config.seed, 0);
    let theta0 = vec![0.0; circuit.num_params()];
    let (mut theta, mut fid) = optimize_angles_from(
        &circuit,
        &theta0,
        target,
        config.restarts,
        config.opt_steps,
        1e-7,
        &mut rng,
    );
    let mut mapping: Vec<Option<usize>> = vec![None; n];
    let mut blocks = 0usize;
    let mut history = vec![fid];

    while 1.0 - fid >= config.threshold && blocks < config.max_blocks {
        let candidates = legal_candidates(n, graph, &mapping);
        if candidates.is_empty() {
            break;
        }
        let step = blocks as u64;
        let rotation = config.rotation;
        let base = &circuit;
        let warm_theta = &theta;
        let trials: Vec<(Vec<f64>, f64)> = candidates
            .par_iter()
            .enumerate()
            .map(|(idx, cand)| -> Result<(Vec<f64>, f64)> {
                let (trial, new_params) = with_block(base, cand, rotation)?;
                // A zero-angle block is the identity, so the warm start
                // begins exactly at the current fidelity.
                let mut warm = warm_theta.clone();
                warm.extend(std::iter::repeat_n(0.0, new_params));
                let mut crng = stream::derive_rng(config.seed, 1 + step * 4096 + idx as u64);
                Ok(optimize_angles_from(
                    &trial,
                    &warm,
                    target,
                    config.restarts,
                    config.opt_steps,
                    1e-6,
                    &mut crng,
                ))
            })
            .collect::<Result<_>>()?;

        // Greatest fidelity gain wins; the enumeration order breaks ties by
        // lowest (position, qubit pair).
        let mut best = 0usize;
        for i in 1..trials.len() {
            if trials[i].1 > trials[best].1 {
                best = i;
            }
        }
        let cand = &candidates[best];
        let (accepted, _) = with_block(&circuit, cand, rotation)?;
        circuit = accepted;
        theta = trials[best].0.clone();
        fid = trials[best].1;
        for &(virt, phys) in &cand.commits {
            mapping[virt] = Some(phys);
        }
        blocks += 1;

        // Polish the accepted circuit once it is close to converged.
        if 1.0 - fid < 100.0 * config.threshold && 1.0 - fid >= config.threshold {
            let mut prng = stream::derive_rng(config.seed, 2_000_000 + step);
            let (t, f) = optimize_angles_from(
                &circuit,
                &theta,
                target,
                1,
                config.polish_steps,
                1e-9,
                &mut prng,
            );
            if f > fid {
                theta = t;
                fid = f;
            }
        }
        history.push(fid);
    }

    Ok(GrownAnsatz {
        infidelity: 1.0 - fid,
        converged: 1.0 - fid < config.threshold,
        circuit,
        theta,
        blocks,
        mapping,
        fidelity_history: history,
    })
}

/// Regularized shrinkage: pull angles toward multiples of 2 pi with an
/// increasing periodic-L1 weight, remove rotations that land there, and stop
/// before any removal would push 1 - F over the budget.
pub fn shrink(
    grown: &GrownAnsatz,
    target: &QuantumState,
    config: &ShrinkConfig,
) -> Result<GrownAnsatz> {
    let mut circuit = grown.circuit.clone();
    // Pure-fidelity angles (what the phase returns) are kept apart from the
    // regularized angles, which only ever drive removal decisions.
    let mut fid_theta = grown.theta.clone();
    let mut reg_theta = grown.theta.clone();
    let mut rng = stream::derive_rng(config.seed, 3_000_000);

    for &eta in &config.eta_schedule {
        // Re-optimize with the periodic regularizer over all free gate
        // angles.
        let reg_circuit = circuit.clone();
        let reg_cost = move |th: &[f64]| {
            let state = reg_circuit.simulate(th).expect("valid theta");
            let penalty: f64 = reg_circuit
                .gates()
                .iter()
                .flat_map(|g| g.free_params())
                .map(|j| periodic_distance(th[j]))
                .sum();
            1.0 - fidelity(&state, target) + eta * penalty
        };
        let (theta_reg, _) = gradient_descent(reg_cost, &reg_theta, config.opt_steps, 1e-8, 1e-5);
        reg_theta = theta_reg;

        // Rotations whose every angle is within tolerance of 2 pi k.
        let removable: Vec<usize> = circuit
            .gates()
            .iter()
            .enumerate()
            .filter(|(_, g)| {
                g.qubits.len() == 1
                    && !g.angles.is_empty()
                    && g.angles.iter().all(|a| match a {
                        AngleSpec::Free(j) => periodic_distance(reg_theta[*j]) < config.removal_tol,
                        AngleSpec::Fixed(_) => false,
                    })
            })
            .map(|(i, _)| i)
            .collect();
        if removable.is_empty() {
            continue;
        }

        let (trial_circuit, trial_theta) = remove_gates(&circuit, &reg_theta, &removable)?;
        let (opt_theta, fid) = optimize_angles_from(
            &trial_circuit,
            &trial_theta,
            target,
            1,
            config.opt_steps,
            1e-9,
            &mut rng,
        );
        if 1.0 - fid <= config.infidelity_budget {
            circuit = trial_circuit;
            fid_theta = opt_theta.clone();
            reg_theta = opt_theta;
        } else {
            // This removal round would appreciably degrade the fidelity;
            // keep the pre-removal circuit and stop shrinking.
            break;
        }
    }

    // Settle on the pure-fidelity optimum of whatever survived.
    let (theta, fid) = optimize_angles_from(
        &circuit,
        &fid_theta,
        target,
        1,
        config.opt_steps,
        1e-9,
        &mut rng,
    );
    Ok(GrownAnsatz {
        infidelity: 1.0 - fid,
        converged: 1.0 - fid <= config.infidelity_budget,
        circuit,
        theta,
        blocks: grown.blocks,
        mapping: grown.mapping.clone(),
        fidelity_history: grown.fidelity_history.clone(),
    })
}

/// Drop the listed gates and compact the free-parameter indices; angles of
/// surviving parameters are carried over.
fn remove_gates(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    removed: &[usize],
) -> Result<(AnsatzCircuit, Vec<f64>)> {
    let kept: Vec<Gate> = circuit
        .gates()
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, g)| g.clone())
        .collect();

    // Parameters still referenced, in ascending old-index order.
    let mut still_used: Vec<usize> = kept.iter().flat_map(|g| g.free_params()).collect();
    still_used.sort_unstable();
    still_used.dedup();
    let remap: Vec<Option<usize>> = {
        let mut r = vec![None; circuit.num_params()];
        for (new, &old) in still_used.iter().enumerate() {
            r[old] = Some(new);
        }
        r
    };
    let gates: Vec<Gate> = kept
        .into_iter()
        .map(|mut g| {
            for a in g.angles.iter_mut() {
                if let AngleSpec::Free(j) = a {
                    *j = remap[*j].expect("kept parameter");
                }
            }
            g
        })
        .collect();
    let new_theta: Vec<f64> = still_used.iter().map(|&old| theta[old]).collect();
    Ok((AnsatzCircuit::new(circuit.num_qubits(), gates)?, new_theta))
}

/// Report of `fix_constant_angles`: which old parameters were frozen.
#[derive(Clone, Debug)]
pub struct FixReport {
    pub circuit: AnsatzCircuit,
    /// (old parameter index, frozen value).
    pub fixed: Vec<(usize, f64)>,
    /// Old parameter index -> new index for parameters left free.
    pub kept: Vec<(usize, usize)>,
}

/// Freeze every free angle whose optimal value stays within `const_tol`
/// across all grid points at its mean value, dropping it from the parameter
/// vector.
pub fn fix_constant_angles(
    circuit: &AnsatzCircuit,
    optima: &[Vec<f64>],
    const_tol: f64,
) -> Result<FixReport> {
    if optima.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one optimum row".into(),
        ));
    }
    let d = circuit.num_params();
    for (i, row) in optima.iter().enumerate() {
        if row.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "optimum row {i} has {} entries for {d} parameters",
                row.len()
            )));
        }
    }

    let mut fixed = Vec::new();
    let mut kept = Vec::new();
    let mut next = 0usize;
    let mut action: Vec<Option<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let column: Vec<f64> = optima.iter().map(|row| row[j]).collect();
        let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max - min < const_tol {
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            fixed.push((j, mean));
            action.push(Some(mean));
        } else {
            kept.push((j, next));
            next += 1;
            action.push(None);
        }
    }

    let gates: Vec<Gate> = circuit
        .gates()
        .iter()
        .cloned()
        .map(|mut g| {
            for a in g.angles.iter_mut() {
                if let AngleSpec::Free(j) = a {
                    *a = match action[*j] {
                        Some(value) => AngleSpec::Fixed(value),
                        None => AngleSpec::Free(kept.iter().find(|(old, _)| old == j).unwrap().1),
                    };
                }
            }
            g
        })
        .collect();

    Ok(FixReport {
        circuit: AnsatzCircuit::new(circuit.num_qubits(), gates)?,
        fixed,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{expval_exact, CostFn};
    use crate::oracle::dense_matrix;
    use crate::pauli::{ParameterizedHamiltonian, PhysicalGrid};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn periodic_distance_cases() {
        assert!((periodic_distance(3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-15);
        assert!((periodic_distance(4.0 * PI + 0.01) - 0.01).abs() < 1e-12);
        assert_eq!(periodic_distance(0.0), 0.0);
        for k in -3i32..=3 {
            assert!(periodic_distance(2.0 * PI * k as f64) < 1e-12);
        }
        // Range and continuity spot checks.
        let mut prev = periodic_distance(-10.0);
        let step = 1e-3;
        let mut x = -10.0;
        while x < 10.0 {
            x += step;
            let v = periodic_distance(x);
            assert!((0.0..=PI + 1e-12).contains(&v));
            assert!((v - prev).abs() <= step + 1e-9, "discontinuity near {x}");
            prev = v;
        }
    }

    #[test]
    fn connectivity_graph_validation() {
        assert!(
            ConnectivityGraph::new(3, &[(0, 1)]).is_err(),
            "disconnected"
        );
        assert!(
            ConnectivityGraph::new(3, &[(0, 0), (1, 2)]).is_err(),
            "self loop"
        );
        assert!(
            ConnectivityGraph::new(3, &[(0, 5), (1, 2)]).is_err(),
            "out of range"
        );
        let g = ConnectivityGraph::new(3, &[(1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.has_edge(1, 0));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn single_ry_reaches_the_flipped_state() {
        let target = {
            let c = AnsatzCircuit::new(1, vec![Gate::x(0)]).unwrap();
            c.simulate(&[]).unwrap()
        };
        let c = AnsatzCircuit::new(1, vec![Gate::ry(0, AngleSpec::Free(0))]).unwrap();
        let (theta, fid) = optimize_angles(&c, &target, 3, 7);
        assert!(fid > 1.0 - 1e-10);
        assert!(
            periodic_distance(theta[0] - PI) < 1e-4,
            "theta = {}",
            theta[0]
        );

        // First-order optimality at the returned optimum.
        let g =
            crate::circuit::gradient(&c, &theta, &CostFn::Infidelity { target: &target }).unwrap();
        let norm: f64 = g.iter().map(|v| v * v).sum::<f64>();
        assert!(norm.sqrt() < 1e-4);
    }

    #[test]
    fn already_optimal_angles_stay_put() {
        let target = {
            let c = AnsatzCircuit::new(
                2,
                vec![
                    Gate::ry(0, AngleSpec::Fixed(0.8)),
                    Gate::ry(1, AngleSpec::Fixed(1.3)),
                ],
            )
            .unwrap();
            c.simulate(&[]).unwrap()
        };
        let c = AnsatzCircuit::new(
            2,
            vec![
                Gate::ry(0, AngleSpec::Free(0)),
                Gate::ry(1, AngleSpec::Free(1)),
            ],
        )
        .unwrap();
        let mut rng = stream::derive_rng(1, 0);
        let (theta, fid) = optimize_angles_from(&c, &[0.8, 1.3], &target, 1, 200, 1e-9, &mut rng);
        assert!(fid > 1.0 - 1e-12);
        assert!((theta[0] - 0.8).abs() < 1e-6 && (theta[1] - 1.3).abs() < 1e-6);
    }

    #[test]
    fn vacuum_target_needs_no_blocks() {
        let target = QuantumState::zero(2).unwrap();
        let graph = ConnectivityGraph::line(2).unwrap();
        let config = GrowthConfig::new(1e-9, 4, RotationSet::RealValued, 3).unwrap();
        let grown = grow(&target, &graph, &config).unwrap();
        assert_eq!(grown.blocks, 0);
        assert!(grown.converged);
        // All angles are multiples of 2 pi (numerically zero here).
        assert!(grown.theta.iter().all(|&t| periodic_distance(t) < 1e-6));
    }

    #[test]
    fn bell_state_takes_exactly_one_block() {
        let target = QuantumState::from_amplitudes(vec![
            Complex64::new(1.0 / 2.0f64.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let graph = ConnectivityGraph::line(2).unwrap();
        let config = GrowthConfig::new(1e-10, 3, RotationSet::RealValued, 11).unwrap();
        let grown = grow(&target, &graph, &config).unwrap();
        assert_eq!(grown.blocks, 1);
        assert!(grown.converged, "infidelity = {}", grown.infidelity);
        assert!(grown.infidelity < 1e-10);
        assert!(grown.respects_connectivity(&graph));
        // Accepted fidelity never decreases.
        for w in grown.fidelity_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn growth_respects_a_restricted_graph() {
        let grid = PhysicalGrid::new(vec![vec![0.6]], vec!["h".into()]).unwrap();
        let h = ParameterizedHamiltonian::spin_chain(3, grid).unwrap();
        let (_, target) = dense_matrix(&h, 0).unwrap().ground_state();
        let graph = ConnectivityGraph::line(3).unwrap();
        let config = GrowthConfig::new(1e-6, 6, RotationSet::RealValued, 5).unwrap();
        let grown = grow(&target, &graph, &config).unwrap();
        assert!(grown.converged, "infidelity = {}", grown.infidelity);
        assert!(grown.respects_connectivity(&graph));
    }

    #[test]
    fn redundant_phase_rotation_is_shrunk_away() {
        // RZ acting first on |0> only shifts a global phase, so its angle
        // regularizes to a multiple of 2 pi and the gate is removed.
        let target = {
            let c = AnsatzCircuit::new(1, vec![Gate::ry(0, AngleSpec::Fixed(0.9))]).unwrap();
            c.simulate(&[]).unwrap()
        };
        let circuit = AnsatzCircuit::new(
            1,
            vec![
                Gate::rz(0, AngleSpec::Free(0)),
                Gate::ry(0, AngleSpec::Free(1)),
            ],
        )
        .unwrap();
        let mut rng = stream::derive_rng(2, 0);
        let (theta, fid) =
            optimize_angles_from(&circuit, &[0.3, 0.5], &target, 2, 800, 1e-9, &mut rng);
        let grown = GrownAnsatz {
            circuit,
            theta,
            infidelity: 1.0 - fid,
            blocks: 0,
            converged: true,
            mapping: vec![Some(0)],
            fidelity_history: vec![fid],
        };
        let config = ShrinkConfig::new(1e-6, 3);
        let shrunk = shrink(&grown, &target, &config).unwrap();
        assert_eq!(
            shrunk.circuit.gates().len(),
            1,
            "{:?}",
            shrunk.circuit.gates()
        );
        assert_eq!(shrunk.circuit.gates()[0].kind, crate::circuit::GateKind::RY);
        assert!(shrunk.infidelity <= 1e-6);
    }

    #[test]
    fn zero_eta_forces_no_removals() {
        let target = {
            let c = AnsatzCircuit::new(1, vec![Gate::ry(0, AngleSpec::Fixed(0.9))]).unwrap();
            c.simulate(&[]).unwrap()
        };
        let circuit = AnsatzCircuit::new(
            1,
            vec![
                Gate::ry(0, AngleSpec::Free(0)),
                Gate::ry(0, AngleSpec::Free(1)),
            ],
        )
        .unwrap();
        let mut rng = stream::derive_rng(4, 0);
        // Split the required rotation across both gates so neither angle
        // sits near a multiple of 2 pi.
        let (theta, fid) =
            optimize_angles_from(&circuit, &[0.45, 0.45], &target, 1, 300, 1e-9, &mut rng);
        let grown = GrownAnsatz {
            circuit: circuit.clone(),
            theta,
            infidelity: 1.0 - fid,
            blocks: 0,
            converged: true,
            mapping: vec![Some(0)],
            fidelity_history: vec![fid],
        };
        let config = ShrinkConfig {
            eta_schedule: vec![0.0],
            ..ShrinkConfig::new(1e-6, 5)
        };
        let shrunk = shrink(&grown, &target, &config).unwrap();
        assert_eq!(shrunk.circuit.gates().len(), circuit.gates().len());
    }

    #[test]
    fn fix_constant_angles_freezes_stable_parameters() {
        let circuit = AnsatzCircuit::new(
            2,
            vec![
                Gate::ry(0, AngleSpec::Free(0)),
                Gate::ry(1, AngleSpec::Free(1)),
            ],
        )
        .unwrap();
        // Parameter 0 is constant across the grid; parameter 1 spans 0.5 rad.
        let optima = vec![vec![1.0, 0.2], vec![1.001, 0.5], vec![0.999, 0.7]];
        let report = fix_constant_angles(&circuit, &optima, 0.02).unwrap();
        assert_eq!(report.circuit.num_params(), 1);
        assert_eq!(report.fixed.len(), 1);
        assert_eq!(report.fixed[0].0, 0);
        assert!((report.fixed[0].1 - 1.0).abs() < 1e-3);
        match report.circuit.gates()[0].angles[0] {
            AngleSpec::Fixed(v) => assert!((v - 1.0).abs() < 1e-3),
            _ => panic!("parameter 0 should be fixed"),
        }
        match report.circuit.gates()[1].angles[0] {
            AngleSpec::Free(0) => {}
            ref a => panic!("parameter 1 should be free with new index 0, got {a:?}"),
        }
    }

    #[test]
    fn removing_gates_preserves_surviving_angles() {
        let circuit = AnsatzCircuit::new(
            2,
            vec![
                Gate::ry(0, AngleSpec::Free(0)),
                Gate::ry(1, AngleSpec::Free(1)),
                Gate::cnot(0, 1),
                Gate::ry(0, AngleSpec::Free(2)),
            ],
        )
        .unwrap();
        let (smaller, theta) = remove_gates(&circuit, &[0.1, 0.2, 0.3], &[1]).unwrap();
        assert_eq!(smaller.num_params(), 2);
        assert_eq!(theta, vec![0.1, 0.3]);
        // Simulation agrees with the original at a zeroed removed angle.
        let full = circuit.simulate(&[0.1, 0.0, 0.3]).unwrap();
        let reduced = smaller.simulate(&theta).unwrap();
        let z: crate::pauli::PauliString = "ZZ".parse().unwrap();
        assert!(
            (expval_exact(&full, &z).unwrap() - expval_exact(&reduced, &z).unwrap()).abs() < 1e-12
        );
    }
}
