//! Dense statevector simulation of the shared ansatz circuit: exact and
//! shot-sampled Pauli expectations, state fidelity, and parameter gradients.
//!
//! Statevector layout: qubit `q` is bit `q` of the amplitude index, i.e.
//! qubit 0 is the least significant bit. The initial state is |0...0>.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{ParameterizedHamiltonian, PauliString};

/// Dense statevectors are capped at this many qubits.
pub const MAX_QUBITS: usize = 14;

/// One angle slot of a gate: either a constant or an index into the free
/// parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleSpec {
    Fixed(f64),
    Free(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    RX,
    RY,
    RZ,
    U3,
    X,
    CNOT,
}

impl GateKind {
    pub fn angle_slots(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::U3 => 3,
            GateKind::X | GateKind::CNOT => 0,
        }
    }

    pub fn qubit_count(self) -> usize {
        match self {
            GateKind::CNOT => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angles: Vec<AngleSpec>,
}

impl Gate {
    pub fn rx(q: usize, angle: AngleSpec) -> Self {
        Gate {
            kind: GateKind::RX,
            qubits: vec![q],
            angles: vec![angle],
        }
    }

    pub fn ry(q: usize, angle: AngleSpec) -> Self {
        Gate {
            kind: GateKind::RY,
            qubits: vec![q],
            angles: vec![angle],
        }
    }

    pub fn rz(q: usize, angle: AngleSpec) -> Self {
        Gate {
            kind: GateKind::RZ,
            qubits: vec![q],
            angles: vec![angle],
        }
    }

    pub fn u3(q: usize, angles: [AngleSpec; 3]) -> Self {
        Gate {
            kind: GateKind::U3,
            qubits: vec![q],
            angles: angles.to_vec(),
        }
    }

    pub fn x(q: usize) -> Self {
        Gate {
            kind: GateKind::X,
            qubits: vec![q],
            angles: vec![],
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::CNOT,
            qubits: vec![control, target],
            angles: vec![],
        }
    }

    /// Free-parameter indices referenced by this gate, in slot order.
    pub fn free_params(&self) -> impl Iterator<Item = usize> + '_ {
        self.angles.iter().filter_map(|a| match a {
            AngleSpec::Free(j) => Some(*j),
            AngleSpec::Fixed(_) => None,
        })
    }
}

/// An ordered gate list over `n` qubits with `d` free parameters.
///
/// Every parameter index in `[0, d)` must be referenced by at least one gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnsatzFile", into = "AnsatzFile")]
pub struct AnsatzCircuit {
    n: usize,
    gates: Vec<Gate>,
    d: usize,
}

impl AnsatzCircuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(
                "circuit needs at least one qubit".into(),
            ));
        }
        if n > MAX_QUBITS {
            return Err(Error::InvalidSize(format!(
                "{n} qubits exceeds the dense statevector cap of {MAX_QUBITS}"
            )));
        }
        let mut max_free: Option<usize> = None;
        for (i, gate) in gates.iter().enumerate() {
            if gate.qubits.len() != gate.kind.qubit_count() {
                return Err(Error::InvalidArgument(format!(
                    "gate {i} ({:?}) has {} qubits, expected {}",
                    gate.kind,
                    gate.qubits.len(),
                    gate.kind.qubit_count()
                )));
            }
            if gate.angles.len() != gate.kind.angle_slots() {
                return Err(Error::InvalidArgument(format!(
                    "gate {i} ({:?}) has {} angle slots, expected {}",
                    gate.kind,
                    gate.angles.len(),
                    gate.kind.angle_slots()
                )));
            }
            if gate.qubits.iter().any(|&q| q >= n) {
                return Err(Error::InvalidArgument(format!(
                    "gate {i} acts on a qubit outside [0, {n})"
                )));
            }
            if gate.qubits.len() == 2 && gate.qubits[0] == gate.qubits[1] {
                return Err(Error::InvalidArgument(format!(
                    "gate {i} uses the same qubit twice"
                )));
            }
            for angle in &gate.angles {
                match angle {
                    AngleSpec::Fixed(v) if !v.is_finite() => {
                        return Err(Error::InvalidArgument(format!(
                            "gate {i} has a non-finite fixed angle"
                        )));
                    }
                    AngleSpec::Free(j) => {
                        max_free = Some(max_free.map_or(*j, |m: usize| m.max(*j)));
                    }
                    _ => {}
                }
            }
        }
        let d = max_free.map_or(0, |m| m + 1);
        let mut used = vec![false; d];
        for gate in &gates {
            for j in gate.free_params() {
                used[j] = true;
            }
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(Error::InvalidArgument(format!(
                "free parameter {j} is never referenced by any gate"
            )));
        }
        Ok(Self { n, gates, d })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_params(&self) -> usize {
        self.d
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Prepare |psi(theta)> from |0...0>.
    pub fn simulate(&self, theta: &[f64]) -> Result<QuantumState> {
        self.simulate_shifted(theta, None)
    }

    /// Simulate with one angle slot offset by `delta`; used by the
    /// parameter-shift rule. `slot` indexes the flattened list of free slots
    /// in gate order.
    fn simulate_shifted(&self, theta: &[f64], shift: Option<(usize, f64)>) -> Result<QuantumState> {
        if theta.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters supplied, circuit has {}",
                theta.len(),
                self.d
            )));
        }
        debug_assert!(theta.iter().all(|t| t.is_finite()));
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << self.n];
        amps[0] = Complex64::new(1.0, 0.0);

        let mut slot_counter = 0usize;
        for gate in &self.gates {
            let mut angles = [0.0f64; 3];
            for (s, spec) in gate.angles.iter().enumerate() {
                let mut value = match spec {
                    AngleSpec::Fixed(v) => *v,
                    AngleSpec::Free(j) => theta[*j],
                };
                if let AngleSpec::Free(_) = spec {
                    if let Some((target_slot, delta)) = shift {
                        if slot_counter == target_slot {
                            value += delta;
                        }
                    }
                    slot_counter += 1;
                }
                angles[s] = value;
            }
            apply_gate(&mut amps, gate, &angles);
        }
        Ok(QuantumState { n: self.n, amps })
    }

    /// Flattened (gate, slot) -> parameter index table of all free slots.
    fn free_slots(&self) -> Vec<usize> {
        self.gates.iter().flat_map(|g| g.free_params()).collect()
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct AnsatzFile {
    n: usize,
    d: usize,
    gates: Vec<Gate>,
}

impl TryFrom<AnsatzFile> for AnsatzCircuit {
    type Error = Error;

    fn try_from(file: AnsatzFile) -> Result<Self> {
        let circuit = AnsatzCircuit::new(file.n, file.gates)?;
        if circuit.d != file.d {
            return Err(Error::Parse(format!(
                "file declares d = {}, gates reference {} free parameters",
                file.d, circuit.d
            )));
        }
        Ok(circuit)
    }
}

impl From<AnsatzCircuit> for AnsatzFile {
    fn from(c: AnsatzCircuit) -> Self {
        AnsatzFile {
            n: c.n,
            d: c.d,
            gates: c.gates,
        }
    }
}

/// A normalized 2^n-amplitude statevector.
#[derive(Clone, Debug)]
pub struct QuantumState {
    n: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidSize(format!(
                "qubit count {n} outside [1, {MAX_QUBITS}]"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidSize(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(Error::InvalidSize(format!(
                "{n} qubits exceeds cap {MAX_QUBITS}"
            )));
        }
        let state = Self { n, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "state norm {norm} is not 1"
            )));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Shot budget for a circuit-set evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Exact,
    Count(u32),
}

/// Per-term expectation values aligned with a Hamiltonian's Pauli list.
#[derive(Clone, Debug)]
pub struct ExpectationSet {
    pub values: Vec<f64>,
    pub shots: Shots,
}

fn apply_gate(amps: &mut [Complex64], gate: &Gate, angles: &[f64; 3]) {
    let i = Complex64::new(0.0, 1.0);
    match gate.kind {
        GateKind::RX => {
            let (c, s) = ((angles[0] / 2.0).cos(), (angles[0] / 2.0).sin());
            apply_single(
                amps,
                gate.qubits[0],
                [
                    [Complex64::new(c, 0.0), -i * s],
                    [-i * s, Complex64::new(c, 0.0)],
                ],
            );
        }
        GateKind::RY => {
            let (c, s) = ((angles[0] / 2.0).cos(), (angles[0] / 2.0).sin());
            apply_single(
                amps,
                gate.qubits[0],
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ],
            );
        }
        GateKind::RZ => {
            let half = angles[0] / 2.0;
            apply_single(
                amps,
                gate.qubits[0],
                [
                    [Complex64::from_polar(1.0, -half), Complex64::new(0.0, 0.0)],
                    [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, half)],
                ],
            );
        }
        GateKind::U3 => {
            // Generic Bloch rotation; equal to RZ(phi) RY(theta) RZ(lambda)
            // up to global phase.
            let (theta, phi, lambda) = (angles[0], angles[1], angles[2]);
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            apply_single(
                amps,
                gate.qubits[0],
                [
                    [Complex64::new(c, 0.0), -Complex64::from_polar(s, lambda)],
                    [
                        Complex64::from_polar(s, phi),
                        Complex64::from_polar(c, phi + lambda),
                    ],
                ],
            );
        }
        GateKind::X => {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            apply_single(amps, gate.qubits[0], [[zero, one], [one, zero]]);
        }
        GateKind::CNOT => {
            let cbit = 1usize << gate.qubits[0];
            let tbit = 1usize << gate.qubits[1];
            for k in 0..amps.len() {
                if k & cbit != 0 && k & tbit == 0 {
                    amps.swap(k, k | tbit);
                }
            }
        }
    }
}

fn apply_single(amps: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for k in 0..amps.len() {
        if k & bit == 0 {
            let a0 = amps[k];
            let a1 = amps[k | bit];
            amps[k] = m[0][0] * a0 + m[0][1] * a1;
            amps[k | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Exact expectation <psi|P|psi>, real and in [-1, 1].
///
/// The all-identity string returns exactly 1 by convention.
pub fn expval_exact(state: &QuantumState, p: &PauliString) -> Result<f64> {
    if p.num_qubits() != state.n {
        return Err(Error::DimensionMismatch(format!(
            "Pauli string on {} qubits, state on {}",
            p.num_qubits(),
            state.n
        )));
    }
    if p.is_identity() {
        return Ok(1.0);
    }
    let (x, y, z) = p.masks();
    let flip = (x | y) as usize;
    let sign_mask = y | z;
    let y_count = y.count_ones();
    // Global i^|Y| factor from Y|b> = i(-1)^b |1-b>.
    let global = match y_count % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..state.amps.len() {
        let sign = if ((k as u64 & sign_mask).count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += state.amps[k ^ flip].conj() * state.amps[k] * sign;
    }
    acc *= global;
    debug_assert!(acc.im.abs() < 1e-10, "expectation not real: {acc}");
    Ok(acc.re.clamp(-1.0, 1.0))
}

/// Shot-sampled estimate of <psi|P|psi>: a binomial draw of `shots` outcomes
/// at the exact eigenvalue-probability split, returned as `2k/shots - 1`.
/// Unbiased, with variance `(1 - <P>^2)/shots`.
pub fn expval_sampled<R: Rng>(
    state: &QuantumState,
    p: &PauliString,
    shots: u32,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument(
            "shot count must be at least 1".into(),
        ));
    }
    if p.is_identity() {
        return Ok(1.0);
    }
    let exact = expval_exact(state, p)?;
    let p_up = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let dist = Binomial::new(shots as u64, p_up)
        .map_err(|e| Error::InvalidArgument(format!("binomial: {e}")))?;
    let k = dist.sample(rng);
    Ok(2.0 * k as f64 / shots as f64 - 1.0)
}

/// Amplitude overlap fidelity F = |<psi|target>| (not squared).
pub fn fidelity(state: &QuantumState, target: &QuantumState) -> f64 {
    assert_eq!(
        state.n, target.n,
        "fidelity of states with different qubit counts"
    );
    let overlap: Complex64 = state
        .amps
        .iter()
        .zip(&target.amps)
        .map(|(a, b)| a.conj() * b)
        .sum();
    overlap.norm()
}

/// Evaluate the full Pauli set once at `theta`, exactly or shot-sampled.
pub fn measure_pauli_set<R: Rng>(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    paulis: &[PauliString],
    shots: Shots,
    rng: &mut R,
) -> Result<ExpectationSet> {
    let state = circuit.simulate(theta)?;
    let values = paulis
        .iter()
        .map(|p| match shots {
            Shots::Exact => expval_exact(&state, p),
            Shots::Count(s) => expval_sampled(&state, p, s, rng),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpectationSet { values, shots })
}

/// Exact energy <psi(theta)|H(x_alpha)|psi(theta)>.
pub fn exact_energy(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    hamiltonian: &ParameterizedHamiltonian,
    alpha: usize,
) -> Result<f64> {
    let state = circuit.simulate(theta)?;
    let e = hamiltonian
        .paulis()
        .iter()
        .map(|p| expval_exact(&state, p))
        .collect::<Result<Vec<_>>>()?;
    hamiltonian.energy_from_expectations(alpha, &e)
}

/// Cost functions the gradient is taken of.
pub enum CostFn<'a> {
    Energy {
        hamiltonian: &'a ParameterizedHamiltonian,
        alpha: usize,
    },
    Infidelity {
        target: &'a QuantumState,
    },
}

/// Gradient of the cost with respect to every free parameter.
///
/// Energy costs use the parameter-shift identity per angle slot (U3 slots are
/// each a single-angle rotation of the RZ.RY.RZ decomposition, so the +-pi/2
/// shift applies to them directly). Infidelity uses central finite
/// differences with step 1e-5.
pub fn gradient(circuit: &AnsatzCircuit, theta: &[f64], cost: &CostFn) -> Result<Vec<f64>> {
    match cost {
        CostFn::Energy { hamiltonian, alpha } => {
            let mut grad = vec![0.0; circuit.num_params()];
            let slots = circuit.free_slots();
            for (slot, &param) in slots.iter().enumerate() {
                let plus = energy_of_shifted(
                    circuit,
                    theta,
                    slot,
                    std::f64::consts::FRAC_PI_2,
                    hamiltonian,
                    *alpha,
                )?;
                let minus = energy_of_shifted(
                    circuit,
                    theta,
                    slot,
                    -std::f64::consts::FRAC_PI_2,
                    hamiltonian,
                    *alpha,
                )?;
                grad[param] += (plus - minus) / 2.0;
            }
            Ok(grad)
        }
        CostFn::Infidelity { target } => {
            let step = 1e-5;
            let mut grad = vec![0.0; circuit.num_params()];
            let mut th = theta.to_vec();
            for j in 0..circuit.num_params() {
                let old = th[j];
                th[j] = old + step;
                let fp = 1.0 - fidelity(&circuit.simulate(&th)?, target);
                th[j] = old - step;
                let fm = 1.0 - fidelity(&circuit.simulate(&th)?, target);
                th[j] = old;
                grad[j] = (fp - fm) / (2.0 * step);
            }
            Ok(grad)
        }
    }
}

fn energy_of_shifted(
    circuit: &AnsatzCircuit,
    theta: &[f64],
    slot: usize,
    delta: f64,
    hamiltonian: &ParameterizedHamiltonian,
    alpha: usize,
) -> Result<f64> {
    let state = circuit.simulate_shifted(theta, Some((slot, delta)))?;
    let e = hamiltonian
        .paulis()
        .iter()
        .map(|p| expval_exact(&state, p))
        .collect::<Result<Vec<_>>>()?;
    hamiltonian.energy_from_expectations(alpha, &e)
}
