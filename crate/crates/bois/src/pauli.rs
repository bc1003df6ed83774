//! Pauli strings, physical-parameter grids, and physically parameterized
//! Hamiltonian families.
//!
//! A family is a fixed set of Pauli strings with a coefficient table over a
//! grid of physical parameter values. Measuring the Pauli set once at some
//! circuit parameter point yields the energy at *every* grid point as a
//! weighted sum, which is the cross-evaluation primitive the optimizer array
//! is built on.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Single-qubit Pauli operator label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::Parse(format!(
                "invalid Pauli character '{other}' (expected one of I, X, Y, Z)"
            ))),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// An n-qubit tensor product of single-qubit Paulis, e.g. `"ZZII"`.
///
/// The text form is the left-to-right concatenation of the per-qubit labels,
/// with position `q` in the string acting on qubit `q`. Parsing then printing
/// is the identity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    ops: Vec<Pauli>,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidSize(
                "Pauli string must act on at least one qubit".into(),
            ));
        }
        Ok(Self { ops })
    }

    /// All-identity string on `n` qubits.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n])
    }

    /// Single non-identity operator `p` on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Result<Self> {
        if q >= n {
            return Err(Error::InvalidArgument(format!(
                "qubit {q} out of range for n = {n}"
            )));
        }
        let mut ops = vec![Pauli::I; n];
        ops[q] = p;
        Self::new(ops)
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn num_qubits(&self) -> usize {
        self.ops.len()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    /// Bit masks (x, y, z) marking qubits carrying X, Y and Z factors.
    /// Qubit `q` corresponds to bit `1 << q`.
    pub fn masks(&self) -> (u64, u64, u64) {
        let mut x = 0u64;
        let mut y = 0u64;
        let mut z = 0u64;
        for (q, &p) in self.ops.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => x |= 1 << q,
                Pauli::Y => y |= 1 << q,
                Pauli::Z => z |= 1 << q,
            }
        }
        (x, y, z)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &p in &self.ops {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PauliString;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a Pauli string over {I, X, Y, Z}")
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<PauliString, E> {
                s.parse().map_err(|e| E::custom(format!("{e}")))
            }
        }
        deserializer.deserialize_str(V)
    }
}

/// A 1D or 2D grid of physical parameter values (fields, bond lengths).
///
/// Grid points are enumerated in row-major axis order: the flat index `alpha`
/// runs fastest over the last axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalGrid {
    axes: Vec<Vec<f64>>,
    axis_names: Vec<String>,
}

impl PhysicalGrid {
    pub fn new(axes: Vec<Vec<f64>>, axis_names: Vec<String>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidSize(format!(
                "grid must have 1 or 2 axes, got {}",
                axes.len()
            )));
        }
        if axis_names.len() != axes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} axis names for {} axes",
                axis_names.len(),
                axes.len()
            )));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::InvalidSize(format!("axis {k} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "axis {k} has a non-finite value"
                )));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse(format!(
                    "axis {k} ({}) is not strictly increasing",
                    axis_names[k]
                )));
            }
        }
        Ok(Self { axes, axis_names })
    }

    /// 1D grid over evenly spaced values in `[lo, hi]` (inclusive endpoints).
    pub fn linspace(name: &str, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::InvalidSize(
                "linspace needs at least one point".into(),
            ));
        }
        let values = if count == 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect()
        };
        Self::new(vec![values], vec![name.to_string()])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis_names(&self) -> &[String] {
        &self.axis_names
    }

    pub fn num_points(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    /// Multi-index of flat point `alpha`, row-major.
    pub fn multi_index(&self, alpha: usize) -> Vec<usize> {
        debug_assert!(alpha < self.num_points());
        match self.axes.len() {
            1 => vec![alpha],
            2 => {
                let inner = self.axes[1].len();
                vec![alpha / inner, alpha % inner]
            }
            _ => unreachable!(),
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.axes.len());
        match self.axes.len() {
            1 => idx[0],
            2 => idx[0] * self.axes[1].len() + idx[1],
            _ => unreachable!(),
        }
    }

    /// Coordinate tuple of grid point `alpha`.
    pub fn point(&self, alpha: usize) -> Vec<f64> {
        self.multi_index(alpha)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }
}

/// A family of Hamiltonians `H(x) = sum_i c_i(x) P_i` over a physical grid.
///
/// Every grid point shares the identical ordered Pauli list; terms absent at
/// a point carry coefficient zero. Coefficients are stored densely as a
/// (grid points x terms) matrix because the per-point energy is an inner
/// product against a shared expectation vector, and that is the hot path.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterizedHamiltonian {
    n: usize,
    paulis: Vec<PauliString>,
    grid: PhysicalGrid,
    coeffs: Vec<Vec<f64>>,
}

impl ParameterizedHamiltonian {
    pub fn new(
        n: usize,
        paulis: Vec<PauliString>,
        grid: PhysicalGrid,
        coeffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("qubit count must be at least 1".into()));
        }
        if paulis.is_empty() {
            return Err(Error::InvalidSize(
                "Hamiltonian needs at least one term".into(),
            ));
        }
        for p in &paulis {
            if p.num_qubits() != n {
                return Err(Error::DimensionMismatch(format!(
                    "term {p} has {} qubits, expected {n}",
                    p.num_qubits()
                )));
            }
        }
        let mut sorted = paulis.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate Pauli term".into()));
        }
        if coeffs.len() != grid.num_points() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient rows for {} grid points",
                coeffs.len(),
                grid.num_points()
            )));
        }
        for (alpha, row) in coeffs.iter().enumerate() {
            if row.len() != paulis.len() {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient row {alpha} has {} entries for {} terms",
                    row.len(),
                    paulis.len()
                )));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient at grid point {alpha}"
                )));
            }
        }
        Ok(Self {
            n,
            paulis,
            grid,
            coeffs,
        })
    }

    /// Open-boundary quantum spin chain in transverse and longitudinal fields.
    ///
    /// Terms are `+1 * Z_i Z_{i+1}` on each of the `n-1` bonds, `-h_X * X_i`
    /// and `-h_Z * Z_i` on each site. A 1D grid supplies a shared field
    /// `h = h_X = h_Z`; a 2D grid supplies `(h_X, h_Z)` on its two axes.
    pub fn spin_chain(n: usize, grid: PhysicalGrid) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!(
                "spin chain needs at least 2 sites, got {n}"
            )));
        }
        let mut paulis = Vec::with_capacity(3 * n - 1);
        for i in 0..n - 1 {
            let mut ops = vec![Pauli::I; n];
            ops[i] = Pauli::Z;
            ops[i + 1] = Pauli::Z;
            paulis.push(PauliString::new(ops)?);
        }
        for i in 0..n {
            paulis.push(PauliString::single(n, i, Pauli::X)?);
        }
        for i in 0..n {
            paulis.push(PauliString::single(n, i, Pauli::Z)?);
        }

        let mut coeffs = Vec::with_capacity(grid.num_points());
        for alpha in 0..grid.num_points() {
            let x = grid.point(alpha);
            let (hx, hz) = match x.len() {
                1 => (x[0], x[0]),
                _ => (x[0], x[1]),
            };
            let mut row = Vec::with_capacity(3 * n - 1);
            row.extend(std::iter::repeat_n(1.0, n - 1));
            row.extend(std::iter::repeat_n(-hx, n));
            row.extend(std::iter::repeat_n(-hz, n));
            coeffs.push(row);
        }
        Self::new(n, paulis, grid, coeffs)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_terms(&self) -> usize {
        self.paulis.len()
    }

    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    pub fn grid(&self) -> &PhysicalGrid {
        &self.grid
    }

    pub fn coeffs_at(&self, alpha: usize) -> &[f64] {
        &self.coeffs[alpha]
    }

    pub fn term_index(&self, p: &PauliString) -> Option<usize> {
        self.paulis.iter().position(|q| q == p)
    }

    /// Energy at grid point `alpha` from a shared Pauli expectation vector:
    /// `sum_i c[alpha][i] * e_i`. The same vector serves every grid point.
    pub fn energy_from_expectations(&self, alpha: usize, expectations: &[f64]) -> Result<f64> {
        if alpha >= self.grid.num_points() {
            return Err(Error::InvalidArgument(format!(
                "grid index {alpha} out of range ({} points)",
                self.grid.num_points()
            )));
        }
        if expectations.len() != self.paulis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} expectation values for {} Pauli terms",
                expectations.len(),
                self.paulis.len()
            )));
        }
        Ok(self.coeffs[alpha]
            .iter()
            .zip(expectations)
            .map(|(c, e)| c * e)
            .sum())
    }

    /// Read a Hamiltonian family from the structured-text file format.
    ///
    /// Term order in the file is arbitrary; terms are canonically sorted by
    /// their text form on load. A term whose coefficient list is shorter than
    /// the grid is padded with zeros.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HamiltonianFile = serde_json::from_str(text)?;
        let grid = PhysicalGrid::new(file.axes, file.axis_names)?;
        let points = grid.num_points();

        let mut terms: Vec<(PauliString, Vec<f64>)> = Vec::with_capacity(file.terms.len());
        for (idx, record) in file.terms.into_iter().enumerate() {
            let pauli: PauliString = record
                .pauli
                .parse()
                .map_err(|e| Error::Parse(format!("term {idx} (\"{}\"): {e}", record.pauli)))?;
            if pauli.num_qubits() != file.n {
                return Err(Error::Parse(format!(
                    "term {idx} (\"{pauli}\"): {} qubits, file declares n = {}",
                    pauli.num_qubits(),
                    file.n
                )));
            }
            if record.coeffs.len() > points {
                return Err(Error::Parse(format!(
                    "term {idx} (\"{pauli}\"): {} coefficients for {points} grid points",
                    record.coeffs.len()
                )));
            }
            if terms.iter().any(|(p, _)| p == &pauli) {
                return Err(Error::Parse(format!(
                    "term {idx}: duplicate Pauli label \"{pauli}\""
                )));
            }
            let mut coeffs = record.coeffs;
            coeffs.resize(points, 0.0);
            terms.push((pauli, coeffs));
        }
        terms.sort_by(|a, b| a.0.cmp(&b.0));

        let paulis: Vec<PauliString> = terms.iter().map(|(p, _)| p.clone()).collect();
        let coeffs: Vec<Vec<f64>> = (0..points)
            .map(|alpha| terms.iter().map(|(_, c)| c[alpha]).collect())
            .collect();
        Self::new(file.n, paulis, grid, coeffs)
    }

    /// Write the family in the same file format `load` reads.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let terms = self
            .paulis
            .iter()
            .enumerate()
            .map(|(i, p)| TermRecord {
                pauli: p.to_string(),
                coeffs: self.coeffs.iter().map(|row| row[i]).collect(),
            })
            .collect();
        let file = HamiltonianFile {
            n: self.n,
            axes: self.grid.axes().to_vec(),
            axis_names: self.grid.axis_names().to_vec(),
            terms,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

#[derive(Serialize, Deserialize)]
struct HamiltonianFile {
    n: usize,
    axes: Vec<Vec<f64>>,
    axis_names: Vec<String>,
    terms: Vec<TermRecord>,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    pauli: String,
    coeffs: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain_grid_15() -> PhysicalGrid {
        PhysicalGrid::linspace("h", 0.0, 0.9, 15).unwrap()
    }

    #[test]
    fn pauli_string_parse_print_round_trip() {
        let p: PauliString = "ZXIY".parse().unwrap();
        assert_eq!(p.to_string(), "ZXIY");
        assert_eq!(p.num_qubits(), 4);
        assert!("ZQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn spin_chain_has_3n_minus_1_terms_and_field_free_bonds() {
        let grid = PhysicalGrid::new(vec![vec![0.0]], vec!["h".into()]).unwrap();
        let h = ParameterizedHamiltonian::spin_chain(4, grid).unwrap();
        assert_eq!(h.num_terms(), 11);
        let nonzero: Vec<&PauliString> = h
            .paulis()
            .iter()
            .zip(h.coeffs_at(0))
            .filter(|(_, &c)| c != 0.0)
            .map(|(p, _)| p)
            .collect();
        assert_eq!(nonzero.len(), 3);
        for p in nonzero {
            assert_eq!(p.ops().iter().filter(|&&op| op == Pauli::Z).count(), 2);
        }
    }

    #[test]
    fn spin_chain_last_grid_point_field_coefficient() {
        let h = ParameterizedHamiltonian::spin_chain(4, chain_grid_15()).unwrap();
        let x1 = PauliString::single(4, 1, Pauli::X).unwrap();
        let idx = h.term_index(&x1).unwrap();
        assert_eq!(h.coeffs_at(14)[idx], -0.9);
        // Every coefficient magnitude is bounded by max(1, h).
        for alpha in 0..15 {
            let hval = h.grid().point(alpha)[0];
            let bound = 1.0f64.max(hval);
            assert!(h.coeffs_at(alpha).iter().all(|c| c.abs() <= bound + 1e-15));
        }
    }

    #[test]
    fn two_site_chain_is_zz_minus_x1_minus_x2() {
        let grid = PhysicalGrid::new(vec![vec![1.0], vec![0.0]], vec!["h_x".into(), "h_z".into()]);
        // A 2D grid with one value per axis pins (h_X, h_Z) = (1, 0).
        let h = ParameterizedHamiltonian::spin_chain(2, grid.unwrap()).unwrap();
        let mut nonzero: Vec<(String, f64)> = h
            .paulis()
            .iter()
            .zip(h.coeffs_at(0))
            .filter(|(_, &c)| c != 0.0)
            .map(|(p, &c)| (p.to_string(), c))
            .collect();
        nonzero.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(
            nonzero,
            vec![
                ("IX".to_string(), -1.0),
                ("XI".to_string(), -1.0),
                ("ZZ".to_string(), 1.0)
            ]
        );
    }

    #[test]
    fn spin_chain_rejects_single_site() {
        let grid = PhysicalGrid::new(vec![vec![0.0]], vec!["h".into()]).unwrap();
        assert!(matches!(
            ParameterizedHamiltonian::spin_chain(1, grid),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn energy_is_linear_in_expectations_and_zero_on_zero() {
        let h = ParameterizedHamiltonian::spin_chain(4, chain_grid_15()).unwrap();
        let zeros = vec![0.0; h.num_terms()];
        for alpha in 0..15 {
            assert_eq!(h.energy_from_expectations(alpha, &zeros).unwrap(), 0.0);
        }
        assert!(h.energy_from_expectations(0, &[0.0; 3]).is_err());
    }

    #[test]
    fn alternating_spins_minimize_bond_energy() {
        // |0101>: qubit q is in |1> for odd q, so <Z_q> = (-1)^q and every
        // <Z_q Z_{q+1}> = -1; at h = 0 the energy is -3.
        let h = ParameterizedHamiltonian::spin_chain(4, chain_grid_15()).unwrap();
        let e: Vec<f64> = h
            .paulis()
            .iter()
            .map(|p| {
                let (x, y, z) = p.masks();
                if x != 0 || y != 0 {
                    0.0
                } else {
                    let signs = (z & 0b1010u64).count_ones();
                    if signs.is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            })
            .collect();
        let energy = h.energy_from_expectations(0, &e).unwrap();
        assert!((energy - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_evaluation_linearity_via_padded_sum() {
        let h = ParameterizedHamiltonian::spin_chain(3, chain_grid_15()).unwrap();
        let summed = {
            let coeffs: Vec<Vec<f64>> = vec![h
                .coeffs_at(2)
                .iter()
                .zip(h.coeffs_at(9))
                .map(|(a, b)| a + b)
                .collect()];
            let grid = PhysicalGrid::new(vec![vec![0.0]], vec!["h".into()]).unwrap();
            ParameterizedHamiltonian::new(3, h.paulis().to_vec(), grid, coeffs).unwrap()
        };
        let e: Vec<f64> = (0..h.num_terms())
            .map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4)
            .collect();
        let lhs = summed.energy_from_expectations(0, &e).unwrap();
        let rhs =
            h.energy_from_expectations(2, &e).unwrap() + h.energy_from_expectations(9, &e).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip_is_bit_exact_and_canonically_sorted() {
        let text = r#"{
            "n": 2,
            "axes": [[0.25, 1.5]],
            "axis_names": ["r"],
            "terms": [
                {"pauli": "ZZ", "coeffs": [0.123456789012345, -0.5]},
                {"pauli": "XI", "coeffs": [0.0, 0.9876543210987654]}
            ]
        }"#;
        let h = ParameterizedHamiltonian::from_json(text).unwrap();
        let labels: Vec<String> = h.paulis().iter().map(|p| p.to_string()).collect();
        assert_eq!(labels, vec!["XI".to_string(), "ZZ".to_string()]);

        let reordered = r#"{
            "n": 2,
            "axes": [[0.25, 1.5]],
            "axis_names": ["r"],
            "terms": [
                {"pauli": "XI", "coeffs": [0.0, 0.9876543210987654]},
                {"pauli": "ZZ", "coeffs": [0.123456789012345, -0.5]}
            ]
        }"#;
        let h2 = ParameterizedHamiltonian::from_json(reordered).unwrap();
        assert_eq!(h, h2);

        let saved = h.to_json().unwrap();
        let reloaded = ParameterizedHamiltonian::from_json(&saved).unwrap();
        assert_eq!(h, reloaded);
    }

    #[test]
    fn short_coefficient_lists_are_zero_padded() {
        let text = r#"{
            "n": 2,
            "axes": [[0.0, 1.0]],
            "axis_names": ["x"],
            "terms": [
                {"pauli": "ZZ", "coeffs": [2.0, 3.0]},
                {"pauli": "XI", "coeffs": []}
            ]
        }"#;
        let h = ParameterizedHamiltonian::from_json(text).unwrap();
        let xi: PauliString = "XI".parse().unwrap();
        let idx = h.term_index(&xi).unwrap();
        assert_eq!(h.coeffs_at(0)[idx], 0.0);
        assert_eq!(h.coeffs_at(1)[idx], 0.0);
    }

    #[test]
    fn malformed_files_name_the_offending_record() {
        let dup = r#"{"n": 2, "axes": [[0.0]], "axis_names": ["x"],
            "terms": [{"pauli": "ZZ", "coeffs": [1.0]}, {"pauli": "ZZ", "coeffs": [2.0]}]}"#;
        let err = ParameterizedHamiltonian::from_json(dup).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(err.to_string().contains("ZZ"), "{err}");

        let bad_axis = r#"{"n": 1, "axes": [[1.0, 1.0]], "axis_names": ["x"],
            "terms": [{"pauli": "Z", "coeffs": [1.0, 1.0]}]}"#;
        let err = ParameterizedHamiltonian::from_json(bad_axis).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");

        let bad_qubits = r#"{"n": 3, "axes": [[1.0]], "axis_names": ["x"],
            "terms": [{"pauli": "ZZ", "coeffs": [1.0]}]}"#;
        let err = ParameterizedHamiltonian::from_json(bad_qubits).unwrap_err();
        assert!(err.to_string().contains("term 0"), "{err}");
    }

    #[test]
    fn grid_indexing_is_row_major() {
        let grid = PhysicalGrid::new(
            vec![vec![0.0, 1.0, 2.0], vec![10.0, 20.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(grid.num_points(), 6);
        assert_eq!(grid.point(0), vec![0.0, 10.0]);
        assert_eq!(grid.point(1), vec![0.0, 20.0]);
        assert_eq!(grid.point(5), vec![2.0, 20.0]);
        for alpha in 0..6 {
            assert_eq!(grid.flat_index(&grid.multi_index(alpha)), alpha);
        }
    }

    proptest! {
        #[test]
        fn prop_pauli_round_trip(s in "[IXYZ]{1,12}") {
            let p: PauliString = s.parse().unwrap();
            prop_assert_eq!(p.to_string(), s);
        }

        #[test]
        fn prop_energy_linearity(scale in 0.1f64..10.0, e in proptest::collection::vec(-1.0f64..1.0, 11)) {
            let h = ParameterizedHamiltonian::spin_chain(4, chain_grid_15()).unwrap();
            let base = h.energy_from_expectations(7, &e).unwrap();
            let scaled: Vec<f64> = e.iter().map(|v| v * scale).collect();
            // The energy is linear in the expectation vector.
            let lhs = h.energy_from_expectations(7, &scaled).unwrap();
            prop_assert!((lhs - scale * base).abs() < 1e-9 * (1.0 + base.abs()));
        }
    }
}
