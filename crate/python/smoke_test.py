#!/usr/bin/env python3
"""Smoke test for the bois_py extension module.

Builds are looked up in target/{release,debug}; run `cargo build -p bois-py`
(or --release) first. The script copies the cdylib next to itself under the
importable name and exercises the main types end to end.
"""

import json
import math
import os
import shutil
import sys
import tempfile

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def locate_extension():
    names = ["libbois_py.so", "bois_py.so", "libbois_py.dylib", "bois_py.pyd"]
    for profile in ("release", "debug"):
        for name in names:
            candidate = os.path.join(REPO_ROOT, "target", profile, name)
            if os.path.exists(candidate):
                return candidate
    sys.exit("extension not found; run `cargo build -p bois-py` first")


def import_module():
    src = locate_extension()
    stage = tempfile.mkdtemp(prefix="bois_py_smoke_")
    shutil.copy(src, os.path.join(stage, "bois_py.so"))
    sys.path.insert(0, stage)
    import bois_py

    return bois_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    bois = import_module()
    checks = 0

    # Spin-chain family and the exact oracle.
    h_values = [0.0, 0.3, 0.6, 0.9]
    ham = bois.Hamiltonian.spin_chain(4, h_values)
    assert ham.num_qubits == 4
    assert ham.num_terms == 11
    assert ham.num_points == 4
    labels = ham.pauli_labels()
    assert len(labels) == 11 and "ZZII" in labels
    exact = ham.exact_ground_energies()
    approx(exact[0], -3.0, 1e-9)  # classical chain: three satisfied bonds
    assert all(e <= -3.0 + 1e-9 for e in exact)
    checks += 1
    print(f"PASS hamiltonian: 11 terms, E_exact(h=0) = {exact[0]:.6f}")

    # Cross-evaluation linearity: a zero expectation vector has zero energy
    # at every grid point.
    zeros = [0.0] * ham.num_terms
    for alpha in range(ham.num_points):
        approx(ham.energy_from_expectations(alpha, zeros), 0.0, 1e-15)
    checks += 1
    print("PASS cross-evaluation: zero vector gives zero energy everywhere")

    # Ansatz simulation against the dense-matrix route.
    ansatz = bois.Ansatz.from_json(json.dumps({
        "n": 4,
        "d": 8,
        "gates": (
            [{"kind": "RY", "qubits": [q], "angles": [{"free": q}]} for q in range(4)]
            + [{"kind": "CNOT", "qubits": [q, q + 1], "angles": []} for q in range(3)]
            + [{"kind": "RY", "qubits": [q], "angles": [{"free": 4 + q}]} for q in range(4)]
        ),
    }))
    assert ansatz.num_params == 8
    theta = [0.37 * (k + 1) for k in range(8)]
    e_vec = ansatz.expectations(ham, theta)
    assert len(e_vec) == 11 and all(-1.0 <= v <= 1.0 for v in e_vec)
    recombined = ham.energy_from_expectations(2, e_vec)
    direct = ansatz.energy(ham, theta, 2)
    approx(recombined, direct, 1e-10)
    assert direct >= exact[2] - 1e-9
    checks += 1
    print(f"PASS simulator: shared expectations recombine to {direct:.6f}")

    # Shot sampling is reproducible per seed and unbiased-ish.
    s1 = ansatz.sampled_expectations(ham, theta, 1024, 7)
    s2 = ansatz.sampled_expectations(ham, theta, 1024, 7)
    assert s1 == s2
    s3 = ansatz.sampled_expectations(ham, theta, 1024, 8)
    assert s1 != s3
    checks += 1
    print("PASS sampling: seeded draws reproduce, different seeds differ")

    # Kernel, design, and schedule helpers.
    approx(bois.matern52(0.0, 2.5, 1.0), 2.5, 0.0)
    approx(bois.kappa(30, 30, 2.0), 0.0, 0.0)
    approx(bois.kappa(1, 30, 3.0), 2.9, 1e-12)
    design = bois.lhs_sample(8, 3, 42)
    assert len(design) == 8 and all(len(p) == 3 for p in design)
    for dim in range(3):
        strata = sorted(int(p[dim] / (2 * math.pi) * 8) for p in design)
        assert strata == list(range(8)), "one sample per stratum per dimension"
    checks += 1
    print("PASS helpers: matern52(0), kappa schedule, LHS strata")

    # GP surrogate: noiseless interpolation.
    xs = [[0.7 * k] for k in range(9)]
    ys = [math.sin(x[0]) for x in xs]
    gp = bois.Surrogate.fit(xs, ys, 1e-10)
    for x, y in zip(xs, ys):
        mu, var = gp.predict(x)
        approx(mu, y, 1e-6)
        assert var >= 0.0
    checks += 1
    print(f"PASS surrogate: interpolates 9 sine samples, {gp!r}")

    # A tiny end-to-end run with nearest-neighbour sharing.
    small = bois.Hamiltonian.spin_chain(2, [0.0, 0.45, 0.9])
    small_ansatz = bois.Ansatz.from_json(json.dumps({
        "n": 2,
        "d": 3,
        "gates": [
            {"kind": "RY", "qubits": [0], "angles": [{"free": 0}]},
            {"kind": "RY", "qubits": [1], "angles": [{"free": 1}]},
            {"kind": "CNOT", "qubits": [0, 1], "angles": []},
            {"kind": "RY", "qubits": [1], "angles": [{"free": 2}]},
        ],
    }))
    config = {
        "strategy": "nearest_neighbour",
        "backend": "exact",
        "initial_points": 4,
        "iterations": 3,
        "seed": 11,
    }
    result = json.loads(bois.run_experiment(small, small_ansatz, json.dumps(config)))
    assert result["total_theta_evaluations"] == 4 + 3 * 3
    small_exact = small.exact_ground_energies()
    for outcome, e in zip(result["per_alpha"], small_exact):
        assert outcome["final_energy"] >= e - 1e-9
        trace = outcome["trace"]
        assert len(trace) == 4
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
    rerun = json.loads(bois.run_experiment(small, small_ansatz, json.dumps(config), 2))
    assert rerun == result, "fixed seed must reproduce across worker counts"
    checks += 1
    print("PASS experiment: 13 evaluations, monotone traces, reproducible")

    print(f"smoke test OK ({checks} groups)")


if __name__ == "__main__":
    main()
