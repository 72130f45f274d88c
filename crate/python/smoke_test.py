#!/usr/bin/env python3
"""Build the `nambu_py` extension module and exercise it end to end.

Run from anywhere:

    python3 python/smoke_test.py

The script compiles the extension with cargo, imports it from a temp
directory, and checks a handful of structural identities (bracket
antisymmetry, Casimir centrality and conservation, subsystem reduction,
lattice charge conservation) with plain-Python arithmetic as the oracle.
"""

import cmath
import pathlib
import shutil
import subprocess
import sys
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def build_and_import():
    subprocess.run(
        ["cargo", "build", "-p", "nambu-py"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "debug" / "libnambu_py.so"
    if not built.exists():  # macOS fallback
        built = REPO / "target" / "debug" / "libnambu_py.dylib"
    stage = pathlib.Path(tempfile.mkdtemp(prefix="nambu_py_"))
    shutil.copy2(built, stage / "nambu_py.so")
    sys.path.insert(0, str(stage))
    import nambu_py

    return nambu_py


def matmul(a, b):
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def trace(a):
    return sum(a[i][i] for i in range(len(a)))


def check(name, ok, detail=""):
    status = "ok" if ok else "FAILED"
    print(f"  {name}: {status} {detail}")
    if not ok:
        raise SystemExit(f"smoke test failed at: {name}")


def main():
    np = build_and_import()
    print("module imported")

    # --- metric construction and validation ------------------------------
    metric = np.Metric.from_signature("a", [1, 1, -1])
    check("signature metric", metric.dim() == 3 and abs(metric.condition_number() - 1) < 1e-12)

    try:
        np.Metric.from_matrix("a", [[1, 1j], [1j, 1]])  # not Hermitian
        check("non-Hermitian metric rejected", False)
    except ValueError:
        check("non-Hermitian metric rejected", True)

    # --- Casimir against a hand-rolled trace -----------------------------
    state = np.DensityState.random(metric, seed=11)
    check("state Hermitian", state.hermiticity_residual() < 1e-12)
    c1 = np.casimir(metric, state, 1)
    by_hand = trace(matmul(state.matrix(), metric.ginv()))
    check("C1 equals trace(rho @ ginv)", abs(c1 - by_hand) < 1e-12, f"C1 = {c1:.6f}")

    # --- brackets ---------------------------------------------------------
    f = np.Observable.linear([[0.3, 0.1 + 0.2j, 0], [0.1 - 0.2j, -0.4, 0.5j], [0, -0.5j, 0.1]])
    h = np.Observable.linear([[0.7, 0, 0.2j], [0, 0.2, 0.1], [-0.2j, 0.1, -0.3]])
    x = np.Observable.linear([[0.1, 0.4, 0], [0.4, 0, 0.6j], [0, -0.6j, 0.9]])

    fhx = np.lie_nambu(metric, state, f, h, x)
    fxh = np.lie_nambu(metric, state, f, x, h)
    check("triple bracket antisymmetry", abs(fhx + fxh) < 1e-12 * max(abs(fhx), 1.0))

    oracle = np.lie_nambu(metric, state, f, h, x, path="oracle")
    check("chain equals oracle", abs(fhx - oracle) < 1e-12 * max(abs(fhx), 1.0))

    c2 = np.Observable.casimir(2)
    s_poly = np.Observable.casimir_poly([(1.0, [2, 0, 0, 0]), (0.5, [0, 1, 0, 0])])
    # Casimirs are central in the Lie-Poisson bracket for any partner, and
    # in the triple bracket whenever the third slot is a Casimir polynomial.
    check("Casimir central (Poisson)", abs(np.lie_poisson(metric, state, c2, f)) < 1e-12)
    check("Casimir central (triple)", abs(np.lie_nambu(metric, state, c2, f, s_poly)) < 1e-12)

    fh = np.lie_poisson(metric, state, f, h)
    check("Poisson bracket purely imaginary", abs(fh.real) < 1e-12 * max(abs(fh), 1.0))

    # --- gradients --------------------------------------------------------
    check("finite-difference gradient", np.fd_gradient_check(s_poly, metric, state) < 1e-6)

    # --- evolution and conservation ----------------------------------------
    traj = np.evolve(metric, state, h, s_poly, step=1e-3, steps=200, sample_every=20)
    drift = traj.drift_summary()
    check(
        "Casimirs conserved along nonlinear flow",
        max(drift["max_casimir_drift"]) < 1e-9,
        f"max drift {max(drift['max_casimir_drift']):.3e}",
    )
    check("state stays Hermitian", drift["max_hermiticity_residual"] < 1e-10)
    check("spectrum frozen", drift["max_spectral_drift"] < 1e-9)
    check("sample bookkeeping", len(traj) == 11 and traj.sample(0)["index"] == 0)
    check("final state dim", traj.final_state().dim() == 3)

    # --- two-particle reduction ---------------------------------------------
    m0 = np.Metric.from_signature("p0", [1, -1])
    m1 = np.Metric.from_signature("p1", [1, 1])
    composite = np.kron_metric([m0, m1])
    check("composite metric dim", composite.dim() == 4)
    s0 = np.DensityState.random(m0, seed=21)
    s1 = np.DensityState.random(m1, seed=22)
    joint = np.product_state([s0, s1])
    _, reduced = np.reduce_state([m0, m1], [0], joint)
    want = np.casimir(m0, s0, 1) * np.casimir(m1, s1, 1)
    got = np.casimir(m0, reduced, 1)
    check("reduction scales by dropped C1", abs(got - want) < 1e-12)

    # --- lattice Dirac sector ------------------------------------------------
    lattice_metric, lattice_h = np.dirac_system(3, 2)
    check("lattice metric dim", lattice_metric.dim() == 24)
    probe = np.DensityState.random(lattice_metric, seed=31)
    value = np.evaluate(lattice_h, lattice_metric, probe)
    check("lattice H real on Hermitian states", abs(value.imag) < 1e-10 * max(abs(value), 1.0))

    psi0 = [cmath.exp(2j * cmath.pi * k / 24) / 5 for k in range(24)]
    samples = np.dirac_pure_evolve(3, 2, psi0, step=1e-3, steps=200, sample_every=50)
    q_values = [q for (_, _, q) in samples]
    check(
        "charge form conserved",
        max(abs(q - q_values[0]) for q in q_values) < 1e-10,
        f"Q = {q_values[0]:.6f}",
    )

    print("smoke test passed")


if __name__ == "__main__":
    main()
