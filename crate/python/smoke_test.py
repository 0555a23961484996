#!/usr/bin/env python3
"""Smoke test for the pyissf extension module.

Builds are produced by cargo (`cargo build -p pyissf --release`); this script
locates the resulting cdylib, imports it as `pyissf`, and exercises the main
types and operations end to end.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]


def import_pyissf():
    candidates = [
        REPO / "target" / "release" / "libpyissf.so",
        REPO / "target" / "debug" / "libpyissf.so",
        REPO / "target" / "release" / "libpyissf.dylib",
        REPO / "target" / "debug" / "libpyissf.dylib",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit(
            "libpyissf not found - build it first:\n"
            "    cargo build -p pyissf --release"
        )
    stage = Path(tempfile.mkdtemp(prefix="pyissf_"))
    suffix = ".so" if lib.suffix == ".so" else ".so"  # CPython loads .so on mac too
    shutil.copy2(lib, stage / f"pyissf{suffix}")
    sys.path.insert(0, str(stage))
    import pyissf  # noqa: E402

    return pyissf


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    pyissf = import_pyissf()

    # Comparison functions and the margin construction.
    alpha = pyissf.ComparisonFunction.linear(1.0)
    iota = pyissf.ComparisonFunction.quarter_square()
    gamma = pyissf.gamma_from(alpha, iota)
    approx(gamma(1.0), 0.25, 1e-8)
    approx(gamma(0.0), 0.0)

    beta = pyissf.ComparisonFunction.linear(2.0).beta()
    approx(beta(1.0), 2.0, 1e-12)
    approx(pyissf.ComparisonFunction.cubic().invert(8.0), 2.0, 1e-8)

    ok, violations = alpha.validate(500)
    assert ok, violations

    # The margin cap: alpha = identity can absorb anything (b = inf).
    dstar = pyissf.max_disturbance(alpha, iota, float("inf"))
    assert math.isinf(dstar)

    # QP solver: projection of the origin onto a half-space.
    sol = pyissf.solve_qp(
        [[1.0, 0.0], [0.0, 1.0]],
        [0.0, 0.0],
        [([1.0], 1.0, 2.0, ">=")],
    )
    assert sol.status == "optimal", sol.status
    approx(sol.z[0], 1.0, 1e-9)
    approx(sol.z[1], 1.0, 1e-9)

    # Closed-form controllers on the scalar example.
    ex = pyissf.Example.scalar()
    approx(ex.issf_feedback([2.0])[0], -4.0, 1e-12)
    approx(ex.universal([1.0])[0], 1.0 - math.sqrt(5.0), 1e-10)
    lf, lg = ex.lie1([1.0])
    approx(lf, 1.0, 1e-12)
    approx(lg[0], -1.0, 1e-12)

    # Safeguarded simulation stays within the enlarged safe set.
    res = pyissf.simulate("scalar", "issf_feedback", d=1.0, x0=[2.0], tmax=5.0)
    assert not res.escaped
    assert res.peak <= 2.25 + 1e-3, res.peak
    assert len(res) == len(res.states) == len(res.h)

    # The unsafeguarded loop under the same disturbance blows up.
    res = pyissf.simulate("scalar", "none", d=1.0, x0=[2.0], tmax=10.0)
    assert res.escaped

    # Unified QP controller on the arctan example.
    res = pyissf.simulate("arctan", "issf_qp", d=10.0, epsilon=1.0, x0=[0.1], tmax=2.0)
    assert not res.escaped
    assert all(s == "optimal" for s in res.status)

    # Robot barrier row at rest: force channel only.
    robot = pyissf.Example.robot()
    a_u, a_delta, rhs, sense = robot.barrier_row([0.0, 1.5, 0.0, 0.0], 0.5)
    assert sense == ">="
    approx(a_u[0], 0.0)
    approx(a_u[1], -1.0, 1e-12)
    assert a_delta == 0.0

    # Certificate sampling.
    passed, reports = pyissf.check("scalar", seed=0, samples=1000)
    assert passed, "\n".join(reports)

    print("pyissf smoke test: all checks passed")


if __name__ == "__main__":
    main()
