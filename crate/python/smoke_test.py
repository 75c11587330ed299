"""Smoke test of the Python extension.

Build first:

    cargo build --release -p cccp-python --features extension-module

The script imports `cccp_py` from the path if installed, otherwise from the
freshly built shared library under target/release.
"""

import importlib.util
import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "cli" / "data"


def load():
    try:
        import cccp_py

        return cccp_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libcccp_py.so", "libcccp_py.dylib", "cccp_py.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                tmp = pathlib.Path(tempfile.mkdtemp())
                target = tmp / ("cccp_py.pyd" if name.endswith(".dll") else "cccp_py.so")
                shutil.copy(lib, target)
                spec = importlib.util.spec_from_file_location("cccp_py", target)
                module = importlib.util.module_from_spec(spec)
                spec.loader.exec_module(module)
                return module
    sys.exit("cccp_py not found; build it with cargo build --release -p cccp-python --features extension-module")


def main():
    cccp = load()
    print("cccp_py", cccp.__version__)

    assert abs(cccp.normal_cdf(0.0) - 0.5) < 1e-15
    assert abs(cccp.normal_quantile(0.975) - 1.959963984540054) < 1e-12

    a = cccp.steering(4, 0.5, 0.0)
    assert all(abs(v - 1) < 1e-15 for v in a)

    law = cccp.ComplexNormal([1 + 1j, 0], [[2, 0], [0, 1]])
    mean, var = law.re_inner_stats([1, 0])
    assert (mean, var) == (1.0, 1.0), (mean, var)
    draws = law.sample(20000, 5)
    assert len(draws) == 20000 and len(draws[0]) == 2
    emp = sum(d[0].real for d in draws) / len(draws)
    assert abs(emp - 1.0) < 0.05, emp

    golden = json.loads((DATA / "golden_individual.json").read_text())
    prob = cccp.Problem.from_json((DATA / "individual.json").read_text())
    res = prob.solve()
    assert res.status == "Optimal", res
    assert abs(res.objective - golden["objective"]) < 1e-6
    report = prob.validate(res.z, samples=100000, seed=1)
    assert report["pass"], report

    joint = cccp.Problem.from_json((DATA / "joint_two_row.json").read_text())
    lower, upper, gap = joint.solve("joint-bounds").bounds
    assert lower <= upper and math.isclose(gap, upper - lower)
    grid = joint.solve("joint-grid")
    assert abs(sum(grid.y) - 1) < 1e-12
    assert json.loads(grid.to_json())["method"] == "joint-grid"

    try:
        cccp.Problem.from_json((DATA / "individual.json").read_text().replace('"p": 0.9', '"p": 1.2', 1))
    except ValueError as e:
        assert "rows[0].p" in str(e)
    else:
        raise AssertionError("invalid level accepted")

    rows = cccp.run_beamform("fig1", runs=2)
    assert len(rows) == 3 * 9 * 3
    assert {r["method"] for r in rows} == {"proposed", "smi", "optimal"}
    print("smoke test passed")


if __name__ == "__main__":
    main()
