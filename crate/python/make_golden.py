"""Reference optimum of the bundled individual problem, computed directly
from the distribution parameters with scipy.

Writes crates/cli/data/golden_individual.json.
"""

import json
import pathlib

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "cli" / "data"


def law(spec):
    mean = np.array(spec["mean_re"]) + 1j * np.array(spec.get("mean_im", [0.0] * len(spec["mean_re"])))
    n = len(mean)

    def mat(key):
        m = spec.get(key)
        if m is None:
            return np.zeros((n, n), dtype=complex)
        return np.array(m["re"]) + 1j * np.array(m.get("im", np.zeros((n, n))))

    gamma, rel = mat("gamma"), mat("relation")
    return mean, np.real(gamma + rel) / 2, np.real(gamma - rel) / 2


def scalar_var(b):
    rel = b.get("relation", {"re": 0.0})["re"]
    return (b.get("gamma", 0.0) + rel) / 2


def main():
    prob = json.loads((DATA / "individual.json").read_text())
    obj = prob["objective"]
    mu_c, gx_c, gy_c = law(obj)
    rows = []
    for r in prob["rows"]:
        mu_a, gx, gy = law(r)
        mu_b = r["b"]["mean_re"]
        rows.append((mu_a, gx, gy, mu_b, scalar_var(r["b"]), norm.ppf(r["p"])))

    def split(v):
        n = len(v) // 2
        return v[:n], v[n:]

    def objective(v):
        x, y = split(v)
        z = x + 1j * y
        mean = np.real(np.conj(mu_c) @ z)
        var = x @ gx_c @ x + y @ gy_c @ y
        return obj.get("q1", 1.0) * mean + obj.get("q2", 1.0) * np.sqrt(var)

    def slack(v, row):
        mu_a, gx, gy, mu_b, vb, q = row
        x, y = split(v)
        mean = np.real(mu_a @ (x + 1j * y)) - mu_b
        var = x @ gx @ x + y @ gy @ y + vb
        return -(mean + q * np.sqrt(var))

    cons = [{"type": "ineq", "fun": (lambda v, r=r: slack(v, r))} for r in rows]

    # coarse brute force over a box, then local refinement from the best point
    axis = np.arange(-4.0, 4.0, 0.02)
    best, start = np.inf, None
    for a in axis:
        for b in axis:
            v = np.array([a, b])
            if all(c["fun"](v) >= 0 for c in cons):
                f = objective(v)
                if f < best:
                    best, start = f, v
    res = minimize(objective, start, constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
    assert res.success, res
    assert res.fun <= best + 1e-9
    x, y = split(res.x)
    golden = {"objective": float(res.fun), "z": {"re": x.tolist(), "im": y.tolist()}}
    (DATA / "golden_individual.json").write_text(json.dumps(golden, indent=2) + "\n")
    print(json.dumps(golden))


if __name__ == "__main__":
    main()
