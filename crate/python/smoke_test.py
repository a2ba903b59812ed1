"""Smoke test for the statedelay_py extension.

Build first with `cargo build --release -p statedelay-python` (or install with
maturin); the script falls back to the freshly built library in target/.
"""

import importlib.machinery
import importlib.util
import json
import math
import pathlib
import sys
import tempfile


def load():
    try:
        import statedelay_py

        return statedelay_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[1]
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libstatedelay_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("statedelay_py", str(lib))
            spec = importlib.util.spec_from_loader("statedelay_py", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("statedelay_py not found; build it with cargo build --release -p statedelay-python")


def check(cond, what):
    if not cond:
        sys.exit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    sd = load()

    basis = sd.Basis(1.0, 8)
    check(abs(basis.eigenvalues[0] - math.pi**2) < 1e-12, "first eigenvalue is pi^2")
    samples = [math.sqrt(2.0) * math.sin(3 * math.pi * x) for x in basis.nodes]
    coeffs = basis.project(samples)
    check(abs(coeffs[2] - 1.0) < 1e-12 and max(abs(c) for i, c in enumerate(coeffs) if i != 2) < 1e-12,
          "projection recovers e_3")

    model = sd.Model.preset("nicholson_constant_f")
    consts = json.loads(model.constants_json())
    check(abs(consts["absorbing_level"] - 1.5406) < 1e-3, "absorbing level of the preset")

    traj = model.simulate_random(1.0, 7, 2.0)
    check(len(traj) == 513, "trajectory length at dt = r/256")
    audit = json.loads(model.audit_json(traj))
    check(audit["pass"] and audit["min_energy"] >= 0.0, "energy audit passes")

    zero = model.simulate([0.0] * model.modes, 1.0)
    check(all(n == 0.0 for n in zero.norm_l2), "zero data stays zero")

    syn = sd.synthesize("nicholson_constant_f", [[0.5], [0.0, 1.0], [0.0, 0.0, 2.0]], rho=0.5)
    for i in range(3):
        rep = json.loads(syn.verify_json(i, 2.0))
        check(rep["relative_residual"] < 1e-8 and rep["max_drift"] < 1e-4, f"target {i + 1} is stationary")

    cert = json.loads(model.certify_json(1, n_states=50, n_pairs=60))
    check(all(c["pass"] for c in cert["checks"]), "preset kernel certifies")

    with tempfile.TemporaryDirectory() as out:
        code, summary = sd.run_config(sd.template("nicholson_constant_f", "simulate", 0), out=out)
        check(code == sd.EXIT_OK, f"config runner exits 0 ({summary})")
        bad = "command = simulate\npreset = nicholson_constant_f\n[model]\nd = -1\n"
        try:
            sd.run_config(bad, out=out)
            check(False, "negative d is rejected")
        except ValueError:
            check(True, "negative d is rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
