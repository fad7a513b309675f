"""Batch front end: ``redkin validate|run --config cfg.json [--out DIR] [--jobs N] [--seed S]``.

A configuration is a single JSON document::

    {
      "task": "generator" | "propagate" | "steady-state" | "slippage"
              | "oracle-compare" | "qrt" | "kinetic-correlator",
      "system": {"H": <matrix>, "couplings": {"x": <matrix>, ...}}
                or {"model": "pure_dephasing" | "damped_qubit" | "spin_boson" | "random",
                    "params": {...}},
      "bath": <CorrelationMatrix JSON>,      (optional for named models)
      "lambdas": [0.1, ...],
      "orders": [2, 4],
      "path": "fast" | "engine",
      "params": {...task specific...},
      "tolerances": {...}
    }

Matrices are ``{"dim": n, "data": [[re, im], ...]}`` in row-major order, or
nested lists. Exit codes: 0 success, 1 validation failure, 2 divergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .correlations import CorrelationMatrix, ExpSum, lorentzian_correlation, random_correlation_matrix
from .expoly import DivergenceError
from .io import dumps, generator_to_json, matrix_from_json, matrix_to_json, sha256_bytes
from .kernels import BACKEND
from .model import DAMPED_QUBIT_BATH_WEIGHTS, OpenSystem, damped_qubit_model, pure_dephasing_model, spin_boson_model
from .operators import ValidationError, check_hermitian, pauli

__all__ = ["TASKS", "DEFAULT_TOLERANCES", "validate", "run", "build_model", "main"]

TASKS = ("generator", "propagate", "steady-state", "slippage", "oracle-compare", "qrt", "kinetic-correlator")

DEFAULT_TOLERANCES = {
    "hermiticity": 1e-12,
    "pole_rel": 1e-8,
    "psd": 1e-10,
    "leakage": 1e-6,
    "steady_null": 1e-9,
    "positivity": 1e-8,
}

DIM_CAP = 64
_NAMED_OPERATORS = {
    "sigma_x": pauli()["x"],
    "sigma_y": pauli()["y"],
    "sigma_z": pauli()["z"],
    # basis state 0 is the excited state of (omega0/2) sigma_z
    "sigma_minus": np.array([[0, 0], [1, 0]], dtype=complex),
    "sigma_plus": np.array([[0, 1], [0, 0]], dtype=complex),
}


# ---------------------------------------------------------------- parsing
def _operator(obj, path):
    if isinstance(obj, str):
        if obj not in _NAMED_OPERATORS:
            raise ValidationError(f"{path}: unknown operator name {obj!r}")
        return _NAMED_OPERATORS[obj]
    return matrix_from_json(obj, path)


def _random_model(params, seed):
    rng = np.random.default_rng(seed)
    d = int(params.get("dim", 2))
    n = int(params.get("n_couplings", 1))
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = A + A.conj().T
    couplings = {}
    for k in range(n):
        B = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        couplings[f"c{k}"] = B + B.conj().T
    system = OpenSystem(H, couplings)
    return system, random_correlation_matrix(list(couplings), int(params.get("n_poles", 2)), rng)


def build_model(config: dict, seed: int | None = None):
    """``(OpenSystem, CorrelationMatrix, bath weights or None, model name)`` from a config."""
    sysc = config.get("system")
    if not isinstance(sysc, dict):
        raise ValidationError("system: missing or not an object")
    weights = None
    name = sysc.get("model")
    params = sysc.get("params", {})
    if name is not None:
        if name == "pure_dephasing":
            corr = None
            if "correlation" in params:
                corr = ExpSum.from_json(params["correlation"])
            system, cm = pure_dephasing_model(float(params.get("omega0", 1.0)), corr)
        elif name == "damped_qubit":
            system, cm = damped_qubit_model(float(params.get("gamma0", 1.0)), float(params.get("kappa", 1.0)),
                                            float(params.get("omega0", 1.0)), float(params.get("detuning", 0.0)))
            weights = dict(DAMPED_QUBIT_BATH_WEIGHTS)
        elif name == "spin_boson":
            omega0 = float(params.get("omega0", 1.0))
            corr = lorentzian_correlation(float(params.get("gamma0", 1.0)), float(params.get("kappa", 1.0)),
                                          float(params.get("omega_c", omega0)))
            system, cm = spin_boson_model(omega0, corr)
        elif name == "random":
            system, cm = _random_model(params, seed)
        else:
            raise ValidationError(f"system.model: unknown model {name!r}")
        if "bath" in config:
            cm = CorrelationMatrix.from_json(config["bath"])
        return system, cm, weights, name
    if "H" not in sysc:
        raise ValidationError("system.H: missing")
    H = matrix_from_json(sysc["H"], "system.H")
    check_hermitian(H, "H_S")
    if H.shape[0] > DIM_CAP:
        raise ValidationError(f"system.H: dimension {H.shape[0]} exceeds the cap {DIM_CAP}")
    couplings = {}
    for lab, M in (sysc.get("couplings") or {}).items():
        couplings[lab] = matrix_from_json(M, f"system.couplings.{lab}")
    if not couplings:
        raise ValidationError("system.couplings: at least one coupling is required")
    if "bath" not in config:
        raise ValidationError("bath: missing correlation matrix")
    cm = CorrelationMatrix.from_json(config["bath"])
    return OpenSystem(H, couplings), cm, None, "custom"


def validate(config: dict, seed: int | None = None) -> list[str]:
    """Dry-run diagnostics; an empty list means the configuration is usable."""
    diags: list[str] = []
    if not isinstance(config, dict):
        return ["config: not a JSON object"]
    task = config.get("task")
    if task not in TASKS:
        diags.append(f"task: must be one of {', '.join(TASKS)} (got {task!r})")
    lams = config.get("lambdas")
    if not isinstance(lams, list) or not lams:
        diags.append("lambdas: must be a non-empty list")
    elif any(not isinstance(x, (int, float)) or x <= 0 for x in lams):
        diags.append("lambdas: values must be positive numbers")
    orders = config.get("orders", [2])
    path = config.get("path", "fast")
    if path not in ("fast", "engine"):
        diags.append("path: must be 'fast' or 'engine'")
    if not isinstance(orders, list) or any(not isinstance(r, int) or r < 0 for r in orders):
        diags.append("orders: must be a list of nonnegative integers")
    elif path == "fast" and any(r not in (0, 2, 4) for r in orders):
        diags.append("orders: the fast path supports {0, 2, 4}; use path 'engine' for other orders")
    sysc = config.get("system") if isinstance(config.get("system"), dict) else {}
    if not sysc.get("model"):
        for field in ("H",):
            if field in sysc:
                try:
                    check_hermitian(matrix_from_json(sysc[field], f"system.{field}"), "H_S")
                except ValidationError as exc:
                    diags.append(str(exc))
        for lab, M in (sysc.get("couplings") or {}).items():
            try:
                matrix_from_json(M, f"system.couplings.{lab}")
            except ValidationError as exc:
                diags.append(str(exc))
    if "bath" in config:
        diags.extend(_bath_diagnostics(config["bath"]))
    if diags:
        return diags
    try:
        system, cm, _, _ = build_model(config, seed)
        system.check_bath(cm)
        diags.extend(cm.diagnostics())
    except ValidationError as exc:
        diags.append(str(exc))
    except (KeyError, TypeError, ValueError) as exc:
        diags.append(f"config: {exc}")
    return diags


def _bath_diagnostics(bath) -> list[str]:
    out = []
    if not isinstance(bath, dict) or "entries" not in bath or "labels" not in bath:
        return ["bath: must hold 'labels' and 'entries'"]
    for key, items in bath["entries"].items():
        for k, item in enumerate(items):
            try:
                ExpSum.from_json([item])
            except (ValidationError, KeyError, TypeError, ValueError) as exc:
                out.append(f"bath.entries.{key}[{k}]: {exc}")
    return out


# ---------------------------------------------------------------- numerics
def _generator_parts(system, cm, orders, path):
    from .engine import assemble_generator
    from .generators import fourth_order_fast, redfield_generator

    parts = {}
    for r in sorted(set(orders)):
        if r == 0 or r % 2:
            continue
        if path == "engine" or r > 4:
            parts[r] = assemble_generator(r, system, cm)
        elif r == 2:
            parts[r] = redfield_generator(system, cm)
        elif len(system.labels) == 1:
            parts[r] = fourth_order_fast(system, cm)
        else:
            parts[r] = assemble_generator(r, system, cm)
    return parts


def _times(spec, path="params.times"):
    if isinstance(spec, dict):
        t0 = float(spec.get("t_start", 0.0))
        return np.linspace(t0, float(spec["t_max"]), int(spec.get("n", 101)))
    if isinstance(spec, list) and spec:
        return np.asarray(spec, dtype=float)
    raise ValidationError(f"{path}: give a list or {{t_max, n}}")


def _rho0(params, d, path="params.rho0"):
    if "rho0" not in params:
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    return matrix_from_json(params["rho0"], path)


def _population_rate(G):
    """Relaxation rate of the slowest real, nonzero eigenvalue of a generator."""
    ev = np.linalg.eigvals(G)
    scale = max(1.0, float(np.max(np.abs(ev))))
    real = ev[(np.abs(ev.imag) <= 1e-9 * scale) & (np.abs(ev) > 1e-12 * scale)]
    return float(-np.max(real.real)) if real.size else float("nan")


def _coherence_rate(G):
    ev = np.linalg.eigvals(G)
    scale = max(1.0, float(np.max(np.abs(ev))))
    osc = ev[np.abs(ev.imag) > 1e-9 * scale]
    return float(-np.max(osc.real)) if osc.size else float("nan")


def _complex_cols(z):
    return [repr(float(np.real(z))), repr(float(np.imag(z)))]


def _job(args):
    """One ``(task, lambda)`` unit; returns ``{filename: text}``."""
    config, seed, idx, lam, parts = args
    from .dynamics import propagate, slipped_initial_state, slippage_operator, steady_state
    from .generators import total_generator

    system, cm, weights, name = build_model(config, seed)
    task = config["task"]
    params = config.get("params", {})
    tol = {**DEFAULT_TOLERANCES, **config.get("tolerances", {})}
    bundle = total_generator(parts, lam, system.H)
    tag = f"lam{idx:02d}"
    d = system.dim
    header = {"lambda": lam, "orders": sorted(parts), "model": name}
    if any(r > 4 for r in parts):
        header["experimental"] = "orders above 4"
    files = {}
    if task == "propagate":
        rho0 = _rho0(params, d)
        times = _times(params.get("times", {"t_max": 10.0, "n": 101}))
        t_start = 0.0
        if "slip_t0" in params:
            t_start = float(params["slip_t0"])
            rho0 = slipped_initial_state(rho0, system, cm, lam, t_start, resum=bool(params.get("resum", True)))
            header["slip_t0"] = t_start
        traj = propagate(bundle, rho0, times, t_start=t_start)
        files[f"trajectory_{tag}.csv"] = traj.to_csv(header)
    elif task == "steady-state":
        rho, unique = steady_state(bundle, tol["steady_null"])
        payload = {**header, "unique": unique, "state": None if rho is None else matrix_to_json(rho)}
        files[f"steady_{tag}.json"] = dumps(payload)
    elif task == "slippage":
        t0 = float(params.get("t0", 5.0))
        rho0 = _rho0(params, d)
        slipped = slipped_initial_state(rho0, system, cm, lam, t0, resum=bool(params.get("resum", True)))
        payload = {**header, "t0": t0, "resum": bool(params.get("resum", True)), "state": matrix_to_json(slipped)}
        if idx == 0:
            files["slippage_operator.json"] = dumps({"t0": t0, "superoperator": matrix_to_json(slippage_operator(system, cm, t0))})
        files[f"slipped_{tag}.json"] = dumps(payload)
    elif task == "qrt":
        from .oracles.correlators import qrt_compare
        from .oracles.finite_bath import finite_bath_evolve

        fb = _finite_bath(cm, params)
        A1 = _operator(params.get("A1", "sigma_minus"), "params.A1")
        A2 = _operator(params.get("A2", "sigma_plus"), "params.A2")
        pairs = [tuple(map(float, p)) for p in params["pairs"]]
        rho0 = _rho0(params, d)
        res = finite_bath_evolve(system, fb, lam, [0.0], rho0, weights=weights, two_time=[(A2, A1, pairs)],
                                 n_cap=int(params.get("n_cap", 1)), leak_tol=tol["leakage"])
        rep = qrt_compare(bundle, A2, A1, pairs, res.correlators[0], rho0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t1", "t2", "re_exact", "im_exact", "re_qrt", "im_qrt", "abs_dev"])
        for (t1, t2), ex, pr, dv in zip(rep.pairs, rep.exact, rep.predicted, rep.abs_dev):
            w.writerow([repr(float(t1)), repr(float(t2)), *_complex_cols(ex), *_complex_cols(pr), repr(float(dv))])
        files[f"qrt_{tag}.csv"] = "# " + json.dumps({**header, **rep.to_json(), "bath": fb.to_json()["errors"],
                                                     "warnings": fb.warnings + res.warnings}, sort_keys=True) + "\n" + buf.getvalue()
    elif task == "kinetic-correlator":
        from .oracles.correlators import kinetic_correlator
        from .oracles.finite_bath import finite_bath_evolve

        fb = _finite_bath(cm, params)
        T = _operator(params.get("T", "sigma_x"), "params.T")
        label = str(params.get("label", system.labels[0]))
        taus = [float(x) for x in params.get("taus", [0.0])]
        times = _times(params.get("times", {"t_start": 6.0, "t_max": 20.0, "n": 15}))
        rho0 = _rho0(params, d)
        res = finite_bath_evolve(system, fb, lam, times, rho0, weights=weights, leak_tol=tol["leakage"])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "tau", "re_measured", "im_measured", "re_order1", "im_order1"])
        for tau in taus:
            meas = res.bath_expectation(T, label, tau)
            for k, t in enumerate(times):
                pred = kinetic_correlator(res.trajectory.states[k], T, label, tau, system, cm, lam)
                w.writerow([repr(float(t)), repr(tau), *_complex_cols(meas[k]), *_complex_cols(pred)])
        files[f"kinetic_{tag}.csv"] = "# " + json.dumps({**header, "label": label, "bath": fb.to_json()["errors"],
                                                         "warnings": fb.warnings + res.warnings}, sort_keys=True) + "\n" + buf.getvalue()
    elif task == "oracle-compare":
        files["row"] = _oracle_row(system, cm, name, params, lam, parts)
    return files


def _finite_bath(cm, params):
    from .oracles.finite_bath import discretize_bath

    if len(cm.entries) == 1:
        target = next(iter(cm.entries.values()))
    else:
        # the damped-qubit representation stores C/4 in the diagonal entries
        target = cm.entry(cm.labels[0], cm.labels[0]).scaled(4.0)
        if "target" in params:
            target = ExpSum.from_json(params["target"])
    M = int(params.get("modes", 300))
    centre = float(np.mean(np.imag(target.rates)))
    half = float(params.get("half_window", 30.0))
    return discretize_bath(target, M, (centre - half, centre + half), n_max=int(params.get("n_max", 8)))


def _oracle_row(system, cm, name, params, lam, parts):
    from .generators import total_generator
    from .oracles.dephasing import dephasing_rate
    from .oracles.memory import damped_qubit_exact_rates

    G2 = total_generator({2: parts[2]}, lam, system.H).total if 2 in parts else None
    G4 = total_generator({r: parts[r] for r in (2, 4) if r in parts}, lam, system.H).total if 4 in parts else None
    if name == "damped_qubit":
        sp = params.get("model", {})
        exact = damped_qubit_exact_rates(float(sp.get("gamma0", 1.0)), float(sp.get("kappa", 1.0)), lam)["population"]
        rate = _population_rate
    elif name == "pure_dephasing":
        exact = dephasing_rate(cm, lam)
        rate = _coherence_rate
    else:
        raise ValidationError("oracle-compare supports the damped_qubit and pure_dephasing models")
    r2 = rate(G2) if G2 is not None else float("nan")
    r4 = rate(G4) if G4 is not None else float("nan")
    return [repr(float(lam)), repr(float(exact)), repr(r2), repr(r4)]


# ---------------------------------------------------------------- driver
def run(config: dict, out: str | os.PathLike, jobs: int = 1, seed: int | None = None) -> dict:
    """Execute a validated configuration and write outputs plus ``manifest.json``.

    Returns
    -------
    dict
        The manifest.
    """
    diags = validate(config, seed)
    if diags:
        raise ValidationError("; ".join(diags))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    system, cm, _, name = build_model(config, seed)
    task = config["task"]
    lams = [float(x) for x in config["lambdas"]]
    orders = config.get("orders", [2])
    files: dict[str, str] = {}
    if task == "generator":
        parts = _generator_parts(system, cm, orders, config.get("path", "fast"))
        for r, G in parts.items():
            files[f"g{r}.json"] = dumps(generator_to_json(G, r, {"model": name}))
        if config.get("params", {}).get("secular") and system.is_hermitian_coupling():
            from .generators import secular_gkls

            files["gkls.json"] = dumps(secular_gkls(system, cm).to_json())
    else:
        if name == "damped_qubit":
            config = {**config, "params": {**config.get("params", {}), "model": config["system"].get("params", {})}}
        parts = _generator_parts(system, cm, orders, config.get("path", "fast"))
        work = [(config, seed, i, lam, parts) for i, lam in enumerate(lams)]
        if jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_job, work))
        else:
            results = [_job(w) for w in work]
        if task == "oracle-compare":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["lambda", "rate_exact", "rate_order2", "rate_order4"])
            for res in results:
                w.writerow(res["row"])
            files["rates.csv"] = buf.getvalue()
        else:
            for res in results:
                files.update(res)
    hashes = {}
    for fname in sorted(files):
        data = files[fname].encode()
        (out / fname).write_bytes(data)
        hashes[fname] = sha256_bytes(data)
    manifest = {
        "task": task,
        "config_sha256": sha256_bytes(json.dumps(config, sort_keys=True).encode()),
        "inputs": {"system": system.fingerprint(), "bath": sha256_bytes(json.dumps(cm.to_json(), sort_keys=True).encode())},
        "seed": seed,
        "tolerances": {**DEFAULT_TOLERANCES, **config.get("tolerances", {})},
        "outputs": hashes,
        "versions": {
            "redkin": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "python": platform.python_version(),
            "kernels": BACKEND,
        },
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="redkin", description=__doc__.splitlines()[0])
    parser.add_argument("verb", choices=["validate", "run"])
    parser.add_argument("--config", required=True, help="experiment configuration (JSON)")
    parser.add_argument("--out", default="redkin_out", help="output directory for run")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for lambda sweeps")
    parser.add_argument("--seed", type=int, default=None, help="seed for random model instances")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: cannot read {args.config}: {exc}", file=sys.stderr)
        return 1
    if args.verb == "validate":
        diags = validate(config, args.seed)
        for line in diags:
            print(line)
        return 1 if diags else 0
    try:
        manifest = run(config, args.out, jobs=args.jobs, seed=args.seed)
    except ValidationError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    for fname in manifest["outputs"]:
        print(Path(args.out) / fname)
    print(Path(args.out) / "manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
