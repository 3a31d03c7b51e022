"""Experiment runner: JSON configs in, CSV/JSON artifacts out.

Subcommands: `run <config.json>` executes one experiment and writes its
artifacts plus a summary.json; `list-systems` prints the system
catalogue; `lattice` emits the eigenvalue lattice of the cycle-with-
spiral-sink flow as CSV; `repr <config.json>` runs a representation
check and prints the residual/faithfulness table.

Exit codes: 0 success, 2 unusable config (schema violation, bad JSON,
missing file; the failing field path is printed), 3 numerical or usage
failure inside a method (module error text is printed).

Fixed configs reproduce their artifacts byte for byte: every file name
is static, CSV floats are written by numpy with fixed format, JSON is
dumped with sorted keys, and all sampling randomness comes from the one
recorded 64-bit seed.  The only non-reproducible values are the runtimes
inside summary.json.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from .dmd import (
    companion_dmd,
    continuous_time_eigenvalues,
    pseudoinverse_dmd,
    spectral_triple,
)
from .embedding import SnapshotPair
from .errors import KoopmanError, UsageError
from .finite_section import finite_section_matrix
from .mori_zwanzig import FourierObservable, circle_rotation_closure, mz_decompose
from .observables import (
    Observable,
    ObservableDictionary,
    fourier_box,
    monomial_library,
)
from .partitions import (
    RegularGrid,
    ergodic_partition_approx,
    gla_eigenfunction,
    partition_invariance_score,
    time_average,
)
from .representation_eval import (
    RepresentationModel,
    faithfulness_estimate,
    representation_residual,
    sindy_fit,
)
from .static_koopman import PairedSamples, fit_static_linear
from .systems import (
    SYSTEM_KINDS,
    SystemSpec,
    duffing_fixed_point_eigenvalues,
    integrate,
    step_map_batch,
)

METHODS = (
    "companion_dmd",
    "pinv_dmd",
    "edmd",
    "gla",
    "partition",
    "static",
    "mz",
    "sindy",
    "repr_check",
)

_DICTIONARY_SCHEMA = {
    "oneOf": [
        {"type": "array", "items": {"type": "object"}, "minItems": 1},
        {
            "type": "object",
            "required": ["builder"],
            "properties": {
                "builder": {"enum": ["fourier_box", "monomials"]},
                "dim": {"type": "integer", "minimum": 1},
                "kmax": {"type": "integer", "minimum": 1},
                "kind": {"enum": ["fourier", "phase", "sin", "cos"]},
                "coords": {
                    "type": "array",
                    "items": {"type": "string"},
                    "minItems": 1,
                },
                "degree": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["method", "system"],
    "additionalProperties": False,
    "properties": {
        "method": {"enum": list(METHODS)},
        "system": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(SYSTEM_KINDS)},
                "params": {"type": "object"},
            },
        },
        "dictionary": _DICTIONARY_SCHEMA,
        "dictionary_out": _DICTIONARY_SCHEMA,
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "minimum": 0},
                "n": {"type": "integer", "minimum": 1},
                "initial_state": {"type": "array", "items": {"type": "number"}},
                "seed": {"type": "integer", "minimum": 0},
                "grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["unit_square"]},
                        "n": {"type": "integer", "minimum": 1},
                        "axes": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["lo", "hi", "n"],
                                "additionalProperties": False,
                                "properties": {
                                    "lo": {"type": "number"},
                                    "hi": {"type": "number"},
                                    "n": {"type": "integer", "minimum": 1},
                                    "period": {"type": ["number", "null"]},
                                },
                            },
                        },
                    },
                },
            },
        },
        "method_params": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["csv", "json"]},
                },
            },
        },
        "tolerances": {"type": "object"},
    },
    "allOf": [
        {
            "if": {"properties": {"method": {"enum": ["edmd", "partition", "sindy"]}}},
            "then": {"required": ["dictionary"]},
        },
        {
            "if": {
                "properties": {
                    "method": {
                        "enum": ["companion_dmd", "pinv_dmd", "edmd", "gla", "sindy", "repr_check"]
                    }
                }
            },
            "then": {
                "properties": {"sampling": {"required": ["initial_state", "n"]}},
                "required": ["sampling"],
            },
        },
        {
            "if": {"properties": {"method": {"const": "mz"}}},
            "then": {
                "anyOf": [
                    {
                        "properties": {
                            "sampling": {"required": ["initial_state", "n"]}
                        },
                        "required": ["dictionary", "sampling"],
                    },
                    {
                        "properties": {"method_params": {"required": ["closure"]}},
                        "required": ["method_params"],
                    },
                ]
            },
        },
        {
            "if": {"properties": {"method": {"const": "partition"}}},
            "then": {
                "properties": {"sampling": {"required": ["grid"]}},
                "required": ["sampling"],
            },
        },
        {
            "if": {"properties": {"method": {"const": "static"}}},
            "then": {"required": ["dictionary", "dictionary_out"]},
        },
        {
            "if": {"properties": {"method": {"const": "gla"}}},
            "then": {
                "properties": {
                    "method_params": {"required": ["lambda_target", "observable"]}
                },
                "required": ["method_params"],
            },
        },
        {
            "if": {"properties": {"method": {"const": "repr_check"}}},
            "then": {
                "properties": {"method_params": {"required": ["coefficients"]}},
                "required": ["dictionary", "method_params"],
            },
        },
    ],
}

SUMMARY_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["method", "system", "eigenvalues", "residuals", "runtimes", "seed", "artifacts"],
    "additionalProperties": False,
    "properties": {
        "method": {"enum": list(METHODS)},
        "system": {"type": "object"},
        "eigenvalues": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["re", "im"],
                "properties": {"re": {"type": "number"}, "im": {"type": "number"}},
                "additionalProperties": False,
            },
        },
        "residuals": {
            "type": "object",
            "additionalProperties": {"type": ["number", "integer", "boolean"]},
        },
        "runtimes": {
            "type": "object",
            "additionalProperties": {"type": "number"},
        },
        "seed": {"type": "integer"},
        "artifacts": {"type": "array", "items": {"type": "string"}},
        "tolerances": {"type": "object"},
    },
}

_MERSENNE_MASK = (1 << 64) - 1


def _complex_json(z) -> dict:
    z = complex(z)
    return {"re": float(z.real), "im": float(z.imag)}


def _decode_number(v):
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    return v


def _decode_matrix(rows) -> np.ndarray:
    return np.array([[_decode_number(v) for v in row] for row in rows])


def _build_dictionary(node) -> ObservableDictionary:
    if isinstance(node, list):
        return ObservableDictionary.from_json(node)
    builder = node["builder"]
    if builder == "fourier_box":
        return fourier_box(node["dim"], node["kmax"], node.get("kind", "fourier"))
    return monomial_library(tuple(node["coords"]), node["degree"])


def _build_grid(node) -> RegularGrid:
    if node.get("kind") == "unit_square":
        return RegularGrid.unit_square(node["n"])
    if "axes" not in node:
        raise UsageError("grid needs either kind 'unit_square' or explicit axes")
    axes, periods = [], []
    for ax in node["axes"]:
        axes.append(np.linspace(ax["lo"], ax["hi"], ax["n"]))
        periods.append(ax.get("period"))
    return RegularGrid(axes=tuple(axes), periods=tuple(periods))


def _write_eigenvalue_csv(path, eigs) -> None:
    eigs = np.asarray(eigs, dtype=complex).ravel()
    rows = np.column_stack([eigs.real, eigs.imag])
    np.savetxt(path, rows, delimiter=",", header="re,im", comments="")


def _make_trajectory(spec: SystemSpec, sampling: dict):
    if "initial_state" not in sampling:
        raise UsageError("sampling.initial_state is required for this method")
    if "n" not in sampling:
        raise UsageError("sampling.n is required for this method")
    dt = 0.0 if spec.is_map else float(sampling.get("dt", 0.0))
    if not spec.is_map and dt <= 0.0:
        raise UsageError("flows need sampling.dt > 0")
    return integrate(spec, tuple(sampling["initial_state"]), dt=dt, n_steps=sampling["n"])


def emit_lattice(c: float, omega: float, N: int, M: int) -> np.ndarray:
    """Eigenvalue grid i*n*omega + m*beta for n in 0..N, m in 0..M.

    beta is the decaying spiral exponent (-c + sqrt(c^2-8))/2, the root
    with nonnegative imaginary part.  Rows come out in (n, m) loop order.
    """
    if N < 0 or M < 0:
        raise UsageError("lattice truncation requires N, M >= 0")
    beta = duffing_fixed_point_eigenvalues(c)[0]
    return np.array(
        [1j * n * omega + m * beta for n in range(N + 1) for m in range(M + 1)],
        dtype=complex,
    )


# ---------------------------------------------------------------- methods


def _dmd_series(config, traj) -> np.ndarray:
    """States fed to the snapshot pair, through the dictionary if given."""
    if "dictionary" in config:
        return _build_dictionary(config["dictionary"]).evaluate(traj.states)
    return traj.states


def _run_companion_dmd(config, spec, out_dir):
    traj = _make_trajectory(spec, config.get("sampling", {}))
    pair = SnapshotPair.from_series(_dmd_series(config, traj), dt=traj.dt)
    model = companion_dmd(pair)
    _write_eigenvalue_csv(out_dir / "eigenvalues.csv", model.eigenvalues)
    np.savetxt(
        out_dir / "companion_c.csv",
        np.column_stack([model.c.real, model.c.imag]),
        delimiter=",",
        header="re,im",
        comments="",
    )
    return {
        "eigenvalues": model.eigenvalues,
        "residuals": {"companion_residual": model.residual},
        "artifacts": ["eigenvalues.csv", "companion_c.csv"],
    }


def _run_pinv_dmd(config, spec, out_dir):
    traj = _make_trajectory(spec, config.get("sampling", {}))
    pair = SnapshotPair.from_series(_dmd_series(config, traj), dt=traj.dt)
    A = pseudoinverse_dmd(pair)
    triple = spectral_triple(A, pair)
    _write_eigenvalue_csv(out_dir / "eigenvalues.csv", triple.eigenvalues)
    with open(out_dir / "triple.json", "w") as fh:
        json.dump(triple.to_json(), fh, indent=2, sort_keys=True)
    return {
        "eigenvalues": triple.eigenvalues,
        "residuals": {"reconstruction": triple.reconstruction_residual},
        "artifacts": ["eigenvalues.csv", "triple.json"],
    }


def _run_edmd(config, spec, out_dir):
    traj = _make_trajectory(spec, config.get("sampling", {}))
    dictionary = _build_dictionary(config["dictionary"])
    section = finite_section_matrix(dictionary, traj)
    eigs = section.eigenvalues()
    section.to_csv(out_dir / "section.csv")
    _write_eigenvalue_csv(out_dir / "eigenvalues.csv", eigs)
    artifacts = ["section.csv", "eigenvalues.csv"]
    if traj.dt > 0:
        _write_eigenvalue_csv(
            out_dir / "eigenvalues_continuous.csv",
            continuous_time_eigenvalues(eigs, traj.dt),
        )
        artifacts.append("eigenvalues_continuous.csv")
    return {
        "eigenvalues": eigs,
        "residuals": {"route_disagreement": section.route_disagreement},
        "artifacts": artifacts,
    }


def _run_gla(config, spec, out_dir):
    traj = _make_trajectory(spec, config.get("sampling", {}))
    params = config["method_params"]
    lam = _decode_number(params["lambda_target"])
    g = Observable.from_json(params["observable"])
    avg = gla_eigenfunction(traj, lam, g, window=params.get("window"))
    rows = np.column_stack(
        [np.arange(avg.samples.size), avg.samples.real, avg.samples.imag]
    )
    np.savetxt(out_dir / "harmonic.csv", rows, delimiter=",", header="k,re,im", comments="")
    return {
        "eigenvalues": [avg.multiplier],
        "residuals": {"harmonic_residual": avg.residual},
        "artifacts": ["harmonic.csv"],
    }


def _run_partition(config, spec, out_dir, seed):
    sampling = config["sampling"]
    dictionary = _build_dictionary(config["dictionary"])
    grid = _build_grid(sampling["grid"])
    dt = None if spec.is_map else sampling.get("dt")
    params = config.get("method_params", {})
    field = time_average(dictionary, spec, grid, n=sampling.get("n", 1000), dt=dt)
    labeling = ergodic_partition_approx(field, bins_per_obs=params.get("bins", 3))
    score = partition_invariance_score(
        labeling,
        spec,
        n_test=params.get("n_test", 1),
        dt=dt,
        sample_limit=params.get("sample_limit"),
        seed=seed,
    )
    field.to_csv(out_dir / "field.csv")
    labeling.to_csv(out_dir / "labeling.csv")
    with open(out_dir / "labeling.json", "w") as fh:
        json.dump(labeling.to_json(invariance_score=score), fh, indent=2, sort_keys=True)
    return {
        "eigenvalues": [],
        "residuals": {
            "invariance_score": score,
            "n_cells": labeling.n_cells,
            "diverged_fraction": float(np.mean(field.diverged)),
        },
        "artifacts": ["field.csv", "labeling.csv", "labeling.json"],
    }


def _run_static(config, spec, out_dir, seed):
    if not spec.is_map:
        raise UsageError("static regression needs a discrete map system")
    sampling = config.get("sampling", {})
    n = sampling.get("n", 100)
    params = config.get("method_params", {})
    lo, hi = params.get("box", [-1.0, 1.0])
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(lo, hi, size=(n, spec.dim))
    outputs = step_map_batch(spec, inputs)
    pairs = PairedSamples(inputs=inputs, outputs=outputs)
    fit = fit_static_linear(
        pairs,
        _build_dictionary(config["dictionary"]),
        _build_dictionary(config["dictionary_out"]),
    )
    fit.to_csv(out_dir / "A.csv")
    pairs.to_csv(out_dir / "pairs.csv")
    return {
        "eigenvalues": [],
        "residuals": {
            "fit_residual": fit.residual,
            "rank": fit.rank,
            "rank_deficient": fit.rank_deficient,
        },
        "artifacts": ["A.csv", "pairs.csv"],
    }


def _run_mz(config, spec, out_dir):
    params = config.get("method_params", {})
    if "closure" in params:
        closure = params["closure"]
        f = FourierObservable([_decode_number(v) for v in closure["coefficients"]])
        result = circle_rotation_closure(
            f, closure["omega"], closure.get("m_samples", 4096)
        )
        payload = {
            "lambda": _complex_json(result["lambda"]),
            "lambda_empirical": _complex_json(result["lambda_empirical"]),
            "residual_markov": result["residual_markov"],
            "orthogonal_fraction": result["orthogonal_fraction"],
        }
        with open(out_dir / "closure.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        return {
            "eigenvalues": [result["lambda"]],
            "residuals": {
                "residual_markov": result["residual_markov"],
                "lambda_route_gap": abs(result["lambda"] - result["lambda_empirical"]),
            },
            "artifacts": ["closure.json"],
        }
    traj = _make_trajectory(spec, config.get("sampling", {}))
    dictionary = _build_dictionary(config["dictionary"])
    dec = mz_decompose(dictionary, traj, k_max=params.get("k_max", 10))
    dec.to_csv(out_dir / "mz.csv")
    return {
        "eigenvalues": [],
        "residuals": {
            "orthogonal_max": float(np.max(dec.orthogonal_norms)),
            "cross_max": float(np.max(dec.cross_norms)),
        },
        "artifacts": ["mz.csv"],
    }


def _run_sindy(config, spec, out_dir):
    traj = _make_trajectory(spec, config.get("sampling", {}))
    library = _build_dictionary(config["dictionary"])
    threshold = config.get("method_params", {}).get("threshold")
    model = sindy_fit(traj, library, threshold=threshold)
    model.save_json(out_dir / "model.json")
    return {
        "eigenvalues": [],
        "residuals": {
            "fit_residual": model.residual,
            "n_terms": int(np.count_nonzero(model.coefficients)),
        },
        "artifacts": ["model.json"],
    }


def _run_repr_check(config, spec, out_dir, stream):
    traj = _make_trajectory(spec, config.get("sampling", {}))
    dictionary = _build_dictionary(config["dictionary"])
    A = _decode_matrix(config["method_params"]["coefficients"])
    model = RepresentationModel(
        observables=dictionary, map_kind="linear", coefficients=A
    )
    residual = representation_residual(model, traj)
    values = dictionary.evaluate(traj.states)
    faith = faithfulness_estimate(values, traj.states)
    i, j = faith["witness"]
    print("check           value", file=stream)
    print(f"residual        {residual:.6e}", file=stream)
    print(
        f"faithfulness    {faith['score']:.6e}  (witness samples {i}, {j})",
        file=stream,
    )
    payload = {
        "residual": residual,
        "faithfulness": faith["score"],
        "witness": [i, j],
    }
    with open(out_dir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return {
        "eigenvalues": [],
        "residuals": {"representation": residual, "faithfulness": faith["score"]},
        "artifacts": ["report.json"],
    }


# ----------------------------------------------------------------- driver


def _apply_overrides(config: dict, overrides) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"--set needs path=value, got {item!r}")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        keys = path.split(".")
        node = config
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise UsageError(f"--set path {path!r} crosses a non-object field")
        node[keys[-1]] = value
    return config


def run(config: dict, out_dir, stream=None) -> dict:
    """Execute one validated config; returns the summary dictionary."""
    stream = sys.stdout if stream is None else stream
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SystemSpec(
        kind=config["system"]["kind"], params=config["system"].get("params", {})
    )
    seed = int(config.get("sampling", {}).get("seed", 0)) & _MERSENNE_MASK
    method = config["method"]
    t0 = time.perf_counter()
    if method == "companion_dmd":
        result = _run_companion_dmd(config, spec, out_dir)
    elif method == "pinv_dmd":
        result = _run_pinv_dmd(config, spec, out_dir)
    elif method == "edmd":
        result = _run_edmd(config, spec, out_dir)
    elif method == "gla":
        result = _run_gla(config, spec, out_dir)
    elif method == "partition":
        result = _run_partition(config, spec, out_dir, seed)
    elif method == "static":
        result = _run_static(config, spec, out_dir, seed)
    elif method == "mz":
        result = _run_mz(config, spec, out_dir)
    elif method == "sindy":
        result = _run_sindy(config, spec, out_dir)
    else:
        result = _run_repr_check(config, spec, out_dir, stream)
    elapsed = time.perf_counter() - t0

    summary = {
        "method": method,
        "system": spec.to_json(),
        "eigenvalues": [_complex_json(z) for z in result["eigenvalues"]],
        "residuals": {
            k: (v if isinstance(v, (bool, int)) else float(v))
            for k, v in result["residuals"].items()
        },
        "runtimes": {"method_s": elapsed},
        "seed": seed,
        "artifacts": sorted(result["artifacts"] + ["summary.json"]),
    }
    if "tolerances" in config:
        summary["tolerances"] = config["tolerances"]
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _validate_config(config: dict) -> None:
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise jsonschema.ValidationError(f"at {where}: {err.message}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="koopman",
        description="Spectral analysis of dynamical systems from trajectory data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--set", action="append", dest="overrides", metavar="PATH=VALUE",
                       help="override a scalar config field, e.g. sampling.n=20000")
    p_run.add_argument("--out", help="output directory (default: config output.dir or '.')")

    sub.add_parser("list-systems", help="print the system catalogue")

    p_lat = sub.add_parser("lattice", help="emit the spiral-sink eigenvalue lattice")
    p_lat.add_argument("--c", type=float, required=True)
    p_lat.add_argument("--omega", type=float, required=True)
    p_lat.add_argument("--N", type=int, required=True)
    p_lat.add_argument("--M", type=int, required=True)
    p_lat.add_argument("--out", help="CSV file (default: stdout)")

    p_repr = sub.add_parser("repr", help="representation check with printed table")
    p_repr.add_argument("config", help="path to a repr_check JSON config")
    p_repr.add_argument("--set", action="append", dest="overrides", metavar="PATH=VALUE")
    p_repr.add_argument("--out", help="output directory")

    args = parser.parse_args(argv)

    if args.command == "list-systems":
        for kind in SYSTEM_KINDS:
            spec = SystemSpec(kind=kind) if kind != "linear_map" else None
            if spec is None:
                print("linear_map: coords by matrix B (params: B, required)")
                continue
            params = ", ".join(f"{k}={v:g}" for k, v in spec.params.items())
            print(f"{kind}: coords ({', '.join(spec.coord_names)}); params {params}")
        return 0

    if args.command == "lattice":
        if args.N < 0 or args.M < 0:
            print("lattice: N and M must be >= 0", file=sys.stderr)
            return 2
        values = emit_lattice(args.c, args.omega, args.N, args.M)
        if args.out:
            _write_eigenvalue_csv(args.out, values)
        else:
            print("re,im")
            for z in values:
                print(f"{z.real:.18e},{z.imag:.18e}")
        return 0

    # run / repr
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config unusable: {exc}", file=sys.stderr)
        return 2
    try:
        _apply_overrides(config, args.overrides)
    except UsageError as exc:
        print(f"config unusable: {exc}", file=sys.stderr)
        return 2
    if args.command == "repr" and config.get("method") != "repr_check":
        print("config unusable: at method: repr expects method 'repr_check'", file=sys.stderr)
        return 2
    try:
        _validate_config(config)
    except jsonschema.ValidationError as exc:
        print(f"config invalid {exc.message}", file=sys.stderr)
        return 2

    out_dir = args.out or config.get("output", {}).get("dir", ".")
    try:
        summary = run(config, out_dir)
    except KoopmanError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    residuals = ", ".join(f"{k}={v:.3g}" for k, v in summary["residuals"].items())
    print(f"{summary['method']}: wrote {out_dir} ({residuals})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
