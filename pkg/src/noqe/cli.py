"""Command-line experiment runner.

Subcommands cover the full workflow: ``acquire`` records snapshot datasets
to disk, ``estimate`` turns them into matrix elements, ``solve`` and
``hadamard`` run the end-to-end energy estimate on either route, ``zne``
runs the folded-circuit mitigation variant, and ``sweep`` scans the noise
strength and emits a plot-ready CSV.  Every command writes a JSON report
that validates against the schema shipped with the package.  Outputs are
written atomically (temp file + rename) and are bit-for-bit reproducible
for a fixed config and seed, timing fields aside.

Exit codes: 0 success, 2 configuration or input problems, 3 data-file
problems, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import subprocess
import sys
import tempfile
import time
from importlib import resources

import jsonschema
import numpy as np

from . import __version__, shadows
from .errors import (
    ContractError,
    DegenerateSubspaceError,
    EstimateError,
    FormatError,
    ParseError,
    ResourceError,
    UnreliableDivisionError,
)
from .noise import NoiseModel
from .pipeline import (
    _complex_matrix_json,
    assemble_matrices,
    build_auxiliary_circuit,
    build_reference_circuit,
    exact_matrices,
    load_config,
    load_problem,
    noqe_energy,
    solve_gevp,
)
from .seeding import derive
from .zne import zne_hadamard_energy

_CONFIG_ERRORS = (ParseError, ContractError, ResourceError)
_DATA_ERRORS = (FormatError,)
_NUMERICAL_ERRORS = (
    DegenerateSubspaceError,
    EstimateError,
    UnreliableDivisionError,
    np.linalg.LinAlgError,
)

SWEEP_LAMBDAS = (0.5, 0.75, 1.0, 1.25, 1.5)


# ---------------------------------------------------------------------------
# plumbing


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".noqe-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _git_stamp():
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    sha = out.stdout.strip()
    return sha if out.returncode == 0 and sha else None


def _report_schema() -> dict:
    text = (resources.files("noqe.data") / "report.schema.json").read_text(
        encoding="utf-8"
    )
    return json.loads(text)


def _emit_report(command: str, cfg: dict, payload: dict, artifacts: list,
                 out_dir: str, t0: float) -> str:
    path = os.path.join(out_dir, f"{command}_report.json")
    report = {
        "schema_version": 1,
        "command": command,
        "package_version": __version__,
        "git": _git_stamp(),
        "seed": int(cfg["seed"]),
        "config": _jsonable(cfg),
        "artifacts": [os.path.abspath(p) for p in artifacts] + [os.path.abspath(path)],
    }
    report.update(_jsonable(payload))
    timing = dict(report.get("timing") or {})
    timing["cli_total_s"] = time.perf_counter() - t0
    report["timing"] = timing
    jsonschema.validate(report, _report_schema())
    _write_atomic(path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def _safe_name(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def _load_cfg(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.estimator_m is not None:
        cfg["estimator_m"] = args.estimator_m
    if args.distill:
        cfg["distill"] = True
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_acquire(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_cfg(args)
    ham, specs, _groups, noise = load_problem(cfg)
    del ham
    records = []
    for i, spec in enumerate(specs):
        preps = (
            (build_reference_circuit(spec), "state"),
            (build_auxiliary_circuit(spec, "R"), "re"),
            (build_auxiliary_circuit(spec, "I"), "im"),
        )
        for k, (prep, tag) in enumerate(preps):
            ds = shadows.acquire(
                prep,
                cfg["budget"],
                noise=noise,
                rng=derive(cfg["seed"], 1, i, k),
                label=f"{spec.label}:{tag}",
            )
            path = os.path.join(
                args.out, f"{_safe_name(spec.label)}_{tag}.shadow"
            )
            fd, tmp = tempfile.mkstemp(dir=args.out, prefix=".noqe-tmp-")
            os.close(fd)
            try:
                ds.save(tmp)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            with open(path, "rb") as fh:
                digest = hashlib.sha256(fh.read()).hexdigest()
            records.append(
                {
                    "label": f"{spec.label}:{tag}",
                    "path": os.path.abspath(path),
                    "count": len(ds),
                    "sha256": digest,
                }
            )
    payload = {"datasets": records, "budget": int(cfg["budget"])}
    path = _emit_report("acquire", cfg, payload, [r["path"] for r in records],
                        args.out, t0)
    print(f"wrote {len(records)} dataset files and {path}")
    return 0


def _load_datasets(directory: str, specs):
    """Read the (state, re, im) trio files cmd_acquire wrote for each state."""
    out = {}
    for spec in specs:
        trio = []
        for tag in ("state", "re", "im"):
            path = os.path.join(directory, f"{_safe_name(spec.label)}_{tag}.shadow")
            ds = shadows.ShadowDataset.load(path)
            expected = f"{spec.label}:{tag}"
            if ds.state_label != expected:
                raise FormatError(
                    f"{path}: dataset labelled {ds.state_label!r}, "
                    f"expected {expected!r}"
                )
            trio.append(ds)
        out[spec.label] = tuple(trio)
    return out


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_cfg(args)
    ham, specs, groups, noise = load_problem(cfg)
    datasets = None
    if args.datasets:
        datasets = _load_datasets(args.datasets, specs)
    common = dict(
        method=cfg["method"],
        budget=cfg["budget"],
        noise=noise,
        m=cfg["estimator_m"],
        seed=int(cfg["seed"]),
        groups=groups,
        exact=args.exact_mode,
        datasets=datasets,
    )
    est = assemble_matrices(specs, ham, distill=bool(cfg["distill"]), **common)
    payload = {
        "labels": list(est.labels),
        "method": est.method,
        "exact": bool(args.exact_mode),
        "budget": int(cfg["budget"]),
        "estimator_m": int(cfg["estimator_m"]),
        "distill": bool(cfg["distill"]),
        "s": _complex_matrix_json(est.s),
        "h": _complex_matrix_json(est.h),
        "s_se": [[float(x) for x in row] for row in est.s_se],
        "h_se": [[float(x) for x in row] for row in est.h_se],
        "flags": est.flags,
        "estimate_metadata": est.metadata,
    }
    if cfg["distill"] and not args.exact_mode:
        raw = assemble_matrices(specs, ham, distill=False, **common)
        payload["raw"] = {
            "s": _complex_matrix_json(raw.s),
            "h": _complex_matrix_json(raw.h),
            "s_se": [[float(x) for x in row] for row in raw.s_se],
            "h_se": [[float(x) for x in row] for row in raw.h_se],
        }
    path = _emit_report("estimate", cfg, payload, [], args.out, t0)
    print(f"wrote {path}")
    return 0


def _energy_command(args, command: str) -> int:
    t0 = time.perf_counter()
    cfg = _load_cfg(args)
    if command == "hadamard":
        cfg["method"] = "hadamard"
    report = noqe_energy(cfg, exact=args.exact_mode)
    path = _emit_report(command, cfg, report, [], args.out, t0)
    print(f"wrote {path} (ground energy {report['ground_energy']:+.6f} "
          f"{report['unit']})")
    return 0


def cmd_solve(args) -> int:
    return _energy_command(args, "solve")


def cmd_hadamard(args) -> int:
    return _energy_command(args, "hadamard")


def cmd_zne(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_cfg(args)
    report = zne_hadamard_energy(cfg)
    path = _emit_report("zne", cfg, report, [], args.out, t0)
    print(f"wrote {path} (mitigated {report['ground_energy']:+.6f}, "
          f"unmitigated {report['unmitigated_ground_energy']:+.6f})")
    return 0


def _sweep_quantities(est, energy):
    """(name, value, se) triples for the tracked elements plus the energy."""
    n = len(est.labels)
    out = []
    for i in range(n):
        out.append((f"h{i + 1}{i + 1}", est.h[i, i].real, est.h_se[i, i]))
    for i in range(n):
        for j in range(i + 1, n):
            tag = f"{i + 1}{j + 1}"
            out.append((f"re_s{tag}", est.s[i, j].real, est.s_se[i, j]))
            out.append((f"im_s{tag}", est.s[i, j].imag, est.s_se[i, j]))
            out.append((f"re_h{tag}", est.h[i, j].real, est.h_se[i, j]))
    out.append(("energy", energy, None))
    return out


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_cfg(args)
    ham, specs, groups, _noise = load_problem(cfg)
    base_noise = dict(cfg["noise"] or {})

    exact = exact_matrices(specs, ham)
    exact_energy = solve_gevp(exact, float(cfg["s_min"])).energies[0]
    truth = {
        name: value
        for name, value, _ in _sweep_quantities(exact, exact_energy)
    }

    rows = []
    for li, lam in enumerate(SWEEP_LAMBDAS):
        noise_cfg = dict(base_noise)
        noise_cfg["lambda"] = lam
        noise = NoiseModel.from_dict(noise_cfg)
        for mi, method in enumerate(("shadow", "hadamard")):
            est = assemble_matrices(
                specs,
                ham,
                method=method,
                budget=cfg["budget"],
                noise=noise,
                m=cfg["estimator_m"],
                distill=bool(cfg["distill"]) and method == "shadow",
                seed=derive(cfg["seed"], 7, li, mi),
                groups=groups,
            )
            energy = solve_gevp(est, float(cfg["s_min"])).energies[0]
            for name, value, se in _sweep_quantities(est, energy):
                rows.append(
                    {
                        "lambda": lam,
                        "method": method,
                        "quantity": name,
                        "value": value,
                        "se": "" if se is None else se,
                        "true_value": truth[name],
                        "abs_error": abs(value - truth[name]),
                    }
                )

    csv_path = os.path.join(args.out, "sweep.csv")
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf,
        fieldnames=[
            "lambda", "method", "quantity", "value", "se",
            "true_value", "abs_error",
        ],
    )
    writer.writeheader()
    writer.writerows(rows)
    _write_atomic(csv_path, buf.getvalue())

    payload = {
        "csv": os.path.abspath(csv_path),
        "rows": len(rows),
        "lambdas": list(SWEEP_LAMBDAS),
        "methods": ["shadow", "hadamard"],
        "budget": int(cfg["budget"]),
        "true_energy": float(exact_energy),
    }
    path = _emit_report("sweep", cfg, payload, [csv_path], args.out, t0)
    print(f"wrote {csv_path} ({len(rows)} rows) and {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noqe",
        description="Shadow-tomography eigensolver experiment runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "acquire": (cmd_acquire, "record snapshot datasets for each state"),
        "estimate": (cmd_estimate, "estimate overlap and Hamiltonian matrices"),
        "solve": (cmd_solve, "full energy estimate on the configured method"),
        "hadamard": (cmd_hadamard, "full energy estimate on the interference route"),
        "zne": (cmd_zne, "folded-circuit mitigated energy estimate"),
        "sweep": (cmd_sweep, "scan noise strengths and emit a CSV table"),
    }
    for name, (fn, help_text) in handlers.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--estimator-m", type=int, choices=(1, 2, 3),
                       default=None, help="override the estimator order")
        p.add_argument("--distill", action="store_true",
                       help="enable ratio-estimator distillation")
        p.add_argument("--exact-mode", action="store_true",
                       help="bypass sampling; use statevector oracles")
        if name == "estimate":
            p.add_argument("--datasets", default=None, metavar="DIR",
                           help="reuse dataset files from a previous acquire")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.handler(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
