"""Command-line front end: weight computation, spectra, sweeps, simulation.

Every command reads the topology JSON schema {"m": [...], "n": [...], "K": int}
and emits JSON or RFC-4180 CSV with numbers at 12 significant digits.  File
outputs get a sibling ``<name>.manifest.json`` recording the command, inputs,
version, seed and timing; JSON sent to stdout embeds the same manifest.

Exit codes: 0 success, 1 usage or parse error, 2 numerical failure,
3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .numopt import _flatten, optimize_weights
from .sim import SimulationConfig, run_trials
from .spectral import (
    assemble_weight_matrix,
    block_decomposition,
    blocks_from_factors,
    interlacing_check,
    slem,
    spectrum_union,
    stationary_vector,
    symmetric_eigenvalues,
)
from .topology import BranchSpec, build_network
from .weights import (
    EvaluationError,
    SolverError,
    StratifiedWeights,
    best_constant_weights,
    characteristic_det,
    characteristic_det_reduced,
    max_cores,
    max_degree_weights,
    metropolis_weights,
    optimal_weights,
    solve_theta,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VALIDATION = 3

SCHEMES = ("optimal", "metropolis", "max_degree", "best_constant")

# Reference 9 x 6 benchmark grid of branch lengths (rows) and counts (columns).
GRID_LENGTHS = (
    (3, 2, 1),
    (4, 2, 1),
    (4, 3, 1),
    (4, 3, 2),
    (5, 3, 1),
    (5, 3, 2),
    (5, 4, 1),
    (5, 4, 2),
    (5, 4, 3),
)
GRID_COUNTS = (
    (1, 2, 3),
    (3, 2, 1),
    (3, 1, 2),
    (1, 3, 2),
    (2, 3, 1),
    (2, 1, 3),
)


def _sig12(value: float) -> float:
    return float(f"{value:.12g}")


def _rounded(obj):
    if isinstance(obj, float):
        return _sig12(obj)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return "" if value is None else str(value)


def _load_spec(path: str) -> BranchSpec:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    return BranchSpec.from_dict(data)


def _manifest(command: str, arguments: dict, started: float, seed=None) -> dict:
    return {
        "command": command,
        "arguments": arguments,
        "version": __version__,
        "seed": seed,
        "started_utc": datetime.datetime.fromtimestamp(
            started, datetime.timezone.utc
        ).isoformat(),
        "elapsed_seconds": _sig12(time.time() - started),
    }


def _write_csv(rows: list[dict], header: list[str], out: str | None) -> None:
    handle = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in header])
    finally:
        if out:
            handle.close()


def _emit(
    document: dict,
    rows: list[dict],
    header: list[str],
    fmt: str,
    out: str | None,
    manifest: dict,
) -> None:
    """Write the command result plus its manifest.

    JSON carries the full document; CSV carries the tabular rows.  With
    ``--out`` the manifest lands in a sibling file, otherwise it is embedded
    (JSON) or skipped (CSV to stdout).
    """
    if out:
        manifest = dict(manifest, outputs=[out])
        with open(out + ".manifest.json", "w", encoding="utf-8") as handle:
            json.dump(_rounded(manifest), handle, indent=2)
            handle.write("\n")
    if fmt == "json":
        payload = _rounded(document)
        if out:
            with open(out, "w", encoding="utf-8") as handle:
                json.dump(payload, handle, indent=2)
                handle.write("\n")
        else:
            payload["manifest"] = _rounded(manifest)
            json.dump(payload, sys.stdout, indent=2)
            sys.stdout.write("\n")
    else:
        _write_csv(rows, header, out)


def compute_scheme(spec: BranchSpec, scheme: str) -> dict:
    """Weights, SLEM and metadata for one scheme on one topology."""
    network = build_network(spec)
    theta = None
    if scheme == "optimal":
        solution = solve_theta(spec)
        weights = optimal_weights(spec, solution)
        theta = solution.theta
    elif scheme == "metropolis":
        weights = metropolis_weights(network)
    elif scheme == "max_degree":
        weights = max_degree_weights(network)
    elif scheme == "best_constant":
        weights = best_constant_weights(network)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    matrix = assemble_weight_matrix(network, weights)
    result = {
        "spec": spec.to_dict(),
        "scheme": scheme,
        "slem": slem(matrix),
        "theta": theta,
        "weights": (
            {"strata": [list(row) for row in weights.strata]}
            if weights.strata is not None
            else {"edges": [[u, v, w] for u, v, w in weights.per_edge]}
        ),
        "metadata": {
            "node_count": spec.node_count,
            "edge_count": spec.edge_count,
            "counts_below_two": any(n < 2 for n in spec.counts),
        },
    }
    return result


def load_weights_document(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def weights_from_document(document: dict) -> StratifiedWeights:
    scheme = document.get("scheme", "loaded")
    table = document.get("weights", {})
    if "strata" in table and table["strata"] is not None:
        return StratifiedWeights(
            scheme=scheme, strata=tuple(tuple(row) for row in table["strata"])
        )
    if "edges" in table and table["edges"] is not None:
        return StratifiedWeights(
            scheme=scheme,
            per_edge=tuple((int(u), int(v), float(w)) for u, v, w in table["edges"]),
        )
    raise ValueError("weights document carries neither strata nor edges")


def _weight_row(spec: BranchSpec, result: dict) -> dict:
    if "strata" in result["weights"]:
        packed = " ".join(
            f"{p + 1}:{i + 1}:{w:.12g}"
            for p, row in enumerate(result["weights"]["strata"])
            for i, w in enumerate(row)
        )
    else:
        packed = " ".join(
            f"{u}-{v}:{w:.12g}" for u, v, w in result["weights"]["edges"]
        )
    return {
        "m": " ".join(map(str, spec.lengths)),
        "n": " ".join(map(str, spec.counts)),
        "K": spec.cores,
        "scheme": result["scheme"],
        "slem": result["slem"],
        "theta": result["theta"],
        "weights": packed,
    }


def cmd_slem(args) -> int:
    started = time.time()
    spec = _load_spec(args.spec)
    result = compute_scheme(spec, args.scheme)
    manifest = _manifest("slem", {"spec": args.spec, "scheme": args.scheme}, started)
    _emit(
        result,
        [_weight_row(spec, result)],
        ["m", "n", "K", "scheme", "slem", "theta", "weights"],
        args.format,
        args.out,
        manifest,
    )
    return EXIT_OK


def grid_slem_rows() -> list[dict]:
    rows = []
    for lengths in GRID_LENGTHS:
        for counts in GRID_COUNTS:
            spec = BranchSpec(lengths, counts, 1)
            rows.append(
                {
                    "m": " ".join(map(str, lengths)),
                    "n": " ".join(map(str, counts)),
                    "slem": solve_theta(spec).slem,
                }
            )
    return rows


def cmd_slem_grid(args) -> int:
    started = time.time()
    rows = grid_slem_rows()
    document = {"grid": rows, "scheme": "optimal"}
    manifest = _manifest("slem-grid", {}, started)
    _emit(document, rows, ["m", "n", "slem"], args.format, args.out, manifest)
    return EXIT_OK


def grid_kmax_rows() -> list[dict]:
    rows = []
    for lengths in GRID_LENGTHS:
        for counts in GRID_COUNTS:
            spec = BranchSpec(lengths, counts, 1)
            rows.append(
                {
                    "m": " ".join(map(str, lengths)),
                    "n": " ".join(map(str, counts)),
                    "k_max": max_cores(spec),
                }
            )
    return rows


def cmd_kmax(args) -> int:
    started = time.time()
    if args.grid:
        rows = grid_kmax_rows()
        document = {"grid": rows}
    else:
        if not args.spec:
            raise ValueError("kmax needs --spec or --grid")
        spec = _load_spec(args.spec)
        rows = [
            {
                "m": " ".join(map(str, spec.lengths)),
                "n": " ".join(map(str, spec.counts)),
                "k_max": max_cores(spec),
            }
        ]
        document = {"spec": spec.to_dict(), "k_max": rows[0]["k_max"]}
    manifest = _manifest("kmax", {"spec": args.spec, "grid": args.grid}, started)
    _emit(document, rows, ["m", "n", "k_max"], args.format, args.out, manifest)
    return EXIT_OK


def sweep_rows(spec: BranchSpec, k_min: int, k_max_swept: int) -> tuple[list[dict], int]:
    """Per-core-count SLEM columns: closed form, formula-weight spectrum, optimizer.

    ``slem_closed_form`` is cos(theta), reported only while the closed form
    is valid.  ``slem_formula_weights`` evaluates the closed-form weights on
    the assembled matrix for every K (past the validity bound the core-replica
    eigenvalue takes over, which is what turns the published curve upward).
    ``slem_numeric`` is the certified optimizer value.
    """
    limit = max_cores(spec)
    rows = []
    for k in range(k_min, k_max_swept + 1):
        candidate = BranchSpec(spec.lengths, spec.counts, k)
        network = build_network(candidate)
        solution = solve_theta(candidate)
        formula = optimal_weights(candidate, solution)
        formula_slem = slem(assemble_weight_matrix(network, formula))
        numeric = optimize_weights(network)
        rows.append(
            {
                "K": k,
                "slem_closed_form": solution.slem if k <= limit else None,
                "slem_formula_weights": formula_slem,
                "slem_numeric": numeric.slem,
                "numeric_converged": numeric.converged,
                "certified_gap": numeric.certified_gap,
            }
        )
    return rows, limit


def cmd_sweep_k(args) -> int:
    started = time.time()
    if args.k_min < 1 or args.k_max < args.k_min:
        raise ValueError(f"bad sweep range [{args.k_min}, {args.k_max}]")
    if args.k_max > 500:
        raise ValueError("sweep range capped at 500 cores")
    spec = _load_spec(args.spec)
    rows, limit = sweep_rows(spec, args.k_min, args.k_max)
    document = {"spec": spec.to_dict(), "k_max": limit, "sweep": rows}
    manifest = _manifest(
        "sweep-k",
        {"spec": args.spec, "k_min": args.k_min, "k_max": args.k_max},
        started,
    )
    _emit(
        document,
        rows,
        [
            "K",
            "slem_closed_form",
            "slem_formula_weights",
            "slem_numeric",
            "numeric_converged",
            "certified_gap",
        ],
        args.format,
        args.out,
        manifest,
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    spec = _load_spec(args.spec)
    network = build_network(spec)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    config = SimulationConfig(
        trials=args.trials, iterations=args.iterations, seed=args.seed
    )
    traces = {}
    slems = {}
    for scheme in schemes:
        result = compute_scheme(spec, scheme)
        matrix = assemble_weight_matrix(network, weights_from_document(result))
        slems[scheme] = result["slem"]
        if result["slem"] >= 1.0:
            print(
                f"warning: scheme {scheme} has SLEM {result['slem']:.6f} >= 1; "
                "the iteration will not converge",
                file=sys.stderr,
            )
        traces[scheme] = run_trials(matrix, config)

    rows = []
    for t in range(config.iterations + 1):
        row = {"iteration": t}
        for scheme in schemes:
            row[scheme] = traces[scheme].errors[t]
        rows.append(row)
    document = {
        "spec": spec.to_dict(),
        "config": {
            "trials": config.trials,
            "iterations": config.iterations,
            "seed": config.seed,
        },
        "slem": slems,
        "fitted_decay": {
            scheme: traces[scheme].fitted_decay_rate() for scheme in schemes
        },
        "traces": {scheme: list(traces[scheme].errors) for scheme in schemes},
    }
    manifest = _manifest(
        "simulate",
        {
            "spec": args.spec,
            "schemes": schemes,
            "trials": args.trials,
            "iterations": args.iterations,
        },
        started,
        seed=args.seed,
    )
    _emit(document, rows, ["iteration", *schemes], args.format, args.out, manifest)
    return EXIT_OK


def _check(name: str, ok: bool, detail: str) -> dict:
    return {"name": name, "status": "pass" if ok else "fail", "detail": detail}


def _skip(name: str, reason: str) -> dict:
    return {"name": name, "status": "skip", "detail": reason}


def run_validation(
    spec: BranchSpec,
    weights_document: dict | None = None,
    *,
    skip_optimizer: bool = False,
    seed: int = 0,
) -> list[dict]:
    """Invariant suite for one topology; returns one record per check."""
    rng = np.random.default_rng(seed)
    network = build_network(spec)
    checks: list[dict] = []

    # Convergence conditions for every scheme.
    for scheme in SCHEMES:
        result = compute_scheme(spec, scheme)
        matrix = assemble_weight_matrix(network, weights_from_document(result))
        evals = symmetric_eigenvalues(matrix)
        sym_ok = bool(np.array_equal(matrix, matrix.T))
        rows_ok = bool(np.max(np.abs(matrix.sum(axis=1) - 1.0)) <= 1e-12)
        adjacency = network.adjacency() + np.eye(network.node_count)
        sparsity_ok = bool(np.all((matrix == 0.0) | (adjacency > 0.0)))
        top_ok = bool(abs(evals[0] - 1.0) <= 1e-10 and evals[1] < 1.0 - 1e-12)
        slem_ok = bool(result["slem"] < 1.0)
        checks.append(
            _check(
                f"conditions[{scheme}]",
                sym_ok and rows_ok and sparsity_ok and top_ok and slem_ok,
                f"symmetric={sym_ok} stochastic={rows_ok} sparsity={sparsity_ok} "
                f"top_simple={top_ok} slem={result['slem']:.6f}",
            )
        )

    # Characteristic-root residual, with the direct determinant as referee.
    solution = solve_theta(spec)
    checks.append(
        _check(
            "root_residual",
            solution.residual_relative <= 1e-12,
            f"theta={solution.theta:.12g} relative_residual={solution.residual_relative:.3e}",
        )
    )

    # Reduced root conditions for one- and two-type specs (single core).
    if spec.cores == 1 and spec.branch_types == 1:
        m, n = spec.lengths[0], spec.counts[0]
        theta = solution.theta
        gap = (n - 2) * math.cos((m - 0.5) * theta) - (n + 2) * math.cos(
            (m + 0.5) * theta
        )
        checks.append(
            _check("reduced_condition", abs(gap) <= 1e-10, f"residual={abs(gap):.3e}")
        )
    elif spec.cores == 1 and spec.branch_types == 2:
        theta = solution.theta
        half = math.cos(theta / 2.0) / math.sin(theta / 2.0)
        c = [
            (2.0 / n) * (math.cos(m * theta) / math.sin(m * theta)) * half
            for m, n in zip(spec.lengths, spec.counts)
        ]
        gap = (c[0] - 1.0) * (c[1] - 1.0) - 1.0
        checks.append(
            _check("reduced_condition", abs(gap) <= 1e-10, f"residual={abs(gap):.3e}")
        )
    else:
        checks.append(
            _skip("reduced_condition", "defined for single-core specs with 1 or 2 branch types")
        )

    # Direct vs rank-one-reduced determinant on a pole-free grid.
    probes = 0
    worst = 0.0
    for theta in np.linspace(0.05, math.pi - 0.05, 60):
        try:
            direct = characteristic_det(spec, float(theta), pole_tol=1e-6)
            reduced = characteristic_det_reduced(spec, float(theta), pole_tol=1e-6)
        except EvaluationError:
            continue
        probes += 1
        worst = max(worst, abs(direct - reduced) / max(1.0, abs(direct)))
    checks.append(
        _check(
            "determinant_identity",
            probes >= 10 and worst <= 1e-10,
            f"probes={probes} worst_relative={worst:.3e}",
        )
    )

    optimal = optimal_weights(spec, solution)
    if spec.cores == 1:
        decomp = block_decomposition(spec, optimal)
        union_ok = True
        worst_union = 0.0
        for _ in range(5):
            rows = tuple(
                tuple(rng.uniform(0.05, 0.95) for _ in range(m)) for m in spec.lengths
            )
            sample = StratifiedWeights(scheme="random", strata=rows)
            full = symmetric_eigenvalues(assemble_weight_matrix(network, sample))
            union = spectrum_union(block_decomposition(spec, sample))
            gap = float(np.max(np.abs(full - union)))
            worst_union = max(worst_union, gap)
            union_ok = union_ok and gap <= 1e-8
        checks.append(
            _check("spectrum_union", union_ok, f"worst_gap={worst_union:.3e}")
        )

        if all(n >= 2 for n in spec.counts):
            report = interlacing_check(decomp)
            checks.append(
                _check(
                    "interlacing",
                    report.ok and report.moduli_spread <= 1e-8,
                    f"violations={len(report.violations)} "
                    f"moduli_spread={report.moduli_spread:.3e}",
                )
            )
        else:
            checks.append(_skip("interlacing", "branch counts >= 2 required"))

        rows = tuple(
            tuple(rng.uniform(0.05, 0.95) for _ in range(m)) for m in spec.lengths
        )
        sample = StratifiedWeights(scheme="random", strata=rows)
        sample_decomp = block_decomposition(spec, sample)
        reduced, core = blocks_from_factors(spec, sample)
        recon_gap = max(
            float(np.max(np.abs(reduced - sample_decomp.reduced_block))),
            float(np.max(np.abs(core - sample_decomp.core_block))),
        )
        checks.append(
            _check(
                "rank_one_reconstruction",
                recon_gap <= 1e-12,
                f"entrywise_gap={recon_gap:.3e}",
            )
        )

        v = stationary_vector(spec)
        v_gap = float(np.linalg.norm(decomp.core_block @ v - v))
        checks.append(_check("stationary_vector", v_gap <= 1e-10, f"gap={v_gap:.3e}"))
    else:
        checks.append(_skip("spectrum_union", "block decomposition defined for one core"))
        checks.append(_skip("interlacing", "block decomposition defined for one core"))
        checks.append(
            _skip("rank_one_reconstruction", "block decomposition defined for one core")
        )
        checks.append(_skip("stationary_vector", "block decomposition defined for one core"))

    if skip_optimizer:
        checks.append(_skip("oracle_equivalence", "disabled by --skip-optimizer"))
    else:
        limit = max_cores(spec)
        if spec.cores <= limit:
            numeric = optimize_weights(network)
            slem_gap = abs(numeric.slem - solution.slem)
            detail = f"slem_gap={slem_gap:.3e} certified_gap={numeric.certified_gap:.3e}"
            ok = slem_gap <= 1e-3 and numeric.converged
            if all(n >= 2 for n in spec.counts) and spec.cores < limit:
                weight_gap = float(
                    np.max(np.abs(_flatten(numeric.weights) - _flatten(optimal)))
                )
                ok = ok and weight_gap <= 5e-3
                detail += f" weight_gap={weight_gap:.3e}"
            checks.append(_check("oracle_equivalence", ok, detail))
        else:
            checks.append(
                _skip(
                    "oracle_equivalence",
                    f"cores {spec.cores} beyond closed-form validity bound {limit}",
                )
            )

    if weights_document is not None:
        try:
            loaded = weights_from_document(weights_document)
            matrix = assemble_weight_matrix(network, loaded)
            recomputed = slem(matrix)
            stored = float(weights_document["slem"])
            ok = abs(recomputed - stored) <= 1e-10
            checks.append(
                _check(
                    "weights_roundtrip",
                    ok,
                    f"stored={stored:.12g} recomputed={recomputed:.12g}",
                )
            )
        except (ValueError, KeyError) as exc:
            checks.append(_check("weights_roundtrip", False, str(exc)))

    return checks


def cmd_validate(args) -> int:
    started = time.time()
    spec = _load_spec(args.spec)
    weights_document = load_weights_document(args.weights) if args.weights else None
    checks = run_validation(
        spec,
        weights_document,
        skip_optimizer=args.skip_optimizer,
        seed=args.seed,
    )
    failed = [c for c in checks if c["status"] == "fail"]
    document = {
        "spec": spec.to_dict(),
        "checks": checks,
        "passed": not failed,
    }
    manifest = _manifest(
        "validate", {"spec": args.spec, "weights": args.weights}, started, seed=args.seed
    )
    _emit(
        document,
        checks,
        ["name", "status", "detail"],
        args.format,
        args.out,
        manifest,
    )
    return EXIT_OK if not failed else EXIT_VALIDATION


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="starmix",
        description="Averaging-weight optimization and convergence analysis "
        "for star-of-paths networks.",
    )
    parser.add_argument("--version", action="version", version=f"starmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output_flags(p):
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("slem", help="weights and SLEM for one topology and scheme")
    p.add_argument("--spec", required=True, help="topology JSON file")
    p.add_argument("--scheme", choices=SCHEMES, default="optimal")
    add_output_flags(p)
    p.set_defaults(func=cmd_slem)

    p = sub.add_parser("slem-grid", help="optimal SLEM over the 9x6 benchmark grid")
    add_output_flags(p)
    p.set_defaults(func=cmd_slem_grid)

    p = sub.add_parser("kmax", help="largest core count keeping the closed form valid")
    p.add_argument("--spec", default=None, help="topology JSON file")
    p.add_argument("--grid", action="store_true", help="emit the full 9x6 grid")
    add_output_flags(p)
    p.set_defaults(func=cmd_kmax)

    p = sub.add_parser("sweep-k", help="SLEM versus core count")
    p.add_argument("--spec", required=True, help="topology JSON file")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, required=True)
    add_output_flags(p)
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("simulate", help="averaging-iteration error traces per scheme")
    p.add_argument("--spec", required=True, help="topology JSON file")
    p.add_argument("--schemes", default=",".join(SCHEMES))
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    add_output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run the invariant suite on a topology")
    p.add_argument("--spec", required=True, help="topology JSON file")
    p.add_argument("--weights", default=None, help="weights JSON emitted by slem")
    p.add_argument("--skip-optimizer", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    add_output_flags(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"starmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, EvaluationError, np.linalg.LinAlgError) as exc:
        print(f"starmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
