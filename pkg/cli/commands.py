"""Sub-commands: sample, quadrature, check and archive.

Each command takes a validated RunConfig, writes its files, prints one JSON
document (or JSON lines for ``check``) to standard output and returns the exit
code. Errors propagate as HarnessError for main.py to report.
"""
import json
import logging
import math
import os
from typing import Callable, Dict, List, Optional

import pandas as pd

from algebra.connection import (
    APPENDIX_GROUPS,
    IdentityReport,
    appendix_reports,
    random_tuples,
    verify_expansion,
    verify_recursion13,
    verify_representation,
    verify_tilde_general,
)
from cli.config import DEFAULT_OUTPUT_DIR, OPEN, Q_MINUS_ONE, Q_ONE, RunConfig, regime
from core.errors import DegenerateAC, InvalidParams
from core.reports import CheckReport, check_report
from exact import q1, qm1
from markov.markov import (
    check_harness_moments,
    ck_residual_details,
    kernel,
    marginal,
    martingale_residual_details,
    sample_paths,
)
from spectral.spectral import atom_free_window, discrete_atoms, in_support_U, support_interval
from storage.db import DEFAULT_DB_URL, get_engine, get_session_factory
from storage.storage import ingest_report_file, store_reports, summarize

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
TILDE_MAX_N = 5
CK_STATES = 3
HARNESS_DEGREE = 2
# tolerances of the quadrature suites compare against the scaled residual;
# the raw one is reported alongside
SCALED = "scaled"

DEFAULT_TOLERANCES = {
    "martingale": 1e-8,
    "ck": 2e-8,
    "harness": 1e-6,
    "q1-moments": 4.0,
    "q1-straddle": 0.02,
    "qm1-ck": 1e-12,
    "qm1-harness": 1e-10,
    "qm1-support": 1e-10,
    "qm1-variance": 1e-12,
}
DEFAULT_Q1_GRID = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0]

CHECKS = ("identities", "appendix", "martingale", "ck", "harness", "q1-moments", "qm1-exact", "all")


# --- Output helpers ---

def _finite(value):
    return value if math.isfinite(value) else None


def emit(document: Dict):
    print(json.dumps(document))


def write_table(frame: pd.DataFrame, path: str, fmt: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if fmt == "csv":
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    else:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(frame.to_dict(orient="list"), f)
    logger.info(f"wrote {len(frame)} rows to {path}")


def _output_path(config: RunConfig, stem: str) -> str:
    return config.output or os.path.join(DEFAULT_OUTPUT_DIR, f"{stem}_seed{config.seed}.{config.fmt}")


# --- sample ---

def cmd_sample(config: RunConfig) -> int:
    """Writes a paths × grid table and prints per-time mean and variance."""
    if config.grid is None:
        raise InvalidParams("sample needs --grid")
    params, reduction = config.harness_params()
    route = regime(params)
    logger.info(f"sampling {config.paths} paths ({route}) on {len(config.grid)} grid times")
    if route == OPEN:
        ensemble = sample_paths(config.grid, config.seed, config.paths, config.N, params)
    elif route == Q_ONE:
        ensemble = q1.sample_q1_paths(config.grid, config.seed, config.paths, params, config.through_boundary)
    else:
        ensemble = qm1.sample_qm1_paths(config.grid, config.seed, config.paths, params)

    path = _output_path(config, "sample")
    write_table(ensemble.to_frame(), path, config.fmt)
    document = {
        "command": "sample",
        "regime": route,
        "params": params.to_dict(),
        "seed": config.seed,
        "paths": config.paths,
        "output": path,
        **ensemble.summary(),
    }
    if reduction.applied:
        document["normalization"] = reduction.to_dict()
    emit(document)
    return 0


# --- quadrature ---

def _interval_or_none(t: float, params) -> Optional[List[float]]:
    try:
        return list(support_interval(t, params))
    except DegenerateAC as e:
        logger.info(f"no absolutely continuous part at t={t:g}: {e}")
        return None


def cmd_quadrature(config: RunConfig) -> int:
    """Nodes and weights of π_t, or of P_{s,t}(x, ·) when --x is given."""
    params, reduction = config.harness_params()
    if regime(params) != OPEN:
        raise InvalidParams(f"quadrature needs |q| < 1, got q={params.q}")
    if config.t is None:
        raise InvalidParams("quadrature needs --t")
    t = config.t
    if config.x is None:
        measure = marginal(t, config.N, params)
    else:
        measure = kernel(config.s, t, config.x, config.N, params)

    interval = _interval_or_none(t, params)
    path = _output_path(config, "quadrature")
    write_table(measure.to_frame(), path, config.fmt)
    document = {
        "command": "quadrature",
        "params": params.to_dict(),
        "t": t,
        "s": config.s if config.x is not None else None,
        "x": config.x,
        "nodes": len(measure),
        "output": path,
        "support_interval": interval,
        "ac_degenerate": interval is None,
        "discrete_atoms": [{"x": a, "side": side} for a, side in discrete_atoms(t, params)],
        "atom_free_window": [_finite(v) for v in atom_free_window(params)],
    }
    if reduction.applied:
        document["normalization"] = reduction.to_dict()
    emit(document)
    return 0


# --- check ---

def _aggregate(name: str, reports: List[IdentityReport], config: RunConfig) -> CheckReport:
    failures = [r for r in reports if not r.passed]
    return CheckReport(
        check=f"identity:{name}",
        params={"n_max": config.n_max, "tuples": config.tuples, "seed": config.seed},
        residual=failures[0].residual if failures else "0",
        tolerance=0.0,
        passed=not failures,
        details={"cases": len(reports), "failures": len(failures)},
    )


def _with_failures(groups: Dict[str, List[IdentityReport]], config: RunConfig) -> List:
    out = []
    for name, reports in groups.items():
        out.extend(r for r in reports if not r.passed)
        out.append(_aggregate(name, reports, config))
    return out


def check_identities(config: RunConfig, params) -> List:
    points = list(random_tuples(config.tuples, config.seed))
    groups: Dict[str, List[IdentityReport]] = {
        "expansion-11": [],
        "representation-12": [],
        "recursion-13": [],
        "tilde-general": [],
    }
    for n in range(config.n_max + 1):
        logger.info(f"identities at n={n} over {len(points)} tuples")
        for point in points:
            groups["recursion-13"].extend(verify_recursion13(n, k, point) for k in range(n + 2))
            if n == 0:
                continue
            groups["expansion-11"].append(verify_expansion(n, point))
            groups["representation-12"].append(verify_representation(n, point))
            if n <= TILDE_MAX_N:
                groups["tilde-general"].append(verify_tilde_general(n, point))
    return _with_failures(groups, config)


def check_appendix(config: RunConfig, params) -> List:
    points = list(random_tuples(config.tuples, config.seed))
    groups: Dict[str, List[IdentityReport]] = {name: [] for name in APPENDIX_GROUPS}
    for n in range(1, config.n_max + 1):
        logger.info(f"appendix terms at n={n} over {len(points)} tuples")
        for k in range(1, n + 2):
            for j in range(k):
                for point in points:
                    for report in appendix_reports(n, k, j, point):
                        groups[report.identity].append(report)
    return _with_failures(groups, config)


def _tolerance(config: RunConfig, name: str) -> float:
    return config.tolerance if config.tolerance is not None else DEFAULT_TOLERANCES[name]


def _require_open(params, name: str):
    if regime(params) != OPEN:
        raise InvalidParams(f"{name} check needs |q| < 1, got q={params.q}")


def _states(s: float, config: RunConfig, params, limit: int = None) -> List[float]:
    """--x if given, else the nodes of π_s that lie in U_s, heaviest first when ``limit`` is set."""
    if config.x is not None:
        return [config.x]
    measure = marginal(s, config.N, params)
    pairs = [(float(x), w) for x, w in zip(measure.nodes, measure.weights) if in_support_U(x, s, params, n_max=config.N)]
    if limit is not None:
        pairs = sorted(pairs, key=lambda pair: -pair[1])[:limit]
    return [x for x, _ in pairs]


def check_martingale_suite(config: RunConfig, params) -> List:
    _require_open(params, "martingale")
    s, u = config.require_times(2, (0.5, 1.0))
    states = _states(s, config, params)
    details = [martingale_residual_details(s, u, x, config.n_max, config.N, params) for x in states]
    return [
        check_report(
            "martingale",
            params.to_dict(),
            max((d["residual"] for d in details), default=0.0),
            _tolerance(config, "martingale"),
            s=s,
            u=u,
            n_max=config.n_max,
            N=config.N,
            states=len(states),
            raw=max((d["raw"] for d in details), default=0.0),
            tolerance_on=SCALED,
        )
    ]


def check_ck_suite(config: RunConfig, params) -> List:
    _require_open(params, "ck")
    s, t, u = config.require_times(3, (0.5, 1.0, 1.5))
    states = _states(s, config, params, limit=CK_STATES)
    details = [ck_residual_details(s, t, u, x, config.n_max, config.N, params) for x in states]
    return [
        check_report(
            "ck",
            params.to_dict(),
            max((d["residual"] for d in details), default=0.0),
            _tolerance(config, "ck"),
            s=s,
            t=t,
            u=u,
            states=states,
            outside_nodes=sum(d["outside_nodes"] for d in details),
            raw=max((d["raw"] for d in details), default=0.0),
            tolerance_on=SCALED,
        )
    ]


def check_harness_suite(config: RunConfig, params) -> List:
    _require_open(params, "harness")
    s, t, u = config.require_times(3, (0.5, 1.0, 1.5))
    table = check_harness_moments(s, t, u, HARNESS_DEGREE, HARNESS_DEGREE, config.N, params)
    return [
        check_report(
            "harness",
            params.to_dict(),
            float(table["scaled"].max()),
            _tolerance(config, "harness"),
            s=s,
            t=t,
            u=u,
            raw=float(table["residual"].max()),
            tolerance_on=SCALED,
        )
    ]


def _straddle_pair(grid: List[float], b: float):
    below = [t for t in grid if t < b and not math.isclose(t, b)]
    above = [t for t in grid if t > b and not math.isclose(t, b)]
    if not below or not above:
        return None
    return below[-1], above[0]


def check_q1_suite(config: RunConfig, params) -> List:
    if regime(params) != Q_ONE:
        raise InvalidParams(f"q1-moments check needs q = 1, got q={params.q}")
    grid = config.grid or DEFAULT_Q1_GRID
    moments = q1.check_q1_moments(grid, config.seed, config.paths, params)
    reports = [
        check_report(
            "q1-moments",
            params.to_dict(),
            float(moments["z"].max()),
            _tolerance(config, "q1-moments"),
            paths=config.paths,
            grid=grid,
        )
    ]
    layouts = q1.layout_families(params)
    mismatches = [row["layout"] for row in layouts if row["expected"] != row["found"]]
    reports.append(
        check_report("q1-regimes", params.to_dict(), float(len(mismatches)), 0.0, mismatched=mismatches)
    )
    pair = _straddle_pair(grid, q1.boundary_time(params))
    if pair is not None:
        statistic = q1.straddle_ks(pair[0], pair[1], config.seed, config.paths, params)
        reports.append(
            check_report(
                "q1-straddle",
                params.to_dict(),
                statistic,
                DEFAULT_TOLERANCES["q1-straddle"],
                s=pair[0],
                t=pair[1],
            )
        )
    return reports


def check_qm1_suite(config: RunConfig, params) -> List:
    if regime(params) != Q_MINUS_ONE:
        raise InvalidParams(f"qm1-exact check needs q = -1, got q={params.q}")
    s, t, u = config.require_times(3, (0.5, 1.0, 2.0))
    support = max(qm1.support_residual(a, b, params) for a, b in ((s, t), (t, u), (s, u)) if a > 0)
    variance = max(abs(qm1.atoms(v, params).second_moment - v) for v in (s, t, u) if v > 0)
    shared = {"s": s, "t": t, "u": u}
    return [
        check_report("qm1-ck", params.to_dict(), qm1.check_ck_exact(s, t, u, params), _tolerance(config, "qm1-ck"), **shared),
        check_report(
            "qm1-harness",
            params.to_dict(),
            qm1.check_harness_exact(s, t, u, params),
            _tolerance(config, "qm1-harness"),
            **shared,
        ),
        check_report("qm1-support", params.to_dict(), support, DEFAULT_TOLERANCES["qm1-support"], **shared),
        check_report("qm1-variance", params.to_dict(), variance, DEFAULT_TOLERANCES["qm1-variance"], **shared),
    ]


SUITES: Dict[str, Callable] = {
    "identities": check_identities,
    "appendix": check_appendix,
    "martingale": check_martingale_suite,
    "ck": check_ck_suite,
    "harness": check_harness_suite,
    "q1-moments": check_q1_suite,
    "qm1-exact": check_qm1_suite,
}

REGIME_SUITES = {
    OPEN: ("martingale", "ck", "harness"),
    Q_ONE: ("q1-moments",),
    Q_MINUS_ONE: ("qm1-exact",),
}


def cmd_check(config: RunConfig, which: str) -> int:
    """Runs one suite (or all that apply to q), prints JSON lines, returns 0 iff all pass."""
    if which not in CHECKS:
        raise InvalidParams(f"unknown check {which!r}; choose from {', '.join(CHECKS)}")
    params, _ = config.harness_params()
    names = ("identities", "appendix") + REGIME_SUITES[regime(params)] if which == "all" else (which,)

    reports = []
    for name in names:
        logger.info(f"--- Starting check {name} ---")
        found = SUITES[name](config, params)
        reports.extend(found)
        logger.info(f"--- check {name}: {sum(1 for r in found if not r.passed)} failing reports ---")

    lines = [r.to_json() for r in reports]
    for line in lines:
        print(line)
    if config.output:
        os.makedirs(os.path.dirname(config.output) or ".", exist_ok=True)
        with open(config.output, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    if config.db:
        session = get_session_factory(get_engine(config.db))()
        try:
            store_reports(reports, session)
        finally:
            session.close()

    failed = [r for r in reports if not r.passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(reports)} reports failed")
        return 1
    return 0


# --- archive ---

def cmd_archive(action: str, path: str = None, db_url: str = DEFAULT_DB_URL) -> int:
    session = get_session_factory(get_engine(db_url))()
    try:
        if action == "ingest":
            if not path:
                raise InvalidParams("archive ingest needs a report file")
            added, skipped = ingest_report_file(path, session)
            emit({"command": "archive", "action": "ingest", "added": added, "skipped": skipped})
        elif action == "summary":
            frame = summarize(session)
            emit({"command": "archive", "action": "summary", "rows": frame.to_dict(orient="records")})
        else:
            raise InvalidParams(f"unknown archive action {action!r}")
    finally:
        session.close()
    return 0
