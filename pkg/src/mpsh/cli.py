"""Command-line front end.

Exit codes: 0 success, 2 a requested check failed (or no certificate), 3 bad input,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from mpsh import channel, linalg, models, mps
from mpsh.errors import (
    CapExceededError,
    ConsistencyError,
    MPSHError,
    NoCertificateError,
    NotErgodicError,
    NumericalError,
)
from mpsh.io import SchemaError, chain_to_json, dumps, load_chain

log = logging.getLogger("mpsh")

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4


def record(quantity: str, value, method: str, residual=None, reference: str = "") -> dict:
    return {"quantity": quantity, "value": value, "method": method, "residual": residual, "reference": reference}


class Output:
    """Writes reports either to stdout or into ``--out DIR``."""

    def __init__(self, out_dir: str | None):
        self.out_dir = Path(out_dir) if out_dir else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        if self.out_dir is None:
            sys.stdout.write(text)
        else:
            path = self.out_dir / name
            path.write_text(text)
            log.info("wrote %s", path)


def rows_to_csv(header: Sequence[str], rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _error_block(exc: Exception) -> dict:
    kind = {
        NoCertificateError: "no_certificate",
        NotErgodicError: "not_ergodic",
        ConsistencyError: "inconsistent",
    }.get(type(exc), type(exc).__name__)
    block = {"type": kind, "message": str(exc)}
    report = getattr(exc, "report", None)
    if report is not None:
        block["report"] = report.to_dict() if hasattr(report, "to_dict") else report
    return block


def _ground(d: int) -> mps.LocalObservable:
    return mps.LocalObservable(linalg.matrix_unit(d, 0, 0), 1, 1, label="E00")


def _converge_rows(phi: channel.SuperOperator, rho_star, theta: float, n_max: int):
    rho0 = linalg.matrix_unit(phi.dim, 0, 0)
    return channel.convergence_trace(phi, rho0, rho_star, theta, n_max)


def cmd_depolarizing(args, out: Output) -> int:
    p = args.p[0]
    bundle = models.depolarizing_model(p)
    chain = bundle.chain
    phi = mps.transfer_channel(chain, 1)
    ground = _ground(4)
    records = []
    status = EXIT_OK
    report: dict = {"model": "depolarizing", "p": p}

    exact = channel.md_constant_depolarizing(p)
    searched = channel.md_constant_sphere_search(phi, grid=args.grid)
    report["kappa"] = exact.to_dict()
    report["kappa_search"] = searched.to_dict()
    records.append(record("kappa_trace", exact.kappa_trace, "closed_form", reference="Tr kappa = 4p/3"))
    records.append(
        record("kappa_trace", searched.kappa_trace, "sphere_search", abs(searched.kappa_trace - exact.kappa_trace))
    )
    try:
        theta = channel.mixing_rate(exact)
        report["theta"] = theta
        report["stationary"] = math.isinf(theta)
        records.append(record("theta", theta, "closed_form", reference="theta = -ln(1 - Tr kappa)"))
    except NoCertificateError as exc:
        theta = None
        report["theta"] = None
        report["stationary"] = False
        report["error"] = _error_block(exc)
        status = EXIT_CHECK_FAILED

    spectral = channel.spectral_classification(phi)
    report["spectral"] = spectral.to_dict()
    report["rho_star"] = spectral.fixed_point

    detail = mps.expectation_detail(chain, ground, 1)
    records.append(
        record("phi1_ground", detail.value.real, detail.method, detail.residual, "(1-p)^2 / ((1-p)^2 + p^2/3)")
    )
    report["norm2"] = mps.normalization(chain, 2)
    records.append(record("norm2", report["norm2"], "transfer", abs(report["norm2"] - models.depolarizing_norm2(p))))
    report["phi1"] = float(detail.value.real)
    try:
        limit = mps.ergodic_limit(chain, ground)
        report["phi_limit"] = limit
        records.append(record("phi_limit_ground", limit, "ergodic_limit", abs(limit - (1 - p)), "1 - p"))
    except NotErgodicError as exc:
        report["phi_limit"] = None
        report.setdefault("error", _error_block(exc))
        status = EXIT_CHECK_FAILED

    probe = mps.projectivity_probe(chain, range(1, 4), [ground, *mps.default_probe_set(4)])
    report["projectivity"] = probe.to_dict()
    report["verdict"] = probe.verdict
    if probe.limit_gaps is not None:
        report["phi1_vs_phi_gap"] = probe.limit_gaps[0]

    if theta is not None and spectral.mixing:
        rows = _converge_rows(phi, 0.5 * np.eye(2), theta, args.n_max)
        report["convergence"] = [{"n": n, "tv_distance": tv, "bound": b} for n, tv, b in rows]
        if args.out:
            out.write("depolarizing_trace.csv", rows_to_csv(["n", "tv_distance", "bound"], rows))
    report["records"] = records
    out.write("depolarizing.json", dumps(report))
    return status


def _ghz_observables(n: int, units: bool) -> list[mps.LocalObservable]:
    obs = [
        mps.LocalObservable.product([linalg.SIGMA_Z] * n, label="Z" * n),
        mps.LocalObservable.identity(2, 1, n),
    ]
    if units:
        dim = 2**n
        obs += [mps.LocalObservable(linalg.matrix_unit(dim, a, b), 1, n, label=f"E{a}_{b}") for a in range(dim) for b in range(dim)]
    return obs


def cmd_ghz(args, out: Output) -> int:
    n = args.sites
    chain = models.ghz_chain()
    if 4**n > (args.cap or mps.OBSERVABLE_CAP):
        raise CapExceededError(f"observables on {n} sites exceed the cap")
    units = args.units if args.units is not None else n <= 3
    residuals = mps.projective_consistency_check(chain, 1)
    rows = []
    worst = 0.0
    for x in _ghz_observables(n, units):
        closed = models.ghz_closed_form(x)
        proj = complex(mps.projective_limit(chain, x))
        brute = mps.expectation_detail(chain, x, n, method="brute_force", cap=args.cap).value
        spread = max(abs(closed - proj), abs(closed - brute), abs(proj - brute))
        worst = max(worst, spread)
        rows.append({"observable": x.label, "closed_form": closed, "projective_limit": proj, "brute_force": brute, "residual": spread})
    report = {
        "model": "ghz",
        "sites": n,
        "consistency_residuals": residuals,
        "observables": rows,
        "max_residual": worst,
    }
    out.write("ghz.json", dumps(report))
    return EXIT_OK if worst <= 1e-10 and max(residuals) <= args.tol else EXIT_CHECK_FAILED


def _chain_from_args(args):
    if getattr(args, "chain", None):
        return load_chain(args.chain)
    return models.model_by_name(args.model, p=args.p[0] if args.p else None, d=args.d, dim=args.D, seed=args.seed, n_sites=args.sites)


def cmd_random(args, out: Output) -> int:
    chain = models.random_gauge_chain(args.d, args.D, args.sites, args.seed)
    out.write("chain.json", dumps(chain_to_json(chain)))
    return EXIT_OK


def cmd_verify(args, out: Output) -> int:
    chain = load_chain(args.chain)
    checks = args.checks.split(",") if args.checks else ["gauge", "consistency", "ergodic"]
    results = []
    for name in checks:
        if name == "gauge":
            worst = max(mps.gauge_check(chain))
            results.append({"check": "gauge", "passed": worst <= args.tol, "violation": worst})
        elif name == "consistency":
            worst = mps.consistency_residual(chain)
            results.append({"check": "consistency", "passed": worst <= args.tol, "violation": worst})
        elif name == "cptp":
            for k, s in enumerate(chain.sites, start=1):
                c = channel.is_cptp(s, args.tol)
                results.append({**c.to_dict(), "site": k})
        elif name == "ergodic":
            if not chain.translation_invariant:
                results.append({"check": "ergodic", "passed": False, "violation": None, "message": "needs a translation-invariant chain"})
                continue
            rep = channel.spectral_classification(mps.transfer_channel(chain, 1))
            results.append({"check": "ergodic", "passed": rep.ergodic, "mixing": rep.mixing, "spectral_gap": rep.spectral_gap})
        else:
            raise ValueError(f"unknown check {name!r}")
    ok = all(r["passed"] for r in results)
    out.write("verify.json", dumps({"chain": str(args.chain), "checks": results, "passed": ok}))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _converge_one(args, p: float | None):
    if p is not None and not getattr(args, "chain", None) and args.model == "depolarizing":
        chain = models.depolarizing_chain(p)
        md = channel.md_constant_depolarizing(p)
    else:
        chain = _chain_from_args(args)
        md = channel.md_constant_sphere_search(mps.transfer_channel(chain, 1), grid=args.grid)
    if not chain.translation_invariant:
        raise ValueError("convergence traces need a translation-invariant chain")
    phi = mps.transfer_channel(chain, 1)
    theta = channel.mixing_rate(md)
    rho_star = channel.fixed_point(phi)
    return _converge_rows(phi, rho_star, theta, args.n_max)


def cmd_converge(args, out: Output) -> int:
    ps = args.p if args.p else [None]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        traces = list(pool.map(lambda p: _converge_one(args, p), ps))
    if args.format == "json":
        body = [
            {"p": p, "rows": [{"n": n, "tv_distance": tv, "bound": b} for n, tv, b in rows]}
            for p, rows in zip(ps, traces)
        ]
        out.write("converge.json", dumps(body))
    else:
        if len(ps) == 1:
            text = rows_to_csv(["n", "tv_distance", "bound"], traces[0])
        else:
            text = rows_to_csv(["p", "n", "tv_distance", "bound"], [(p, *r) for p, rows in zip(ps, traces) for r in rows])
        out.write("converge.csv", text)
    ok = all(tv <= b + args.tol for rows in traces for _, tv, b in rows)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_probe(args, out: Output) -> int:
    chain = _chain_from_args(args)
    report = mps.projectivity_probe(chain, range(1, args.n_max + 1), tol=args.tol, cap=args.cap)
    body = report.to_dict()
    body["consistency_residual"] = mps.consistency_residual(chain)
    out.write("probe.json", dumps(body))
    return EXIT_OK


def _positive(kind):
    def parse(text: str):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive(float), default=None, help="absolute tolerance (default: $MPSH_TOL or 1e-10)")
    common.add_argument("--cap", type=_positive(int), default=None, help="brute-force size cap")
    common.add_argument("--out", metavar="DIR", default=None, help="write report files into DIR instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="csv")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=("ghz", "depolarizing", "random"), default="depolarizing")
    model.add_argument("--chain", metavar="FILE", help="chain JSON file (overrides --model)")
    model.add_argument("--p", type=float, nargs="+", default=None)
    model.add_argument("--d", type=int, default=2)
    model.add_argument("--D", type=int, default=2)
    model.add_argument("--sites", type=int, default=None)
    model.add_argument("--n-max", type=int, default=50)
    model.add_argument("--grid", type=int, default=10_000, help="sphere-search grid size")

    parser = argparse.ArgumentParser(prog="mpsh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("depolarizing", parents=[common, model], help="depolarizing MPS worked example")
    p.set_defaults(func=cmd_depolarizing)
    p = sub.add_parser("ghz", parents=[common], help="GHZ chain: closed form vs projective limit vs brute force")
    p.add_argument("--sites", type=_positive(int), default=3)
    p.add_argument("--units", action=argparse.BooleanOptionalAction, default=None, help="include all matrix units")
    p.set_defaults(func=cmd_ghz)
    p = sub.add_parser("random", parents=[common], help="emit a random gauge chain as JSON")
    p.add_argument("--d", type=_positive(int), default=2)
    p.add_argument("--D", type=_positive(int), default=2)
    p.add_argument("--sites", type=_positive(int), default=None, help="per-site chain length (default: translation invariant)")
    p.set_defaults(func=cmd_random)
    p = sub.add_parser("verify", parents=[common], help="certify a chain file")
    p.add_argument("chain", metavar="CHAIN")
    p.add_argument("--checks", default=None, help="comma list of gauge,consistency,ergodic,cptp")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("converge", parents=[common, model], help="TV-distance trace against the mixing bound")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_converge)
    p = sub.add_parser("probe", parents=[common, model], help="numerical projectivity probe")
    p.set_defaults(func=cmd_probe, n_max=5)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.tol is not None:
        linalg.set_tol(args.tol)
    args.tol = linalg.get_tol()
    if args.command == "depolarizing" and not args.p:
        parser.error("depolarizing needs --p")
    try:
        out = Output(args.out)
        return args.func(args, out)
    except (SchemaError, CapExceededError, ValueError, OSError, IndexError) as exc:
        print(f"mpsh: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoCertificateError, NotErgodicError, ConsistencyError) as exc:
        print(dumps({"status": "failed", "error": _error_block(exc)}), end="")
        return EXIT_CHECK_FAILED
    except (NumericalError, MPSHError) as exc:
        print(f"mpsh: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
