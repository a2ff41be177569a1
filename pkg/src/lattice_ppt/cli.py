"""Command-line entry point.

Exit codes: 0 success, 1 a verification failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import census, oracle, ppt
from .lattice import StateSet, parse_set
from .rational import format_fraction

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    set_text: str | None = None
    t: int | None = None
    k: int | None = None
    m: int | None = None
    samples: int = 500
    seed: int = 0
    mode: str = "screen"
    parallel: int = 1
    cache_dir: str | None = None
    use_cache: bool = True
    output: str | None = None
    long_running: bool = False
    format: str = "json"
    timestamp: bool = True
    name: str | None = None
    certificate: str | None = None
    full: bool = False
    force: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        fields = {f: getattr(args, f) for f in cls.__dataclass_fields__ if hasattr(args, f)}
        return cls(**fields)

    def cache(self) -> census.ResultCache | None:
        return census.ResultCache(self.cache_dir) if self.use_cache else None


# --- rendering --------------------------------------------------------------------


def render_text(data, indent: int = 0) -> str:
    """Plain rendering of a JSON value."""
    pad = "  " * indent
    lines = []
    if isinstance(data, dict):
        for key, val in data.items():
            if isinstance(val, (dict, list)) and val:
                lines.append(f"{pad}{key}:")
                lines.append(render_text(val, indent + 1))
            else:
                lines.append(f"{pad}{key}: {_scalar(val)}")
    elif isinstance(data, list):
        for item in data:
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}-")
                lines.append(render_text(item, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(data)}")
    return "\n".join(lines)


def _scalar(val) -> str:
    if isinstance(val, (dict, list)):
        return json.dumps(val)
    return json.dumps(val) if val is None or isinstance(val, bool) else str(val)


def render_csv(data) -> str:
    buf = io.StringIO()
    rows = data.get("records") if isinstance(data, dict) else None
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(census.CSV_FIELDS), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    else:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, val in data.items():
            writer.writerow([key, json.dumps(val) if isinstance(val, (dict, list)) else val])
    return buf.getvalue()


def emit(cfg: RunConfig, data: dict) -> None:
    if cfg.format == "json":
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    elif cfg.format == "csv":
        text = render_csv(data)
    else:
        text = render_text(data) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands ---------------------------------------------------------------------


def _set(cfg: RunConfig) -> StateSet:
    if not cfg.set_text:
        raise UsageError("--set is required")
    try:
        return parse_set(cfg.set_text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_check(cfg: RunConfig) -> tuple[dict, bool]:
    s = _set(cfg)
    res = ppt.alpha(s, cfg.mode, cross_check=True)
    verified = ppt.verify_certificate(s, res.certificate)
    if cfg.certificate:
        Path(cfg.certificate).write_text(json.dumps(ppt.certificate_to_json(res.certificate), indent=2) + "\n")
    store = cfg.cache()
    if store is not None and verified:
        store.write(census.CensusRecord.from_result(res, timestamp=cfg.timestamp))
    data = {
        "set": str(s),
        "t": s.t,
        "k": s.k,
        "alpha": format_fraction(res.alpha),
        "distinguishable": res.distinguishable,
        "verdict": "distinguishable" if res.distinguishable else "indistinguishable",
        "primal_value": format_fraction(res.primal_value),
        "dual_value": format_fraction(res.dual_value),
        "standard_form_dual_value": format_fraction(res.dual_std_value),
        "beta_prime": format_fraction(ppt.beta_prime(s)),
        "certificate_type": res.certificate.kind,
        "certificate_verified": verified,
        "certificate_digest": ppt.certificate_digest(res.certificate),
    }
    return data, verified


def cmd_census(cfg: RunConfig) -> tuple[dict, bool]:
    q = census.enumerate_quadruples_t2(cfg.cache(), cfg.mode, cfg.parallel, seed=cfg.seed, timestamp=cfg.timestamp)
    data = q.to_json()
    data["passed"] = q.passed
    if cfg.format == "csv":
        data = {"records": [ev.record.to_json() for ev in q.evaluations]}
    return data, q.passed


def cmd_families(cfg: RunConfig) -> tuple[dict, bool]:
    fams = census.maximal_families(2)
    ref = census.reference_families()
    match = set(fams) == set(ref)
    index = {s: i for i, s in enumerate(ref)}
    return {
        "families": [
            {"column": str(f_col), "set": str(fam), "reference_index": index.get(fam)}
            for f_col, fam in _families_by_column()
        ],
        "distinct": len(set(fams)),
        "matches_reference": match,
    }, match and len(set(fams)) == 16


def _families_by_column():
    from .lattice import LatticeIndex, family

    for c in range(16):
        col = LatticeIndex(2, c)
        yield col, family(col).as_set()


def cmd_lemmas(cfg: RunConfig) -> tuple[dict, bool]:
    if cfg.t is None or cfg.m is None:
        raise UsageError("--t and --m are required")
    try:
        st = census.intersection_stats(cfg.t, cfg.m, reduced=not cfg.full, parallel=cfg.parallel, force=cfg.force)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return st.to_json(), True


def cmd_verify_theorem(cfg: RunConfig) -> tuple[dict, bool]:
    if cfg.name not in ("thm3", "thm4", "thm5"):
        raise UsageError("--name must be thm3, thm4 or thm5")
    report = census.verify_theorem(
        cfg.name, cfg.samples, cfg.seed, cfg.long_running, cfg.cache(), cfg.mode, cfg.parallel
    )
    return report.to_json(), report.overall_pass


def cmd_oracle(cfg: RunConfig) -> tuple[dict, bool]:
    t = cfg.t if cfg.t is not None else 2
    try:
        report = oracle.verify_reduction(t, allow_t3=cfg.long_running)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    checks = {f"sign rule t={u}": oracle.check_sign_oracle(u) for u in range(1, t + 1)}
    data = report.summary()
    data["sign_rule"] = checks
    ok = report.passed and all(checks.values())
    data["passed"] = ok
    return data, ok


def cmd_bound(cfg: RunConfig) -> tuple[dict, bool]:
    s = _set(cfg)
    closed = ppt.beta_prime(s)
    lp_value = ppt.beta_prime_lp(s, cfg.mode)
    return {
        "set": str(s),
        "beta_prime": format_fraction(closed),
        "beta_prime_lp": format_fraction(lp_value),
        "agree": closed == lp_value,
    }, closed == lp_value


def cmd_reduced_costs(cfg: RunConfig) -> tuple[dict, bool]:
    if cfg.set_text:
        s = _set(cfg)
    else:
        rng = random.Random(cfg.seed)
        s = StateSet(2, tuple(sorted(rng.sample(range(16), 4))))
    report = ppt.reduced_costs(s)
    return report.to_json(), report.passed


def cmd_sample(cfg: RunConfig) -> tuple[dict, bool]:
    if cfg.t is None or cfg.k is None:
        raise UsageError("--t and --k are required")
    try:
        evals = census.random_sample_census(
            cfg.t, cfg.k, cfg.samples, cfg.seed, cfg.cache(), cfg.mode, cfg.parallel, cfg.timestamp
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    records = [ev.record.to_json() for ev in evals]
    ok = all(ev.primal == ev.dual and ev.primal <= ev.beta_prime for ev in evals)
    return {
        "t": cfg.t,
        "k": cfg.k,
        "samples": len(records),
        "seed": cfg.seed,
        "indistinguishable": sum(not r["distinguishable"] for r in records),
        "records": records,
    }, ok


COMMANDS = {
    "check": cmd_check,
    "census": cmd_census,
    "families": cmd_families,
    "lemmas": cmd_lemmas,
    "verify-theorem": cmd_verify_theorem,
    "oracle": cmd_oracle,
    "bound": cmd_bound,
    "reduced-costs": cmd_reduced_costs,
    "sample": cmd_sample,
}


def dispatch(cfg: RunConfig) -> int:
    try:
        data, ok = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ppt.CertificateError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    emit(cfg, data)
    return EXIT_OK if ok else EXIT_FAILED


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--output", help="write results here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mode", choices=("screen", "exact"), default="screen",
                        help="screen: float LP rounded and verified exactly; exact: rational simplex only")
    common.add_argument("--parallel", type=int, default=1, help="worker processes")
    common.add_argument("--cache-dir", dest="cache_dir",
                        help=f"record store (default ${census.CACHE_ENV} or {census.DEFAULT_CACHE_DIR})")
    common.add_argument("--no-cache", dest="use_cache", action="store_false")
    common.add_argument("--no-timestamp", dest="timestamp", action="store_false",
                        help="omit timestamps so repeated runs are byte-identical")
    common.add_argument("--long", dest="long_running", action="store_true",
                        help="allow long-running checks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lattice-ppt", description="PPT distinguishability of lattice states")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="exact alpha with a certificate")
    p.add_argument("--set", dest="set_text", required=True, help="comma-separated quaternary labels")
    p.add_argument("--certificate", help="write the certificate JSON here")

    sub.add_parser("census", parents=[common], help="all t=2 quadruples")
    sub.add_parser("families", parents=[common], help="the sixteen t=2 column families")

    p = sub.add_parser("lemmas", parents=[common], help="column intersection statistics")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--full", action="store_true", help="enumerate without the translation reduction")
    p.add_argument("--force", action="store_true", help="override the size guard")

    p = sub.add_parser("verify-theorem", parents=[common], help="theorem-level checks")
    p.add_argument("--name", required=True, choices=("thm3", "thm4", "thm5"))
    p.add_argument("--samples", type=int, default=500)

    p = sub.add_parser("oracle", parents=[common], help="dense identity checks")
    p.add_argument("--t", type=int, default=2)

    p = sub.add_parser("bound", parents=[common], help="closed-form and LP tightened bound")
    p.add_argument("--set", dest="set_text", required=True)

    p = sub.add_parser("reduced-costs", parents=[common], help="reduced-cost table at the value-1 basis")
    p.add_argument("--set", dest="set_text", help="t=2 set; default a random quadruple from --seed")

    p = sub.add_parser("sample", parents=[common], help="random k-subsets")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    return dispatch(RunConfig.from_args(args))


if __name__ == "__main__":
    sys.exit(main())
