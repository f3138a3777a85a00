"""Command line: ``mkdvgen {generate,check,simulate,export}``.

Exit codes: 0 success, 1 a check failed (nonzero residual or drift over the
threshold), 2 usage or configuration error.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then explicit flags (flags win).
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from . import conserved, hierarchy
from .diffpoly import DiffPoly
from .hierarchy import FlowSpec, flow
from .loopalg import AlgebraCtx, LoopElement, bracket

log = logging.getLogger("mkdvgen")

ALL_CHECKS = (
    "zero_curvature",
    "commutativity",
    "involutivity",
    "equivalence",
    "variational",
    "coboundary",
    "miura",
)
RANK1_ONLY = {"variational", "coboundary", "miura"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    rank: int = 1
    flows: List[int] = field(default_factory=list)
    degree: int | None = None
    checks: List[str] = field(default_factory=lambda: list(ALL_CHECKS))
    grid_n: int = 256
    length: float = 20.0
    dt: float = 1e-4
    steps: int = 10000
    profile: str = "sech:amplitude=1,width=0.5"
    threshold: float = 1e-6
    out: str = "out"
    formats: List[str] = field(default_factory=list)
    jobs: int = 1
    perturb: bool = False

    def validate(self) -> None:
        if self.rank < 1:
            raise UsageError("--rank must be a positive integer")
        ctx = AlgebraCtx(self.rank)
        bad = [n for n in self.flows if not ctx.is_exponent(n)]
        if bad:
            raise UsageError(
                f"flows {bad} are not exponents of {ctx.name} (multiples of h={ctx.h} excluded)"
            )
        if not self.flows:
            raise UsageError("empty flow list")
        need = max(self.flows) + 2
        if self.degree is None:
            self.degree = max(self.flows) + 3
        if self.degree < need:
            raise UsageError(f"--degree must be at least max(flows) + 2 = {need}")
        unknown = [c for c in self.checks if c not in ALL_CHECKS]
        if unknown:
            raise UsageError(f"unknown checks {unknown}; choose from {', '.join(ALL_CHECKS)}")
        n = self.grid_n
        if n < 2 or n & (n - 1):
            raise UsageError("--grid-n must be a power of two")
        if self.length <= 0 or self.dt <= 0 or self.steps < 1:
            raise UsageError("--length, --dt and --steps must be positive")

    @property
    def ctx(self) -> AlgebraCtx:
        return AlgebraCtx(self.rank)


# ---------------------------------------------------------------------------
# configuration


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from exc


def _str_list(text: str) -> List[str]:
    return [x.strip() for x in str(text).split(",") if x.strip()]


_CONVERTERS = {
    "rank": int,
    "flows": _int_list,
    "degree": int,
    "checks": _str_list,
    "grid_n": int,
    "length": float,
    "dt": float,
    "steps": int,
    "profile": str,
    "threshold": float,
    "out": str,
    "formats": _str_list,
    "format": _str_list,
    "jobs": int,
}


def read_config_file(path: str | Path) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values["formats" if key == "format" else key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}") from exc
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in _CONVERTERS:
        if key == "format":
            continue
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _CONVERTERS[key](v) if isinstance(v, str) else v
    if getattr(args, "perturb", False):
        values["perturb"] = True
    cfg = RunConfig(**values)
    if not cfg.flows:
        cfg.flows = default_flows(args.command, cfg.rank)
    if not cfg.formats:
        cfg.formats = list(DEFAULT_FORMATS[args.command])
    bad = [f for f in cfg.formats if f not in ("json", "latex", "csv")]
    if bad:
        raise UsageError(f"unknown formats {bad}")
    cfg.validate()
    return cfg


DEFAULT_FORMATS = {
    "generate": ("json", "latex"),
    "check": ("json",),
    "simulate": ("csv", "json"),
    "export": ("json", "latex"),
}


def default_flows(command: str, rank: int) -> List[int]:
    ctx = AlgebraCtx(rank)
    if command == "simulate":
        return [3 if rank == 1 else 2]
    return ctx.exponents(5)[:3]


# ---------------------------------------------------------------------------
# output helpers


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _stem(ctx: AlgebraCtx, what: str, n) -> str:
    return f"{what}_A{ctx.rank}_n{n}"


def _text(x) -> str:
    if isinstance(x, LoopElement):
        if x.is_zero():
            return "0"
        return "; ".join(
            f"E{a + 1}{b + 1} lam^{k}: {v!r}" for (a, b, k), v in sorted(x.entries.items())
        )
    if isinstance(x, (tuple, list)):
        return "(" + ", ".join(_text(e) for e in x) + ")"
    return repr(x)


def _is_zero(x) -> bool:
    if isinstance(x, (tuple, list)):
        return all(_is_zero(e) for e in x)
    if isinstance(x, LoopElement):
        return x.is_zero()
    return not x


# ---------------------------------------------------------------------------
# check items (module level so they can run in worker processes)


def _flows(ctx: AlgebraCtx, ns: Sequence[int], D: int, perturb: bool) -> Dict[int, FlowSpec]:
    out = {}
    for n in ns:
        f = flow(ctx, n, max(D, n + 2))
        if perturb and n != 1:
            f = f.perturbed([DiffPoly.var(i, 0, ctx.rank) for i in range(1, ctx.rank + 1)])
        out[n] = f
    return out


def run_item(item: Tuple[str, int, tuple, int, bool]) -> dict:
    name, rank, params, D, perturb = item
    ctx = AlgebraCtx(rank)
    extra: Dict[str, str] = {}
    if name == "zero_curvature":
        m, n = params
        residual = hierarchy.zero_curvature_residual(ctx, m, n, D)
        if perturb:
            fl = _flows(ctx, (m, n), D, True)
            A, B = fl[m].Vminus, fl[n].Vminus
            res = (hierarchy.prolong_matrix(fl[m], B) - hierarchy.prolong_matrix(fl[n], A)
                   + bracket(A, B))
            residual = res.truncate(D - max(m, n) - 1)
        extra["window"] = f"degree <= {D - max(m, n) - 1}"
    elif name == "commutativity":
        m, n = params
        fl = _flows(ctx, (m, n), D, perturb)
        residual = hierarchy.commutator_check(ctx, m, n, probe=DiffPoly.var(1, 0, rank), flows=fl)
    elif name == "involutivity":
        n, m = params
        if perturb:
            fl = _flows(ctx, (n, m), D, True)
            hn = conserved.hamiltonian_density(ctx, n, D).value
            hm = conserved.hamiltonian_density(ctx, m, D).value
            hnm = conserved.second_density(ctx, n, m, D).value
            dn = hierarchy.prolong(fl[n], hm)
            residual = (dn - hierarchy.prolong(fl[m], hn), dn - hnm.diff())
        else:
            residual = conserved.involutivity_check(ctx, n, m, D)
    elif name == "coordinate_identity":
        k, m = params
        residual = conserved.coordinate_identity_residual(k, m, D)
    elif name == "equivalence":
        (n,) = params
        residual = hierarchy.equivalence_check(ctx, n, D)
        extra["window"] = f"degree <= {D - n - 1}"
    elif name == "variational":
        (m,) = params
        res = conserved.variational_check(m, D)
        residual = res.residual
        extra["constant"] = str(res.constant)
    elif name == "coboundary":
        n, i = params
        res = conserved.coboundary_check(n, i, D)
        residual = res.residual
        extra["constant"] = str(res.constant)
    elif name == "miura_invariance":
        u = DiffPoly.var(1)
        residual = conserved.screening_action(1, u * u / 2 + u.diff())
    elif name == "kdv_rewrite":
        (n,) = params
        q = conserved.kdv_flow(n, max(D, n + 2))
        residual = DiffPoly.zero(1)
        extra["kdv_rhs"] = q.to_str(["v"])
    elif name == "miura_roundtrip":
        (count,) = params
        rng = random.Random(1234)
        bad = DiffPoly.zero(1)
        for _ in range(count):
            p = random_v_poly(rng, max_weight=8)
            back = conserved.kdv_rewrite(conserved.miura(p))
            bad = bad + (back - p)
        residual = bad
    else:
        raise ValueError(f"unknown check item {name}")
    return {
        "check": name,
        "params": list(params),
        "residual": _text(residual),
        "passed": _is_zero(residual),
        **extra,
    }


def random_v_poly(rng: random.Random, max_weight: int = 8, terms: int = 4) -> DiffPoly:
    """Random polynomial in the v-jets with all monomials of v-weight <= max_weight."""
    pool = [m for w in range(1, max_weight + 1) for m in conserved.v_monomials(w)]
    out = {}
    for _ in range(rng.randint(1, terms)):
        m = rng.choice(pool)
        out[m] = out.get(m, 0) + rng.choice([-3, -2, -1, 1, 2, 3]) * rng.choice([1, 1, 2, 3])
    return DiffPoly(out, 1)


def plan_checks(cfg: RunConfig) -> List[Tuple[str, int, tuple, int, bool]]:
    ctx = cfg.ctx
    ns = sorted(set(cfg.flows))
    D, p = cfg.degree, cfg.perturb
    items: List[Tuple[str, tuple]] = []
    for name in cfg.checks:
        if name in RANK1_ONLY and ctx.rank != 1:
            continue
        if name == "zero_curvature":
            pairs = {(1, n) for n in ns if n != 1} | {(a, b) for a in ns for b in ns if a < b}
            items += [(name, pr) for pr in sorted(pairs)]
        elif name == "commutativity":
            items += [(name, (a, b)) for a in ns for b in ns if a < b]
        elif name == "involutivity":
            items += [(name, (a, b)) for a in ns for b in ns if a <= b]
            if ctx.rank == 1:
                items += [("coordinate_identity", (a, b)) for a in ns for b in ns]
        elif name == "equivalence":
            items += [(name, (n,)) for n in ns if D >= n + 2]
        elif name == "variational":
            items += [(name, (n,)) for n in ns]
        elif name == "coboundary":
            items += [(name, (n, i)) for n in ns for i in (0, 1)]
        elif name == "miura":
            items.append(("miura_invariance", ()))
            items += [("kdv_rewrite", (n,)) for n in ns if n >= 3]
            items.append(("miura_roundtrip", (20,)))
    return [(name, ctx.rank, params, D, p) for name, params in items]


def skipped_checks(cfg: RunConfig) -> List[str]:
    if cfg.rank == 1:
        return []
    return [c for c in cfg.checks if c in RANK1_ONLY]


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ctx = cfg.ctx
    for n in cfg.flows:
        f = flow(ctx, n, cfg.degree)
        stem = _stem(ctx, "flow", n)
        if "json" in cfg.formats:
            _dump_json(out / f"{stem}.json", f.to_json())
        if "latex" in cfg.formats:
            (out / f"{stem}.tex").write_text(f.to_latex())
        print(f"d_{n} u = {', '.join(map(repr, f.rhs))}")
    return 0


def cmd_check(cfg: RunConfig) -> int:
    items = plan_checks(cfg)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(run_item, items))
    else:
        results = [run_item(it) for it in items]
    ledger = conserved.normalization_ledger() if cfg.rank == 1 else {
        "p_n": "p_n = Lam^n, Lam = sum_a E_{a,a+1} + lam E_{r+1,1}; (p_n, p_-n) = r + 1",
        "integration_constants": "0",
        "dressing_gauge": "abelian coefficient of every log M component is 0",
    }
    report = {
        "algebra": cfg.ctx.name,
        "flows": cfg.flows,
        "degree": cfg.degree,
        "perturbed": cfg.perturb,
        "normalization": ledger,
        "skipped": skipped_checks(cfg),
        "results": results,
        "passed": all(r["passed"] for r in results),
    }
    lines = []
    for r in results:
        tag = "PASS" if r["passed"] else "FAIL"
        params = ",".join(map(str, r["params"]))
        extra = "".join(f" {k}={r[k]}" for k in ("window", "constant", "kdv_rhs") if k in r)
        lines.append(f"{tag} {r['check']}({params}) residual={r['residual']}{extra}")
    for s in report["skipped"]:
        lines.append(f"SKIP {s} (rank 1 only)")
    lines.append(f"normalization: {json.dumps(ledger, sort_keys=True)}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if "json" in cfg.formats:
        _dump_json(out / f"check_A{cfg.rank}.json", report)
    (out / f"check_A{cfg.rank}.txt").write_text(text)
    return 0 if report["passed"] else 1


def parse_profile(spec: str) -> Tuple[str, Dict[str, float]]:
    kind, _, rest = spec.partition(":")
    params: Dict[str, float] = {}
    for part in filter(None, rest.split(",")):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"bad profile parameter {part!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError as exc:
            raise UsageError(f"bad profile value {part!r}") from exc
    if kind not in ("sine", "gaussian", "sech", "zero"):
        raise UsageError(f"unknown profile {kind!r}")
    unknown = set(params) - {"amplitude", "width", "center"}
    if unknown:
        raise UsageError(f"unknown profile parameters {sorted(unknown)}")
    return kind, params


def cmd_simulate(cfg: RunConfig) -> int:
    from . import numeval

    ctx = cfg.ctx
    n = cfg.flows[-1]
    kind, params = parse_profile(cfg.profile)
    f = flow(ctx, n, cfg.degree)
    s0 = numeval.initial_profile(kind, cfg.grid_n, cfg.length, rank=ctx.rank, **params)
    densities = [conserved.hamiltonian_density(ctx, m) for m in ctx.exponents(3)[:2]]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", numeval.StabilityWarning)
        try:
            traj = numeval.integrate(s0, f, cfg.dt, cfg.steps)
        except numeval.IntegrationError as exc:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            print(f"error: integration aborted: {exc}", file=sys.stderr)
            return 1
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = numeval.monitor(traj, densities)
    stem = f"simulate_A{ctx.rank}_n{n}"
    if "csv" in cfg.formats:
        traj.write_csv(out / f"{stem}_trajectory.csv")
    summary = {
        "algebra": ctx.name,
        "flow": n,
        "profile": cfg.profile,
        "grid_n": cfg.grid_n,
        "length": cfg.length,
        "dt": cfg.dt,
        "steps": cfg.steps,
        "threshold": cfg.threshold,
        "conservation": report.to_json()["densities"],
        "max_rel_drift": report.max_drift,
        "passed": report.max_drift <= cfg.threshold,
    }
    if "json" in cfg.formats:
        report.write_json(out / f"{stem}_conservation.json")
        _dump_json(out / f"{stem}_summary.json", summary)
    for d in report.densities:
        print(f"{d.density}: initial={d.initial:.12g} final={d.final:.12g} "
              f"max_rel_drift={d.max_rel_drift:.3e}")
    print("PASS" if summary["passed"] else "FAIL", f"max drift {report.max_drift:.3e}")
    return 0 if summary["passed"] else 1


def cmd_export(cfg: RunConfig) -> int:
    ctx = cfg.ctx
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    dressing = hierarchy.compute_dressing(ctx, cfg.degree)
    for n in cfg.flows:
        V = hierarchy.compute_V(ctx, n, cfg.degree)
        H = conserved.hamiltonian_density(ctx, n, cfg.degree)
        cocycles = {str(i): conserved.cocycle_value(ctx, n, i, cfg.degree) for i in range(ctx.rank + 1)}
        data = {
            "algebra": ctx.name,
            "n": n,
            "V": V.to_json(),
            "H": H.value.to_json(),
            "cocycles": {k: v.to_json() for k, v in cocycles.items()},
        }
        stem = _stem(ctx, "export", n)
        if "json" in cfg.formats:
            _dump_json(out / f"{stem}.json", data)
        if "latex" in cfg.formats:
            tex = [f"% {ctx.name}, n = {n}, degree bound {cfg.degree}",
                   "V^{(%d)} = %s" % (n, V.to_latex()),
                   f"H_{{{n}}} = {H.value.to_latex()}"]
            tex += [f"\\phi_{{{n}}}(e_{{{i}}}) = {v.to_latex()}" for i, v in cocycles.items()]
            (out / f"{stem}.tex").write_text("\n\n".join(tex) + "\n")
    dres = {
        "algebra": ctx.name,
        "degree": cfg.degree,
        "h": {str(j): v.to_json() for j, v in sorted(dressing.h.items())},
        "log_M": {str(j): y.to_json() for j, y in sorted(dressing.y.items())},
    }
    if "json" in cfg.formats:
        _dump_json(out / f"dressing_A{ctx.rank}.json", dres)
    print(f"exported {len(cfg.flows)} flow(s) and dressing data to {out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--rank", type=int)
    common.add_argument("--flows", help="comma-separated exponents, e.g. 1,3,5")
    common.add_argument("--degree", type=int, help="principal degree bound D")
    common.add_argument("--checks", help=f"comma list from {','.join(ALL_CHECKS)}")
    common.add_argument("--grid-n", dest="grid_n", type=int)
    common.add_argument("--length", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--profile", help="kind[:amplitude=..,width=..,center=..]")
    common.add_argument("--threshold", type=float, help="max relative drift for simulate")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", dest="formats", action="append",
                        choices=["json", "latex", "csv"])
    common.add_argument("--jobs", type=int, help="worker processes for check")
    common.add_argument("--perturb", action="store_true", help=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mkdvgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write flow equations")
    sub.add_parser("check", parents=[common], help="run symbolic identity checks")
    sub.add_parser("simulate", parents=[common], help="integrate a flow numerically")
    sub.add_parser("export", parents=[common], help="write V matrices, densities, cocycles")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except UsageError as exc:
        print(f"mkdvgen {args.command}: error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"mkdvgen {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
