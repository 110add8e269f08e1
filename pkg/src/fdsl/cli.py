"""Command-line driver: configuration parsing, runs and output formatting."""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from mpmath import mp, mpf

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .analysis import convergence_report, fit_slopes
from .core import (
    InverseSqrt,
    Polynomial,
    ProblemSpec,
    precision,
    q_l1_norm,
    set_precision,
    to_scalar,
)
from .errors import ConfigError, FDError, ParseError, ValidationError, ZeroNorm
from .solver import FDSolution, run_fd

EMIT_CHOICES = ("table", "report", "plot", "analysis", "slopes")
DEFAULT_EMIT = ("table",)

_SECTIONS = {
    "problem": {"alpha", "beta", "q", "nonlinearity", "breakpoints"},
    "quadrature": {"K", "d", "mu", "epsilon", "K_cap"},
    "run": {"n", "rank", "precision", "emit", "oracle_check", "out"},
}
_TERM_KEYS = {
    "polynomial": {"type", "coefficients"},
    "inverse_sqrt": {"type", "scale", "center", "stretch"},
}


@dataclass
class RunConfig:
    problem: ProblemSpec
    n_list: list
    rank: int = 10
    precision: int = 50
    K: int | None = None
    d: mpf | None = None
    mu: mpf | None = None
    epsilon: mpf = field(default_factory=lambda: mpf("1e-12"))
    K_cap: int = 2 ** 14
    emit: tuple = DEFAULT_EMIT
    oracle_check: bool = False
    out: Path | None = None
    raw: dict = field(default_factory=dict, repr=False)


# ---------------------------------------------------------------------------
# configuration


def _num(value, where: str):
    """Numbers stay exact: TOML floats go through their shortest repr."""
    if isinstance(value, bool):
        raise ValidationError(f"{where}: expected a number, got a boolean")
    if isinstance(value, float):
        return str(value)
    if isinstance(value, (int, str)):
        if isinstance(value, str):
            try:
                to_scalar(value)
            except (ValueError, ZeroDivisionError) as exc:
                raise ValidationError(f"{where}: cannot read {value!r} as a number") from exc
        return value
    raise ValidationError(f"{where}: expected a number, got {type(value).__name__}")


def load_raw(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _check_keys(table: dict, allowed: set, where: str) -> None:
    for key in table:
        if key not in allowed:
            raise ParseError(f"{where}: unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")


def _parse_term(rec, where: str):
    if not isinstance(rec, dict):
        raise ValidationError(f"{where}: expected a table")
    kind = rec.get("type")
    if kind not in _TERM_KEYS:
        raise ValidationError(f"{where}.type: expected one of {sorted(_TERM_KEYS)}, got {kind!r}")
    _check_keys(rec, _TERM_KEYS[kind], where)
    try:
        if kind == "polynomial":
            coeffs = rec.get("coefficients", [])
            if not isinstance(coeffs, list):
                raise ValidationError(f"{where}.coefficients: expected an array")
            return Polynomial(tuple(_num(c, f"{where}.coefficients") for c in coeffs))
        for key in ("scale", "center"):
            if key not in rec:
                raise ValidationError(f"{where}.{key}: missing")
        return InverseSqrt(_num(rec["scale"], f"{where}.scale"), _num(rec["center"], f"{where}.center"),
                           _num(rec.get("stretch", 1), f"{where}.stretch"))
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def parse_problem(table: dict) -> ProblemSpec:
    _check_keys(table, _SECTIONS["problem"], "[problem]")
    if "alpha" not in table:
        raise ValidationError("[problem].alpha: missing")
    alpha = table["alpha"]
    alpha = _num(alpha, "[problem].alpha")
    if isinstance(alpha, str) and "/" in alpha:
        try:
            alpha = Fraction(alpha.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"[problem].alpha: {exc}") from exc
    terms = table.get("q", [])
    if not isinstance(terms, list):
        raise ValidationError("[problem].q: expected an array of tables")
    q_terms = tuple(_parse_term(t, f"[problem].q[{i}]") for i, t in enumerate(terms))
    nonlin_raw = table.get("nonlinearity", {})
    if not isinstance(nonlin_raw, dict):
        raise ValidationError("[problem].nonlinearity: expected a table degree = coefficient")
    nonlin = {}
    for key, val in nonlin_raw.items():
        try:
            deg = int(key)
        except ValueError as exc:
            raise ValidationError(f"[problem].nonlinearity: degree {key!r} is not an integer") from exc
        nonlin[deg] = _num(val, f"[problem].nonlinearity.{key}")
    bps = table.get("breakpoints", [])
    if not isinstance(bps, list):
        raise ValidationError("[problem].breakpoints: expected an array")
    bps = tuple(_num(b, "[problem].breakpoints") for b in bps)
    try:
        return ProblemSpec(alpha=alpha, beta=_num(table.get("beta", 0), "[problem].beta"),
                           q_terms=q_terms, nonlin=nonlin, breakpoints=bps)
    except ValueError as exc:
        field_name = str(exc).split(" ")[0]
        raise ValidationError(f"[problem].{field_name}: {exc}") from exc


def _parse_n(value, where: str) -> list:
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    elif isinstance(value, str):
        value = _n_from_text(value, where)
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{where}: expected a nonempty list of indices")
    if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in value):
        raise ValidationError(f"{where}: indices must be integers >= 1")
    if any(b <= a for a, b in zip(value[:-1], value[1:])):
        raise ValidationError(f"{where}: indices must be strictly increasing")
    return list(value)


def _n_from_text(text: str, where: str) -> list:
    """'3', '1,2,5' or '1-10'."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-")
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError as exc:
        raise ValidationError(f"{where}: cannot read {text!r}") from exc
    return out


def build_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Validate a parsed TOML document, applying command-line ``overrides``."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    _check_keys(raw, set(_SECTIONS), "top level")
    for sec in ("quadrature", "run"):
        if sec in raw:
            if not isinstance(raw[sec], dict):
                raise ParseError(f"[{sec}]: expected a table")
            _check_keys(raw[sec], _SECTIONS[sec], f"[{sec}]")
    if "problem" not in raw or not isinstance(raw["problem"], dict):
        raise ValidationError("[problem]: missing section")
    run = dict(raw.get("run", {}))
    quad = dict(raw.get("quadrature", {}))

    prec = overrides.get("precision", run.get("precision", 50))
    if not isinstance(prec, int) or prec < 15:
        raise ValidationError(f"[run].precision: must be an integer >= 15, got {prec!r}")
    set_precision(prec)

    problem = parse_problem(raw["problem"])
    n_list = _parse_n(overrides.get("n", run.get("n", [1])), "[run].n")
    rank = overrides.get("rank", run.get("rank", 10))
    if not isinstance(rank, int) or isinstance(rank, bool) or rank < 0:
        raise ValidationError(f"[run].rank: must be an integer >= 0, got {rank!r}")
    K = overrides.get("K", quad.get("K"))
    if K is not None and (not isinstance(K, int) or K < 4):
        raise ValidationError(f"[quadrature].K: must be an integer >= 4, got {K!r}")
    K_cap = quad.get("K_cap", 2 ** 14)
    if not isinstance(K_cap, int) or K_cap < 8:
        raise ValidationError(f"[quadrature].K_cap: must be an integer >= 8, got {K_cap!r}")
    d = overrides.get("d", quad.get("d"))
    d = None if d is None else to_scalar(_num(d, "[quadrature].d"))
    if d is not None and not 0 < d < mp.pi:
        raise ValidationError("[quadrature].d: must lie in (0, pi)")
    mu = overrides.get("mu", quad.get("mu"))
    mu = None if mu is None else to_scalar(_num(mu, "[quadrature].mu"))
    if mu is not None and mu <= 0:
        raise ValidationError("[quadrature].mu: must be positive")
    eps = to_scalar(_num(overrides.get("epsilon", quad.get("epsilon", "1e-12")), "[quadrature].epsilon"))
    if eps <= 0:
        raise ValidationError("[quadrature].epsilon: must be positive")
    emit = overrides.get("emit", run.get("emit", list(DEFAULT_EMIT)))
    if isinstance(emit, str):
        emit = [emit]
    for e in emit:
        if e not in EMIT_CHOICES:
            raise ValidationError(f"[run].emit: unknown output {e!r} (choose from {', '.join(EMIT_CHOICES)})")
    oracle = overrides.get("oracle_check", run.get("oracle_check", False))
    if not isinstance(oracle, bool):
        raise ValidationError("[run].oracle_check: expected true or false")
    out = overrides.get("out", run.get("out"))
    return RunConfig(problem, n_list, rank, prec, K, d, mu, eps, K_cap, tuple(dict.fromkeys(emit)),
                     oracle, None if out is None else Path(out), raw)


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    return build_config(load_raw(path), overrides)


# ---------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    n: int
    solution: FDSolution
    analysis: object | None = None
    analysis_note: str | None = None
    oracle: dict | None = None


def _analyse(cfg: RunConfig, sol: FDSolution):
    qn = q_l1_norm(cfg.problem)
    try:
        rep = convergence_report(sol.basic, qn, cfg.problem.nonlin_coeffs, m=cfg.rank)
        return rep, None
    except ZeroNorm as exc:
        return None, str(exc)


def _oracle_check(cfg: RunConfig, sol: FDSolution) -> dict:
    from .oracle import find_eigenvalue

    lam = float(sol.lambda_m)
    half = max(1e-3, 1e-4 * abs(lam))
    for _ in range(6):
        try:
            res = find_eigenvalue(cfg.problem, (lam - half, lam + half))
            return {"lambda_oracle": res.lam, "difference": abs(lam - res.lam),
                    "steps": res.steps, "error_estimate": res.error_estimate}
        except FDError:
            half *= 10
    return {"lambda_oracle": None, "difference": None, "note": "no sign change near the FD value"}


def run(cfg: RunConfig, stream=None) -> tuple:
    """Solve every requested n; returns (exit status, list of RunResult, error text)."""
    stream = sys.stdout if stream is None else stream
    results = []
    try:
        for n in cfg.n_list:
            sol = run_fd(cfg.problem, n, cfg.rank, eps=cfg.epsilon, K=cfg.K, d=cfg.d, mu=cfg.mu,
                         K_cap=cfg.K_cap)
            res = RunResult(n, sol)
            if "analysis" in cfg.emit or "report" in cfg.emit:
                res.analysis, res.analysis_note = _analyse(cfg, sol)
            if cfg.oracle_check:
                res.oracle = _oracle_check(cfg, sol)
            results.append(res)
    except FDError as exc:
        return 1, results, f"{type(exc).__name__}: {exc}"
    return 0, results, None


# ---------------------------------------------------------------------------
# formatting


def _sig() -> int:
    return min(mp.dps - 5, 24)


def fmt_full(x) -> str:
    """Enough digits to reproduce the binary value at the working precision."""
    return mp.nstr(mpf(x), int(mp.prec * 0.30103) + 2, strip_zeros=False)


def fmt_short(x, digits: int = 2) -> str:
    return mp.nstr(mpf(x), digits, min_fixed=1, max_fixed=0)


def format_table(results: list) -> str:
    sig = _sig()
    head = f"{'n':>3} {'m':>3}  {'lambda':<{sig + 6}} {'||u^(m)||':>10} {'|lam^(m)|':>10} {'r':>10} {'Delta':>10}"
    lines = [head, "-" * len(head)]
    for res in results:
        s = res.solution
        last = s.corrections[-1] if s.corrections else None
        un = fmt_short(last.sup_abs_u) if last else "-"
        ln = fmt_short(abs(last.lambda_j)) if last else "-"
        lam = mp.nstr(s.lambda_m, sig, strip_zeros=False)
        lines.append(f"{res.n:>3} {s.rank:>3}  {lam:<{sig + 6}} {un:>10} {ln:>10} "
                     f"{fmt_short(s.residual_r):>10} {fmt_short(s.jump_defect):>10}")
    return "\n".join(lines)


def format_slopes(results: list) -> str:
    head = (f"{'n':>3} {'a_u':>6} {'b_u':>6} {'e_u':>5} {'a_lam':>6} {'b_lam':>6} {'e_lam':>5}"
            f" {'a_r':>6} {'b_r':>6} {'e_r':>5}")
    lines = [head, "-" * len(head)]
    for res in results:
        fits = slope_fits(res.solution)
        if fits is None:
            lines.append(f"{res.n:>3}  (needs rank >= 1 and positive histories)")
            continue
        cells = []
        for f in fits:
            cells += [f"{f.slope:6.1f}", f"{f.intercept:6.1f}", f"{f.deviation:5.1f}"]
        lines.append(f"{res.n:>3} " + " ".join(cells))
    return "\n".join(lines)


def slope_fits(sol: FDSolution):
    u = sol.norm_history
    lam = sol.lambda_history
    r = [v for _, v in sol.residual_history]
    if sol.rank < 1 or len(r) != len(u) or any(v <= 0 for v in u + lam + r):
        return None
    return fit_slopes(u, lam, r)


def format_analysis(results: list) -> str:
    head = f"{'n':>3} {'v0_bar':>7} {'R':>10} {'r_n':>8}  bounds"
    lines = [head, "-" * len(head)]
    for res in results:
        rep = res.analysis
        if rep is None:
            lines.append(f"{res.n:>3}  {res.analysis_note or 'not computed'}")
            continue
        if rep.converged_flag:
            note = (f"C={fmt_short(rep.C_nm)} |lambda err|<={fmt_short(rep.eigenvalue_bound)} "
                    f"|u err|<={fmt_short(rep.eigenfunction_bound)}")
        else:
            note = "r_n >= 1: a-priori bounds unavailable"
        lines.append(f"{res.n:>3} {mp.nstr(rep.v0_bar, 2, strip_zeros=False):>7} "
                     f"{mp.nstr(rep.R, 2, strip_zeros=False):>10} {mp.nstr(rep.r_n, 4):>8}  {note}")
    return "\n".join(lines)


def plot_rows(sol: FDSolution) -> str:
    rows = ["x,u,uprime"]
    for x, u, du in zip(sol.grid.nodes, sol.u_samples, sol.uprime_samples):
        rows.append(f"{mp.nstr(x, 20)},{mp.nstr(u, 20)},{mp.nstr(du, 20)}")
    return "\n".join(rows) + "\n"


def _spec_dict(spec: ProblemSpec) -> dict:
    terms = []
    for t in spec.q_terms:
        if isinstance(t, Polynomial):
            terms.append({"type": "polynomial", "coefficients": [fmt_full(c) for c in t.coefficients]})
        elif isinstance(t, InverseSqrt):
            terms.append({"type": "inverse_sqrt", "scale": fmt_full(t.scale),
                          "center": fmt_full(t.center), "stretch": fmt_full(t.stretch)})
        else:
            terms.append({"type": "callback"})
    alpha = (f"{spec.alpha_exact.numerator}/{spec.alpha_exact.denominator}"
             if spec.alpha_exact is not None else fmt_full(spec.alpha))
    return {"alpha": alpha, "beta": fmt_full(spec.beta), "q": terms,
            "nonlinearity": {str(p): fmt_full(a) for p, a in spec.nonlin},
            "breakpoints": [fmt_full(b) for b in spec.breakpoints]}


def report_dict(cfg: RunConfig, results: list, status: str = "ok", error: str | None = None) -> dict:
    out = {"status": status, "precision": cfg.precision, "rank": cfg.rank,
           "problem": _spec_dict(cfg.problem), "results": []}
    if error:
        out["error"] = error
    for res in results:
        s = res.solution
        entry = {
            "n": res.n,
            "lambda": fmt_full(s.lambda_m),
            "lambda0": fmt_full(s.basic.lambda0),
            "c0": fmt_full(s.basic.c0),
            "M": fmt_full(s.basic.M),
            "c_tilde": fmt_full(s.basic.c_tilde),
            "resonant": s.basic.resonant,
            "quadrature": {"K": s.quad.K, "d": fmt_full(s.quad.d), "mu": fmt_full(s.quad.mu),
                           "h": fmt_full(s.quad.h), "nodes": s.grid.size},
            "corrections": [
                {"j": c.j, "lambda_j": fmt_full(c.lambda_j), "c_j": fmt_full(c.c_j),
                 "sup_abs_u": fmt_full(c.sup_abs_u), "u_alpha": fmt_full(c.u_at_alpha),
                 "uprime_alpha_left": fmt_full(c.uprime_at_alpha_left),
                 "uprime_alpha_right": fmt_full(c.uprime_at_alpha_right)}
                for c in s.corrections],
            "residual": fmt_full(s.residual_r),
            "jump_defect": fmt_full(s.jump_defect),
            "residual_history": [fmt_full(v) for _, v in s.residual_history],
            "jump_history": [fmt_full(v) for _, v in s.jump_history],
        }
        fits = slope_fits(s)
        if fits is not None:
            entry["slopes"] = {name: {"a": f.slope, "b": f.intercept, "e": f.deviation}
                               for name, f in zip(("u", "lambda", "r"), fits)}
        rep = res.analysis
        if rep is not None:
            entry["analysis"] = {
                "v0_bar": fmt_full(rep.v0_bar), "a_n": fmt_full(rep.a_n), "b_n": fmt_full(rep.b_n),
                "q_norm": fmt_full(rep.q_norm), "R": fmt_full(rep.R), "r_n": fmt_full(rep.r_n),
                "converged": rep.converged_flag,
                "C_nm": None if rep.C_nm is None else fmt_full(rep.C_nm),
                "eigenvalue_bound": None if rep.eigenvalue_bound is None else fmt_full(rep.eigenvalue_bound),
                "eigenfunction_bound": (None if rep.eigenfunction_bound is None
                                        else fmt_full(rep.eigenfunction_bound)),
            }
        elif res.analysis_note:
            entry["analysis"] = {"note": res.analysis_note}
        if res.oracle is not None:
            entry["oracle"] = res.oracle
        out["results"].append(entry)
    return out


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def load_report(path) -> dict:
    """Read a report back; eigenvalues are returned as mpf at the stored precision."""
    with open(path) as fh:
        data = json.load(fh)
    with precision(max(int(data.get("precision", mp.dps)), 15)):
        for entry in data.get("results", []):
            entry["lambda"] = mpf(entry["lambda"])
            entry["lambda0"] = mpf(entry["lambda0"])
    return data


def _metadata(cfg: RunConfig, elapsed: float) -> dict:
    import mpmath
    import numpy
    import scipy

    return {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "elapsed_seconds": round(elapsed, 3),
            "python": platform.python_version(), "mpmath": mpmath.__version__,
            "numpy": numpy.__version__, "scipy": scipy.__version__}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdsl", description=(
        "Functional-discrete eigen-solver for u'' - [beta delta(x - alpha) + q(x)] u"
        " + lambda u - N(u) = 0 on (0, 1)."))
    p.add_argument("--config", required=True, help="TOML problem description")
    p.add_argument("--n", help="eigenpair indices: '3', '1,2,5' or '1-10'")
    p.add_argument("--rank", type=int, help="rank m of the approximation")
    p.add_argument("--precision", type=int, help="working precision in decimal digits")
    p.add_argument("--K", type=int, help="fixed number of sinc nodes per half grid")
    p.add_argument("--d", help="strip half-width d in (0, pi)")
    p.add_argument("--mu", help="endpoint decay exponent mu > 0")
    p.add_argument("--epsilon", help="target accuracy of the K search")
    p.add_argument("--emit", action="append", choices=EMIT_CHOICES,
                   help="output to produce (repeatable); default: table")
    p.add_argument("--oracle-check", action="store_true", default=None,
                   help="cross-check every eigenvalue with the shooting solver")
    p.add_argument("--out", help="directory for report, plot and metadata files")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.time()
    old = mp.dps
    try:
        overrides = {"rank": args.rank, "precision": args.precision, "K": args.K, "d": args.d,
                     "mu": args.mu, "epsilon": args.epsilon, "emit": args.emit,
                     "oracle_check": args.oracle_check, "out": args.out}
        if args.n is not None:
            overrides["n"] = _n_from_text(args.n, "--n")
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        mp.dps = old
        return 2
    try:
        return _execute(cfg, start)
    finally:
        mp.dps = old


def _execute(cfg: RunConfig, start: float) -> int:
    status, results, error = run(cfg)
    out = cfg.out
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    blocks = []
    if "table" in cfg.emit:
        blocks.append(format_table(results))
    if "slopes" in cfg.emit:
        blocks.append(format_slopes(results))
    if "analysis" in cfg.emit:
        blocks.append(format_analysis(results))
    oracle_lines = []
    for res in results:
        if res.oracle is not None:
            o = res.oracle
            diff = "n/a" if o.get("difference") is None else f"{o['difference']:.2e}"
            oracle_lines.append(f"oracle n={res.n}: lambda_shoot={o.get('lambda_oracle')} |difference|={diff}")
    if oracle_lines:
        blocks.append("\n".join(oracle_lines))
    if error:
        blocks.append(f"FAILED: {error}")
    text = "\n\n".join(blocks)
    if text:
        print(text)
    if out is not None:
        if text:
            (out / "output.txt").write_text(text + "\n")
        if "report" in cfg.emit or error:
            rep = report_dict(cfg, results, "ok" if not error else "failed", error)
            (out / "report.json").write_text(dump_report(rep))
        if "plot" in cfg.emit:
            for res in results:
                (out / f"plot_n{res.n}.csv").write_text(plot_rows(res.solution))
        meta = _metadata(cfg, time.time() - start)
        (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    elif "report" in cfg.emit:
        print(dump_report(report_dict(cfg, results, "ok" if not error else "failed", error)))
    if "plot" in cfg.emit and out is None:
        for res in results:
            print(plot_rows(res.solution), end="")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
