"""Command-line front end.

    python -m rttlab verify --algebra o --N 2 --K 1 --plan default
    python -m rttlab expand --what sdet --algebra o --N 2 --K 1 --format latex
    python -m rttlab pi-map --N 5 --perm 3,1,5,2,4
    python -m rttlab list
    python -m rttlab dump-rmatrix --kind R --N 2

JSON goes to stdout and diagnostics to stderr.  Exit status is 0 on success, 1 when
a check fails and 2 on bad flags or configuration.
"""

from __future__ import annotations

import argparse
import contextlib
import fnmatch
import json
import os
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

from .scalar import GradedCoeff, RatQ, parse_ratq

ALGEBRAS = ("o", "sp", "gl", "affine")
FORMATS = ("json", "latex", "text")

# presentation kinds behind each algebra flag
_RTT_KIND = {"o": "yqtw_o", "sp": "yqtw_sp", "gl": "uqgl", "affine": "uqaffine"}
_FINITE_KIND = {"o": "uqtw_o", "sp": "uqtw_sp"}
_GROUP_ALGEBRAS = {"qdet": ("gl", "affine"), "sdet": ("o", "sp")}


class ConfigError(ValueError):
    """A field-level configuration problem; reported with exit status 2."""


@dataclass
class Config:
    N: int | None = None
    algebra: str | None = None
    K: int | None = None
    plan: str = "default"
    format: str = "json"
    width: int = 1
    budget: int | None = None

    def validate(self) -> "Config":
        errors = []
        if self.N is not None and not 1 <= self.N <= 8:
            errors.append(f"N: expected an integer in 1..8, got {self.N}")
        if self.algebra is not None and self.algebra not in ALGEBRAS:
            errors.append(f"algebra: expected one of {', '.join(ALGEBRAS)}, got {self.algebra!r}")
        if self.K is not None and not 0 <= self.K <= 8:
            errors.append(f"K: expected an integer in 0..8, got {self.K}")
        if self.format not in FORMATS:
            errors.append(f"format: expected one of {', '.join(FORMATS)}, got {self.format!r}")
        if self.width < 1:
            errors.append(f"width: expected a positive integer, got {self.width}")
        if self.budget is not None and self.budget < 1:
            errors.append(f"budget: expected a positive integer, got {self.budget}")
        if not self.plan.strip():
            errors.append("plan: empty plan selection")
        if errors:
            raise ConfigError("; ".join(errors))
        return self


_INT_FIELDS = {"N", "K", "width", "budget"}


def read_config_file(path: str | Path) -> dict:
    """Flat key=value lines; blank lines and lines starting with # are ignored."""
    out = {}
    known = {f.name for f in fields(Config)}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{n}: expected key=value")
        if key not in known:
            raise ConfigError(f"{path}:{n}: unknown field {key!r}")
        if key in _INT_FIELDS:
            try:
                value = int(value)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
        out[key] = value
    return out


def make_config(args: argparse.Namespace, **defaults) -> Config:
    """Command defaults, then config file values, then any flag given on the command line."""
    values = dict(defaults)
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(Config):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return Config(**values).validate()


# ---------------------------------------------------------------------------
# verify


def _params_for(ident, cfg: Config) -> dict | None:
    """Parameters for one registered check under cfg, or None if it does not apply."""
    d = ident.defaults
    p: dict = {}
    allowed = _GROUP_ALGEBRAS.get(ident.group)
    if cfg.algebra is not None and allowed is not None and cfg.algebra not in allowed:
        return None
    if "algebra" in d and cfg.algebra is not None:
        if cfg.algebra not in ("o", "sp"):
            return None
        p["algebra"] = cfg.algebra
    if "kind" in d and cfg.algebra is not None:
        table = _FINITE_KIND if d["kind"] in _FINITE_KIND.values() else _RTT_KIND
        if cfg.algebra not in table:
            return None
        p["kind"] = table[cfg.algebra]
    if "N" in d and cfg.N is not None:
        p["N"] = cfg.N
    if "K" in d and cfg.K is not None and d["K"] is not None:
        p["K"] = cfg.K
    return p


def parse_params(items: Sequence[str] | None) -> dict:
    """key=value pairs; values are read as JSON when possible (so 3 and [1,2] work)."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"param: expected key=value, got {item!r}")
        try:
            v = json.loads(value)
        except json.JSONDecodeError:
            v = value.strip()
        out[key.strip()] = tuple(v) if isinstance(v, list) else v
    return out


def build_plan(cfg: Config, extra: Mapping | None = None) -> list[tuple[str, dict]]:
    """The plan selected by cfg; extra parameters apply to checks whose defaults name them."""
    from . import verify

    if cfg.plan == "full":
        return verify.full_plan()
    patterns = ["*"] if cfg.plan == "default" else [s.strip() for s in cfg.plan.split(",") if s.strip()]
    plan = []
    for id_, ident in verify.REGISTRY.items():
        if not any(fnmatch.fnmatch(id_, pat) for pat in patterns):
            continue
        # out-of-scope entries are only listed when named explicitly
        if ident.check is None and id_ not in patterns:
            continue
        p = _params_for(ident, cfg) if ident.check is not None else {}
        if p is not None:
            p.update({k: v for k, v in (extra or {}).items() if k in ident.defaults})
            plan.append((id_, p))
    if not plan:
        raise ConfigError(f"plan: no registered identity matches {cfg.plan!r}")
    return plan


def _format_report_text(rep) -> str:
    params = ", ".join(f"{k}={v}" for k, v in sorted(rep.params.items()))
    line = f"{rep.verdict.upper():7} {rep.id} ({params}) {rep.millis:.0f} ms"
    if rep.reason:
        line += f"  [{rep.reason}]"
    for label, _ in rep.residuals:
        line += f"\n        residual: {label}"
    return line


def cmd_verify(args, out, err) -> int:
    from . import verify

    cfg = make_config(args)
    if cfg.format == "latex":
        raise ConfigError("format: latex export covers expansions only, not reports")
    if cfg.budget is not None:
        os.environ["RTTLAB_STEP_BUDGET"] = str(cfg.budget)
    plan = build_plan(cfg, parse_params(args.param))
    reports = verify.run_suite(plan, width=cfg.width)
    timing = not args.no_timing
    if cfg.format == "json":
        payload = json.dumps([r.to_dict(timing) for r in reports], sort_keys=True, indent=1)
        if args.output:
            Path(args.output).write_text(payload + "\n", encoding="utf-8")
        else:
            out.write(payload + "\n")
    else:
        text = "\n".join(_format_report_text(r) for r in reports)
        if args.output:
            Path(args.output).write_text(text + "\n", encoding="utf-8")
        else:
            out.write(text + "\n")
    failed = [(n, r) for n, r in enumerate(reports) if r.verdict == "fail"]
    where = args.output or "stdout"
    for n, r in failed:
        err.write(f"FAIL {r.id} {json.dumps(r.to_dict(False)['params'], sort_keys=True)}: "
                  f"report #{n} in {where}\n")
    skipped = sum(r.verdict == "skipped" for r in reports)
    err.write(f"{len(reports) - len(failed) - skipped} passed, {len(failed)} failed, {skipped} skipped\n")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# expand


def _int_list(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {s!r}") from None


def expand_poly(what: str, algebra: str, N: int, K: int | None = None, matrix: str | None = None,
                rows: Sequence[int] | None = None, cols: Sequence[int] | None = None,
                qinv: bool = False):
    """The requested determinant or minor as an NCPoly in normal form."""
    from . import algebras as alg
    from .minors import qdet, quantum_minor, sdet, sklyanin_minor

    if what not in ("qdet", "sdet", "minor"):
        raise ConfigError(f"what: expected qdet, sdet or minor, got {what!r}")
    twisted = algebra in ("o", "sp")
    if what == "sdet" and not twisted:
        raise ConfigError("algebra: sdet needs algebra o or sp")
    if what == "qdet" and twisted:
        raise ConfigError("algebra: qdet needs algebra gl or affine")
    kind = _RTT_KIND[algebra]
    if kind in ("uqgl",):
        P = alg.build(kind, N)
    else:
        P = alg.build(kind, N, 2 if K is None else K)
    if twisted:
        if matrix not in (None, "S"):
            raise ConfigError(f"matrix: only S exists for algebra {algebra}")
        M = alg.gen_matrix(P, "S")
    else:
        name = matrix or ("Lplus" if algebra == "gl" else "Lminus")
        if name not in ("Lplus", "Lminus"):
            raise ConfigError(f"matrix: expected Lplus or Lminus, got {name!r}")
        M = alg.gen_matrix(P, name)
    if what == "qdet":
        return qdet(M, qinv=qinv).nf()
    if what == "sdet":
        return sdet(M, qinv=qinv).nf()
    rows = tuple(rows or range(1, N + 1))
    cols = tuple(cols or rows)
    if len(rows) != len(cols) or not all(1 <= x <= N for x in rows + cols):
        raise ConfigError(f"rows/cols: need equal-length index lists in 1..{N}")
    if twisted:
        return sklyanin_minor(M, rows, cols, qinv=qinv).nf()
    return quantum_minor(M, rows, cols, qinv=qinv).nf()


def poly_terms(p) -> list[list]:
    """[[degree, word, coefficient string], ...] with words as space-separated names."""
    return [[d, " ".join(p.word_names(w)) or "1", str(c)] for (d, w), c in p.sorted_terms()]


def poly_from_terms(pres, terms: Sequence[Sequence], window=None):
    """Inverse of poly_terms over pres; the result is reduced to normal form."""
    from .ncalg import NCPoly

    index = {g.name(): r for r, g in enumerate(pres.gens)}
    acc = {}
    for d, word, coeff in terms:
        try:
            w = () if word == "1" else tuple(index[x] for x in word.split())
        except KeyError as e:
            raise ValueError(f"unknown generator {e.args[0]!r}") from None
        key = (int(d), w)
        acc[key] = acc.get(key, RatQ(0)) + parse_ratq(coeff)
    return NCPoly(pres, acc, window).nf()


_GEN = re.compile(r"^(l\+|l-|s)(\d)(\d)\((\d+)\)(\^-1)?$")


def _latex_gen(name: str) -> str:
    m = _GEN.match(name)
    if not m:
        return name
    fam, i, j, r, inv = m.groups()
    base = {"l+": "\\ell^{+}", "l-": "\\ell^{-}", "s": "s"}[fam]
    body = f"{base}_{{{i}{j}}}[{r}]"
    return f"({body})^{{-1}}" if inv else body


def _latex_laurent(s: str) -> str:
    return re.sub(r"q\^(-?\d+)", r"q^{\1}", s).replace("*", "")


def latex_coeff(s: str) -> str:
    """LaTeX for a canonical coefficient string."""
    if "w*(" in s:
        head, _, tail = s.partition("w*(")
        head = head.strip().rstrip("+").strip()
        w = f"(-q)^{{1/2}}\\left({latex_coeff(tail[:-1])}\\right)"
        return f"{latex_coeff(head)} + {w}" if head else w
    if s.startswith("(") and ")/(" in s:
        num, den = s[1:-1].split(")/(")
        return f"\\frac{{{_latex_laurent(num)}}}{{{_latex_laurent(den)}}}"
    return _latex_laurent(s)


def poly_latex(p) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for (d, w), c in p.sorted_terms():
        coeff = latex_coeff(str(c))
        if len(p.terms) > 1 and (" + " in coeff or " - " in coeff):
            coeff = f"\\left({coeff}\\right)"
        mono = " ".join(_latex_gen(x) for x in p.word_names(w))
        u = "" if d == 0 else f"u^{{{d}}}"
        body = " ".join(x for x in (mono, u) if x)
        if not body:
            parts.append(coeff)
        elif coeff == "1":
            parts.append(body)
        elif coeff == "-1":
            parts.append(f"-{body}")
        else:
            parts.append(f"{coeff}\\, {body}")
    return " + ".join(parts).replace("+ -", "- ")


def poly_text(p) -> str:
    """Plain text, one term per line; a constant polynomial prints as its coefficient."""
    if p.is_zero():
        return "0"
    lines = []
    for d, word, c in poly_terms(p):
        mono = "*".join(x for x in (word.replace(" ", "*") if word != "1" else "", "" if d == 0 else f"u^{d}") if x)
        lines.append(c if not mono else f"({c})*{mono}")
    return "\n".join(lines)


def cmd_expand(args, out, err) -> int:
    cfg = make_config(args, format="text")
    if cfg.algebra is None or cfg.N is None:
        raise ConfigError("expand needs --algebra and --N")
    rows = _int_list(args.rows) if args.rows else None
    cols = _int_list(args.cols) if args.cols else None
    p = expand_poly(args.what, cfg.algebra, cfg.N, cfg.K, args.matrix, rows, cols, args.qinv)
    if cfg.format == "json":
        doc = {"what": args.what, "algebra": cfg.algebra, "N": cfg.N, "K": cfg.K,
               "matrix": args.matrix, "rows": list(rows) if rows else None,
               "cols": list(cols) if cols else None, "qinv": args.qinv,
               "window": list(p.window) if p.window is not None else None, "terms": poly_terms(p)}
        out.write(json.dumps(doc, sort_keys=True) + "\n")
    elif cfg.format == "latex":
        out.write(poly_latex(p) + "\n")
    else:
        out.write(poly_text(p) + "\n")
    return 0


# ---------------------------------------------------------------------------
# pi-map, list, dump-rmatrix


def cmd_pi_map(args, out, err) -> int:
    from .minors import pi_map

    perm = _int_list(args.perm)
    N = args.N or len(perm)
    if len(perm) != N:
        raise ConfigError(f"perm: expected {N} entries, got {len(perm)}")
    try:
        image = pi_map(perm, N, identity_base=not args.no_identity_base)
    except ValueError as e:
        raise ConfigError(f"perm: {e}") from None
    out.write(",".join(map(str, image)) + "\n")
    return 0


def cmd_list(args, out, err) -> int:
    from . import verify

    rows = []
    for id_, ident in verify.REGISTRY.items():
        rows.append({"id": id_, "group": ident.group, "anchor": ident.anchor,
                     "defaults": verify._jsonable(ident.defaults),
                     "status": "out of scope" if ident.check is None else "implemented"})
    if args.format == "json":
        out.write(json.dumps(rows, sort_keys=True, indent=1) + "\n")
    else:
        width = max(len(r["id"]) for r in rows)
        for r in rows:
            mark = "" if r["status"] == "implemented" else "  (out of scope)"
            out.write(f"{r['id']:<{width}}  {r['group']:<7} {r['anchor']}{mark}\n")
    return 0


def rmatrix(kind: str, N: int, m: int = 2, c: int = 0, d: int = 1, K: int = 2):
    from .tensor import fused_projector, make_const, make_spectral

    if kind in ("antisym", "sym"):
        return fused_projector(kind, N, m)
    if kind in ("Ruv", "Rt_uv", "Rprime", "Rbar_x", "Rtilde_x"):
        window = (-K * abs(d), 0) if d <= 0 else (0, K * d)
        return make_spectral(kind, N, (c, d), window)
    return make_const(kind, N)


def _value_json(v):
    if isinstance(v, GradedCoeff):
        return [[deg, str(x)] for deg, x in sorted(v.terms.items())]
    return str(v)


def cmd_dump_rmatrix(args, out, err) -> int:
    N = args.N or 2
    try:
        op = rmatrix(args.kind, N, args.m, args.c, args.d, args.K if args.K is not None else 2)
    except ValueError as e:
        raise ConfigError(f"kind: {e}") from None
    entries = [[list(r), list(c), _value_json(v)] for r, c, v in op.items()]
    if args.format == "json":
        doc = {"kind": args.kind, "N": N, "m": op.m, "entries": entries}
        out.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        for r, c, v in entries:
            val = v if isinstance(v, str) else " + ".join(f"({x})*u^{deg}" for deg, x in v)
            out.write(f"{','.join(map(str, r))} {','.join(map(str, c))} {val}\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _common(sp: argparse.ArgumentParser, formats=FORMATS):
    sp.add_argument("--algebra", choices=ALGEBRAS)
    sp.add_argument("--N", type=int)
    sp.add_argument("--K", type=int)
    sp.add_argument("--format", choices=formats)
    sp.add_argument("--config", help="flat key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rttlab", description="exact checks for RTT and reflection algebras")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification plan")
    _common(v)
    v.add_argument("--plan", help="default, full, or comma-separated id globs")
    v.add_argument("--width", type=int, help="number of checks run concurrently")
    v.add_argument("--budget", type=int, help="rewriting step budget")
    v.add_argument("--output", help="write reports here instead of stdout")
    v.add_argument("--no-timing", action="store_true", help="omit steps and millis from reports")
    v.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="extra check parameter, applied where a check takes it (repeatable)")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("expand", help="expand a determinant or minor into generators")
    _common(e)
    e.add_argument("--what", required=True, choices=("qdet", "sdet", "minor"))
    e.add_argument("--matrix", choices=("Lplus", "Lminus", "S"))
    e.add_argument("--rows", help="row indices, comma-separated (minor)")
    e.add_argument("--cols", help="column indices, comma-separated (minor)")
    e.add_argument("--qinv", action="store_true", help="use the q -> q^-1 variant")
    e.set_defaults(func=cmd_expand)

    p = sub.add_parser("pi-map", help="image of a permutation under the pairing map")
    p.add_argument("--N", type=int)
    p.add_argument("--perm", required=True, help="permutation in one-line notation, e.g. 2,1")
    p.add_argument("--no-identity-base", action="store_true",
                   help="apply the pairing recipe at N = 2 as well")
    p.set_defaults(func=cmd_pi_map)

    ls = sub.add_parser("list", help="registered identities")
    ls.add_argument("--format", choices=("json", "text"), default="text")
    ls.set_defaults(func=cmd_list)

    d = sub.add_parser("dump-rmatrix", help="sparse entries of a constant or spectral matrix")
    d.add_argument("--kind", required=True,
                   help="P, Q, Pq, D, C, G, R, Rinv, PRinvP, Ruv, Rt_uv, Rprime, Rbar_x, Rtilde_x, antisym, sym")
    d.add_argument("--N", type=int)
    d.add_argument("--m", type=int, default=2, help="tensor power for antisym and sym")
    d.add_argument("--c", type=int, default=0, help="spectral argument q^c u^d")
    d.add_argument("--d", type=int, default=1)
    d.add_argument("--K", type=int, help="truncation order of spectral coefficients")
    d.add_argument("--format", choices=("json", "text"), default="json")
    d.set_defaults(func=cmd_dump_rmatrix)
    return ap


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args, out, err)
    except ConfigError as e:
        err.write(f"rttlab {args.command}: {e}\n")
        err.write(parser.format_usage())
        return 2
    except OSError as e:
        err.write(f"rttlab {args.command}: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
