"""Config-driven command line front end.

Config files are flat and sectioned::

    # comment
    [group]
    family = inverse_matrix_exponential
    B = [[1, 1], [-1, 0]]

Values are plain text; matrices are nested row lists; expression lists are
separated by ``;`` inside brackets or at top level.  Reports carry no
timestamps, so identical config and seed give byte-identical JSON.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import fields as fl
from . import group as grp
from . import kolmogorov as kol
from . import liouville as lv
from . import meanvalue as mv
from . import operator as op
from . import symbolic as sym
from .symbolic import ExprError, Sampler, VarSet

SCHEMA = "hypolie-report/1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message, self.line, self.column = message, line, column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"config error: {where}{message}")


# ---------------------------------------------------------------------------
# config parsing


@dataclass
class Entry:
    value: str
    line: int
    column: int


@dataclass
class Config:
    sections: dict[str, dict[str, Entry]] = field(default_factory=dict)
    text: str = ""

    def has(self, section: str) -> bool:
        return section in self.sections

    def section(self, name: str) -> dict[str, Entry]:
        if name not in self.sections:
            raise ConfigError(f"missing section [{name}]")
        return self.sections[name]

    def get(self, section: str, key: str, default: str | None = None, required: bool = False) -> Entry | None:
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        if required:
            raise ConfigError(f"missing key {key!r} in section [{section}]")
        return None if default is None else Entry(default, 0, 0)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


_SECTION = re.compile(r"^\[\s*([A-Za-z_][\w.-]*)\s*\]\s*$")
_KEY = re.compile(r"^([A-Za-z_][\w.-]*)\s*=\s*")


def parse_config(text: str) -> Config:
    cfg = Config(text=text)
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.lstrip()
        if not stripped:
            continue
        indent = len(line) - len(stripped)
        m = _SECTION.match(stripped)
        if m:
            current = m.group(1)
            if current in cfg.sections:
                raise ConfigError(f"duplicate section [{current}]", lineno, indent + 1)
            cfg.sections[current] = {}
            continue
        if stripped.startswith("["):
            raise ConfigError("malformed section header", lineno, indent + 1)
        m = _KEY.match(stripped)
        if not m:
            raise ConfigError("expected 'key = value'", lineno, indent + 1)
        if current is None:
            raise ConfigError("key outside of any section", lineno, indent + 1)
        key = m.group(1)
        if key in cfg.sections[current]:
            raise ConfigError(f"duplicate key {key!r}", lineno, indent + 1)
        value = stripped[m.end():].strip()
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno, indent + m.end() + 1)
        cfg.sections[current][key] = Entry(value, lineno, indent + m.end() + 1)
    return cfg


def split_list(entry: Entry) -> list:
    """Parse a bracketed literal into nested lists of stripped strings."""
    s = entry.value
    pos = 0

    def err(msg, at):
        raise ConfigError(msg, entry.line, entry.column + at)

    def item(depth):
        nonlocal pos
        while pos < len(s) and s[pos] == " ":
            pos += 1
        if pos < len(s) and s[pos] == "[":
            pos += 1
            out = []
            while True:
                while pos < len(s) and s[pos] == " ":
                    pos += 1
                if pos < len(s) and s[pos] == "]" and not out:
                    pos += 1
                    return out
                out.append(item(depth + 1))
                while pos < len(s) and s[pos] == " ":
                    pos += 1
                if pos >= len(s):
                    err("unterminated list", pos)
                if s[pos] in ",;":
                    pos += 1
                elif s[pos] == "]":
                    pos += 1
                    return out
                else:
                    err(f"unexpected {s[pos]!r} in list", pos)
        start, level = pos, 0
        while pos < len(s):
            c = s[pos]
            if c == "(":
                level += 1
            elif c == ")":
                level -= 1
            elif level == 0 and (c in ",;]" and depth > 0):
                break
            pos += 1
        text = s[start:pos].strip()
        if not text:
            err("empty list element", start)
        return text

    value = item(0)
    while pos < len(s) and s[pos] == " ":
        pos += 1
    if pos != len(s):
        err("trailing characters after literal", pos)
    return value


def names_of(entry: Entry) -> list[str]:
    parts = [p.strip() for p in re.split(r"[;,]", entry.value)]
    if any(not p for p in parts):
        raise ConfigError("empty name in list", entry.line, entry.column)
    return parts


def numbers_of(entry: Entry) -> list[float]:
    try:
        return [float(Fraction(p)) for p in names_of(entry)]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"expected a list of numbers, got {entry.value!r}", entry.line, entry.column) from None


def rational_matrix(entry: Entry) -> list[list[Fraction]]:
    rows = split_list(entry)
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError("expected a matrix literal [[...], ...]", entry.line, entry.column)
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ConfigError("matrix must be square", entry.line, entry.column)
    try:
        return [[Fraction(c) for c in r] for r in rows]
    except (ValueError, ZeroDivisionError):
        raise ConfigError("matrix entries must be rational", entry.line, entry.column) from None


def expr_of(entry: Entry, vars, text: str | None = None) -> sym.Expr:
    try:
        return sym.parse(text if text is not None else entry.value, vars)
    except ExprError as exc:
        src = entry.value if text is None else text
        offset = max(entry.value.find(src), 0)
        col = entry.column + offset + getattr(exc, "position", 0)
        raise ConfigError(f"bad expression {text or entry.value!r}: {exc}", entry.line, col) from None


# ---------------------------------------------------------------------------
# building objects from config


def build_group(cfg: Config) -> grp.GroupLaw:
    sec = "group"
    fam = cfg.get(sec, "family", required=True)
    label = cfg.get(sec, "label", "").value
    try:
        if fam.value == "kolmogorov":
            spec = kol.KolmogorovSpec(rational_matrix(cfg.get(sec, "A", required=True)),
                                      rational_matrix(cfg.get(sec, "B", required=True)))
            return kol.group_law(spec)
        if fam.value in ("matrix_exponential", "inverse_matrix_exponential"):
            return grp.make_group(fam.value, B=rational_matrix(cfg.get(sec, "B", required=True)), label=label)
        if fam.value == "abelian":
            n = cfg.get(sec, "n", required=True)
            names = cfg.get(sec, "names")
            return grp.make_group("abelian", n=_int(n), names=names_of(names) if names else None, label=label)
        if fam.value == "custom":
            names = names_of(cfg.get(sec, "names", required=True))
            product = split_list(cfg.get(sec, "product", required=True))
            identity = split_list(cfg.get(sec, "identity", required=True))
            inv = cfg.get(sec, "inverse")
            time = cfg.get(sec, "time", "t").value
            return grp.make_group("custom", product=product, identity=[Fraction(c) for c in identity],
                                  inverse=split_list(inv) if inv else None, names=names, time=time, label=label)
    except (grp.GroupError, ExprError, kol.KolmogorovError, ValueError) as exc:
        raise ConfigError(str(exc), fam.line, fam.column) from None
    raise ConfigError(f"unknown group family {fam.value!r}", fam.line, fam.column)


def _int(entry: Entry) -> int:
    try:
        return int(entry.value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {entry.value!r}", entry.line, entry.column) from None


def _vars(cfg: Config, section: str, G: grp.GroupLaw | None) -> VarSet:
    e = cfg.get(section, "vars")
    if e is not None:
        names = names_of(e)
        time = "t" if "t" in names else None
        try:
            return VarSet(tuple(names), time)
        except ExprError as exc:
            raise ConfigError(str(exc), e.line, e.column) from None
    if G is not None:
        return G.vars
    raise ConfigError(f"section [{section}] needs 'vars' or a [group] section")


def build_fields(cfg: Config, vars: VarSet, G: grp.GroupLaw | None) -> dict[str, fl.VectorField]:
    out: dict[str, fl.VectorField] = {}
    for name in vars:
        out[f"d{name}"] = fl.VectorField.coordinate(vars, name)
    if G is not None and G.dim == len(vars):
        for f in fl.left_invariant_frame(G):
            out.setdefault(f.label, fl.VectorField(f.coeffs, vars, f.label) if G.vars.names == vars.names
                           else fl.VectorField(tuple(op._rename_positional(c, G.vars, vars) for c in f.coeffs),
                                               vars, f.label))
    for key, e in cfg.sections.get("fields", {}).items():
        coeffs = split_list(e)
        if not isinstance(coeffs, list) or len(coeffs) != len(vars) or any(isinstance(c, list) for c in coeffs):
            raise ConfigError(f"field {key} needs {len(vars)} coefficients", e.line, e.column)
        out[key] = fl.VectorField(tuple(expr_of(e, vars, c) for c in coeffs), vars, key)
    return out


def _lookup(fields: dict, entry: Entry) -> list[fl.VectorField]:
    res = []
    for name in names_of(entry):
        if name not in fields:
            raise ConfigError(f"undefined field {name!r}; known: {', '.join(sorted(fields))}", entry.line, entry.column)
        res.append(fields[name])
    return res


def build_operator(cfg: Config, G: grp.GroupLaw | None) -> op.SecondOrderOperator:
    sec = "operator"
    form = cfg.get(sec, "form", required=True)
    label = cfg.get(sec, "label", "").value
    try:
        if form.value == "heat":
            return op.heat(_int(cfg.get(sec, "n", required=True)))
        if form.value == "laplacian":
            return op.laplacian(_int(cfg.get(sec, "n", required=True)))
        if form.value == "kolmogorov":
            spec = kol.KolmogorovSpec(rational_matrix(cfg.get(sec, "A", required=True)),
                                      rational_matrix(cfg.get(sec, "B", required=True)))
            return kol.operator_of(spec)
        if form.value == "coordinate":
            vars = _vars(cfg, sec, G)
            A_e = cfg.get(sec, "A", required=True)
            b_e = cfg.get(sec, "b", required=True)
            A = split_list(A_e)
            b = split_list(b_e)
            A = [[expr_of(A_e, vars, c) for c in row] for row in A]
            b = [expr_of(b_e, vars, c) for c in b]
            return op.make_operator(A, b, vars, label)
        if form.value == "frame":
            vars = _vars(cfg, sec, G)
            fields = build_fields(cfg, vars, G)
            sq = _lookup(fields, cfg.get(sec, "squares", required=True))
            d_e = cfg.get(sec, "drift")
            drift = _lookup(fields, d_e) if d_e else None
            s_e = cfg.get(sec, "signs")
            w_e = cfg.get(sec, "weights")
            signs = [int(s) for s in names_of(s_e)] if s_e else None
            weights = [Fraction(w) for w in names_of(w_e)] if w_e else None
            return op.from_frame(sq, drift, signs, weights, label)
    except op.OperatorError as exc:
        raise ConfigError(str(exc), form.line, form.column) from None
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc), form.line, form.column) from None
    raise ConfigError(f"unknown operator form {form.value!r}", form.line, form.column)


def _function(cfg: Config, vars: VarSet) -> sym.Expr:
    return expr_of(cfg.get("function", "u", required=True), vars)


def _group_if_any(cfg: Config) -> grp.GroupLaw | None:
    return build_group(cfg) if cfg.has("group") else None


# ---------------------------------------------------------------------------
# reports


def _clean(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, Fraction):
        return str(x)
    return x if x is None or isinstance(x, str) else str(x)


def check(name: str, inputs: dict, results: dict, verdict: str, tolerance: Any, method: str, seed: int) -> dict:
    inputs = _clean(inputs)
    digest = hashlib.sha256(json.dumps(inputs, sort_keys=True).encode()).hexdigest()
    return {"name": name, "inputs": inputs, "inputs_digest": digest, "results": _clean(results),
            "verdict": verdict, "tolerance": _clean(tolerance), "method": method, "seed": seed}


def _pf(ok: bool) -> str:
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# subcommands


def cmd_group_check(cfg: Config, args) -> list[dict]:
    G = build_group(cfg)
    tol = args.tol if args.tol is not None else 1e-7
    sampler = Sampler(seed=args.seed)
    chk = grp.check_group(G, sampler)
    inputs = {"family": G.family, "label": G.label, "vars": list(G.vars.names),
              "product": [sym.to_str(p) for p in G.product]}
    out = [check("group axioms", inputs,
                 {"identity_residual": chk.identity_residual, "associativity_residual": chk.associativity_residual,
                  "inverse_residual": chk.inverse_residual, "inverse_method": chk.inverse_method},
                 _pf(chk.ok), {"identity": 1e-10, "associativity": 1e-8, "inverse": 1e-8},
                 "relative residuals max|a-b|/(1+|a|) on sampled points", args.seed)]
    w = grp.right_invariant_density(G, sampler)
    res = grp.right_invariance_residual(G, w, sampler)
    wl = grp.left_invariant_density(G, sampler)
    uni = grp.is_unimodular(G, sampler)
    out.append(check("right-invariant density", inputs,
                     {"density": str(w), "density_note": w.note, "invariance_residual": res,
                      "left_invariant_density": str(wl), "unimodular": uni},
                     _pf(res <= tol), tol, "w = 1/det J of y -> y.x at the identity; relative invariance residual",
                     args.seed))
    return out


def cmd_hormander(cfg: Config, args) -> list[dict]:
    G = _group_if_any(cfg)
    vars = _vars(cfg, "hormander", G)
    fields = build_fields(cfg, vars, G)
    gens = _lookup(fields, cfg.get("hormander", "generators", required=True))
    p_e = cfg.get("hormander", "point")
    try:
        point = [Fraction(c) for c in names_of(p_e)] if p_e else [Fraction(0)] * len(vars)
    except ValueError:
        raise ConfigError("point entries must be rational", p_e.line, p_e.column) from None
    if len(point) != len(vars):
        raise ConfigError(f"point needs {len(vars)} coordinates", p_e.line, p_e.column)
    depth = args.max_depth
    if depth is None and cfg.get("hormander", "max_depth"):
        depth = _int(cfg.get("hormander", "max_depth"))
    cert = fl.hormander_rank(gens, point, depth)
    shown = depth if depth is not None else len(vars) + 2
    return [check("hormander rank", {"generators": [str(g) for g in gens], "point": [str(c) for c in point],
                                     "max_depth": shown},
                  {"rank": cert.achieved_rank, "dim": cert.dim, "depth": cert.depth, "witnesses": list(cert.witnesses),
                   "ranks_by_depth": list(cert.ranks_by_depth), "exact": cert.exact, "summary": cert.summary(shown)},
                  _pf(cert.full), "full rank", "left-normed brackets, exact fraction-free rank at the point",
                  args.seed)]


def cmd_operator_check(cfg: Config, args) -> list[dict]:
    G = _group_if_any(cfg)
    L = build_operator(cfg, G)
    tol = args.tol if args.tol is not None else 1e-9
    sampler = Sampler(seed=args.seed)
    inputs = {"operator": str(L), "vars": list(L.vars.names)}
    nd = op.nd_report(L, sampler.points(L.dim))
    out = [check("non-degeneracy", inputs, {"holds": nd.holds, "n_points": nd.n_points, "note": nd.note},
                 _pf(nd.holds), 1e-12, "max |A_ij(x)| > 1e-12 at sampled points", args.seed)]
    D = op.decompose(L)
    rt = 0.0
    X = sampler.points(L.dim)
    for u in op.function_bank(L.vars):
        a = sym.evaluate_many(op.apply(L, u), X, L.vars)
        b = sym.evaluate_many(D.apply(u), X, L.vars)
        rt = max(rt, float(np.max(np.abs(a - b) / (1 + np.abs(a)))))
    out.append(check("decomposition round trip", inputs,
                     {"fields": [str(f) for f in D.nonzero_fields()], "drift": str(D.drift), "residual": rt},
                     _pf(rt <= tol), tol, "sum d_i(X_i) + X_0 with X_i the rows of A, compared with L on a function bank",
                     args.seed))
    if G is not None:
        li = op.check_left_invariance(L, G, Sampler(n=16, seed=args.seed))
        out.append(check("left invariance", dict(inputs, group=G.label),
                         {"residual": li}, _pf(li <= max(tol, 1e-9) * 1e3), max(tol, 1e-9) * 1e3,
                         "exact chain rule through the product map on a function bank", args.seed))
    return out


def cmd_kolmogorov_check(cfg: Config, args) -> list[dict]:
    a_e = cfg.get("kolmogorov", "A", required=True)
    try:
        spec = kol.KolmogorovSpec(rational_matrix(a_e), rational_matrix(cfg.get("kolmogorov", "B", required=True)))
    except kol.KolmogorovError as exc:
        raise ConfigError(str(exc), a_e.line, a_e.column) from None
    ts = cfg.get("kolmogorov", "t_samples")
    t_samples = numbers_of(ts) if ts else kol.DEFAULT_T_SAMPLES
    tol = args.tol if args.tol is not None else 1e-10
    try:
        rep = kol.hypoellipticity_check(spec, t_samples, tol)
    except kol.KolmogorovError as exc:
        raise ConfigError(str(exc), ts.line if ts else 0, ts.column if ts else 0) from None
    inputs = {"A": [[str(c) for c in r] for r in spec.A], "B": [[str(c) for c in r] for r in spec.B]}
    return [check("covariance and Kalman rank", inputs,
                  {"t_samples": list(rep.t_samples), "min_eigenvalues": list(rep.min_eigenvalues),
                   "scaled_min_eigenvalues": list(rep.scaled_min_eigenvalues), "kalman_rank": rep.kalman_rank,
                   "n": rep.n, "pd_verdict": rep.pd_verdict, "kalman_verdict": rep.kalman_verdict,
                   "weight": str(kol.weight(spec)), "operator": str(kol.operator_of(spec)),
                   "hypoelliptic": rep.verdict},
                  "pass" if rep.verdict == "pass" else "fail", tol,
                  "adaptive Gauss-Legendre covariance with unit-diagonal scaling; exact Kalman rank", args.seed)]


def _apply_like(cfg: Config, args, which: str) -> list[dict]:
    G = _group_if_any(cfg)
    L = build_operator(cfg, G)
    u = _function(cfg, L.vars)
    if which == "apply":
        r = op.apply(L, u)
        cls = op.classify(L, u, Sampler(seed=args.seed))
        res = {"Lu": sym.to_str(r), "classification": str(cls), "harmonic": cls.kind == "harmonic",
               "exact_symbolic_zero": cls.exact_zero}
        method = "symbolic differentiation"
    else:
        r = op.psi_A(L, u)
        res = {"psi": sym.to_str(r)}
        method = "symbolic <A grad u, grad u>"
    return [check(which, {"operator": str(L), "u": sym.to_str(u)}, res, "pass", None, method, args.seed)]


def cmd_represent(cfg: Config, args) -> list[dict]:
    sec = "represent"
    n = _int(cfg.get(sec, "n", required=True))
    r_e = cfg.get(sec, "r", "1/2")
    r = float(Fraction(r_e.value))
    tol = args.tol if args.tol is not None else 1e-6
    G = grp.make_group("abelian", n=n)
    L = op.laplacian(n, G.vars.names)
    mp = mv.laplacian_ball_measures(n, r)
    f_e = cfg.get(sec, "functions", required=True)
    funcs = [expr_of(f_e, G.vars, t.strip()) for t in f_e.value.split(";")]
    X = Sampler(n=8, seed=args.seed, low=-1, high=1).points(n)
    out = []
    for u in funcs:
        res = mv.representation_residual(u, L, G, mp, X)
        out.append(check(f"representation {sym.to_str(u)}", {"n": n, "r": r, "u": sym.to_str(u)},
                         {"residual": res, "mu_mass": mp.mu_mass, "nu_mass": mp.nu_mass},
                         _pf(res <= tol and abs(mp.mu_mass - 1) <= 1e-8), tol, mp.method, args.seed))
    return out


def cmd_lp_scan(cfg: Config, args) -> list[dict]:
    G = _group_if_any(cfg)
    sec = "scan"
    if G is not None:
        w = grp.right_invariant_density(G)
        vars = G.vars
    else:
        vars = _vars(cfg, sec, None)
        w_e = cfg.get(sec, "weight", "1")
        w = grp.DensityFn(expr_of(w_e, vars), vars, "configured weight")
    u = _function(cfg, vars)
    ps = numbers_of(cfg.get(sec, "p", required=True))
    radii = args.radii
    if radii is None:
        re_ = cfg.get(sec, "radii")
        radii = numbers_of(re_) if re_ else lv.DEFAULT_RADII
    out = []
    for p in ps:
        try:
            s = lv.lp_partial_scan(u, p, w, radii)
        except lv.LiouvilleError as exc:
            raise ConfigError(str(exc)) from None
        d = s.as_dict()
        out.append(check(f"lp scan p={p}", {"u": d.pop("u"), "p": p, "weight": d.pop("weight"),
                                            "radii": d.pop("radii")}, d,
                         _pf(not any(s.unreliable)), lv.UNRELIABLE, s.method, args.seed))
    return out


def cmd_demo(scenario: str, args) -> list[dict]:
    radii = tuple(args.radii) if args.radii is not None else lv.DEFAULT_RADII
    try:
        rep = lv.liouville_demonstration(scenario, radii, seed=args.seed, max_depth=args.max_depth)
    except lv.LiouvilleError as exc:
        raise ConfigError(str(exc)) from None
    verdict = rep["verdict"]
    return [check(f"demo {scenario}", {"scenario": scenario, "radii": list(radii)}, rep,
                  _pf(verdict.startswith("consistent")), {"classification": 1e-10, "unreliable": lv.UNRELIABLE},
                  "hypothesis checks, classification on samples, weighted L^p partial scans", args.seed)]


# ---------------------------------------------------------------------------
# output


def render_text(report: dict) -> str:
    lines = [f"hypolie {report['version']} | {report['command']} | config {report['config_hash'][:12]}"]

    def show(key, val, indent):
        pad = "  " * indent
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            for k, v in val.items():
                show(k, v, indent + 1)
        elif isinstance(val, list) and any(isinstance(v, (dict, list)) for v in val):
            lines.append(f"{pad}{key}:")
            for i, v in enumerate(val):
                show(f"[{i}]", v, indent + 1)
        else:
            lines.append(f"{pad}{key}: {_fmt(val)}")

    for c in report["checks"]:
        lines.append(f"[{c['name']}] {c['verdict']}")
        for k, v in c["results"].items():
            show(k, v, 1)
        lines.append(f"  tolerance: {_fmt(c['tolerance'])}")
        lines.append(f"  method: {c['method']}")
    lines.append(f"overall: {report['verdict']}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a sectioned config file")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="sampler seed (default 0)")
    common.add_argument("--tol", type=float, help="override the check tolerance")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--radii", type=_radii, help="comma-separated radii for L^p scans")
    common.add_argument("--max-depth", type=int, dest="max_depth", help="bracket depth bound")
    p = argparse.ArgumentParser(prog="hypolie", description="checks for left-invariant operators on Lie groups")
    p.add_argument("--version", action="version", version=f"hypolie {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, actions in [("group", ["check"]), ("operator", ["check"]), ("kolmogorov", ["check"]),
                          ("represent", ["verify"]), ("lp", ["scan"])]:
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("action", choices=actions)
    for name in ("hormander", "apply", "psi"):
        sub.add_parser(name, parents=[common])
    dp = sub.add_parser("demo", parents=[common])
    dp.add_argument("scenario", choices=lv.scenario_names())
    return p


def _radii(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radii list {text!r}") from None
    if not vals or any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("radii must be positive and increasing")
    return vals


COMMANDS = {
    "group": cmd_group_check,
    "hormander": cmd_hormander,
    "operator": cmd_operator_check,
    "kolmogorov": cmd_kolmogorov_check,
    "apply": lambda cfg, a: _apply_like(cfg, a, "apply"),
    "psi": lambda cfg, a: _apply_like(cfg, a, "psi"),
    "represent": cmd_represent,
    "lp": cmd_lp_scan,
}


def run(argv: Sequence[str]) -> tuple[int, dict | None, str]:
    """Execute one command; returns (exit code, report or None, rendered output)."""
    args = build_parser().parse_args(list(argv))
    name = args.command + (f" {args.action}" if hasattr(args, "action") else "")
    try:
        if args.command == "demo":
            text = ""
            if args.config:
                text = _read(args.config)
            checks = cmd_demo(args.scenario, args)
            name = f"demo {args.scenario}"
        else:
            if not args.config:
                raise ConfigError(f"{name} requires --config")
            text = _read(args.config)
            checks = COMMANDS[args.command](parse_config(text), args)
    except ConfigError as exc:
        return EXIT_CONFIG, None, str(exc) + "\n"
    ok = all(c["verdict"] == "pass" for c in checks)
    report = {"schema": SCHEMA, "version": __version__, "command": name,
              "config_hash": hashlib.sha256(text.encode()).hexdigest(), "seed": args.seed,
              "checks": checks, "verdict": _pf(ok)}
    rendered = json.dumps(report, indent=2, sort_keys=False) + "\n" if args.format == "json" else render_text(report)
    return (EXIT_OK if ok else EXIT_FAIL), report, rendered


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    code, report, rendered = run(argv)
    if report is None:
        sys.stderr.write(rendered)
        return code
    args = build_parser().parse_args(list(argv))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rendered)
    else:
        sys.stdout.write(rendered)
    return code


if __name__ == "__main__":
    sys.exit(main())
