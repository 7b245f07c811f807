"""Experiment configuration files (TOML).

Schema (unknown keys are errors)::

    experiment = "decay-fit"      # optional; must match the CLI experiment
    seed = 0
    output_dir = "out"

    [particles]                   # required
    N = 4
    d = 1
    K = 2
    Z = 1.0
    kappa = 0.5

    [model]
    nuclear_jastrow = true
    pair_jastrow = true
    symmetric = false             # symmetrize the core over particle permutations
    width = 1.2                   # single centred bump, used when no [[model.bumps]]
    coupling = 0.3                # inter-particle correlation of the core
    energy = -2.9                 # metadata only

    [[model.bumps]]               # optional list of Gaussian bumps
    center = [0.0, 0.5, ...]      # N*d numbers
    width = 1.0                   # scalar or N*d numbers
    amplitude = 1.0
    amplitude_imag = 0.0

    [grid]
    points_per_axis = 24
    box = 3.0                     # or: eps = 1e-8 (box from the truncation radius)
    rule = "midpoint"             # or "gauss_legendre"
    refinement = [20, 24]         # decay-fit grid series, coarse to fine
    budget = 16777216

    [decay_fit]
    window = [5, 50]
    drift_tolerance = 0.1

    [besov_scan]
    s_values = [1.0, 2.0, 2.5, 3.0, 3.5]
    cells = 4
    points_per_axis = 0           # 0: automatic by dimension
    tolerance = 0.25

    [multiplier_scan]
    q = 0.9
    probes = 64
    cells = 5
    points_per_axis = 6
    bound = 2.0

    [duality_check]
    rtol = 1e-10
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .grid import DEFAULT_BUDGET, RULES, truncation_radius
from .model import GaussianCore, ParticleConfig, WavefunctionModel

EXPERIMENTS = ("factorize-check", "rdm-spectrum", "decay-fit", "besov-scan", "multiplier-scan", "duality-check")

_TOP = {"experiment", "seed", "output_dir", "particles", "model", "grid",
        "decay_fit", "besov_scan", "multiplier_scan", "duality_check"}
_SECTIONS = {
    "particles": {"N": int, "d": int, "K": int, "Z": float, "kappa": float},
    "model": {"nuclear_jastrow": bool, "pair_jastrow": bool, "symmetric": bool, "width": float,
              "coupling": float, "energy": float, "bumps": list},
    "grid": {"points_per_axis": int, "box": float, "eps": float, "rule": str, "refinement": list, "budget": int},
    "decay_fit": {"window": list, "drift_tolerance": float},
    "besov_scan": {"s_values": list, "cells": int, "points_per_axis": int, "tolerance": float},
    "multiplier_scan": {"q": float, "probes": int, "cells": int, "points_per_axis": int, "bound": float},
    "duality_check": {"rtol": float},
}
_BUMP = {"center": list, "width": object, "amplitude": float, "amplitude_imag": float}


@dataclass
class GridSpec:
    points_per_axis: int = 24
    box: float = 3.0
    rule: str = "midpoint"
    refinement: list = field(default_factory=list)
    budget: int = DEFAULT_BUDGET


@dataclass
class ExperimentConfig:
    """Validated experiment description."""

    particles: ParticleConfig
    model: WavefunctionModel
    grid: GridSpec
    experiment: str | None = None
    output_dir: str = "out"
    seed: int = 0
    decay_fit: dict = field(default_factory=dict)
    besov_scan: dict = field(default_factory=dict)
    multiplier_scan: dict = field(default_factory=dict)
    duality_check: dict = field(default_factory=dict)


class _Locator:
    def __init__(self, text):
        self.lines = text.splitlines()

    def find(self, path):
        """Best-effort line number of a dotted field path."""
        parts = path.split(".")
        key = parts[-1]
        table = ".".join(parts[:-1])
        current = ""
        for i, line in enumerate(self.lines, start=1):
            s = line.strip()
            m = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?", s)
            if m:
                current = m.group(1)
                if current == path:
                    return i
                continue
            if current == table and re.match(rf"^{re.escape(key)}\s*=", s):
                return i
        return None


def _coerce(value, typ, path, loc):
    def fail(expected):
        raise ConfigError(f"expected {expected}, got {value!r}", path, loc.find(path))

    if typ is bool:
        if not isinstance(value, bool):
            fail("a boolean")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            fail("a string")
        return value
    if typ is list:
        if not isinstance(value, list):
            fail("an array")
        return value
    return value


def _section(doc, name, loc):
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError("expected a table", name, loc.find(name))
    schema = _SECTIONS[name]
    out = {}
    for k, v in raw.items():
        path = f"{name}.{k}"
        if k not in schema:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(schema))})", path, loc.find(path))
        out[k] = _coerce(v, schema[k], path, loc)
    return out


def _numbers(values, path, loc, length=None):
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise ConfigError("expected an array of numbers", path, loc.find(path))
    if length is not None and len(values) != length:
        raise ConfigError(f"expected {length} numbers, got {len(values)}", path, loc.find(path))
    return [float(v) for v in values]


def _build_core(m, pc, loc):
    N, d = pc.N, pc.d
    coupling = m.get("coupling", 0.3)
    if coupling < 0:
        raise ConfigError("must be nonnegative", "model.coupling", loc.find("model.coupling"))
    bumps = m.get("bumps")
    if not bumps:
        width = m.get("width", 1.2)
        if not width > 0:
            raise ConfigError("must be positive", "model.width", loc.find("model.width"))
        core = GaussianCore.single(N, d, width, coupling)
    else:
        centers, widths, amps = [], [], []
        for i, b in enumerate(bumps):
            base = f"model.bumps.{i}"
            if not isinstance(b, dict):
                raise ConfigError("expected a table", base, loc.find("model.bumps"))
            for k in b:
                if k not in _BUMP:
                    raise ConfigError(f"unknown key (allowed: {', '.join(sorted(_BUMP))})",
                                      f"{base}.{k}", loc.find(f"model.bumps.{k}"))
            centers.append(_numbers(b.get("center", [0.0] * (N * d)), f"{base}.center", loc, N * d))
            w = b.get("width", 1.0)
            w = _numbers(w, f"{base}.width", loc, N * d) if isinstance(w, list) else [_coerce(w, float, f"{base}.width", loc)] * (N * d)
            if min(w) <= 0:
                raise ConfigError("widths must be positive", f"{base}.width", loc.find("model.bumps.width"))
            widths.append(w)
            re_ = _coerce(b.get("amplitude", 1.0), float, f"{base}.amplitude", loc)
            im_ = _coerce(b.get("amplitude_imag", 0.0), float, f"{base}.amplitude_imag", loc)
            amps.append(complex(re_, im_) if im_ else re_)
        amps = np.array(amps, dtype=complex if any(isinstance(a, complex) for a in amps) else float)
        core = GaussianCore(np.reshape(centers, (-1, N, d)), np.reshape(widths, (-1, N, d)), amps, coupling)
    if m.get("symmetric", False):
        core = core.symmetrized()
    return core


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse and validate a TOML experiment description.

    Raises
    ------
    ConfigError
        With the offending field path and line number where possible.
    """
    loc = _Locator(text)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", "", int(m.group(1)) if m else None) from None
    for k in doc:
        if k not in _TOP:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(_TOP))})", k, loc.find(k))

    exp = doc.get("experiment")
    if exp is not None:
        exp = _coerce(exp, str, "experiment", loc)
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment (allowed: {', '.join(EXPERIMENTS)})", "experiment", loc.find("experiment"))
        if experiment is not None and experiment != exp:
            raise ConfigError(f"config is for '{exp}' but '{experiment}' was requested", "experiment", loc.find("experiment"))
    exp = experiment or exp

    if "particles" not in doc:
        raise ConfigError("missing required table", "particles")
    p = _section(doc, "particles", loc)
    for key in ("N", "d", "K"):
        if key not in p:
            raise ConfigError("missing required key", f"particles.{key}", loc.find("particles"))
    try:
        pc = ParticleConfig(p["N"], p["d"], p["K"], p.get("Z", 1.0), p.get("kappa", 0.5))
    except ValueError as exc:
        bad = next((k for k in ("N", "d", "K", "Z", "kappa") if str(exc).startswith(k)), "N")
        raise ConfigError(str(exc), f"particles.{bad}", loc.find(f"particles.{bad}")) from None

    m = _section(doc, "model", loc)
    core = _build_core(m, pc, loc)
    model = WavefunctionModel(pc, core, m.get("nuclear_jastrow", True), m.get("pair_jastrow", True), m.get("energy"))

    g = _section(doc, "grid", loc)
    if "box" in g and "eps" in g:
        raise ConfigError("give either box or eps, not both", "grid.eps", loc.find("grid.eps"))
    if "eps" in g:
        try:
            box = truncation_radius(pc.kappa, g["eps"])
        except ValueError as exc:
            raise ConfigError(str(exc), "grid.eps", loc.find("grid.eps")) from None
    else:
        box = g.get("box", 3.0)
    if not box > 0:
        raise ConfigError("must be positive", "grid.box", loc.find("grid.box"))
    rule = g.get("rule", "midpoint")
    if rule not in RULES:
        raise ConfigError(f"unknown rule (allowed: {', '.join(RULES)})", "grid.rule", loc.find("grid.rule"))
    ppa = g.get("points_per_axis", 24)
    if ppa < 2:
        raise ConfigError("must be >= 2", "grid.points_per_axis", loc.find("grid.points_per_axis"))
    refinement = g.get("refinement", [])
    if any(isinstance(v, bool) or not isinstance(v, int) or v < 2 for v in refinement):
        raise ConfigError("expected integers >= 2", "grid.refinement", loc.find("grid.refinement"))
    grid = GridSpec(ppa, float(box), rule, list(refinement), g.get("budget", DEFAULT_BUDGET))

    seed = doc.get("seed", 0)
    seed = _coerce(seed, int, "seed", loc)
    out = _coerce(doc.get("output_dir", "out"), str, "output_dir", loc)

    df = _section(doc, "decay_fit", loc)
    if "window" in df:
        w = df["window"]
        if len(w) != 2 or any(isinstance(v, bool) or not isinstance(v, int) for v in w) or not 1 <= w[0] < w[1]:
            raise ConfigError("expected [n_lo, n_hi] with 1 <= n_lo < n_hi", "decay_fit.window", loc.find("decay_fit.window"))
        df["window"] = tuple(w)
    bs = _section(doc, "besov_scan", loc)
    if "s_values" in bs:
        bs["s_values"] = _numbers(bs["s_values"], "besov_scan.s_values", loc)
        if any(s <= 0 for s in bs["s_values"]):
            raise ConfigError("smoothness values must be positive", "besov_scan.s_values", loc.find("besov_scan.s_values"))
    ms = _section(doc, "multiplier_scan", loc)
    if "q" in ms and not 0.75 < ms["q"] < 2:
        raise ConfigError("q must lie in (3/4, 2)", "multiplier_scan.q", loc.find("multiplier_scan.q"))
    dc = _section(doc, "duality_check", loc)

    return ExperimentConfig(pc, model, grid, exp, out, seed, df, bs, ms, dc)


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    return parse_config(text, experiment)


def default_text(N=4, d=1, K=2, points_per_axis=24, box=3.0, experiment=None, **model) -> str:
    """Small TOML document used by tests and the README examples."""
    lines = []
    if experiment:
        lines.append(f'experiment = "{experiment}"')
    lines += ["seed = 0", "", "[particles]", f"N = {N}", f"d = {d}", f"K = {K}", "Z = 1.0", "kappa = 0.5", "", "[model]"]
    for k, v in model.items():
        lines.append(f"{k} = {str(v).lower() if isinstance(v, bool) else v}")
    lines += ["", "[grid]", f"points_per_axis = {points_per_axis}", f"box = {box}"]
    return "\n".join(lines) + "\n"

