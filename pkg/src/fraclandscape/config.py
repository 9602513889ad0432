"""Run configuration: INI parsing, field expressions, and model assembly.

A config file is a small INI document with sections [grid], [model], [fast],
[saddle], [landscape], [output] and [seed]. The order and kappa entries accept
a plain number, one of the closed set of expression families

    a+b*sin(2*pi*x)
    a+b*cos(2*pi*x)
    a+b*cos(2*pi*x)*cos(2*pi*y)

with numeric literals for a and b, or a path to a field CSV. Anything else is
rejected at parse time.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigError
from .fracop import (
    DEFAULT_EXPANSION_ORDER,
    ConstantOrder,
    VariableOrder,
    build_expansion,
    select_expansion_order,
)
from .grid import GridSpec, RealField
from .phasefield import DimerParams, ModelParams
from .saddle import SaddleConfig

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"

_EXPR_PATTERNS = [
    (
        re.compile(
            rf"^({_NUMBER})\s*([+-])\s*({_NUMBER})\*sin\(2\*pi\*x\)$"
        ),
        "sin_x",
    ),
    (
        re.compile(
            rf"^({_NUMBER})\s*([+-])\s*({_NUMBER})\*cos\(2\*pi\*x\)$"
        ),
        "cos_x",
    ),
    (
        re.compile(
            rf"^({_NUMBER})\s*([+-])\s*({_NUMBER})\*cos\(2\*pi\*x\)\*cos\(2\*pi\*y\)$"
        ),
        "cos_xy",
    ),
]


@dataclass(frozen=True)
class FieldSpec:
    """A scalar, a named expression family with (a, b), or a CSV reference."""

    kind: str  # "constant" | "sin_x" | "cos_x" | "cos_xy" | "csv"
    a: float = 0.0
    b: float = 0.0
    path: str = ""

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def realize(self, grid: GridSpec) -> Union[float, RealField]:
        if self.kind == "constant":
            return self.a
        if self.kind == "csv":
            f = RealField.from_csv(self.path)
            if f.grid != grid:
                raise ConfigError(
                    f"field file {self.path!r} does not match the configured grid"
                )
            return f
        if self.kind == "cos_xy":
            if grid.dim != 2:
                raise ConfigError("cos(2*pi*x)*cos(2*pi*y) requires a 2D grid")
            x, y = grid.coords()
            vals = self.a + self.b * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
        else:
            if grid.dim == 1:
                x = grid.coords()
            else:
                x = grid.coords()[0]
            trig = np.sin if self.kind == "sin_x" else np.cos
            vals = self.a + self.b * trig(2 * np.pi * x)
        return RealField(grid, np.broadcast_to(vals, grid.shape).copy())


def parse_field_spec(text: str) -> FieldSpec:
    text = text.strip()
    try:
        return FieldSpec("constant", a=float(text))
    except ValueError:
        pass
    compact = text.replace(" ", "")
    for pattern, kind in _EXPR_PATTERNS:
        m = pattern.match(compact)
        if m:
            a, sgn, b = m.groups()
            b_val = float(b) if sgn == "+" else -float(b)
            return FieldSpec(kind, a=float(a), b=b_val)
    if text.endswith(".csv"):
        return FieldSpec("csv", path=text)
    raise ConfigError(
        f"cannot parse field expression {text!r}: expected a number, one of the "
        "supported expression families, or a .csv path"
    )


@dataclass
class RunConfig:
    """Validated contents of one run configuration file."""

    grid: GridSpec
    order: FieldSpec
    kappa: FieldSpec
    fast_S: Optional[int] = None
    fast_m: Optional[int] = None
    saddle_k: int = 0
    tau: float = 1e-3
    sigma: float = 1e-3
    dimer_l: float = 1e-4
    resid_tol: float = 1e-8
    direction_tol: float = 1e-8
    max_iters: int = 1_000_000
    epsilon: float = 0.1
    branch_budget: int = 64
    node_budget: int = 512
    symmetries: Optional[Tuple[bool, bool]] = None
    target_indices: Optional[Tuple[int, ...]] = None
    output_dir: str = "."
    log_stride: int = 0
    rng_seed: int = 0

    def saddle_config(self, k: Optional[int] = None) -> SaddleConfig:
        return SaddleConfig(
            k=self.saddle_k if k is None else k,
            tau=self.tau,
            sigma=self.sigma,
            dimer=DimerParams(self.dimer_l),
            max_iters=self.max_iters,
            resid_tol=self.resid_tol,
            direction_tol=self.direction_tol,
        )

    def model(self) -> ModelParams:
        """Assemble ModelParams, building the expansion plan when needed."""
        order = self.order.realize(self.grid)
        kappa = self.kappa.realize(self.grid)
        if isinstance(order, RealField):
            order_spec = VariableOrder(order)
            if not isinstance(kappa, (int, float)):
                raise ConfigError(
                    "variable order and variable kappa cannot be combined"
                )
            S = self.fast_S
            if S is None:
                S = (
                    select_expansion_order(self.fast_m, self.grid)
                    if self.fast_m is not None
                    else DEFAULT_EXPANSION_ORDER
                )
            plan = build_expansion(self.grid, S)
            return ModelParams(self.grid, order_spec, float(kappa), fast_plan=plan)
        order_spec = ConstantOrder(float(order))
        if isinstance(kappa, RealField):
            return ModelParams(self.grid, order_spec, kappa)
        return ModelParams(self.grid, order_spec, float(kappa))


def _get(parser, section, key, fallback=None):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return fallback


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file unreadable: {path}")
    known = {"grid", "model", "fast", "saddle", "landscape", "output", "seed"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if not parser.has_section("grid"):
        raise ConfigError("config requires a [grid] section with dim and N")
    try:
        dim = parser.getint("grid", "dim")
        N = parser.getint("grid", "N")
    except (configparser.NoOptionError, ValueError) as exc:
        raise ConfigError(f"invalid [grid] section: {exc}") from exc
    try:
        grid = GridSpec(dim, N)
    except Exception as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc

    order = parse_field_spec(_get(parser, "model", "order", "2.0") or "2.0")
    kappa = parse_field_spec(_get(parser, "model", "kappa", "0.02") or "0.02")

    cfg = RunConfig(grid=grid, order=order, kappa=kappa)

    def fetch(section, key, cast, attr):
        raw = _get(parser, section, key)
        if raw is not None:
            try:
                setattr(cfg, attr, cast(raw))
            except ValueError as exc:
                raise ConfigError(f"invalid [{section}] {key}={raw!r}") from exc

    fetch("fast", "s", int, "fast_S")
    fetch("fast", "m", int, "fast_m")
    fetch("saddle", "k", int, "saddle_k")
    fetch("saddle", "tau", float, "tau")
    fetch("saddle", "sigma", float, "sigma")
    fetch("saddle", "l", float, "dimer_l")
    fetch("saddle", "residtol", float, "resid_tol")
    fetch("saddle", "directiontol", float, "direction_tol")
    fetch("saddle", "maxiters", lambda s: int(float(s)), "max_iters")
    fetch("landscape", "epsilon", float, "epsilon")
    fetch("landscape", "branchbudget", int, "branch_budget")
    fetch("landscape", "nodebudget", int, "node_budget")
    fetch("output", "logstride", int, "log_stride")
    fetch("seed", "rngseed", int, "rng_seed")
    raw_dir = _get(parser, "output", "directory")
    if raw_dir is not None:
        cfg.output_dir = raw_dir
    raw_sym = _get(parser, "landscape", "symmetries")
    if raw_sym is not None:
        val = raw_sym.strip().lower()
        if val in ("on", "true", "1", "yes"):
            cfg.symmetries = (True, True)
        elif val in ("off", "false", "0", "no"):
            cfg.symmetries = (False, False)
        elif val == "auto":
            cfg.symmetries = None
        else:
            raise ConfigError(
                f"invalid [landscape] symmetries={raw_sym!r}: use on/off/auto"
            )
    raw_targets = _get(parser, "landscape", "targetindices")
    if raw_targets is not None:
        try:
            cfg.target_indices = tuple(
                int(tok) for tok in raw_targets.replace(",", " ").split()
            )
        except ValueError as exc:
            raise ConfigError(
                f"invalid [landscape] targetindices={raw_targets!r}"
            ) from exc

    # range validation beyond what the library dataclasses enforce
    if cfg.fast_S is not None and cfg.fast_S < 0:
        raise ConfigError("[fast] S must be nonnegative")
    if cfg.fast_m is not None and cfg.fast_m < 1:
        raise ConfigError("[fast] m must be a positive integer")
    if cfg.max_iters < 1:
        raise ConfigError("[saddle] maxIters must be at least 1")
    if cfg.log_stride < 0:
        raise ConfigError("[output] logStride must be nonnegative")
    for name in ("tau", "sigma", "dimer_l", "resid_tol", "direction_tol", "epsilon"):
        if getattr(cfg, name) <= 0.0:
            raise ConfigError(f"{name} must be positive")
    if cfg.branch_budget < 1 or cfg.node_budget < 1:
        raise ConfigError("[landscape] budgets must be positive")
    return cfg
