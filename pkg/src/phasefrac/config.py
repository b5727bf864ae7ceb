"""Flat key/value scenario files.

The format is one ``key = value`` pair per line, keys in dotted sections,
``#`` comments, values as plain scalars or space-separated lists.  Loading
keeps the raw text of every value, so load -> dump -> load is the
identity; typed accessors validate on demand and report the offending
key.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .density import BulkDensity, HookeTensor
from .energy import EpsParams, PsiSpec
from .fields import PolyField
from .grid import Grid, face_names
from .limits import JumpTemplate
from .operators import (FirstOrderOperator, classify_ellipticity,
                        operator_from_matrix, operator_from_name)
from .solve import SolverConfig

__all__ = ["ConfigError", "Scenario", "parse_config", "dump_config",
           "load_scenario", "scenario_from_text"]


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


def parse_config(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        out[key] = value.strip()
    return out


def dump_config(cfg: Dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.items())


def config_hash(cfg: Dict[str, str]) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:12]


class _Reader:
    def __init__(self, cfg: Dict[str, str]):
        self.cfg = cfg

    def has(self, key):
        return key in self.cfg

    def str(self, key, default=None):
        if key not in self.cfg:
            if default is None:
                raise ConfigError(key, "missing required key")
            return default
        return self.cfg[key]

    def float(self, key, default=None):
        raw = self.str(key, default if default is None else repr(default))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(key, f"not a number: {raw!r}") from None

    def int(self, key, default=None):
        raw = self.str(key, default if default is None else repr(default))
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(key, f"not an integer: {raw!r}") from None

    def floats(self, key, default=None):
        raw = self.str(key, default)
        try:
            return [float(tok) for tok in raw.split()]
        except ValueError:
            raise ConfigError(key, f"not a number list: {raw!r}") from None

    def strs(self, key, default=None):
        return self.str(key, default).split()

    def flag(self, key, default="off"):
        raw = self.str(key, default).lower()
        if raw in ("on", "true", "yes", "1"):
            return True
        if raw in ("off", "false", "no", "0"):
            return False
        raise ConfigError(key, f"expected on/off, got {raw!r}")


def _poly_from(reader: _Reader, prefix: str, dim: int) -> PolyField:
    const = reader.floats(f"{prefix}.const", " ".join(["0"] * dim))
    linear = reader.floats(f"{prefix}.linear", " ".join(["0"] * dim * dim))
    quad = reader.floats(f"{prefix}.quad", " ".join(["0"] * dim ** 3))
    if len(const) != dim:
        raise ConfigError(f"{prefix}.const", f"need {dim} entries")
    if len(linear) != dim * dim:
        raise ConfigError(f"{prefix}.linear", f"need {dim * dim} entries (row-major)")
    if len(quad) != dim ** 3:
        raise ConfigError(f"{prefix}.quad", f"need {dim ** 3} entries (row-major)")
    return PolyField(dim, const=np.array(const),
                     linear=np.array(linear).reshape(dim, dim),
                     quad=np.array(quad).reshape(dim, dim, dim))


@dataclass
class Scenario:
    """Validated experiment description; raw keys kept for round trips."""

    raw: Dict[str, str]
    dim: int
    extents: Tuple[float, ...]
    operator: FirstOrderOperator
    density: BulkDensity
    psi: PsiSpec
    gamma: float
    q: float
    eps_list: List[float]
    eta_rule: Callable[[float], float]
    grid_spec: Tuple
    dirichlet_faces: List[str]
    dirichlet_v_faces: List[str]
    u0: PolyField
    solver: SolverConfig
    notch: bool
    predict: str
    template: Optional[JumpTemplate]
    limsup_factor: int
    limsup_taper: Optional[float]
    limsup_max_cells: int
    output_csv: Optional[str]
    output_snapshot: Optional[str]

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def params_for(self, eps: float) -> EpsParams:
        return EpsParams(eps, self.eta_rule(eps), self.gamma, self.q, self.psi)

    def grid_for(self, eps: float) -> Grid:
        kind = self.grid_spec[0]
        if kind == "cells":
            return Grid(self.dim, self.extents, self.grid_spec[1])
        factor = self.grid_spec[1]
        cells = tuple(max(1, round(L * factor / eps)) for L in self.extents)
        return Grid(self.dim, self.extents, cells)

    def masks_for(self, grid: Grid):
        n_nodes = grid.n_nodes
        mu = np.zeros(n_nodes, dtype=bool)
        for f in self.dirichlet_faces:
            mu |= grid.face_mask(f)
        mv = np.zeros(n_nodes, dtype=bool)
        for f in self.dirichlet_v_faces:
            mv |= grid.face_mask(f)
        return mu, mv

    def u0_values(self, grid: Grid):
        return self.u0(grid.node_coords)


def scenario_from_text(text: str, allow_non_c_elliptic: bool = False) -> Scenario:
    raw = parse_config(text)
    r = _Reader(raw)

    dim = r.int("dim")
    if dim not in (1, 2, 3):
        raise ConfigError("dim", "supported dimensions are 1, 2, 3")
    extents = r.floats("box", " ".join(["1.0"] * dim))
    if len(extents) != dim or any(L <= 0 for L in extents):
        raise ConfigError("box", f"need {dim} positive lengths")

    op_name = r.str("operator", "full-strain")
    try:
        if op_name == "custom":
            op = operator_from_matrix(dim, r.floats("operator.matrix"))
        else:
            op = operator_from_name(op_name, dim)
    except ValueError as exc:
        raise ConfigError("operator", str(exc)) from None

    override = allow_non_c_elliptic or r.flag("allow-non-c-elliptic", "off")
    if op.name == "deviatoric" and dim == 2 and not override:
        raise ConfigError(
            "operator",
            "deviatoric in dim 2 is not C-elliptic (compactness and the "
            "jump identity fail); set allow-non-c-elliptic = on to proceed",
        )

    try:
        hooke = HookeTensor(r.float("density.lambda1", 1.0),
                            r.float("density.lambda2", 0.0), dim)
        f = BulkDensity(r.float("density.p", 2.0), r.float("density.mu", 0.0), hooke)
        psi = PsiSpec(r.float("psi.psi0", 1.0), r.float("psi.m", 2.0))
    except ValueError as exc:
        raise ConfigError("density/psi", str(exc)) from None

    gamma = r.float("reg.gamma", 1.0)
    q = r.float("reg.q", 2.0)
    if gamma <= 0 or q <= 1:
        raise ConfigError("reg", "need gamma > 0 and q > 1")

    eps_list = r.floats("eps.list")
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ConfigError("eps.list", "need positive eps values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps.list", "eps values must be strictly decreasing")

    eta_spec = r.strs("eps.eta", f"pow {f.p}")
    if eta_spec[0] == "pow" and len(eta_spec) == 2:
        k = float(eta_spec[1])
        if k <= f.p - 1.0:
            raise ConfigError("eps.eta", "need eta/eps^(p-1) -> 0: exponent > p-1")
        eta_rule = lambda e, _k=k: e ** _k
    elif eta_spec[0] == "value" and len(eta_spec) == 2:
        val = float(eta_spec[1])
        if val <= 0:
            raise ConfigError("eps.eta", "eta must be positive")
        eta_rule = lambda e, _v=val: _v
    else:
        raise ConfigError("eps.eta", f"expected 'pow k' or 'value x', got {eta_spec}")

    if r.has("grid.cells"):
        cells = [int(x) for x in r.strs("grid.cells")]
        if len(cells) == 1:
            cells = cells * dim
        if len(cells) != dim or any(c < 1 for c in cells):
            raise ConfigError("grid.cells", f"need {dim} positive counts")
        grid_spec = ("cells", tuple(cells))
    else:
        rule = r.strs("grid.rule", "eps-over 8")
        if rule[0] != "eps-over" or len(rule) != 2:
            raise ConfigError("grid.rule", "expected 'eps-over F'")
        grid_spec = ("eps-over", float(rule[1]))

    valid_faces = face_names(dim)
    faces = r.strs("dirichlet.faces", "")
    for fc in faces:
        if fc not in valid_faces:
            raise ConfigError("dirichlet.faces", f"unknown face {fc!r}")
    v_faces = r.strs("dirichlet.v_faces", " ".join(faces) if faces else "")
    for fc in v_faces:
        if fc not in valid_faces:
            raise ConfigError("dirichlet.v_faces", f"unknown face {fc!r}")

    u0 = _poly_from(r, "u0", dim)

    solver = SolverConfig(
        tol_rel=r.float("solver.tol_rel", 1e-9),
        max_outer=r.int("solver.max_outer", 200),
        max_inner=r.int("solver.max_inner", 4000),
        inner_tol=r.float("solver.inner_tol", 1e-9),
        seed=r.int("solver.seed", 0),
    )

    notch = r.flag("init.notch", "off")
    predict = r.str("predict", "none")
    if predict not in ("none", "cohesive-1d", "template"):
        raise ConfigError("predict", f"unknown predictor {predict!r}")
    if predict == "cohesive-1d" and dim != 1:
        raise ConfigError("predict", "cohesive-1d requires dim = 1")

    template = None
    if r.has("template.plane_c") or predict == "template":
        axis = r.int("template.plane_axis", dim - 1)
        plane_c = r.float("template.plane_c")
        support = None
        if r.has("template.support"):
            vals = r.floats("template.support")
            if len(vals) != 2 * (dim - 1):
                raise ConfigError("template.support",
                                  f"need {2 * (dim - 1)} bounds (lo hi per axis)")
            support = np.array(vals).reshape(dim - 1, 2)
        template = JumpTemplate(
            dim=dim,
            plane_c=plane_c,
            smooth_minus=_poly_from(r, "template.smooth_minus", dim),
            smooth_plus=_poly_from(r, "template.smooth_plus", dim),
            jump=_poly_from(r, "template.jump", dim),
            support=support,
            lipschitz_L=r.float("template.lipschitz", 1.0),
            plane_axis=axis,
        )
        if not template.check_consistency():
            raise ConfigError("template.jump",
                              "jump does not match the trace difference of the "
                              "smooth parts on the support")

    taper_raw = r.str("limsup.taper", "auto")
    if taper_raw == "auto":
        limsup_taper = None
    elif taper_raw == "none":
        limsup_taper = 0.0
    else:
        limsup_taper = float(taper_raw)

    return Scenario(
        raw=raw,
        dim=dim,
        extents=tuple(extents),
        operator=op,
        density=f,
        psi=psi,
        gamma=gamma,
        q=q,
        eps_list=eps_list,
        eta_rule=eta_rule,
        grid_spec=grid_spec,
        dirichlet_faces=faces,
        dirichlet_v_faces=v_faces,
        u0=u0,
        solver=solver,
        notch=notch,
        predict=predict,
        template=template,
        limsup_factor=r.int("limsup.factor", 4),
        limsup_taper=limsup_taper,
        limsup_max_cells=r.int("limsup.max_cells", 4096),
        output_csv=raw.get("output.csv"),
        output_snapshot=raw.get("output.snapshot"),
    )


def load_scenario(path, allow_non_c_elliptic: bool = False) -> Scenario:
    with open(path) as fh:
        return scenario_from_text(fh.read(), allow_non_c_elliptic)
