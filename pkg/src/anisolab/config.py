"""Experiment configuration: schema, validation, and the resolved echo.

Configs are JSON documents with five blocks (grid, data, solver,
diagnostics, output).  Loading is strict: unknown keys anywhere are
rejected, as are values outside their documented ranges, so a typo
fails loudly instead of silently running the default.  The fully
resolved config (defaults filled in) is echoed as a dict so every run
directory records exactly what was executed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .families import (
    FreqCut,
    MultiScale,
    ProfileSpec,
    Slow,
    SlowFast,
    SpectralTail,
    TaylorGreen,
)
from .grid import Grid
from .stepping import StepperConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]

FAMILIES = ("slow", "multiscale", "slowfast", "freqcut", "taylor_green", "zero")


class ConfigError(ValueError):
    pass


def _take(block: dict, where: str, key: str, default=None, required=False):
    if key in block:
        return block.pop(key)
    if required:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return default


def _done(block: dict, where: str):
    if block:
        raise ConfigError(f"{where}: unknown keys {sorted(block)}")


def _triple(val, where: str, kind=float):
    try:
        out = tuple(kind(x) for x in val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected three numbers, got {val!r}") from None
    if len(out) != 3:
        raise ConfigError(f"{where}: expected three numbers, got {val!r}")
    return out


def _positive(val, where: str) -> float:
    try:
        x = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {val!r}") from None
    if not x > 0:
        raise ConfigError(f"{where}: must be positive, got {x}")
    return x


def _profile(block, where: str) -> ProfileSpec:
    if block is None:
        return ProfileSpec()
    b = dict(block)
    spec = ProfileSpec(
        swirl_amplitude=float(_take(b, where, "swirl_amplitude", 1.0)),
        swirl_width=_triple(_take(b, where, "swirl_width", (1.0, 1.0, 1.0)), where),
        potential_amplitude=float(_take(b, where, "potential_amplitude", 1.0)),
        potential_width=_triple(
            _take(b, where, "potential_width", (1.0, 1.0, 1.0)), where),
        potential_coeffs=_triple(
            _take(b, where, "potential_coeffs", (1.0, 0.6, 0.8)), where),
    )
    _done(b, where)
    return spec


@dataclass(frozen=True)
class GridBlock:
    resolution: tuple[int, int, int]
    box_lengths: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class DataBlock:
    family: str
    params: dict = dc_field(default_factory=dict)
    amplitude: float = 1.0


@dataclass(frozen=True)
class SolverBlock:
    dt: float
    end_time: float
    scheme: str = "ifrk4"
    cfl_safety: float = 0.4


@dataclass(frozen=True)
class DiagnosticsBlock:
    metrics: tuple[str, ...] | str = "all"
    stride: int = 1
    heavy_stride: int = 0
    delta: float = 0.5
    sigma1: float = 0.0
    sigma2: float = 0.5
    c: float = 1.0
    c_delta: float = 1.0
    eta_threshold: float | None = 1.45e-4
    kz_p: float = 2.5
    dyadic_exponent: float = 2.0


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "."
    checkpoint_stride: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridBlock
    data: DataBlock
    solver: SolverBlock
    diagnostics: DiagnosticsBlock
    output: OutputBlock

    def family(self):
        """Instantiate the configured data family (None for zero data)."""
        name = self.data.family
        if name == "zero":
            return None
        try:
            return self._family(name)
        except ConfigError:
            raise
        except KeyError as exc:
            raise ConfigError(
                f"data family {name!r} requires parameter {exc.args[0]!r}"
            ) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"data family {name!r}: {exc}") from None

    def _family(self, name: str):
        p = dict(self.data.params)
        amp = self.data.amplitude
        if name == "slow":
            fam = Slow(
                eps=p.pop("eps"),
                profile=_scaled_profile(p.pop("profile", None), amp),
                **_pick(p, ["base_box"], name),
            )
        elif name == "multiscale":
            profs = p.pop("profiles", None)
            fam = MultiScale(
                eps=tuple(p.pop("eps")),
                profiles=(() if profs is None else tuple(
                    _scaled_profile(pr, amp) for pr in profs)),
                **_pick(p, ["base_box", "resolution_tol"], name),
            )
        elif name == "slowfast":
            fam = SlowFast(
                eps=p.pop("eps"),
                lam=p.pop("lam"),
                profile=_scaled_profile(p.pop("profile", None), amp),
                **_pick(p, ["base_box"], name),
            )
        elif name == "freqcut":
            base = p.pop("base", None) or {}
            b = dict(base)
            tail = SpectralTail(
                amplitude=amp * float(_take(b, "data.base", "amplitude", 1.0)),
                sigma_h=float(_take(b, "data.base", "sigma_h", 3.0)),
                sigma_v=float(_take(b, "data.base", "sigma_v", 2.0)),
                coeffs=_triple(
                    _take(b, "data.base", "coeffs", (1.0, 0.6, 0.8)), "data.base"),
            )
            _done(b, "data.base")
            fam = FreqCut(
                cut_radius=p.pop("cut_radius"),
                base=tail,
                **_pick(p, ["box_lengths"], name),
            )
        elif name == "taylor_green":
            fam = TaylorGreen(
                amplitude=amp * float(p.pop("tg_amplitude", 1.0)),
                **_pick(p, ["modes", "box_lengths"], name),
            )
        else:
            raise ConfigError(f"data.family must be one of {FAMILIES}, got {name!r}")
        if p:
            raise ConfigError(f"data family {name!r}: unknown parameters {sorted(p)}")
        return fam

    def make_grid(self) -> Grid:
        fam = self.family()
        if fam is None:
            if self.grid.box_lengths is None:
                raise ConfigError("zero data needs explicit grid.box_lengths")
            return Grid(self.grid.box_lengths, self.grid.resolution)
        box = fam.box()
        if self.grid.box_lengths is not None and not np.allclose(
                self.grid.box_lengths, box, rtol=1e-12, atol=0.0):
            raise ConfigError(
                f"grid.box_lengths {self.grid.box_lengths} conflicts with the "
                f"box {tuple(float(b) for b in box)} mandated by the data family"
            )
        return Grid(box, self.grid.resolution)

    def stepper(self) -> StepperConfig:
        return StepperConfig(
            dt=self.solver.dt,
            end_time=self.solver.end_time,
            scheme=self.solver.scheme,
            cfl_safety=self.solver.cfl_safety,
        )

    def resolved(self) -> dict:
        return asdict(self)


def _pick(params: dict, keys, family: str) -> dict:
    out = {}
    for key in keys:
        if key in params:
            val = params.pop(key)
            if key in ("base_box", "box_lengths"):
                val = _triple(val, f"data.{key}")
            elif key == "modes":
                val = tuple(int(m) for m in val)
                if len(val) != 2:
                    raise ConfigError("data.modes: expected two integers")
            out[key] = val
    return out


def _scaled_profile(block, amplitude: float) -> ProfileSpec:
    spec = _profile(block, "data.profile")
    if amplitude == 1.0:
        return spec
    return ProfileSpec(
        swirl_amplitude=amplitude * spec.swirl_amplitude,
        swirl_width=spec.swirl_width,
        potential_amplitude=amplitude * spec.potential_amplitude,
        potential_width=spec.potential_width,
        potential_coeffs=spec.potential_coeffs,
    )


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a mapping, got {type(doc).__name__}")
    top = dict(doc)

    gb = dict(_take(top, "config", "grid", required=True) or {})
    res = _triple(_take(gb, "grid", "resolution", required=True), "grid.resolution", int)
    if any(n < 4 for n in res):
        raise ConfigError(f"grid.resolution: every axis needs >= 4 points, got {res}")
    box = _take(gb, "grid", "box_lengths")
    grid = GridBlock(resolution=res,
                     box_lengths=None if box is None else _triple(box, "grid.box_lengths"))
    _done(gb, "grid")

    db = dict(_take(top, "config", "data", required=True) or {})
    family = _take(db, "data", "family", required=True)
    if family not in FAMILIES:
        raise ConfigError(f"data.family must be one of {FAMILIES}, got {family!r}")
    amplitude = float(_take(db, "data", "amplitude", 1.0))
    data = DataBlock(family=family, params=db, amplitude=amplitude)

    sb = dict(_take(top, "config", "solver", required=True) or {})
    solver = SolverBlock(
        dt=_positive(_take(sb, "solver", "dt", required=True), "solver.dt"),
        end_time=_positive(_take(sb, "solver", "end_time", required=True),
                           "solver.end_time"),
        scheme=str(_take(sb, "solver", "scheme", "ifrk4")),
        cfl_safety=_positive(_take(sb, "solver", "cfl_safety", 0.4),
                             "solver.cfl_safety"),
    )
    _done(sb, "solver")
    if solver.scheme != "ifrk4":
        raise ConfigError(f"solver.scheme: unknown scheme {solver.scheme!r}")
    if not solver.cfl_safety <= 1.0:
        raise ConfigError(f"solver.cfl_safety must lie in (0, 1], got {solver.cfl_safety}")

    ob = dict(_take(top, "config", "diagnostics") or {})
    metrics = _take(ob, "diagnostics", "metrics", "all")
    if metrics != "all":
        metrics = tuple(str(m) for m in metrics)
        if not metrics:
            raise ConfigError("diagnostics.metrics: empty list (use \"all\")")
    stride = int(_take(ob, "diagnostics", "stride", 1))
    heavy = int(_take(ob, "diagnostics", "heavy_stride", 0))
    if stride < 1:
        raise ConfigError(f"diagnostics.stride must be >= 1, got {stride}")
    if heavy < 0:
        raise ConfigError(f"diagnostics.heavy_stride must be >= 0, got {heavy}")
    eta = _take(ob, "diagnostics", "eta_threshold", 1.45e-4)
    diagnostics = DiagnosticsBlock(
        metrics=metrics,
        stride=stride,
        heavy_stride=heavy,
        delta=_positive(_take(ob, "diagnostics", "delta", 0.5), "diagnostics.delta"),
        sigma1=float(_take(ob, "diagnostics", "sigma1", 0.0)),
        sigma2=float(_take(ob, "diagnostics", "sigma2", 0.5)),
        c=_positive(_take(ob, "diagnostics", "c", 1.0), "diagnostics.c"),
        c_delta=_positive(_take(ob, "diagnostics", "c_delta", 1.0),
                          "diagnostics.c_delta"),
        eta_threshold=None if eta is None else _positive(
            eta, "diagnostics.eta_threshold"),
        kz_p=float(_take(ob, "diagnostics", "kz_p", 2.5)),
        dyadic_exponent=float(_take(ob, "diagnostics", "dyadic_exponent", 2.0)),
    )
    _done(ob, "diagnostics")
    if not -1.0 < diagnostics.sigma1 < 1.0:
        raise ConfigError(
            f"diagnostics.sigma1 must lie in (-1, 1), got {diagnostics.sigma1}")
    if not 0.0 < diagnostics.sigma2 < 1.0:
        raise ConfigError(
            f"diagnostics.sigma2 must lie in (0, 1), got {diagnostics.sigma2}")

    xb = dict(_take(top, "config", "output") or {})
    output = OutputBlock(
        directory=str(_take(xb, "output", "directory", ".")),
        checkpoint_stride=int(_take(xb, "output", "checkpoint_stride", 0)),
    )
    _done(xb, "output")
    if output.checkpoint_stride < 0:
        raise ConfigError(
            f"output.checkpoint_stride must be >= 0, got {output.checkpoint_stride}")

    _done(top, "config")
    cfg = ExperimentConfig(grid=grid, data=data, solver=solver,
                           diagnostics=diagnostics, output=output)
    cfg.family()          # fail now on malformed family parameters
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc)
