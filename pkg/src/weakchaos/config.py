"""Schema of the experiment config file.

A config is a YAML mapping::

    seed: 12345          # master seed (default 0)
    out: results         # output directory (default "results")
    workers: 1           # process pool size
    experiments:
      - name: mld_intermittent
        kind: mld
        system: {map: intermittent, gamma: 0.5}
        observable: {kind: indicator, a: 0.5, b: 1.0}
        eps_fraction: 0.2
        N_grid: {start: 100, stop: 1000, num: 10}
        N_max: 10000

Every experiment entry needs ``name`` and ``kind``; the remaining fields
have defaults, listed on the models below. Grids are either explicit
integer lists or ``{start, stop, num}`` for a log-spaced integer grid.
"""
from __future__ import annotations

from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigError
from .utils import log_grid


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LogGrid(_Strict):
    start: int = Field(gt=0)
    stop: int = Field(gt=0)
    num: int = Field(ge=1)

    @model_validator(mode="after")
    def _order(self):
        if self.stop < self.start:
            raise ValueError("stop must be >= start")
        return self

    def values(self):
        return log_grid(self.start, self.stop, self.num).tolist()


def _expand_grid(value):
    if isinstance(value, dict):
        return LogGrid(**value).values()
    return value


def _increasing(values):
    if not values:
        raise ValueError("grid must not be empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid must be strictly increasing")
    return values


Grid = Annotated[List[int], Field(min_length=1)]


class MapSpec(_Strict):
    map: Literal["doubling", "intermittent"] = "intermittent"
    gamma: float = Field(0.5, ge=0.0, lt=1.0)

    def build(self):
        from .dynamics1d import MapSystem

        return MapSystem.doubling() if self.map == "doubling" else MapSystem.intermittent(self.gamma)


class StadiumSpec(_Strict):
    map: Literal["stadium"] = "stadium"
    flat_half_length: float = Field(1.0, gt=0.0)

    def build(self):
        from .billiards import build_stadium

        return build_stadium(self.flat_half_length)


System = Annotated[Union[MapSpec, StadiumSpec], Field(discriminator="map")]


class ObservableSpec(_Strict):
    kind: Literal["indicator", "coordinate", "cosine"] = "indicator"
    a: float = Field(0.5, ge=0.0, le=1.0)
    b: float = Field(1.0, ge=0.0, le=1.0)
    frequency: int = Field(1, ge=1)
    center: bool = True
    mean_steps: int = Field(10**7, ge=1)

    @model_validator(mode="after")
    def _interval(self):
        if self.kind == "indicator" and self.a >= self.b:
            raise ValueError("indicator needs a < b")
        return self

    def build(self):
        from .dynamics1d import Observable

        if self.kind == "indicator":
            return Observable.indicator(self.a, self.b)
        if self.kind == "coordinate":
            return Observable.coordinate()
        return Observable.cosine(self.frequency)


class Experiment(_Strict):
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")


class DeviationExperiment(Experiment):
    kind: Literal["mld", "ld"]
    stream: Literal["map", "iid", "induced-return", "billiard-return"] = "map"
    system: System = MapSpec()
    observable: ObservableSpec = ObservableSpec()
    reference: Tuple[float, float] = (0.5, 1.0)
    eps: Optional[float] = Field(None, gt=0.0)
    eps_fraction: Optional[float] = Field(None, gt=0.0)
    N_grid: Grid = Field(default_factory=lambda: log_grid(100, 1000, 10).tolist())
    N_max: Optional[int] = Field(None, ge=1)
    ensemble: int = Field(10**4, ge=1)
    moment_order: int = Field(2, ge=2)
    sensitivity: bool = True
    fit_window: Optional[Tuple[int, int]] = None
    burn_in: int = Field(1000, ge=1000)
    return_mean_samples: int = Field(10**5, ge=1000)

    _grid = field_validator("N_grid", mode="before")(_expand_grid)

    @field_validator("N_grid")
    @classmethod
    def _grid_order(cls, v):
        return _increasing(v)

    @model_validator(mode="after")
    def _eps(self):
        if self.eps is not None and self.eps_fraction is not None:
            raise ValueError("give either eps or eps_fraction, not both")
        if self.eps is None and self.eps_fraction is None:
            if self.stream in ("induced-return", "billiard-return"):
                raise ValueError("eps is required for return-time streams")
            object.__setattr__(self, "eps_fraction", 0.2)
        if self.eps_fraction is not None and self.stream in ("induced-return", "billiard-return"):
            raise ValueError("eps_fraction needs a bounded stream; give eps")
        if self.moment_order % 2:
            raise ValueError("moment_order must be even")
        if self.N_max is not None and self.N_max < self.N_grid[-1]:
            raise ValueError("N_max must be >= max(N_grid)")
        need_map = self.stream in ("map", "induced-return")
        if need_map != isinstance(self.system, MapSpec) and self.stream != "iid":
            raise ValueError(f"stream {self.stream!r} does not match system {self.system.map!r}")
        return self


class ReturnTailExperiment(Experiment):
    kind: Literal["return-tail"]
    system: MapSpec = MapSpec()
    reference: Tuple[float, float] = (0.5, 1.0)
    samples: int = Field(10**6, ge=1000)
    N_grid: Grid = Field(default_factory=lambda: log_grid(10, 1000, 20).tolist())
    cap: Optional[int] = Field(None, ge=1)
    fit_window: Optional[Tuple[int, int]] = None

    _grid = field_validator("N_grid", mode="before")(_expand_grid)

    @field_validator("N_grid")
    @classmethod
    def _grid_order(cls, v):
        return _increasing(v)

    @model_validator(mode="after")
    def _cap(self):
        if self.cap is not None and self.cap < self.N_grid[-1]:
            raise ValueError("cap must be >= max(N_grid)")
        return self


class UlamExperiment(Experiment):
    kind: Literal["ulam-decay"]
    system: MapSpec = MapSpec(map="doubling")
    k: int = Field(2**10, ge=2)
    mc_per_cell: int = Field(200, ge=1)
    method: Literal["mc", "exact"] = "mc"
    observable: ObservableSpec = ObservableSpec(kind="cosine")
    p: float = Field(2.0, ge=1.0)
    n_grid: Grid = Field(default_factory=lambda: list(range(0, 21)))
    compare_exact: bool = True
    fit_window: Optional[Tuple[int, int]] = None

    _grid = field_validator("n_grid", mode="before")(_expand_grid)

    @field_validator("n_grid")
    @classmethod
    def _grid_order(cls, v):
        return _increasing(v)


class BilliardInvarianceExperiment(Experiment):
    kind: Literal["billiard-invariance"]
    system: StadiumSpec = StadiumSpec()
    samples: int = Field(10**5, ge=1000)
    reversibility_samples: int = Field(10**4, ge=1)
    cone_vectors: int = Field(10**4, ge=1)
    collisions: int = Field(10**5, ge=1)


class HittingExperiment(Experiment):
    kind: Literal["hitting"]
    system: System = StadiumSpec()
    center: Optional[float] = None
    r_values: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05], min_length=1)
    samples: int = Field(10**4, ge=1000)
    cap: int = Field(10**6, ge=1)

    @field_validator("r_values")
    @classmethod
    def _positive(cls, v):
        if any(r <= 0 for r in v):
            raise ValueError("radii must be positive")
        return v


class PointProcessExperiment(Experiment):
    kind: Literal["point-process"]
    system: System = StadiumSpec()
    center: Optional[float] = None
    r: float = Field(0.05, gt=0.0)
    T: float = Field(5.0, gt=0.0)
    samples: int = Field(10**4, ge=1)
    m: int = Field(2, ge=1, le=4)
    k_max: int = Field(5, ge=0, le=5)


class LAlphaSExperiment(Experiment):
    kind: Literal["l-alpha-s"]
    system: MapSpec = MapSpec(map="doubling")
    z: float = Field(0.0, ge=0.0, le=1.0)
    period: Optional[int] = Field(1, ge=1)
    alpha: float = Field(1.0, gt=0.0, le=1.0)
    s: float = Field(1.0, gt=0.0)
    r_grid: List[float] = Field(default_factory=lambda: [0.04, 0.02, 0.01, 0.005], min_length=1)
    ensemble: int = Field(10**4, ge=1)
    measure_steps: int = Field(10**8, ge=1)
    measure_orbits: int = Field(10**4, ge=1)

    @field_validator("r_grid")
    @classmethod
    def _decreasing(cls, v):
        if any(r <= 0 for r in v):
            raise ValueError("radii must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("r_grid must be strictly decreasing")
        return v


class GmyExperiment(Experiment):
    kind: Literal["gmy-diagnostics"]
    system: MapSpec = MapSpec()
    reference: Tuple[float, float] = (0.5, 1.0)
    samples: int = Field(1000, ge=1)
    pair_distance: float = Field(1e-4, gt=0.0)
    cap: int = Field(10**5, ge=1)


ExperimentSpec = Annotated[
    Union[DeviationExperiment, ReturnTailExperiment, UlamExperiment, BilliardInvarianceExperiment,
          HittingExperiment, PointProcessExperiment, LAlphaSExperiment, GmyExperiment],
    Field(discriminator="kind"),
]


class RunConfig(_Strict):
    seed: int = Field(0, ge=0)
    out: str = "results"
    workers: int = Field(1, ge=1)
    experiments: List[ExperimentSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique_names(self):
        names = [e.name for e in self.experiments]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise ValueError(f"duplicate experiment names: {', '.join(dup)}")
        return self


def _field_path(loc):
    # drop the tags pydantic inserts into locations inside tagged unions
    parts = [str(p) for p in loc]
    out = []
    for i, p in enumerate(parts):
        prev = parts[i - 1] if i else ""
        if (prev.isdigit() and p in KIND_NAMES) or (prev == "system" and p in SYSTEM_NAMES):
            continue
        out.append(p)
    return ".".join(out) or "<root>"


KIND_NAMES = ("mld", "ld", "return-tail", "ulam-decay", "billiard-invariance", "hitting",
              "point-process", "l-alpha-s", "gmy-diagnostics")
SYSTEM_NAMES = ("doubling", "intermittent", "stadium")


def parse_config(data):
    """Validate a config mapping; raises :class:`ConfigError` naming the first bad field."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(_field_path(err["loc"]), err["msg"]) from None


def experiment_defaults(kind):
    """Config entry for ``kind`` with every default filled in."""
    cfg = parse_config({"experiments": [{"name": kind, "kind": kind}]})
    return cfg.experiments[0].model_dump(mode="json")

