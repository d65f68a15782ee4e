"""Run, sweep and comparison configurations with their flat key=value form"""

import itertools
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from agtv_tomo import __version__
from agtv_tomo.errors import ConfigError
from agtv_tomo.phantom import SheppLoganVariant
from agtv_tomo.solvers import METHODS, SolverConfig, solver_config
from agtv_tomo.solvers.methods import Method

NoiseModel = Literal["poisson", "gaussian"]

# keys written to manifests that are not configuration
_METADATA_KEYS = {"command", "version", "relative_noise", "run_id"}
_SOLVER_KEYS = set(SolverConfig.model_fields) | {"lambda"}


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    return str(value)


class RunConfig(BaseModel):
    """One acquisition plus one reconstruction."""

    model_config = ConfigDict(extra="forbid")

    phantom_spec: Optional[Path] = Field(default=None, description="JSON ellipse list; None uses Shepp-Logan")
    variant: SheppLoganVariant = Field(default="modified")
    image_path: Optional[Path] = Field(default=None, description="Ground-truth image file instead of a phantom")
    input_dir: Optional[Path] = Field(default=None, description="Directory written by the project command")
    n: int = Field(default=64, ge=1)
    angle_count: int = Field(default=36, ge=1)
    angle_range: float = Field(default=180.0, gt=0.0, le=180.0)
    rays: Optional[int] = Field(default=None, ge=1, description="Rays per angle p; None means n")
    noise_model: NoiseModel = Field(default="poisson")
    noise_level: float = Field(default=0.1, ge=0.0, lt=1.0)
    noise_seed: int = Field(default=1)
    method: Method = Field(default="agtv")
    solver: Dict[str, Any] = Field(default_factory=dict, description="SolverConfig overrides")
    profile_row: Optional[int] = Field(default=None, ge=0)
    out: Optional[Path] = Field(default=None)
    export_graph: bool = Field(default=False)
    sinogram_csv: bool = Field(default=False)

    @model_validator(mode="after")
    def _check_solver(self) -> "RunConfig":
        unknown = set(self.solver) - _SOLVER_KEYS
        if unknown:
            raise ConfigError(f"Unknown solver settings: {', '.join(sorted(unknown))}")
        if self.profile_row is not None and self.profile_row >= self.n:
            raise ConfigError(f"profile_row {self.profile_row} is outside an image of side {self.n}")
        return self

    def solver_config(self, method: Optional[str] = None) -> SolverConfig:
        """Method defaults updated by this run's overrides."""
        return solver_config(method or self.method, self.solver)

    @classmethod
    def from_flat(cls, values: Mapping[str, Any]) -> "RunConfig":
        """
        Build a RunConfig from flat key=value pairs.

        Solver keys (``lambda``, ``gamma``, ``k``, ...) are routed to the
        solver overrides; manifest metadata keys are ignored.
        """
        run: Dict[str, Any] = {}
        solver: Dict[str, Any] = {}
        for key, value in values.items():
            if key in _METADATA_KEYS or value is None:
                continue
            if key in _SOLVER_KEYS:
                solver[key] = value
            elif key in cls.model_fields and key != "solver":
                run[key] = value
            else:
                raise ConfigError(f"Unknown configuration key: {key}")
        return cls(**run, solver=solver)

    def to_flat(self, method: Optional[str] = None, resolved: bool = True) -> Dict[str, str]:
        """
        Flat manifest form; feeding it back through ``from_flat`` reproduces the run.

        With ``resolved`` the full solver configuration of ``method`` is
        written, otherwise only this run's overrides (for multi-method runs).
        """
        flat = {"version": __version__}
        for key, value in self.model_dump(exclude={"solver"}).items():
            if value is not None:
                flat[key] = _format(value)
        method = method or self.method
        flat["method"] = method
        if resolved:
            solver = self.solver_config(method).model_dump(by_alias=True)
            if solver.get("knn_quality") is None:
                solver["knn_quality"] = 0
        else:
            solver = dict(self.solver)
        for key, value in solver.items():
            if value is not None:
                flat[key] = _format(value)
        return flat


class SweepPoint(BaseModel):
    """One configuration of a sweep."""

    run_id: str
    angle_count: int
    noise_level: float
    seed: int
    lam: float
    gamma: float
    k: int


class SweepConfig(BaseModel):
    """Cartesian parameter sweep around a base run."""

    base: RunConfig
    lambdas: List[float] = Field(default_factory=list)
    gammas: List[float] = Field(default_factory=list)
    ks: List[int] = Field(default_factory=list)
    angle_counts: List[int] = Field(default_factory=list)
    noise_levels: List[float] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=list, description="Noise seeds; empty uses the base seed")
    cap: int = Field(default=5000, ge=1)
    workers: int = Field(default=1, ge=1)

    @field_validator(
        "lambdas", "gammas", "ks", "angle_counts", "noise_levels", "seeds", mode="before"
    )
    @classmethod
    def _split_axes(cls, v: Any) -> Any:
        return _split_list(v)

    @model_validator(mode="after")
    def _check_grid(self) -> "SweepConfig":
        if not any([self.lambdas, self.gammas, self.ks, self.angle_counts, self.noise_levels]):
            raise ConfigError("A sweep needs at least one swept axis")
        size = self.size
        if size > self.cap:
            raise ConfigError(f"Sweep has {size} configurations, above the cap of {self.cap}")
        return self

    @property
    def size(self) -> int:
        total = max(len(self.seeds), 1)
        for axis in (self.lambdas, self.gammas, self.ks, self.angle_counts, self.noise_levels):
            total *= max(len(axis), 1)
        return total

    def points(self) -> List[SweepPoint]:
        """Configurations in sweep order (angles, noise, seed, lambda, gamma, K)."""
        base = self.base
        solver = base.solver_config()
        points = []
        for q, level, seed, lam, gamma, k in itertools.product(
            self.angle_counts or [base.angle_count],
            self.noise_levels or [base.noise_level],
            self.seeds or [base.noise_seed],
            self.lambdas or [solver.lam],
            self.gammas or [solver.gamma],
            self.ks or [solver.k],
        ):
            run_id = f"q{q}_nl{level:g}_s{seed}_lam{lam:g}_gam{gamma:g}_k{k}"
            points.append(
                SweepPoint(
                    run_id=run_id, angle_count=q, noise_level=level, seed=seed, lam=lam, gamma=gamma, k=k
                )
            )
        return points

    @classmethod
    def from_flat(cls, values: Mapping[str, Any]) -> "SweepConfig":
        sweep_keys = set(cls.model_fields) - {"base"}
        sweep = {key: value for key, value in values.items() if key in sweep_keys and value is not None}
        base = RunConfig.from_flat({k: v for k, v in values.items() if k not in sweep_keys})
        return cls(base=base, **sweep)


class CompareConfig(BaseModel):
    """Every listed method on shared noisy sinograms, repeated over seeds, view counts and noise levels."""

    base: RunConfig
    methods: List[Method] = Field(default_factory=lambda: list(METHODS))
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    angle_counts: List[int] = Field(default_factory=list, description="Empty uses the base angle count")
    noise_levels: List[Annotated[float, Field(ge=0.0, lt=1.0)]] = Field(
        default_factory=list, description="Empty uses the base noise level"
    )
    workers: int = Field(default=1, ge=1)
    save_images: bool = Field(default=True)

    @field_validator("methods", "seeds", "angle_counts", "noise_levels", mode="before")
    @classmethod
    def _split_lists(cls, v: Any) -> Any:
        return _split_list(v)

    @field_validator("methods")
    @classmethod
    def _non_empty(cls, v: List[str]) -> List[str]:
        if not v:
            raise ConfigError("compare needs at least one method")
        return v

    @classmethod
    def from_flat(cls, values: Mapping[str, Any]) -> "CompareConfig":
        keys = set(cls.model_fields) - {"base"}
        own = {key: value for key, value in values.items() if key in keys and value is not None}
        base = RunConfig.from_flat({k: v for k, v in values.items() if k not in keys})
        return cls(base=base, **own)


class PhantomResponse(BaseModel):
    """Response of the phantom tool."""

    path: str
    n: int
    min_value: float
    max_value: float


class ProjectResponse(BaseModel):
    """Response of the project tool."""

    path: str
    angle_count: int
    rays: int
    relative_noise: float = Field(description="Realized ||b_noisy - b|| / ||b||")
    reused_system: bool = Field(default=False)


class ReconstructResponse(BaseModel):
    """Response of the reconstruct tool."""

    path: str
    method: str
    rel_l2_error: Optional[float] = None
    outer_iterations: int = 0
    inner_iterations: List[int] = Field(default_factory=list)
    wall_time: float = 0.0


class SweepResponse(BaseModel):
    """Response of the sweep tool."""

    path: str
    completed: int = 0
    skipped: int = 0
    failed: int = 0


class MethodSummary(BaseModel):
    method: str
    angle_count: int
    noise_level: float
    runs: int
    mean_rel_l2_error: Optional[float] = None
    std_rel_l2_error: Optional[float] = None
    mean_wall_time: Optional[float] = None
    failures: int = 0


class CompareResponse(BaseModel):
    """Response of the compare tool."""

    path: str
    summaries: List[MethodSummary] = Field(default_factory=list)
