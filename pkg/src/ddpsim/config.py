"""Declarative simulation config: strict JSON parsing, serialisation, and
assembly of the numerical problem it describes."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources

import jsonschema
import numpy as np

from .grid import Grid
from .model import RECOMBINATION_KINDS, CosineTerm, ModelData, Potential

_SCHEMA = None


class ConfigError(ValueError):
    """Invalid configuration document; the message names the offending key."""


def schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files(__package__).joinpath("config.schema.json").read_text("utf-8")
        _SCHEMA = json.loads(text)
    return _SCHEMA


# ---------------------------------------------------------------------------
# config sections; defaults mirror the model's normalisations


@dataclass
class GridConfig:
    L: float
    N: int
    dim: int = 3


@dataclass
class PotentialConfig:
    center: list | None = None
    curvature: float = 1.0
    perturbation: list = field(default_factory=list)


@dataclass
class PotentialsConfig:
    n: PotentialConfig = field(default_factory=PotentialConfig)
    p: PotentialConfig = field(default_factory=PotentialConfig)


@dataclass
class DopingConfig:
    kind: str = "none"
    bumps: list = field(default_factory=list)


@dataclass
class RecombinationConfig:
    variant: str = "band_to_band"
    params: dict = field(default_factory=dict)
    delta: float = 1.0
    sigma: float = 0.0


@dataclass
class InitialConfig:
    kind: str = "equilibrium"
    alpha: float = 0.0
    amplitude_n: float = 0.0
    amplitude_p: float = 0.0
    center: list | None = None
    width: float = 1.0
    path: str | None = None


@dataclass
class DtPolicyConfig:
    kind: str = "auto"
    safety: float = 0.9
    dt: float | None = None


@dataclass
class SteppingConfig:
    scheme: str = "scharfetter_gummel"
    dt_policy: DtPolicyConfig = field(default_factory=DtPolicyConfig)
    t_end: float = 1.0
    sample_interval: float = 0.1
    tolerance: float = 1e-10


@dataclass
class SteadyConfig:
    theta: float = 0.5
    tol: float = 1e-10
    max_iter: int = 500


@dataclass
class OutputsConfig:
    csv_path: str | None = None
    checkpoint_path: str | None = None
    checkpoint_every: int = 0


@dataclass
class SweepConfig:
    sigmas: list = field(default_factory=lambda: [0.1, 0.01])


@dataclass
class SimConfig:
    grid: GridConfig
    potentials: PotentialsConfig = field(default_factory=PotentialsConfig)
    doping: DopingConfig = field(default_factory=DopingConfig)
    recombination: RecombinationConfig = field(default_factory=RecombinationConfig)
    epsilon: float = 1.0
    initial: InitialConfig = field(default_factory=InitialConfig)
    stepping: SteppingConfig = field(default_factory=SteppingConfig)
    steady: SteadyConfig = field(default_factory=SteadyConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


_SECTIONS = {
    SimConfig: {"grid": GridConfig, "potentials": PotentialsConfig, "doping": DopingConfig,
                "recombination": RecombinationConfig, "initial": InitialConfig,
                "stepping": SteppingConfig, "steady": SteadyConfig,
                "outputs": OutputsConfig, "sweep": SweepConfig},
    PotentialsConfig: {"n": PotentialConfig, "p": PotentialConfig},
    SteppingConfig: {"dt_policy": DtPolicyConfig},
}
_FLOATS = {"L", "curvature", "delta", "sigma", "epsilon", "alpha", "amplitude_n", "amplitude_p",
           "width", "safety", "dt", "t_end", "sample_interval", "tolerance", "theta", "tol",
           "amplitude", "phase", "C", "r1", "r2", "r3", "C_n", "C_p"}
_PARAMS = {"band_to_band": {"C"}, "srh": {"r1", "r2", "r3"}, "auger": {"C_n", "C_p"}}
_BUMPS = {"none": 0, "gaussian": 1, "two_bump": 2}


def _floatify(value, key=None):
    if isinstance(value, dict):
        return {k: _floatify(v, k) for k, v in value.items()}
    if isinstance(value, list):
        return [_floatify(v, key) for v in value]
    if key in _FLOATS or key in ("center", "wavevector", "sigmas"):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    return value


def _build(cls, data: dict):
    sub = _SECTIONS.get(cls, {})
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        kwargs[f.name] = _build(sub[f.name], v) if f.name in sub else _floatify(v, f.name)
    return cls(**kwargs)


def _format_path(path) -> str:
    return ".".join(str(p) for p in path)


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    where = _format_path(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        key = ".".join(filter(None, [where, extra[0] if extra else ""]))
        return ConfigError(f"unknown key {key!r}")
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        key = ".".join(filter(None, [where, missing[0]]))
        return ConfigError(f"missing required key {key!r}")
    if err.validator in ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum",
                         "multipleOf", "enum", "minItems", "maxItems"):
        return ConfigError(f"{where}: value {err.instance!r} out of range ({err.message})")
    return ConfigError(f"{where or '<root>'}: {err.message}")


def _cross_check(cfg: SimConfig):
    dim = cfg.grid.dim
    points = [("potentials.n.center", cfg.potentials.n.center),
              ("potentials.p.center", cfg.potentials.p.center),
              ("initial.center", cfg.initial.center)]
    for side in ("n", "p"):
        for i, term in enumerate(getattr(cfg.potentials, side).perturbation):
            points.append((f"potentials.{side}.perturbation.{i}.wavevector", term["wavevector"]))
    for i, bump in enumerate(cfg.doping.bumps):
        points.append((f"doping.bumps.{i}.center", bump["center"]))
    for key, pt in points:
        if pt is not None and len(pt) != dim:
            raise ConfigError(f"{key}: expected {dim} coordinates, got {len(pt)}")
    want = _BUMPS[cfg.doping.kind]
    if len(cfg.doping.bumps) != want:
        raise ConfigError(f"doping.bumps: kind {cfg.doping.kind!r} needs {want} bumps, "
                          f"got {len(cfg.doping.bumps)}")
    rec = cfg.recombination
    for k in rec.params:
        if k not in _PARAMS[rec.variant]:
            raise ConfigError(f"unknown key 'recombination.params.{k}' for variant {rec.variant!r}")
    pol = cfg.stepping.dt_policy
    if pol.kind == "fixed" and pol.dt is None:
        raise ConfigError("missing required key 'stepping.dt_policy.dt' for a fixed policy")
    if cfg.initial.kind == "custom_checkpoint" and not cfg.initial.path:
        raise ConfigError("missing required key 'initial.path' for a checkpoint start")


def parse_config(text: str) -> SimConfig:
    """Parse and validate a JSON config document.

    Raises
    ------
    ConfigError
        On syntax errors (with line and column), unknown or missing keys and
        out-of-range values.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        raise _schema_error(err)
    cfg = _build(SimConfig, data)
    _cross_check(cfg)
    return cfg


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def to_dict(cfg: SimConfig) -> dict:
    return asdict(cfg)


def _drop_none(value):
    if isinstance(value, dict):
        return {k: _drop_none(v) for k, v in value.items() if v is not None}
    if isinstance(value, list):
        return [_drop_none(v) for v in value]
    return value


def serialize_config(cfg: SimConfig) -> str:
    """JSON document that parses back to ``cfg``; unset optional keys are omitted."""
    return json.dumps(_drop_none(to_dict(cfg)), indent=2)


def replace_in(cfg: SimConfig, **changes) -> SimConfig:
    """Deep copy of ``cfg`` with dotted keys replaced, e.g. ``{"recombination.sigma": 0.1}``."""
    data = to_dict(cfg)
    for dotted, value in changes.items():
        node = data
        *head, last = dotted.split(".")
        for k in head:
            node = node[k]
        node[last] = value
    return _build(SimConfig, data)


# ---------------------------------------------------------------------------
# problem assembly


def build_potential(pc: PotentialConfig, dim: int) -> Potential:
    center = tuple(pc.center) if pc.center is not None else (0.0,) * dim
    terms = tuple(CosineTerm(float(t["amplitude"]), tuple(float(k) for k in t["wavevector"]),
                             float(t.get("phase", 0.0)))
                  for t in pc.perturbation)
    return Potential(center=center, curvature=pc.curvature, terms=terms)


def build_doping(dc: DopingConfig, grid: Grid) -> np.ndarray:
    D = np.zeros(grid.shape)
    for b in dc.bumps:
        D += b["amplitude"] * np.exp(-grid.radius2(b["center"]) / b["width"] ** 2)
    return D


def build_recombination(rc: RecombinationConfig):
    cls = RECOMBINATION_KINDS[rc.variant]
    return cls(delta=rc.delta, sigma=rc.sigma, **rc.params)


def build_model(cfg: SimConfig) -> ModelData:
    g = Grid(cfg.grid.dim, cfg.grid.L, cfg.grid.N)
    return ModelData.build(
        g, build_potential(cfg.potentials.n, g.dim), build_potential(cfg.potentials.p, g.dim),
        build_doping(cfg.doping, g), build_recombination(cfg.recombination), cfg.epsilon)


def build_scheme(cfg: SimConfig):
    from .dynamics import AutoPositivity, Fixed, StepScheme

    pol = cfg.stepping.dt_policy
    policy = AutoPositivity(pol.safety) if pol.kind == "auto" else Fixed(pol.dt)
    return StepScheme(flux=cfg.stepping.scheme, dt_policy=policy)


@dataclass
class Problem:
    model: ModelData
    solver: object
    scheme: object
    initial: object
    seed: object = None


def build_initial(cfg: SimConfig, m: ModelData, solver):
    """Initial carrier state and, unless loaded from disk, the steady state it was seeded from."""
    from .dynamics import initial_state
    from .io import checkpoint_load
    from .steady import solve_steady

    ic = cfg.initial
    if ic.kind == "custom_checkpoint":
        return checkpoint_load(ic.path, m.grid), None
    st = cfg.steady
    seed = solve_steady(m, alpha=ic.alpha, solver=solver, theta=st.theta, tol=st.tol,
                        max_iter=st.max_iter)
    if ic.kind == "equilibrium":
        n, p = seed.n_inf, seed.p_inf
    else:
        bump = np.exp(-m.grid.radius2(ic.center) / ic.width ** 2)
        n = np.maximum(seed.n_inf * (1.0 + ic.amplitude_n * bump), 0.0)
        p = np.maximum(seed.p_inf * (1.0 + ic.amplitude_p * bump), 0.0)
    return initial_state(n, p, m, solver), seed


def build_problem(cfg: SimConfig) -> Problem:
    from .poisson import PoissonSolver

    m = build_model(cfg)
    solver = PoissonSolver(m.grid, m.epsilon)
    initial, seed = build_initial(cfg, m, solver)
    return Problem(model=m, solver=solver, scheme=build_scheme(cfg), initial=initial, seed=seed)
