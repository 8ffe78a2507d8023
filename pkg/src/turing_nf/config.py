"""JSON experiment configuration."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .kinetics import MODEL_NAMES

SUBCOMMANDS = ("find-pattern", "bloch-spectrum", "check-stability", "fit-d", "nf-roundtrip",
               "semigroup-envelopes", "simulate", "decay-report", "full-pipeline")


@dataclass
class ModelConfig:
    name: str = "brusselator"
    params: dict = field(default_factory=lambda: {"a": 2.0, "b": 3.2})
    D: list = field(default_factory=lambda: [1.0, 8.0])
    # None: use the critical wavenumber at onset
    wavenumber: float = None
    # parameter swept by turing_onset when the wavenumber is not given
    onset_param: str = "b"
    onset_bracket: list = field(default_factory=lambda: [2.0, 4.0])


@dataclass
class NumericsConfig:
    N: int = 256                 # pattern / Bloch grid
    N_evolve: int = 128          # grid per cell for time stepping
    M: int = 48
    J: int = 64
    dt: float = 0.01
    T: float = 1000.0
    stride: int = 10
    sigma_grid: int = 65
    branch_samples: int = 33
    pattern_tol: float = 1e-9
    decompose_tol: float = 1e-10
    d_tol: float = 1e-3
    # half-width of the σ window for the quadratic fit of λ(σ); None: γ₀/2
    d_fit_window: float = None
    envelope_sigmas: int = 33
    envelope_times: int = 40
    seed: int = 0


@dataclass
class PerturbationConfig:
    kind: str = "gaussian_bump"
    amplitude: float = 1e-2
    width: float = None
    linearized: bool = True
    window: list = field(default_factory=lambda: [50.0, 800.0])
    tolerance: float = 0.1


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    tasks: list = field(default_factory=lambda: ["full-pipeline"])
    output: str = "out"

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self, sections=None):
        d = self.to_dict()
        d.pop("output")
        if sections is not None:
            d = {k: d[k] for k in sections}
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _line_of(text, key):
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _fill(cls, data, text, where):
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be an object", _line_of(text, where))
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r} in {where!r}", _line_of(text, key))
    return cls(**data)


def validate(cfg, text=""):
    num = cfg.numerics
    for key in ("pattern_tol", "decompose_tol", "d_tol", "dt", "T"):
        if not (isinstance(getattr(num, key), (int, float)) and getattr(num, key) > 0):
            raise ConfigError(f"numerics.{key} must be positive", _line_of(text, key))
    for key in ("N", "N_evolve"):
        v = getattr(num, key)
        if not isinstance(v, int) or v < 16 or v % 2:
            raise ConfigError(f"numerics.{key} must be an even integer >= 16", _line_of(text, key))
    for key in ("M", "J", "stride", "sigma_grid", "branch_samples"):
        if not isinstance(getattr(num, key), int) or getattr(num, key) < 1:
            raise ConfigError(f"numerics.{key} must be a positive integer", _line_of(text, key))
    w = num.d_fit_window
    if w is not None and not (isinstance(w, (int, float)) and 0 < w <= 0.5):
        raise ConfigError("numerics.d_fit_window must lie in (0, 1/2]", _line_of(text, "d_fit_window"))
    if not isinstance(num.seed, int):
        raise ConfigError("numerics.seed must be an integer", _line_of(text, "seed"))
    if cfg.model.name not in MODEL_NAMES:
        raise ConfigError(f"unknown model {cfg.model.name!r}", _line_of(text, "name"))
    if cfg.perturbation.kind not in ("gaussian_bump", "phase_bump", "random_localized"):
        raise ConfigError(f"unknown perturbation {cfg.perturbation.kind!r}",
                          _line_of(text, "kind"))
    if not cfg.perturbation.amplitude > 0:
        raise ConfigError("perturbation.amplitude must be positive",
                          _line_of(text, "amplitude"))
    for t in cfg.tasks:
        if t not in SUBCOMMANDS:
            raise ConfigError(f"unknown task {t!r}", _line_of(text, "tasks"))
    return cfg


def loads(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", 1)
    sections = {"model": ModelConfig, "numerics": NumericsConfig,
                "perturbation": PerturbationConfig}
    unknown = set(data) - set(sections) - {"tasks", "output"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown section {key!r}", _line_of(text, key))
    kw = {name: _fill(cls, data[name], text, name) for name, cls in sections.items()
          if name in data}
    if "tasks" in data:
        if not isinstance(data["tasks"], list):
            raise ConfigError("tasks must be a list", _line_of(text, "tasks"))
        kw["tasks"] = data["tasks"]
    if "output" in data:
        kw["output"] = str(data["output"])
    try:
        cfg = ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc), None) from None
    return validate(cfg, text)


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", None) from None
    return loads(text)


def default_config():
    return ExperimentConfig()
