"""Scenario configs: YAML documents validated against the bundled JSON schema."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError
from hocbf_tissf.plant import PendulumParams
from hocbf_tissf.tissf import TissfParams

CONTROLLER_KINDS = ("minnorm", "filter", "tissf_minnorm", "tissf_filter", "nominal_only", "robust_worstcase")

# sweepable parameter -> (section, key)
SWEEP_PARAMS = {
    "epsilon0": ("tissf", "epsilon0"),
    "varsigma": ("tissf", "varsigma"),
    "gamma": ("tissf", "gamma"),
    "rho": ("controller", "rho"),
    "k1": ("nominal", "k1"),
    "k2": ("nominal", "k2"),
}


def load_schema() -> dict:
    text = resources.files("hocbf_tissf").joinpath("schemas/scenario.schema.json").read_text()
    return json.loads(text)


def bundled_config(name: str) -> Path:
    """Path of a bundled scenario (``case1``, ``case2``)."""
    p = resources.files("hocbf_tissf").joinpath(f"configs/{name}.yaml")
    return Path(str(p))


@dataclass(frozen=True)
class DisturbanceProfile:
    kind: str = "zero"
    value: tuple[float, float] = (0.0, 0.0)
    amplitude: tuple[float, float] = (0.0, 0.0)
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t: float) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(2)
        if self.kind == "constant":
            return np.array(self.value, dtype=float)
        s = math.sin(self.frequency * t + self.phase)
        return np.array(self.amplitude, dtype=float) * s

    def bound(self) -> float:
        """sup_t ||d(t)||_inf."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return max(abs(v) for v in self.value)
        return max(abs(v) for v in self.amplitude)


@dataclass(frozen=True)
class Scenario:
    name: str
    params: PendulumParams
    channel: str
    reference: str
    lower_bounds: tuple[float, float] | None
    betas: tuple[ClassKSpec, ClassKSpec]
    clf_eta: ClassKSpec | None
    clf_alphas: tuple[ClassKSpec, ...]
    k1: float | None
    k2: float | None
    kind: str
    rho: float
    tissf: TissfParams | None
    disturbance: DisturbanceProfile
    x0: tuple[float, ...]
    dt: float
    horizon: float
    seed: int
    rmse_window: tuple[float, float]
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def has_clf(self) -> bool:
        return self.clf_eta is not None

    @property
    def has_nominal(self) -> bool:
        return self.k1 is not None

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.horizon / self.dt + 1e-9))


def validate_config(doc) -> None:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as e:
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {loc}: {e.message}") from None


def scenario_from_dict(doc: dict) -> Scenario:
    validate_config(doc)
    plant = doc["plant"]
    params = PendulumParams(**plant.get("params", {}))
    ctrl = doc["controller"]
    kind = ctrl["kind"]
    sim = doc["simulation"]

    barrier = doc.get("barrier")
    if barrier is not None:
        betas = tuple(ClassKSpec.from_dict(b) for b in barrier.get("betas", [{"kind": "linear"}] * 2))
        bounds = tuple(float(v) for v in barrier["lower_bounds"])
    else:
        betas = (ClassKSpec(), ClassKSpec())
        bounds = None

    clf = doc.get("clf")
    eta = ClassKSpec.from_dict(clf.get("eta", {"kind": "linear"})) if clf is not None else None
    alphas = tuple(ClassKSpec.from_dict(a) for a in clf.get("alphas", [{"kind": "linear"}])) if clf is not None else ()

    nominal = doc.get("nominal")
    k1 = float(nominal["k1"]) if nominal else None
    k2 = float(nominal["k2"]) if nominal else None

    dist = doc.get("disturbance", {"profile": "zero"})
    seed = int(sim.get("seed", 0))
    phase = dist.get("phase", 0.0)
    if phase == "random":
        phase = float(np.random.default_rng(seed).uniform(0.0, 2 * math.pi))
    profile = DisturbanceProfile(
        kind=dist["profile"],
        value=tuple(dist.get("value", (0.0, 0.0))),
        amplitude=tuple(dist.get("amplitude", (0.0, 0.0))),
        frequency=float(dist.get("frequency", 1.0)),
        phase=float(phase),
    )
    if dist["profile"] == "constant" and "value" not in dist:
        raise ConfigError("constant disturbance needs `value`")
    if dist["profile"] == "sinusoid" and "amplitude" not in dist:
        raise ConfigError("sinusoid disturbance needs `amplitude`")

    tissf = None
    if "tissf" in doc:
        t = dict(doc["tissf"])
        t.setdefault("gamma", profile.bound())
        tissf = TissfParams(**t)
        if profile.bound() > tissf.gamma:
            raise ConfigError(f"disturbance bound {profile.bound()} exceeds declared gamma {tissf.gamma}")

    if kind in ("minnorm", "tissf_minnorm") and eta is None:
        raise ConfigError(f"controller {kind!r} needs a `clf` section")
    if kind in ("filter", "tissf_filter", "nominal_only") and k1 is None:
        raise ConfigError(f"controller {kind!r} needs a `nominal` section")
    if kind == "robust_worstcase" and eta is None and k1 is None:
        raise ConfigError("robust_worstcase needs either a `clf` or a `nominal` section")
    if kind in ("tissf_minnorm", "tissf_filter", "robust_worstcase") and tissf is None:
        raise ConfigError(f"controller {kind!r} needs a `tissf` section")
    if kind != "nominal_only" and bounds is None:
        raise ConfigError(f"controller {kind!r} needs a `barrier` section")
    if kind.startswith("tissf") and not betas[-1].invertible:
        raise ConfigError("tunable ISSf needs an invertible top class-K function")

    dt = float(sim["dt"])
    horizon = float(sim["horizon"])
    if horizon <= dt:
        raise ConfigError("horizon must exceed dt")
    window = tuple(float(v) for v in sim.get("rmse_window", (0.0, horizon)))

    return Scenario(
        name=doc.get("name", "scenario"),
        params=params,
        channel=plant.get("disturbance_channel", "matched"),
        reference=doc.get("reference", "paper_sine"),
        lower_bounds=bounds,
        betas=betas,
        clf_eta=eta,
        clf_alphas=alphas,
        k1=k1,
        k2=k2,
        kind=kind,
        rho=float(ctrl.get("rho", 1.0)),
        tissf=tissf,
        disturbance=profile,
        x0=tuple(float(v) for v in sim.get("x0", (0.0, 0.0, 0.0, 0.0))),
        dt=dt,
        horizon=horizon,
        seed=seed,
        rmse_window=window,
        raw=copy.deepcopy(doc),
    )


def read_config(path) -> dict:
    """Parse a config file. Raises FileNotFoundError / ConfigError."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    if doc is None:
        raise ConfigError(f"{path} is empty")
    return doc


def load_scenario(path) -> Scenario:
    return scenario_from_dict(read_config(path))


def with_override(doc: dict, param: str, value: float) -> dict:
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    section, key = SWEEP_PARAMS[param]
    out = copy.deepcopy(doc)
    out.setdefault(section, {})[key] = float(value)
    return out
