"""Experiment configuration: one JSON document, validated strictly."""
import hashlib
import json
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from .exceptions import ConfigError

__all__ = ["ExperimentConfig", "load_config", "config_hash"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class VhcOverride(_Strict):
    # cart-pendulum: [amplitude a] in x = -a sin(theta); tiptoebot: [A1, A2]
    coefficients: Optional[List[float]] = None
    kp: Optional[Union[float, List[List[float]]]] = None
    kd: Optional[Union[float, List[List[float]]]] = None


class OrbitConfig(_Strict):
    anchor: Optional[Tuple[float, float]] = None
    c_d: Optional[float] = None

    @model_validator(mode="after")
    def _one_of(self):
        if self.anchor is not None and self.c_d is not None:
            raise ValueError("give either orbit.anchor or orbit.c_d, not both")
        return self


class SectionConfig(_Strict):
    q2_star: float = 0.0
    direction: Literal[1, -1] = 1


class ImpulseConfig(_Strict):
    mode: Literal["jump", "high-gain"] = "jump"
    Lam: PositiveFloat = 1.0
    mu: PositiveFloat = 0.005
    eps3: PositiveFloat = 1e-4


class LqrConfig(_Strict):
    Q: Optional[List[List[float]]] = None
    R: Optional[List[List[float]]] = None
    gain: Optional[List[List[float]]] = None


class Tolerances(_Strict):
    rtol: PositiveFloat = 1e-10
    atol: PositiveFloat = 1e-12
    tol_reg: PositiveFloat = 1e-6
    quad_tol: PositiveFloat = 1e-10
    eps1: PositiveFloat = 1e-5
    eps2: PositiveFloat = 1e-5
    dare_tol: PositiveFloat = 1e-9
    tol_rank: PositiveFloat = 1e-8
    fixed_point_tol: PositiveFloat = 1e-9
    orbit_tol: PositiveFloat = 0.05


class PortraitConfig(_Strict):
    q2: Tuple[float, float, int] = (-1.0, 1.0, 81)
    q2dot: Tuple[float, float, int] = (-4.0, 4.0, 81)

    @model_validator(mode="after")
    def _counts(self):
        if self.q2[2] < 0 or self.q2dot[2] < 0:
            raise ValueError("grid counts must be non-negative")
        return self


class ExperimentConfig(_Strict):
    model: Literal["cart-pendulum", "tiptoebot"] = "cart-pendulum"
    params: dict = Field(default_factory=dict)
    vhc: VhcOverride = VhcOverride()
    orbit: OrbitConfig = OrbitConfig()
    section: SectionConfig = SectionConfig()
    impulse: ImpulseConfig = ImpulseConfig()
    lqr: LqrConfig = LqrConfig()
    tolerances: Tolerances = Tolerances()
    t_end: PositiveFloat = 30.0
    divergence_bound: PositiveFloat = 10.0
    # full state [q; qd] in the model's natural coordinate order
    x0: Optional[List[float]] = None
    q2_range: Optional[Tuple[float, float]] = None
    portrait: PortraitConfig = PortraitConfig()
    out_dir: str = "out"
    seed: int = 0

    def model_params(self):
        """Parameter overrides with the VHC section folded in."""
        p = dict(self.params)
        v = self.vhc
        if v.coefficients is not None:
            if self.model == "cart-pendulum":
                if len(v.coefficients) != 1:
                    raise ConfigError("cart-pendulum takes one VHC coefficient")
                p["vhc_amplitude"] = v.coefficients[0]
            else:
                if len(v.coefficients) != 2:
                    raise ConfigError("tiptoebot takes two VHC coefficients")
                p["A1"], p["A2"] = v.coefficients
        for key in ("kp", "kd"):
            val = getattr(v, key)
            if val is not None:
                p[key] = val
        return p

    def estimator_kwargs(self):
        t = self.tolerances
        kw = dict(model=self.model, params=self.model_params(), anchor=self.orbit.anchor, c_d=self.orbit.c_d,
                  q2_star=self.section.q2_star, direction=self.section.direction, Q=self.lqr.Q, R=self.lqr.R,
                  gain=self.lqr.gain, eps1=t.eps1, eps2=t.eps2, rtol=t.rtol, atol=t.atol, tol_reg=t.tol_reg,
                  quad_tol=t.quad_tol, dare_tol=t.dare_tol, tol_rank=t.tol_rank,
                  fixed_point_tol=t.fixed_point_tol)
        if self.q2_range is not None:
            kw["q2_range"] = self.q2_range
        return kw


def config_hash(cfg):
    """SHA-256 of the canonical JSON form of ``cfg``."""
    canon = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _set_path(doc, path, value):
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {path!r}: {k!r} is not a section")
    node[keys[-1]] = value


def load_config(path=None, overrides=None):
    """Read a JSON config (optional) and apply dotted-key overrides."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
    for key, value in (overrides or {}).items():
        _set_path(doc, key, value)
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
