"""Named parameter vectors, transforms, and model families.

A parameter vector orders the copula parameters (correlation range,
smoothness, optional anisotropy, then radial-law parameters), each
with a bound-respecting transform so derivative-free optimizers can
work in an unconstrained space. A model family names a radial law,
declares its free parameters, and builds the full mixture model from
a parameter vector and a site collection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .correlation import CorrelationModel, SiteSet, build_correlation
from .mixture import MixtureModel
from .radial import (
    BoxCoxScale,
    Dirac,
    ExtWeibull,
    GpdScale,
    ParetoSlash,
    Rayleigh,
    StudentRadial,
)

__all__ = [
    "ModelFamily",
    "ParamVector",
    "Parameter",
    "build_model",
    "default_params",
    "family",
    "family_names",
]


def _logit2(v: float) -> float:
    return math.log(v / (2.0 - v))


def _inv_logit2(z: float) -> float:
    return 2.0 / (1.0 + math.exp(-z))


# forward maps to the unconstrained line, inverse maps back
_TRANSFORMS = {
    "identity": (lambda v: v, lambda z: z),
    "log": (math.log, math.exp),
    "logit2": (_logit2, _inv_logit2),
    "shifted-log": (lambda v: math.log(v - 1.0), lambda z: 1.0 + math.exp(z)),
    "angle": (lambda v: v, lambda z: z % math.pi),
}


@dataclass(frozen=True)
class Parameter:
    """One named scalar with bounds, a transform tag, and a free flag."""

    name: str
    value: float
    transform: str = "identity"
    bounds: tuple = (-math.inf, math.inf)
    free: bool = True

    def __post_init__(self):
        if self.transform not in _TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        value = float(self.value)
        lo, hi = self.bounds
        if not np.isfinite(value):
            raise ValueError(f"{self.name} must be finite, got {value}")
        if not lo <= value <= hi:
            raise ValueError(
                f"{self.name}={value:g} outside bounds [{lo:g}, {hi:g}]")
        object.__setattr__(self, "value", value)
        if self.free:
            z = self.to_unconstrained()
            if not np.isfinite(z):
                raise ValueError(
                    f"free parameter {self.name}={value:g} maps to a "
                    f"non-finite unconstrained value; fix it or move it "
                    f"off the boundary")
            back = self.from_unconstrained(z)
            if abs(back - value) > 1e-9 * max(1.0, abs(value)):
                raise ValueError(
                    f"transform for {self.name} does not round-trip "
                    f"({value:g} -> {back:g})")

    def to_unconstrained(self) -> float:
        return float(_TRANSFORMS[self.transform][0](self.value))

    def from_unconstrained(self, z: float) -> float:
        return float(_TRANSFORMS[self.transform][1](float(z)))


class ParamVector:
    """Ordered, named copula parameters with transform bookkeeping.

    Parameters
    ----------
    params : sequence of Parameter

    Notes
    -----
    Instances are immutable; updates go through :meth:`replace` or
    :meth:`with_free_array`, which return new vectors.
    """

    def __init__(self, params):
        params = tuple(params)
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        if not params:
            raise ValueError("parameter vector cannot be empty")
        self._params = params
        self._index = {p.name: i for i, p in enumerate(params)}

    @property
    def params(self) -> tuple:
        return self._params

    @property
    def names(self) -> tuple:
        return tuple(p.name for p in self._params)

    @property
    def free_names(self) -> tuple:
        return tuple(p.name for p in self._params if p.free)

    def __getitem__(self, name: str) -> float:
        return self._params[self._index[name]].value

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self._params)

    def __repr__(self) -> str:
        body = ", ".join(
            f"{p.name}={p.value:.4g}" + ("" if p.free else " (fixed)")
            for p in self._params)
        return f"ParamVector({body})"

    def values(self) -> dict:
        return {p.name: p.value for p in self._params}

    def replace(self, **updates) -> "ParamVector":
        """New vector with named values replaced (free flags kept)."""
        out = list(self._params)
        for name, value in updates.items():
            if name not in self._index:
                raise KeyError(f"no parameter named {name!r}")
            i = self._index[name]
            out[i] = replace(out[i], value=float(value))
        return ParamVector(out)

    def fix(self, *names) -> "ParamVector":
        """New vector with the named parameters frozen at their values."""
        out = []
        for p in self._params:
            out.append(replace(p, free=False) if p.name in names else p)
        missing = set(names) - set(self.names)
        if missing:
            raise KeyError(f"no parameter named {sorted(missing)[0]!r}")
        return ParamVector(out)

    def free_array(self) -> np.ndarray:
        """Unconstrained coordinates of the free parameters, in order."""
        return np.array([p.to_unconstrained()
                         for p in self._params if p.free])

    def with_free_array(self, z) -> "ParamVector":
        """New vector with free parameters set from unconstrained z."""
        z = np.asarray(z, dtype=float)
        free = [p for p in self._params if p.free]
        if z.shape != (len(free),):
            raise ValueError(
                f"expected {len(free)} unconstrained values, got {z.shape}")
        updates = {p.name: p.from_unconstrained(zi)
                   for p, zi in zip(free, z)}
        return self.replace(**updates)

    def to_dict(self) -> dict:
        """JSON-ready description (names, values, transforms, free flags)."""
        return {
            p.name: {
                "value": p.value,
                "transform": p.transform,
                "free": bool(p.free),
            }
            for p in self._params
        }


@dataclass(frozen=True)
class ModelFamily:
    """A named radial law plus its free-parameter declarations."""

    name: str
    radial_params: tuple = ()
    make_radial: object = None
    # extra optimizer starts in (name, value) form, used for families
    # whose likelihood has known separate local maxima
    extra_starts: tuple = ()

    def radial(self, values: dict):
        return self.make_radial(values)


def _fam(name, params, maker, extra=()):
    return ModelFamily(name=name, radial_params=tuple(params),
                       make_radial=maker, extra_starts=tuple(extra))


_FAMILIES = {
    "gauss": _fam("gauss", [], lambda v: Dirac(1.0)),
    "student": _fam(
        "student",
        [Parameter("df", 5.0, "log", (0.0, math.inf))],
        lambda v: StudentRadial(v["df"])),
    "rayleigh": _fam("rayleigh", [], lambda v: Rayleigh()),
    "slash": _fam(
        "slash",
        [Parameter("gamma", 1.0, "log", (0.0, math.inf))],
        lambda v: ParetoSlash(v["gamma"])),
    "gpd": _fam(
        "gpd",
        [Parameter("xi", 1.0, "log", (0.0, math.inf))],
        lambda v: GpdScale(v["xi"])),
    "model2": _fam(
        "model2",
        [Parameter("beta", 1.0, "log", (0.0, math.inf)),
         Parameter("gamma", 1.0, "log", (0.0, math.inf))],
        lambda v: ExtWeibull(v["beta"], v["gamma"])),
    "model3": _fam(
        "model3",
        [Parameter("beta", 0.5, "identity")],
        lambda v: BoxCoxScale(v["beta"]),
        extra=(("beta", -0.5),)),
}


def family_names() -> tuple:
    return tuple(sorted(_FAMILIES))


def family(name: str) -> ModelFamily:
    try:
        return _FAMILIES[name]
    except KeyError:
        raise ValueError(
            f"unknown model family {name!r}; choose from "
            f"{', '.join(family_names())}") from None


def default_params(family_name: str, *, anisotropic: bool = False,
                   **overrides) -> ParamVector:
    """Default parameter vector for a model family.

    Correlation parameters come first (lam, nu, then ratio and angle
    when ``anisotropic``), followed by the family's radial parameters.
    Keyword overrides replace default values; parameters named in
    ``fixed`` (an optional iterable override) are frozen.
    """
    fam = family(family_name)
    fixed = set(overrides.pop("fixed", ()))
    params = [
        Parameter("lam", 1.0, "log", (0.0, math.inf)),
        Parameter("nu", 1.0, "logit2", (0.0, 2.0)),
    ]
    if anisotropic:
        params.append(Parameter("ratio", 1.5, "shifted-log", (1.0, math.inf)))
        params.append(Parameter("angle", 0.5, "angle", (-math.inf, math.inf)))
    params.extend(fam.radial_params)
    vec = ParamVector(params)
    unknown = set(overrides) - set(vec.names)
    if unknown:
        raise KeyError(f"no parameter named {sorted(unknown)[0]!r}")
    if overrides:
        vec = vec.replace(**overrides)
    if fixed:
        vec = vec.fix(*fixed)
    return vec


def correlation_from(params: ParamVector) -> CorrelationModel:
    vals = params.values()
    return CorrelationModel(
        lam=vals["lam"], nu=vals["nu"],
        ratio=vals.get("ratio", 1.0), angle=vals.get("angle", 0.0))


def build_model(family_name: str, params: ParamVector, sites: SiteSet,
                **model_kw) -> MixtureModel:
    """Mixture model on ``sites`` for a family at a parameter vector."""
    fam = family(family_name)
    radial = fam.radial(params.values())
    corr = correlation_from(params)
    return MixtureModel(radial, build_correlation(sites, corr),
                        sites=sites, correlation=corr, **model_kw)
