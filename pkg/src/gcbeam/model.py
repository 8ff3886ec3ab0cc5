"""Domain types of the beam models and reconstruction of 3D fields.

Array conventions are zero-based throughout: ``P[k, i, j]`` stores the
component written ``P^{i+1}_{j+1}`` in labels, and ``N[k, i, j, l]`` stores
``N^{i+1}_{(j+1)(l+1)}``.  Axis 0 always runs over the grid.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

ENDS = ("0", "L")


class Regime(enum.IntEnum):
    """Kinematic regime, ordered by kinematic freedom."""

    Holonomic = 1
    SemiHolonomic = 2
    NonHolonomic = 3

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for member in cls:
            if member.name.lower() == key:
                return member
        raise ValueError(f"unknown regime {value!r}")


def _frozen_array(value, shape=None) -> Optional[np.ndarray]:
    if value is None:
        return None
    arr = np.array(value, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BeamConfig:
    """Constitutive scalars, geometry and regime of one beam.

    ``ell4_over_12`` is the transversal second moment scalar; for a circular
    section of diameter ``ell`` pass ``pi * ell**4 / 32`` instead.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0
    e: float = 1.0
    L: float = 1.0
    ell4_over_12: float = 0.0
    regime: Regime = Regime.NonHolonomic
    frozen_N_jalpha: Optional[np.ndarray] = None
    frozen_u_alpha_slope: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "e", "L", "ell4_over_12"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        object.__setattr__(self, "frozen_N_jalpha", _frozen_array(self.frozen_N_jalpha, (3, 3, 2)))
        object.__setattr__(
            self, "frozen_u_alpha_slope", _frozen_array(self.frozen_u_alpha_slope, (3, 2))
        )

    @property
    def moduli(self) -> dict:
        return {k: getattr(self, k) for k in "abcde"}

    def replace(self, **changes) -> "BeamConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return BeamConfig(**values)

    def __eq__(self, other):
        if not isinstance(other, BeamConfig):
            return NotImplemented
        for f in self.__dataclass_fields__:
            x, y = getattr(self, f), getattr(other, f)
            if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
                if x is None or y is None or not np.array_equal(x, y):
                    return False
            elif x != y:
                return False
        return True

    __hash__ = None


@dataclass(frozen=True)
class FieldState:
    """Samples of the 1D fields ``u``, ``P`` and ``N`` on a uniform grid."""

    X: np.ndarray
    u: np.ndarray
    P: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        n = X.shape[0]
        if X.ndim != 1 or n < 5:
            raise ValueError(f"grid needs at least 5 samples, got {X.shape}")
        steps = np.diff(X)
        if not np.all(steps > 0) or np.ptp(steps) > 1e-9 * max(abs(X[-1]), 1.0):
            raise ValueError("grid must be uniform and increasing")
        arrays = {"X": X}
        for name, shape in (("u", (n, 3)), ("P", (n, 3, 3)), ("N", (n, 3, 3, 3))):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arrays[name] = arr
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, n: int, L: float = 1.0) -> "FieldState":
        return cls(np.linspace(0.0, L, n), np.zeros((n, 3)), np.zeros((n, 3, 3)), np.zeros((n, 3, 3, 3)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def L(self) -> float:
        return float(self.X[-1] - self.X[0])

    def __add__(self, other: "FieldState") -> "FieldState":
        return FieldState(self.X, self.u + other.u, self.P + other.P, self.N + other.N)

    def __sub__(self, other: "FieldState") -> "FieldState":
        return FieldState(self.X, self.u - other.u, self.P - other.P, self.N - other.N)

    def scaled(self, factor: float) -> "FieldState":
        return FieldState(self.X, factor * self.u, factor * self.P, factor * self.N)

    def replace(self, **arrays) -> "FieldState":
        values = {"X": self.X, "u": self.u, "P": self.P, "N": self.N}
        values.update(arrays)
        return FieldState(**values)


Sampler = Callable[[np.ndarray], np.ndarray]


def _as_sampler(value, shape) -> Optional[Sampler]:
    if value is None:
        return None
    if callable(value):
        return value
    const = np.array(value, dtype=float)
    if const.shape != shape:
        raise ValueError(f"constant load must have shape {shape}, got {const.shape}")
    return lambda X: np.broadcast_to(const, (len(X),) + shape).copy()


@dataclass(frozen=True)
class LoadSet:
    """Bulk force densities and endpoint tractions.

    Bulk loads are callables mapping an array of abscissae to stacked values
    (or constants, which are broadcast); ``None`` means zero.  ``*_left``
    tractions act at ``X = 0`` and ``*_right`` at ``X = L``; each is the work
    conjugate of the field value at that end.
    """

    f0: Optional[Sampler] = None
    f1: Optional[Sampler] = None
    f2: Optional[Sampler] = None
    T0_left: np.ndarray = field(default_factory=lambda: np.zeros(3))
    T0_right: np.ndarray = field(default_factory=lambda: np.zeros(3))
    T1_left: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    T1_right: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    T2_left: np.ndarray = field(default_factory=lambda: np.zeros((3, 3, 3)))
    T2_right: np.ndarray = field(default_factory=lambda: np.zeros((3, 3, 3)))

    def __post_init__(self):
        for name, shape in (("f0", (3,)), ("f1", (3, 3)), ("f2", (3, 3, 3))):
            object.__setattr__(self, name, _as_sampler(getattr(self, name), shape))
        for name, shape in (("T0", (3,)), ("T1", (3, 3)), ("T2", (3, 3, 3))):
            for side in ("left", "right"):
                key = f"{name}_{side}"
                arr = np.array(getattr(self, key), dtype=float)
                if arr.shape != shape:
                    raise ValueError(f"{key} must have shape {shape}")
                if not np.all(np.isfinite(arr)):
                    raise ValueError(f"{key} has non-finite entries")
                arr.setflags(write=False)
                object.__setattr__(self, key, arr)

    def bulk(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bulk loads sampled at ``X``: arrays of shape (len(X), 3[,3[,3]])."""
        X = np.asarray(X, dtype=float)
        out = []
        for name, shape in (("f0", (3,)), ("f1", (3, 3)), ("f2", (3, 3, 3))):
            fn = getattr(self, name)
            if fn is None:
                out.append(np.zeros((len(X),) + shape))
                continue
            vals = np.array(fn(X), dtype=float).reshape((len(X),) + shape)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"{name} has non-finite samples")
            out.append(vals)
        return tuple(out)

    def traction(self, order: int, end: str) -> np.ndarray:
        side = "left" if end == "0" else "right"
        return getattr(self, f"T{order}_{side}")

    def scaled(self, factor: float) -> "LoadSet":
        def scale(fn):
            return None if fn is None else (lambda X, fn=fn: factor * np.asarray(fn(X), dtype=float))

        values = {k: factor * getattr(self, k) for k in self.__dataclass_fields__ if k.startswith("T")}
        return LoadSet(scale(self.f0), scale(self.f1), scale(self.f2), **values)

    def __add__(self, other: "LoadSet") -> "LoadSet":
        def add(f, g):
            if f is None:
                return g
            if g is None:
                return f
            return lambda X: np.asarray(f(X), dtype=float) + np.asarray(g(X), dtype=float)

        values = {
            k: getattr(self, k) + getattr(other, k)
            for k in self.__dataclass_fields__
            if k.startswith("T")
        }
        return LoadSet(add(self.f0, other.f0), add(self.f1, other.f1), add(self.f2, other.f2), **values)


# ---------------------------------------------------------------------------
# labels


def u_label(i: int) -> str:
    return f"u^{i + 1}"


def P_label(i: int, j: int) -> str:
    return f"P^{i + 1}_{j + 1}"


def N_label(i: int, j: int, k: int) -> str:
    return f"N^{i + 1}_{j + 1}{k + 1}"


def derivative_label(label: str, order: int) -> str:
    """``u^1`` -> ``u^1_,1``, ``P^1_2`` -> ``P^1_2,11``."""
    if order == 0:
        return label
    suffix = "1" * order
    return f"{label}_,{suffix}" if "_" not in label else f"{label},{suffix}"


def regime_fields(regime: Regime) -> list[str]:
    """Scalar unknowns of a regime in canonical order."""
    labels = [u_label(i) for i in range(3)]
    if regime >= Regime.SemiHolonomic:
        labels += [P_label(i, j) for i, j in itertools.product(range(3), repeat=2)]
    if regime == Regime.NonHolonomic:
        labels += [N_label(i, j, k) for i, j, k in itertools.product(range(3), repeat=3)]
    return labels


def all_fields() -> list[str]:
    return regime_fields(Regime.NonHolonomic)


def field_index(label: str) -> tuple[str, tuple[int, ...]]:
    """Parse a field label into (kind, zero-based indices)."""
    kind, rest = label[0], label[2:]
    if kind == "u":
        return kind, (int(rest) - 1,)
    upper, lower = rest.split("_")
    return kind, (int(upper) - 1,) + tuple(int(ch) - 1 for ch in lower)


def field_values(state: FieldState, label: str) -> np.ndarray:
    kind, idx = field_index(label)
    arr = {"u": state.u, "P": state.P, "N": state.N}[kind]
    return arr[(slice(None),) + idx]


def parse_dof(label: str) -> tuple[str, int]:
    """Split a boundary DOF label into (field label, derivative order)."""
    if "," not in label:
        return label, 0
    base, suffix = label.split(",")
    if base.endswith("_"):
        base = base[:-1]
    if not suffix or set(suffix) != {"1"}:
        raise ValueError(f"bad derivative suffix in {label!r}")
    return base, len(suffix)


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundarySpec:
    """Anchored values per (endpoint, boundary DOF label); everything else is free.

    Endpoints are ``"0"`` and ``"L"``.  DOF labels are field labels such as
    ``"u^2"`` or ``"N^1_12"``, optionally with derivative suffixes
    (``"P^1_2,1"``, ``"u^2_,11"``).
    """

    anchors: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (end, label), value in dict(self.anchors).items():
            if end not in ENDS:
                raise ValueError(f"unknown endpoint {end!r}")
            parse_dof(label)
            clean[(end, label)] = float(value)
        object.__setattr__(self, "anchors", clean)

    def is_anchored(self, end: str, label: str) -> bool:
        return (end, label) in self.anchors

    def value(self, end: str, label: str) -> Optional[float]:
        return self.anchors.get((end, label))

    def with_anchors(self, mapping: Mapping[tuple[str, str], float]) -> "BoundarySpec":
        merged = dict(self.anchors)
        merged.update(mapping)
        return BoundarySpec(merged)

    def without(self, predicate) -> "BoundarySpec":
        return BoundarySpec({k: v for k, v in self.anchors.items() if not predicate(*k)})

    @classmethod
    def clamp(cls, end: str, labels, value: float = 0.0) -> "BoundarySpec":
        return cls({(end, lab): value for lab in labels})


def cantilever_bcs(config: BeamConfig, end: str = "0") -> BoundarySpec:
    """Homogeneous clamp at one end that removes every null mode of the regime.

    DOFs without a boundary term for the given moduli (``P^i_1`` when
    ``e = 0``, for instance) are left out.
    """
    from .terms import boundary_dofs  # deferred: terms depends on this module

    regime = config.regime
    labels = [u_label(i) for i in range(3)]
    if regime == Regime.Holonomic:
        labels += [derivative_label(u_label(i), 1) for i in range(3)]
    else:
        labels += [P_label(i, j) for i, j in itertools.product(range(3), repeat=2)]
    if regime == Regime.NonHolonomic:
        labels += [N_label(i, j, k) for i, j, k in itertools.product(range(3), range(3), (1, 2))]
    allowed = set(boundary_dofs(config))
    return BoundarySpec.clamp(end, [lab for lab in labels if lab in allowed])


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


def validate_config(config: BeamConfig, bcs: BoundarySpec, loads: Optional[LoadSet] = None) -> ValidationReport:
    """Check the side conditions a setup must satisfy before solving."""
    from . import terms  # deferred: terms depends on this module

    out = []
    for name, value in config.moduli.items():
        if not value >= 0:
            out.append(f"negative modulus {name}={value}")
    if not config.L > 0:
        out.append("degenerate length")
    if not config.ell4_over_12 >= 0:
        out.append("negative transversal moment")

    regime = config.regime
    if regime == Regime.SemiHolonomic and config.frozen_N_jalpha is None:
        out.append("missing frozen N constants")
    if regime == Regime.Holonomic and config.frozen_u_alpha_slope is None:
        out.append("missing frozen u slope constants")
    if regime != Regime.SemiHolonomic and config.frozen_N_jalpha is not None:
        out.append("frozen N constants given outside the semi-holonomic regime")
    if regime != Regime.Holonomic and config.frozen_u_alpha_slope is not None:
        out.append("frozen u slope constants given outside the holonomic regime")
    if out:
        return ValidationReport(tuple(out))

    allowed = set(terms.boundary_dofs(config))
    for (end, label) in sorted(bcs.anchors):
        if label not in allowed:
            out.append(f"anchor on {label} at {end} has no boundary term in this regime")
    if loads is not None:
        for end, label, value in terms.traction_entries(config, loads):
            if value != 0.0 and label not in allowed:
                out.append(f"traction on {label} at {end} has no boundary term in this regime")
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# reconstruction


def reconstruct_3d(state: FieldState, config: BeamConfig, X2: float, X3: float, X1: Optional[float] = None):
    """Displacement and distortion at a material point of the 3D beam.

    Uses the first-order transversal expansion at the grid node nearest to
    ``X1`` (every node when ``X1`` is None, giving stacked arrays).
    """
    half = 0.5 * (12.0 * config.ell4_over_12) ** 0.25
    for name, value in (("X2", X2), ("X3", X3)):
        if abs(value) > half * (1 + 1e-12):
            raise ValueError(f"{name}={value} outside the transversal extent |X|<={half:.6g}")
    Xa = np.array([X2, X3], dtype=float)
    u3 = state.u + state.P[:, :, 1:] @ Xa
    P3 = state.P + state.N[:, :, :, 1:] @ Xa
    if X1 is None:
        return u3, P3
    k = int(np.argmin(np.abs(state.X - X1)))
    return u3[k], P3[k]
