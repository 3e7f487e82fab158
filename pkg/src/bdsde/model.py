"""Problem specification: coefficients f and g, terminal functional, registry.

Coefficients are restricted to a small declarative family so that configs
stay language-agnostic and the hot kernels can dispatch on an integer code
instead of calling back into Python.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, InvalidModelError, StepTooCoarseError, UnknownModelError
from .grid_noise import TimeGrid

#: integer codes used by the backward-induction kernels
KIND_CODES = {
    "zero": 0,
    "constant": 1,
    "linear_yz": 2,
    "time_only": 3,
    "scaled_sine": 4,
    "tabulated_affine": 5,
}


class ExactnessOnlyWarning(UserWarning):
    """A model outside (H.1) is being run for oracle comparison only."""


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Declarative coefficient with evaluation semantics ``value(t, y, z)``.

    Kinds: ``zero`` (0), ``constant`` (c), ``linear_yz`` (a*y + b*z),
    ``time_only`` (t itself), ``scaled_sine`` (a*sin(y)), and
    ``tabulated_affine`` (a(t)*y + b(t)*z with piecewise-constant tables).
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    knots: tuple = ()
    a_values: tuple = ()
    b_values: tuple = ()

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise InvalidArgumentError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "tabulated_affine":
            if not self.knots or len(self.knots) != len(self.a_values) or len(
                self.knots
            ) != len(self.b_values):
                raise InvalidArgumentError(
                    "tabulated_affine needs equal-length knots/a_values/b_values"
                )

    @staticmethod
    def zero() -> "Coefficient":
        return Coefficient("zero")

    @staticmethod
    def constant(c: float) -> "Coefficient":
        return Coefficient("constant", c=float(c))

    @staticmethod
    def linear(a: float, b: float) -> "Coefficient":
        return Coefficient("linear_yz", a=float(a), b=float(b))

    @staticmethod
    def time_only() -> "Coefficient":
        return Coefficient("time_only")

    @staticmethod
    def sine(a: float = 1.0) -> "Coefficient":
        return Coefficient("scaled_sine", a=float(a))

    @staticmethod
    def tabulated(knots, a_values, b_values) -> "Coefficient":
        return Coefficient(
            "tabulated_affine",
            knots=tuple(float(t) for t in knots),
            a_values=tuple(float(v) for v in a_values),
            b_values=tuple(float(v) for v in b_values),
        )

    def _table_at(self, t):
        idx = np.clip(
            np.searchsorted(np.asarray(self.knots), t, side="right") - 1,
            0,
            len(self.knots) - 1,
        )
        return np.asarray(self.a_values)[idx], np.asarray(self.b_values)[idx]

    def value(self, t, y, z):
        """Evaluate at (t, y, z); broadcasts over array-valued y and z."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.c
        if self.kind == "linear_yz":
            return self.a * y + self.b * z
        if self.kind == "time_only":
            return t
        if self.kind == "scaled_sine":
            return self.a * np.sin(y)
        at, bt = self._table_at(t)
        return at * y + bt * z

    @property
    def time_dependent(self) -> bool:
        return self.kind in ("time_only", "tabulated_affine")

    @property
    def depends_y(self) -> bool:
        if self.kind == "linear_yz":
            return self.a != 0.0
        if self.kind == "scaled_sine":
            return self.a != 0.0
        if self.kind == "tabulated_affine":
            return any(v != 0.0 for v in self.a_values)
        return False

    @property
    def depends_z(self) -> bool:
        if self.kind == "linear_yz":
            return self.b != 0.0
        if self.kind == "tabulated_affine":
            return any(v != 0.0 for v in self.b_values)
        return False

    def kernel_descriptor(self, grid: TimeGrid):
        """(kind code, p0, p1, per-time-index a table, b table) for the kernels.

        Tables are evaluated at every grid time so the kernels never call
        back into Python; non-tabulated kinds get zero-filled placeholders.
        """
        code = KIND_CODES[self.kind]
        tab_a = np.zeros(grid.n + 1)
        tab_b = np.zeros(grid.n + 1)
        p0 = p1 = 0.0
        if self.kind == "constant":
            p0 = self.c
        elif self.kind == "linear_yz":
            p0, p1 = self.a, self.b
        elif self.kind == "scaled_sine":
            p0 = self.a
        elif self.kind == "tabulated_affine":
            at, bt = self._table_at(grid.times)
            tab_a[:] = at
            tab_b[:] = bt
        return (code, p0, p1, tab_a, tab_b)


@dataclass(frozen=True, eq=False)
class TerminalFunctional:
    """Terminal value as a deterministic function of the discrete W-path.

    ``identity``, ``constant`` and ``call`` depend on W_T only and therefore
    collapse onto the recombining-tree nodes; ``path_sum`` is genuinely
    path-dependent (sqrt(delta) * sum of weighted path values) and is only
    usable where full paths are enumerated.
    """

    kind: str
    c: float = 0.0
    strike: float = 0.0
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("identity", "constant", "call", "path_sum"):
            raise InvalidArgumentError(f"unknown terminal kind {self.kind!r}")

    @staticmethod
    def identity() -> "TerminalFunctional":
        return TerminalFunctional("identity")

    @staticmethod
    def constant(c: float) -> "TerminalFunctional":
        return TerminalFunctional("constant", c=float(c))

    @staticmethod
    def call(strike: float) -> "TerminalFunctional":
        return TerminalFunctional("call", strike=float(strike))

    @staticmethod
    def path_sum(weights=()) -> "TerminalFunctional":
        return TerminalFunctional("path_sum", weights=tuple(float(w) for w in weights))

    @property
    def terminal_only(self) -> bool:
        return self.kind != "path_sum"

    def terminal_value(self, w_T):
        """Value as a function of the terminal walk value (broadcasts)."""
        if self.kind == "identity":
            return np.asarray(w_T, dtype=float)
        if self.kind == "constant":
            return np.full_like(np.asarray(w_T, dtype=float), self.c)
        if self.kind == "call":
            return np.maximum(np.asarray(w_T, dtype=float) - self.strike, 0.0)
        from .errors import UnsupportedModelError

        raise UnsupportedModelError(
            "path_sum terminal functional depends on the whole path, not W_T"
        )

    def path_value(self, w_path, grid: TimeGrid) -> float:
        """Value on one realized W-path (array of n+1 walk values)."""
        w = np.asarray(w_path, dtype=float)
        if len(w) != grid.n + 1:
            raise InvalidArgumentError("W-path length must be n+1")
        if self.kind == "path_sum":
            weights = np.asarray(self.weights) if self.weights else np.ones(grid.n + 1)
            if len(weights) != grid.n + 1:
                raise InvalidArgumentError("path_sum weights length must be n+1")
            return float(grid.sqrt_delta * np.dot(weights, w))
        return float(self.terminal_value(w[-1]))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Generator f, backward coefficient g, terminal functional, and the
    declared Lipschitz metadata (K for f and the y-part of g, alpha for the
    z-part of g).

    ``exactness_only`` marks models that violate alpha < 1 but have a closed
    form; they are runnable for oracle comparison with a warning.
    """

    f: Coefficient
    g: Coefficient
    phi: TerminalFunctional
    K: float
    alpha: float
    name: str = ""
    exactness_only: bool = False
    theta_contraction: float | None = None

    def __post_init__(self):
        if self.K < 0.0:
            raise InvalidModelError(f"K must be >= 0, got {self.K}")
        if not (self.alpha > 0.0):
            raise InvalidModelError(f"alpha must be positive, got {self.alpha}")
        if self.alpha >= 1.0 and not self.exactness_only:
            raise InvalidModelError(
                f"alpha must satisfy alpha < 1, got {self.alpha} "
                "(set exactness_only for closed-form comparison models)"
            )

    @property
    def f_time_dependent(self) -> bool:
        return self.f.time_dependent

    @property
    def g_time_dependent(self) -> bool:
        return self.g.time_dependent

    @property
    def f_depends_y(self) -> bool:
        return self.f.depends_y

    @property
    def g_depends_z(self) -> bool:
        return self.g.depends_z


def validate_spec(spec: ProblemSpec, grid: TimeGrid) -> ProblemSpec:
    """Gate a spec against the grid: requires delta*K < 1 and alpha < 1.

    Returns the spec annotated with the fixed-point contraction factor
    delta*K.  Models flagged ``exactness_only`` bypass the alpha gate with a
    warning.
    """
    if spec.alpha >= 1.0:
        if spec.exactness_only:
            warnings.warn(
                f"model {spec.name or '<custom>'} has alpha={spec.alpha} >= 1; "
                "running for exactness comparison only",
                ExactnessOnlyWarning,
                stacklevel=2,
            )
        else:
            raise InvalidModelError(f"alpha={spec.alpha} violates alpha < 1")
    dk = grid.delta * spec.K
    if dk >= 1.0:
        minimal_n = math.floor(spec.K * grid.T) + 1
        raise StepTooCoarseError(
            f"delta*K = {dk:g} >= 1; the implicit inversion needs n >= {minimal_n}",
            minimal_n=minimal_n,
        )
    return replace(spec, theta_contraction=dk)


def _linear_spec(a=0.3, b=0.2, c=0.1, d=0.2) -> ProblemSpec:
    a, b, c, d = (float(v) for v in (a, b, c, d))
    if abs(d) >= 1.0:
        raise InvalidModelError(f"linear model needs |d| < 1, got d={d}")
    alpha = abs(d) if d != 0.0 else 0.5
    return ProblemSpec(
        f=Coefficient.linear(a, b),
        g=Coefficient.linear(c, d),
        phi=TerminalFunctional.identity(),
        K=max(abs(a), abs(b), abs(c)),
        alpha=alpha,
        name=f"linear({a:g},{b:g},{c:g},{d:g})",
    )


_REGISTRY = {
    "transport": lambda: ProblemSpec(
        f=Coefficient.zero(),
        g=Coefficient.linear(0.0, 1.0),
        phi=TerminalFunctional.identity(),
        K=0.0,
        alpha=1.0,
        name="transport",
        exactness_only=True,
    ),
    "time_integral": lambda: ProblemSpec(
        f=Coefficient.zero(),
        g=Coefficient.time_only(),
        phi=TerminalFunctional.constant(0.0),
        K=0.0,
        alpha=0.5,
        name="time_integral",
    ),
    "linear": _linear_spec,
    "sine": lambda: ProblemSpec(
        f=Coefficient.sine(1.0),
        g=Coefficient.linear(0.5, 0.0),
        phi=TerminalFunctional.identity(),
        K=1.0,
        alpha=0.5,
        name="sine",
    ),
    "zero": lambda: ProblemSpec(
        f=Coefficient.zero(),
        g=Coefficient.zero(),
        phi=TerminalFunctional.identity(),
        K=0.0,
        alpha=0.5,
        name="zero",
    ),
}

_CALL_RE = re.compile(r"^(?P<key>[A-Za-z_]+)\((?P<args>[^)]*)\)$")


def builtin(name: str, **params) -> ProblemSpec:
    """Return a registered model; ``linear`` accepts a, b, c, d parameters.

    Parenthesized keys like ``linear(0.3,0.2,0.1,0.2)`` are parsed as
    positional parameters, matching the notation used in configs.
    """
    m = _CALL_RE.match(name.strip())
    if m:
        key = m.group("key")
        args = [float(v) for v in m.group("args").split(",") if v.strip()]
        if key != "linear":
            raise UnknownModelError(f"model {key!r} takes no parameters")
        if params or len(args) > 4:
            raise InvalidArgumentError("linear(a,b,c,d) takes at most 4 parameters")
        return _linear_spec(*args)
    key = name.strip()
    if key not in _REGISTRY:
        raise UnknownModelError(f"unknown model {key!r}; known: {sorted(_REGISTRY)}")
    factory = _REGISTRY[key]
    if params:
        if key != "linear":
            raise InvalidArgumentError(f"model {key!r} takes no parameters")
        return _linear_spec(**params)
    return factory()


def registry_keys() -> tuple:
    return tuple(sorted(_REGISTRY))


def lipschitz_excess(spec: ProblemSpec, seed=0, n_pairs: int = 10_000, scale: float = 5.0) -> float:
    """Largest violation of the declared (K, alpha) bounds over random pairs.

    Samples (y, z) argument pairs uniformly in [-scale, scale] at a few fixed
    times and returns max(excess); a correct declaration gives <= 0 up to
    rounding.
    """
    rng = np.random.default_rng(seed)
    t_values = (0.0, 0.37, 1.0)
    worst = -np.inf
    for t in t_values:
        y1, z1, y2, z2 = rng.uniform(-scale, scale, size=(4, n_pairs))
        df = np.abs(
            np.asarray(spec.f.value(t, y1, z1)) - np.asarray(spec.f.value(t, y2, z2))
        )
        dg = np.abs(
            np.asarray(spec.g.value(t, y1, z1)) - np.asarray(spec.g.value(t, y2, z2))
        )
        dy = np.abs(y1 - y2)
        dz = np.abs(z1 - z2)
        worst = max(worst, float(np.max(df - spec.K * (dy + dz))))
        worst = max(worst, float(np.max(dg - spec.K * dy - spec.alpha * dz)))
    return worst
