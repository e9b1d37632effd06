"""Scalar function catalog and divided-difference symbols.

The catalog provides two-variable functions f(s, t) with closed-form
partial derivatives.  From such an f the module builds the two symbols
whose double operator integrals reproduce f(B1, B2) - f(A1, A2): each is
a one-variable divided difference of f weighted by (x_j + i), extended
to the diagonal by the matching partial derivative.

Also here: constructive boundedness certificates that estimate the best
constant in the weighted difference hypotheses on a finite grid and then
check the implied sup bound at every grid point.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    ConfigError,
    GridMissingOrigin,
    MissingDerivative,
    SymbolEvaluationFailure,
)

__all__ = [
    "BoundednessCertificate",
    "Function2",
    "GrowthScan",
    "Symbol",
    "certificate_growth_scan",
    "const",
    "coord1",
    "coord2",
    "divided_diff_symbol_var1",
    "divided_diff_symbol_var2",
    "exp2",
    "finite_diff_check",
    "function_from_config",
    "gauss",
    "lemma_triv1_certificate",
    "lemma_triv_certificate",
    "monomial",
    "multiply",
    "poly",
    "res1",
    "res2",
    "res12",
    "split_symbol_var1",
    "symmetric_grid",
]

# relative guard against cancellation when a difference quotient degenerates
COINCIDENCE_REL_TOL = 1e-12


def _wrap(fn, s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(s.shape, t.shape)
    out = np.asarray(fn(s, t), dtype=complex)
    out = np.array(np.broadcast_to(out, shape))
    if out.ndim == 0:
        return complex(out)
    return out


class Function2:
    """Complex-valued function of two real variables.

    ``fn`` and the optional partials ``d1`` (in the first variable) and
    ``d2`` (in the second) must accept numpy arrays and broadcast.  All
    evaluation methods accept scalars or arrays and return complex values
    in the broadcast shape.
    """

    def __init__(self, label, fn, d1=None, d2=None):
        self.label = str(label)
        self._fn = fn
        self._d1 = d1
        self._d2 = d2

    def __repr__(self):
        return f"Function2({self.label})"

    @property
    def has_d1(self):
        return self._d1 is not None

    @property
    def has_d2(self):
        return self._d2 is not None

    def eval(self, s, t):
        return _wrap(self._fn, s, t)

    def partial1(self, s, t):
        if self._d1 is None:
            raise MissingDerivative(f"{self.label} has no first-variable partial")
        return _wrap(self._d1, s, t)

    def partial2(self, s, t):
        if self._d2 is None:
            raise MissingDerivative(f"{self.label} has no second-variable partial")
        return _wrap(self._d2, s, t)


# ---------------------------------------------------------------------------
# catalog


def const(c=1.0):
    """Constant function (s, t) -> c."""
    c = complex(c)
    return Function2(
        f"const({c:g})" if c.imag == 0 else f"const({c})",
        lambda s, t: c,
        d1=lambda s, t: 0.0,
        d2=lambda s, t: 0.0,
    )


def coord1():
    """First coordinate (s, t) -> s."""
    return Function2("coord1", lambda s, t: s, d1=lambda s, t: 1.0, d2=lambda s, t: 0.0)


def coord2():
    """Second coordinate (s, t) -> t."""
    return Function2("coord2", lambda s, t: t, d1=lambda s, t: 0.0, d2=lambda s, t: 1.0)


def monomial(i, j, c=1.0):
    """Monomial c * s^i * t^j with integer exponents i, j >= 0."""
    i, j = int(i), int(j)
    if i < 0 or j < 0:
        raise ConfigError(f"monomial exponents must be nonnegative, got ({i}, {j})")
    c = complex(c)

    def fn(s, t):
        return c * s**i * t**j

    def d1(s, t):
        if i == 0:
            return np.zeros(np.broadcast_shapes(s.shape, t.shape))
        return c * i * s ** (i - 1) * t**j

    def d2(s, t):
        if j == 0:
            return np.zeros(np.broadcast_shapes(s.shape, t.shape))
        return c * j * s**i * t ** (j - 1)

    return Function2(f"monomial({i},{j},{c:g})", fn, d1=d1, d2=d2)


def poly(coeffs):
    """Bivariate polynomial sum_ij coeffs[i][j] * s^i * t^j."""
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    if c.ndim != 2:
        raise ConfigError(f"poly coefficients must form a 2-d table, got ndim {c.ndim}")
    c1 = npoly.polyder(c, axis=0) if c.shape[0] > 1 else np.zeros((1, 1))
    c2 = npoly.polyder(c, axis=1) if c.shape[1] > 1 else np.zeros((1, 1))

    def ev(table):
        def fn(s, t):
            s, t = np.broadcast_arrays(s, t)
            return npoly.polyval2d(s, t, table)

        return fn

    return Function2(f"poly({c.shape[0] - 1}x{c.shape[1] - 1})", ev(c), d1=ev(c1), d2=ev(c2))


def exp2(a, b):
    """Oscillatory exponential e^{i(a s + b t)}."""
    a, b = float(a), float(b)

    def fn(s, t):
        return np.exp(1j * (a * s + b * t))

    return Function2(
        f"exp2(a={a:g},b={b:g})",
        fn,
        d1=lambda s, t: 1j * a * fn(s, t),
        d2=lambda s, t: 1j * b * fn(s, t),
    )


def gauss(alpha=1.0):
    """Gaussian e^{-alpha (s^2 + t^2)} with alpha > 0."""
    alpha = float(alpha)
    if alpha <= 0:
        raise ConfigError(f"gauss needs alpha > 0, got {alpha}")

    def fn(s, t):
        return np.exp(-alpha * (s * s + t * t))

    return Function2(
        f"gauss(alpha={alpha:g})",
        fn,
        d1=lambda s, t: -2.0 * alpha * s * fn(s, t),
        d2=lambda s, t: -2.0 * alpha * t * fn(s, t),
    )


def res1():
    """Resolvent factor 1/(s + i)."""
    return Function2(
        "res1",
        lambda s, t: 1.0 / (s + 1j) + 0.0 * t,
        d1=lambda s, t: -1.0 / (s + 1j) ** 2 + 0.0 * t,
        d2=lambda s, t: 0.0,
    )


def res2():
    """Resolvent factor 1/(t + i)."""
    return Function2(
        "res2",
        lambda s, t: 1.0 / (t + 1j) + 0.0 * s,
        d1=lambda s, t: 0.0,
        d2=lambda s, t: -1.0 / (t + 1j) ** 2 + 0.0 * s,
    )


def res12():
    """Product resolvent 1/((s + i)(t + i))."""
    return Function2(
        "res12",
        lambda s, t: 1.0 / ((s + 1j) * (t + 1j)),
        d1=lambda s, t: -1.0 / ((s + 1j) ** 2 * (t + 1j)),
        d2=lambda s, t: -1.0 / ((s + 1j) * (t + 1j) ** 2),
    )


def multiply(f, g):
    """Pointwise product f * g, with product-rule partials when available."""
    d1 = None
    if f.has_d1 and g.has_d1:
        d1 = lambda s, t: f.partial1(s, t) * g.eval(s, t) + f.eval(s, t) * g.partial1(s, t)
    d2 = None
    if f.has_d2 and g.has_d2:
        d2 = lambda s, t: f.partial2(s, t) * g.eval(s, t) + f.eval(s, t) * g.partial2(s, t)
    return Function2(
        f"{f.label}*{g.label}", lambda s, t: f.eval(s, t) * g.eval(s, t), d1=d1, d2=d2
    )


_CATALOG = {
    "const": const,
    "coord1": coord1,
    "coord2": coord2,
    "monomial": monomial,
    "poly": poly,
    "exp2": exp2,
    "gauss": gauss,
    "res1": res1,
    "res2": res2,
    "res12": res12,
}


def function_from_config(cfg) -> Function2:
    """Build a catalog function from a flat mapping like {"name": "exp2", "a": 3, "b": 4}."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"function config must be a mapping, got {type(cfg).__name__}")
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name not in _CATALOG:
        known = ", ".join(sorted(_CATALOG))
        raise ConfigError(f"unknown function {name!r}; choose one of: {known}")
    builder = _CATALOG[name]
    try:
        inspect.signature(builder).bind(**cfg)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}")
    return builder(**cfg)


# ---------------------------------------------------------------------------
# symbols


class Symbol:
    """Kernel on pairs of spectral points x = (x1, x2), y = (y1, y2).

    ``core(x1, x2, y1, y2)`` receives broadcastable float arrays and
    returns complex values in the broadcast shape.
    """

    def __init__(self, label, core):
        self.label = str(label)
        self._core = core

    def __repr__(self):
        return f"Symbol({self.label})"

    def eval(self, x, y):
        x1, x2 = x
        y1, y2 = y
        val = self._core(
            np.asarray(x1, dtype=float),
            np.asarray(x2, dtype=float),
            np.asarray(y1, dtype=float),
            np.asarray(y2, dtype=float),
        )
        return complex(val)

    def sample(self, xpairs, ypairs):
        """Sample on a product of point lists.

        Rows follow ``ypairs``, columns follow ``xpairs``: the result has
        shape (len(ypairs), len(xpairs)) with entry [j, i] equal to the
        symbol at (x_i, y_j).
        """
        xp = np.atleast_2d(np.asarray(xpairs, dtype=float))
        yp = np.atleast_2d(np.asarray(ypairs, dtype=float))
        if xp.shape[1] != 2 or yp.shape[1] != 2:
            raise SymbolEvaluationFailure(
                f"point lists must have two columns, got {xp.shape} and {yp.shape}"
            )
        out = self._core(
            xp[:, 0][None, :],
            xp[:, 1][None, :],
            yp[:, 0][:, None],
            yp[:, 1][:, None],
        )
        out = np.asarray(out, dtype=complex)
        return np.array(np.broadcast_to(out, (yp.shape[0], xp.shape[0])))


def _coincidence_mask(den, base):
    return np.abs(den) <= COINCIDENCE_REL_TOL * (1.0 + np.abs(base))


def divided_diff_symbol_var2(f: Function2) -> Symbol:
    """Divided difference of f in the second variable, weighted by (x2 + i).

    Off the diagonal the value is
    (f(x1, y2) - f(x1, x2)) / (y2 - x2) * (x2 + i); within the relative
    coincidence guard it is the partial derivative value
    (d2 f)(x1, x2) * (x2 + i), which requires f to carry d2.
    """

    def core(x1, x2, y1, y2):
        x1b, x2b, _, y2b = np.broadcast_arrays(x1, x2, y1, y2)
        den = y2b - x2b
        near = _coincidence_mask(den, x2b)
        weight = x2b + 1j
        out = np.empty(x1b.shape, dtype=complex)
        far = ~near
        if far.any():
            num = f.eval(x1b[far], y2b[far]) - f.eval(x1b[far], x2b[far])
            out[far] = num / den[far] * weight[far]
        if near.any():
            out[near] = f.partial2(x1b[near], x2b[near]) * weight[near]
        return out

    return Symbol(f"dd2[{f.label}]", core)


def divided_diff_symbol_var1(f: Function2) -> Symbol:
    """Divided difference of f in the first variable, weighted by (x1 + i).

    Off the diagonal: (f(y1, y2) - f(x1, y2)) / (y1 - x1) * (x1 + i);
    at coincidence: (d1 f)(x1, y2) * (x1 + i).
    """

    def core(x1, x2, y1, y2):
        x1b, _, y1b, y2b = np.broadcast_arrays(x1, x2, y1, y2)
        den = y1b - x1b
        near = _coincidence_mask(den, x1b)
        weight = x1b + 1j
        out = np.empty(y1b.shape, dtype=complex)
        far = ~near
        if far.any():
            num = f.eval(y1b[far], y2b[far]) - f.eval(x1b[far], y2b[far])
            out[far] = num / den[far] * weight[far]
        if near.any():
            out[near] = f.partial1(x1b[near], y2b[near]) * weight[near]
        return out

    return Symbol(f"dd1[{f.label}]", core)


def split_symbol_var1(f: Function2) -> Symbol:
    """Divided difference of g(s, t) = f(s, t)(s + i) in the first variable.

    Off the diagonal: (f(y1, y2)(y1 + i) - f(x1, y2)(x1 + i)) / (y1 - x1);
    at coincidence the derivative of s -> f(s, y2)(s + i) at x1, that is
    (d1 f)(x1, y2)(x1 + i) + f(x1, y2).  Pointwise this symbol equals the
    var-1 divided difference plus f(y1, y2).
    """

    def core(x1, x2, y1, y2):
        x1b, _, y1b, y2b = np.broadcast_arrays(x1, x2, y1, y2)
        den = y1b - x1b
        near = _coincidence_mask(den, x1b)
        out = np.empty(y1b.shape, dtype=complex)
        far = ~near
        if far.any():
            num = f.eval(y1b[far], y2b[far]) * (y1b[far] + 1j) - f.eval(
                x1b[far], y2b[far]
            ) * (x1b[far] + 1j)
            out[far] = num / den[far]
        if near.any():
            out[near] = f.partial1(x1b[near], y2b[near]) * (x1b[near] + 1j) + f.eval(
                x1b[near], y2b[near]
            )
        return out

    return Symbol(f"split1[{f.label}]", core)


# ---------------------------------------------------------------------------
# boundedness certificates


@dataclass(frozen=True)
class BoundednessCertificate:
    """Grid estimate of a weighted-difference constant and the bound it implies.

    C is the largest weighted difference quotient seen on the grid, bound
    the sup bound it implies, violations the number of grid points where
    |f| exceeds the certified bound.
    """

    C: float
    bound: float
    grid: str
    violations: int


@dataclass(frozen=True)
class GrowthScan:
    """Constants from certificates on nested grids of growing radius."""

    radii: tuple
    constants: tuple
    non_conforming: bool


def symmetric_grid(radius, count=41):
    """Uniform grid on [-radius, radius] guaranteed to contain 0."""
    g = np.linspace(-float(radius), float(radius), int(count))
    if not np.any(g == 0.0):
        g = np.sort(np.append(g, 0.0))
    return g


def _grid_axes(grid):
    if isinstance(grid, (tuple, list)) and len(grid) == 2:
        s = np.asarray(grid[0], dtype=float).ravel()
        t = np.asarray(grid[1], dtype=float).ravel()
    else:
        s = np.asarray(grid, dtype=float).ravel()
        t = s
    if s.size < 2 or t.size < 2:
        raise GridMissingOrigin("grid needs at least two samples per axis")
    if not (np.any(s == 0.0) and np.any(t == 0.0)):
        raise GridMissingOrigin("certificate grid must contain the origin on both axes")
    return s, t


def _grid_label(s, t):
    return (
        f"{s.size}x{t.size} grid on "
        f"[{s.min():g},{s.max():g}]x[{t.min():g},{t.max():g}]"
    )


def _pair_denominators(vals):
    den = vals[None, :] - vals[:, None]
    keep = np.abs(den) > COINCIDENCE_REL_TOL * (1.0 + np.abs(vals)[:, None])
    return den, keep


def lemma_triv_certificate(f: Function2, grid) -> BoundednessCertificate:
    """Certify a sup bound from plain weighted difference quotients.

    C is the grid maximum of |f(x1, y2) - f(x1, x2)| |x2 + i| / |y2 - x2|
    and of the first-variable analog
    |f(y1, y2) - f(x1, y2)| |x1 + i| / |y1 - x1|.  Both quotients at the
    origin rows give |f(t, s) - f(t, 0)| <= C and |f(t, 0) - f(0, 0)| <= C,
    so every grid value must satisfy |f| <= 2C + |f(0, 0)|.

    Cost is cubic in the axis length; keep grids moderate (<= ~100 points).
    """
    s, t = _grid_axes(grid)
    F = f.eval(s[:, None], t[None, :])

    denT, keepT = _pair_denominators(t)
    diff2 = F[:, None, :] - F[:, :, None]
    w2 = np.sqrt(t * t + 1.0)[None, :, None]
    q2 = np.abs(diff2) * w2
    q2 = np.where(keepT[None, :, :], q2 / np.where(keepT, np.abs(denT), 1.0), 0.0)

    denS, keepS = _pair_denominators(s)
    diff1 = F[None, :, :] - F[:, None, :]
    w1 = np.sqrt(s * s + 1.0)[:, None, None]
    q1 = np.abs(diff1) * w1
    q1 = np.where(keepS[:, :, None], q1 / np.where(keepS, np.abs(denS), 1.0)[:, :, None], 0.0)

    C = float(max(q2.max(), q1.max()))
    f00 = abs(f.eval(0.0, 0.0))
    bound = 2.0 * C + f00
    slack = 1e-12 * (1.0 + bound)
    violations = int(np.count_nonzero(np.abs(F) > bound + slack))
    return BoundednessCertificate(C=C, bound=bound, grid=_grid_label(s, t), violations=violations)


def lemma_triv1_certificate(f: Function2, grid) -> BoundednessCertificate:
    """Certify a decaying envelope from resolvent-weighted differences.

    C is the grid maximum of |f(x1, y2)(y2 + i) - f(x1, x2)(x2 + i)| / |y2 - x2|
    and of |f(y1, y2)(y1 + i) - f(x1, y2)(x1 + i)| / |y1 - x1|; C1 is the
    grid maximum of |f(0, .)|.  Every grid point is then checked against
    the pointwise envelope |f(s, t)| <= (C |s| + C1) / |s + i|.  The bound
    field holds the envelope's supremum sqrt(C^2 + C1^2).
    """
    s, t = _grid_axes(grid)
    F = f.eval(s[:, None], t[None, :])

    denT, keepT = _pair_denominators(t)
    W2 = F * (t[None, :] + 1j)
    diff2 = W2[:, None, :] - W2[:, :, None]
    q2 = np.where(keepT[None, :, :], np.abs(diff2) / np.where(keepT, np.abs(denT), 1.0), 0.0)

    denS, keepS = _pair_denominators(s)
    W1 = F * (s[:, None] + 1j)
    diff1 = W1[None, :, :] - W1[:, None, :]
    q1 = np.where(
        keepS[:, :, None], np.abs(diff1) / np.where(keepS, np.abs(denS), 1.0)[:, :, None], 0.0
    )

    C = float(max(q2.max(), q1.max()))
    a0 = int(np.flatnonzero(s == 0.0)[0])
    C1 = float(np.max(np.abs(F[a0, :])))
    envelope = (C * np.abs(s) + C1)[:, None] / np.sqrt(s * s + 1.0)[:, None]
    slack = 1e-12 * (1.0 + C + C1)
    violations = int(np.count_nonzero(np.abs(F) > envelope + slack))
    bound = float(np.hypot(C, C1))
    return BoundednessCertificate(C=C, bound=bound, grid=_grid_label(s, t), violations=violations)


def certificate_growth_scan(
    f: Function2,
    certificate=lemma_triv_certificate,
    radii=(2.0, 4.0, 8.0, 16.0),
    count=33,
    growth_factor=4.0,
) -> GrowthScan:
    """Run a certificate on nested grids and flag constants that keep growing.

    A bounded conforming function has quotient constants that stabilize as
    the grid radius grows; a constant that scales with the radius signals
    the hypotheses fail globally, so the certificate must not be trusted
    beyond its grid.
    """
    radii = tuple(float(r) for r in radii)
    consts = tuple(certificate(f, symmetric_grid(r, count)).C for r in radii)
    base = max(consts[0], 1e-12)
    non_conforming = consts[-1] > growth_factor * base and consts[-1] > 1e-9
    return GrowthScan(radii=radii, constants=consts, non_conforming=non_conforming)


def finite_diff_check(f: Function2, svals=None, tvals=None, step=1e-5):
    """Largest deviation of closed-form partials from centered differences.

    Returns (dev1, dev2) where each deviation is measured relative to
    max(1, |derivative|) over the grid; catalog functions stay below 1e-4.
    """
    if svals is None:
        svals = np.linspace(-2.0, 2.0, 9)
    if tvals is None:
        tvals = np.linspace(-2.0, 2.0, 9)
    S = np.asarray(svals, dtype=float)[:, None]
    T = np.asarray(tvals, dtype=float)[None, :]
    h = float(step)

    dev1 = dev2 = 0.0
    if f.has_d1:
        fd = (f.eval(S + h, T) - f.eval(S - h, T)) / (2.0 * h)
        ex = f.partial1(S, T)
        dev1 = float(np.max(np.abs(fd - ex) / np.maximum(1.0, np.abs(ex))))
    if f.has_d2:
        fd = (f.eval(S, T + h) - f.eval(S, T - h)) / (2.0 * h)
        ex = f.partial2(S, T)
        dev2 = float(np.max(np.abs(fd - ex) / np.maximum(1.0, np.abs(ex))))
    return dev1, dev2
