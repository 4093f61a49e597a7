"""Thin adaptive-quadrature wrapper used by the moment and norm evaluators.

All defining integrals in this package are 1-D (possibly nested) with at most
a handful of known kink locations, so ``scipy.integrate.quad`` plus explicit
breakpoints covers every case.  Very wide ranges are pre-split into geometric
panels: a global adaptive rule can step right over integrands that live on a
scale thousands of times smaller than the interval.  Divergent or
non-converging integrals raise :class:`~crmhazard.errors.DivergenceError`
instead of returning garbage.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import DivergenceError

__all__ = ["adaptive_quad"]

_WIDE_RATIO = 1e4       # split when (b - a) exceeds this multiple of the scale
_TAIL_START = 1e9       # infinite tails are integrated from here by transformation


def _panel_edges(a, b, pts):
    """Geometric decade edges covering (a, b), merged with breakpoints."""
    edges = {a, b}
    edges.update(pts)
    start = max(a, 1e-6)
    decade = 10.0 ** math.floor(math.log10(start))
    while decade < b:
        if decade > a:
            edges.add(decade)
        decade *= 10.0
    return sorted(edges)


def _quad_once(f, a, b, pts, epsabs, epsrel, limit):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, points=pts or None,
                              epsabs=epsabs, epsrel=epsrel, limit=limit)


def adaptive_quad(f, a, b, *, points=(), epsabs=1e-12, epsrel=1e-9, limit=200):
    """Integrate ``f`` over ``(a, b)`` adaptively.

    ``points`` lists interior breakpoints (kinks); values outside ``(a, b)``
    are ignored.  ``b`` may be ``numpy.inf``.  Raises ``DivergenceError`` when
    the integral is non-finite or the error estimate swamps the result.
    """
    if b <= a:
        return 0.0
    pts = sorted({float(p) for p in points if a < p < b and math.isfinite(p)})
    if len(pts) > limit // 5:
        # quad refuses more breakpoints than subintervals; thin evenly and let
        # adaptivity find the remaining (tiny) kinks
        pts = list(np.asarray(pts)[np.linspace(0, len(pts) - 1, limit // 5,
                                               dtype=int)])

    infinite = math.isinf(b)
    head_end = b
    if infinite:
        head_end = max([_TAIL_START] + [10.0 * p for p in pts])

    wide = head_end - a > _WIDE_RATIO * max(1.0, a, *(pts or [0.0]))
    value = 0.0
    err = 0.0
    if wide:
        edges = _panel_edges(a, head_end, pts)
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = _quad_once(f, lo, hi, (), epsabs, epsrel, limit)
            value += v
            err += e
    else:
        v, e = _quad_once(f, a, head_end, pts, epsabs, epsrel, limit)
        value += v
        err += e
    if infinite:
        # reciprocal substitution: scipy's semi-infinite rule loses algebraic
        # tails that only start mattering at large offsets
        v, e = _quad_once(lambda u: f(1.0 / u) / (u * u), 0.0, 1.0 / head_end,
                          (), epsabs, epsrel, limit)
        value += v
        err += e

    if not math.isfinite(value):
        raise DivergenceError(f"integral over ({a}, {b}) is not finite")
    if err > 1e-3 * max(abs(value), 1.0) + 1e3 * epsabs:
        raise DivergenceError(
            f"quadrature failed to converge over ({a}, {b}): "
            f"value={value:g}, error estimate={err:g}")
    return value
