"""Independent oracles for the test suite.

Everything here recomputes target quantities by routes disjoint from the
package implementations: brute-force quadrature of defining integrals,
piecewise path integration, exhaustive partition enumeration, and an
alternative (location-sliced) posterior path sampler.
"""

import itertools
import math

import numpy as np
from scipy import integrate

from crmhazard.crm import CrmRealization


# ---------------------------------------------------------------------------
# jump-intensity integrals
# ---------------------------------------------------------------------------

def quad_jump_density_integral(sigma, gamma, f, lo=0.0, hi=np.inf):
    """integral of f(s) e^(-gamma s) s^(-1-sigma) / Gamma(1-sigma) ds."""
    g1ms = math.gamma(1.0 - sigma)

    def integrand(s):
        return f(s) * math.exp(-gamma * s) * s ** (-1.0 - sigma) / g1ms

    mid = max(1.0, lo * 2.0)
    head, _ = integrate.quad(integrand, lo, mid, limit=300)
    tail, _ = integrate.quad(integrand, mid, hi, limit=300)
    return head + tail


def quad_jump_moment(sigma, gamma, c):
    return quad_jump_density_integral(sigma, gamma, lambda s: s ** c)


def quad_tilted_moment(sigma, gamma, order, shift):
    return quad_jump_density_integral(
        sigma, gamma, lambda s: s ** order * math.exp(-shift * s))


def quad_tail_mass(sigma, gamma, v):
    return quad_jump_density_integral(sigma, gamma, lambda s: 1.0, lo=v)


def bisect_inverse_tail(sigma, gamma, u, lo=1e-300, hi=1e4):
    """Solve quad_tail_mass(v) = u by bisection on the quadrature oracle."""
    f = lambda v: quad_tail_mass(sigma, gamma, v) - u
    while f(hi) > 0:
        hi *= 4.0
    while f(lo) < 0:
        lo *= 4.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# kernel time integrals
# ---------------------------------------------------------------------------

def quad_time_integral(kernel, x, T):
    if T <= 0.0:
        return 0.0
    pts = [p for p in kernel.breakpoints(x, T) if 0.0 < p < T]
    val, _ = integrate.quad(lambda t: float(kernel.eval(t, np.asarray(x))),
                            0.0, T, points=pts or None, limit=300)
    return val


def quad_cross_integral(kernel, x, y, T):
    if T <= 0.0:
        return 0.0
    pts = [p for p in list(kernel.breakpoints(x, T)) + list(kernel.breakpoints(y, T))
           if 0.0 < p < T]
    val, _ = integrate.quad(
        lambda t: float(kernel.eval(t, np.asarray(x)))
        * float(kernel.eval(t, np.asarray(y))),
        0.0, T, points=sorted(set(pts)) or None, limit=300)
    return val


# ---------------------------------------------------------------------------
# path functionals by piecewise Gauss-Legendre on the hazard path
# ---------------------------------------------------------------------------

def path_quadrature(realization, T, total_points=10_000):
    """(int h dt, int h^2 dt) over [0, T] by piecewise quadrature.

    The time axis splits at every discontinuity the kernel can produce
    (atom locations and bandwidth offsets); within each smooth piece a fixed
    Gauss-Legendre rule integrates the path evaluated pointwise.
    """
    w = realization.crm.jumps
    x = realization.crm.locations
    if len(realization.fixed_atoms):
        x = np.concatenate((x, realization.fixed_atoms.locations))
    cuts = {0.0, T}
    for loc in np.atleast_1d(x):
        for p in realization.kernel.breakpoints(float(loc), T):
            if 0.0 < p < T:
                cuts.add(float(p))
    cuts = np.array(sorted(cuts))
    n_pieces = len(cuts) - 1
    order = max(4, int(total_points / max(n_pieces, 1)))
    order = min(order, 60)
    ref_x, ref_w = np.polynomial.legendre.leggauss(order)
    h_total, h2_total = 0.0, 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (hi - lo)
        ts = 0.5 * (hi + lo) + half * ref_x
        h = realization.hazard_path(ts)
        h_total += half * float(np.sum(ref_w * h))
        h2_total += half * float(np.sum(ref_w * h * h))
    return h_total, h2_total


# ---------------------------------------------------------------------------
# posterior oracles
# ---------------------------------------------------------------------------

def enumerate_partition_law(state):
    """Exact partition probabilities of the latent structure on a grid measure.

    Marginalizes each block's location over the atomic base measure:
    P(partition) propto prod over blocks of
    sum_w tilted_moment(|B|, w) prod_{i in B} k(y_i, w) lambda(w).
    """
    xs, ws = state.intensity.base_measure.points()
    times = state.exact_times
    n = times.size
    kernel = state.kernel

    def block_weight(block):
        vals = ws.copy()
        for i in block:
            vals = vals * np.atleast_1d(kernel.eval(float(times[i]), xs))
        vals = vals * state.intensity.tilted_moment(float(len(block)),
                                                    state.tilt_rate(xs))
        return float(vals.sum())

    probs = {}
    for partition in set_partitions(range(n)):
        weight = 1.0
        for block in partition:
            weight *= block_weight(block)
        probs[partition_key(partition)] = weight
    total = sum(probs.values())
    return {k: v / total for k, v in probs.items()}


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in set_partitions(rest):
        for i in range(len(sub)):
            yield sub[:i] + [sub[i] + [first]] + sub[i + 1:]
        yield sub + [[first]]


def partition_key(partition):
    return tuple(sorted(tuple(sorted(b)) for b in partition))


def partition_key_of_state(state):
    blocks = [tuple(sorted(c.members)) for c in state.clusters]
    return tuple(sorted(blocks))


def sliced_posterior_crm(state, window, rng, n_slices=400, jump_floor=1e-6):
    """Tilted-CRM draw by location-sliced inversion with shifted rates.

    Splits the window into slices; within each the tilted jump law is treated
    as generalized gamma with the rate shifted by the tilt at the slice
    midpoint, sampled by its own inverse-tail-mass construction.  Independent
    of the thinning code path (up to the slice-width discretization).
    """
    from crmhazard.crm import GeneralizedGammaIntensity, sample_crm

    a, b = window
    edges = np.linspace(a, b, n_slices + 1)
    locs, jumps = [], []
    base = state.intensity.base_measure
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        shifted = GeneralizedGammaIntensity(
            state.intensity.sigma,
            state.intensity.gamma + float(state.tilt_rate(np.asarray(mid))),
            base)
        piece = sample_crm(shifted, (lo, hi), rng, jump_floor=jump_floor,
                           truncation_budget=1.0)
        locs.append(piece.locations)
        jumps.append(piece.jumps)
    locs = np.concatenate(locs)
    jumps = np.concatenate(jumps)
    order = np.argsort(locs)
    return CrmRealization(locs[order], jumps[order], (a, b), jump_floor, 0.0)
