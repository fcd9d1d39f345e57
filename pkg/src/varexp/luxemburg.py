"""Modulars, Luxemburg norms, and the classical inequality checks.

The modular of a field u against an exponent field p is
rho(u) = integral of |u(x)|^p(x).  The Luxemburg norm is the unique
lambda > 0 with rho(u/lambda) = 1 (zero for u = 0).  Because
lambda -> rho(u/lambda) is strictly decreasing with limits +inf and 0,
the root is found by bisection after growing a geometric bracket; this
is unconditionally convergent even when sup p is large and the modular
is stiff in lambda.

Norms against an arbitrary nonnegative node-mass vector (in place of the
quadrature weights) are supported for measure-space diagnostics,
including purely atomic masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import ExponentField
from .grid import GridDomain, GridFunction, gradient_magnitude

__all__ = [
    "LuxemburgNorm",
    "RelationsReport",
    "HolderReport",
    "modular",
    "luxemburg_norm",
    "luxemburg_norm_measure",
    "norm_with_gradient",
    "check_modular_norm_relations",
    "holder_check",
    "poincare_ratio",
]

DEFAULT_TOL_MODULAR = 1e-10
MAX_BISECT_ITERS = 200


@dataclass(frozen=True)
class LuxemburgNorm:
    """Result of the modular-equation bisection."""

    value: float
    bracket: tuple[float, float]
    iterations: int

    def __float__(self):
        return self.value


def _as_values(u, domain: GridDomain) -> np.ndarray:
    if isinstance(u, GridFunction):
        if u.domain != domain:
            raise ValueError("function and exponent field live on different domains")
        return u.values
    vals = np.asarray(u, dtype=float)
    if vals.shape != domain.shape:
        raise ValueError("sample array does not match the grid shape")
    return vals


def modular(u, p: ExponentField, weights: np.ndarray | None = None) -> float:
    """rho(u) = sum of mass * |u|^p over nodes carrying mass."""
    vals = _as_values(u, p.domain)
    w = p.domain.weights if weights is None else np.asarray(weights, dtype=float)
    if w.shape != p.domain.shape:
        raise ValueError("mass array does not match the grid shape")
    if np.any(w < 0):
        raise ValueError("negative mass in modular")
    sel = w > 0
    a = np.abs(vals[sel])
    if not np.all(np.isfinite(a)):
        raise ValueError("NaN/inf sample inside the domain")
    return float(np.dot(w[sel], a ** p.values[sel]))


def _bisect_norm(a: np.ndarray, pw: np.ndarray, w: np.ndarray,
                 tol: float, max_iters: int,
                 initial: float | None,
                 p_minus: float, total_mass: float) -> LuxemburgNorm:
    """Solve sum w * (a/lam)^pw = 1 for lam; a >= 0 with some a > 0."""

    def rho(lam: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.dot(w, (a / lam) ** pw))

    if initial is not None and initial > 0:
        lam0 = initial
    else:
        lam0 = float(a.max()) * total_mass ** (1.0 / p_minus)
        if not lam0 > 0 or not math.isfinite(lam0):
            lam0 = float(a.max()) or 1.0

    lo = hi = lam0
    r = rho(lam0)
    iters = 0
    if r > 1.0:
        while r > 1.0:
            lo = hi
            hi *= 2.0
            r = rho(hi)
            iters += 1
            if iters > max_iters:
                raise RuntimeError("Luxemburg bracket growth did not terminate")
    else:
        while r <= 1.0:
            hi = lo
            lo /= 2.0
            r = rho(lo)
            iters += 1
            if iters > max_iters:
                if lo < 1e-300:
                    # modular stays <= 1 down to the underflow floor: u ~ 0
                    return LuxemburgNorm(0.0, (0.0, hi), iters)
                raise RuntimeError("Luxemburg bracket shrink did not terminate")

    # invariant: rho(lo) > 1 >= rho(hi)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        r = rho(mid)
        if abs(r - 1.0) <= tol and (hi - lo) <= 1e-13 * hi:
            return LuxemburgNorm(mid, (lo, hi), iters)
        if r > 1.0:
            lo = mid
        else:
            hi = mid
        iters += 1
    r = rho(mid)
    if abs(r - 1.0) <= tol:
        return LuxemburgNorm(mid, (lo, hi), iters)
    raise RuntimeError(
        f"Luxemburg bisection did not converge: residual {r - 1.0:.3e} after {iters} iterations")


def luxemburg_norm(u, p: ExponentField, tol_modular: float = DEFAULT_TOL_MODULAR,
                   max_iters: int = MAX_BISECT_ITERS,
                   initial: float | None = None) -> LuxemburgNorm:
    """Luxemburg norm of ``u`` in the variable-exponent space of ``p``.

    ``initial`` seeds the bracket (useful when re-evaluating nearby
    fields, e.g. inside line searches).
    """
    return luxemburg_norm_measure(u, p, p.domain.weights, tol_modular=tol_modular,
                                  max_iters=max_iters, initial=initial)


def luxemburg_norm_measure(u, p: ExponentField, masses: np.ndarray,
                           tol_modular: float = DEFAULT_TOL_MODULAR,
                           max_iters: int = MAX_BISECT_ITERS,
                           initial: float | None = None) -> LuxemburgNorm:
    """Luxemburg norm against an arbitrary nonnegative node-mass vector."""
    vals = _as_values(u, p.domain)
    w = np.asarray(masses, dtype=float)
    if w.shape != p.domain.shape:
        raise ValueError("mass array does not match the grid shape")
    if np.any(w < 0):
        raise ValueError("negative mass")
    sel = w > 0
    a = np.abs(vals[sel])
    if not np.all(np.isfinite(a)):
        raise ValueError("NaN/inf sample on nodes carrying mass")
    if a.size == 0 or not np.any(a > 0):
        return LuxemburgNorm(0.0, (0.0, 0.0), 0)
    pw = p.values[sel]
    total = float(w[sel].sum())
    return _bisect_norm(a, pw, w[sel], tol_modular, max_iters, initial,
                        p.p_minus, total)


def norm_with_gradient(u, p: ExponentField, smoothing: float = 0.0,
                       tol_modular: float = 1e-12):
    """Luxemburg norm and its gradient with respect to the node samples.

    Implicit differentiation of the modular equation rho(w/lam) = 1:

        dlam/dw_i = weight_i p_i (s_i/lam)^(p_i - 1) sign(w_i)
                    / sum_j weight_j p_j (s_j/lam)^p_j

    with s = sqrt(w^2 + smoothing^2).  ``smoothing`` regularizes the
    magnitude at 0 in the derivative only (the returned value uses the
    smoothed samples consistently, so the pair is the exact value and
    gradient of the smoothed functional).

    Returns ``(value, grad)`` with ``grad`` shaped like the grid.
    """
    vals = _as_values(u, p.domain)
    dom = p.domain
    w = dom.weights
    sel = w > 0
    s = np.abs(vals[sel])
    if smoothing > 0:
        s = np.sqrt(s * s + smoothing * smoothing)
    if not np.any(s > 0):
        raise ValueError("gradient of the norm is undefined at u = 0")
    pw = p.values[sel]
    res = _bisect_norm(s, pw, w[sel], tol_modular, MAX_BISECT_ITERS, None,
                       p.p_minus, float(w[sel].sum()))
    lam = res.value
    t = (s / lam) ** (pw - 1.0)
    denom = float(np.dot(w[sel] * pw, (s / lam) ** pw))
    comp = w[sel] * pw * t / denom
    if smoothing > 0:
        comp *= vals[sel] / s
    else:
        comp *= np.sign(vals[sel])
    grad = np.zeros(dom.shape)
    grad[sel] = comp
    return lam, grad


@dataclass(frozen=True)
class RelationsReport:
    """Outcome of the modular--norm relation suite for one field."""

    norm: float
    mod: float
    p_minus: float
    p_plus: float
    unit_modular: bool       # rho(u/||u||) = 1
    trichotomy: bool         # ||u|| <1 (=1; >1)  <=>  rho(u) <1 (=1; >1)
    bound_above_one: bool    # ||u|| > 1 => ||u||^p- <= rho <= ||u||^p+
    bound_below_one: bool    # ||u|| < 1 => ||u||^p+ <= rho <= ||u||^p-
    scaling_to_zero: bool    # norms and modulars of u/2^k both decrease
    scaling_to_inf: bool     # norms and modulars of 2^k u both increase

    @property
    def all_hold(self) -> bool:
        return (self.unit_modular and self.trichotomy and self.bound_above_one
                and self.bound_below_one and self.scaling_to_zero and self.scaling_to_inf)


def check_modular_norm_relations(u, p: ExponentField,
                                 tol: float = DEFAULT_TOL_MODULAR) -> RelationsReport:
    """Verify the norm/modular relations for one nonzero field."""
    vals = _as_values(u, p.domain)
    if not np.any(vals):
        raise ValueError("relations are stated for u != 0")
    nrm = luxemburg_norm(vals, p, tol_modular=tol).value
    mod = modular(vals, p)
    slack = 10 * tol

    unit_modular = abs(modular(vals / nrm, p) - 1.0) <= slack

    if nrm > 1 + slack:
        trichotomy = mod > 1 - slack
    elif nrm < 1 - slack:
        trichotomy = mod < 1 + slack
    else:
        trichotomy = abs(mod - 1.0) <= max(slack, 10 * slack * max(1.0, mod))

    bound_above = True
    if nrm > 1 + slack:
        bound_above = (nrm ** p.p_minus <= mod * (1 + slack)
                       and mod <= nrm ** p.p_plus * (1 + slack))
    bound_below = True
    if nrm < 1 - slack:
        bound_below = (nrm ** p.p_plus <= mod * (1 + slack)
                       and mod <= nrm ** p.p_minus * (1 + slack))

    shrink_norms = [luxemburg_norm(vals / 2.0**k, p, tol_modular=tol).value
                    for k in (1, 2, 3)]
    shrink_mods = [modular(vals / 2.0**k, p) for k in (1, 2, 3)]
    to_zero = (all(a > b for a, b in zip([nrm] + shrink_norms, shrink_norms))
               and all(a > b for a, b in zip([mod] + shrink_mods, shrink_mods)))

    grow_norms = [luxemburg_norm(vals * 2.0**k, p, tol_modular=tol).value
                  for k in (1, 2, 3)]
    grow_mods = [modular(vals * 2.0**k, p) for k in (1, 2, 3)]
    to_inf = (all(a < b for a, b in zip([nrm] + grow_norms, grow_norms))
              and all(a < b for a, b in zip([mod] + grow_mods, grow_mods)))

    return RelationsReport(
        norm=nrm, mod=mod, p_minus=p.p_minus, p_plus=p.p_plus,
        unit_modular=unit_modular, trichotomy=trichotomy,
        bound_above_one=bound_above, bound_below_one=bound_below,
        scaling_to_zero=to_zero, scaling_to_inf=to_inf,
    )


@dataclass(frozen=True)
class HolderReport:
    lhs: float
    rhs: float
    constant: float
    s_minus: float
    s_plus: float
    satisfied: bool


def holder_check(f, g, p: ExponentField, q: ExponentField,
                 tol: float = 1e-9) -> HolderReport:
    """Check ||fg||_s <= ((s/p)+ + (s/q)+) ||f||_p ||g||_q with 1/s = 1/p + 1/q."""
    if p.domain != q.domain:
        raise ValueError("p and q live on different domains")
    dom = p.domain
    fv = _as_values(f, dom)
    gv = _as_values(g, dom)
    s_vals = 1.0 / (1.0 / p.values + 1.0 / q.values)
    inside = dom.inside
    s_min = float(s_vals[inside].min())
    if s_min <= 1.0:
        raise ValueError(f"derived exponent s must exceed 1 everywhere, got inf s = {s_min}")
    s = ExponentField(dom, s_vals)
    ratio_p = s_vals[inside] / p.values[inside]
    ratio_q = s_vals[inside] / q.values[inside]
    const = float(ratio_p.max() + ratio_q.max())
    lhs = luxemburg_norm(fv * gv, s).value
    rhs = const * luxemburg_norm(fv, p).value * luxemburg_norm(gv, q).value
    return HolderReport(
        lhs=lhs, rhs=rhs, constant=const,
        s_minus=s_min, s_plus=float(s_vals[inside].max()),
        satisfied=lhs <= rhs + tol * max(1.0, rhs),
    )


def poincare_ratio(u: GridFunction, p: ExponentField) -> float:
    """||u||_p / ||grad u||_p, an empirical lower bound on the Poincare constant."""
    if u.is_zero():
        raise ValueError("Poincare ratio is undefined for u = 0")
    num = luxemburg_norm(u, p).value
    mag = gradient_magnitude(u)
    den = luxemburg_norm(mag, p).value
    if den == 0.0:
        raise RuntimeError("zero gradient with nonzero samples: corrupted state")
    return num / den
