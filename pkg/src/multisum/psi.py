"""Generating functions of Grand Lebesgue Spaces and the tail bounds they induce.

A generating function ``psi(p)`` on a support ``[p_min, b)`` turns a moment
growth profile into a norm ``sup_p |f|_p / psi(p)`` and, through the
Young-Fenchel (Legendre) conjugate of ``v(p) = p * ln(psi(p))``, into an
exponential bound on the two-sided tail of ``f``.

Built-in families:

* ``power_log(m, r)``   -- ``p**(1/m) * ln(p + e - 1)**(-r)``.  The shifted
  logarithm keeps the value finite and positive down to ``p = 1``; for
  ``r = 0`` it is exactly ``p**(1/m)``.
* ``extremal(r)``       -- identically 1 on ``[1, r]``; its norm is the plain
  ``L_r`` norm.
* ``bounded_support(b, gamma, r)`` -- ``(b - p)**(-(gamma+1)/b)`` times a slow
  log correction, normalised so ``psi(1) = 1``; blows up at ``p = b``.
* ``exp_power(beta, C)`` -- ``exp(C * p**beta)``; moment growth of variables
  failing the Cramer condition.
* ``product_of`` / ``rosenthal_scaled`` -- closures of the family under
  pointwise products and multiplication by powers of the Rosenthal function.
* ``tabulated``         -- log-linear interpolation of measured values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .rosenthal import rosenthal_K

__all__ = [
    "SupportError",
    "PsiFunction",
    "MomentCurve",
    "TailBound",
    "power_log",
    "extremal",
    "bounded_support",
    "exp_power",
    "product_of",
    "rosenthal_scaled",
    "tabulated_psi",
    "eval_psi",
    "gls_norm",
    "natural_psi",
    "young_fenchel",
    "tail_bound_eval",
    "compose_psi_product",
    "psi_to_json",
    "psi_from_json",
]

_E = math.e

# Conjugate search controls.  The initial grid cap is extended by decades as
# long as the objective keeps climbing at the edge, so maximisers far beyond
# 1e4 (power_log with large m*x) are still found exactly.
_GRID_POINTS = 512
_GRID_CAP_INITIAL = 1.0e4
_GRID_CAP_MAX = 1.0e18


class SupportError(ValueError):
    """Evaluation of a generating function outside its support."""


@dataclass(frozen=True)
class PsiFunction:
    """A generating function with explicit support ``[p_min, b)`` or ``[p_min, b]``.

    Instances are immutable; build them with the module-level constructors.
    """

    family: str
    params: tuple = ()
    factors: tuple = ()
    p_table: np.ndarray | None = None
    v_table: np.ndarray | None = None
    p_min: float = 1.0
    support_upper: float = math.inf
    closed_top: bool = False

    # -- support ---------------------------------------------------------

    def in_support(self, p):
        p = np.asarray(p, dtype=float)
        upper = (p <= self.support_upper) if self.closed_top else (p < self.support_upper)
        return (p >= self.p_min) & upper

    def _require_support(self, p):
        ok = self.in_support(p)
        if not np.all(ok):
            bad = np.atleast_1d(np.asarray(p, dtype=float))[~np.atleast_1d(ok)][0]
            closer = "]" if self.closed_top else ")"
            raise SupportError(
                f"p={bad:g} outside support [{self.p_min:g}, {self.support_upper:g}{closer} "
                f"of psi family '{self.family}'"
            )

    # -- evaluation ------------------------------------------------------

    def __call__(self, p):
        self._require_support(p)
        out = self._eval_raw(np.asarray(p, dtype=float))
        if np.ndim(p) == 0:
            return float(out)
        return out

    def _eval_raw(self, p: np.ndarray) -> np.ndarray:
        fam = self.family
        if fam == "power_log":
            m, r = self.params
            return p ** (1.0 / m) * np.log(p + _E - 1.0) ** (-r)
        if fam == "extremal":
            return np.ones_like(p)
        if fam == "bounded_support":
            b, gamma, r = self.params
            raw = self._bounded_raw(p, b, gamma, r)
            return raw / self._bounded_raw(np.asarray(1.0), b, gamma, r)
        if fam == "exp_power":
            beta, c = self.params
            return np.exp(c * p ** beta)
        if fam == "product_of":
            out = np.ones_like(p)
            for f in self.factors:
                out = out * f._eval_raw(p)
            return out
        if fam == "rosenthal_scaled":
            (d,) = self.params
            base = self.factors[0]
            return rosenthal_K(p) ** d * base._eval_raw(p)
        if fam == "tabulated":
            # log-linear in p between table nodes, constant below the first
            # node; positivity is preserved because the table is positive
            logv = np.interp(np.log(np.maximum(p, self.p_table[0])),
                             np.log(self.p_table), np.log(self.v_table))
            return np.exp(logv)
        raise ValueError(f"unknown psi family '{fam}'")

    def _log_eval_raw(self, p: np.ndarray) -> np.ndarray:
        """``ln psi(p)`` without forming psi; keeps conjugate searches overflow-free."""
        fam = self.family
        if fam == "power_log":
            m, r = self.params
            return np.log(p) / m - r * np.log(np.log(p + _E - 1.0))
        if fam == "extremal":
            return np.zeros_like(p)
        if fam == "bounded_support":
            b, gamma, r = self.params
            return (self._log_bounded_raw(p, b, gamma, r)
                    - self._log_bounded_raw(np.asarray(1.0), b, gamma, r))
        if fam == "exp_power":
            beta, c = self.params
            return c * p ** beta
        if fam == "product_of":
            out = np.zeros_like(p)
            for f in self.factors:
                out = out + f._log_eval_raw(p)
            return out
        if fam == "rosenthal_scaled":
            (d,) = self.params
            return d * np.log(rosenthal_K(p)) + self.factors[0]._log_eval_raw(p)
        if fam == "tabulated":
            return np.interp(np.log(np.maximum(p, self.p_table[0])),
                             np.log(self.p_table), np.log(self.v_table))
        raise ValueError(f"unknown psi family '{fam}'")

    @staticmethod
    def _bounded_raw(p, b, gamma, r):
        gap = b - p
        return gap ** (-(gamma + 1.0) / b) * np.log(1.0 / gap + _E) ** (r / b)

    @staticmethod
    def _log_bounded_raw(p, b, gamma, r):
        gap = b - p
        return -(gamma + 1.0) / b * np.log(gap) + (r / b) * np.log(np.log(1.0 / gap + _E))

    # -- serialization ---------------------------------------------------

    def to_json(self) -> dict:
        return psi_to_json(self)


# -- constructors ---------------------------------------------------------


def power_log(m: float, r: float = 0.0) -> PsiFunction:
    """``psi(p) = p**(1/m) * ln(p + e - 1)**(-r)`` on ``[1, inf)``."""
    if m <= 0:
        raise ValueError("power_log requires m > 0")
    return PsiFunction("power_log", (float(m), float(r)))


def extremal(r: float) -> PsiFunction:
    """Identically 1 on the closed support ``[1, r]``."""
    if r < 1:
        raise ValueError("extremal requires r >= 1")
    return PsiFunction("extremal", (float(r),), support_upper=float(r), closed_top=True)


def bounded_support(b: float, gamma: float, r: float = 0.0) -> PsiFunction:
    """Blow-up family ``(b - p)**(-(gamma+1)/b)`` with log correction, psi(1) = 1."""
    if b <= 1:
        raise ValueError("bounded_support requires b > 1")
    if gamma <= -1:
        raise ValueError("bounded_support requires gamma > -1")
    return PsiFunction("bounded_support", (float(b), float(gamma), float(r)),
                       support_upper=float(b))


def exp_power(beta: float, C: float) -> PsiFunction:
    """``psi(p) = exp(C * p**beta)`` on ``[1, inf)``."""
    if beta <= 0 or C <= 0:
        raise ValueError("exp_power requires beta > 0 and C > 0")
    return PsiFunction("exp_power", (float(beta), float(C)))


def _intersect_support(factors):
    p_min = max(f.p_min for f in factors)
    b = min(f.support_upper for f in factors)
    closed = all(f.closed_top or f.support_upper > b for f in factors) and math.isfinite(b)
    if b < p_min or (b == p_min and not closed):
        raise SupportError("empty support intersection of psi factors")
    return p_min, b, closed


def product_of(factors) -> PsiFunction:
    """Pointwise product of generating functions on the intersection of supports."""
    factors = tuple(factors)
    if not factors:
        raise ValueError("product_of requires at least one factor")
    if len(factors) == 1:
        return factors[0]
    p_min, b, closed = _intersect_support(factors)
    return PsiFunction("product_of", (), factors=factors,
                       p_min=p_min, support_upper=b, closed_top=closed)


def rosenthal_scaled(base: PsiFunction, d: int) -> PsiFunction:
    """``K(p)**d * base(p)``; the Rosenthal factor restricts the support to p >= 2."""
    d = int(d)
    if d < 1:
        raise ValueError("rosenthal_scaled requires d >= 1")
    p_min = max(2.0, base.p_min)
    if base.support_upper < p_min or (base.support_upper == p_min and not base.closed_top):
        raise SupportError("empty support after restricting to p >= 2")
    return PsiFunction("rosenthal_scaled", (d,), factors=(base,),
                       p_min=p_min, support_upper=base.support_upper,
                       closed_top=base.closed_top)


def tabulated_psi(p_grid, values) -> PsiFunction:
    """Tabulated generating function; log-linear interpolation between nodes."""
    p = np.asarray(p_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size == 0 or p.shape != v.shape:
        raise ValueError("tabulated psi needs matching non-empty 1-d grids")
    if np.any(np.diff(p) <= 0):
        raise ValueError("tabulated psi grid must be strictly ascending")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("tabulated psi values must be finite and positive")
    p = p.copy(); v = v.copy()
    p.flags.writeable = False; v.flags.writeable = False
    return PsiFunction("tabulated", (), p_table=p, v_table=v,
                       p_min=1.0, support_upper=float(p[-1]), closed_top=True)


# -- moment curves ---------------------------------------------------------


@dataclass(frozen=True)
class MomentCurve:
    """``|f|_p`` sampled on a strictly ascending p-grid.

    Values must be nondecreasing in p (Lyapunov inequality under a probability
    measure); a relative slack of 1e-9 absorbs floating point noise.
    """

    p_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.p_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if p.ndim != 1 or p.size == 0 or p.shape != v.shape:
            raise ValueError("moment curve needs matching non-empty 1-d arrays")
        if np.any(np.diff(p) <= 0):
            raise ValueError("moment curve p-grid must be strictly ascending")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("moment values must be finite and nonnegative")
        if np.any(np.diff(v) < -1e-9 * np.maximum(v[:-1], 1e-300)):
            raise ValueError("moment values must be nondecreasing in p (Lyapunov)")
        p = p.copy(); v = v.copy()
        p.flags.writeable = False; v.flags.writeable = False
        object.__setattr__(self, "p_grid", p)
        object.__setattr__(self, "values", v)
        if self.stderr is not None:
            se = np.asarray(self.stderr, dtype=float).copy()
            se.flags.writeable = False
            object.__setattr__(self, "stderr", se)


def eval_psi(psi: PsiFunction, p: float) -> float:
    """Evaluate ``psi`` at ``p``; raises SupportError outside the support."""
    return psi(p)


def gls_norm(curve: MomentCurve, psi: PsiFunction) -> float:
    """``max`` over the curve grid of ``|f|_p / psi(p)``.

    This is a finite-grid lower bound of the true supremum over the whole
    support; refine the grid to tighten it.
    """
    psi._require_support(curve.p_grid)
    ratios = curve.values / psi._eval_raw(curve.p_grid)
    return float(np.max(ratios))


def natural_psi(curve: MomentCurve) -> PsiFunction:
    """The generating function equal to the moment curve itself (norm 1 on its grid)."""
    if np.any(curve.values <= 0):
        raise ValueError("natural psi requires strictly positive moments")
    return tabulated_psi(curve.p_grid, curve.values)


# -- Young-Fenchel conjugate ----------------------------------------------


def _objective(psi: PsiFunction, x: float, p: np.ndarray) -> np.ndarray:
    return x * p - p * psi._log_eval_raw(p)


def _golden_max(fun, lo: float, hi: float, iters: int = 90) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a < 1e-14 * max(1.0, abs(a)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return max(fc, fd, fun(0.5 * (a + b)))


def young_fenchel(psi: PsiFunction, x: float, grid_points: int = _GRID_POINTS) -> float:
    """Conjugate ``v*(x) = sup_p (x p - p ln psi(p))`` over the support of psi.

    Log-spaced grid search refined by golden section around the grid argmax.
    On unbounded supports the grid cap is pushed out by decades while the
    objective still climbs at the edge; if it climbs through the final decade
    at the hard cap the conjugate is reported as ``inf``.
    """
    x = float(x)
    lo = psi.p_min
    if math.isfinite(psi.support_upper):
        hi = psi.support_upper if psi.closed_top else psi.support_upper * (1 - 1e-12)
        if hi <= lo:
            hi = psi.support_upper
        grid = np.geomspace(lo, hi, grid_points)
        obj = _objective(psi, x, grid)
        k = int(np.nanargmax(obj))
    else:
        cap = _GRID_CAP_INITIAL
        while True:
            grid = np.geomspace(lo, cap, grid_points)
            obj = _objective(psi, x, grid)
            k = int(np.nanargmax(obj))
            at_edge = k >= grid_points - 8
            if not at_edge:
                break
            if cap >= _GRID_CAP_MAX:
                # increasing over the whole last decade: divergent conjugate
                decade = grid >= cap / 10.0
                dv = np.diff(obj[decade])
                if np.all(dv >= 0):
                    return math.inf
                break
            cap = min(cap * 100.0, _GRID_CAP_MAX)
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    fun = lambda p: float(_objective(psi, x, np.asarray([p]))[0])
    best = _golden_max(fun, a, b)
    return float(max(best, obj[k]))


# -- tail bounds -----------------------------------------------------------


@dataclass(frozen=True)
class TailBound:
    """Exponential tail bound induced by a GLS norm.

    Valid (non-trivial) for ``y >= e * gls_norm``; clamped to 1 below that
    threshold, where the moment method asserts nothing.
    """

    gls_norm: float
    psi: PsiFunction

    def __post_init__(self):
        if not (self.gls_norm > 0 and math.isfinite(self.gls_norm)):
            raise ValueError("tail bound requires a positive finite norm")

    @property
    def validity_threshold(self) -> float:
        return _E * self.gls_norm

    def __call__(self, y: float) -> float:
        return tail_bound_eval(self, y)


def tail_bound_eval(tb: TailBound, y: float) -> float:
    """``exp(-v*(ln(y / norm)))`` for ``y >= e * norm``; 1 below the threshold."""
    y = float(y)
    if y < 0:
        raise ValueError("tail levels are nonnegative")
    if y < tb.validity_threshold:
        return 1.0
    v_star = young_fenchel(tb.psi, math.log(y / tb.gls_norm))
    if math.isinf(v_star):
        return 0.0
    return min(1.0, math.exp(-v_star))


def compose_psi_product(factors, rosenthal_power: int = 1) -> PsiFunction:
    """Product of generating functions scaled by the d-th power of the Rosenthal function.

    This is the natural generating function for normalized multi-indexed sums
    of a rank-one product kernel whose per-axis factors live in the given
    spaces; ``rosenthal_power`` is the number of independently sampled axes.
    With ``rosenthal_power = 0`` the bare product is returned.
    """
    factors = tuple(factors)
    if not factors:
        raise ValueError("compose_psi_product requires at least one factor")
    d = int(rosenthal_power)
    if d < 0:
        raise ValueError("rosenthal_power must be >= 0")
    base = product_of(factors)
    if d == 0:
        return base
    return rosenthal_scaled(base, d)


# -- JSON schema -----------------------------------------------------------


def psi_to_json(psi: PsiFunction) -> dict:
    """Serialize to the exchange schema {family, params, support_upper}."""
    fam = psi.family
    upper = None if math.isinf(psi.support_upper) else psi.support_upper
    if fam == "power_log":
        params = {"m": psi.params[0], "r": psi.params[1]}
    elif fam == "extremal":
        params = {"r": psi.params[0]}
    elif fam == "bounded_support":
        params = {"b": psi.params[0], "gamma": psi.params[1], "r": psi.params[2]}
    elif fam == "exp_power":
        params = {"beta": psi.params[0], "C": psi.params[1]}
    elif fam == "product_of":
        params = {"factors": [psi_to_json(f) for f in psi.factors]}
    elif fam == "rosenthal_scaled":
        params = {"base": psi_to_json(psi.factors[0]), "d": psi.params[0]}
    elif fam == "tabulated":
        params = {"p_grid": psi.p_table.tolist(), "values": psi.v_table.tolist()}
    else:
        raise ValueError(f"unknown psi family '{fam}'")
    return {"family": fam, "params": params, "support_upper": upper}


def psi_from_json(obj) -> PsiFunction:
    """Inverse of :func:`psi_to_json`."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    fam = obj["family"]
    params = obj.get("params", {})
    if fam == "power_log":
        return power_log(params["m"], params.get("r", 0.0))
    if fam == "extremal":
        return extremal(params["r"])
    if fam == "bounded_support":
        return bounded_support(params["b"], params["gamma"], params.get("r", 0.0))
    if fam == "exp_power":
        return exp_power(params["beta"], params["C"])
    if fam == "product_of":
        return product_of(psi_from_json(f) for f in params["factors"])
    if fam == "rosenthal_scaled":
        return rosenthal_scaled(psi_from_json(params["base"]), int(params["d"]))
    if fam == "tabulated":
        return tabulated_psi(params["p_grid"], params["values"])
    raise ValueError(f"unknown psi family '{fam}'")
