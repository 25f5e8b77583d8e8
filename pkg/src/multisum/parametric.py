"""Parametric kernel fields, metric entropy, and uniform limit checks.

A parametric kernel carries weights ``lambda(v, k)`` over a finite grid V of
parameter points; each slice is an ordinary degenerate kernel and the
normalized sums become a random field ``Q_L(v)``.  Two functionals govern the
field-level limit theorems: the worst-case weight mass ``sigma_lambda`` and
the l1 weight distance ``rho_lambda``, a pseudometric on V whose covering
numbers enter the entropy integrals

* power level:       ``int_0^1 N(V, scaled rho, eps)**(1/p) d eps``
* exponential level: ``int_0^1 exp(w(H(eps))) d eps`` with
  ``w(x) = inf_y (x y + ln tau(1/y))``.

Coverings are greedy farthest-point selections (an upper bound, the safe
direction for the integrals), replaced by exact minimal covers on grids of at
most 20 points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .kernels import DegenerateKernel, kernel_to_json
from .mc import (TAG_BETA, EmpiricalDist, RngSpec, _run_blocks,
                 empirical_moment)
from .psi import PsiFunction
from .rosenthal import rosenthal_K
from .verify import factor_moment_under, ks_critical, ks_distance

__all__ = [
    "ParametricKernel",
    "EntropyProfile",
    "IntegralResult",
    "sigma_lambda",
    "rho_lambda",
    "covering_profile",
    "entropy_integral_power",
    "entropy_integral_exp",
    "simulate_Q_L",
    "check_theorem_8",
    "Theorem8Report",
    "parametric_kernel_from_json",
    "parametric_kernel_to_json",
]

_EXACT_COVER_LIMIT = 20


@dataclass
class ParametricKernel:
    """Weights ``lambda(v, k)`` over a finite parameter grid V.

    ``points`` holds the ambient coordinates of V, one row per grid point;
    ``lam`` maps each multi-index k to the vector of weights across V (dense
    over V, sparse over k).  Every slice at fixed v is a valid degenerate
    kernel over the shared factor families.
    """

    points: np.ndarray
    lam: dict
    factors: list
    orthonormal: bool = False
    _slices: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        nv = self.points.shape[0]
        if nv < 1:
            raise ValueError("parameter grid must be nonempty")
        clean = {}
        for kvec, w in self.lam.items():
            kvec = tuple(int(k) for k in kvec)
            w = np.asarray(w, dtype=float)
            if w.shape != (nv,):
                raise ValueError(f"weight vector for {kvec} must cover the grid")
            clean[kvec] = w
        if not clean:
            raise ValueError("parametric kernel needs at least one multi-index")
        self.lam = clean
        self.d = len(next(iter(clean)))
        if len(self.factors) != self.d:
            raise ValueError("need one factor family per axis")

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    def slice_kernel(self, v_index: int) -> DegenerateKernel:
        """The degenerate kernel at one grid point (lambda keys keep grid order)."""
        v_index = int(v_index)
        if not (0 <= v_index < self.n_points):
            raise ValueError("parameter index off the grid")
        if v_index not in self._slices:
            lam = {k: float(w[v_index]) for k, w in self.lam.items()}
            self._slices[v_index] = DegenerateKernel(
                self.d, lam, self.factors, self.orthonormal)
        return self._slices[v_index]

    def rho_matrix(self) -> np.ndarray:
        w = np.stack([v for v in self.lam.values()])         # (nk, nv)
        return np.abs(w[:, :, None] - w[:, None, :]).sum(axis=0)

    def digest_payload(self):
        return parametric_kernel_to_json(self)


def sigma_lambda(pk: ParametricKernel) -> float:
    """``max_v sum_k |lambda(v, k)|``."""
    w = np.stack([v for v in pk.lam.values()])
    return float(np.abs(w).sum(axis=0).max())


def rho_lambda(pk: ParametricKernel, v1: int, v2: int) -> float:
    """l1 distance of weight vectors, a pseudometric on the grid."""
    v1, v2 = int(v1), int(v2)
    for v in (v1, v2):
        if not (0 <= v < pk.n_points):
            raise ValueError("parameter index off the grid")
    return float(sum(abs(w[v1] - w[v2]) for w in pk.lam.values()))


# ---------------------------------------------------------------------------
# covering numbers and entropy integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyProfile:
    """Covering numbers on a descending epsilon grid; entropy is ln N."""

    eps: np.ndarray
    counts: np.ndarray
    exact: bool = False

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        n = np.asarray(self.counts, dtype=float)
        if eps.ndim != 1 or eps.shape != n.shape or eps.size == 0:
            raise ValueError("profile needs matching non-empty arrays")
        if np.any(np.diff(eps) >= 0):
            raise ValueError("epsilon grid must be strictly descending")
        if np.any(eps <= 0) or np.any(eps > 1):
            raise ValueError("epsilon grid must lie in (0, 1]")
        if np.any(np.diff(n) < 0):
            raise ValueError("covering numbers grow as epsilon shrinks")
        if np.any(n <= 0):
            # true covering numbers are >= 1; synthetic formula profiles may
            # dip below 1 near eps = 1 and are accepted as integrands
            raise ValueError("covering numbers must be positive")
        eps = eps.copy(); n = n.copy()
        eps.flags.writeable = False; n.flags.writeable = False
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "counts", n)

    @property
    def entropy(self) -> np.ndarray:
        return np.log(self.counts)


def _greedy_radii(dist: np.ndarray) -> np.ndarray:
    """radii[j] = covering radius achieved by the first j+1 greedy centers."""
    n = dist.shape[0]
    mind = dist[0].copy()
    radii = np.empty(n)
    radii[0] = mind.max()
    for j in range(1, n):
        far = int(np.argmax(mind))
        mind = np.minimum(mind, dist[far])
        radii[j] = mind.max()
    return radii


def _exact_cover_count(dist: np.ndarray, eps: float, upper: int) -> int:
    cover = dist <= eps
    n = dist.shape[0]
    for k in range(1, upper + 1):
        for combo in itertools.combinations(range(n), k):
            if np.any(cover[list(combo)], axis=0).all():
                return k
    return upper


def covering_profile(pk: ParametricKernel, eps_grid, scale: float = 1.0) -> EntropyProfile:
    """Covering numbers of (V, scale * rho_lambda) on the given epsilon grid.

    Greedy farthest-point coverings upper-bound the minimal covering number
    (the safe direction for the entropy integrals); for grids of at most
    20 points the exact minimum is computed instead.
    """
    eps = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    dist = scale * pk.rho_matrix()
    radii = _greedy_radii(dist)
    greedy = np.array([int(np.argmax(radii <= e)) + 1 if np.any(radii <= e)
                       else pk.n_points for e in eps], dtype=float)
    if pk.n_points <= _EXACT_COVER_LIMIT:
        counts = np.array([_exact_cover_count(dist, e, int(g))
                           for e, g in zip(eps, greedy)], dtype=float)
        return EntropyProfile(eps, np.maximum.accumulate(counts), exact=True)
    return EntropyProfile(eps, np.maximum.accumulate(greedy), exact=False)


@dataclass(frozen=True)
class IntegralResult:
    """Entropy integral value; ``inf`` with the fitted blow-up exponent on divergence."""

    value: float
    tail_exponent: float | None = None

    @property
    def diverged(self) -> bool:
        return math.isinf(self.value)


def _integrate_profile(eps_desc: np.ndarray, g_desc: np.ndarray) -> IntegralResult:
    """Trapezoid over the grid plus a fitted power-law tail below the smallest eps."""
    eps = eps_desc[::-1]       # ascending
    g = g_desc[::-1]
    body = float(np.trapezoid(g, eps))
    if eps[-1] < 1.0:          # constant continuation where N has saturated to its top value
        body += float(g[-1]) * (1.0 - eps[-1])
    # fit ln g ~ -q ln eps on the smallest decade of the grid
    cut = eps <= eps[0] * 10.0
    if np.sum(cut) >= 2 and g[0] > 0:
        le = np.log(eps[cut])
        lg = np.log(np.maximum(g[cut], 1e-300))
        q = -float(np.polyfit(le, lg, 1)[0])
    else:
        q = 0.0
    q = max(q, 0.0)
    if q >= 1.0 - 1e-9:
        return IntegralResult(math.inf, tail_exponent=q)
    tail = float(g[0]) * eps[0] / (1.0 - q)
    return IntegralResult(body + tail, tail_exponent=q if q > 1e-12 else None)


def entropy_integral_power(profile: EntropyProfile, p: float) -> IntegralResult:
    """``int_0^1 N(eps)**(1/p) d eps`` with power-law handling of the singular end."""
    if p < 2:
        raise ValueError("power-level integrals use p >= 2")
    if profile.eps.size < 32:
        raise ValueError("profile too coarse: need at least 32 epsilon points")
    g = profile.counts ** (1.0 / p)
    return _integrate_profile(profile.eps, g)


def _w_transform(tau: PsiFunction, xs: np.ndarray) -> np.ndarray:
    """``w(x) = inf_y (x y + ln tau(1/y))`` over y with 1/y in the support of tau."""
    y_hi = 1.0 / tau.p_min
    if math.isfinite(tau.support_upper):
        y_lo = 1.0 / tau.support_upper + 1e-9
    else:
        y_lo = 1e-9
    grid = np.geomspace(y_lo, y_hi, 600)
    z = tau._log_eval_raw(1.0 / grid)
    out = np.empty(xs.shape)
    for i, x in enumerate(xs):
        vals = x * grid + z
        k = int(np.argmin(vals))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        # golden-section refinement of the scalar infimum
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fun = lambda y: x * y + float(tau._log_eval_raw(np.asarray([1.0 / y]))[0])
        fc, fd = fun(c), fun(d)
        for _ in range(60):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = fun(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = fun(d)
        out[i] = min(vals[k], fc, fd)
    return out


def entropy_integral_exp(profile: EntropyProfile, tau: PsiFunction) -> IntegralResult:
    """``int_0^1 exp(w(H(eps))) d eps`` for the exponential-level hypothesis."""
    if profile.eps.size < 32:
        raise ValueError("profile too coarse: need at least 32 epsilon points")
    h = profile.entropy
    uniq, inv = np.unique(h, return_inverse=True)
    w_vals = _w_transform(tau, uniq)[inv]
    g = np.exp(w_vals)
    return _integrate_profile(profile.eps, g)


# ---------------------------------------------------------------------------
# field simulation
# ---------------------------------------------------------------------------


def _batch_Q_L(pk: ParametricKernel, L, dists, rng, rep_start, rep_count):
    """(n_points, rep_count) matrix of field values; one sampling pass, |V| contractions.

    The per-slice arithmetic replays the scalar batch path operation by
    operation, so each marginal is bit-identical to ``simulate_S_L`` of the
    slice kernel under the same stream policy.
    """
    ncols = [L.axis_max(axis) for axis in range(pk.d)]
    xs = [dists[axis].sample_block(rng, axis, rep_start, rep_count, ncols[axis])
          for axis in range(pk.d)]
    blocks = []
    for axis in range(pk.d):
        kmax = max(kvec[axis] for kvec in pk.lam)
        flat = pk.factors[axis].evaluate_block(kmax, xs[axis].ravel())
        blocks.append(flat.reshape(kmax, rep_count, ncols[axis]))
    root = math.sqrt(L.size)
    out = np.zeros((pk.n_points, rep_count))
    if L.kind == "rect":
        sums = [b.sum(axis=2) for b in blocks]
        for kvec, wv in pk.lam.items():
            core = sums[0][kvec[0] - 1]
            for axis in range(1, pk.d):
                core = core * sums[axis][kvec[axis] - 1]
            out += wv[:, None] * core[None, :]
    else:
        cells = L.cells
        for kvec, wv in pk.lam.items():
            core = blocks[0][kvec[0] - 1][:, cells[:, 0] - 1]
            for axis in range(1, pk.d):
                core = core * blocks[axis][kvec[axis] - 1][:, cells[:, axis] - 1]
            out += wv[:, None] * core.sum(axis=1)[None, :]
    return out / root


def simulate_Q_L(pk: ParametricKernel, L, dists, N: int, rng: RngSpec,
                 workers: int = 1):
    """Simulate the field over V: per-point distributions plus the sup-field.

    Axis samples are shared across grid points within each replication (the
    field structure); the sup-field collects ``max_v |Q_L(v)|`` per
    replication.
    """
    if N < 1:
        raise ValueError("need at least one replication")
    nv = pk.n_points

    def block(a, c):
        return _batch_Q_L(pk, L, dists, rng, a, c).T.copy()   # (c, nv), rep-major

    cell_count = L.size if L.kind != "rect" else 1
    cap = max(128, (1 << 21) // max(cell_count, nv))
    flat = _run_blocks(lambda a, c: block(a, c).ravel(), N, workers, cap)
    mat = flat.reshape(N, nv)
    per_v = []
    for v in range(nv):
        per_v.append(EmpiricalDist(mat[:, v], f"Q_L[v={v}]", seed=rng.seed))
    sup = EmpiricalDist(np.abs(mat).max(axis=1), "sup_field", seed=rng.seed)
    return per_v, sup


def _batch_Q_infty(pk: ParametricKernel, rng, rep_start, rep_count):
    """Limit field with one shared Gaussian array per replication across all v."""
    kmax = [max(kvec[axis] for kvec in pk.lam) for axis in range(pk.d)]
    betas = []
    for axis in range(pk.d):
        u = rng.uniform_block(TAG_BETA, axis, rep_start, rep_count, kmax[axis])
        betas.append(ndtri(np.clip(u, 2.0 ** -60, 1.0 - 2.0 ** -53)))
    out = np.zeros((pk.n_points, rep_count))
    for kvec, wv in pk.lam.items():
        core = betas[0][:, kvec[0] - 1]
        for axis in range(1, pk.d):
            core = core * betas[axis][:, kvec[axis] - 1]
        out += wv[:, None] * core[None, :]
    return out


def sample_Q_infty(pk: ParametricKernel, N: int, rng: RngSpec, workers: int = 1):
    """Per-point limit samples sharing betas across v within each replication."""
    flat = _run_blocks(lambda a, c: _batch_Q_infty(pk, rng, a, c).T.copy().ravel(),
                       N, workers, max(512, (1 << 21) // pk.n_points))
    mat = flat.reshape(N, pk.n_points)
    return mat


# ---------------------------------------------------------------------------
# theorem-level checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem8Report:
    """Hypothesis evaluation plus grid-marginal KS and sup-moment domination."""

    level: str                       # power | exponential
    hypotheses: dict
    hypotheses_met: bool
    stages: tuple                    # per stage: dict(L_size, ks_per_v, max_final_ks)
    sup_moment: dict
    verdict: str
    profile: EntropyProfile | None = None

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "hypotheses": dict(self.hypotheses),
            "hypotheses_met": self.hypotheses_met,
            "stages": [dict(s) for s in self.stages],
            "sup_moment": dict(self.sup_moment),
            "verdict": self.verdict,
        }


def profile_csv(profile: EntropyProfile) -> str:
    lines = ["epsilon,N,H"]
    for e, n, h in zip(profile.eps, profile.counts, profile.entropy):
        lines.append(f"{float(e)!r},{float(n)!r},{float(h)!r}")
    return "\n".join(lines) + "\n"


def field_G(pk: ParametricKernel, dists, p: float) -> float:
    """Product over axes of the worst used factor moment under the sampling laws."""
    out = 1.0
    for axis in range(pk.d):
        ks = sorted({kvec[axis] for kvec in pk.lam})
        out *= max(factor_moment_under(dists[axis], pk.factors[axis], k, p)
                   for k in ks)
    return out


def check_theorem_8(pk: ParametricKernel, level, L_family, dists, N: int,
                    rng: RngSpec, limit_n: int = 100_000, final_ks: float = 0.05,
                    eps_grid=None, budget: float = 3.0) -> Theorem8Report:
    """Evaluate a field-level limit theorem's hypotheses and its empirical content.

    ``level`` is ``("power", p)`` or ``("exponential", tau)``.  Hypotheses:
    the entropy integral at the scaled metric must converge (power), or
    ``sigma_lambda`` finite plus the generalized integral convergent
    (exponential).  The empirical side runs the KS pipeline per grid point
    against the shared-beta limit field and checks the sup-field moment
    against its majorant times the configured budget factor.
    """
    kind, arg = level
    if eps_grid is None:
        eps_grid = np.geomspace(1.0, 1e-4, 64)
    sigma = sigma_lambda(pk)
    if kind == "power":
        p_ref = float(arg)
        g_val = field_G(pk, dists, p_ref)
        scale = rosenthal_K(p_ref) ** pk.d * g_val
        profile = covering_profile(pk, eps_grid, scale=scale)
        integral = entropy_integral_power(profile, p_ref)
        hyp = {"p": p_ref, "G": g_val, "sigma_lambda": sigma,
               "entropy_integral": integral.value}
        met = math.isfinite(g_val) and not integral.diverged
        majorant = rosenthal_K(p_ref) ** pk.d * g_val * sigma + integral.value
    else:
        tau = arg
        p_ref = 2.0
        g_val = field_G(pk, dists, p_ref)
        profile = covering_profile(pk, eps_grid, scale=1.0)
        integral = entropy_integral_exp(profile, tau)
        hyp = {"tau_family": tau.family, "sigma_lambda": sigma,
               "entropy_integral": integral.value}
        met = math.isfinite(sigma) and not integral.diverged
        majorant = float(tau(p_ref)) * (sigma + integral.value)

    limit_mat = sample_Q_infty(pk, limit_n, rng.child(997))
    limit_dists = [EmpiricalDist(limit_mat[:, v]) for v in range(pk.n_points)]
    crit = ks_critical(N, limit_n)
    stages = []
    sup_final = None
    for i, L in enumerate(L_family):
        per_v, sup = simulate_Q_L(pk, L, dists, N, rng.child(i))
        ks_vals = [ks_distance(per_v[v], limit_dists[v]) for v in range(pk.n_points)]
        stages.append({"L_size": L.size, "ks_per_v": ks_vals,
                       "max_ks": max(ks_vals)})
        sup_final = sup
    seq = [s["max_ks"] for s in stages]
    ks_ok = all(b <= a + 2 * crit for a, b in zip(seq, seq[1:])) and seq[-1] <= final_ks
    emp_sup, emp_se = empirical_moment(sup_final, p_ref)
    sup_ok = bool(emp_sup <= budget * majorant + 3 * emp_se)
    sup_report = {"p": p_ref, "empirical": emp_sup, "se": emp_se,
                  "majorant": majorant, "budget": budget, "passed": sup_ok}
    if not met:
        verdict = "hypotheses not met"
    else:
        verdict = "pass" if (ks_ok and sup_ok) else "fail"
    return Theorem8Report(level=kind, hypotheses=hyp, hypotheses_met=met,
                          stages=tuple(stages), sup_moment=sup_report,
                          verdict=verdict, profile=profile)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def parametric_kernel_to_json(pk: ParametricKernel) -> dict:
    base = kernel_to_json(pk.slice_kernel(0))
    lam = []
    for kvec in sorted(pk.lam):
        for v in range(pk.n_points):
            lam.append({"v_index": v, "k": list(kvec), "w": float(pk.lam[kvec][v])})
    return {
        "V": [{"coords": row.tolist()} for row in pk.points],
        "lambda": lam,
        "factors": base["factors"],
        "orthonormal": pk.orthonormal,
    }


def parametric_kernel_from_json(obj: dict) -> ParametricKernel:
    from .kernels import kernel_from_json
    points = np.array([row["coords"] for row in obj["V"]], dtype=float)
    nv = points.shape[0]
    shell = kernel_from_json({"d": len(obj["lambda"][0]["k"]),
                              "factors": obj["factors"],
                              "lambda": [], "orthonormal": obj.get("orthonormal", False)})
    lam = {}
    for row in obj["lambda"]:
        kvec = tuple(row["k"])
        lam.setdefault(kvec, np.zeros(nv))[row["v_index"]] = row["w"]
    return ParametricKernel(points, lam, shell.factors,
                            orthonormal=bool(obj.get("orthonormal", False)))
