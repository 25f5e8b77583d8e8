"""Seeded Monte Carlo for normalized multi-indexed sums and their chaos limits.

Randomness is counter-based: every uniform variate is addressed by
``(seed, stream tag, axis, replication, coordinate)`` through a Philox
counter, so results are bit-identical no matter how replications are split
across workers or how large a batch is requested.  All sampling is inverse
CDF on those uniforms.

The normalized sum over an index set L is ``S_L = |L|**-0.5 *
sum_{k in L} f(xi_{k_1}(1), ..., xi_{k_d}(d))``.  For rectangles it
factorizes: per axis, per factor index, one pass accumulates
``F_s[k] = sum_i g_k(xi_i(s))`` and the sum collapses to
``sum_k lambda(k) prod_s F_s[k_s]``, costing O(rank * sum n_s) instead of
O(rank * prod n_s).  The Gaussian-chaos limit is sampled directly as
``sum_k lambda(k) prod_s beta_s[k_s]`` with fresh standard normal arrays per
replication.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, logsumexp, ndtri

from .index_sets import IndexSet

__all__ = [
    "RngSpec",
    "AxisDistribution",
    "EmpiricalDist",
    "compute_S_L",
    "naive_S_L",
    "simulate_S_L",
    "sample_S_infty",
    "empirical_moment",
    "empirical_tail",
    "save_empirical",
    "load_empirical",
]

TAG_AXIS = 1      # axis sample streams
TAG_BETA = 2      # limit-field Gaussian streams

_BLOCK_BUDGET = 1 << 22   # floats per replication block, caps peak memory


@dataclass(frozen=True)
class RngSpec:
    """Counter-based random stream policy rooted at a 64-bit seed.

    Stream key = (seed, tag, axis); within a stream, replication r owns the
    double positions [r * stride, (r + 1) * stride) where stride is the
    column count rounded up to a multiple of 4 (one Philox counter step
    yields 4 doubles, so chunks of replications can jump exactly).
    """

    seed: int

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")

    def child(self, index: int) -> "RngSpec":
        """Derived independent stream root; deterministic in (seed, index)."""
        mixed = (self.seed * 0x9E3779B97F4A7C15 + (index + 1) * 0xD1B54A32D192ED03) % 2 ** 64
        return RngSpec(mixed)

    def uniform_block(self, tag: int, axis: int, rep_start: int, rep_count: int,
                      ncols: int) -> np.ndarray:
        """Uniforms of shape (rep_count, ncols), positions keyed by (rep, col)."""
        stride = 4 * ((ncols + 3) // 4)
        key = np.array([self.seed, (int(tag) << 32) | int(axis)], dtype=np.uint64)
        bg = np.random.Philox(key=key)
        bg.advance(rep_start * stride // 4)
        u = np.random.Generator(bg).random((rep_count, stride))
        return u[:, :ncols]


_POISSON_CDF_LEN = 48


@lru_cache(maxsize=None)
def _poisson1_cdf():
    k = np.arange(_POISSON_CDF_LEN)
    pmf = np.exp(-1.0 - gammaln(k + 1.0))
    return np.cumsum(pmf)


@dataclass(frozen=True)
class AxisDistribution:
    """Sampling law of one axis' variables.

    Centering lives in the kernel factors, not here, but every listed kind
    happens to be symmetric or compensated and hence mean zero itself.  The
    log-Weibull kind is the symmetric law with ``P(|xi| > y) =
    exp(-ln(1+y)**(1 + 1/beta))``.
    """

    kind: str
    beta: float | None = None

    def __post_init__(self):
        kinds = {"standard_normal", "rademacher", "centered_exponential",
                 "compensated_poisson", "log_weibull"}
        if self.kind not in kinds:
            raise ValueError(f"unknown axis distribution '{self.kind}'")
        if self.kind == "log_weibull" and not (self.beta and self.beta > 0):
            raise ValueError("log_weibull requires beta > 0")

    @property
    def uniforms_per_coord(self) -> int:
        return 2 if self.kind == "log_weibull" else 1

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF map from uniforms; pairs of columns for two-uniform kinds."""
        u = np.clip(u, 2.0 ** -60, 1.0 - 2.0 ** -53)
        if self.kind == "standard_normal":
            return ndtri(u)
        if self.kind == "rademacher":
            return np.where(u < 0.5, -1.0, 1.0)
        if self.kind == "centered_exponential":
            return -np.log1p(-u) - 1.0
        if self.kind == "compensated_poisson":
            cdf = _poisson1_cdf()
            return np.searchsorted(cdf, u).astype(float) - 1.0
        # log_weibull: magnitude from even columns, sign from odd columns
        u1 = u[..., 0::2]
        u2 = u[..., 1::2]
        expo = self.beta / (1.0 + self.beta)
        mag = np.exp((-np.log1p(-u1)) ** expo) - 1.0
        return np.where(u2 < 0.5, -mag, mag)

    def sample_block(self, rng: RngSpec, axis: int, rep_start: int, rep_count: int,
                     ncols: int, tag: int = TAG_AXIS) -> np.ndarray:
        u = rng.uniform_block(tag, axis, rep_start, rep_count,
                              ncols * self.uniforms_per_coord)
        return self.transform(u)

    def identity_moment(self, p: float) -> float:
        """``|xi|_p`` of the raw axis variable (the centered identity factor)."""
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "standard_normal":
            return math.sqrt(2.0) * math.exp(
                (gammaln((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)) / p)
        if self.kind == "centered_exponential":
            val, _ = quad(lambda t: abs(t - 1.0) ** p * math.exp(-t), 0, np.inf)
            return val ** (1.0 / p)
        if self.kind == "compensated_poisson":
            k = np.arange(200)
            vals = np.abs(k - 1.0)
            logw = -1.0 - gammaln(k + 1.0)
            nz = vals > 0
            log_mp = logsumexp(logw[nz] + p * np.log(vals[nz]))
            return float(np.exp(log_mp / p))
        # log_weibull: p * int y^(p-1) P(|xi|>y) dy, integrated in u = ln(1+y)
        b = self.beta
        def integrand(u):
            y = math.expm1(u)
            return p * y ** (p - 1.0) * math.exp(u - u ** (1.0 + 1.0 / b))
        hi = max(10.0, (4.0 * p) ** (b / (b + 1.0)) + 20.0)
        val, _ = quad(integrand, 0, hi, limit=200)
        return val ** (1.0 / p)

    def to_json(self):
        if self.kind == "log_weibull":
            return {"kind": "log_weibull", "beta": self.beta}
        return self.kind


def axis_distribution_from_json(obj) -> AxisDistribution:
    if isinstance(obj, str):
        return AxisDistribution(obj)
    return AxisDistribution(obj["kind"], beta=obj.get("beta"))


# ---------------------------------------------------------------------------
# empirical distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalDist:
    """Sorted replication batch of a scalar statistic with provenance."""

    values: np.ndarray
    provenance: str = ""
    seed: int | None = None

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.size < 1:
            raise ValueError("need at least one replication")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def variance(self) -> float:
        return float(np.var(self.values, ddof=1)) if self.n > 1 else 0.0

    def variance_se(self) -> float:
        # delta-method standard error of the sample variance, kurtosis aware
        if self.n < 2:
            return 0.0
        x = self.values - self.values.mean()
        m2 = np.mean(x ** 2)
        m4 = np.mean(x ** 4)
        return float(math.sqrt(max(m4 - m2 ** 2, 0.0) / self.n))

    def quantile(self, q):
        return np.quantile(self.values, q)


def empirical_moment(dist: EmpiricalDist, p: float):
    """``(mean |x|^p)**(1/p)`` with its delta-method standard error."""
    if p < 1:
        raise ValueError("moment order must be >= 1")
    a = np.abs(dist.values) ** p
    m = float(a.mean())
    if m == 0.0:
        return 0.0, 0.0
    est = m ** (1.0 / p)
    se_m = float(a.std(ddof=1) / math.sqrt(dist.n)) if dist.n > 1 else 0.0
    return est, se_m * est / (p * m)


def empirical_tail(dist: EmpiricalDist, y: float) -> float:
    """Two-sided tail ``max(P(x >= y), P(x <= -y))`` under the empirical law."""
    if y < 0:
        raise ValueError("tail levels are nonnegative")
    v = dist.values
    right = v.size - np.searchsorted(v, y, side="left")
    left = np.searchsorted(v, -y, side="right")
    return max(right, left) / v.size


# ---------------------------------------------------------------------------
# single-realization sums
# ---------------------------------------------------------------------------


def _axis_blocks(kernel, samples):
    blocks = []
    for axis in range(kernel.d):
        kmax = kernel.axis_max_index(axis)
        x = np.asarray(samples[axis], dtype=float)
        blocks.append(kernel.factors[axis].evaluate_block(kmax, x) if kmax else None)
    return blocks


def compute_S_L(kernel, L: IndexSet, axis_samples) -> float:
    """Normalized sum for one realization of the axis samples.

    Rectangles use the per-axis factorization; irregular sets fall back to
    the direct sum over cells with per-axis factor memoization.
    """
    for axis in range(kernel.d):
        if L.axis_max(axis) > len(axis_samples[axis]):
            raise ValueError(f"axis {axis} samples do not cover the index set")
    if not kernel.lam:
        return 0.0
    blocks = _axis_blocks(kernel, axis_samples)
    root = math.sqrt(L.size)
    if L.kind == "rect":
        total = 0.0
        sums = [b[:, :L.params[axis]].sum(axis=1) if b is not None else None
                for axis, b in enumerate(blocks)]
        for kvec, w in kernel.lam.items():
            prod = w
            for axis, k in enumerate(kvec):
                prod *= sums[axis][k - 1]
            total += prod
        return total / root
    cells = L.cells
    total = 0.0
    for kvec, w in kernel.lam.items():
        prod = np.ones(cells.shape[0])
        for axis, k in enumerate(kvec):
            prod = prod * blocks[axis][k - 1][cells[:, axis] - 1]
        total += w * float(prod.sum())
    return total / root


def naive_S_L(kernel, L: IndexSet, axis_samples) -> float:
    """Reference direct summation over all cells, ignoring rectangle structure."""
    for axis in range(kernel.d):
        if L.axis_max(axis) > len(axis_samples[axis]):
            raise ValueError(f"axis {axis} samples do not cover the index set")
    if not kernel.lam:
        return 0.0
    blocks = _axis_blocks(kernel, axis_samples)
    cells = L.cells
    total = 0.0
    for kvec, w in kernel.lam.items():
        prod = np.ones(cells.shape[0])
        for axis, k in enumerate(kvec):
            prod = prod * blocks[axis][k - 1][cells[:, axis] - 1]
        total += w * float(prod.sum())
    return total / math.sqrt(L.size)


# ---------------------------------------------------------------------------
# replicated simulation
# ---------------------------------------------------------------------------


def _provenance(kind, kernel, L, dists, n, seed) -> str:
    from .kernels import kernel_to_json
    payload = {
        "kind": kind,
        "kernel": kernel_to_json(kernel) if hasattr(kernel, "factors") else kernel,
        "L": L.to_json() if L is not None else None,
        "dists": [d.to_json() for d in dists] if dists else None,
        "N": n,
        "seed": seed,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _batch_S_L(kernel, L, dists, rng, rep_start, rep_count):
    """Vectorized sums for replications [rep_start, rep_start + rep_count)."""
    ncols = [L.axis_max(axis) for axis in range(kernel.d)]
    xs = [dists[axis].sample_block(rng, axis, rep_start, rep_count, ncols[axis])
          for axis in range(kernel.d)]
    if not kernel.lam:
        return np.zeros(rep_count)
    blocks = []
    for axis in range(kernel.d):
        kmax = kernel.axis_max_index(axis)
        flat = kernel.factors[axis].evaluate_block(kmax, xs[axis].ravel())
        blocks.append(flat.reshape(kmax, rep_count, ncols[axis]))
    root = math.sqrt(L.size)
    out = np.zeros(rep_count)
    # weights multiply the assembled core last, so the parametric field path
    # can share one core across its whole grid and stay bit-identical per slice
    if L.kind == "rect":
        sums = [b.sum(axis=2) for b in blocks]           # (kmax, reps)
        for kvec, w in kernel.lam.items():
            core = sums[0][kvec[0] - 1]
            for axis in range(1, kernel.d):
                core = core * sums[axis][kvec[axis] - 1]
            out += w * core
        return out / root
    cells = L.cells
    for kvec, w in kernel.lam.items():
        core = blocks[0][kvec[0] - 1][:, cells[:, 0] - 1]
        for axis in range(1, kernel.d):
            core = core * blocks[axis][kvec[axis] - 1][:, cells[:, axis] - 1]
        out += w * core.sum(axis=1)
    return out / root


def _run_blocks(worker_fn, N, workers, block_cap):
    """Partition replications into worker chunks and memory blocks; order-stable."""
    edges = np.linspace(0, N, num=max(1, int(workers)) + 1, dtype=int)
    chunks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    def run_chunk(bounds):
        a, b = bounds
        parts = []
        start = a
        while start < b:
            count = min(block_cap, b - start)
            parts.append(worker_fn(start, count))
            start += count
        return np.concatenate(parts) if parts else np.empty(0)

    if len(chunks) <= 1:
        results = [run_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run_chunk, chunks))
    return np.concatenate(results) if results else np.empty(0)


def simulate_S_L(kernel, L: IndexSet, dists, N: int, rng: RngSpec,
                 workers: int = 1) -> EmpiricalDist:
    """N independent replications of S_L; deterministic under the stream policy.

    Worker counts partition replications without changing any variate, so the
    result is identical to a serial run.
    """
    if N < 1:
        raise ValueError("need at least one replication")
    if len(dists) != kernel.d:
        raise ValueError("need one axis distribution per kernel axis")
    cell_count = L.size if L.kind != "rect" else 1
    block_cap = max(256, _BLOCK_BUDGET // max(cell_count, max(
        L.axis_max(axis) for axis in range(kernel.d))))
    vals = _run_blocks(lambda a, c: _batch_S_L(kernel, L, dists, rng, a, c),
                       N, workers, block_cap)
    return EmpiricalDist(vals, _provenance("S_L", kernel, L, dists, N, rng.seed),
                         seed=rng.seed)


def _batch_S_infty(lam, d, rng, rep_start, rep_count):
    if not lam:
        return np.zeros(rep_count)
    kmax = [max(kvec[axis] for kvec in lam) for axis in range(d)]
    betas = []
    for axis in range(d):
        u = rng.uniform_block(TAG_BETA, axis, rep_start, rep_count, kmax[axis])
        betas.append(ndtri(np.clip(u, 2.0 ** -60, 1.0 - 2.0 ** -53)))
    out = np.zeros(rep_count)
    for kvec, w in lam.items():
        core = betas[0][:, kvec[0] - 1]
        for axis in range(1, d):
            core = core * betas[axis][:, kvec[axis] - 1]
        out += w * core
    return out


def sample_S_infty(lam: dict, d: int, N: int, rng: RngSpec,
                   workers: int = 1) -> EmpiricalDist:
    """Gaussian-chaos limit ``sum_k lambda(k) prod_s beta_s(k_s)``, fresh betas per replication."""
    if N < 1:
        raise ValueError("need at least one replication")
    lam = {tuple(k): float(w) for k, w in lam.items()}
    vals = _run_blocks(lambda a, c: _batch_S_infty(lam, d, rng, a, c),
                       N, workers, max(512, _BLOCK_BUDGET // max(
                           1, sum(max((k[axis] for k in lam), default=1) for axis in range(d)))))
    payload = {"lambda": sorted((list(k), w) for k, w in lam.items()), "d": d}
    return EmpiricalDist(vals, _provenance("S_infty", payload, None, None, N, rng.seed),
                         seed=rng.seed)


# ---------------------------------------------------------------------------
# persistence: binary column file with a JSON header, CSV quantile export
# ---------------------------------------------------------------------------


def empirical_bytes(dist: EmpiricalDist) -> bytes:
    header = json.dumps({"format": "empirical-dist-v1", "n": dist.n,
                         "provenance": dist.provenance, "seed": dist.seed},
                        sort_keys=True)
    return header.encode() + b"\n" + dist.values.astype("<f8").tobytes()


def save_empirical(dist: EmpiricalDist, path) -> None:
    with open(path, "wb") as fh:
        fh.write(empirical_bytes(dist))


def load_empirical(path) -> EmpiricalDist:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        vals = np.frombuffer(fh.read(), dtype="<f8")
    if header.get("format") != "empirical-dist-v1" or vals.size != header["n"]:
        raise ValueError("corrupt empirical distribution file")
    return EmpiricalDist(vals, header.get("provenance", ""),
                         seed=header.get("seed"))


def quantile_csv(dist: EmpiricalDist, qs=None) -> str:
    qs = np.linspace(0.0, 1.0, 101) if qs is None else np.asarray(qs, dtype=float)
    lines = ["q,value"]
    for q, v in zip(qs, dist.quantile(qs)):
        lines.append(f"{q!r},{v!r}")
    return "\n".join(lines) + "\n"
