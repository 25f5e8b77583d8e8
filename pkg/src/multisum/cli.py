"""Batch front-end: config in, deterministic CSV/JSON reports out.

Subcommands: ``bound | simulate | verify | psi``.  Every run is a pure
function of the config bytes; all randomness flows from the mandatory
``seed`` field, re-runs produce byte-identical files, and output files are
named by a digest of their own content (a fixed-name ``manifest.json`` maps
logical kinds to those names).

Exit codes: 0 success, 2 config error, 3 verification hypotheses not met,
4 numeric divergence marker encountered.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .index_sets import (index_set_from_json, lshape_family, make_rect,
                         squares_family, squares_minus_corner_family)
from .kernels import kernel_from_json
from .mc import (RngSpec, axis_distribution_from_json, empirical_bytes,
                 quantile_csv, simulate_S_L)
from .parametric import check_theorem_8, parametric_kernel_from_json
from .psi import psi_from_json, young_fenchel, TailBound, tail_bound_eval
from .rosenthal import (BoundReport, dp_quasinorm, klesov_bound, rosenthal_K,
                        theorem_W_bound, trivial_bound)
from .verify import (natural_composite, verify_irregular_nclt,
                     verify_moment_sandwich, verify_rect_nclt,
                     verify_tail_domination)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESES = 3
EXIT_DIVERGENCE = 4


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


class OutputSet:
    """Collects output files, names them by content digest, writes a manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.entries = {}

    def add(self, kind: str, ext: str, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()[:12]
        name = f"{kind}-{digest}.{ext}"
        (self.out_dir / name).write_bytes(data)
        self.entries[kind] = name
        return name

    def finish(self, config_digest: str) -> None:
        manifest = {"config_digest": config_digest, "files": self.entries,
                    "version": __version__}
        (self.out_dir / "manifest.json").write_bytes(_dump_json(manifest))


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def load_config(path: str, seed_override=None):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    if "seed" not in cfg:
        raise ConfigError("config must name an integer 'seed'; no wall-clock default")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("'seed' must be an integer")
    digest = hashlib.sha256(_dump_json(cfg)).hexdigest()[:16]
    return cfg, digest


def _require(cfg, key, kind=None):
    if key not in cfg:
        raise ConfigError(f"config is missing '{key}'")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config field '{key}' has the wrong type")
    return val


def _load_kernel(cfg):
    return kernel_from_json(_require(cfg, "kernel", dict))


def _load_dists(cfg, d):
    spec = _require(cfg, "distributions", list)
    if len(spec) != d:
        raise ConfigError(f"need {d} axis distributions, got {len(spec)}")
    return [axis_distribution_from_json(s) for s in spec]


def _load_index_sets(cfg):
    spec = _require(cfg, "index_sets", dict)
    if "list" in spec:
        return [index_set_from_json(s) for s in spec["list"]]
    family = spec.get("family")
    sizes = spec.get("sizes")
    if family is None or sizes is None:
        raise ConfigError("index_sets needs either 'list' or 'family' plus 'sizes'")
    if family == "squares":
        return squares_family(sizes)
    if family == "boxes":
        d = int(spec.get("d", 2))
        return [make_rect([n] * d) for n in sizes]
    if family == "squares_minus_corner":
        return squares_minus_corner_family(sizes)
    if family == "lshape_fixed_fraction":
        return lshape_family(sizes, float(spec.get("fraction", 0.5)))
    raise ConfigError(f"unknown index set family '{family}'")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_bound(cfg, out: OutputSet, workers: int) -> int:
    kernel = _load_kernel(cfg)
    spec = _require(cfg, "bound", dict)
    p_grid = [float(p) for p in _require(cfg, "p_grid", list)]
    routes = spec.get("routes", ["klesov_product"])
    l_size = int(spec.get("L_size", 1))
    m_max = int(spec.get("M_max", max(kernel.M, 1)))
    reports = []
    for p in p_grid:
        for route in routes:
            if route == "trivial":
                rep = BoundReport(p, trivial_bound(kernel.moment(p), p, l_size), "trivial")
            elif route == "klesov_product":
                if len(kernel.lam) != 1:
                    raise ConfigError("klesov_product route needs a rank-one kernel")
                (kvec, w), = kernel.lam.items()
                moments = [kernel.factor_moment(axis, k, p)
                           for axis, k in enumerate(kvec)]
                rep = BoundReport(p, abs(w) * klesov_bound(moments, p), "klesov_product")
            elif route == "dp_quasinorm":
                val = rosenthal_K(p) ** kernel.d * dp_quasinorm(kernel, p)
                rep = BoundReport(p, val, "dp_quasinorm")
            elif route == "theorem_W":
                rep = theorem_W_bound(kernel, p, l_size, m_max)
            else:
                raise ConfigError(f"unknown bound route '{route}'")
            reports.append(rep)
    csv = "p,route,M_star,value\n" + "".join(r.to_csv_row() + "\n" for r in reports)
    out.add("bounds", "csv", csv.encode())
    out.add("bounds_rows", "json", _dump_json([r.to_json_row() for r in reports]))
    return EXIT_OK


def cmd_simulate(cfg, out: OutputSet, workers: int) -> int:
    kernel = _load_kernel(cfg)
    dists = _load_dists(cfg, kernel.d)
    sets = _load_index_sets(cfg)
    n = int(_require(cfg, "N", int))
    rng = RngSpec(cfg["seed"])
    summary = []
    for i, L in enumerate(sets):
        dist = simulate_S_L(kernel, L, dists, n, rng.child(i), workers=workers)
        name = out.add(f"dist_{i}", "bin", empirical_bytes(dist))
        out.add(f"quantiles_{i}", "csv", quantile_csv(dist).encode())
        var = dist.variance()
        row = {"index_set": L.to_json(), "file": name, "N": n,
               "variance": var, "variance_se": dist.variance_se(),
               "sigma_sq": kernel.sigma_sq}
        if kernel.sigma_sq > 0:
            row["var_ratio"] = var / kernel.sigma_sq
        summary.append(row)
    out.add("summary", "json", _dump_json(summary))
    return EXIT_OK


def _gnuplot_script(csv_name: str, ycol: int, ylabel: str) -> bytes:
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set ylabel '{ylabel}'",
        "set logscale y",
        f"plot '{csv_name}' using 1:{ycol} with linespoints",
    ]
    return ("\n".join(lines) + "\n").encode()


def cmd_verify(cfg, out: OutputSet, workers: int) -> int:
    spec = _require(cfg, "verify", dict)
    which = spec.get("which")
    rng = RngSpec(cfg["seed"])
    n = int(_require(cfg, "N", int))
    final_ks = float(spec.get("final_ks", 0.05))
    limit_n = int(spec.get("limit_n", 100_000))

    if which == "nclt":
        kernel = _load_kernel(cfg)
        dists = _load_dists(cfg, kernel.d)
        iset = _require(cfg, "index_sets", dict)
        family = iset.get("family")
        if family in ("squares", "boxes"):
            sizes = iset["sizes"]
            report = verify_rect_nclt(kernel, dists, sizes, n, rng,
                                      limit_n=limit_n, final_ks=final_ks)
        else:
            sets = _load_index_sets(cfg)
            report = verify_irregular_nclt(kernel, dists, sets, n, rng,
                                           limit_n=limit_n, final_ks=final_ks)
        csv_name = out.add("stages", "csv", report.to_csv().encode())
        out.add("verdict", "json", _dump_json(report.to_json()))
        out.add("plot", "gp", _gnuplot_script(csv_name, 5, "KS distance"))
        return EXIT_OK if report.verdict == "pass" else (
            EXIT_HYPOTHESES if report.verdict == "hypotheses not met" else EXIT_OK)

    if which == "sandwich":
        kernel = _load_kernel(cfg)
        dists = _load_dists(cfg, kernel.d)
        sets = _load_index_sets(cfg)
        p_grid = [float(p) for p in _require(cfg, "p_grid", list)]
        report = verify_moment_sandwich(kernel, dists, sets, p_grid, n, rng)
        payload = report.to_json()
        payload["shape_fits"] = _sandwich_shape_fits(kernel, dists)
        out.add("verdict", "json", _dump_json(payload))
        csv = "p,lower,empirical,empirical_se,upper\n" + "".join(
            f"{_fmt(p)},{_fmt(l)},{_fmt(e)},{_fmt(se)},{_fmt(u)}\n"
            for p, l, e, se, u in zip(report.p_grid, report.lower, report.empirical,
                                      report.empirical_se, report.upper))
        csv_name = out.add("sandwich", "csv", csv.encode())
        out.add("plot", "gp", _gnuplot_script(csv_name, 3, "|S_L|_p"))
        return EXIT_OK

    if which == "tail":
        kernel = _load_kernel(cfg)
        dists = _load_dists(cfg, kernel.d)
        sets = _load_index_sets(cfg)
        p_grid = cfg.get("p_grid") or list(np.geomspace(2.0, 64.0, 25))
        composite = natural_composite(kernel, dists, [float(p) for p in p_grid])
        report = verify_tail_domination(kernel, dists, sets, composite, n, rng)
        out.add("verdict", "json", _dump_json(report.to_json()))
        tb = TailBound(gls_norm=kernel.lambda_l1, psi=composite)
        csv = "y,bound\n" + "".join(
            f"{_fmt(y)},{_fmt(tail_bound_eval(tb, y))}\n" for y in report.y_grid)
        csv_name = out.add("tailbound", "csv", csv.encode())
        out.add("plot", "gp", _gnuplot_script(csv_name, 2, "tail bound"))
        return EXIT_OK

    if which == "parametric":
        pk = parametric_kernel_from_json(_require(cfg, "parametric_kernel", dict))
        dists = _load_dists(cfg, pk.d)
        iset = _require(cfg, "index_sets", dict)
        sets = [make_rect([m] * pk.d) for m in iset["sizes"]] \
            if iset.get("family") in ("squares", "boxes") else _load_index_sets(cfg)
        level_spec = spec.get("level", {"kind": "power", "p": 2.0})
        if level_spec["kind"] == "power":
            level = ("power", float(level_spec["p"]))
        else:
            level = ("exponential", psi_from_json(level_spec["tau"]))
        report = check_theorem_8(pk, level, sets, dists, n, rng,
                                 limit_n=limit_n, final_ks=final_ks)
        out.add("verdict", "json", _dump_json(report.to_json()))
        if report.profile is not None:
            from .parametric import profile_csv
            out.add("entropy_profile", "csv", profile_csv(report.profile).encode())
        if math.isinf(report.hypotheses["entropy_integral"]):
            return EXIT_DIVERGENCE
        if report.verdict == "hypotheses not met":
            return EXIT_HYPOTHESES
        return EXIT_OK

    raise ConfigError("verify.which must be one of nclt | sandwich | tail | parametric")


def _sandwich_shape_fits(kernel, dists) -> dict:
    """Log-log slopes of the analytic envelopes against p/ln(p) on [4, 16].

    For a rank-one kernel the lower envelope is the product of factor moments
    and the upper is the Klesov bound; both are quadrature-backed, so the fit
    window is independent of what the Monte Carlo sandwich could estimate.
    """
    from .verify import factor_moment_under
    (kvec, w), = kernel.lam.items()
    p = np.array([4.0, 6.0, 8.0, 12.0, 16.0])
    lower, upper = [], []
    for pv in p:
        moments = [factor_moment_under(dists[axis], kernel.factors[axis], k, pv)
                   for axis, k in enumerate(kvec)]
        lower.append(abs(w) * math.prod(moments))
        upper.append(abs(w) * klesov_bound(moments, pv))
    shape = np.log(p / np.log(p))
    d = kernel.d
    return {
        "p_grid": p.tolist(),
        "lower_slope": float(np.polyfit(shape, np.log(lower), 1)[0]),
        "upper_slope": float(np.polyfit(shape, np.log(upper), 1)[0]),
        "expected_lower_slope": float(d),
        "expected_upper_slope": float(2 * d),
    }


def cmd_psi(cfg, out: OutputSet, workers: int) -> int:
    spec = _require(cfg, "psi", dict)
    psi = psi_from_json(_require(spec, "spec", dict))
    p_grid = [float(p) for p in spec.get("p_grid", np.geomspace(
        psi.p_min, min(psi.support_upper, 64.0), 25).tolist())]
    x_grid = [float(x) for x in spec.get("x_grid", np.linspace(1.0, 5.0, 17).tolist())]
    norm = float(spec.get("gls_norm", 1.0))
    tb = TailBound(gls_norm=norm, psi=psi)
    y_grid = [float(y) for y in spec.get("y_grid", np.geomspace(
        tb.validity_threshold, tb.validity_threshold * 50.0, 17).tolist())]
    rows = ["p,psi,v"]
    for p in p_grid:
        val = psi(p)
        rows.append(f"{_fmt(p)},{_fmt(val)},{_fmt(p * math.log(val))}")
    out.add("psi_table", "csv", ("\n".join(rows) + "\n").encode())
    rows = ["x,v_star"]
    diverged = False
    for x in x_grid:
        v = young_fenchel(psi, x)
        diverged = diverged or math.isinf(v)
        rows.append(f"{_fmt(x)},{'inf' if math.isinf(v) else _fmt(v)}")
    out.add("conjugate", "csv", ("\n".join(rows) + "\n").encode())
    rows = ["y,tail_bound"]
    for y in y_grid:
        rows.append(f"{_fmt(y)},{_fmt(tail_bound_eval(tb, y))}")
    out.add("tail", "csv", ("\n".join(rows) + "\n").encode())
    return EXIT_DIVERGENCE if diverged else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "psi": cmd_psi,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="multisum",
        description="moment/tail bounds and chaos-limit verification for multi-indexed sums")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg, digest = load_config(args.config, args.seed_override)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        out = OutputSet(out_dir)
        code = _COMMANDS[args.command](cfg, out, max(1, args.workers))
        out.finish(digest)
        return code
    except ConfigError as exc:
        sys.stderr.write(_dump_json({"error": str(exc)}).decode())
        return EXIT_CONFIG
    except (KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(_dump_json({"error": f"invalid config: {exc}"}).decode())
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
