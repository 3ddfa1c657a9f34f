"""Config-driven experiment pipeline: data, masks, navigators, landmarks,
kernels, solve, metrics, CSV results.

A spec is a single JSON document; every omitted field is materialized from
defaults and the resolved spec is echoed next to the results so a run can be
reproduced byte-for-byte (wall-time columns aside).
"""

from __future__ import annotations

import copy
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import baselines
from .errors import DataError, InputError
from .graphs import build_graph_operators, knn_graph, laplacian
from .kernels import (
    KernelSpec,
    default_kernel_dictionary,
    gaussian_spec,
    median_distance_gaussian,
)
from .metrics import compute_metrics
from .model import ModelDims, SolverConfig
from .mri import PhantomParams, ifft2_frames, make_phantom
from .navigators import (
    form_navigators_dmri,
    form_navigators_tvgs,
    select_landmarks,
)
from .sampling import (
    cartesian_mask,
    radial_mask,
    sample_p1,
    sample_p2,
    with_band,
)
from .solver import DMRI, TVGS, solve

MAIN_METHOD = "mlkr"  # multilinear kernel regression, the engine itself

TVGS_METHODS = (MAIN_METHOD, "mmf", "nbp", "krg", "kgl", "zero-fill", "mean-fill")
DMRI_METHODS = (MAIN_METHOD, "zero-fill")

RESULT_COLUMNS = ("method", "ratio", "seed", "mae", "rmse", "mape", "nrmse",
                  "ssim", "hfen", "seconds")

_DEFAULTS = {
    "problem": None,
    "data": {"source": "synthetic"},
    "sampling": {"kind": "p1", "ratios": [0.3], "band": 0},
    "navigator": {"mode": "nav1", "delta_t": 1, "upsilon": 4},
    "landmarks": {"strategy": "maxmin", "count": 20},
    "kernels": [{"kind": "gaussian", "sigma": 0.4}],
    "dims": {"depth": 2, "inner": [5]},
    "solver": {},
    "baseline": {"rank": 5, "depth": 2},
    "methods": [MAIN_METHOD],
    "repeats": 1,
    "base_seed": 0,
    "metrics": None,  # per-problem default resolved below
    "missing_only_metrics": False,
    "output_dir": ".",
    "workers": 1,
    "graph": {"k": 5, "eps": 0.1, "beta": 1.0},
}

_SYNTH_DEFAULTS = {"source": "synthetic", "nodes": 50, "times": 80, "modes": 3,
                   "knn": 5, "seed": 7, "offset": 3.0}
_PHANTOM_DEFAULTS = {"source": "phantom", "i1": 32, "i2": 32, "i3": 16,
                     "period": None, "noise_snr_db": None, "seed": 0}


# ---------------------------------------------------------------------------
# data loading and generation
# ---------------------------------------------------------------------------

def _parse_numeric_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise DataError(f"{path}:{ln}: non-numeric cell ({exc})") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataError(
                    f"{path}:{ln}: ragged row has {len(vals)} cells, expected {width}"
                )
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: empty file")
    return np.array(rows)


def load_tvgs_csv(data_path, coords_path) -> tuple[np.ndarray, np.ndarray]:
    """Data CSV is I0 rows x I_N columns; coords CSV has I0 rows, optionally
    led by a node-id column (0- or 1-based consecutive integers)."""
    Y = _parse_numeric_csv(data_path)
    coords = _parse_numeric_csv(coords_path)
    n = Y.shape[0]
    first = coords[:, 0]
    if coords.shape[1] >= 2 and (
        np.array_equal(first, np.arange(coords.shape[0]))
        or np.array_equal(first, np.arange(1, coords.shape[0] + 1))
    ):
        coords = coords[:, 1:]
    if coords.shape[0] != n:
        raise DataError(
            f"{coords_path}: has {coords.shape[0]} rows but the data has {n}"
        )
    return Y, coords.T  # coordinates as columns


def make_tvgs_synthetic(n_nodes=50, n_times=80, modes=3, knn=5, seed=7, offset=3.0):
    """Smooth synthetic graph signal: low graph-frequency modes with slow
    temporal sinusoids on top of a constant offset."""
    rng = np.random.default_rng(seed)
    coords = rng.random((2, n_nodes))
    W, _ = knn_graph(coords, knn)
    lam, U = np.linalg.eigh(laplacian(W))
    t = np.arange(n_times)
    Y = np.zeros((n_nodes, n_times))
    for j in range(modes):
        mode = U[:, j + 1] * np.sqrt(n_nodes)  # skip the constant eigenvector
        phase = rng.uniform(0.0, 2.0 * np.pi)
        profile = np.sin(2.0 * np.pi * (j + 1) * t / n_times + phase)
        Y += (1.0 / (j + 1)) * mode[:, None] * profile[None, :]
    return Y + offset, coords


# ---------------------------------------------------------------------------
# spec resolution
# ---------------------------------------------------------------------------

def resolve_spec(raw: dict) -> dict:
    """Materialize every default and validate; raises InputError on bad fields."""
    spec = copy.deepcopy(_DEFAULTS)
    for key, val in raw.items():
        if key not in spec:
            raise InputError(f"unknown spec field {key!r}")
        if isinstance(spec[key], dict) and isinstance(val, dict):
            spec[key].update(val)
        else:
            spec[key] = copy.deepcopy(val)
    problem = spec["problem"]
    if problem not in (TVGS, DMRI):
        raise InputError(f"problem must be '{TVGS}' or '{DMRI}', got {problem!r}")
    allowed = TVGS_METHODS if problem == TVGS else DMRI_METHODS
    for m in spec["methods"]:
        if m not in allowed:
            raise InputError(f"method {m!r} not available for {problem}")
    data = spec["data"]
    src = data.get("source")
    if problem == TVGS:
        if src == "synthetic":
            spec["data"] = {**_SYNTH_DEFAULTS, **data}
        elif src == "csv":
            for k in ("data_path", "coords_path"):
                if k not in data:
                    raise InputError(f"csv data source needs {k!r}")
        else:
            raise InputError(f"unknown tvgs data source {src!r}")
        if spec["sampling"]["kind"] not in ("p1", "p2"):
            raise InputError("tvgs sampling kind must be 'p1' or 'p2'")
        for r in spec["sampling"]["ratios"]:
            if not 0.0 < r <= 1.0:
                raise InputError(f"sampling ratio {r} outside (0, 1]")
    else:
        if src != "phantom":
            raise InputError(f"unknown dmri data source {src!r}")
        spec["data"] = {**_PHANTOM_DEFAULTS, **data}
        if spec["sampling"]["kind"] not in ("cartesian", "radial"):
            raise InputError("dmri sampling kind must be 'cartesian' or 'radial'")
        for a in spec["sampling"]["ratios"]:
            if not a >= 1.0:
                raise InputError(f"acceleration {a} must be >= 1")
    if spec["metrics"] is None:
        # percentage error is meaningless against near-zero image magnitudes
        spec["metrics"] = (["mae", "rmse", "mape", "nrmse"] if problem == TVGS
                           else ["mae", "rmse", "nrmse", "ssim", "hfen"])
    known = {"mae", "rmse", "mape", "nrmse", "ssim", "hfen"}
    for name in spec["metrics"]:
        if name not in known:
            raise InputError(f"unknown metric {name!r}")
    if spec["repeats"] < 1:
        raise InputError("repeats must be at least 1")
    if spec["landmarks"]["count"] < 1:
        raise InputError("landmark count must be at least 1")
    depth = spec["dims"]["depth"]
    inner = list(spec["dims"]["inner"])
    if len(inner) != depth - 1:
        raise InputError(f"depth {depth} needs {depth - 1} inner dims, got {inner}")
    SolverConfig(**spec["solver"])  # validates weights and schedule
    return spec


def _kernel_specs_from_config(cfg, landmark_points) -> list[KernelSpec]:
    if cfg == "default7":
        return default_kernel_dictionary(landmark_points)
    specs = []
    for item in cfg:
        kind = item.get("kind")
        if kind == "gaussian":
            if item.get("sigma") == "median":
                specs.append(median_distance_gaussian(landmark_points))
            elif "sigma" in item:
                specs.append(gaussian_spec(item["sigma"]))
            else:
                specs.append(KernelSpec("gaussian", gamma=item["gamma"]))
        elif kind == "linear":
            specs.append(KernelSpec("linear"))
        elif kind == "polynomial":
            intercept = item.get("intercept")
            if intercept is None:
                intercept = complex(np.mean(landmark_points))
            specs.append(KernelSpec("polynomial", degree=item["degree"],
                                    intercept=intercept))
        else:
            raise InputError(f"unknown kernel kind {kind!r}")
    return specs


# ---------------------------------------------------------------------------
# per-cell execution
# ---------------------------------------------------------------------------

def _metric_row(method, ratio, seed, rep, seconds, wanted):
    row = {"method": method, "ratio": ratio, "seed": seed, "seconds": seconds}
    row.update({k: (v if k in wanted else None) for k, v in rep.as_dict().items()})
    return row


def _solve_main_tvgs(spec, Y, pattern, graph, seed):
    nav_cfg = spec["navigator"]
    nav = form_navigators_tvgs(Y, pattern, nav_cfg["mode"], graph,
                               nav_cfg["delta_t"])
    lmk_cfg = spec["landmarks"]
    lmk = select_landmarks(nav, lmk_cfg["count"], lmk_cfg["strategy"], seed)
    kspecs = _kernel_specs_from_config(spec["kernels"], lmk.points)
    dims = ModelDims(
        n_rows=Y.shape[0], n_cols=Y.shape[1], n_landmarks=lmk.count,
        n_kernels=len(kspecs), depth=spec["dims"]["depth"],
        inner=tuple(spec["dims"]["inner"]),
    )
    config = SolverConfig(**{**spec["solver"], "seed": seed})
    return solve(TVGS, Y, pattern, graph, lmk, kspecs, dims, config)


def _solve_main_dmri(spec, kspace, pattern, frame_dims, seed):
    i1, i2, _ = frame_dims
    upsilon = spec["navigator"]["upsilon"]
    # work at unit k-space scale so kernel widths and weights are portable
    observed = np.where(pattern.mask, kspace, 0)
    scale = float(np.abs(observed).max())
    if scale == 0:
        raise DataError("no observed k-space energy")
    Yn = kspace / scale
    nav = form_navigators_dmri(np.where(pattern.mask, Yn, 0), pattern, i1, i2, upsilon)
    lmk_cfg = spec["landmarks"]
    lmk = select_landmarks(nav, lmk_cfg["count"], lmk_cfg["strategy"], seed)
    kspecs = _kernel_specs_from_config(spec["kernels"], lmk.points)
    dims = ModelDims(
        n_rows=kspace.shape[0], n_cols=kspace.shape[1], n_landmarks=lmk.count,
        n_kernels=len(kspecs), depth=spec["dims"]["depth"],
        inner=tuple(spec["dims"]["inner"]),
    )
    config = SolverConfig(**{**spec["solver"], "seed": seed})
    X, model, report = solve(DMRI, Yn, pattern, frame_dims, lmk, kspecs, dims, config)
    return X * scale, model, report


def _run_cell_tvgs(spec, Y, graph, ratio, repeat, seed, out_dir):
    kind = spec["sampling"]["kind"]
    sampler = sample_p1 if kind == "p1" else sample_p2
    pattern = sampler(Y.shape[0], Y.shape[1], ratio, seed)
    missing_only = spec["missing_only_metrics"]
    rows = []
    for method in spec["methods"]:
        t0 = time.perf_counter()
        report = None
        if method == MAIN_METHOD:
            X, _model, report = _solve_main_tvgs(spec, Y, pattern, graph, seed)
        elif method == "zero-fill":
            X = baselines.zero_fill(Y, pattern)
        elif method == "mean-fill":
            X = baselines.mean_fill(Y, pattern)
        else:
            bconf = SolverConfig(**{**spec["solver"], "seed": seed})
            S_y = np.where(pattern.mask, Y, 0)
            bspec = baselines.BaselineSpec(
                kind=method,
                rank=spec["baseline"]["rank"],
                depth=spec["baseline"]["depth"],
                kernel_row=median_distance_gaussian(S_y.T),
                kernel_col=median_distance_gaussian(S_y),
            )
            X, report = baselines.run_baseline(bspec, Y, pattern, graph, bconf)
        seconds = time.perf_counter() - t0
        rep = compute_metrics(X, Y, observed_mask=pattern.mask,
                              missing_only=missing_only)
        rows.append(_metric_row(method, ratio, seed, rep, seconds, spec["metrics"]))
        if report is not None and report.iterations and out_dir is not None:
            report.to_csv(out_dir / f"trace_{method}_r{ratio}_{repeat}.csv")
    return rows


def _run_cell_dmri(spec, dataset, ratio, repeat, seed, out_dir):
    i1, i2, i3 = dataset.dims
    kind = spec["sampling"]["kind"]
    band = spec["navigator"]["upsilon"]
    if kind == "cartesian":
        pattern = cartesian_mask(i1, i2, i3, ratio, band, seed)
    else:
        pattern = with_band(radial_mask(i1, i2, i3, ratio, seed), i1, i2, band)
    truth = dataset.ground_truth_image
    rows = []
    for method in spec["methods"]:
        t0 = time.perf_counter()
        report = None
        if method == MAIN_METHOD:
            X, _model, report = _solve_main_dmri(spec, dataset.kspace, pattern,
                                                 (i1, i2, i3), seed)
        else:
            X = ifft2_frames(np.where(pattern.mask, dataset.kspace, 0), i1, i2)
        seconds = time.perf_counter() - t0
        rep = compute_metrics(X, truth, observed_mask=pattern.mask,
                              image_dims=(i1, i2))
        rows.append(_metric_row(method, ratio, seed, rep, seconds, spec["metrics"]))
        if report is not None and report.iterations and out_dir is not None:
            report.to_csv(out_dir / f"trace_{method}_a{ratio}_{repeat}.csv")
    return rows


# ---------------------------------------------------------------------------
# sweep driver and output
# ---------------------------------------------------------------------------

def _fmt(val):
    if val is None:
        return ""
    if isinstance(val, float):
        return repr(val)
    return str(val)


def emit_results(rows: list[dict], path) -> None:
    """Stable long-format CSV; aggregate rows carry seed='mean'."""
    with open(path, "w") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in RESULT_COLUMNS) + "\n")


def aggregate_rows(rows: list[dict], methods, ratios) -> list[dict]:
    out = []
    for method in methods:
        for ratio in ratios:
            group = [r for r in rows if r["method"] == method and r["ratio"] == ratio]
            if not group:
                continue
            agg = {"method": method, "ratio": ratio, "seed": "mean"}
            for col in ("mae", "rmse", "mape", "nrmse", "ssim", "hfen", "seconds"):
                vals = [r0[col] for r0 in group if r0.get(col) is not None]
                agg[col] = float(np.mean(vals)) if len(vals) == len(group) else None
            out.append(agg)
    return out


def run_experiment(raw_spec: dict, output_dir=None) -> list[dict]:
    """Execute the full sweep; writes results.csv, per-run traces and the
    resolved spec echo.  Returns the run rows (aggregates excluded)."""
    spec = resolve_spec(raw_spec)
    out_dir = Path(output_dir if output_dir is not None else spec["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    spec["output_dir"] = str(out_dir)
    with open(out_dir / "spec.resolved.json", "w") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)

    problem = spec["problem"]
    ratios = list(spec["sampling"]["ratios"])
    repeats = spec["repeats"]
    if problem == TVGS:
        data = spec["data"]
        if data["source"] == "synthetic":
            Y, coords = make_tvgs_synthetic(
                data["nodes"], data["times"], data["modes"], data["knn"],
                data["seed"], data["offset"],
            )
        else:
            Y, coords = load_tvgs_csv(data["data_path"], data["coords_path"])
        g = spec["graph"]
        graph = build_graph_operators(coords, g["k"], g["eps"], g["beta"], Y.shape[1])
        run_one = lambda ratio, rep, seed: _run_cell_tvgs(  # noqa: E731
            spec, Y, graph, ratio, rep, seed, out_dir)
    else:
        d = spec["data"]
        params = PhantomParams(period=d["period"], noise_snr_db=d["noise_snr_db"],
                               seed=d["seed"])
        dataset = make_phantom(d["i1"], d["i2"], d["i3"], params)
        run_one = lambda ratio, rep, seed: _run_cell_dmri(  # noqa: E731
            spec, dataset, ratio, rep, seed, out_dir)

    cells = []
    for i, ratio in enumerate(ratios):
        for rep in range(repeats):
            cells.append((ratio, rep, spec["base_seed"] + i * repeats + rep))

    results: dict[int, list[dict]] = {}
    errors: dict[int, str] = {}

    def worker(idx):
        ratio, rep, seed = cells[idx]
        try:
            results[idx] = run_one(ratio, rep, seed)
        except Exception as exc:  # a failed cell is recorded, the sweep continues
            errors[idx] = f"cell ratio={ratio} repeat={rep}: {exc}"

    workers = max(1, int(spec["workers"]))
    if workers == 1:
        for idx in range(len(cells)):
            worker(idx)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(worker, range(len(cells))))

    rows = [row for idx in sorted(results) for row in results[idx]]
    all_rows = rows + aggregate_rows(rows, spec["methods"], ratios)
    emit_results(all_rows, out_dir / "results.csv")
    if errors:
        with open(out_dir / "errors.log", "w") as fh:
            for idx in sorted(errors):
                fh.write(errors[idx] + "\n")
    return rows
