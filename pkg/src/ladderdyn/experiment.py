"""Configuration-driven experiments writing CSV tables and JSON manifests.

Configs are YAML (JSON also parses). Every random stream derives from
``root_seed`` through :func:`run_seed`, so an output directory can be
regenerated from the ``config`` block stored in its ``report.json``.
"""
from __future__ import annotations

import json
import logging
import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .analysis import ScalingReport, detect_early_maximum
from .basis import build_basis
from .errors import CapacityError, LadderError, SchemaError, UnreachableTargetError
from .hamiltonian import LadderHamiltonian
from .observables import equilibration_time, evolve_and_trace, typical_variance
from .state_prep import PrepRecipe, derive_seed, prepare_omega, tune_alpha
from .stochastic import (SpinFlipModel, extract_drift_diffusion, fit_gamma, markov_iterate,
                         master_trajectory, measure_transition_matrix)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINDS = ("trace", "typicality", "transition-matrix", "drift-diffusion", "scaling")

# stream tags keep the seed families of different experiment parts disjoint
STREAM_TRACE, STREAM_TYPICAL, STREAM_WMATRIX = 0, 1, 2


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Couplings(_Strict):
    J: float = 1.0
    kappa: float = 0.2
    delta: float = 0.6


class Window(_Strict):
    E0: float = 0.0
    sigma_H: float = Field(0.37, gt=0)


class Run(_Strict):
    X_target: int
    seed: int = Field(0, ge=0, description="run label, combined with root_seed")


class TimeGrid(_Strict):
    t_max: float = Field(150.0, gt=0)
    dt_out: float = Field(0.5, gt=0)


class Stochastic(_Strict):
    tau: float = Field(15.0, gt=0)
    seeds_per_column: int = Field(5, ge=1)
    fit_gamma: bool = True
    gamma: float = Field(1.0, gt=0)


class Typicality(_Strict):
    n_seeds: int = Field(10, ge=2)


class Scaling(_Strict):
    N_values: list[int] = Field(default_factory=lambda: [12, 16, 20], min_length=3)


def _admissible(X, N):
    return abs(X) <= N // 2 and (X - N // 2) % 2 == 0


class ExperimentConfig(_Strict):
    version: Literal[1] = SCHEMA_VERSION
    kind: Literal["trace", "typicality", "transition-matrix", "drift-diffusion", "scaling"]
    N: int = 16
    couplings: Couplings = Field(default_factory=Couplings)
    window: Window = Field(default_factory=Window)
    runs: list[Run] = Field(min_length=1)
    time: TimeGrid = Field(default_factory=TimeGrid)
    stochastic: Stochastic = Field(default_factory=Stochastic)
    typicality: Typicality = Field(default_factory=Typicality)
    scaling: Scaling = Field(default_factory=Scaling)
    root_seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    output_dir: str = "runs"
    max_memory_gb: Optional[float] = Field(None, gt=0)

    @field_validator("N")
    @classmethod
    def _even(cls, N):
        if N < 4 or N % 2:
            raise ValueError("N must be an even integer >= 4")
        return N

    @model_validator(mode="after")
    def _targets(self):
        sizes = self.scaling.N_values if self.kind == "scaling" else [self.N]
        for n in sizes:
            if n < 4 or n % 2:
                raise ValueError(f"scaling size {n} must be an even integer >= 4")
        for i, run in enumerate(self.runs):
            if not any(_admissible(run.X_target, n) for n in sizes):
                raise ValueError(f"runs.{i}.X_target={run.X_target} is not admissible for N={sizes}")
        return self


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML/JSON config, or the ``config`` block of a ``report.json``."""
    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict):
        raise SchemaError("config must be a mapping")
    if isinstance(data.get("config"), dict) and "results" in data:
        data = data["config"]  # a report.json written by run_experiment
    return parse_config(data, **overrides)


def parse_config(data, **overrides) -> ExperimentConfig:
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"])
        raise SchemaError(err["msg"], path=path) from None


def run_seed(root_seed, stream, N, *labels) -> int:
    """Seed of one random state: hash of (root seed, stream tag, N, labels)."""
    return derive_seed(root_seed, stream, N, *labels)


def preflight(N, max_memory_gb=None):
    """Raise :class:`CapacityError` if a run at size ``N`` will not fit in memory."""
    from math import comb

    dim = comb(N, N // 2)
    # ~6 complex work vectors plus basis words, diagonal and probabilities
    need = dim * (6 * 16 + 3 * 8)
    if max_memory_gb is not None:
        avail = max_memory_gb * 2 ** 30
    else:
        try:
            avail = os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_AVPHYS_PAGES")
        except (ValueError, OSError, AttributeError):
            return need
    if need > avail:
        raise CapacityError(
            f"N={N} needs about {need / 2 ** 30:.2f} GiB, only {avail / 2 ** 30:.2f} GiB available"
        )
    return need


def _hamiltonian(N, couplings):
    return LadderHamiltonian(build_basis(N), couplings["J"], couplings["kappa"], couplings["delta"])


_H_CACHE: OrderedDict = OrderedDict()
_H_CACHE_SIZE = 3


def _cached_hamiltonian(N, couplings):
    """Hamiltonians (with their spectral bounds) for the last few sizes used."""
    key = (N, tuple(sorted(couplings.items())))
    if key in _H_CACHE:
        _H_CACHE.move_to_end(key)
    else:
        _H_CACHE[key] = _hamiltonian(N, couplings)
        while len(_H_CACHE) > _H_CACHE_SIZE:
            _H_CACHE.popitem(last=False)
    return _H_CACHE[key]


def _tuned_alpha(seed, X, h, window):
    try:
        return tune_alpha(seed, X, window["sigma_H"], h, h.basis, window["E0"]), True
    except UnreachableTargetError:
        # projected state already narrower than the target; leave it unfiltered
        return 0.0, False


def _trace_job(N, couplings, window, X, label, seed, t_max, dt_out):
    h = _cached_hamiltonian(N, couplings)
    alpha, reached = _tuned_alpha(seed, X, h, window)
    recipe = PrepRecipe(seed, X, alpha, window["E0"], window["sigma_H"])
    psi = prepare_omega(recipe, h, h.basis)
    trace = evolve_and_trace(psi, h, t_max, dt_out)
    trace.metadata.update(recipe=recipe.to_dict(), run_label=label, sigma_H_reached=reached)
    return trace


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, *zip(*jobs)))
    return [fn(*job) for job in jobs]


def _summarize(trace):
    T, P, m, v, eh, vh = trace.arrays()
    X = int(trace.metadata["recipe"]["X_target"])
    k = list(trace.x_values).index(X)
    out = {
        "X_target": X,
        "run_label": trace.metadata["run_label"],
        "seed": trace.metadata["recipe"]["seed"],
        "alpha": trace.metadata["recipe"]["alpha"],
        "sigma_H": float(np.sqrt(max(vh[0], 0.0))),
        "mean_H": float(eh[0]),
        "P_target_initial": float(P[0, k]),
        "mean_x_initial": float(m[0]),
        "final_variance": float(trace.late(v)),
        "t_equilibrated": equilibration_time(T, m),
        "norm_drift_max": float(np.max(np.abs(P.sum(axis=1) - 1))),
    }
    try:
        em = detect_early_maximum(T, v, m)
        out["early_maximum"] = {"time": em.time, "value": em.value, "distinct": em.distinct}
    except LadderError as exc:
        out["early_maximum"] = {"error": str(exc)}
    return out


def _write_traces(traces, out, N):
    files = []
    for tr in traces:
        rec = tr.metadata["recipe"]
        stem = f"trace_N{N}_X{rec['X_target']}_r{tr.metadata['run_label']}"
        tr.to_csv(out / f"{stem}.csv")
        tr.write_manifest(out / f"{stem}.json")
        files.append(f"{stem}.csv")
    return files


def _run_traces(cfg: ExperimentConfig, N, runs, out):
    couplings, window = cfg.couplings.model_dump(), cfg.window.model_dump()
    jobs = [(N, couplings, window, r.X_target, r.seed,
             run_seed(cfg.root_seed, STREAM_TRACE, N, r.X_target + N, r.seed),
             cfg.time.t_max, cfg.time.dt_out) for r in runs]
    traces = _map(_trace_job, jobs, cfg.workers)
    files = _write_traces(traces, out, N)
    return traces, files


def _gamma_from(traces, N, cfg):
    """Fit gamma on the run closest to equilibrium, or take it from the config."""
    model = SpinFlipModel(N, cfg.stochastic.gamma, cfg.couplings.kappa)
    if not cfg.stochastic.fit_gamma:
        return model, None
    ref = min(traces, key=lambda tr: abs(tr.metadata["recipe"]["X_target"]))
    T, P, m, *_ = ref.arrays()
    gamma = fit_gamma(T, m, P[0], model)
    return model.with_gamma(gamma), int(ref.metadata["recipe"]["X_target"])


def _model_rms(model, traces):
    out = {}
    for tr in traces:
        T, P, m, *_ = tr.arrays()
        pred = master_trajectory(model, P[0], T) @ model.x_values
        key = f"{tr.metadata['recipe']['X_target']}/r{tr.metadata['run_label']}"
        out[key] = float(np.sqrt(np.mean((pred - m) ** 2)))
    return out


def _typical(cfg, N, h):
    seeds = [run_seed(cfg.root_seed, STREAM_TYPICAL, N, i) for i in range(cfg.typicality.n_seeds)]
    window = cfg.window.model_dump()
    alphas = [_tuned_alpha(s, None, h, window)[0] for s in seeds]
    value, se = typical_variance(alphas, h, h.basis, seeds=seeds, E0=cfg.window.E0)
    return {"value": value, "stderr": se, "seeds": seeds, "alphas": alphas}


def _markov_check(W, traces, tau):
    out = {}
    for tr in traces:
        T, P, m, *_ = tr.arrays()
        dt = T[1] - T[0] if len(T) > 1 else tau
        n = int(np.floor(T[-1] / tau + 1e-9))
        idx = [int(round(k * tau / dt)) for k in range(n + 1)]
        pred = markov_iterate(W, P[0], n) @ W.x_values
        key = f"{tr.metadata['recipe']['X_target']}/r{tr.metadata['run_label']}"
        out[key] = {"max_abs_mean_deviation": float(np.max(np.abs(pred - m[idx]))),
                    "markov_mean": pred.tolist(), "quantum_mean": m[idx].tolist()}
    return out


def scaling_study(cfg: ExperimentConfig, out: Path) -> ScalingReport:
    """Final variances, typical variances and early maxima across sizes."""
    report = ScalingReport()
    for N in cfg.scaling.N_values:
        try:
            preflight(N, cfg.max_memory_gb)
            runs = [r for r in cfg.runs if _admissible(r.X_target, N) and 0 < abs(r.X_target) <= N // 2 - 2]
            if not runs:
                raise SchemaError(f"no run has 0 < |X_target| <= N/2-2 for N={N}", path="runs")
            traces, files = _run_traces(cfg, N, runs, out)
            h = _cached_hamiltonian(N, cfg.couplings.model_dump())
            typ = _typical(cfg, N, h)
            summaries = [_summarize(tr) for tr in traces]
            far = max(summaries, key=lambda s: abs(s["X_target"]))
            em = far["early_maximum"]
            report.add(N, [s["final_variance"] for s in summaries], typ["value"], typ["stderr"],
                       em.get("value"), {"runs": summaries, "files": files, "typical": typ})
        except LadderError as exc:
            log.error("scaling size N=%d failed: %s", N, exc)
            report.errors[int(N)] = str(exc)
    return report.fit()


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> dict:
    """Run one experiment and write its artifacts; returns the report dict."""
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = {}
    kind = cfg.kind
    if kind == "scaling":
        result = scaling_study(cfg, out).to_dict()
    else:
        N = cfg.N
        preflight(N, cfg.max_memory_gb)
        traces, files = _run_traces(cfg, N, cfg.runs, out)
        result["runs"] = [_summarize(tr) for tr in traces]
        result["files"] = files
        h = _cached_hamiltonian(N, cfg.couplings.model_dump())
        if kind == "trace" and cfg.stochastic.fit_gamma:
            model, ref = _gamma_from(traces, N, cfg)
            result["gamma"] = {"value": model.gamma, "fitted_on_X": ref}
            result["model_rms"] = _model_rms(model, traces)
        if kind == "typicality":
            result["typical_variance"] = _typical(cfg, N, h)
            pairs = {}
            for a, b in combinations(traces, 2):
                if a.metadata["recipe"]["X_target"] == b.metadata["recipe"]["X_target"]:
                    diff = np.max(np.abs(np.array(a.mean_x) - np.array(b.mean_x)))
                    pairs[f"{a.metadata['recipe']['X_target']}:r{a.metadata['run_label']}"
                          f"-r{b.metadata['run_label']}"] = float(diff)
            result["max_mean_difference"] = pairs
        if kind in ("transition-matrix", "drift-diffusion"):
            W = measure_transition_matrix(h, cfg.stochastic.tau, cfg.stochastic.seeds_per_column,
                                          cfg.root_seed, cfg.window.sigma_H, cfg.window.E0,
                                          cfg.workers)
            W.to_csv(out / f"wmatrix_N{N}_tau{cfg.stochastic.tau:g}.csv")
            result["transition_matrix"] = W.manifest()
            result["transition_matrix"]["stationary"] = W.stationary().tolist()
            result["markov"] = _markov_check(W, traces, cfg.stochastic.tau)
        if kind == "drift-diffusion":
            model, ref = _gamma_from(traces, N, cfg)
            dq = extract_drift_diffusion(W)
            dm = extract_drift_diffusion(model, cfg.stochastic.tau)
            dq.to_csv(out / f"driftdiff_measured_N{N}.csv")
            dm.to_csv(out / f"driftdiff_spinflip_N{N}.csv")
            result["gamma"] = {"value": model.gamma, "fitted_on_X": ref}
            result["drift_diffusion"] = {
                "x_values": dq.x_values.tolist(),
                "measured": {"f": dq.f.tolist(), "D": dq.D.tolist()},
                "spin_flip": {"f": dm.f.tolist(), "D": dm.D.tolist()},
            }
    report = {"software_version": __version__, "kind": kind,
              "config": json.loads(cfg.model_dump_json()), "results": result}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float))
    return report
