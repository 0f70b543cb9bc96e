"""Experiment configuration, single runs, parameter sweeps and their artifacts."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .circulant import cdla_fit, union_matrix
from .data import (
    SyntheticSpec,
    ecg_segments,
    gen_synthetic,
    image_patches,
    procedural_images,
    remove_dc,
    synthetic_ecg,
)
from .io import load_images, load_signal, read_csv_matrix, read_simx, write_simx
from .metrics import matched_scores, metric_epsilon, metric_utilization
from .sparse import ShiftMask
from .uconv import uconv_fit
from .ucirc import ucdla_block_fit, ucirc_fit
from .wavelet import check_wavelet_config, wdla_fit

__all__ = [
    "ALGORITHMS",
    "DATASETS",
    "ConfigError",
    "ExperimentConfig",
    "RunReport",
    "parse_synthetic",
    "load_dataset",
    "run_experiment",
    "sweep_snr",
    "sweep_sparsity",
    "sweep_support",
    "sweep_timing",
    "write_csv",
]

ALGORITHMS = ("cdla", "ucirc", "ucdla_block", "uconv", "wdla")
DATASETS = ("synthetic", "matrix", "ecg", "ecg_synthetic", "images", "images_procedural")
SNR_LEVELS = (10.0, 15.0, 20.0, 25.0, 30.0, 40.0)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def parse_synthetic(text):
    """``"n=20,N=500,L=10,q=3,s=4,snr=30"`` -> :class:`SyntheticSpec` (``snr=none`` for noiseless)."""
    fields = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"synthetic spec entry {item!r} is not key=value")
        key = key.strip()
        value = value.strip()
        if key in ("n", "N", "L", "s", "q", "seed"):
            fields[key] = int(value)
        elif key in ("snr", "snr_db"):
            fields["snr_db"] = None if value.lower() == "none" else float(value)
        elif key == "noise":
            fields["noise_scope"] = value
        else:
            raise ConfigError(f"unknown synthetic spec key {key!r}")
    try:
        return SyntheticSpec(**fields).validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``dataset`` is one of :data:`DATASETS`; ``source`` holds the synthetic
    spec string, a file path or an image directory depending on the kind.
    """

    algorithm: str
    dataset: str = "synthetic"
    source: str | None = None
    L: int = 1
    s: int = 4
    n: int | None = None
    m: int | None = None
    K: int = 50
    init: str | None = None
    seed: int = 0
    segment: int = 64
    patch: int = 8
    ecg_samples: int = 64 * 1600
    mask_shifts: int | None = None
    threshold: float = 0.99
    early_stop: bool = True
    output_dir: str | None = None

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset kind {self.dataset!r}; choose from {', '.join(DATASETS)}")
        if self.dataset in ("synthetic", "matrix", "ecg", "images") and not self.source:
            raise ConfigError(f"dataset kind {self.dataset!r} needs a source")
        for name in ("L", "s", "K", "segment", "patch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.algorithm == "uconv" and self.n is None:
            raise ConfigError("uconv needs the kernel length n")
        if self.algorithm == "wdla":
            if self.n is None or self.m is None:
                raise ConfigError("wdla needs the filter length n and the stage count m")
            if self.init not in (None, "svd", "haar", "d4", "random"):
                raise ConfigError(f"wdla init must be svd, haar, d4 or random, got {self.init!r}")
        elif self.algorithm in ("cdla", "ucirc", "ucdla_block"):
            if self.init not in (None, "svd", "random"):
                raise ConfigError(f"{self.algorithm} init must be svd or random, got {self.init!r}")
        elif self.init is not None:
            raise ConfigError(f"{self.algorithm} does not take an init option")
        if self.algorithm == "cdla" and self.L != 1:
            raise ConfigError("cdla learns a single circulant; L must be 1")
        if self.dataset == "synthetic":
            parse_synthetic(self.source)
        return self

    def check_data(self, p):
        """Preconditions that depend on the signal length ``p``."""
        if self.s > p:
            raise ConfigError(f"sparsity s={self.s} exceeds the signal length p={p}")
        if self.algorithm == "uconv" and not 1 <= self.n <= p:
            raise ConfigError(f"kernel length n={self.n} must lie in [1, p={p}]")
        if self.algorithm == "wdla":
            try:
                check_wavelet_config(p, self.m, self.n, self.init)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.mask_shifts is not None and not 1 <= self.mask_shifts <= p:
            raise ConfigError(f"mask_shifts must lie in [1, {p}]")


def load_dataset(config):
    """Return ``(Y, truth)`` with ``Y`` column-centered; ``truth`` only for synthetic data."""
    kind = config.dataset
    truth = None
    if kind == "synthetic":
        spec = parse_synthetic(config.source)
        if "seed=" not in config.source:
            spec = SyntheticSpec(**{**asdict(spec), "seed": config.seed})
        Y, truth = gen_synthetic(spec)
    elif kind == "matrix":
        path = Path(config.source)
        with open(path, "rb") as fh:
            head = fh.read(4)
        Y = read_simx(path) if head == b"SIMX" else read_csv_matrix(path)
    elif kind == "ecg":
        Y = ecg_segments(load_signal(config.source), config.segment)
    elif kind == "ecg_synthetic":
        Y = ecg_segments(synthetic_ecg(config.ecg_samples, seed=config.seed), config.segment)
    else:
        images = load_images(config.source) if kind == "images" else procedural_images()
        Y = np.hstack([image_patches(img, config.patch) for img in images])
    return remove_dc(Y)[0], truth


@dataclass
class RunReport:
    """Outcome of one run; ``save`` re-derives the final error before writing."""

    algorithm: str
    seed: int
    config: dict
    objective: list
    dict_before: list
    dict_after: list
    data_energy: float
    epsilon: float
    n_iter: int
    stopped_early: bool
    timings: dict
    events: list
    recovery: float | None = None
    match_scores: list | None = None
    utilization: np.ndarray | None = None
    baseline_epsilon: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def epsilon_trace(self):
        return [100.0 * v / self.data_energy for v in self.objective]

    def summary(self):
        out = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "config": self.config,
            "epsilon_percent": self.epsilon,
            "iterations": self.n_iter,
            "stopped_early": self.stopped_early,
            "dictionary_steps_monotone": all(
                a <= b + 1e-12 * self.data_energy for b, a in zip(self.dict_before, self.dict_after)
            ),
            "timings_seconds": self.timings,
            "events": self.events,
        }
        if self.recovery is not None:
            out["recovery_rate"] = self.recovery
            out["recovery_threshold"] = self.config.get("threshold")
        if self.baseline_epsilon is not None:
            out["baseline_epsilon_percent"] = self.baseline_epsilon
        if self.utilization is not None:
            out["utilization_total"] = int(self.utilization.sum())
        out.update(self.extra)
        return out

    def save(self, out_dir, Y, D, X):
        """Write ``objective.csv``, ``utilization.csv``, ``dictionary.simx`` and ``summary.json``.

        Raises ``ArithmeticError`` if the error recomputed from ``(Y, D, X)``
        differs from the trace tail by more than ``1e-10`` (relative).
        """
        eps = metric_epsilon(Y, D, X)
        if abs(eps - self.epsilon) > 1e-10 * max(1.0, abs(eps)):
            raise ArithmeticError(f"recomputed error {eps!r} disagrees with trace tail {self.epsilon!r}")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, obj in enumerate(self.objective):
            before = self.dict_before[i - 1] if i > 0 else ""
            after = self.dict_after[i - 1] if i > 0 else ""
            rows.append([i, obj, 100.0 * obj / self.data_energy, before, after])
        write_csv(out / "objective.csv", ["iteration", "objective", "epsilon_percent", "dict_before", "dict_after"], rows)
        if self.utilization is not None:
            L, n = self.extra["blocks"], self.extra["atoms_per_block"]
            H = self.utilization.reshape(L, n)
            write_csv(out / "utilization.csv", ["block", "shift", "count"],
                      [[l, q, int(H[l, q])] for l in range(L) for q in range(n)])
        write_simx(out / "dictionary.simx", D)
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _format(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    """RFC-4180 CSV with a header line; floats in shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def _fit(config, Y):
    """Dispatch to the learner; returns ``(D, X_dense, fit_report, model)``."""
    algo = config.algorithm
    p = Y.shape[0]
    mask = None
    if config.mask_shifts is not None and algo != "wdla":
        blocks = config.L
        mask = ShiftMask.first_shifts(p, blocks, config.mask_shifts)
    common = dict(seed=config.seed, early_stop=config.early_stop)
    if algo == "cdla":
        state = cdla_fit(Y, config.s, config.K, mask=mask, init=config.init, **common)
        gens = state.generator[None, :]
        return union_matrix(gens), state.code.toarray(), state.report, gens
    if algo in ("ucirc", "ucdla_block"):
        fit = ucirc_fit if algo == "ucirc" else ucdla_block_fit
        model, code, report = fit(Y, config.L, config.s, config.K, mask=mask, init=config.init, **common)
        return model.matrix(), code.toarray(), report, model.generators
    if algo == "uconv":
        model, code, report = uconv_fit(Y, config.L, config.n, config.s, config.K, mask=mask, **common)
        return model.matrix(), code.toarray(), report, model.kernels
    model, code, report = wdla_fit(Y, config.m, config.n, config.s, config.K,
                                   init=config.init or "svd", **common)
    return model.matrix(), code.toarray(), report, model.params().reshape(model.m, 2 * model.n)


def run_experiment(config, Y=None, truth=None):
    """Validate, load data (unless given), fit and evaluate one configuration.

    Returns ``(RunReport, Y, D, X, params)`` where ``params`` are the learned
    generators, kernels or stacked wavelet filters.
    """
    config.validate()
    if Y is None:
        Y, truth = load_dataset(config)
    config.check_data(Y.shape[0])
    t0 = time.perf_counter()
    D, X, fit, params = _fit(config, Y)
    elapsed = time.perf_counter() - t0
    p = Y.shape[0]
    timings = {**fit.timings, "total": elapsed}
    report = RunReport(
        algorithm=config.algorithm,
        seed=config.seed,
        config=asdict(config),
        objective=list(fit.objective),
        dict_before=list(fit.dict_before),
        dict_after=list(fit.dict_after),
        data_energy=fit.data_energy,
        epsilon=fit.epsilon[-1],
        n_iter=fit.n_iter,
        stopped_early=fit.stopped_early,
        timings=timings,
        events=list(fit.events),
        extra={"signal_length": p, "n_signals": Y.shape[1]},
    )
    if config.algorithm in ("cdla", "ucirc", "ucdla_block", "uconv"):
        blocks = 1 if config.algorithm == "cdla" else config.L
        report.utilization = metric_utilization(X, blocks, p)
        report.extra.update(blocks=blocks, atoms_per_block=p, expected_peak=Y.shape[1] * config.s / blocks)
        if truth is not None and truth.kernels.shape[1] == p and config.algorithm != "uconv":
            scores = matched_scores(params, truth.kernels)
            report.match_scores = scores.tolist()
            report.recovery = float(np.mean(scores >= config.threshold))
            q = int(truth.shifts.max()) + 1
            report.extra["expected_peak"] = Y.shape[1] * config.s / (truth.kernels.shape[0] * q)
    if config.algorithm == "wdla" and config.init in ("haar", "d4"):
        report.baseline_epsilon = fit.epsilon[0]
    return report, Y, D, X, params


def sweep_snr(base, L, s, K, seeds, snrs=SNR_LEVELS, init="random", threshold=0.99, early_stop=False):
    """Recovery and final error of ``ucirc`` and ``ucdla_block`` per (SNR, seed).

    ``base`` is a synthetic spec string without ``snr``.  Returns
    ``(rows, score_rows)``: summary rows and every matched correlation.
    """
    rows, score_rows = [], []
    for snr in snrs:
        label = "none" if snr is None else repr(float(snr))
        for seed in seeds:
            spec = parse_synthetic(f"{base},snr={label},seed={seed}")
            Y, truth = gen_synthetic(spec)
            Y = remove_dc(Y)[0]
            row = [label, seed]
            for algo in ("ucirc", "ucdla_block"):
                cfg = ExperimentConfig(algo, "synthetic", f"{base},snr={label},seed={seed}", L=L, s=s, K=K,
                                       init=init, seed=seed, threshold=threshold, early_stop=early_stop)
                rep = run_experiment(cfg, Y, truth)[0]
                row += [rep.recovery, rep.epsilon]
                score_rows += [[label, seed, algo, i, v] for i, v in enumerate(rep.match_scores)]
            rows.append(row)
    header = ["snr_db", "seed", "recovery_ucirc", "epsilon_ucirc", "recovery_ucdla_block", "epsilon_ucdla_block"]
    return header, rows, ["snr_db", "seed", "algorithm", "kernel", "score"], score_rows


def sweep_sparsity(config, s_values, Y=None):
    """Final error for each sparsity level; for ``wdla`` with a wavelet init the
    fixed-wavelet error is reported alongside."""
    if Y is None:
        config.validate()
        Y, _ = load_dataset(config)
    rows = []
    for s in s_values:
        cfg = ExperimentConfig(**{**asdict(config), "s": s})
        rep = run_experiment(cfg, Y)[0]
        rows.append([s, rep.epsilon, rep.baseline_epsilon, rep.n_iter])
    return ["s", "epsilon", "baseline_epsilon", "iterations"], rows


def sweep_support(config, n_values, m=1, Y=None, with_cdla=True):
    """W-DLA error as the filter length ``n`` varies at fixed ``m`` (random init),
    plus a single-circulant reference row."""
    if Y is None:
        config.validate()
        Y, _ = load_dataset(config)
    rows = []
    for n in n_values:
        cfg = ExperimentConfig(**{**asdict(config), "algorithm": "wdla", "n": n, "m": m, "init": "random"})
        rep = run_experiment(cfg, Y)[0]
        rows.append(["wdla", n, m, 2 * n * m, rep.epsilon])
    if with_cdla:
        cfg = ExperimentConfig(**{**asdict(config), "algorithm": "cdla", "L": 1, "init": None, "n": None, "m": None})
        rep = run_experiment(cfg, Y)[0]
        rows.append(["cdla", "", "", Y.shape[0], rep.epsilon])
    return ["algorithm", "n", "m", "dof", "epsilon"], rows


def sweep_timing(L_values, n=64, N=8192, s=8, K=5, repeats=3, seed=0, true_kernels=16):
    """Wall-clock of ``ucirc`` vs ``ucdla_block`` on the same data.

    Runs are interleaved and the minimum over ``repeats`` is kept for each
    algorithm, which suppresses scheduler noise.
    """
    spec = SyntheticSpec(n=n, N=N, L=max(true_kernels, s), s=s, q=3, snr_db=30.0, seed=seed)
    Y = remove_dc(gen_synthetic(spec)[0])[0]
    ucirc_fit(Y[:, : min(N, 256)], 1, 1, 1)  # warm-up
    rows = []
    for L in L_values:
        best = {"ucirc": np.inf, "ucdla_block": np.inf}
        dict_time = {"ucirc": np.inf, "ucdla_block": np.inf}
        for _ in range(repeats):
            for name, fit in (("ucirc", ucirc_fit), ("ucdla_block", ucdla_block_fit)):
                t0 = time.perf_counter()
                _, _, rep = fit(Y, L, s, K, seed=seed, early_stop=False)
                best[name] = min(best[name], time.perf_counter() - t0)
                dict_time[name] = min(dict_time[name], rep.timings.get("dictionary", 0.0))
        rows.append([L, best["ucirc"], best["ucdla_block"], best["ucirc"] / best["ucdla_block"],
                     dict_time["ucirc"], dict_time["ucdla_block"]])
    header = ["L", "seconds_ucirc", "seconds_ucdla_block", "ratio", "dict_seconds_ucirc", "dict_seconds_ucdla_block"]
    return header, rows
