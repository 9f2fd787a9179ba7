"""Monte-Carlo sweeps, CSV output and figures.

Each trial ``k`` draws its channels from ``trial_seed(base_seed, k)``, so every
scheme and every swept value sees the same channel realization for a given
trial index (common random numbers). The worker count comes from the
``STARCOVERT_WORKERS`` environment variable (default 1, in-process).

When both schemes run, each trial is solved as a pair. The baseline's
element assignment is a feasible STAR point, so if the STAR run from its own
start ends below the baseline (or fails where the baseline converged), it is
re-run from the baseline's solution; the alternation is monotone, so that run
ends at least as high. ``warm_starts`` counts these re-runs per cell.
Set ``SweepSpec.paired=False`` to solve the schemes independently.

CSV columns, in order:

    scheme, param, value, trials, converged, failures, infeasible,
    mean_rate, stderr, outage_mean_rate, mean_outer_iterations,
    warm_starts, note [, wall_time]

``mean_rate`` and ``stderr`` use converged trials only and are ``nan`` when
none converged (``note`` then says so). ``failures`` counts every
non-converged trial; ``infeasible`` is the subset whose constraints admit no
point at all. ``outage_mean_rate`` scores those as rate 0 and still leaves
solver failures out. ``wall_time`` (seconds per cell) is written only on
request because it breaks byte-level reproducibility.
"""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .optimizer import CONVERGED, INFEASIBLE_INSTANCE, AlgorithmConfig, optimize
from .system_model import (NoiseModel, SystemParams, convert_db, default_noise, default_system,
                           sample_channels, trial_seed)

SWEEP_PARAMS = ("P_tmax_dbm", "epsilon", "M")
SCHEMES = ("star", "baseline-ris")
_STRUCTURE = {"star": "star", "baseline-ris": "dual_ris"}
WORKERS_ENV = "STARCOVERT_WORKERS"

CSV_COLUMNS = ("scheme", "param", "value", "trials", "converged", "failures", "infeasible",
               "mean_rate", "stderr", "outage_mean_rate", "mean_outer_iterations", "warm_starts", "note")


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    overrides: dict = field(default_factory=dict)
    trials: int = 100
    base_seed: int = 0
    schemes: tuple = SCHEMES
    system: SystemParams | None = None
    noise: NoiseModel | None = None
    config: AlgorithmConfig | None = None
    paired: bool = True

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise InvalidParameterError(f"swept parameter must be one of {SWEEP_PARAMS}, got {self.param!r}")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.values:
            raise InvalidParameterError("value list is empty")
        if self.trials < 1:
            raise InvalidParameterError(f"trial count must be >= 1, got {self.trials}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise InvalidParameterError(f"schemes must be a non-empty subset of {SCHEMES}, got {self.schemes}")

    def cell_system(self, value) -> SystemParams:
        base = self.system or default_system()
        base = replace(base, **self.overrides) if self.overrides else base
        if self.param == "P_tmax_dbm":
            return replace(base, max_transmit_power=convert_db(float(value), "dBm"))
        if self.param == "epsilon":
            return replace(base, covertness_level=float(value))
        m = int(value)
        if m != value:
            raise InvalidParameterError(f"element count must be an integer, got {value}")
        return replace(base, element_count=m)


@dataclass(frozen=True)
class TrialResult:
    scheme: str
    value: float
    trial: int
    status: str
    rate: float
    outer_iterations: int
    wall_time: float
    warm_started: bool = False


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    param: str
    value: float
    trials: int
    converged: int
    failures: int
    infeasible: int
    mean_rate: float
    stderr: float
    outage_mean_rate: float
    mean_outer_iterations: float
    warm_starts: int = 0
    note: str = ""
    wall_time: float = math.nan

    def __post_init__(self):
        if not 0 <= self.infeasible <= self.failures <= self.trials:
            raise InvalidParameterError("need 0 <= infeasible <= failures <= trials")
        if not 0 <= self.warm_starts <= self.trials:
            raise InvalidParameterError("need 0 <= warm_starts <= trials")


def _solve(spec, scheme, value, k, ch, init=None):
    params = spec.cell_system(value)
    t0 = time.perf_counter()
    sol = optimize(ch, params, spec.noise or default_noise(), spec.config,
                   structure=_STRUCTURE[scheme], seed=k, init=init)
    res = TrialResult(scheme, float(value), k, sol.status, float(sol.covert_rate),
                      sol.outer_iterations, time.perf_counter() - t0, init is not None)
    return sol, res


def _run_one(task):
    spec, schemes, value, k = task
    ch = sample_channels(spec.cell_system(value), trial_seed(spec.base_seed, k))
    if not (spec.paired and len(schemes) == 2):
        return [_solve(spec, s, value, k, ch)[1] for s in schemes]
    base_sol, base = _solve(spec, "baseline-ris", value, k, ch)
    _, star = _solve(spec, "star", value, k, ch)
    slack = (spec.config or AlgorithmConfig()).monotone_slack
    if base.status == CONVERGED and (star.status != CONVERGED or star.rate < base.rate - slack):
        _, again = _solve(spec, "star", value, k, ch, init=base_sol.beamformer)
        star = replace(again, wall_time=again.wall_time + star.wall_time)
    return [star, base] if schemes[0] == "star" else [base, star]


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def run_trials(spec: SweepSpec, workers: int | None = None) -> list[TrialResult]:
    """Every (scheme, value, trial) run, in sweep order."""
    if spec.param == "M" and "baseline-ris" in spec.schemes:
        odd = [v for v in spec.values if int(v) % 2]
        if odd:
            raise InvalidParameterError(f"baseline needs even element counts, got {odd}")
    tasks = [(spec, spec.schemes, v, k) for v in spec.values for k in range(spec.trials)]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        done = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    flat = {(r.scheme, r.value, r.trial): r for pair in done for r in pair}
    return [flat[(s, float(v), k)] for s in spec.schemes for v in spec.values for k in range(spec.trials)]


def aggregate(spec: SweepSpec, results: list[TrialResult]) -> list[ResultRow]:
    rows = []
    for s in spec.schemes:
        for v in spec.values:
            cell = [r for r in results if r.scheme == s and r.value == float(v)]
            ok = [r for r in cell if r.status == CONVERGED]
            infeasible = sum(r.status == INFEASIBLE_INSTANCE for r in cell)
            rates = np.array([r.rate for r in ok])
            if ok:
                mean = float(rates.mean())
                se = float(rates.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0
                iters = float(np.mean([r.outer_iterations for r in ok]))
                note = ""
            else:
                mean = se = iters = math.nan
                note = "no converged trials"
            scored = len(ok) + infeasible
            outage = float(rates.sum() / scored) if scored else math.nan
            rows.append(ResultRow(s, spec.param, float(v), len(cell), len(ok), len(cell) - len(ok),
                                  infeasible, mean, se, outage, iters,
                                  sum(r.warm_started for r in cell), note,
                                  float(sum(r.wall_time for r in cell))))
    return rows


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[ResultRow]:
    return aggregate(spec, run_trials(spec, workers))


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".9g")


def csv_text(rows, timing: bool = False) -> str:
    cols = CSV_COLUMNS + (("wall_time",) if timing else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def emit_csv(rows, path, timing: bool = False) -> Path:
    path = Path(path)
    try:
        path.write_bytes(csv_text(rows, timing).encode())
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def read_csv(path) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                t = types[k]
                kw[k] = v if t == "str" else int(v) if t == "int" else float(v)
            out.append(ResultRow(**kw))
    return out


_AXIS_LABEL = {"P_tmax_dbm": "max transmit power (dBm)", "epsilon": "covertness level epsilon",
               "M": "number of elements M"}


def emit_plot(rows, path, outage: bool = False) -> Path:
    """Mean covert rate per scheme against the swept value, with standard-error bars.

    ``outage=True`` plots the outage-inclusive mean instead (no error bars).
    The format follows the file suffix (png, svg, pdf); metadata that would
    embed a timestamp is cleared so identical rows give identical bytes.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = list(rows)
    params = {r.param for r in rows}
    if len(params) > 1:
        raise InvalidParameterError(f"rows mix swept parameters {sorted(params)}")
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "png"
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in dict.fromkeys(r.scheme for r in rows):
        sr = sorted((r for r in rows if r.scheme == scheme), key=lambda r: r.value)
        x = [r.value for r in sr]
        if outage:
            ax.plot(x, [r.outage_mean_rate for r in sr], marker="o", label=scheme)
        else:
            ax.errorbar(x, [r.mean_rate for r in sr], yerr=[r.stderr for r in sr],
                        marker="o", capsize=3, label=scheme)
    if rows:
        ax.set_xlabel(_AXIS_LABEL.get(rows[0].param, rows[0].param))
    ax.set_ylabel("average covert rate (bit/s/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    meta = {"png": {"Software": None}, "svg": {"Date": None}, "pdf": {"CreationDate": None, "ModDate": None}}
    extra = {"metadata": meta[fmt]} if fmt in meta else {}
    if fmt == "svg":
        matplotlib.rcParams["svg.hashsalt"] = "starcovert"
    try:
        fig.savefig(path, format=fmt, **extra)
    except OSError as exc:
        raise OSError(f"cannot write plot to {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path
