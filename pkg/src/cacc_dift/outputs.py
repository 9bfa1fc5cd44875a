"""CSV artifact writers. Floats are written with 9 significant digits."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .sim import Comparison, RunMetrics, RunTrace

TRACE_COLUMNS = ("step", "vehicle", "position", "velocity", "u", "e", "mode", "alpha", "beta")
METRICS_COLUMNS = ("vehicle", "max_abs_e", "std_e", "std_speed_err", "std_speed")
COMPARE_COLUMNS = ("vehicle", "scheme", "max_abs_e", "std_e", "std_speed_err", "std_speed")
RATIO_COLUMNS = ("vehicle", "ratio_max_abs_e", "ratio_std_e", "ratio_std_speed_err", "ratio_std_speed")
STABILITY_COLUMNS = ("mode", "omega_k", "h_d", "hinf_norm", "argmax_omega", "closed_form_stable", "sweep_stable")


class OutputExistsError(FileExistsError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def check_writable(paths: Iterable[Path], force: bool) -> None:
    if force:
        return
    existing = [str(p) for p in paths if p.exists()]
    if existing:
        raise OutputExistsError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_trace(path: Path, trace: RunTrace) -> None:
    write_rows(path, TRACE_COLUMNS, trace.rows())


def write_metrics(path: Path, metrics: RunMetrics) -> None:
    rows = (
        (i + 1, metrics.max_abs_e[i], metrics.std_e[i], metrics.std_speed_err[i], metrics.std_speed[i])
        for i in range(metrics.n_followers)
    )
    write_rows(path, METRICS_COLUMNS, rows)


def write_comparison(path: Path, ratio_path: Path, comp: Comparison) -> None:
    n = len(comp.means["DIFT"]["std_e"])
    rows = []
    for i in range(n):
        for scheme in ("DIFT", "FIFT"):
            m = comp.means[scheme]
            rows.append((i + 1, scheme, m["max_abs_e"][i], m["std_e"][i], m["std_speed_err"][i], m["std_speed"][i]))
    write_rows(path, COMPARE_COLUMNS, rows)
    ratios = [comp.ratio(k) for k in ("max_abs_e", "std_e", "std_speed_err", "std_speed")]
    write_rows(ratio_path, RATIO_COLUMNS, ((i + 1, *(r[i] for r in ratios)) for i in range(n)))
