"""Run a scenario and collect the results as tables.

:func:`run` is what the command line calls: it builds the model, integrates
(or solves for the steady state) and packs time series and per-segment
profiles into an :class:`OutputBundle` that :func:`export` writes to disk.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import CoolerModel
from .scenario import Scenario
from .solver import NOT_SETTLED, SolverError, Trajectory, find_steady_state, integrate, \
    settling_times
from . import thermo
from .thermo import GASES, SOLIDS

KELVIN = 273.15


class RunError(RuntimeError):
    """Solver failure during a run; ``diagnostics`` is JSON-serialisable."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class Table:
    columns: list[str]              # "name[unit]"
    rows: np.ndarray                # (n_rows, n_columns)
    integer_columns: frozenset = frozenset()

    def column(self, name):
        i = [c.split("[")[0] for c in self.columns].index(name)
        return self.rows[:, i]


@dataclass
class OutputBundle:
    scenario: Scenario
    mode: str
    timeseries: Table
    profiles: Table
    meta: dict
    trajectory: Trajectory | None = field(default=None, repr=False)
    model: CoolerModel | None = field(default=None, repr=False)


def _timeseries_table(model: CoolerModel, times, X, Y) -> Table:
    cols = ["time[s]", "cell[-]", "layer[-]", "segment[-]", "T_s[K]", "T_a[K]", "P[Pa]"]
    cols += [f"C_s_{s}[mol/m3]" for s in SOLIDS] + [f"C_a_{s}[mol/m3]" for s in GASES]
    n, nc = len(times), model.ncell
    rows = np.empty((n * nc, len(cols)))
    for i in range(n):
        C_s, C_a, _, _, T_s, T_a, P = model.unpack(X[i], Y[i])
        block = rows[i * nc:(i + 1) * nc]
        block[:, 0] = times[i]
        block[:, 1] = np.arange(nc)
        block[:, 2] = model.layer
        block[:, 3] = model.seg + 1
        block[:, 4], block[:, 5], block[:, 6] = T_s, T_a, P
        block[:, 7:7 + len(SOLIDS)] = C_s
        block[:, 7 + len(SOLIDS):] = C_a
    return Table(cols, rows, frozenset({"cell[-]", "layer[-]", "segment[-]"}))


def _profile_table(model: CoolerModel, x, y) -> Table:
    pr = model.segment_profiles(x, y)
    cols = ["segment[-]", "z[m]", "T_s[K]", "T_a[K]", "P[Pa]", "T_a_bed[K]",
            "T_out_last[K]", "T_out_extrapolated[K]"]
    cols += [f"mdot_{s}[kg/s]" for s in SOLIDS]
    cols += [f"C_s_{s}[mol/m3]" for s in SOLIDS]
    nv = model.n_seg
    rows = np.empty((nv, len(cols)))
    rows[:, 0] = np.arange(1, nv + 1)
    rows[:, 1] = pr["z"]
    rows[:, 2] = pr["T_s"]
    rows[:, 3] = pr["T_a"]
    rows[:, 4] = pr["P"]
    rows[:, 5] = pr["T_a_bed"]
    rows[:, 6] = pr["T_out_last"]
    rows[:, 7] = pr["T_out_extrapolated"]
    rows[:, 8:8 + len(SOLIDS)] = pr["mass_flow"]
    rows[:, 8 + len(SOLIDS):] = pr["C_s"]
    return Table(cols, rows, frozenset({"segment[-]"}))


def segment_signals(model: CoolerModel, X, Y):
    """Per-sample, per-segment signals used for settling analysis.

    Returns ``(values, floors)`` shaped ``(n_samples, n_segments, n_signals)``
    and ``(n_segments, n_signals)``: bed solid and reported gas temperature in
    degC, then the bed solid concentrations. A concentration's band floor is the
    segment's final total clinker concentration, so trace species do not set
    the settling time on their own.
    """
    vals = []
    for x, y in zip(X, Y):
        pr = model.segment_profiles(x, y)
        vals.append(np.column_stack([pr["T_s"] - KELVIN, pr["T_a"] - KELVIN, pr["C_s"]]))
    V = np.array(vals)
    floors = np.zeros(V.shape[1:])
    floors[:, 2:] = V[-1, :, 2:].sum(axis=-1, keepdims=True)
    return V, floors


def settling_report(model: CoolerModel, traj: Trajectory, threshold=0.01) -> dict:
    """Settling time of every segment and of the whole cooler (seconds)."""
    V, floors = segment_signals(model, traj.x, traj.y)
    n = V.shape[1]
    flat = V.reshape(len(traj.times), -1)
    k = V.shape[2]
    groups = [np.arange(j * k, (j + 1) * k) for j in range(n)]
    per_seg = settling_times(traj.times, flat, threshold, floors.ravel(), groups)
    return {"segments": per_seg, "whole": max(per_seg), "threshold": threshold}


def run(scenario: Scenario, mode: str = "dynamic", t_end=None, dt=None,
        observers=()) -> OutputBundle:
    """Simulate ``scenario`` and return the result tables.

    ``dynamic`` integrates from the scenario's initial state to ``t_end``.
    ``steady`` integrates the same horizon as a warm start and then solves
    ``f = 0, g = 0``; its profile table holds the steady solution.
    """
    if mode not in ("dynamic", "steady"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = scenario.integrator
    if t_end is not None:
        cfg = replace(cfg, t_end=float(t_end))
    if dt is not None:
        cfg = replace(cfg, dt=float(dt))
    cfg.check()
    model = CoolerModel(scenario)
    thermo.reset_range_warnings()
    x0, y0 = model.initial_state()
    last = {}

    def remember(t, x, y):
        last.update(t=t, x=x, y=y)
        model.check_property_ranges(x, y)

    started = time.perf_counter()
    try:
        traj = integrate(x0, y0, model, cfg,
                         sample_interval=scenario.output.sample_interval_s,
                         observers=(remember,) + tuple(observers))
    except SolverError as exc:
        diag = {"error": str(exc), "type": type(exc).__name__, "phase": "integrate"}
        if last:
            pr = model.segment_profiles(last["x"], last["y"])
            diag.update(last_sample_time_s=last["t"], T_s_K=pr["T_s"].tolist(),
                        T_a_K=pr["T_a"].tolist(), P_Pa=pr["P"].tolist())
        raise RunError(str(exc), diag) from exc
    meta = {
        "scenario": scenario.name,
        "scenario_digest": scenario.digest(),
        "mode": mode,
        "t_end_s": cfg.t_end,
        "dt_s": cfg.dt,
        "samples": len(traj.times),
        "cells": model.ncell,
        "solver_stats": traj.stats,
    }
    x_end, y_end = traj.x[-1], traj.y[-1]
    if mode == "steady":
        try:
            x_end, y_end, info = find_steady_state(x_end, y_end, model, cfg)
        except SolverError as exc:
            raise RunError(str(exc), {"error": str(exc), "type": type(exc).__name__,
                                      "phase": "steady"}) from exc
        meta["steady"] = {"method": info["method"], "iterations": info["iterations"],
                          "residual": float(info["history"][-1])}
    elif len(traj.times) > 2:
        rep = settling_report(model, traj)
        meta["settling_s"] = {"segments": [None if s == NOT_SETTLED else s
                                           for s in rep["segments"]],
                              "whole": None if rep["whole"] == NOT_SETTLED else rep["whole"],
                              "threshold": rep["threshold"]}
    meta["wall_time_s"] = round(time.perf_counter() - started, 3)
    return OutputBundle(scenario, mode, _timeseries_table(model, traj.times, traj.x, traj.y),
                        _profile_table(model, x_end, y_end), meta, traj, model)


# export ----------------------------------------------------------------------------

def _format(v, integer):
    if integer:
        return str(int(v))
    return format(float(v), ".17g")


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    flags = [c in table.integer_columns for c in table.columns]
    for row in table.rows:
        w.writerow([_format(v, f) for v, f in zip(row, flags)])
    return buf.getvalue()


def read_csv_table(path) -> Table:
    """Parse a CSV written by :func:`export` back into a :class:`Table`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    return Table(cols, arr)


def export(bundle: OutputBundle, directory) -> list[Path]:
    """Write ``timeseries.csv``, ``steady_profiles.csv`` and ``run_meta.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {
        "timeseries.csv": table_to_csv(bundle.timeseries),
        "steady_profiles.csv": table_to_csv(bundle.profiles),
        "run_meta.json": json.dumps({**bundle.meta, "scenario_data": bundle.scenario.to_dict()},
                                    indent=2, sort_keys=True, default=float) + "\n",
    }
    written = []
    for name, text in files.items():
        path = d / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    return written
