"""The three figure kinds behind one request type.

Style is pinned by STYLE/STYLE_VERSION: the same CSV must render to a
byte-identical image, because figures double as regression artifacts.
"""

from dataclasses import dataclass

import numpy as np

from .data import PlotDataError, load_rows, metric_order, select

KINDS = ("timeseries", "loglog_sweep", "scatter")

# bump STYLE_VERSION whenever STYLE changes; frozen-figure comparisons
# are only valid within one version
STYLE_VERSION = 1
STYLE = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "lines.linewidth": 1.4,
    "lines.markersize": 4.5,
    "legend.fontsize": 8,
}


@dataclass(frozen=True)
class PlotRequest:
    csv_paths: tuple
    kind: str
    out: str
    metrics: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotDataError(
                f"unknown plot kind {self.kind!r} (kinds: {', '.join(KINDS)})")
        if not self.csv_paths:
            raise PlotDataError("no csv paths given")


def _pyplot():
    # file-only renderer: force a non-interactive backend before pyplot
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def fit_slope(x, y) -> tuple[float, float]:
    """Log-log least-squares slope and its standard error."""
    coef, cov = np.polyfit(np.log(x), np.log(y), 1, cov=True)
    return float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0)))


def _run_ids(rows) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for r in rows:
        seen.setdefault(r.run_id, None)
    return tuple(seen)


def _param_name(rows) -> str:
    keys = {r.params.split("=", 1)[0] for r in rows if "=" in r.params}
    return keys.pop() if len(keys) == 1 else "parameter"


def _timeseries(plt, rows, wanted):
    multi_run = len(_run_ids(rows)) > 1
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r.run_id, r.metric, r.params), []).append(r)
    fig, ax = plt.subplots()
    for (run_id, metric, params), grp in groups.items():
        grp = sorted(grp, key=lambda r: r.t)
        label = metric
        if params:
            label += f" ({params})"
        if multi_run:
            label += f" [{run_id}]"
        ax.plot([r.t for r in grp], [r.value for r in grp], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title(", ".join(_run_ids(rows)))
    ax.legend()
    return fig


def _loglog_sweep(plt, rows, wanted):
    per_metric: dict[str, list] = {}
    for r in rows:
        per_metric.setdefault(r.metric, []).append(r)
    fig, ax = plt.subplots()
    for metric, grp in per_metric.items():
        grp = sorted(grp, key=lambda r: r.t)
        x = np.array([r.t for r in grp])
        y = np.array([r.value for r in grp])
        if np.any(x <= 0) or np.any(y <= 0):
            raise PlotDataError(
                f"metric {metric!r} has nonpositive entries; log-log axes "
                "need positive data")
        label = metric
        if len(x) >= 4:
            slope, err = fit_slope(x, y)
            label += f" (slope {slope:+.3f} +/- {err:.3f})"
        ax.loglog(x, y, marker="o", label=label)
    ax.set_xlabel(_param_name(rows))
    ax.set_ylabel("value")
    ax.set_title(", ".join(_run_ids(rows)[:4]))
    ax.legend()
    return fig


def _scatter(plt, rows, wanted):
    # axis order follows the request when given, file order otherwise
    metrics = wanted if wanted else metric_order(rows)
    if len(metrics) != 2:
        raise PlotDataError(
            "scatter pairs exactly two metrics; select two with the metric "
            f"list (available: {', '.join(metric_order(rows))})")
    mx, my = metrics
    xs = {(r.run_id, r.t, r.params): r.value for r in rows if r.metric == mx}
    ys = {(r.run_id, r.t, r.params): r.value for r in rows if r.metric == my}
    keys = [k for k in xs if k in ys]
    if not keys:
        raise PlotDataError(
            f"no samples where {mx!r} and {my!r} share run, time, and params")
    fig, ax = plt.subplots()
    ax.scatter([xs[k] for k in keys], [ys[k] for k in keys])
    ax.set_xlabel(mx)
    ax.set_ylabel(my)
    ax.set_title(", ".join(_run_ids(rows)[:4]))
    return fig


_BUILDERS = {
    "timeseries": _timeseries,
    "loglog_sweep": _loglog_sweep,
    "scatter": _scatter,
}


def figure_for(request: PlotRequest):
    """Build the figure without writing it; raises before any output."""
    rows = load_rows(request.csv_paths)
    wanted = tuple(request.metrics) if request.metrics else None
    if wanted:
        rows = select(rows, wanted)
    plt = _pyplot()
    with plt.rc_context(STYLE):
        return _BUILDERS[request.kind](plt, rows, wanted)


def render(request: PlotRequest) -> str:
    """Render the request to its image path and return that path."""
    fig = figure_for(request)
    plt = _pyplot()
    try:
        with plt.rc_context(STYLE):
            fig.savefig(request.out)
    finally:
        plt.close(fig)
    return request.out
