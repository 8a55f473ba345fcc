"""CSV intake for the delimited diagnostics schema.

The renderer sees nothing but rows of run_id,t,metric,params,value;
anything malformed is rejected here, before a figure exists, so error
paths never leave an image file behind.
"""

import csv
from dataclasses import dataclass

CSV_HEADER = ("run_id", "t", "metric", "params", "value")


class PlotDataError(ValueError):
    """Base for rejected input; rendering writes nothing on these."""


class SchemaError(PlotDataError):
    """Header or row does not match the delimited schema."""


class EmptyDataError(PlotDataError):
    """No data rows behind the header."""


class MissingMetricError(PlotDataError):
    """A requested metric name does not occur in the data."""

    def __init__(self, missing, available):
        self.missing = tuple(missing)
        self.available = tuple(available)
        super().__init__(
            f"metrics not in data: {', '.join(self.missing)} "
            f"(available: {', '.join(self.available) or 'none'})")


@dataclass(frozen=True)
class Row:
    run_id: str
    t: float
    metric: str
    params: str
    value: float


def load_rows(paths) -> list[Row]:
    """Read one or more schema CSVs into a flat row list, in file order."""
    rows: list[Row] = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_HEADER:
                raise SchemaError(
                    f"{path}: expected header {','.join(CSV_HEADER)}")
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(CSV_HEADER):
                    raise SchemaError(
                        f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, "
                        f"got {len(rec)}")
                run_id, t, metric, params, value = rec
                try:
                    rows.append(Row(run_id, float(t), metric, params,
                                    float(value)))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: t and value must be numbers") \
                        from None
    if not rows:
        raise EmptyDataError(
            "no data rows in " + ", ".join(str(p) for p in paths))
    return rows


def metric_order(rows) -> tuple[str, ...]:
    """Distinct metric names in first-appearance order."""
    seen: dict[str, None] = {}
    for r in rows:
        seen.setdefault(r.metric, None)
    return tuple(seen)


def select(rows, metrics) -> list[Row]:
    """Keep only the named metrics; unknown names fail loudly."""
    available = metric_order(rows)
    missing = [m for m in metrics if m not in available]
    if missing:
        raise MissingMetricError(missing, available)
    wanted = set(metrics)
    return [r for r in rows if r.metric in wanted]
