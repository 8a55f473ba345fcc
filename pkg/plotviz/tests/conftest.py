import csv

import pytest

HEADER = ["run_id", "t", "metric", "params", "value"]


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerows(rows)
    return str(path)


@pytest.fixture
def sweep_csv(tmp_path):
    # exact power law value = t^0.5 over five geometric points
    rows = []
    for i in range(5):
        t = 0.5 ** i
        rows.append([f"run{i}", f"{t:.17g}", "d3_hneg", f"eps={t:g}",
                     f"{t ** 0.5:.17g}"])
        rows.append([f"run{i}", f"{t:.17g}", "flat", f"eps={t:g}", "2.0"])
    return write_csv(tmp_path / "sweep.csv", rows)


@pytest.fixture
def series_csv(tmp_path):
    rows = []
    for i in range(6):
        t = 0.1 * i
        rows.append(["runA", f"{t:g}", "energy", "", f"{2.0 - t:g}"])
        rows.append(["runA", f"{t:g}", "M", "", f"{0.5 * t:g}"])
    return write_csv(tmp_path / "series.csv", rows)


_CRITERION_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    def record(line: str):
        _CRITERION_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
