"""Command line driver: data generation, simulation, sweeps, norms,
self-verification.

All artifacts land under the output directory with a manifest recording
path, size and content hash, so bit-identical reruns are checkable.
Reports that accompany a time-series CSV also render overview figures
next to it.

Exit codes: 0 success; 2 configuration or request error; 3 solver
blow-up; 4 verification failure.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys

import click
import numpy as np

from .bands import CutoffPair
from .config import ConfigError, ExperimentConfig, load_config
from .diagnostics import (
    DiagnosticsLedger,
    LedgerSampler,
    blowup_monitors,
    energy_report,
    gronwall_ledger,
    kz_q_for_p,
    largeness_report,
    mn_budget,
    write_runs_csv,
)
from .families import FamilyError, bar_u0, generate as generate_data, tilde_u0
from .fieldio import FieldIOError, load_fields, save_vector_fields, write_metadata
from .field import VectorField
from .grid import set_fft_workers
from .norms import (
    NormError,
    aniso_besov,
    aniso_sobolev,
    bneg1_inf,
    horizontal_l1,
    mixed_lp_h_lr_v,
)
from .profiles import ProfileError
from .smallness import smallness_report
from .stepping import initial_state, run_coupled
from .verify import SUITES, run_verify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

_REQUEST_ERRORS = (ConfigError, FamilyError, ProfileError, FieldIOError,
                   NormError, ValueError)


class Manifest:
    """Records every artifact a command writes."""

    def __init__(self, outdir: str, command: str):
        self.outdir = outdir
        self.command = command
        self.entries = []

    def add(self, relpath: str, role: str):
        full = os.path.join(self.outdir, relpath)
        digest = hashlib.sha256()
        with open(full, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
        self.entries.append({
            "path": relpath,
            "role": role,
            "bytes": os.path.getsize(full),
            "sha256": digest.hexdigest(),
        })

    def write(self):
        doc = {"command": self.command, "artifacts": self.entries}
        with open(os.path.join(self.outdir, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(outdir: str, manifest: Manifest, name: str, doc, role: str):
    with open(os.path.join(outdir, name), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    manifest.add(name, role)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _echo_config(cfg: ExperimentConfig, outdir: str, manifest: Manifest,
                 seed: int):
    doc = cfg.resolved()
    doc["seed"] = seed
    _write_json(outdir, manifest, "config.resolved.json", doc, "resolved config")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _run_id(cfg: ExperimentConfig) -> str:
    bits = [cfg.data.family]
    for key in sorted(cfg.data.params):
        val = cfg.data.params[key]
        if isinstance(val, (int, float)):
            bits.append(f"{key}{val:g}")
    if cfg.data.amplitude != 1.0:
        bits.append(f"a{cfg.data.amplitude:g}")
    bits.append("n" + "x".join(str(n) for n in cfg.grid.resolution))
    return "-".join(bits)


def _apply_threads(threads: int | None):
    # the environment variable wins so batch schedulers can pin the
    # count without editing call sites
    env = os.environ.get("ANISOLAB_THREADS")
    if env:
        set_fft_workers(int(env))
    elif threads is not None:
        set_fft_workers(threads)


@click.group()
@click.option("--threads", type=int, default=None,
              help="FFT worker threads (ANISOLAB_THREADS overrides).")
def main(threads):
    """Anisotropic pseudo-spectral laboratory."""
    try:
        _apply_threads(threads)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))


# ---------------------------------------------------------------------------
# norms

_NORM_ARITY = {"l2": 0, "sobolev": 2, "hbesov": 1, "besov": 4, "bneg1": 0,
               "mixed": 2}


def _parse_norm_spec(spec: str):
    parts = spec.split(":")
    name, args = parts[0], parts[1:]
    if name not in _NORM_ARITY:
        raise ValueError(
            f"unknown norm {name!r}; choose from {sorted(_NORM_ARITY)}")
    if len(args) != _NORM_ARITY[name]:
        raise ValueError(
            f"norm {name!r} takes {_NORM_ARITY[name]} arguments, "
            f"got {len(args)}")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise ValueError(f"norm {spec!r}: arguments must be numbers") from None
    return name, vals


def _eval_norm(name: str, vals, field) -> float:
    if name == "l2":
        return field.l2()
    if name == "sobolev":
        return aniso_sobolev(field, vals[0], vals[1], name="field")
    if name == "hbesov":
        return horizontal_l1(field, vals[0])
    if name == "besov":
        return aniso_besov(field, vals[0], vals[1], vals[2], vals[3])
    if name == "bneg1":
        return bneg1_inf(field)
    if name == "mixed":
        return mixed_lp_h_lr_v(field, vals[0], vals[1])
    raise AssertionError(name)


@main.command("norms")
@click.argument("field_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--norms", "specs", default="",
              help="Comma list like l2,sobolev:-0.5:0,hbesov:0.5,"
                   "besov:0:0.5:2:1,bneg1,mixed:2.5:2.5")
@click.option("--out", default=".", help="Output directory.")
def cmd_norms(field_file, specs, out):
    """Evaluate norms of every field stored in FIELD_FILE."""
    outdir = _ensure_outdir(out)
    manifest = Manifest(outdir, "norms")
    try:
        _, fields = load_fields(field_file)
        wanted = [
            _parse_norm_spec(s.strip())
            for s in specs.split(",") if s.strip()
        ]
        run_id = os.path.splitext(os.path.basename(field_file))[0]
        led = DiagnosticsLedger(run_id)
        for fname, field in fields.items():
            for name, vals in wanted:
                params = ",".join(
                    [f"field={fname}"] + [f"{v:g}" for v in vals])
                led.record(0.0, name, _eval_norm(name, vals, field),
                           params=params)
        path = os.path.join(outdir, "norms.csv")
        write_runs_csv(path, [led])
        manifest.add("norms.csv", "norm values")
        manifest.write()
    except _REQUEST_ERRORS as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(f"wrote {len(fields) * len(wanted)} rows to {outdir}/norms.csv")


# ---------------------------------------------------------------------------
# generate

@main.command("generate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", default=None, help="Output directory (default: config).")
@click.option("--seed", type=int, default=0)
def cmd_generate(config_path, out, seed):
    """Build the configured initial data and its auxiliary split."""
    try:
        cfg = load_config(config_path)
        outdir = _ensure_outdir(out or cfg.output.directory)
        manifest = Manifest(outdir, "generate")
        _echo_config(cfg, outdir, manifest, seed)
        grid = cfg.make_grid()
        fam = cfg.family()
        if fam is None:
            from .stepping import zero_vector
            u0 = zero_vector(grid)
        else:
            u0 = generate_data(fam, grid)
        u0h = VectorField(u0.components[:2])
        ubar0 = bar_u0(u0h)
        utilde0 = tilde_u0(u0)
        for fname, label, vf in (("u0.fld", "u", u0),
                                 ("ubar0.fld", "ubar", ubar0),
                                 ("utilde0.fld", "utilde", utilde0)):
            save_vector_fields(os.path.join(outdir, fname), {label: vf})
            manifest.add(fname, f"initial data {label}")
        try:
            rep = smallness_report(u0, delta=cfg.diagnostics.delta,
                                   c=cfg.diagnostics.c,
                                   c_delta=cfg.diagnostics.c_delta)
            doc = dataclasses.asdict(rep)
        except NormError as exc:
            doc = {"error": str(exc)}
        doc["largeness"] = largeness_report(u0, delta=cfg.diagnostics.delta)
        _write_json(outdir, manifest, "smallness.json", doc,
                    "data-size functionals")
        manifest.write()
    except _REQUEST_ERRORS as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(f"wrote u0/ubar0/utilde0 and smallness.json to {outdir}")


# ---------------------------------------------------------------------------
# simulate

def _state_files(st) -> dict:
    return {"u": st.u, "ubar": st.ubar_h, "utilde": st.utilde, "v": st.v}


class _FilteredLedger:
    """Read-only view of a ledger restricted to chosen metrics."""

    def __init__(self, ledger: DiagnosticsLedger, metrics):
        self._ledger = ledger
        self._metrics = set(metrics)

    def rows(self):
        for row in self._ledger.rows():
            if row[2] in self._metrics:
                yield row


def _render_simulation_figures(outdir, manifest, ledger):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t, e = ledger.series("energy")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, e, label="kinetic energy")
    try:
        # absent when the run died before a second sample
        _, d = ledger.series("dissipation_cum")
    except KeyError:
        d = None
    if d is not None:
        ax.plot(t, e[0] - np.asarray(d), "--", label="initial minus dissipated")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "energy.png"), dpi=150)
    plt.close(fig)
    manifest.add("energy.png", "energy balance figure")

    t, m = ledger.series("M")
    _, n = ledger.series("N")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, m, label="remainder size M")
    ax.plot(t, n, label="remainder dissipation N")
    if max(np.max(m), np.max(n)) > 0:
        ax.set_yscale("log")
        floor = 1e-20
        ax.set_ylim(bottom=max(floor, min(
            np.min(m[m > 0], initial=1.0), np.min(n[n > 0], initial=1.0)) / 10))
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "remainder.png"), dpi=150)
    plt.close(fig)
    manifest.add("remainder.png", "remainder norms figure")


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", default=None, help="Output directory (default: config).")
@click.option("--seed", type=int, default=0)
def cmd_simulate(config_path, out, seed):
    """March all four systems and write the diagnostics ledger."""
    try:
        cfg = load_config(config_path)
        outdir = _ensure_outdir(out or cfg.output.directory)
        manifest = Manifest(outdir, "simulate")
        _echo_config(cfg, outdir, manifest, seed)
        grid = cfg.make_grid()
        fam = cfg.family()
        if fam is None:
            from .stepping import zero_vector
            u0 = zero_vector(grid)
        else:
            u0 = generate_data(fam, grid)
        state = initial_state(u0)
        diag = cfg.diagnostics
        ledger = DiagnosticsLedger(_run_id(cfg))
        sampler = LedgerSampler(
            ledger,
            heavy_stride=diag.heavy_stride,
            kz_exponents=(diag.kz_p, kz_q_for_p(diag.kz_p)),
            dyadic_exponent=diag.dyadic_exponent,
        )
    except _REQUEST_ERRORS as exc:
        _fail(EXIT_CONFIG, str(exc))

    stride = diag.stride
    ck_stride = cfg.output.checkpoint_stride
    count = 0
    sampled_last = True

    def observer(st):
        nonlocal count, sampled_last
        count += 1
        sampled_last = count % stride == 0
        if sampled_last:
            sampler(st)
        if ck_stride and count % ck_stride == 0:
            name = f"state_{count:06d}.fld"
            save_vector_fields(os.path.join(outdir, name), _state_files(st))
            manifest.add(name, f"checkpoint at t={st.t:.6g}")

    sampler(state)
    state, info = run_coupled(state, cfg.stepper(), observer)
    if not sampled_last:
        sampler(state)
    sampler.finalize()

    save_vector_fields(os.path.join(outdir, "state_final.fld"),
                       _state_files(state))
    manifest.add("state_final.fld", f"final state at t={state.t:.6g}")

    csv_ledger = (ledger if diag.metrics == "all"
                  else _FilteredLedger(ledger, diag.metrics))
    write_runs_csv(os.path.join(outdir, "ledger.csv"), [csv_ledger])
    manifest.add("ledger.csv", "diagnostics time series")

    meta = {
        "run_id": ledger.run_id,
        "seed": seed,
        "scheme": cfg.solver.scheme,
        "steps": info.steps,
        "cfl_rejections": info.cfl_rejections,
        "dt_history": info.dt_history,
        "blew_up": info.blew_up,
        "message": info.message,
        "final_time": state.t,
    }
    write_metadata(os.path.join(outdir, "run.json"), meta)
    manifest.add("run.json", "run metadata")

    reports = {}
    try:
        reports["gronwall"] = gronwall_ledger(ledger).to_dict()
    except (ValueError, KeyError) as exc:
        reports["gronwall"] = {"error": str(exc)}
    try:
        reports["energy"] = {
            k: v for k, v in energy_report(ledger).items()
            if k in ("min_margin",)
        }
        budget = mn_budget(ledger)
        reports["budget"] = {"sup": budget["sup"], "t_sup": budget["t_sup"]}
        if diag.eta_threshold is not None:
            reports["budget"]["eta_threshold"] = diag.eta_threshold
            reports["budget"]["within_eta"] = bool(
                budget["sup"] <= diag.eta_threshold)
        reports["monitors"] = blowup_monitors(
            ledger, p=diag.kz_p, dyadic_exponent=diag.dyadic_exponent)
        reports["largeness"] = largeness_report(u0, ledger, delta=diag.delta)
    except (ValueError, KeyError) as exc:
        reports.setdefault("error", str(exc))
    _write_json(outdir, manifest, "report.json", reports, "derived reports")

    _render_simulation_figures(outdir, manifest, ledger)
    manifest.write()

    if info.blew_up:
        click.echo(f"blow-up: {info.message}", err=True)
        click.echo(f"partial outputs in {outdir}")
        sys.exit(EXIT_BLOWUP)
    click.echo(
        f"{ledger.run_id}: {info.steps} steps to t={state.t:.6g}, "
        f"outputs in {outdir}")


# ---------------------------------------------------------------------------
# sweep

def _family_with(cfg: ExperimentConfig, param: str, value: float):
    fam = cfg.family()
    if fam is None:
        raise ConfigError("cannot sweep zero data")
    if not hasattr(fam, param):
        raise ConfigError(
            f"family {cfg.data.family!r} has no sweep parameter {param!r}")
    if not isinstance(getattr(fam, param), (int, float)):
        raise ConfigError(f"sweep parameter {param!r} is not scalar")
    return dataclasses.replace(fam, **{param: value})


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--param", default="eps", help="Scalar family parameter to vary.")
@click.option("--values", required=True,
              help="Comma list of parameter values (>= 4, geometric).")
@click.option("--out", default=None, help="Output directory (default: config).")
@click.option("--seed", type=int, default=0)
def cmd_sweep(config_path, param, values, out, seed):
    """Scaling sweep of data functionals along one family parameter."""
    try:
        cfg = load_config(config_path)
        outdir = _ensure_outdir(out or cfg.output.directory)
        manifest = Manifest(outdir, "sweep")
        _echo_config(cfg, outdir, manifest, seed)
        try:
            vals = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--values: not numbers: {values!r}") from None

        from .families import make_grid, scaling_sweep
        shape = cfg.grid.resolution
        head = scaling_sweep(lambda v: _family_with(cfg, param, v), vals,
                             shape, parameter=param)

        led = DiagnosticsLedger("sweep")
        series: dict[str, list] = {"d3_hneg": list(head.norms)}
        extras = ("data_bneg1", "data_besov")
        for name in extras:
            series[name] = []
        for v in vals:
            fam = _family_with(cfg, param, v)
            u0 = generate_data(fam, make_grid(fam, shape))
            series["data_bneg1"].append(
                max(bneg1_inf(c) for c in u0.components))
            series["data_besov"].append(
                sum(aniso_besov(c, 0.0, 0.5, 2, 1) for c in u0.components))
        for name, col in series.items():
            for v, x in zip(vals, col):
                led.record(float(v), name, float(x), params=f"{param}={v:g}")
        write_runs_csv(os.path.join(outdir, "sweep.csv"), [led])
        manifest.add("sweep.csv", "per-point functionals")

        fits = {}
        for name, col in series.items():
            col = np.asarray(col, dtype=float)
            if head.exact_zero and name == "d3_hneg":
                fits[name] = {"values": col.tolist(), "exact_zero": True}
                continue
            if np.any(col <= 0):
                fits[name] = {"values": col.tolist(), "slope": None}
                continue
            slope, intercept = np.polyfit(np.log(vals), np.log(col), 1)
            resid = np.log(col) - (slope * np.log(vals) + intercept)
            fits[name] = {
                "values": col.tolist(),
                "slope": float(slope),
                "intercept": float(intercept),
                "max_log_residual": float(np.abs(resid).max()),
            }
        doc = {"parameter": param, "values": vals, "metrics": fits}
        _write_json(outdir, manifest, "sweep.json", doc, "slope report")

        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, col in series.items():
            col = np.asarray(col, dtype=float)
            if np.all(col > 0):
                label = name
                if fits[name].get("slope") is not None:
                    label += f" (slope {fits[name]['slope']:.3f})"
                ax.loglog(vals, col, "o-", label=label)
        ax.set_xlabel(param)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "sweep.png"), dpi=150)
        plt.close(fig)
        manifest.add("sweep.png", "sweep figure")
        manifest.write()
    except _REQUEST_ERRORS as exc:
        _fail(EXIT_CONFIG, str(exc))
    slope = fits["d3_hneg"].get("slope")
    shown = "exact zero" if head.exact_zero else f"slope {slope:.4f}"
    click.echo(f"sweep over {param}: vertical-gradient norm {shown}; "
               f"outputs in {outdir}")


# ---------------------------------------------------------------------------
# verify

@main.command("verify")
@click.option("--suites", default="", help=f"Comma list from {SUITES}.")
@click.option("--out", default=".", help="Output directory.")
@click.option("--seed", type=int, default=0)
@click.option("--corrupt-cutoff", is_flag=True, hidden=True,
              help="Negative control: run against a detuned cutoff.")
def cmd_verify(suites, out, seed, corrupt_cutoff):
    """Run self-verification suites and report per-property results."""
    try:
        chosen = tuple(s.strip() for s in suites.split(",") if s.strip()) or None
        cutoff = CutoffPair(corrupt=True) if corrupt_cutoff else None
        rep = run_verify(chosen, cutoff=cutoff, seed=seed)
    except _REQUEST_ERRORS as exc:
        _fail(EXIT_CONFIG, str(exc))
    outdir = _ensure_outdir(out)
    manifest = Manifest(outdir, "verify")
    _write_json(outdir, manifest, "verify.json", rep.to_dict(),
                "verification report")
    manifest.write()
    for r in rep.results:
        mark = "pass" if r.passed else "FAIL"
        click.echo(f"[{mark}] {r.suite}/{r.prop}: measured {r.measured:.6g} "
                   f"(bound {r.bound:g})")
    if not rep.all_passed:
        names = ", ".join(r.prop for r in rep.failures())
        click.echo(f"verification failed: {names}", err=True)
        sys.exit(EXIT_VERIFY)
    click.echo("all properties verified")


if __name__ == "__main__":
    main()
