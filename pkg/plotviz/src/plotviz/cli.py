"""Entry point: plot <kind> --csv PATH... --out PATH [--metrics a,b,c]."""

import click

from .data import PlotDataError
from .figures import KINDS, PlotRequest, render


@click.command()
@click.argument("kind", type=click.Choice(KINDS))
@click.option("--csv", "csv_paths", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Delimited input file; repeat for several.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Image file to write.")
@click.option("--metrics", default=None,
              help="Comma list of metric names; default is all present.")
def main(kind, csv_paths, out, metrics):
    """Render delimited diagnostics output into a figure file."""
    wanted = None
    if metrics is not None:
        wanted = tuple(m.strip() for m in metrics.split(",") if m.strip())
        if not wanted:
            raise click.ClickException(f"--metrics: no names in {metrics!r}")
    request = PlotRequest(csv_paths=tuple(csv_paths), kind=kind, out=out,
                          metrics=wanted)
    try:
        path = render(request)
    except PlotDataError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {path}")
