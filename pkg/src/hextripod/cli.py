"""Command line entry point: ``hextripod <subcommand>``.

Suite subcommands read an optional JSON config (keys of
:class:`~hextripod.harness.ExperimentConfig`), write report.json, CSVs and
figures under ``--out`` and exit 0 iff every check passes.  Worker count comes
from ``HEXTRIPOD_THREADS``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__, dharm, harness, hexgeom, observables, sle, ustsim
from .harness import ConfigError, ExperimentConfig
from .ustsim import RngState


def _angles(text: str | None, default):
    if text is None:
        return tuple(default)
    try:
        return tuple(float(a) for a in text.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma separated angles, got {text!r}") from None


def _load_config(kind: str, path, seed) -> ExperimentConfig:
    try:
        if path is None:
            cfg = harness.default_config(kind) if kind in harness.SUITES else ExperimentConfig(kind=kind)
        else:
            data = json.loads(Path(path).read_text())
            data["kind"] = kind
            cfg = ExperimentConfig.from_json(data)
        if seed is not None:
            data = cfg.to_json()
            data["seed"] = seed
            cfg = ExperimentConfig.from_json(data)
    except (ConfigError, json.JSONDecodeError, TypeError) as exc:
        raise click.ClickException(f"invalid config: {exc}") from None
    return cfg


def _finish(report: harness.Report, out) -> None:
    paths = harness.emit(report, out)
    click.echo(report.summary())
    click.echo(f"wrote {len(paths)} files to {out}", err=True)
    sys.exit(0 if report.passed else 1)


def _domain_from_args(shape: str, delta: float, rings: int) -> hexgeom.HexDomain:
    if shape == "flower":
        return hexgeom.build_flower(rings)
    return hexgeom.approximate_disk((0.0, 0.0), 1.0, delta)


def _domain_from_dump(data: dict) -> hexgeom.HexDomain:
    src = data.get("source")
    if not src:
        raise click.ClickException("domain JSON lacks the 'source' block written by dump-domain")
    dom = _domain_from_args(src["shape"], float(data["delta"]), int(src.get("rings", 1)))
    if dom.n_vertices != len(data["vertices"]):
        raise click.ClickException("domain JSON does not match its source parameters")
    return dom


def _write(text: str, output) -> None:
    if output is None:
        click.echo(text, nl=False)
    else:
        Path(output).write_text(text)


config_opt = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                          help="JSON experiment config.")
seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")
out_opt = click.option("--out", type=click.Path(file_okay=False), default=None,
                       help="Output directory (default: config 'output').")


@click.group()
@click.version_option(__version__)
def main():
    """Lattice tripod observables, continuum references and SLE checks."""


@main.command("dump-domain")
@click.option("--shape", type=click.Choice(["disk", "flower"]), default="disk")
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--rings", type=int, default=1, show_default=True)
@click.option("--angles", default=None, help="Three marked angles, comma separated.")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def dump_domain(shape, delta, rings, angles, output):
    """Write the lattice domain as JSON."""
    try:
        dom = _domain_from_args(shape, delta, rings)
        default = harness.FLOWER_MARKS if shape == "flower" else harness.SYMMETRIC
        marked = hexgeom.mark_boundary_edges(dom, _angles(angles, default))
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    data = dom.to_json(marked)
    data["source"] = {"shape": shape, "rings": rings}
    _write(json.dumps(data) + "\n", output)


@main.command()
@click.argument("domain_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("request_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def solve(domain_json, request_json, output):
    """Solve a discrete harmonic problem; writes CSV vertex_id,x,y,value.

    The request is {"kind": "green", "u": id}, {"kind": "poisson", "edge": [a, b]}
    or {"kind": "measure", "arc": [boundary ids]}.
    """
    dom = _domain_from_dump(json.loads(Path(domain_json).read_text()))
    req = json.loads(Path(request_json).read_text())
    kind = req.get("kind")
    try:
        if kind == "green":
            values = dharm.green(dom, int(req["u"])).values
        elif kind == "poisson":
            values = dharm.poisson_kernel(dom, tuple(int(a) for a in req["edge"])).values
        elif kind == "measure":
            edges = dharm.arc_edges(dom, req["arc"])
            if not edges:
                raise click.ClickException("arc contains no boundary edge")
            values = dharm.exit_probability(dom, edges).values
        else:
            raise click.ClickException(f"unknown request kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise click.ClickException(f"bad request: {exc}") from None
    rows = [[v, repr(float(dom.coords[v, 0])), repr(float(dom.coords[v, 1])), repr(float(values[v]))]
            for v in range(dom.n_vertices)]
    _write(harness._csv_text(rows, ["vertex_id", "x", "y", "value"]), output)


@main.command("fomin-check")
@config_opt
@seed_opt
@out_opt
def fomin_check(config_path, seed, out):
    """Determinant probabilities against tree enumeration (fomin.csv)."""
    cfg = _load_config("fomin", config_path, seed)
    out = Path(out or cfg.output)
    dom = harness._domain(cfg, cfg.deltas[0])
    marked = hexgeom.mark_boundary_edges(dom, cfg.angles)
    exact = observables.exact_tripod_statistics(dom, marked)["trifurcation"]
    prob = observables.fomin_diagnostics(dom, marked)["probability"]
    rows = [[u, repr(float(dom.coords[u, 0])), repr(float(dom.coords[u, 1])), repr(float(prob[u])),
             repr(ep.value), repr(abs(float(prob[u]) - ep.value))] for u, ep in sorted(exact.items())]
    out.mkdir(parents=True, exist_ok=True)
    (out / "fomin.csv").write_text(harness._csv_text(rows, ["u_id", "x", "y", "det", "exact", "abs_err"]))
    _finish(harness.run_fomin_exact(cfg), out)


@main.command()
@config_opt
@seed_opt
@click.option("--delta", type=float, default=None, help="Mesh (default: first config delta).")
@click.option("-n", "n_samples", type=int, default=10, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def sample(config_path, seed, delta, n_samples, output):
    """Conditioned tripods as JSON lines, one block stream per thousand samples."""
    cfg = _load_config("trifurcation", config_path, seed)
    if n_samples < 1:
        raise click.ClickException("-n must be at least 1")
    dom = harness._domain(cfg, delta or cfg.deltas[0])
    marked = hexgeom.mark_boundary_edges(dom, cfg.angles)

    def block(size, rng):
        batch = ustsim.sample_tripods(dom, marked, size, rng, cfg.strategy)
        return [json.dumps(batch.tripod(i).to_record(dom, rng.seed, rng.stream)) for i in range(size)]
    lines = [line for b in harness.map_blocks(block, n_samples, cfg.seed) for line in b]
    _write("\n".join(lines) + "\n", output)


def _suite_command(kind: str, doc: str):
    @config_opt
    @seed_opt
    @out_opt
    def command(config_path, seed, out):
        cfg = _load_config(kind, config_path, seed)
        _finish(harness.run(kind, cfg), out or cfg.output)
    command.__doc__ = doc
    return main.command(kind)(command)


_suite_command("pair-ratio", "Lattice pair probability ratio against its continuum value.")
_suite_command("trifurcation", "Pointwise trifurcation density and Monte Carlo histogram.")
_suite_command("g-convergence", "Lattice g against the closed form, with a Monte Carlo cross-check.")
_suite_command("identities", "Continuum identity and covariance checks.")


@main.command("all")
@config_opt
@seed_opt
@out_opt
def run_all(config_path, seed, out):
    """Every suite, merged into one report."""
    cfg = _load_config("all", config_path, seed)
    _finish(harness.run("all", cfg), out or cfg.output)


def _trace_record(tr: sle.Trace) -> list:
    return [[float(p.real), float(p.imag)] for p in tr.points]


@main.command("sle")
@click.option("--mode", type=click.Choice(["suite", "driver", "trace", "threesided"]), default="suite")
@config_opt
@seed_opt
@out_opt
@click.option("-n", "n_samples", type=int, default=1, show_default=True)
@click.option("--T", "T", type=float, default=1.0, show_default=True)
@click.option("--dt", type=float, default=None)
@click.option("--kappa", type=float, default=2.0, show_default=True)
@click.option("--rho", type=(float, float), default=(2.0, 2.0), show_default=True)
@click.option("--angles", default=None, help="theta1,theta2,theta3 (default symmetric).")
@click.option("--stop-cr", type=float, default=0.1, show_default=True)
@click.option("--resolution", type=int, default=400, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def sle_command(mode, config_path, seed, out, n_samples, T, dt, kappa, rho, angles, stop_cr,
                resolution, output):
    """SLE suite, or JSON-lines samples of drivers, traces or three-sided triples."""
    cfg = _load_config("sle", config_path, seed)
    if mode == "suite":
        _finish(harness.run("sle", cfg), out or cfg.output)
    try:
        params = sle.SleParams(kappa, rho[0], rho[1], *_angles(angles, harness.SYMMETRIC))
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    step = dt or min(1e-3, params.max_dt())
    lines = []
    for i in range(n_samples):
        rng = RngState(cfg.seed, i)
        rec = {"seed": cfg.seed, "stream": i}
        if mode == "threesided":
            ts = sle.sample_three_sided_truncated(params, stop_cr, rng, resolution=resolution)
            rec.update(gamma3=_trace_record(ts.gamma3), gamma1=_trace_record(ts.gamma1),
                       gamma2=_trace_record(ts.gamma2))
        else:
            d = sle.drive_radial(params, T, step, rng)
            if mode == "driver":
                rec.update(t=d.t.tolist(), xi=d.xi.tolist(), V1=d.V1.tolist(), V2=d.V2.tolist())
            else:
                tr = sle.trace(d, resolution)
                rec.update(t=tr.times.tolist(), points=_trace_record(tr), warnings=list(tr.warnings))
        lines.append(json.dumps(rec))
    _write("\n".join(lines) + "\n", output)


if __name__ == "__main__":
    main()
