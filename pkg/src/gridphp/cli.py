"""Command line entry point."""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import click

from .experiments import (
    ConfigError,
    ExperimentConfig,
    PipelineExhausted,
    TrialError,
    run_pipeline,
    run_switch_mc,
)
from .formula_core import FregeProof, check_proof, generate_php
from .grid_core import Figure, find_negative_certificate, is_white_bounded, tile
from .layout import Layout
from .matching_engine import profile, well_cover
from .restriction import (
    SamplingError,
    sample_full_restriction,
    sample_partial_restriction,
    verify_full_restriction,
)

EXIT_OK, EXIT_VERIFY, EXIT_SAMPLING = 0, 2, 3

_overrides = [
    click.option("--C", "C", type=float, help="Constant in R = C log n and k = C (n/T)^2 log n."),
    click.option("--n", type=int),
    click.option("--delta", type=int),
    click.option("--R", "R", type=int),
    click.option("--m", type=int, help="Mini-graph side for toy runs."),
    click.option("--trials", type=int),
    click.option("--seed", type=int),
    click.option("--s", type=int),
    click.option("--t", type=int),
    click.option("--ell", type=int),
    click.option("--d", type=int),
    click.option("--M", "M", type=int),
    click.option("--family-size", type=int),
    click.option("--k", type=int),
    click.option("--max-per-super", type=float),
    click.option("--min-per-pair", type=float),
    click.option("--tau-steps", type=int),
    click.option("--workers", type=int),
    click.option("--out-json"),
    click.option("--out-csv"),
]


def config_options(fn):
    for opt in reversed(_overrides):
        fn = opt(fn)
    return fn


def _config(ctx, overrides: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.load(ctx.obj.get("config"), overrides)
    except ConfigError as e:
        raise click.UsageError(str(e)) from e


def _fail(msg: str, code: int):
    click.echo(msg, err=True)
    sys.exit(code)


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              help="JSON experiment config; flags override its fields.")
@click.pass_context
def main(ctx, config):
    """Domino tilings, restrictions and switching experiments on grid pigeonhole instances."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@main.command("tile-check")
@click.argument("figure_file", type=click.Path(exists=True, dir_okay=False))
def tile_check(figure_file):
    """Tile a figure or print a certificate that no tiling exists."""
    text = Path(figure_file).read_text()
    fig = Figure.from_json(text) if figure_file.endswith(".json") else Figure.from_text(text)
    dm = tile(fig)
    if fig.white_count > fig.black_count:
        click.echo(f"not tileable: {fig.white_count} white and {fig.black_count} black cells")
        return
    cert = find_negative_certificate(fig)
    if dm is not None and cert is None:
        click.echo(f"tileable: {len(dm)} dominoes")
        for a, b in sorted(dm.dominoes):
            click.echo(f"{a[0]} {a[1]} {b[0]} {b[1]}")
        return
    if dm is None and cert is not None and is_white_bounded(cert, fig) \
            and cert.black_count > cert.white_count:
        click.echo(f"not tileable: white-bounded subfigure with {cert.white_count} white "
                   f"and {cert.black_count} black cells")
        click.echo(cert.to_text(), nl=False)
        return
    _fail("tiling and certificate disagree", EXIT_VERIFY)


@main.command()
@click.option("--points", required=True, help="Comma separated points of K.")
@click.option("--n", type=int, default=200, show_default=True)
def wellcover(points, n):
    """Well cover a multiset of points in [1, n]."""
    K = [int(x) for x in points.split(",") if x.strip()]
    cover = well_cover(K, n)
    ivs = list(cover.intervals)
    ok = cover.is_even() and cover.size <= 6 * len(K)
    for a, b in ivs:
        ok = ok and profile((a, b), K).nonnegative()
        click.echo(f"[{a}, {b}]")
    click.echo(f"total {cover.size} for |K| = {len(K)}")
    if not ok:
        _fail("well-cover contract violated", EXIT_VERIFY)


@main.command()
@click.option("--full/--partial", default=True, help="Full restriction or partial restriction.")
@config_options
@click.pass_context
def sample(ctx, full, **overrides):
    """Sample one restriction and verify or print it."""
    cfg = _config(ctx, overrides)
    rng = random.Random(cfg.seed)
    try:
        if full:
            layout = Layout(cfg.layout_params())
            sig, sub, reduced = sample_full_restriction(layout, rng, cfg.restart_cap)
            rep = verify_full_restriction(layout, sig, sub)
            click.echo(json.dumps({"tau_restarts": sig.restarts, **rep}, indent=2, sort_keys=True))
            if rep["problems"]:
                _fail("restriction check failed", EXIT_VERIFY)
        else:
            pr = sample_partial_restriction(
                cfg.system(), rng, k=cfg.k, C=cfg.C, max_per_super=cfg.max_per_super,
                min_per_pair=cfg.min_per_pair, cap=cfg.restart_cap, tau_steps=cfg.tau_steps,
            )
            click.echo(json.dumps(pr.to_json(), sort_keys=True))
    except SamplingError as e:
        _fail(f"{e} {json.dumps(e.diagnostics, sort_keys=True)}", EXIT_SAMPLING)


@main.command("switch-mc")
@config_options
@click.pass_context
def switch_mc(ctx, **overrides):
    """Estimate how often canonical trees exceed depth 2s."""
    cfg = _config(ctx, overrides)
    try:
        rep = run_switch_mc(cfg)
    except SamplingError as e:
        _fail(f"{e} {json.dumps(e.diagnostics, sort_keys=True)}", EXIT_SAMPLING)
    except TrialError as e:
        _fail(str(e), EXIT_VERIFY)
    rep.write(cfg.out_json, cfg.out_csv)
    click.echo(rep.to_json())


@main.command()
@config_options
@click.pass_context
def pipeline(ctx, **overrides):
    """Apply d rounds of full restrictions and check every reduced instance."""
    cfg = _config(ctx, overrides)
    try:
        rep = run_pipeline(cfg)
    except SamplingError as e:
        _fail(f"{e} {json.dumps(e.diagnostics, sort_keys=True)}", EXIT_SAMPLING)
    except PipelineExhausted as e:
        _fail(str(e), EXIT_VERIFY)
    rep.write(cfg.out_json, cfg.out_csv)
    click.echo(rep.to_json())
    if not rep.aggregate["all_valid"]:
        sys.exit(EXIT_VERIFY)


@main.command("check-proof")
@click.argument("proof_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--php", "php_n", type=int, required=True, help="Side of the PHP grid instance.")
@click.option("--depth", "d", type=int, required=True, help="Maximum formula depth.")
def check_proof_cmd(proof_file, php_n, d):
    """Check a Frege derivation against the axioms of a grid PHP instance."""
    proof = FregeProof.from_text(Path(proof_file).read_text())
    verdict = check_proof(proof, generate_php(php_n).axioms, d)
    if verdict.ok:
        click.echo(f"valid: {len(proof.lines)} lines")
        return
    _fail(f"line {verdict.line}: {verdict.reason}", EXIT_VERIFY)


if __name__ == "__main__":
    main()
