from __future__ import annotations

import functools
import json

import click
from flask import current_app
from flask.cli import with_appcontext

from constants import (
    BRANCHES,
    EXIT_COMPUTATION_ERROR,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
)
from helpers import dump_json, load_json_argument
from app.services import operations
from app.services.errors import Lie3Error, PayloadError


def _json_option(value, label: str):
    if value is None:
        return None
    try:
        return load_json_argument(value)
    except (ValueError, OSError) as exc:
        raise click.BadParameter(f"not valid JSON or a readable JSON file ({exc})", param_hint=label)


def _emit(outcome: operations.Outcome, pretty: bool) -> None:
    click.echo(dump_json(outcome.document, pretty=pretty or current_app.config.get("LIE3_PRETTY", False)))
    if not outcome.passed:
        raise click.exceptions.Exit(EXIT_VERIFICATION_FAILED)


def _run(name: str):
    """Run ``operations.HANDLERS[name]`` on the request built by the command."""

    def decorator(build):
        @click.option("--pretty", is_flag=True, help="Indent the JSON output.")
        @with_appcontext
        @functools.wraps(build)
        def command(pretty: bool, **options):
            request = build(**options)
            try:
                outcome = operations.HANDLERS[name](request, current_app.config)
            except PayloadError as exc:
                raise click.UsageError(str(exc)) from exc
            except Lie3Error as exc:
                current_app.logger.debug("%s failed: %s", name, exc)
                click.echo(json.dumps({"success": False, "error": exc.to_payload()}), err=True)
                raise click.exceptions.Exit(EXIT_COMPUTATION_ERROR) from exc
            _emit(outcome, pretty)

        return command

    return decorator


@click.group(name="lie3", help="Group classification toolkit for y'' = F(x, y, z, u) systems.")
def cli():
    pass


@cli.command("jordan", help="Real Jordan form of a constant 3x3 matrix.")
@click.option("--matrix", required=True, help="Matrix JSON or a file holding it.")
@_run("jordan")
def jordan_command(matrix):
    return {"matrix": _json_option(matrix, "--matrix")}


@cli.command("canonical", help="Canonical linear system of a theorem case and its generator.")
@click.option("--case", "case", required=True, type=click.IntRange(1, 4))
@click.option("--params", default=None, help="Parameter object JSON or file.")
@_run("canonical")
def canonical_command(case, params):
    return {"case": case, "params": _json_option(params, "--params")}


@cli.command("verify", help="Check that a generator is admitted by a system.")
@click.option("--system", required=True, help="System JSON or file.")
@click.option("--generator", required=True, help="Generator JSON or file.")
@click.option("--seed", type=int, default=None)
@click.option("--samples", type=click.IntRange(1), default=None)
@_run("verify")
def verify_command(system, generator, seed, samples):
    return {
        "system": _json_option(system, "--system"),
        "generator": _json_option(generator, "--generator"),
        "seed": seed,
        "samples": samples,
    }


@cli.command("classify", help="Fit a linear system to a canonical case, or classify a matrix A.")
@click.option("--system", default=None, help="System JSON or file.")
@click.option("--matrix", default=None, help="Constant matrix A of the generator (A y).grad.")
@click.option("--seed", type=int, default=None)
@_run("classify")
def classify_command(system, matrix, seed):
    if (system is None) == (matrix is None):
        raise click.UsageError("Give exactly one of --system or --matrix")
    return {
        "system": _json_option(system, "--system"),
        "matrix": _json_option(matrix, "--matrix"),
        "seed": seed,
    }


@cli.command("family", help="Solution family of the determining equations.")
@click.option("--branch", required=True, type=click.Choice(BRANCHES))
@click.option("--jordan", "jordan_spec", required=True, help='{"kind": "J1", "params": {...}} or a matrix.')
@click.option("--subcase", default=None, help='Subcase tag for xi-zero, e.g. "a!=0,b=0,d=0".')
@click.option("--shifts", default=None, help="Shift functions [h1, h2, h3] of x.")
@click.option("--verify", "verify_residuals", is_flag=True, help="Also compute the determining residuals.")
@click.option("--seed", type=int, default=None)
@_run("family")
def family_command(branch, jordan_spec, subcase, shifts, verify_residuals, seed):
    return {
        "branch": branch,
        "jordan": _json_option(jordan_spec, "--jordan"),
        "subcase": subcase,
        "shifts": _json_option(shifts, "--shifts"),
        "verify": verify_residuals,
        "seed": seed,
    }


@cli.command("transform", help="Apply an equivalence transform to a system (and a generator).")
@click.option("--system", required=True, help="System JSON or file.")
@click.option("--transform", "transform_spec", required=True, help="Transform JSON or file.")
@click.option("--generator", default=None, help="Generator to push forward and re-check.")
@click.option("--seed", type=int, default=None)
@_run("transform")
def transform_command(system, transform_spec, generator, seed):
    return {
        "system": _json_option(system, "--system"),
        "transform": _json_option(transform_spec, "--transform"),
        "generator": _json_option(generator, "--generator"),
        "seed": seed,
    }


@cli.command("normalize", help="Reduce a linear generator with xi != 0 to d/dx + (A y).grad.")
@click.option("--generator", required=True, help="Generator JSON or file.")
@_run("normalize")
def normalize_command(generator):
    return {"generator": _json_option(generator, "--generator")}


@cli.command("theorem", help="Admission battery over random canonical systems.")
@click.option("--seed", type=int, default=None)
@click.option("--draws", type=click.IntRange(0), default=None)
@click.option("--workers", type=click.IntRange(1), default=None)
@click.option("--mutations", type=click.IntRange(0), default=0, help="Also run this many negative controls.")
@_run("theorem")
def theorem_command(seed, draws, workers, mutations):
    return {"seed": seed, "draws": draws, "workers": workers, "mutations": mutations}


def run(argv=None) -> int:
    """Entry point with explicit exit codes: 0 ok, 1 failed check, 2 usage, 3 computation error."""
    from app import create_app

    app = create_app()
    try:
        with app.app_context():
            result = cli.main(args=argv, prog_name="lie3", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_COMPUTATION_ERROR
    return result if isinstance(result, int) else EXIT_OK
