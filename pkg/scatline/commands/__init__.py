"""Command-line subcommands.

Each module defines one click command; the factory registers them on
the application's group. Shared options and the run-configuration
plumbing live here.

Every command accepts ``--config run.json``: its keys become option
defaults, so flags given on the command line win.
"""

from __future__ import annotations

import functools

import click
from flask import current_app
from flask.cli import with_appcontext

from ..models import Propagation, RunConfig, SolverOptions
from ..schemas import RunConfigSchema
from ..util.io import read_config_json


def _load_config(ctx: click.Context, param: click.Parameter, value) -> None:
    if value:
        defaults = dict(ctx.default_map or {})
        defaults.update(read_config_json(value))
        ctx.default_map = defaults


def config_option(fn):
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        is_eager=True,
        expose_value=False,
        callback=_load_config,
        help="JSON file of option defaults.",
    )(fn)


def solver_options(fn):
    """Tolerance, method and thread flags shared by every command."""
    options = [
        click.option("--rtol", type=float, default=None, help="Relative ODE tolerance."),
        click.option("--atol", type=float, default=None, help="Absolute ODE tolerance."),
        click.option(
            "--propagation",
            type=click.Choice([p.value for p in Propagation]),
            default=None,
            help="Propagation method.",
        ),
        click.option("--threads", type=int, default=None, help="Worker threads for independent samples."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def emit_option(fn):
    return click.option(
        "--emit-plot-data",
        type=click.Path(file_okay=False),
        default=None,
        help="Directory for tidy CSVs meant for plotting.",
    )(fn)


def build_run_config(command: str, params: dict) -> RunConfig:
    """Validate the merged options and wrap them in a :class:`RunConfig`."""
    options = {k: v for k, v in params.items()}
    RunConfigSchema().load({"command": command, **{k: v for k, v in options.items() if v is not None}})
    return RunConfig(command, options)


def options_for(app, params: dict) -> SolverOptions:
    """Solver options from ``app.config`` with any flags given on the command line."""
    values = {
        "rtol": app.config["RTOL"],
        "atol": app.config["ATOL"],
        "method": app.config["PROPAGATION"],
        "threads": app.config["THREADS"],
    }
    flags = {
        "rtol": params.get("rtol"),
        "atol": params.get("atol"),
        "method": params.get("propagation"),
        "threads": params.get("threads"),
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    return SolverOptions(**values)


def with_run_config(command: str):
    """Pass ``(app, run_config, **params)`` to the wrapped command body.

    The body runs inside the application context, so ``current_app`` is
    the application built by the factory.
    """
    def decorator(fn):
        @functools.wraps(fn)
        @with_appcontext
        def wrapper(**params):
            app = current_app._get_current_object()
            run_config = build_run_config(command, params)
            app.logger.debug("Running %s with config hash %s", command, run_config.digest())
            return fn(app, run_config, **params)
        return wrapper
    return decorator
