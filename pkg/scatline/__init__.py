"""
Application factory for the scatline command-line tool.

This module provides a function to create and configure the Flask
application that carries configuration, logging and error handlers.
The scattering commands hang off ``app.cli``; they are registered
inside the factory to allow for modular development and unit testing.

Configuration comes from built-in defaults, then environment variables
prefixed with ``SCATLINE_`` (a ``.env`` file is loaded first if present),
then the ``test_config`` mapping passed to :func:`create_app`.
Environment values are parsed as JSON, so ``SCATLINE_THREADS=4`` is an
integer and ``SCATLINE_DISPERSION_EPS=[0.1,0.05]`` a list.
"""

from __future__ import annotations

import json

import click
from dotenv import load_dotenv
from flask import Flask, current_app
from flask.cli import AppGroup, ScriptInfo

from .models import Propagation

DEFAULT_CONFIG = {
    "RTOL": 1e-10,
    "ATOL": 1e-10,
    "PROPAGATION": Propagation.AUTO.value,
    "THREADS": 1,
    "LOG_LEVEL": "INFO",
    "SEED": 0,
    "DISPERSION_EPS": [0.1, 0.05, 0.025],
    "INTERPOLATE_MISSING": False,
    "CLASSIFY_BAND": 0.1,
}


def _app_for(ctx: click.Context) -> Flask:
    if current_app:
        return current_app._get_current_object()
    return ctx.ensure_object(ScriptInfo).load_app()


class ScatlineGroup(AppGroup):
    """Command group that sends errors through the application's error handlers.

    A handler returns ``(payload, exit_code)``; the payload is printed as
    JSON on stderr. Errors without a handler propagate unchanged.
    """

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException):
            raise
        except Exception as err:
            app = _app_for(ctx)
            handler = app._find_error_handler(err, [])
            if handler is None:
                raise
            payload, code = handler(err)
            click.echo(json.dumps(payload, sort_keys=True, default=str), err=True)
            ctx.exit(code)


def create_app(test_config: dict | None = None) -> Flask:
    """Create and configure the application.

    Parameters
    ----------
    test_config: dict | None, optional
        Optional configuration overrides used when running tests.

    Returns
    -------
    Flask
        A configured application with every command registered on ``app.cli``.
    """
    app = Flask(__name__)
    app.cli = ScatlineGroup("scatline", help="Scattering with a point transfer condition.")

    # Defaults, then SCATLINE_* from the environment, then test overrides.
    app.config.from_mapping(DEFAULT_CONFIG)
    load_dotenv()
    app.config.from_prefixed_env("SCATLINE")

    if test_config:
        app.config.update(test_config)

    app.logger.setLevel(app.config["LOG_LEVEL"])

    # Register custom error handlers
    from .errors import register_error_handlers
    register_error_handlers(app)

    from .commands.forward import forward_cmd
    from .commands.invert import invert_cmd
    from .commands.recover import recover_cmd
    from .commands.validate import validate_cmd

    app.cli.add_command(forward_cmd)
    app.cli.add_command(invert_cmd)
    app.cli.add_command(recover_cmd)
    app.cli.add_command(validate_cmd)

    return app
