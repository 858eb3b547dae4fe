import logging
import os

from flask import Flask

from constants import (
    DEFAULT_DRAWS,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    DEFAULT_WORKERS,
)
from helpers import parse_bool
from app.blueprints.api import api_bp
from app.cli import cli


def create_app(overrides: dict | None = None):
    app = Flask(__name__)
    if overrides:
        app.config.update(overrides)
    app.register_blueprint(api_bp)
    app.cli.add_command(cli)

    try:
        seed = int(os.environ.get("LIE3_SEED", str(DEFAULT_SEED)))
    except ValueError:
        seed = DEFAULT_SEED
    app.config.setdefault("LIE3_SEED", seed)
    try:
        samples = int(os.environ.get("LIE3_SAMPLES", str(DEFAULT_SAMPLES)))
    except ValueError:
        samples = DEFAULT_SAMPLES
    app.config.setdefault("LIE3_SAMPLES", samples)
    try:
        tolerance = float(os.environ.get("LIE3_TOLERANCE", str(DEFAULT_TOLERANCE)))
    except ValueError:
        tolerance = DEFAULT_TOLERANCE
    app.config.setdefault("LIE3_TOLERANCE", tolerance)
    try:
        draws = int(os.environ.get("LIE3_DRAWS", str(DEFAULT_DRAWS)))
    except ValueError:
        draws = DEFAULT_DRAWS
    app.config.setdefault("LIE3_DRAWS", draws)
    # More than one worker runs theorem draws in a process pool.
    try:
        workers = int(os.environ.get("LIE3_WORKERS", str(DEFAULT_WORKERS)))
    except ValueError:
        workers = DEFAULT_WORKERS
    app.config.setdefault("LIE3_WORKERS", max(1, workers))
    app.config.setdefault("LIE3_PRETTY", parse_bool(os.environ.get("LIE3_PRETTY")))
    app.config.setdefault("LIE3_LOG_LEVEL", os.environ.get("LIE3_LOG_LEVEL", "WARNING").upper())

    level = logging.getLevelName(app.config["LIE3_LOG_LEVEL"])
    if not isinstance(level, int):
        level = logging.WARNING
    app.logger.setLevel(level)
    return app
