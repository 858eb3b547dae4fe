from __future__ import annotations

from flask import Blueprint, current_app, jsonify, request

from app.services import operations
from app.services.errors import Lie3Error, PayloadError

api_bp = Blueprint("api", __name__, url_prefix="/api")


def _error(exc: Lie3Error, status: int):
    return jsonify({"success": False, "error": exc.to_payload()}), status


def _handle(name: str):
    payload = request.get_json(silent=True)
    if not isinstance(payload, dict):
        return _error(PayloadError("Missing JSON object body"), 400)
    try:
        outcome = operations.HANDLERS[name](payload, current_app.config)
    except PayloadError as exc:
        return _error(exc, 400)
    except Lie3Error as exc:
        current_app.logger.info("%s request failed: %s", name, exc)
        return _error(exc, 422)
    return jsonify({"success": True, "passed": outcome.passed, "result": outcome.document})


@api_bp.get("/health", endpoint="health")
def health():
    return jsonify({"success": True, "commands": sorted(operations.HANDLERS)})


@api_bp.post("/jordan", endpoint="jordan")
def jordan():
    return _handle("jordan")


@api_bp.post("/canonical", endpoint="canonical")
def canonical():
    return _handle("canonical")


@api_bp.post("/verify", endpoint="verify")
def verify():
    return _handle("verify")


@api_bp.post("/classify", endpoint="classify")
def classify():
    return _handle("classify")


@api_bp.post("/family", endpoint="family")
def family():
    return _handle("family")


@api_bp.post("/transform", endpoint="transform")
def transform():
    return _handle("transform")


@api_bp.post("/normalize", endpoint="normalize")
def normalize():
    return _handle("normalize")


@api_bp.post("/theorem", endpoint="theorem")
def theorem():
    return _handle("theorem")
