import jsonschema
import pytest

from app.services.payloads import load_schema

FREE_PARTICLE = {"kind": "general", "F": "0", "G": "0", "H": "0"}


def test_health_lists_commands(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    body = response.get_json()
    assert body["success"] is True
    assert "theorem" in body["commands"]


def test_verify_round_trip(client):
    response = client.post(
        "/api/verify",
        json={"system": FREE_PARTICLE, "generator": {"xi": "x^2", "eta": ["x*y", "x*z", "x*u"]}},
    )
    assert response.status_code == 200
    body = response.get_json()
    assert body["success"] is True
    assert body["passed"] is True
    jsonschema.validate(instance=body["result"], schema=load_schema("verification"))


def test_failed_check_is_still_a_successful_request(client):
    response = client.post(
        "/api/verify",
        json={"system": {"kind": "general", "F": "y", "G": "0", "H": "0"}, "generator": {"xi": "x", "eta": ["y", 0, 0]}},
    )
    assert response.status_code == 200
    body = response.get_json()
    assert body["passed"] is False
    assert body["result"]["admitted"] is False


@pytest.mark.parametrize(
    "path, payload",
    [
        ("/api/verify", {"system": FREE_PARTICLE}),
        ("/api/canonical", {"case": 9}),
        ("/api/family", {"branch": "sideways", "jordan": {"kind": "J1"}}),
        ("/api/jordan", {"matrix": [[1, 2], [3, 4]]}),
    ],
)
def test_bad_payloads_are_400(client, path, payload):
    response = client.post(path, json=payload)
    assert response.status_code == 400
    body = response.get_json()
    jsonschema.validate(instance=body, schema=load_schema("error"))
    assert body["error"]["code"] == "invalid_payload"


def test_non_object_body_is_400(client):
    response = client.post("/api/verify", data="[1, 2]", content_type="application/json")
    assert response.status_code == 400
    response = client.post("/api/verify", data="nothing")
    assert response.status_code == 400


def test_computation_errors_are_422(client):
    response = client.post("/api/family", json={"branch": "xi-nonzero", "jordan": {"kind": "J2", "params": {"c": 0}}})
    assert response.status_code == 422
    assert response.get_json()["error"]["code"] == "degenerate_params"

    response = client.post(
        "/api/family",
        json={"branch": "xi-zero", "jordan": {"kind": "J4", "params": {"a": 1}}, "subcase": "a=0,h3=0"},
    )
    assert response.status_code == 422
    assert response.get_json()["error"]["code"] == "inconsistent_predicate"


def test_syntax_error_carries_offset(client):
    response = client.post(
        "/api/verify",
        json={"system": {"kind": "general", "F": "y +", "G": "0", "H": "0"}, "generator": {"xi": "1", "eta": [0, 0, 0]}},
    )
    assert response.status_code == 422
    error = response.get_json()["error"]
    assert error["code"] == "syntax_error"
    assert error["offset"] == 3


def test_classify_matrix(client):
    response = client.post("/api/classify", json={"matrix": [[2, 0, 0], [0, 3, 5], [0, -5, 3]]})
    assert response.status_code == 200
    result = response.get_json()["result"]
    assert result["case"] == 2
    assert result["params"] == {"alpha": "-1", "c": "5"}


def test_family_document(client):
    response = client.post(
        "/api/family",
        json={"branch": "xi-nonzero", "jordan": {"kind": "J1", "params": {"a": 0, "b": "1/2", "d": 1}}, "verify": True},
    )
    assert response.status_code == 200
    body = response.get_json()
    assert body["passed"] is True
    jsonschema.validate(instance=body["result"], schema=load_schema("family"))


def test_transform_reparam(client):
    response = client.post(
        "/api/transform",
        json={"system": FREE_PARTICLE, "transform": {"kind": "reparam", "phi": "x^2", "psi": "1"}},
    )
    assert response.status_code == 422
    assert response.get_json()["error"]["code"] == "reparam_constraint_violated"


def test_theorem_endpoint(client):
    response = client.post("/api/theorem", json={"draws": 1})
    assert response.status_code == 200
    body = response.get_json()
    assert body["passed"] is True
    assert body["result"]["total"] == 4
    jsonschema.validate(instance=body["result"], schema=load_schema("theorem-report"))


def test_theorem_rejects_non_integer_draws(client):
    response = client.post("/api/theorem", json={"draws": "many"})
    assert response.status_code == 400
