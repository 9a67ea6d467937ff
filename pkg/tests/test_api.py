import pytest
from fastapi.testclient import TestClient

from app.config import settings
from main import app

client = TestClient(app)
API = settings.API_V1_STR


def test_health_and_root():
    assert client.get("/health").json() == {"status": "healthy"}
    assert client.get("/").json()["message"] == "BQML Simulator is running"


@pytest.mark.parametrize(
    "path, expected",
    [
        ("/oracle/intercept_resend", 0.25),
        ("/oracle/intercept_resend?basis_policy=fixed_diagonal", 0.25),
        ("/oracle/fake_photon?replacement=Minus", 0.5),
        ("/oracle/depolarize?p=0.3", 0.2),
    ],
)
def test_oracle(path, expected):
    response = client.get(f"{API}{path}")
    assert response.status_code == 200
    assert response.json()["mismatch_probability"] == pytest.approx(expected, abs=1e-12)


def test_oracle_rejects_bad_requests():
    assert client.get(f"{API}/oracle/none").status_code == 400
    assert client.get(f"{API}/oracle/depolarize").status_code == 400
    assert client.get(f"{API}/oracle/depolarize?p=1.5").status_code == 422
    assert client.get(f"{API}/oracle/teleport").status_code == 422


def test_validate_config_endpoint(minimal_config_data):
    body = client.post(f"{API}/config/validate", json=minimal_config_data).json()
    assert body["valid"] is True
    assert (body["n_pairs_per_source"], body["n_check"], body["n_trial_pairs"]) == (80, 40, 40)


def test_validate_config_lists_every_violation(minimal_config_data):
    minimal_config_data["session"]["shots"] = 0
    minimal_config_data["vectors"]["u"] = {"alpha": 0.5, "beta": 0.5}
    body = client.post(f"{API}/config/validate", json=minimal_config_data).json()
    assert body["valid"] is False
    assert len(body["violations"]) >= 2
    assert any(v.startswith("session.shots") for v in body["violations"])


def test_run_experiment_endpoint(minimal_config_data):
    minimal_config_data["session"]["shots"] = 400
    minimal_config_data["report"] = {"repetitions": 2}
    response = client.post(f"{API}/experiments/run", json=minimal_config_data)
    assert response.status_code == 200
    body = response.json()

    summary = body["summary"]
    assert list(summary) == [
        "config_hash",
        "repetitions",
        "aborted_count",
        "per_reference",
        "assignment_histogram",
        "security",
        "wall_clock_s",
    ]
    assert summary["repetitions"] == 2
    assert summary["aborted_count"] == 0
    assert summary["assignment_histogram"] == {"A": 2, "B": 0, "Tie": 0}
    assert [r["repetition"] for r in body["repetitions"]] == [0, 1]
    assert all(r["n_trials"] == 400 for r in body["repetitions"])


def test_run_experiment_rejects_oversized_requests(minimal_config_data):
    minimal_config_data["report"] = {"repetitions": settings.API_MAX_REPETITIONS + 1}
    response = client.post(f"{API}/experiments/run", json=minimal_config_data)
    assert response.status_code == 400


def test_run_experiment_rejects_invalid_body(minimal_config_data):
    minimal_config_data["session"]["unknown"] = 1
    assert client.post(f"{API}/experiments/run", json=minimal_config_data).status_code == 422
