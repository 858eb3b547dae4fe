import pytest

from app import create_app


@pytest.fixture()
def app():
    app = create_app(
        {
            "TESTING": True,
            "LIE3_SEED": 42,
            "LIE3_DRAWS": 5,
            "LIE3_WORKERS": 1,
            "LIE3_PRETTY": False,
        }
    )
    yield app


@pytest.fixture()
def client(app):
    return app.test_client()


@pytest.fixture()
def runner(app):
    return app.test_cli_runner()
