import pytest

from harmcanon.config import Config, load_config


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.setattr("harmcanon.config.load_dotenv", lambda: None)
    for name in ("HARMCANON_SOLVER_TOL", "HARMCANON_SOLVER", "HARMCANON_MAX_ITER", "HARMCANON_LOG_DIR"):
        monkeypatch.delenv(name, raising=False)


def test_defaults():
    assert load_config() == Config()
    assert load_config().solver_tol == 1e-10


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("HARMCANON_SOLVER_TOL", "1e-8")
    monkeypatch.setenv("HARMCANON_SOLVER", "CG")
    monkeypatch.setenv("HARMCANON_MAX_ITER", "500")
    monkeypatch.setenv("HARMCANON_LOG_DIR", "/tmp/harmcanon-logs")
    config = load_config()
    assert config.solver_tol == 1e-8
    assert config.solver_method == "cg"
    assert config.max_iterations == 500
    assert config.log_dir == "/tmp/harmcanon-logs"


@pytest.mark.parametrize(
    "name, value",
    [
        ("HARMCANON_SOLVER_TOL", "tiny"),
        ("HARMCANON_SOLVER_TOL", "0"),
        ("HARMCANON_SOLVER_TOL", "2"),
        ("HARMCANON_SOLVER", "amg"),
        ("HARMCANON_MAX_ITER", "many"),
        ("HARMCANON_MAX_ITER", "0"),
    ],
)
def test_invalid_values_raise(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValueError, match="Configuration error"):
        load_config()
