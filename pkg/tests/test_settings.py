from config.settings import get_settings


def test_defaults():
    settings = get_settings()
    assert settings.planning_tol == 1e-9
    assert settings.cors_origins == ["http://localhost:3000"]


def test_cors_origins_from_environment(monkeypatch):
    monkeypatch.setenv("TRANSFER_MDP_CORS_ORIGINS", "http://a.test, http://b.test,")
    get_settings.cache_clear()
    assert get_settings().cors_origins == ["http://a.test", "http://b.test"]


def test_planning_tol_from_environment(monkeypatch):
    monkeypatch.setenv("TRANSFER_MDP_PLANNING_TOL", "1e-6")
    get_settings.cache_clear()
    assert get_settings().planning_tol == 1e-6
