from __future__ import annotations

from pathlib import Path

import pytest

from nvspec.config import Settings


def test_defaults(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.chdir(tmp_path)
    for name in ("NVSPEC_SEED", "NVSPEC_THREADS", "NVSPEC_OUTPUT_DIR", "NVSPEC_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    loaded = Settings()
    assert loaded.seed == 0
    assert loaded.threads is None
    assert loaded.output_dir == Path("results")
    assert loaded.log_level == "INFO"


def test_environment_overrides(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("NVSPEC_SEED", "17")
    monkeypatch.setenv("NVSPEC_THREADS", "3")
    monkeypatch.setenv("nvspec_output_dir", str(tmp_path / "out"))
    loaded = Settings()
    assert loaded.seed == 17
    assert loaded.threads == 3
    assert loaded.output_dir == tmp_path / "out"


def test_dotenv_file(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("NVSPEC_SEED", raising=False)
    (tmp_path / ".env").write_text("NVSPEC_SEED=42\nUNRELATED=1\n", encoding="utf-8")
    assert Settings().seed == 42
