import os

import pytest

from utils.errors import DegenerateDifference, InvalidConfig, Separation
from utils.pool import resolve_workers, run_replicates


def _square_or_fail(r):
    if r % 5 == 3:
        raise Separation(f"replicate {r}")
    return r * r


class TestRunReplicates:

    @pytest.mark.parametrize("workers", [1, 4])
    def test_ordered_outcomes(self, workers):
        out = run_replicates(_square_or_fail, 12, workers=workers)
        assert [r for r, _, _ in out] == list(range(12))
        assert out[2] == (2, 4, None)
        assert out[3] == (3, None, "Separation: replicate 3")

    def test_uncaptured_errors_propagate(self):
        def boom(r):
            raise DegenerateDifference("no variance")

        with pytest.raises(DegenerateDifference):
            run_replicates(boom, 3)

    def test_capture_is_configurable(self):
        def boom(r):
            raise DegenerateDifference("no variance")

        out = run_replicates(boom, 2, workers=2, capture=(DegenerateDifference,))
        assert [err for _, _, err in out] == ["DegenerateDifference: no variance"] * 2


class TestResolveWorkers:

    def test_configured_value(self, monkeypatch):
        monkeypatch.delenv("ROC_WORKERS", raising=False)
        assert resolve_workers(3) == 3

    def test_zero_means_all_cores(self, monkeypatch):
        monkeypatch.delenv("ROC_WORKERS", raising=False)
        assert resolve_workers(0) == (os.cpu_count() or 1)

    def test_environment_wins(self, monkeypatch):
        monkeypatch.setenv("ROC_WORKERS", "2")
        assert resolve_workers(8) == 2

    @pytest.mark.parametrize("raw", ["-1", "many"])
    def test_invalid(self, monkeypatch, raw):
        monkeypatch.setenv("ROC_WORKERS", raw)
        with pytest.raises(InvalidConfig):
            resolve_workers()
