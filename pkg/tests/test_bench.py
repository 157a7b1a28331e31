import json
from types import SimpleNamespace

import numpy as np
import pytest

from transmon_hierarchy import bench
from transmon_hierarchy.errors import TimerResolutionError
from transmon_hierarchy.models import ModelSpec
from transmon_hierarchy.propagator import SolverConfig


class TestRuntimeBench:
    def test_small_bench(self, params, tmp_path):
        rep = bench.runtime_bench(["GR", "R"], params, [20.0, 40.0, 60.0, 80.0, 100.0], repeats=1)
        assert set(rep.timings) == {"GR", "R"}
        for t in rep.timings.values():
            assert t.slope > 0 and t.r_squared > 0.9
            assert np.all(t.times > 0)
        assert rep.speedups == {}
        d = json.loads(rep.write(tmp_path / "b.json").read_text())
        assert d["dims"] == {"GR": 18, "R": 6}

    def test_fit(self):
        x = np.arange(5.0)
        slope, intercept, r2 = bench._fit(x, 2 * x + 1)
        assert (slope, intercept, r2) == pytest.approx((2.0, 1.0, 1.0))

    def test_too_few_durations(self, params):
        with pytest.raises(ValueError):
            bench.runtime_bench(["R"], params, [10.0, 20.0, 30.0, 40.0])

    def test_rejects_repeats(self, params):
        with pytest.raises(ValueError):
            bench.runtime_bench(["R"], params, np.linspace(10, 50, 5), repeats=0)

    def test_timer_resolution(self, params, monkeypatch):
        monkeypatch.setattr(bench.time, "get_clock_info", lambda name: SimpleNamespace(resolution=10.0))
        with pytest.raises(TimerResolutionError):
            bench.time_evolution(ModelSpec("R"), params, 10.0, 0.01, SolverConfig(output_points=2))
