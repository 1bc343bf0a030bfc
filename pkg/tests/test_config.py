import json

import pytest

from utils import config as C
from utils.errors import InvalidConfig


class TestMerge:

    def test_nested(self):
        out = C.merge({"grid": {"alpha": 0.1, "step": 0.01}, "outcome": "y"}, {"grid": {"alpha": 0.05}})
        assert out == {"grid": {"alpha": 0.05, "step": 0.01}, "outcome": "y"}

    def test_base_untouched(self):
        base = {"grid": {"alpha": 0.1}}
        C.merge(base, {"grid": {"alpha": 0.2}})
        assert base["grid"]["alpha"] == 0.1


class TestLoadConfig:

    def test_defaults(self):
        cfg = C.load_config()
        assert cfg["grid"]["tau_l"] == 0.05
        assert cfg["bootstrap"]["scheme"] == "multiplier"

    def test_yaml_overlay(self, tmp_path):
        p = tmp_path / "run.yaml"
        p.write_text("kernel:\n  kernel: triangular\n")
        cfg = C.load_config(p)
        assert cfg["kernel"]["kernel"] == "triangular"
        assert cfg["kernel"]["gradient"] == "one_step"

    def test_result_document(self, tmp_path):
        p = tmp_path / "result.json"
        p.write_text(json.dumps({"procedure": "band", "config": {"grid": {"alpha": 0.05}}, "result": {}}))
        assert C.load_config(p)["grid"]["alpha"] == 0.05

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("grid: [unclosed\n")
        with pytest.raises(InvalidConfig):
            C.load_config(p)

    def test_not_a_mapping(self, tmp_path):
        p = tmp_path / "list.yaml"
        p.write_text("- 1\n- 2\n")
        with pytest.raises(InvalidConfig):
            C.load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidConfig):
            C.load_config(tmp_path / "absent.yaml")


class TestPanels:

    def test_panel_b(self):
        spec, cutoffs = C.panel(C.load_config(), "B")
        assert (spec.n, spec.predictor_law, spec.link) == (500, "normal01", "logit")
        assert cutoffs == [0.2, 0.33, 0.5, 0.67, 0.8]

    def test_panel_cutoffs_override(self):
        spec, cutoffs = C.panel(C.load_config(), "D")
        assert spec.predictor_law == "uniform"
        assert cutoffs == [0.5, 0.67, 0.8]

    def test_unknown_panel(self):
        with pytest.raises(InvalidConfig):
            C.panel(C.load_config(), "Z")
