import json
import os

import numpy as np
import pytest

from entropylab import cli
from entropylab.geometry import AnalyticDomain, PlanarCurve


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(cli.ValidationError):
            cli.RunConfig.from_dict({"subcommand": "entropy", "banana": 1})

    def test_unknown_subcommand_rejected(self):
        with pytest.raises(cli.ValidationError):
            cli.RunConfig.from_dict({"subcommand": "frobnicate"})

    @pytest.mark.parametrize(
        "field,value",
        [("tau", 0.0), ("h", -1.0), ("dt_scale", 2.0), ("frac", 0.96),
         ("snapshots", 1), ("budget", 10), ("vertices", 4), ("tol", 0.0)],
    )
    def test_bad_values_rejected(self, field, value):
        with pytest.raises(cli.ValidationError):
            cli.RunConfig.from_dict({"subcommand": "entropy", field: value})

    def test_round_trip(self):
        cfg = cli.RunConfig.from_dict({"subcommand": "flow", "frac": 0.3})
        assert cli.RunConfig.from_dict(cfg.to_dict()) == cfg


class TestSpecParsers:
    def test_parse_domain_disk(self):
        d = cli.parse_domain("disk:2")
        assert isinstance(d, PlanarCurve)
        assert d.enclosed_area() == pytest.approx(4 * np.pi, rel=1e-4)

    def test_parse_domain_ellipse(self):
        d = cli.parse_domain("ellipse:2:1")
        assert d.enclosed_area() == pytest.approx(2 * np.pi, rel=1e-4)

    def test_parse_domain_analytic(self):
        d = cli.parse_domain("analytic:slab:1.5:2")
        assert isinstance(d, AnalyticDomain)
        assert d.variant == "slab"

    def test_parse_domain_unknown(self):
        with pytest.raises(cli.ValidationError):
            cli.parse_domain("torus:1")
        with pytest.raises(cli.ValidationError):
            cli.parse_domain("analytic:contains")

    def test_parse_radii(self):
        assert cli.parse_radii("geometric:4,32") == [4.0, 8.0, 16.0, 32.0]
        assert cli.parse_radii("linear:1,3,3") == [1.0, 2.0, 3.0]
        assert cli.parse_radii("list:5,7") == [5.0, 7.0]
        with pytest.raises(cli.ValidationError):
            cli.parse_radii("fibonacci:1,8")

    def test_parse_centers(self):
        assert cli.parse_centers("origin", [1.0]) == [(0.0, 0.0)]
        assert cli.parse_centers("grim_reaper_schedule", [2.0]) == [(0.0, 4.0)]
        assert cli.parse_centers("list:1,2,3,4", []) == [(1.0, 2.0), (3.0, 4.0)]
        with pytest.raises(cli.ValidationError):
            cli.parse_centers("list:1,2,3", [])
        with pytest.raises(cli.ValidationError):
            cli.parse_centers("everywhere", [])


class TestFormatting:
    def test_float_round_trip(self):
        for x in (np.pi, 1.0 / 3.0, 1e-300, -0.0):
            assert float(cli._fmt(x)) == x

    def test_non_floats(self):
        assert cli._fmt(True) == "True"
        assert cli._fmt(7) == "7"
        assert cli._fmt("tag") == "tag"
        assert cli._fmt(None) == "None"

    def test_hash_stable_under_key_order(self):
        a = cli._hash_obj({"x": 1.0, "y": 2.0})
        b = cli._hash_obj({"y": 2.0, "x": 1.0})
        assert a == b


class TestPipelines:
    def test_entropy_run_and_exit_code(self, tmp_path, capsys):
        rc = cli.main([
            "entropy", "--domain", "disk:1", "--h", "0.08", "--beta", "radial",
            "--out", str(tmp_path), "--tag", "t1",
        ])
        assert rc == cli.EXIT_OK
        payload = json.loads((tmp_path / "t1" / "entropy.json").read_text())
        assert float(payload["mu"]) == pytest.approx(np.log(1 - np.exp(-0.5)), abs=5e-3)
        manifest = json.loads((tmp_path / "t1" / "manifest.json").read_text())
        assert manifest["config"]["subcommand"] == "entropy"
        assert set(manifest["versions"]) == {"python", "numpy", "entropylab"}
        assert "entropy.csv" in manifest["outputs"]

    def test_validation_exit_code(self, capsys):
        assert cli.main(["entropy", "--tau", "-1"]) == cli.EXIT_VALIDATION
        assert cli.main(["entropy", "--domain", "nope:1"]) == cli.EXIT_VALIDATION

    def test_collapse_rerun_byte_identical(self, tmp_path, capsys):
        args = [
            "collapse", "--domain", "analytic:slab:1:2",
            "--radii", "geometric:4,16", "--budget", "10000",
            "--out", str(tmp_path), "--tag", "c1",
        ]
        assert cli.main(args) == cli.EXIT_OK
        first = (tmp_path / "c1" / "collapse.csv").read_bytes()
        assert cli.main(args) == cli.EXIT_OK
        assert (tmp_path / "c1" / "collapse.csv").read_bytes() == first

    def test_flow_then_cached_rerun(self, tmp_path, capsys):
        args = [
            "flow", "--domain", "disk:1", "--frac", "0.3", "--snapshots", "4",
            "--vertices", "128", "--out", str(tmp_path), "--tag", "f1",
        ]
        assert cli.main(args) == cli.EXIT_OK
        cache_dir = tmp_path / "f1" / "cache"
        entries = sorted(os.listdir(cache_dir))
        assert len(entries) == 1 and entries[0].startswith("flow-")
        first = (tmp_path / "f1" / "flow.csv").read_bytes()
        assert cli.main(args) == cli.EXIT_OK
        assert (tmp_path / "f1" / "flow.csv").read_bytes() == first
        assert sorted(os.listdir(cache_dir)) == entries

    def test_logsobolev_run(self, tmp_path, capsys):
        rc = cli.main([
            "logsobolev", "--domain", "disk:1", "--h", "0.1", "--fields", "5",
            "--out", str(tmp_path), "--tag", "l1",
        ])
        assert rc == cli.EXIT_OK
        payload = json.loads((tmp_path / "l1" / "logsobolev.json").read_text())
        assert payload["violations"] == 0


class TestPlotData:
    def test_emit_columns_and_missing_note(self, tmp_path):
        class Report:
            COLUMNS = ("a", "b", "c")

            def column(self, name):
                if name == "c":
                    raise KeyError(name)
                return np.array([1.0, 2.0])

        path = tmp_path / "out.dat"
        cli.emit_plot_data(Report(), str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "# a b"
        assert lines[1] == "# omitted (not computed): c"
        assert len(lines) == 4
        assert lines[2].split() == ["1", "1"]
