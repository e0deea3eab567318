"""Configuration parsing, orchestration, emission, determinism."""

import io
import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from stabilize.cli import (
    EXIT_IO,
    EXIT_NECESSITY,
    EXIT_NOT_UNIMODULAR,
    EXIT_SUCCESS,
    RunConfig,
    emit_config,
    main,
    parse_config,
    read_field_dump,
    report_json,
    run,
)
from stabilize.errors import ConfigError


def write_zeros(path, zeros):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# zero set\n")
        for a in zeros:
            fh.write(f"{a.real} {a.imag}\n")


@pytest.fixture
def io_pair(tmp_path):
    f1 = tmp_path / "f1.txt"
    f2 = tmp_path / "f2.txt"
    write_zeros(f1, [1j, 3j])
    write_zeros(f2, [2j])
    return str(f1), str(f2)


class TestConfig:
    def test_minimal_defaults(self, io_pair):
        f1, f2 = io_pair
        cfg = parse_config(json.dumps({"f1": f1, "f2": f2, "epsilon": 0.1}))
        assert cfg.resolution == 512
        assert cfg.delta_prime is None
        assert cfg.tolerances["residual"] == 1e-6
        assert cfg.emit_report and not cfg.emit_svg

    def test_round_trip(self, io_pair):
        f1, f2 = io_pair
        cfg = parse_config(json.dumps(
            {"f1": f1, "f2": f2, "epsilon": 0.2, "resolution": 256,
             "seed": 7, "emit": {"svg": True}}))
        again = parse_config(emit_config(cfg))
        assert again == cfg

    def test_resolution_range(self, io_pair):
        f1, f2 = io_pair
        with pytest.raises(ConfigError):
            parse_config(json.dumps(
                {"f1": f1, "f2": f2, "epsilon": 0.1, "resolution": 100}))

    def test_missing_field(self):
        with pytest.raises(ConfigError):
            parse_config(json.dumps({"f1": "a", "epsilon": 0.1}))

    def test_unknown_field(self, io_pair):
        f1, f2 = io_pair
        with pytest.raises(ConfigError):
            parse_config(json.dumps(
                {"f1": f1, "f2": f2, "epsilon": 0.1, "spam": 1}))

    def test_bad_json(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")


class TestRun:
    def test_success_exit_zero(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"))
        code, report, _ = run(cfg, stream=io.StringIO())
        assert code == EXIT_SUCCESS
        assert report.status == "success"
        assert os.path.exists(tmp_path / "out" / "report.json")

    def test_necessity_exit_two(self, tmp_path):
        f1 = tmp_path / "f1.txt"
        f2 = tmp_path / "f2.txt"
        write_zeros(f1, [2j])
        write_zeros(f2, [1j, 4j])
        cfg = RunConfig(str(f1), str(f2), 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"))
        code, report, _ = run(cfg, stream=io.StringIO())
        assert code == EXIT_NECESSITY
        assert report.diagnostics["violation_witnesses"]
        # construction stages never ran
        names = [s["stage"] for s in report.stages]
        assert "decomposition" not in names

    def test_common_zero_exit_three(self, tmp_path):
        f1 = tmp_path / "f1.txt"
        f2 = tmp_path / "f2.txt"
        write_zeros(f1, [1j])
        write_zeros(f2, [1j, 2j])
        cfg = RunConfig(str(f1), str(f2), 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"))
        code, report, _ = run(cfg, stream=io.StringIO())
        assert code == EXIT_NOT_UNIMODULAR

    def test_missing_file_exit_five(self, tmp_path):
        cfg = RunConfig(str(tmp_path / "nope.txt"), str(tmp_path / "no.txt"),
                        0.1)
        code, _, _ = run(cfg, stream=io.StringIO())
        assert code == EXIT_IO

    def test_unreachable_tolerance_exit_four(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"))
        cfg.tolerances = dict(cfg.tolerances, residual=1e-30)
        code, report, _ = run(cfg, stream=io.StringIO())
        assert code == 4
        assert report.status == "tolerance_failure"
        # earlier stage artifacts are intact and labeled
        names = [s["stage"] for s in report.stages]
        assert "decomposition" in names and "kappa" in names

    def test_autocompletion_reported(self, tmp_path):
        f1 = tmp_path / "f1.txt"
        f2 = tmp_path / "f2.txt"
        write_zeros(f1, [0.5 + 1j])       # partner missing on purpose
        write_zeros(f2, [3j])
        cfg = RunConfig(str(f1), str(f2), 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"))
        stream = io.StringIO()
        code, report, _ = run(cfg, stream=stream)
        assert "completed symmetric partner" in stream.getvalue()
        assert report.diagnostics["completed_zeros"]["f1"]

    def test_main_entry(self, io_pair, tmp_path):
        f1, f2 = io_pair
        code = main(["--f1", f1, "--f2", f2, "--epsilon", "0.1",
                     "--grid", "128", "--out", str(tmp_path / "o")])
        assert code == 0

    def test_main_requires_arguments(self, capsys):
        assert main([]) == EXIT_IO


class TestEmission:
    def test_svg_well_formed(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"), emit_svg=True)
        code, report, arts = run(cfg, stream=io.StringIO())
        svg_path = tmp_path / "out" / "geometry.svg"
        assert svg_path.exists()
        root = ET.parse(svg_path).getroot()
        assert root.tag.endswith("svg")
        kinds = {child.tag.split('}')[-1] for child in root.iter()}
        assert "circle" in kinds or "path" in kinds

    def test_field_dump_round_trip(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"), emit_fields=True)
        code, report, arts = run(cfg, stream=io.StringIO())
        path = tmp_path / "out" / "kappa.txt"
        assert path.exists()
        back = read_field_dump(path)
        assert np.abs(back.values - arts["kappa"].values).max() == 0.0

    def test_decomposition_dump_schema(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"), emit_fields=True)
        run(cfg, stream=io.StringIO())
        data = json.loads((tmp_path / "out" / "decomposition.json")
                          .read_text())
        for key in ("schema", "generations", "regions", "components",
                    "sigma1"):
            assert key in data

    def test_report_contains_diagnostic_keys(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"))
        _, report, _ = run(cfg, stream=io.StringIO())
        data = json.loads(report_json(report))
        assert data["schema"] == 1
        for key in ("delta", "epsilon", "delta_prime", "norms", "residual",
                    "status", "diagnostics"):
            assert key in data
        for key in ("sup_re_v", "closeness_sup", "treil_sum_max",
                    "intensity_lap", "intensity_d", "sup_lap_im2",
                    "dbar", "kappa", "interpolation", "verification",
                    "resolution", "axis_sign", "sigma1_intensity",
                    "origins_intensity"):
            assert key in data["diagnostics"], key
        for key in ("sup_g1", "sup_g2", "sup_g1_inv"):
            assert key in data["norms"]

    def test_status_line_only_when_no_emission(self, io_pair, tmp_path):
        f1, f2 = io_pair
        cfg = RunConfig(f1, f2, 0.1, resolution=128,
                        out_dir=str(tmp_path / "out"),
                        emit_report=False)
        stream = io.StringIO()
        code, _, _ = run(cfg, stream=stream)
        lines = [ln for ln in stream.getvalue().splitlines() if ln]
        assert len(lines) == 1 and lines[0].startswith("status:")


class TestDeterminism:
    def test_byte_identical_reports(self, io_pair, tmp_path):
        f1, f2 = io_pair
        texts = []
        for k in range(2):
            out = tmp_path / f"out{k}"
            cfg = RunConfig(f1, f2, 0.1, resolution=128, out_dir=str(out))
            run(cfg, stream=io.StringIO())
            texts.append((out / "report.json").read_bytes())
        assert texts[0] == texts[1]
