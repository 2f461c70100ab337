import math

import pytest

from densmap.config import SCHEMA, RunConfig, parse_override, parse_text
from densmap.errors import ConfigError


def test_defaults_cover_schema():
    cfg = RunConfig.build()
    assert set(cfg) == set(SCHEMA)
    assert cfg["grid.L"] == pytest.approx(2 * math.pi)
    assert cfg["inversion.cutoff"] == "auto"


def test_parse_text_comments_and_blank_lines():
    raw = parse_text("# header\n\ngrid.M = 32  # nodes\ngrid.boundary=dirichlet\n")
    assert raw == {"grid.M": "32", "grid.boundary": "dirichlet"}


@pytest.mark.parametrize("text", ["grid.M 32", "grid.M = 1\ngrid.M = 2"])
def test_parse_text_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_values_are_coerced():
    cfg = RunConfig.build({"grid.L": "2*pi", "grid.M": "128", "io.plots": "no",
                           "inversion.cutoff": "6", "inversion.window": "none",
                           "response.y": "10"})
    assert cfg["grid.L"] == pytest.approx(2 * math.pi)
    assert cfg["grid.M"] == 128
    assert cfg["io.plots"] is False
    assert cfg["inversion.cutoff"] == 6
    assert cfg["inversion.window"] is None
    assert cfg["response.y"] == 10


@pytest.mark.parametrize("key, value", [
    ("grid.bogus", "1"),
    ("grid.M", "many"),
    ("grid.M", "4"),
    ("grid.L", "-1"),
    ("grid.L", "inf"),
    ("grid.boundary", "neumann"),
    ("inversion.alpha", "1.5"),
    ("response.kappa", "1"),
    ("io.plots", "maybe"),
    ("particles.N", "3"),
])
def test_invalid_values(key, value):
    with pytest.raises(ConfigError):
        RunConfig.build({key: value})


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)


def test_load_with_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("grid.M = 32\ntime.T = 2\n", encoding="utf-8")
    cfg = RunConfig.load(path, ["time.T=3", "grid.boundary = dirichlet"])
    assert cfg["grid.M"] == 32 and cfg["time.T"] == 3.0 and cfg["grid.boundary"] == "dirichlet"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "absent.cfg")


def test_override_syntax():
    assert parse_override("a.b = c=d") == ("a.b", "c=d")
    with pytest.raises(ConfigError):
        parse_override("nokey")


def test_echo_is_sorted_and_complete():
    lines = RunConfig.build().echo().splitlines()
    assert len(lines) == len(SCHEMA)
    assert lines == sorted(lines)
