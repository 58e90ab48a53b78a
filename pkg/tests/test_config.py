"""Config text: parsing, validation messages, canonical round trip."""

import pytest

from fracdg.config import ConfigError, RunConfig, config_hash, parse_config, serialize

MINIMAL = """
[problem]
name = two_mode
alpha = -0.7
"""

FULL = """
# comment line
[problem]
name = two_mode
alpha = -0.7          # trailing comment
diffusivity = 1.0

[mesh]
family = geometric
T = 2.0
T_1 = 1.0
delta = 0.24
L = 7
mu = 1.0

[backend]
type = fem
elements = 32
degree = 2

[study]
m = 60
deltas = 0.21, 0.24, 0.27
Ls = 3, 4, 5

[diagnostics]
stability_report = true
seed = 11

[expect]
error_max = 5e-7
rate_min = 2.0
"""


def test_parse_minimal_fills_defaults():
    config = parse_config(MINIMAL)
    assert config.alpha == -0.7
    assert config.problem == "two_mode"
    assert config.family == "graded"
    assert config.backend == "spectral"
    assert config.m == 10
    assert config.Ns == ()
    assert config.expect == {}


def test_parse_full():
    config = parse_config(FULL)
    assert config.family == "geometric"
    assert config.T == 2.0 and config.T_1 == 1.0
    assert config.deltas == (0.21, 0.24, 0.27)
    assert config.Ls == (3, 4, 5)
    assert config.backend == "fem" and config.elements == 32
    assert config.stability_report is True and config.seed == 11
    assert config.expect == {"error_max": 5e-7, "rate_min": 2.0}


def test_round_trip_identity():
    for text in (MINIMAL, FULL):
        config = parse_config(text)
        again = parse_config(serialize(config))
        assert again == config
        assert serialize(again) == serialize(config)


def test_hash_separates_configs():
    base = parse_config(MINIMAL)
    other = parse_config(MINIMAL.replace("-0.7", "-0.5"))
    assert config_hash(base) != config_hash(other)
    assert config_hash(base) == config_hash(parse_config(serialize(base)))
    assert len(config_hash(base)) == 12


@pytest.mark.parametrize(
    "snippet,fragment",
    [
        ("[problem]\nname = two_mode", "alpha"),
        ("[problem]\nalpha = -1.5", "alpha must lie in (-1, 0)"),
        ("[problem]\nalpha = 0.3", "alpha must lie in (-1, 0)"),
        ("[problem]\nalpha = -0.5\n[mesh]\ngamma = 0.9", "gamma must be >= 1"),
        ("[problem]\nalpha = -0.5\n[mesh]\ndelta = 1.0", "delta must lie in (0, 1)"),
        ("[problem]\nalpha = -0.5\n[mesh]\np = 0", "p must be >= 1"),
        ("[problem]\nalpha = -0.5\n[study]\nm = 0", "m must be >= 1"),
        ("[problem]\nalpha = -0.5\n[study]\nNs = 4, -2", "Ns entries must be >= 1"),
        ("[problem]\nalpha = -0.5\n[mesh]\nwidth = 1", "mesh.width"),
        ("[problem]\nalpha = -0.5\n[grid]\nN = 4", "unknown section"),
        ("[problem]\nalpha = -0.5\n[mesh]\nN = 4.5", "N must be an integer"),
        ("[problem]\nalpha = -0.5\n[diagnostics]\nseed = maybe", "seed must be an integer"),
        ("[problem]\nalpha = -0.5\n[diagnostics]\nstability_report = yep", "true or false"),
        ("alpha = -0.5", "outside any section"),
        ("[problem]\nalpha -0.5", "key = value"),
        ("[problem]\nalpha = -0.5\n[expect]\nbudget = 3", "expect key"),
        ("[problem]\nname = other_problem\nalpha = -0.5", "problem must be two_mode"),
        ("[problem]\nalpha = -0.5\n[backend]\ntype = exact", "spectral or fem"),
    ],
)
def test_validation_messages(snippet, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(snippet)
    assert fragment in str(info.value)


def test_serialize_skips_empty_lists():
    text = serialize(parse_config(MINIMAL))
    assert "gammas" not in text
    assert "alpha = -0.7" in text
    assert "[expect]" not in text


def test_direct_construction_validates_via_parse():
    config = RunConfig(alpha=-0.5, deltas=(0.2, 0.3))
    assert parse_config(serialize(config)) == config
