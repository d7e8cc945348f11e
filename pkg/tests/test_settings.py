import pytest
from pydantic import ValidationError

from stockshift.domain import SendRule
from stockshift.settings.schema import SettingsSchema, load_settings


def test_shipped_options_match_the_defaults(repo_config):
    assert load_settings(repo_config) == SettingsSchema()


def test_missing_file_gives_defaults(tmp_path):
    assert load_settings(tmp_path / "absent.toml") == SettingsSchema()
    assert load_settings(None) == SettingsSchema()


def test_partial_file(tmp_path):
    path = tmp_path / "options.toml"
    path.write_text('[stockshift.solver]\nsend_rule = "up_to_stock"\ndelta = 0.9\n\n[stockshift.packing]\nexact_threshold = 12\n')
    settings = load_settings(path).stockshift
    assert settings.solver.send_rule is SendRule.UP_TO_STOCK
    assert settings.packing.exact_threshold == 12
    assert settings.rounding.max_runs == 50


@pytest.mark.parametrize("line", ["delta = 1.5", "alpha = -1", 'send_rule = "sometimes"'])
def test_invalid_values(tmp_path, line):
    path = tmp_path / "options.toml"
    path.write_text(f"[stockshift.solver]\n{line}\n")
    with pytest.raises(ValidationError):
        load_settings(path)


def test_overrides_skip_unset_values():
    settings = SettingsSchema().stockshift
    config = settings.solver_config(alpha=5.0, delta=None, time_limit=None)
    assert config.alpha == 5.0
    assert config.delta == 1.0
    assert config.time_limit == 300.0
    assert settings.solve_limits(12.0).time_limit == 12.0
    assert settings.rounding_config().rng_seed == 0
    assert settings.rounding_config(9).rng_seed == 9


def test_shipped_scaling_factors(repo_config):
    factors = load_settings(repo_config).stockshift.bench.scaling_factors
    assert factors == [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 5.0, 10.0, 100.0]
