from pathlib import Path

import pytest

from glfem.cli.config import parse_config, parse_overrides, read_config_file, to_config
from glfem.core.config import Settings
from glfem.core.exceptions import ConfigError
from glfem.schemas.run import RunConfig, parse_complex


def make_settings(**overrides) -> Settings:
    base_settings = {
        "LOG_LEVEL": "INFO",
        "OUTPUT_DIR": "results",
    }
    base_settings.update(overrides)
    return Settings(**base_settings)


def make_config(**overrides) -> RunConfig:
    values = {"command": "minimize", "kappa": "8"}
    values.update({key: str(value) for key, value in overrides.items()})
    return to_config(values)


def test_log_level_is_normalized_to_upper_case():
    settings = make_settings(LOG_LEVEL="debug")

    assert settings.LOG_LEVEL == "DEBUG"


def test_invalid_log_level_raises_value_error():
    with pytest.raises(ValueError):
        make_settings(LOG_LEVEL="chatty")


def test_non_positive_tolerance_is_rejected():
    with pytest.raises(ValueError, match="GAP_MIN"):
        make_settings(GAP_MIN=0.0)


def test_defaults_are_resolved_for_a_minimal_run():
    config = make_config(n=64)

    assert config.tau == "auto"
    assert config.resolved_tau == pytest.approx(1.0 / 64.0)
    assert config.delta_gf == 1e-9
    assert config.delta_newton == 1e-12
    assert config.potential == "paper"
    assert config.initial_constants == [0.8 + 0.6j]
    assert config.quad_degree == 5


def test_tau_auto_is_one_for_kappa_zero():
    assert make_config(kappa=0).resolved_tau == 1.0


def test_explicit_tau_is_kept():
    assert make_config(tau="0.01").resolved_tau == 0.01


def test_power_of_two_chain_is_accepted():
    config = make_config(command="converge", levels="16,32,64", n_ref=128)

    assert config.levels == [16, 32, 64]
    assert config.n_ref == 128


def test_levels_outside_a_power_of_two_chain_are_rejected():
    with pytest.raises(ConfigError) as excinfo:
        make_config(command="converge", levels="16,48", n_ref=96)

    assert excinfo.value.key == "levels"


def test_reference_mesh_must_refine_the_finest_level():
    with pytest.raises(ConfigError) as excinfo:
        make_config(command="converge", levels="16,32", n_ref=96)

    assert excinfo.value.key == "n_ref"


def test_unknown_key_is_reported_by_name():
    with pytest.raises(ConfigError) as excinfo:
        make_config(colour="blue")

    assert excinfo.value.key == "colour"


def test_type_mismatch_is_reported_by_name():
    with pytest.raises(ConfigError) as excinfo:
        make_config(n="many")

    assert excinfo.value.key == "n"


def test_unsupported_quadrature_degree_is_rejected():
    with pytest.raises(ConfigError) as excinfo:
        make_config(quad_degree=3)

    assert excinfo.value.key == "quad_degree"


def test_missing_initial_file_is_rejected(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        make_config(initial=str(tmp_path / "missing.txt"))

    assert excinfo.value.key == "initial"


def test_several_initial_constants_are_parsed():
    config = make_config(initial="0.8+0.6i; 1; -0.6+0.8i")

    assert config.initial_file is None
    assert config.initial_constants == [0.8 + 0.6j, 1 + 0j, -0.6 + 0.8j]


def test_parse_complex_accepts_i_and_j():
    assert parse_complex("0.8+0.6i") == parse_complex("0.8+0.6j") == 0.8 + 0.6j


def test_config_file_is_read_and_flags_override_it(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# kappa 8 study\n"
        "command = converge\n"
        "kappa = 8\n"
        "levels = 16,32,64\n"
        "n_ref = 128   # reference mesh\n",
        encoding="utf-8",
    )

    config = parse_config(["--config", str(path), "--kappa", "4", "--n_ref=256"])

    assert config.command == "converge"
    assert config.kappa == 4.0
    assert config.levels == [16, 32, 64]
    assert config.n_ref == 256


def test_positional_command_overrides_the_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("command=converge\nkappa=8\n", encoding="utf-8")

    config = parse_config(["minimize", "--config", str(path)])

    assert config.command == "minimize"


def test_malformed_config_line_raises(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("kappa 8\n", encoding="utf-8")

    with pytest.raises(ConfigError):
        read_config_file(path)


def test_override_without_value_raises():
    with pytest.raises(ConfigError) as excinfo:
        parse_overrides(["--kappa"])

    assert excinfo.value.key == "kappa"


def test_missing_kappa_is_reported():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["minimize"])

    assert excinfo.value.key == "kappa"


def test_output_dir_becomes_a_path(tmp_path):
    config = make_config(output_dir=tmp_path)

    assert isinstance(config.output_dir, Path)
    assert config.output_dir == tmp_path


def test_overrides_apply_when_the_command_comes_from_the_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("command = minimize\nkappa = 2\nn = 8\n", encoding="utf-8")

    config = parse_config(["--config", str(path), "--n", "4"])

    assert config.command == "minimize"
    assert config.n == 4


def test_unknown_command_is_a_config_error():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["relax", "--kappa", "2"])

    assert excinfo.value.key == "command"


def test_config_flag_without_a_path_is_a_config_error():
    with pytest.raises(ConfigError):
        parse_config(["minimize", "--config"])
