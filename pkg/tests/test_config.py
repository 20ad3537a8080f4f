import numpy as np
import pytest

from dynmod.config import ConfigError, load_config, loads_config
from dynmod.presets import load_preset, preset_names, preset_path

BASE = """\
name: demo
controller:
  kind: joint_direct
servo: {mode: pi_velocity, kp: 30.0, ki: 15.0}
outer:
  alpha_bar: 2.0
target:
  type: sinusoid
  units: deg
  offset: [36, 0, 0]
  sin_amp: [0, 36, 36]
  cos_amp: [-36, 0, 0]
  omega: pi
timing:
  dt_outer: 0.02
  duration: 1.0
"""


def test_nested_config():
    cfg = loads_config(BASE)
    assert cfg.name == "demo" and cfg.controller == "joint_direct"
    assert cfg.target.omega == pytest.approx(np.pi)
    np.testing.assert_allclose(cfg.target.offset, [np.pi / 5, 0, 0])


def test_dotted_keys_equal_nested():
    flat = BASE.replace("outer:\n  alpha_bar: 2.0\n", "outer.alpha_bar: 2.0\n")
    assert loads_config(flat).outer == loads_config(BASE).outer


def test_pi_expressions():
    cfg = loads_config(BASE + "state:\n  q0: [pi/6, pi/3, -5*pi/6]\n")
    np.testing.assert_allclose(cfg.q0, [np.pi / 6, np.pi / 3, -5 * np.pi / 6])


def test_degree_state():
    cfg = loads_config(BASE + "state:\n  units: deg\n  q0: [90, 0, -180]\n")
    np.testing.assert_allclose(cfg.q0, [np.pi / 2, 0, -np.pi])


def test_unknown_key_names_line():
    text = BASE.replace("  alpha_bar: 2.0\n", "  alpha_bar: 2.0\n  alpah: 1.0\n")
    with pytest.raises(ConfigError) as info:
        loads_config(text, "demo.yaml")
    assert info.value.key == "outer.alpah" and info.value.line == 7
    assert str(info.value).startswith("demo.yaml:7: outer.alpah: unknown key")


def test_bad_number_names_line():
    text = BASE.replace("dt_outer: 0.02", "dt_outer: fast")
    with pytest.raises(ConfigError) as info:
        loads_config(text, "demo.yaml")
    assert info.value.key == "timing.dt_outer" and info.value.line == BASE.splitlines().index("  dt_outer: 0.02") + 1


def test_expressions_cannot_call_functions():
    with pytest.raises(ConfigError):
        loads_config(BASE.replace("omega: pi", "omega: __import__('os')"))


def test_validation_error_is_anchored():
    text = BASE.replace("dt_outer: 0.02", "dt_outer: 0.0207")
    with pytest.raises(ConfigError) as info:
        loads_config(text, "demo.yaml")
    assert info.value.key == "timing.dt_outer" and "integer multiple" in str(info.value)


@pytest.mark.parametrize("text,key", [
    (BASE.replace("kind: joint_direct", "kind: magic"), "controller.kind"),
    (BASE.replace("type: sinusoid", "type: spiral"), "target.type"),
    (BASE.replace("dt_outer: 0.02", "dt_outer: 0.02\n  substeps: 2.5"), "timing.substeps"),
    (BASE + "monitor:\n  lyapunov: maybe\n", "monitor.lyapunov"),
])
def test_typed_fields(text, key):
    with pytest.raises(ConfigError) as info:
        loads_config(text)
    assert info.value.key == key


def test_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate"):
        loads_config(BASE + "outer.alpha_bar: 3.0\n")


def test_malformed_yaml():
    with pytest.raises(ConfigError, match="malformed YAML") as info:
        loads_config("name: [unclosed\n")
    assert info.value.line is not None


def test_empty_config():
    with pytest.raises(ConfigError, match="empty"):
        loads_config("")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize("name", preset_names())
def test_presets_load(name):
    cfg = load_preset(name)
    assert cfg.name == name
    assert preset_path(name).exists()


def test_preset_overrides():
    assert load_preset("fig3_filter_regulation", duration=1.0).duration == 1.0
    with pytest.raises(KeyError):
        preset_path("fig99")
