import math

import pytest

from nvgyro import (
    ConfigError,
    build_config,
    default_config,
    dq_splitting,
    load_config,
    load_constants,
)
from nvgyro.config import _parse_kv_text


FULL = """\
# full experiment configuration
[constants]
gamma_e = 2.8025e6
gamma_n = 307.7
D = 2.870e9
A_perp = 2.62e6
Q = 4.9425e6

[environment]
B = 482.0
delta_Q = 0.0

[sequence]
tau_wp = 1.4e-3
cycle_period = 7e-3
pump_fidelity = 0.98
rf_gradient = 0.5:0.9, 0.5:1.1
phase_table = 0,0; 3.141592653589793,0; 3.141592653589793,3.141592653589793; 0,3.141592653589793
t2_dq = 1.95e-3
phase_reference = resonant
dq_detuning = 2000.0

[detector]
V0 = 15.0
contrast = 0.015
balanced = true

[noise]
white_sigma = 1e-6

[fringes]
tau_min = 1e-6
tau_max = 5e-3
points = 500

[run]
seed = 42
"""


class TestParser:
    def test_full_round_trip(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(FULL)
        cfg = load_config(path)
        assert cfg.seed == 42
        assert cfg.sequence.tau_wp == 1.4e-3
        assert cfg.sequence.pump_fidelity == 0.98
        assert cfg.sequence.rf_gradient == ((0.5, 0.9), (0.5, 1.1))
        assert cfg.sequence.noise.white_sigma == 1e-6
        assert cfg.fringes.points == 500
        assert cfg.environment.B == 482.0
        # resonant mode with 2 kHz injection
        assert cfg.fringe_frequency() == pytest.approx(2000.0, abs=1e-6)

    def test_unknown_key_is_hard_error_with_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[constants]\ngamma_e = 2.8e6\ngamma_x = 1.0\n")
        with pytest.raises(ConfigError, match=r"bad\.cfg:3.*gamma_x"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[magnets]\nstrength = 1\n")
        with pytest.raises(ConfigError, match=r"\[magnets\]"):
            load_config(path)

    def test_key_before_section_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("B = 482\n")
        with pytest.raises(ConfigError, match="before any"):
            load_config(path)

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            _parse_kv_text("[run]\nseed = 1\nseed = 2\n", "x")

    def test_bad_number_diagnostic(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[environment]\nB = fourhundred\n")
        with pytest.raises(ConfigError, match=r"bad\.cfg:2"):
            load_config(path)

    def test_comments_and_blank_lines(self):
        text = "# top\n\n[run]\nseed = 7  # inline\n; another\n"
        cfg = build_config(_parse_kv_text(text, "t"), origin="t")
        assert cfg.seed == 7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="key = value"):
            _parse_kv_text("[run]\njust some words\n", "x")


class TestDefaults:
    def test_default_config_is_reset_mode(self):
        cfg = default_config()
        assert cfg.sequence.frame is None
        assert cfg.fringe_frequency() == pytest.approx(
            dq_splitting(482.0, cfg.constants)
        )

    def test_default_tau_wp_snaps_to_null(self):
        cfg = default_config()
        f = cfg.fringe_frequency()
        assert abs(math.cos(2 * math.pi * f * cfg.sequence.tau_wp)) < 1e-6
        assert cfg.sequence.tau_wp == pytest.approx(1.428e-3, rel=1e-3)

    def test_explicit_tau_wp_respected(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("[sequence]\ntau_wp = 1.111e-3\n")
        assert load_config(path).sequence.tau_wp == 1.111e-3

    def test_mapping_is_json_ready(self):
        import json
        payload = json.dumps(default_config().to_mapping())
        assert "gamma_e" in payload

    def test_dq_detuning_requires_resonant(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("[sequence]\ndq_detuning = 100.0\n")
        with pytest.raises(ConfigError, match="resonant"):
            load_config(path)

    def test_explicit_refs_must_pair(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("[sequence]\nf1_ref = 5.089e6\n")
        with pytest.raises(ConfigError, match="together"):
            load_config(path)


class TestConstantsProfile:
    def test_bare_key_value_file(self, tmp_path):
        path = tmp_path / "constants.cfg"
        path.write_text(
            "gamma_e = 2.8025e6\ngamma_n = 307.7\nD = 2.870e9\n"
            "A_perp = 2.62e6\nQ = 4.9425e6\n"
        )
        c = load_constants(path)
        assert c.gamma_n == 307.7
        assert dq_splitting(482.0, c) == pytest.approx(293.73e3, rel=1e-4)

    def test_sectioned_file(self, tmp_path):
        path = tmp_path / "constants.cfg"
        path.write_text("[constants]\ngamma_n = 310.0\n")
        assert load_constants(path).gamma_n == 310.0

    def test_unknown_constant_rejected(self, tmp_path):
        path = tmp_path / "constants.cfg"
        path.write_text("gamma_q = 1.0\n")
        with pytest.raises(ConfigError, match="gamma_q"):
            load_constants(path)
