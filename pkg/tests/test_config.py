from __future__ import annotations

import pytest

from kgrag.config import ConfigError, RunConfig, load_config_file, resolve_config
from kgrag.reasoning import FeedbackMode


def write(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return p


class TestResolve:
    def test_defaults(self):
        cfg = resolve_config()
        assert cfg == RunConfig()
        assert (cfg.max_len, cfg.overlap, cfg.i_max, cfg.dedup_threshold) == (512, 64, 20, 0.2)

    def test_precedence(self, tmp_path):
        p = write(tmp_path, "beam_width = 5\ni_max = 7\n")
        cfg = resolve_config({"i_max": 3, "beam_width": None}, p)
        assert cfg.i_max == 3 and cfg.beam_width == 5

    def test_replay_implies_transport(self):
        assert resolve_config({"replay": "fx.jsonl"}).transport == "replay"

    def test_replay_transport_needs_path(self):
        with pytest.raises(ConfigError):
            resolve_config({"transport": "replay"})

    @pytest.mark.parametrize(
        "flags",
        [{"overlap": 600}, {"max_len": 0}, {"i_max": 0}, {"dedup_threshold": 1.5}, {"feedback_mode": "x"}, {"scorer": "x"}, {"graph_mode": "x"}],
    )
    def test_invalid(self, flags):
        with pytest.raises(ConfigError):
            resolve_config(flags)

    def test_wrong_type_from_file(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_config(None, write(tmp_path, 'i_max = "many"\n'))

    def test_loop_config(self):
        lc = resolve_config({"feedback_mode": "answer_driven", "enrich_k": 2}).loop_config()
        assert lc.feedback_mode is FeedbackMode.ANSWER_DRIVEN and lc.enrich_k == 2


class TestFile:
    def test_secrets_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="environment"):
            load_config_file(write(tmp_path, 'api_key = "sk-123"\n'))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(write(tmp_path, "beam = 3\n"))

    def test_tables_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(write(tmp_path, "[loop]\ni_max = 3\n"))

    def test_bad_toml_and_missing(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(write(tmp_path, "i_max = = 3\n"))
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.toml")
