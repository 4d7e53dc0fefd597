"""
Tests for configuration layering, snapshots, error payloads and logging
"""
import json
import logging
import math

import pytest

from vtlab.config import (
    RunConfig,
    build_config,
    get_settings,
    load_config,
    parse_overrides,
    read_snapshot,
    snapshot_text,
    write_snapshot,
)
from vtlab.core import logging_config
from vtlab.core.logging_config import (
    JsonLineFormatter,
    LogCategory,
    LogLevel,
    TerminalFormatter,
    bind_run,
    get_logger,
    logging_dict,
)
from vtlab.error_handling import (
    ConfigValidationError,
    DivergenceError,
    DivergenceGuard,
    InsufficientDataError,
    MissingInputError,
    NumericFaultError,
    RejectedInputError,
    StandardErrorResponse,
)


class TestConfigLayers:
    """Defaults, files and overrides"""

    def test_defaults(self):
        cfg = build_config()
        assert cfg == RunConfig()
        assert cfg.oracle.max_index == 10
        assert cfg.trpo.max_kl == 0.01
        assert (cfg.anc.rho, cfg.anc.mu) == (1.0, 0.01)

    def test_later_layers_win(self):
        cfg = build_config({"seed": 1, "gansd.alpha": 0.5}, {"seed": 2})
        assert cfg.seed == 2
        assert cfg.gansd.alpha == 0.5

    def test_config_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('seed = 4\n[mail]\niterations = 7\n', encoding="utf-8")
        cfg = load_config(path, {"mail.iterations": 9})
        assert (cfg.seed, cfg.mail.iterations) == (4, 9)

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("seed = = 4\n", encoding="utf-8")
        with pytest.raises(ConfigValidationError):
            load_config(path)

    @pytest.mark.parametrize("flat,bad_key", [
        ({"gansd.bogus": 1}, "gansd.bogus"),
        ({"trpo.max_kl": -1.0}, "trpo.max_kl"),
        ({"bench.bc_sampler": "oracle"}, "bench.bc_sampler"),
        ({"drift_level": 2.0}, "drift_level"),
    ])
    def test_bad_values_name_their_keys(self, flat, bad_key):
        with pytest.raises(ConfigValidationError) as exc_info:
            build_config(flat)
        assert bad_key in exc_info.value.bad_keys

    def test_parse_overrides(self):
        flat = parse_overrides(["seed=5", "gansd.hidden=[16, 16]", "anc.enabled=false", "bench.bc_sampler=empirical"])
        assert flat == {"seed": 5, "gansd.hidden": [16, 16], "anc.enabled": False, "bench.bc_sampler": "empirical"}
        with pytest.raises(ConfigValidationError):
            parse_overrides(["seed"])

    def test_environment_settings(self, monkeypatch):
        monkeypatch.setenv("VTLAB_OUT", "/tmp/elsewhere")
        monkeypatch.setenv("VTLAB_STRUCTURED_LOGS", "true")
        settings = get_settings()
        assert settings.out == "/tmp/elsewhere"
        assert settings.structured_logs is True


class TestSnapshots:
    """Materialized configuration files"""

    def test_snapshot_reloads_to_the_same_hash(self, tiny_cfg, tmp_path):
        cfg = tiny_cfg.model_copy(update={"drift_level": 0.25})
        path = write_snapshot(cfg, tmp_path / "config.snapshot")
        assert read_snapshot(path).config_hash() == cfg.config_hash()

    def test_snapshot_is_sorted_and_complete(self, tiny_cfg):
        lines = snapshot_text(tiny_cfg).splitlines()
        keys = [line.split(" = ")[0] for line in lines]
        assert keys == sorted(keys)
        assert "trpo.init_log_std" in keys
        assert 'bench.bc_sampler = "gansd"' in lines

    def test_hash_tracks_values(self, tiny_cfg):
        assert tiny_cfg.config_hash() != tiny_cfg.model_copy(update={"seed": 9}).config_hash()

    def test_missing_snapshot(self, tmp_path):
        with pytest.raises(RejectedInputError):
            read_snapshot(tmp_path / "config.snapshot")


class TestErrors:
    """Exception hierarchy and JSON payloads"""

    def test_missing_input_message(self):
        exc = MissingInputError("data/log.jsonl", "gen-data")
        assert exc.message == "missing input data/log.jsonl; run 'gen-data' first"
        assert isinstance(exc, FileNotFoundError)

    def test_hierarchy(self):
        assert issubclass(InsufficientDataError, RejectedInputError)
        assert issubclass(RejectedInputError, ValueError)
        assert issubclass(DivergenceError, NumericFaultError)
        assert NumericFaultError("overflow", layer=2).details == {"layer": 2}

    def test_payload_keys(self):
        line = StandardErrorResponse.from_exception(ConfigValidationError({"seed": "not an int"})).to_json_line()
        payload = json.loads(line)
        assert list(payload) == sorted(["success", "error", "message", "category", "severity", "details", "suggestions"])
        assert payload["category"] == "config_validation"
        assert payload["details"] == {"bad_keys": {"seed": "not an int"}}

    def test_payload_of_a_foreign_exception(self):
        payload = json.loads(StandardErrorResponse.from_exception(KeyError("x")).to_json_line())
        assert payload["error"] == "KeyError"
        assert payload["category"] == "unknown_error"


class TestDivergenceGuard:
    """Non-finite diagnostics abort training"""

    def test_finite_values_pass(self):
        guard = DivergenceGuard("trpo")
        guard.check(0, loss=0.5, kl=0.01)
        assert guard.get_stats()["last_finite"] == {"loss": 0.5, "kl": 0.01}

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_raises(self, bad):
        guard = DivergenceGuard("mail")
        guard.check(0, loss=1.0)
        with pytest.raises(DivergenceError) as exc_info:
            guard.check(1, loss=bad)
        assert exc_info.value.details["iteration"] == 1
        assert exc_info.value.details["last_finite"] == {"loss": 1.0}


class TestLogging:
    """Contextual records and their formatters"""

    @pytest.fixture(autouse=True)
    def fresh_run_context(self, monkeypatch):
        monkeypatch.setattr(logging_config, "_run_context", logging_config.LogContext())
        # the command line installs handlers with propagation off
        monkeypatch.setattr(logging.getLogger("vtlab"), "propagate", True)

    def test_records_carry_run_and_stage(self, caplog):
        bind_run("r-7", seed=7)
        logger = get_logger("vtlab.tests", LogCategory.BENCH)
        with caplog.at_level("DEBUG", logger="vtlab.tests"):
            logger.training_debug("step", operation="train_mail", iteration=3, disc_loss=0.69)
        record = caplog.records[-1]
        assert record.context.run_id == "r-7"
        assert record.context.category == LogCategory.TRAINING
        payload = json.loads(JsonLineFormatter().format(record))
        assert payload["run_id"] == "r-7"
        assert payload["seed"] == 7
        assert (payload["operation"], payload["iteration"]) == ("train_mail", 3)
        assert payload["disc_loss"] == 0.69
        assert payload["msg"] == "step"

    def test_per_call_seed_wins(self, caplog):
        bind_run("r-1", seed=1)
        with caplog.at_level("INFO", logger="vtlab.tests"):
            get_logger("vtlab.tests").bench_info("seed done", operation="exp_anc", seed=4)
        assert caplog.records[-1].context.seed == 4

    def test_terminal_line(self, caplog):
        with caplog.at_level("INFO", logger="vtlab.tests"):
            get_logger("vtlab.tests").persistence_info("wrote report", operation="write_report")
        line = TerminalFormatter(color=False).format(caplog.records[-1])
        assert "persistence/write_report" in line
        assert line.endswith("wrote report")

    def test_exception_is_rendered(self, caplog):
        try:
            raise KeyError("weights")
        except KeyError as exc:
            with caplog.at_level("ERROR", logger="vtlab.tests"):
                get_logger("vtlab.tests").error("load failed", exception=exc)
        payload = json.loads(JsonLineFormatter().format(caplog.records[-1]))
        assert payload["exc_type"] == "KeyError"

    def test_file_handler_only_with_a_path(self, tmp_path):
        assert "file" not in logging_dict(LogLevel.INFO)["handlers"]
        config = logging_dict(LogLevel.DEBUG, structured=True, log_file=str(tmp_path / "run.log"))
        assert config["handlers"]["console"]["formatter"] == "json"
        assert config["loggers"]["vtlab"]["handlers"] == ["console", "file"]
