"""Tests for dimerfold.core.logging module.

Version: 0.1.0
"""

from dimerfold.core.logging import (
    bind_context,
    clear_context,
    configure_logging,
    get_context,
    get_logger,
    logging_context,
    reset_logging,
    run_context,
    unbind_context,
)


class TestGetLogger:
    """Tests for get_logger function."""

    def setup_method(self):
        """Reset logging before each test."""
        reset_logging()
        configure_logging()

    def teardown_method(self):
        """Reset logging after each test."""
        reset_logging()

    def test_logger_has_log_methods(self):
        """Test that logger has standard logging methods."""
        logger = get_logger("dimerfold.capabilities.sampler")
        for method in ("debug", "info", "warning", "error"):
            assert hasattr(logger, method)

    def test_logging_goes_to_stderr(self, capsys):
        """Test events are written to stderr, keeping stdout clean."""
        reset_logging()
        configure_logging(level="INFO", cache_logger=False)
        get_logger("test").info("moments_estimated", mean_o=0.25)
        captured = capsys.readouterr()
        assert "moments_estimated" in captured.err
        assert "moments_estimated" not in captured.out


class TestContextManagement:
    """Tests for context management functions."""

    def teardown_method(self):
        """Clear context after each test."""
        clear_context()

    def test_bind_and_unbind(self):
        """Test bind_context and unbind_context."""
        bind_context(command="moments", temp="x")
        unbind_context("temp")
        assert get_context() == {"command": "moments"}

    def test_clear_context(self):
        """Test clear_context removes all context."""
        bind_context(seed=1)
        clear_context()
        assert get_context() == {}


class TestLoggingContext:
    """Tests for logging_context and run_context."""

    def teardown_method(self):
        """Clear context after each test."""
        clear_context()

    def test_logging_context_scoped(self):
        """Test keys exist only inside the block."""
        with logging_context(model="folded"):
            assert get_context()["model"] == "folded"
        assert "model" not in get_context()

    def test_logging_context_keeps_outer_keys(self):
        """Test only the block's keys are removed."""
        bind_context(command="trace")
        with logging_context(alpha=0.25):
            pass
        assert get_context() == {"command": "trace"}

    def test_run_context_binds_run_fields(self):
        """Test run_context binds command, seed and run id."""
        with run_context("identity", seed=3, run_id="abc") as rid:
            assert rid == "abc"
            ctx = get_context()
            assert ctx["command"] == "identity"
            assert ctx["seed"] == 3
            assert ctx["run_id"] == "abc"
        assert get_context() == {}

    def test_run_context_generates_id(self):
        """Test a run id is generated when none is given."""
        with run_context("render") as rid:
            assert len(rid) == 12
