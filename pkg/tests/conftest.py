import os
import tempfile
from pathlib import Path

import pytest

# Create a temporary directory for logs during testing
test_log_dir = Path(tempfile.gettempdir()) / "qtransistor_test_logs"

# Set test environment before the app reads its settings
os.environ["LOG_DIR"] = str(test_log_dir)
os.environ["MAX_WORKERS"] = "2"
os.environ["BOOTSTRAP_RESAMPLES"] = "20"

from app.schemas import CircuitParams  # noqa: E402


@pytest.fixture
def params():
    """Measured device parameters"""
    return CircuitParams()


@pytest.fixture
def ideal_params():
    """Device parameters without decoherence"""
    return CircuitParams().without_decoherence()
