import os

import hypothesis
import numpy as np
import pytest

from decaylab.core.feedback import linear_feedback, power_feedback
from decaylab.core.settings import reset_settings_cache
from decaylab.models.builder import build_model
from decaylab.models.systems import SemiDiscreteSystem
from decaylab.schemas.config import ModelSection

np.seterr(all="warn")

hypothesis.settings.register_profile("dev", max_examples=25, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None, derandomize=True)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    for key in list(os.environ):
        if key.startswith("DECAYLAB_"):
            monkeypatch.delenv(key)
    reset_settings_cache()
    yield
    reset_settings_cache()


@pytest.fixture
def scalar_system():
    """u' + u = 0: A = 0, B = 1, M = 1, F = id."""
    return SemiDiscreteSystem.from_matrices(np.zeros((1, 1)), np.ones((1, 1)), feedback=linear_feedback())


@pytest.fixture
def wave_cubic():
    spec = ModelSection(kind="wave1d", n=24)
    return build_model(spec, power_feedback(3.0))


@pytest.fixture
def write_config(tmp_path):
    def write(lines, name="run.cfg"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path
    return write


@pytest.fixture
def wave_cubic_lines():
    return [
        "model.kind = wave1d",
        "model.n = 16",
        "model.damping.support = 0.2:0.5",
        "feedback.name = power",
        "feedback.p = 3",
        "run.T_final = 0.5",
    ]
