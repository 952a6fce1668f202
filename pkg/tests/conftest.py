import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from signnet.data import SyntheticSpec, generate_synthetic_corpus
from signnet.nn import ModelConfig

settings.register_profile(
    "signnet", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("signnet")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_config():
    """Smallest config that still exercises multi-head splitting."""
    return ModelConfig(embed_dim=8, n_heads=2, n_encoder_layers=1, n_decoder_layers=1, ff_dim=12, dropout=0.0)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(SyntheticSpec(vocab_size=6, motif_len=(3, 5), seed=1), 8)


@pytest.fixture
def tiny_estimator_params():
    return dict(embed_dim=8, n_heads=2, n_encoder_layers=1, n_decoder_layers=1, ff_dim=16,
                dropout=0.0, batch_size=4, max_epochs=2)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", [])
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
