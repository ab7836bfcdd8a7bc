import numpy as np
import pytest

from reprocs.harness import ExperimentConfig

# A small two-change setup that runs in well under a second per trial.
TINY = {
    "preset": "desk",
    "t_max": 460,
    "model": {"n": 64, "r0": 4, "change_times": [41, 241], "c_new": [1, 1], "deleted": [[1], [0]]},
    "coefficients": {
        "existing": [[100.0, 100.0, 3.0, 1.0], [100.0, 3.0, 1.0], [100.0, 3.0, 1.0]],
        "gamma_new": 1.0,
        "ramp_steps": [3, 3],
        "ramp_width": 20,
        "gamma_star": 100.0,
    },
    "support": {"s": 3, "Delta": 10, "t_train": 40},
    "tracker": {"alpha": 20, "alpha_tilde": 40, "K": 3, "c_old": [1, 1], "clusters": [[1, 1, 2], [1, 1, 2]]},
}


@pytest.fixture
def tiny_config():
    def make(**kw):
        data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in TINY.items()}
        data.update(kw)
        return ExperimentConfig.from_dict(data)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_basis(rng, n, r):
    return np.linalg.qr(rng.standard_normal((n, r)))[0]
