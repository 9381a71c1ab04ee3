import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bdspec.families import Charlier, Hahn, Krawtchouk, QHahn, QuantumQKrawtchouk

settings.register_profile("bdspec", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("bdspec")


# one representative per family, chosen inside the well-conditioned envelope
FINITE = [
    Krawtchouk(8, 0.3),
    Hahn(8, 1.5, 0.5),
    QHahn(8, 0.3, 0.4, 0.5),
    QuantumQKrawtchouk(8, 1.5 * 0.9**-8, 0.9),
]
ALL = FINITE + [Charlier(1.0)]


def family_id(f):
    return f.name


@pytest.fixture(params=FINITE, ids=family_id)
def finite_family(request):
    return request.param


@pytest.fixture(params=ALL, ids=family_id)
def any_family(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
