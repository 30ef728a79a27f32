import pytest

from sdlevy.rng import RngStream


@pytest.fixture
def make_stream():
    """Factory for reproducible streams; distinct calls get distinct ids."""
    counter = [0]

    def _make(seed=20240901):
        counter[0] += 1
        return RngStream(seed, stream_id=counter[0])

    return _make
