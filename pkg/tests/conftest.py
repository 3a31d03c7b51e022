import numpy as np
import pytest


@pytest.fixture
def assert_spectrum_close():
    """Set-wise eigenvalue comparison, robust to ordering of near-ties."""

    def check(got, want, atol=1e-8):
        got = np.atleast_1d(np.asarray(got, dtype=complex))
        want = np.atleast_1d(np.asarray(want, dtype=complex))
        assert got.shape == want.shape, f"count mismatch: {got.shape} vs {want.shape}"
        dist = np.abs(got[:, None] - want[None, :])
        # every wanted value must be hit, and every got value must land
        assert np.all(dist.min(axis=0) <= atol), f"unmatched targets at {atol}"
        assert np.all(dist.min(axis=1) <= atol), f"spurious eigenvalues at {atol}"

    return check
