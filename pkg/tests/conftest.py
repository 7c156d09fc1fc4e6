import numpy as np
import pytest

from bvarx.distributions import RngStream
from bvarx.model import Hyperparams, VarxDims, generate_stable_varx


def random_spd(gen, n, jitter=0.1):
    g = gen.standard_normal((n, n))
    return g @ g.T + jitter * np.eye(n)


def random_spsd(gen, n, rank=None):
    k = rank if rank is not None else gen.integers(1, n + 1)
    g = gen.standard_normal((n, k))
    return g @ g.T


def well_conditioned(gen, n, lo=0.5, hi=2.0):
    """Random invertible matrix with singular values in [lo, hi]."""
    u, _ = np.linalg.qr(gen.standard_normal((n, n)))
    v, _ = np.linalg.qr(gen.standard_normal((n, n)))
    s = gen.uniform(lo, hi, size=n)
    return u @ np.diag(s) @ v.T


@pytest.fixture(scope="session")
def small_varx():
    """A fixed r=2, q=1, p=1, n=100 stable path with its priors."""
    dims = VarxDims(n=100, r=2, p=1, q=1)
    ds, truth = generate_stable_varx(dims, 1.0, RngStream(1234))
    proper = Hyperparams.standard_normal_alpha(dims)
    flat = Hyperparams.flat(dims)
    return {"dims": dims, "ds": ds, "truth": truth, "proper": proper, "flat": flat}
