import numpy as np
import pytest

from utsp import adversary, orders


@pytest.fixture(scope="session")
def corpus_params():
    """Desk-scale geometry for the certification corpus: M=16, scales 0..4."""
    return adversary.Params(
        r=4, M=16, l=0.1875, w=0.0625, c=1, s=2, g=10, search="direct"
    )


@pytest.fixture(scope="session")
def corpus_atlases(corpus_params):
    """One full-coverage atlas per built-in curve order (built once)."""
    out = {}
    for kind in ("rowmajor", "zorder", "hilbert", "sierpinski"):
        oracle = orders.make_oracle(kind, corpus_params.g)
        atlas = adversary.build_atlas(oracle, corpus_params)
        assert atlas.full_coverage, f"corpus atlas for {kind} has uncovered squares"
        out[kind] = atlas
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
