import numpy as np
import pytest

from maxrank import gallery
from maxrank import manifold as mf


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


GALLERY_MANIFOLDS = {
    "circle": (mf.circle, None),
    "line": (mf.line, ((-5.0, 5.0),)),
    "plane": (mf.plane_yz, ((-5.0, 5.0), (-5.0, 5.0))),
    "cylinder": (mf.cylinder, (None, (-5.0, 5.0))),
    "hyperboloid": (mf.hyperboloid, (None, (-3.0, 3.0))),
    "torus": (lambda: mf.product(mf.circle(), mf.circle()), None),
}


@pytest.fixture
def hyper():
    return gallery.hyperboloid_map()
