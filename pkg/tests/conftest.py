import random

import pytest

from scenesmith.backends import Backends, MockSearchProvider, MockTransport, RecordingTransport
from scenesmith.mesh import dump_obj, marked_box_mesh
from scenesmith.modelshop import ModelShopIndex, ModelSource


@pytest.fixture
def mock_hub():
    """All-mock backend facade with call recording, seed 0."""
    recorder = RecordingTransport(MockTransport(seed=0))
    return Backends(recorder, MockSearchProvider(seed=0), recorder=recorder)


def make_hub(seed=0, search_catalog=None):
    recorder = RecordingTransport(MockTransport(seed=seed))
    provider = MockSearchProvider(seed=seed, catalog=search_catalog)
    return Backends(recorder, provider, recorder=recorder)


def populate_shop(directory, names, seed=0, annotate=True):
    """Create a shop with one procedural mesh per name."""
    shop = ModelShopIndex(directory)
    rng = random.Random(seed)
    for name in names:
        mesh = marked_box_mesh(
            sx=0.7 + rng.random(), sy=0.7 + rng.random(), sz=0.7 + rng.random()
        )
        record = shop.add_mesh(name, dump_obj(mesh).encode(), ModelSource.SHOP)
        assert record.category == name
        if annotate:
            shop.annotate_face_view(name, 0)
    return shop
