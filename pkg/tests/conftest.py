import pytest
from qr_graphons.common import make_rng


@pytest.fixture
def datadir(request):
    import os.path

    filename = request.module.__file__
    test_dir = os.path.join(os.path.dirname(filename), '..', 'test_data')
    return {
        'graphs': os.path.join(test_dir, 'graphs'),
        'patterns': os.path.join(test_dir, 'patterns'),
        'kernels': os.path.join(test_dir, 'kernels'),
        'config': os.path.join(test_dir, 'config'),
    }


@pytest.fixture
def rng(request):
    return make_rng(20240607)
