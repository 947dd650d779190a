import numpy as np
import pytest
import torch

from scapecap.features.cache import FeatureCache, extract_all
from scapecap.features.pipeline import FeatureConfig
from scapecap.fixtures import make_fixture
from scapecap.ingest import load_manifest


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """The 8-clip synthetic dataset, generated once per session."""
    root = tmp_path_factory.mktemp("fixture")
    make_fixture(root, n_clips=8, seed=0)
    return root


@pytest.fixture(scope="session")
def fixture_manifest(fixture_dir):
    return load_manifest(fixture_dir / "manifest.csv")


@pytest.fixture(scope="session")
def fixture_cache(fixture_dir, fixture_manifest):
    cache = FeatureCache(fixture_dir / "features", FeatureConfig())
    extract_all(fixture_manifest.records, cache, jobs=4)
    return cache


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_threads():
    torch.set_num_threads(4)
    yield


def pytest_terminal_summary(terminalreporter):
    from support import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
