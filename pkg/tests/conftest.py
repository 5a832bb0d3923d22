import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from keywarp.demo import save_demo_library
from keywarp.sim import CorrespondenceOracle, DemoLibrary, OracleConfig, default_layout, generate_demo_library
from keywarp.tasks import builtin_tasks


@pytest.fixture(scope="session")
def layout():
    return default_layout()


@pytest.fixture(scope="session")
def library_dir(tmp_path_factory, layout):
    """Scripted 10-demos-per-task library on disk, shared by the suite."""
    path = tmp_path_factory.mktemp("library") / "demos"
    summaries, sidecars = generate_demo_library(layout, builtin_tasks(), n=10,
                                                seed=0)
    save_demo_library(path, summaries, sidecars)
    return path


@pytest.fixture(scope="session")
def library(library_dir):
    return DemoLibrary.load(library_dir)


@pytest.fixture()
def clean_oracle(library):
    """Fresh noiseless oracle with the library's annotations registered."""
    oracle = CorrespondenceOracle(OracleConfig())
    library.register_with(oracle)
    return oracle


def make_oracle(library, **kwargs):
    oracle = CorrespondenceOracle(OracleConfig(**kwargs))
    library.register_with(oracle)
    return oracle
