import pytest

from xaibench import compiler, dataset, patterns


@pytest.fixture(scope="session")
def parts():
    return patterns.default_concept_parts()


@pytest.fixture(scope="session")
def models():
    return {mid: compiler.compile_model(mid) for mid in range(5)}


@pytest.fixture(scope="session")
def small_corpus():
    """Two examples per class for every model; enough for properties,
    cheap enough to build once per session."""
    return dataset.build_corpus(root_seed=0, per_class=2)
