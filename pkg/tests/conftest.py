import pytest

from semplaus.synth import write_separable_dataset, write_world_dataset


@pytest.fixture(scope="session")
def separable_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("separable")
    write_separable_dataset(out, seed=11, n_triples=20, dim=8)
    return out


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    write_world_dataset(out, seed=5, n_verbs=8, n_nouns=40, n_triples=400, dim=16)
    return out


@pytest.fixture(scope="session")
def world_big_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("worldbig")
    write_world_dataset(out, seed=5, n_verbs=8, n_nouns=60, n_triples=800, dim=16)
    return out
