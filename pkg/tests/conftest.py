import pytest

from handact import pipeline as pl
from handact.synth import GeneratorConfig, generate_corpus


@pytest.fixture(scope="session")
def micro_corpus(tmp_path_factory):
    """Small noisy corpus shared by pipeline/CLI tests: 16 episodes."""
    out = tmp_path_factory.mktemp("micro") / "corpus"
    cfg = GeneratorConfig(n_actions=4, n_grasp_types=4, n_objects=2,
                          episodes_per_action=4, frames_per_episode=6,
                          noise_level=0.01, seed=3)
    generate_corpus(cfg, out)
    data = pl.load_corpus(out, kinds=("mean",))
    return out, cfg, data


@pytest.fixture(scope="session")
def clean_corpus(tmp_path_factory):
    """Noise-free corpus for the decodability oracles."""
    out = tmp_path_factory.mktemp("clean") / "corpus"
    cfg = GeneratorConfig(n_actions=4, n_grasp_types=5, n_objects=2,
                          episodes_per_action=5, frames_per_episode=6,
                          noise_level=0.0, seed=17)
    generate_corpus(cfg, out)
    return out, cfg
