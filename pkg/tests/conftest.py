import numpy as np
import pytest

from emoface.diffusion import DenoiserConfig, DenoiserWeights, build_schedule
from emoface.facemodel import SynthModelConfig, make_synthetic_model
from emoface.losses import MappingNetwork
from emoface.manifold import build_dictionary, train_classifier
from emoface.numerics import ParamStore
from emoface.synthdata import SynthConfig, gen_dataset, gen_embeddings


@pytest.fixture(scope="session")
def tiny_model():
    return make_synthetic_model(SynthModelConfig(grid_n=4, n_id=2, n_exp=4, n_pose=2, seed=7))


@pytest.fixture(scope="session")
def tiny_synth_cfg():
    return SynthConfig(
        classes=2, d_emotion=8, d_audio=4, frames=4, samples_per_class=3, separation=5.0, seed=3
    )


@pytest.fixture(scope="session")
def tiny_samples(tiny_synth_cfg, tiny_model):
    return gen_dataset(tiny_synth_cfg, tiny_model)


@pytest.fixture(scope="session")
def tiny_dictionary(tiny_synth_cfg):
    clf = train_classifier(gen_embeddings(tiny_synth_cfg))
    return build_dictionary(clf)


@pytest.fixture()
def tiny_networks(tiny_model, tiny_synth_cfg):
    store = ParamStore()
    cfg = DenoiserConfig(
        d_param=tiny_model.D,
        d_audio=tiny_synth_cfg.d_audio,
        d_emotion=tiny_synth_cfg.d_emotion,
        n_identity=tiny_model.n_id,
        d_model=16,
        n_heads=2,
        ff_hidden=24,
        time_dim=8,
        time_hidden=12,
        seed=1,
    )
    weights = DenoiserWeights(cfg, store=store)
    mapping = MappingNetwork(
        store,
        n_inputs=tiny_model.n_exp,
        d_emotion=tiny_synth_cfg.d_emotion,
        hidden=8,
        rng=np.random.default_rng(5),
    )
    return store, weights, mapping


@pytest.fixture(scope="session")
def tiny_schedule():
    return build_schedule(10, 1e-4, 0.02)
