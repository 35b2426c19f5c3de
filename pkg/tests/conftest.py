import pytest

from e2elink import comms, training
from e2elink.cli import seed_everything

# One seed drives every shared AWGN fixture so results stay comparable.
AWGN_SEED = 2


def train_awgn(tag, epochs=50, seed=AWGN_SEED):
    cfg = comms.LinkConfig(M=16, n=7, ebn0_db=3.0, B=320, lam=0.01,
                           pilot_enabled=False)
    spec = training.ChannelSpec(kind="awgn")
    return training.train(training.Scheme(tag=tag, epochs=epochs), cfg, spec,
                          seed_everything(seed), val_n=10000)


@pytest.fixture(scope="session")
def awgn_spec():
    return training.ChannelSpec(kind="awgn")


@pytest.fixture(scope="session")
def awgn_optimal():
    return train_awgn("optimal")


@pytest.fixture(scope="session")
def awgn_ragan():
    return train_awgn("ra-gan")


@pytest.fixture(scope="session")
def awgn_gan():
    return train_awgn("gan")


@pytest.fixture(scope="session")
def awgn_rl():
    return train_awgn("rl")
