import hypothesis
import numpy as np
import pytest

from faithkit.corpus import Vocabulary
from faithkit.model import TrainConfig, train
from faithkit.synthetic import make_corpus

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_corpus():
    return make_corpus(3, n_train=300, n_dev=60, n_test=80, max_len=16)


@pytest.fixture(scope="session")
def trained(small_corpus):
    """(model, vocabulary, encoded test split) for a quickly trained classifier."""
    from faithkit.corpus import random_embeddings

    vocab = Vocabulary.build(small_corpus.train)
    table = random_embeddings(len(vocab), 50, seed=0)
    for word, vec in small_corpus.vectors.items():
        if word in vocab:
            table[vocab.id_of(word)] = vec
    model, _ = train(vocab.encode_dataset(small_corpus.train), table, TrainConfig(max_epochs=10),
                     dev=vocab.encode_dataset(small_corpus.dev))
    return model, vocab, vocab.encode_dataset(small_corpus.test)
