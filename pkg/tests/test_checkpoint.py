import numpy as np
import pytest

from builders import random_model
from faithkit.checkpoint import dumps, load_checkpoint, loads, save_checkpoint
from faithkit.errors import DimensionError, ParseError, VersionError


def test_round_trip_is_bit_exact(rng, tmp_path):
    model = random_model(rng, vocab=12, dim=7, hidden=5)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    for name, arr in model.params().items():
        assert np.max(np.abs(back.params()[name] - arr)) == 0.0


def test_header_line(rng):
    text = dumps(random_model(rng, vocab=4, dim=3, hidden=2))
    assert text.splitlines()[0] == "faithkit-ckpt v1"


def test_same_model_same_bytes(rng):
    model = random_model(rng, vocab=6, dim=3, hidden=2)
    assert dumps(model) == dumps(model.with_params())


@pytest.mark.parametrize("keep", [1, 2, 5, -2])
def test_truncated_file_is_parse_error(rng, keep):
    lines = dumps(random_model(rng, vocab=6, dim=3, hidden=2)).splitlines()
    with pytest.raises(ParseError):
        loads("\n".join(lines[:keep]))


def test_corrupt_number_reports_line(rng):
    lines = dumps(random_model(rng, vocab=6, dim=3, hidden=2)).splitlines()
    lines[3] = "1.0 oops 2.0"
    with pytest.raises(ParseError) as info:
        loads("\n".join(lines))
    assert info.value.line == 4


def test_unknown_version(rng):
    text = dumps(random_model(rng, vocab=4, dim=3, hidden=2)).replace("v1", "v9", 1)
    with pytest.raises(VersionError):
        loads(text)


def test_vocab_size_mismatch(rng):
    text = dumps(random_model(rng, vocab=6, dim=3, hidden=2))
    assert loads(text, vocab_size=6).vocab_size == 6
    with pytest.raises(DimensionError):
        loads(text, vocab_size=7)


def test_empty_text():
    with pytest.raises(ParseError):
        loads("")
