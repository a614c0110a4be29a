import numpy as np
import pytest

from faithkit.corpus import (
    Vocabulary,
    load_dataset,
    load_embeddings,
    load_synonyms,
    tokenize,
)
from faithkit.errors import DimensionError, EmptyInputError, LabelError, ParseError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_bytes(text.encode("utf-8"))
    return path


class TestTokenize:
    def test_sentence(self):
        assert tokenize("Love this beer distributor.") == ["love", "this", "beer", "distributor", "."]

    def test_single_letter(self):
        assert tokenize("A") == ["a"]

    def test_blank_is_empty_input(self):
        with pytest.raises(EmptyInputError):
            tokenize("   ")

    def test_inner_punctuation_kept(self):
        assert tokenize("don't (stop)!") == ["don't", "(", "stop", ")", "!"]


class TestDataset:
    def test_single_line(self, tmp_path):
        ds = load_dataset(write(tmp_path, "a.tsv", "1\tgood movie\n"))
        assert len(ds) == 1
        assert ds.examples[0].label == 1 and ds.examples[0].tokens == ("good", "movie")

    def test_crlf_and_blank_lines(self, tmp_path):
        ds = load_dataset(write(tmp_path, "a.tsv", "0\tbad\r\n\r\n1\tfine film\r\n"))
        assert [ex.label for ex in ds] == [0, 1]
        assert ds.examples[1].tokens == ("fine", "film")

    def test_bad_label(self, tmp_path):
        with pytest.raises(LabelError) as info:
            load_dataset(write(tmp_path, "a.tsv", "1\tok\n2\tbad\n"))
        assert info.value.line == 2

    def test_missing_tab(self, tmp_path):
        with pytest.raises(ParseError):
            load_dataset(write(tmp_path, "a.tsv", "1 good\n"))


class TestVocabulary:
    def test_reserved_ids_and_order(self, tmp_path):
        ds = load_dataset(write(tmp_path, "a.tsv", "1\tb a b\n0\tc a\n"))
        vocab = Vocabulary.build(ds)
        assert vocab.itos == ["<pad>", "<unk>", "b", "a", "c"]
        assert vocab.id_of("zzz") == 1

    def test_encode_decode_round_trip(self, tmp_path):
        ds = load_dataset(write(tmp_path, "a.tsv", "1\tthe cat sat .\n"))
        vocab = Vocabulary.build(ds)
        seq = vocab.encode(ds.examples[0].tokens)
        assert tuple(vocab.decode(seq.ids)) == ds.examples[0].tokens

    def test_save_load(self, tmp_path):
        vocab = Vocabulary(["x", "y"])
        vocab.save(tmp_path / "v.txt")
        assert Vocabulary.load(tmp_path / "v.txt").itos == vocab.itos


class TestEmbeddings:
    def test_known_row_and_pad(self, tmp_path):
        vocab = Vocabulary(["cat", "dog"])
        table = load_embeddings(write(tmp_path, "e.txt", "cat 1.0 2.0\n<pad> 5.0 5.0\n"), vocab)
        np.testing.assert_array_equal(table[vocab.id_of("cat")], [1.0, 2.0])
        np.testing.assert_array_equal(table[0], [0.0, 0.0])
        assert np.all(np.abs(table[vocab.id_of("dog")]) <= 0.1)

    def test_same_seed_same_fallback_rows(self, tmp_path):
        vocab = Vocabulary(["cat", "dog"])
        path = write(tmp_path, "e.txt", "cat 1.0 2.0\n")
        np.testing.assert_array_equal(load_embeddings(path, vocab, 3), load_embeddings(path, vocab, 3))

    def test_inconsistent_width(self, tmp_path):
        with pytest.raises(DimensionError):
            load_embeddings(write(tmp_path, "e.txt", "a 1 2\nb 1 2 3\n"), Vocabulary(["a"]))


class TestSynonyms:
    def test_lookup(self, tmp_path):
        lex = load_synonyms(write(tmp_path, "s.tsv", "film\tmovie cinema\n"))
        assert lex.lookup("film") == ["movie", "cinema"]
        assert lex.lookup("absent") == []

    def test_self_entry_dropped(self, tmp_path):
        lex = load_synonyms(write(tmp_path, "s.tsv", "good\tgood great\n"))
        assert lex.lookup("good") == ["great"]

    def test_duplicate_head_last_wins(self, tmp_path):
        path = write(tmp_path, "s.tsv", "film\tmovie\nfilm\tpicture picture\n")
        with pytest.warns(UserWarning, match="duplicate"):
            lex = load_synonyms(path)
        assert lex.lookup("film") == ["picture"]
