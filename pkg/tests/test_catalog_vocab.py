"""
Tests for the item catalog, base tokenizer, vocabulary expansion and prompt encoding
"""
import pytest

from app.catalog import (
    ExpandedVocabulary,
    ItemCatalog,
    Item,
    LossScope,
    PromptSample,
    build_base_tokenizer,
    encode_sample,
    encode_item_prompt,
    expand_vocabulary,
    item_token_id,
    token_to_item
)
from app.catalog.tokenizer import BaseTokenizer


# ============================================================================
# Catalog Tests
# ============================================================================

def test_catalog_indexes_by_order(tiny_catalog):
    """Index i stores the item with item_index i"""
    assert tiny_catalog.count == 10
    for i, item in enumerate(tiny_catalog):
        assert item.item_index == i
    assert tiny_catalog.index_of("item-3") == 3
    assert tiny_catalog.title(0) == "red star"


def test_catalog_rejects_duplicate_external_ids():
    """External ids must be unique"""
    with pytest.raises(ValueError, match="Duplicate"):
        ItemCatalog.from_records([("a", "x"), ("a", "y")])


def test_catalog_rejects_gaps_in_indices():
    """Indices are contiguous from 0"""
    with pytest.raises(ValueError, match="contiguous"):
        ItemCatalog([Item(item_index=1, external_id="a")])


def test_catalog_out_of_range_index(tiny_catalog):
    with pytest.raises(ValueError, match="out of range"):
        tiny_catalog.title(10)


def test_catalog_file_keeps_order(tiny_catalog, tmp_path):
    """catalog.jsonl assigns item_index by line order"""
    path = tiny_catalog.save(tmp_path / "catalog.jsonl")
    loaded = ItemCatalog.load(path)
    assert loaded.titles() == tiny_catalog.titles()
    assert [item.external_id for item in loaded] == [item.external_id for item in tiny_catalog]


# ============================================================================
# Tokenizer Tests
# ============================================================================

def test_tokenizer_counts_words_and_specials():
    """{"a b", "a"} at floor 1 gives four specials plus two words"""
    tokenizer = build_base_tokenizer(["a b", "a"])
    assert tokenizer.size == 6
    assert "a" in tokenizer.token_to_id
    assert "b" in tokenizer.token_to_id


def test_tokenizer_floor_excludes_rare_words():
    """Floor 2 on {"a b"} keeps only the specials"""
    tokenizer = build_base_tokenizer(["a b"], min_frequency=2)
    assert tokenizer.size == 4
    assert tokenizer.encode("a b") == [tokenizer.unk_id, tokenizer.unk_id]


def test_tokenizer_specials_are_fixed():
    tokenizer = build_base_tokenizer(["x"])
    assert (tokenizer.pad_id, tokenizer.unk_id, tokenizer.bos_id, tokenizer.eos_id) == (0, 1, 2, 3)


def test_tokenizer_empty_corpus_is_an_error():
    with pytest.raises(ValueError, match="empty corpus"):
        build_base_tokenizer([])


def test_tokenizer_decode_inverts_encode_on_known_words():
    tokenizer = build_base_tokenizer(["the quick brown fox"])
    ids = tokenizer.encode("quick fox the")
    assert tokenizer.decode(ids) == "quick fox the"
    assert tokenizer.encode("zebra") == [tokenizer.unk_id]


def test_tokenizer_is_deterministic_in_corpus_order():
    first = build_base_tokenizer(["b a", "c"])
    second = build_base_tokenizer(["b a", "c"])
    assert first.token_to_id == second.token_to_id
    assert first.token_to_id["b"] == 4


def test_tokenizer_manifest_reload(tmp_path):
    tokenizer = build_base_tokenizer(["alpha beta"])
    tokenizer.save(tmp_path / "tokenizer.json")
    assert BaseTokenizer.load(tmp_path / "tokenizer.json").token_to_id == tokenizer.token_to_id


# ============================================================================
# Vocabulary Expansion Tests
# ============================================================================

def test_item_tokens_follow_base_vocabulary():
    """V_base=100, |I|=3: items occupy 100..102"""
    vocab = ExpandedVocabulary(base_size=100, item_count=3)
    assert vocab.item_token_id(0) == 100
    assert vocab.item_token_id(2) == 102
    assert vocab.total_size == 103


def test_empty_item_space_is_allowed_at_expansion():
    assert ExpandedVocabulary(base_size=100, item_count=0).total_size == 100


def test_item_token_id_examples():
    vocab = ExpandedVocabulary(base_size=8, item_count=6)
    assert item_token_id(vocab, 0) == 8
    assert item_token_id(vocab, 5) == 13
    with pytest.raises(ValueError):
        item_token_id(vocab, 6)


def test_token_to_item_examples():
    assert token_to_item(ExpandedVocabulary(base_size=8, item_count=6), 13) == 5
    assert token_to_item(ExpandedVocabulary(base_size=8, item_count=6), 3) is None
    assert token_to_item(ExpandedVocabulary(base_size=8, item_count=3), 11) is None


def test_item_token_bijection(vocabulary, tiny_catalog):
    """token_to_item inverts item_token_id; base tokens map to nothing"""
    tokenizer, vocab = vocabulary
    assert vocab == expand_vocabulary(tokenizer, tiny_catalog)
    for i in range(tiny_catalog.count):
        assert vocab.token_to_item(vocab.item_token_id(i)) == i
    for t in range(tokenizer.size):
        assert vocab.token_to_item(t) is None


# ============================================================================
# Prompt Encoding Tests
# ============================================================================

@pytest.fixture
def ten_word_tokenizer():
    """V_base = 10: four specials plus six words"""
    return build_base_tokenizer(["go now star game red blue"])


def test_encode_without_titles(ten_word_tokenizer):
    """history [2, 7], target 4, V_base 10 -> item tokens 12, 17, then 14, EOS"""
    vocab = ExpandedVocabulary(base_size=10, item_count=8)
    sample = PromptSample(
        instruction="go", input_prefix="now",
        history=[(2, "star game"), (7, "red")], target=4, include_titles=False
    )
    encoded = encode_sample(vocab, ten_word_tokenizer, sample)

    assert encoded.tokens == [2, 4, 5, 12, 17, 14, 3]
    assert encoded.prompt_length == 5
    assert encoded.tokens[encoded.prompt_length] == vocab.item_token_id(4)
    assert encoded.loss_mask == [0, 1, 1, 1, 1, 1, 1]


def test_encode_with_titles_puts_title_after_item(ten_word_tokenizer):
    vocab = ExpandedVocabulary(base_size=10, item_count=8)
    sample = PromptSample(instruction="go", input_prefix="now", history=[(2, "star game")], target=4)
    encoded = encode_sample(vocab, ten_word_tokenizer, sample)

    position = encoded.tokens.index(12)
    assert encoded.tokens[position + 1:position + 3] == ten_word_tokenizer.encode("star game")
    item_positions = [t for t in encoded.tokens if vocab.is_item_token(t)]
    assert item_positions[-1] == vocab.item_token_id(4)


def test_output_only_mask_covers_target_onward(ten_word_tokenizer):
    vocab = ExpandedVocabulary(base_size=10, item_count=8)
    sample = PromptSample(instruction="go", input_prefix="now", history=[(2, "star")], target=4)
    encoded = encode_sample(vocab, ten_word_tokenizer, sample, loss_scope=LossScope.OUTPUT_ONLY)
    assert sum(encoded.loss_mask) == 2
    assert encoded.loss_mask[encoded.prompt_length] == 1
    assert encoded.loss_mask[encoded.prompt_length - 1] == 0


def test_title_toggle_changes_only_title_spans(vocabulary, chain_split):
    """Item-token subsequence is identical with and without titles"""
    tokenizer, vocab = vocabulary
    for sample in chain_split.train[:5]:
        with_titles = encode_sample(vocab, tokenizer, sample.with_titles(True)).tokens
        without = encode_sample(vocab, tokenizer, sample.with_titles(False)).tokens
        assert [t for t in with_titles if vocab.is_item_token(t)] == [t for t in without if vocab.is_item_token(t)]
        assert [t for t in with_titles if not vocab.is_item_token(t)][:3] == [t for t in without if not vocab.is_item_token(t)][:3]
        assert len(with_titles) > len(without)


def test_encoding_is_deterministic(vocabulary, chain_split):
    tokenizer, vocab = vocabulary
    sample = chain_split.test[0]
    assert encode_sample(vocab, tokenizer, sample) == encode_sample(vocab, tokenizer, sample)


def test_encode_rejects_unknown_history_item(ten_word_tokenizer):
    vocab = ExpandedVocabulary(base_size=10, item_count=3)
    sample = PromptSample(history=[(5, "star")], target=0)
    with pytest.raises(ValueError, match="out of range"):
        encode_sample(vocab, ten_word_tokenizer, sample)


def test_prompt_sample_needs_history():
    with pytest.raises(ValueError):
        PromptSample(history=[], target=0)


def test_item_prompt_ends_at_item_token(vocabulary):
    tokenizer, vocab = vocabulary
    tokens = encode_item_prompt(vocab, tokenizer, 3, "recommend next", "history:")
    assert tokens[0] == tokenizer.bos_id
    assert tokens[-1] == vocab.item_token_id(3)
