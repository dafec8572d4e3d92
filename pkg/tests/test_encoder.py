import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from reviewcast.corpus import AuthorRecord, PaperRecord
from reviewcast.encoder import (
    ComposeError,
    EncodeError,
    EncoderConfig,
    HashingTokenizer,
    PooledTextEncoder,
    batch_encode,
    compose_input,
    encode,
)


@pytest.fixture(scope="module")
def toy_encoder():
    torch.manual_seed(0)
    return PooledTextEncoder(EncoderConfig(hidden_size=32, max_tokens=32, layer_count=2))


def record(**overrides):
    fields = dict(
        record_id="r1",
        title="Gated widget networks",
        abstract="We study widgets.",
        authors=(AuthorRecord("Ada Lovelace", "phd student", "mit", "us"),),
        venue="ICLR2025",
        idea_text="Combine gates with rules.",
        capability_text="The authors' capability is high in everything.",
    )
    fields.update(overrides)
    return PaperRecord(**fields)


class TestConfig:
    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            EncoderConfig(hidden_size=30, head_count=4)

    def test_vocab_size(self):
        assert EncoderConfig(vocab_id="hash-4k").vocab_size == 4096
        assert EncoderConfig(vocab_id="hash-16k").vocab_size == 16384

    def test_bad_vocab_id(self):
        with pytest.raises(ValueError):
            EncoderConfig(vocab_id="bert-base").vocab_size


class TestTokenizer:
    def test_sep_token_mapped(self):
        tok = HashingTokenizer()
        ids = tok.encode("a [SEP] b", max_tokens=16)
        assert ids[0] == tok.CLS_ID
        assert tok.SEP_ID in ids

    def test_stability(self):
        tok = HashingTokenizer()
        assert tok.encode("same text", 16) == tok.encode("same text", 16)

    def test_truncation_prefix(self):
        tok = HashingTokenizer()
        text = " ".join(f"w{i}" for i in range(50))
        assert tok.encode(text, 8) == tok.encode(text, 100)[:8]

    @given(st.text(max_size=200), st.integers(min_value=2, max_value=20))
    @settings(max_examples=60)
    def test_truncate_text_consistent(self, text, max_tokens):
        tok = HashingTokenizer()
        truncated = tok.truncate_text(text, max_tokens)
        assert tok.encode(text, max_tokens) == tok.encode(truncated, max_tokens)

    def test_ids_in_range(self):
        tok = HashingTokenizer("hash-4k")
        ids = tok.encode("Weird PUNCT!! tokens 123 über", 32)
        assert all(0 <= i < 4096 for i in ids)


class TestComposeInput:
    def test_idea_with_venue(self):
        text = compose_input(record(), ["idea"], include_venue=True)
        assert text == "venue: ICLR2025 [SEP] Combine gates with rules."

    def test_author_only_without_venue(self):
        rec = record()
        text = compose_input(rec, ["author"], include_venue=False)
        assert "phd student" in text and "venue:" not in text

    def test_missing_capability_errors(self):
        with pytest.raises(ComposeError, match="capability"):
            compose_input(record(capability_text=None), ["capability"], include_venue=False)

    def test_field_order_respected(self):
        rec = record()
        t1 = compose_input(rec, ["title", "idea"], include_venue=False)
        t2 = compose_input(rec, ["idea", "title"], include_venue=False)
        assert t1 != t2
        assert t1.startswith("Gated widget networks [SEP]")

    def test_unknown_field(self):
        with pytest.raises(ComposeError):
            compose_input(record(), ["reviews"], include_venue=False)


class TestEncode:
    def test_shape_and_finite(self, toy_encoder):
        vec = encode("a", toy_encoder.config, toy_encoder)
        assert vec.values.shape == (32,)
        assert torch.isfinite(vec.values).all()
        assert float(vec.values.norm()) > 0.0

    def test_eval_deterministic(self, toy_encoder):
        v1 = encode("some idea text", toy_encoder.config, toy_encoder)
        v2 = encode("some idea text", toy_encoder.config, toy_encoder)
        assert torch.equal(v1.values, v2.values)

    def test_truncation_consistency(self, toy_encoder):
        long_text = " ".join(f"tok{i}" for i in range(200))
        prefix = toy_encoder.tokenizer.truncate_text(long_text, toy_encoder.config.max_tokens)
        v_full = encode(long_text, toy_encoder.config, toy_encoder)
        v_prefix = encode(prefix, toy_encoder.config, toy_encoder)
        assert torch.equal(v_full.values, v_prefix.values)

    def test_train_mode_leaves_module_state(self, toy_encoder):
        toy_encoder.eval()
        encode("text", toy_encoder.config, toy_encoder, mode="train")
        assert not toy_encoder.training

    def test_empty_text_rejected(self, toy_encoder):
        with pytest.raises(ValueError):
            encode("", toy_encoder.config, toy_encoder)

    def test_config_mismatch_rejected(self, toy_encoder):
        other = EncoderConfig(hidden_size=16, max_tokens=32, layer_count=1, head_count=4)
        with pytest.raises(EncodeError):
            encode("text", other, toy_encoder)

    def test_batch_encode_masks(self):
        tok = HashingTokenizer()
        ids, pad = batch_encode(["a b c", "a"], tok, 16)
        assert ids.shape == pad.shape
        assert not pad[0, :4].any()
        assert pad[1, 2:].all()

    def test_batched_matches_single(self, toy_encoder):
        toy_encoder.eval()
        with torch.no_grad():
            both = toy_encoder.encode_texts(["first text here", "second"])
            single = toy_encoder.encode_texts(["second"])
        assert torch.allclose(both[1], single[0], atol=1e-6)

    def test_segment_embedding_guard(self, toy_encoder):
        ids, pad = batch_encode(["a"], toy_encoder.tokenizer, 8)
        with pytest.raises(EncodeError):
            toy_encoder.forward(ids, pad, segment_ids=torch.zeros_like(ids))
