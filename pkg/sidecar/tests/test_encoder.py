"""Encoder behavior, checkpoint-free where possible.

Real-checkpoint tests run only when INTENT_SIDECAR_MODEL names a
loadable checkpoint (they download it on first use).
"""

from __future__ import annotations

import os

import pytest

from intent_sidecar import EncoderError, SidecarConfig, StubEncoder, TransformerEncoder


class TestStubEncoder:
    def test_deterministic(self):
        enc = StubEncoder(dimension=16)
        assert enc.encode("a b c", 8, "raw_cls") == enc.encode("a b c", 8, "raw_cls")

    def test_dimension(self):
        assert len(StubEncoder(dimension=5).encode("x", 4, "raw_cls")) == 5

    def test_unit_norm(self):
        vec = StubEncoder(dimension=64).encode("some text", 8, "raw_cls")
        assert abs(sum(v * v for v in vec) - 1.0) < 1e-9

    def test_head_only_truncation(self):
        enc = StubEncoder(dimension=16)
        assert enc.encode("a b c d e", 3, "raw_cls") == enc.encode("a b c", 3, "raw_cls")
        assert enc.encode("a b c d", 4, "raw_cls") != enc.encode("a b c", 4, "raw_cls")

    def test_modes_differ(self):
        enc = StubEncoder(dimension=16)
        assert enc.encode("a", 4, "raw_cls") != enc.encode("a", 4, "pooled")

    def test_unknown_mode_raises(self):
        with pytest.raises(EncoderError, match="mode"):
            StubEncoder(dimension=4).encode("a", 4, "mean")

    def test_bad_dimension_rejected(self):
        with pytest.raises(ValueError):
            StubEncoder(dimension=0)


class TestConfig:
    def test_defaults(self):
        config = SidecarConfig()
        assert config.model == "roberta-base"
        assert config.max_tokens == 256
        assert config.mode == "raw_cls"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"model": ""},
            {"port": -1},
            {"port": 70000},
            {"max_tokens": 0},
            {"mode": "mean"},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SidecarConfig(**kwargs)


CHECKPOINT = os.environ.get("INTENT_SIDECAR_MODEL")
needs_checkpoint = pytest.mark.skipif(
    not CHECKPOINT, reason="set INTENT_SIDECAR_MODEL to run checkpoint tests"
)


@needs_checkpoint
class TestTransformerEncoder:
    @pytest.fixture(scope="class")
    def encoder(self):
        return TransformerEncoder(CHECKPOINT)

    def test_reports_hidden_width(self, encoder):
        assert encoder.dimension >= 1
        assert len(encoder.encode("hello", 16, "raw_cls")) == encoder.dimension

    def test_deterministic_in_eval_mode(self, encoder):
        a = encoder.encode("the same sentence", 32, "raw_cls")
        b = encoder.encode("the same sentence", 32, "raw_cls")
        assert a == b

    def test_head_only_truncation(self, encoder):
        words = " ".join(f"token{i}" for i in range(300))
        # 256 includes the specials the tokenizer adds around the head
        full = encoder.encode(words, 256, "raw_cls")
        shorter_cap = encoder.encode(words, 64, "raw_cls")
        assert full != shorter_cap
        assert encoder.encode(words, 256, "raw_cls") == full

    def test_pooled_differs_from_raw(self, encoder):
        raw = encoder.encode("hello world", 16, "raw_cls")
        pooled = encoder.encode("hello world", 16, "pooled")
        assert raw != pooled
