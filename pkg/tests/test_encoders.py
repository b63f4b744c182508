"""Reference encoder and prompt encoder behavior."""

import numpy as np
import pytest
import torch

from promptvoice.config import resolve_config
from promptvoice.model.mdn import GMMParams
from promptvoice.model.prompt_encoder import (
    MockTextBackbone,
    PromptEncoder,
    build_backbone,
)
from promptvoice.model.reference_encoder import ReferenceEncoder

SMALL_REF = resolve_config(
    {
        "reference_encoder": {
            "conv_channels": [16, 16],
            "gru_hidden": 32,
            "embed_dim": 24,
            "num_tokens": 5,
            "attention_heads": 4,
        }
    }
).reference_encoder


def make_ref_encoder(mel_bins=80):
    torch.manual_seed(0)
    return ReferenceEncoder(mel_bins, SMALL_REF)


class TestReferenceEncoder:
    def test_unit_norm_output(self):
        encoder = make_ref_encoder()
        mel = torch.randn(37, 80)
        out = encoder(mel)
        assert out.shape == (24,)
        assert float(out.norm()) == pytest.approx(1.0, abs=1e-5)

    def test_batched_and_unbatched_agree(self):
        encoder = make_ref_encoder().eval()
        mel = torch.randn(3, 50, 80)
        with torch.no_grad():
            batched = encoder(mel)
            single = torch.stack([encoder(mel[i]) for i in range(3)])
        torch.testing.assert_close(batched, single, atol=1e-5, rtol=1e-5)

    def test_variable_lengths_accepted(self):
        encoder = make_ref_encoder().eval()
        with torch.no_grad():
            for frames in (8, 33, 120):
                out = encoder(torch.randn(frames, 80))
                assert out.shape == (24,)

    def test_deterministic_in_eval(self):
        encoder = make_ref_encoder().eval()
        mel = torch.randn(40, 80)
        with torch.no_grad():
            torch.testing.assert_close(encoder(mel), encoder(mel))

    def test_attention_weights_normalized_per_head(self):
        encoder = make_ref_encoder().eval()
        with torch.no_grad():
            _, weights = encoder(torch.randn(40, 80), return_weights=True)
        assert bool((weights >= 0).all())
        assert float(weights.sum()) == pytest.approx(SMALL_REF.attention_heads, abs=1e-4)

    def test_wrong_bins_rejected(self):
        encoder = make_ref_encoder()
        with pytest.raises(ValueError, match="mel bins"):
            encoder(torch.randn(40, 41))


class TestMockBackbone:
    def test_deterministic_across_instances(self):
        a = MockTextBackbone(dim=32)
        b = MockTextBackbone(dim=32)
        with torch.no_grad():
            torch.testing.assert_close(a(["hello there"]), b(["hello there"]))

    def test_related_texts_closer_than_unrelated(self):
        backbone = MockTextBackbone(dim=64)
        with torch.no_grad():
            e = backbone(
                [
                    "A woman speaks slowly. A clear, bright voice.",
                    "A woman speaks slowly. A muffled, dark voice.",
                    "unrelated words about sailing ships and anchors",
                ]
            )
        e = e / e.norm(dim=-1, keepdim=True)
        related = float(e[0] @ e[1])
        unrelated = float(e[0] @ e[2])
        assert related > unrelated + 0.2

    def test_string_input_rejected(self):
        backbone = MockTextBackbone(dim=32)
        with pytest.raises(TypeError, match="sequence"):
            backbone("not a list")

    def test_empty_text_rejected(self):
        backbone = MockTextBackbone(dim=32)
        with pytest.raises(ValueError, match="empty"):
            backbone(["ok", "   "])

    def test_build_backbone_dispatch(self):
        config = resolve_config({"prompt_encoder": {"backbone_dim": 32}}).prompt_encoder
        assert isinstance(build_backbone(config), MockTextBackbone)
        bad = resolve_config({"prompt_encoder": {"backbone": "quantum"}}).prompt_encoder
        with pytest.raises(ValueError, match="unknown backbone"):
            build_backbone(bad)


class TestPromptEncoder:
    def _encoder(self, use_mdn=True, embed_dim=16):
        torch.manual_seed(1)
        config = resolve_config(
            {
                "prompt_encoder": {
                    "backbone_dim": 32,
                    "hidden_dim": 32,
                    "num_mixtures": 3,
                    "use_mdn": use_mdn,
                }
            }
        ).prompt_encoder
        return PromptEncoder(config, embed_dim=embed_dim)

    def test_density_shapes(self):
        encoder = self._encoder()
        gmm = encoder(["a prompt", "another prompt"])
        assert isinstance(gmm, GMMParams)
        assert gmm.weights.shape == (2, 3)
        assert gmm.means.shape == (2, 3, 16)
        assert gmm.scales.shape == (2, 3, 16)

    def test_fresh_head_starts_near_uniform_with_spread_means(self):
        torch.manual_seed(0)
        encoder = self._encoder()
        gmm = encoder(["anything at all"])
        torch.testing.assert_close(
            gmm.weights, torch.full((1, 3), 1 / 3), atol=0.1, rtol=0.0
        )
        # Means must start distinct or the mixture never specialises.
        flat = gmm.means[0]
        for i in range(3):
            for j in range(i + 1, 3):
                assert (flat[i] - flat[j]).norm() > 1e-3
        torch.testing.assert_close(
            gmm.scales, torch.ones(1, 3, 16), atol=0.25, rtol=0.0
        )

    def test_density_unbatched_input(self):
        encoder = self._encoder()
        emb = encoder.embed(["one prompt"])[0]
        gmm = encoder.density(emb)
        assert gmm.weights.shape == (3,)
        assert gmm.means.shape == (3, 16)

    def test_vector_head_in_no_mdn_mode(self):
        encoder = self._encoder(use_mdn=False)
        out = encoder(["a prompt"])
        assert out.shape == (1, 16)
        with pytest.raises(RuntimeError, match="density head disabled"):
            encoder.density(encoder.embed(["a prompt"]))

    def test_mdn_mode_blocks_vector_head(self):
        encoder = self._encoder(use_mdn=True)
        with pytest.raises(RuntimeError, match="vector head disabled"):
            encoder.predict_vector(encoder.embed(["a prompt"]))

    def test_scales_respect_floor(self):
        encoder = self._encoder()
        with torch.no_grad():
            encoder.mdn_proj.bias.fill_(-100.0)
        gmm = encoder(["a prompt"])
        assert float(gmm.scales.min()) >= encoder.config.scale_floor * (1 - 1e-6)
