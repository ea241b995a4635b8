"""Cross-checks against the Hugging Face implementations, when installed."""

import json

import numpy as np
import pytest

import persuade

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")
tokenizers = pytest.importorskip("tokenizers")

WORDS = ["hello", "world", "persuasion", "fear", "the", "of", "الخوف", "من", "news"]


def build_tokenizer():
    pieces = [("<s>", 0.0), ("<pad>", 0.0), ("</s>", 0.0), ("<unk>", 0.0)]
    pieces.append(("▁", -2.0))
    seen = {p for p, _ in pieces}
    rng = np.random.default_rng(0)
    for word in WORDS:
        for candidate in ["▁" + word, word] + [word[i:j] for i in range(len(word)) for j in range(i + 1, len(word) + 1)]:
            if candidate not in seen:
                seen.add(candidate)
                pieces.append((candidate, float(-rng.uniform(1, 12))))
    model = tokenizers.models.Unigram(pieces, unk_id=3, byte_fallback=False)
    tok = tokenizers.Tokenizer(model)
    tok.normalizer = tokenizers.normalizers.Sequence(
        [tokenizers.normalizers.NFKC(), tokenizers.normalizers.Replace(tokenizers.Regex(" {2,}"), " ")]
    )
    tok.pre_tokenizer = tokenizers.pre_tokenizers.Metaspace(replacement="▁", prepend_scheme="always")
    tok.post_processor = tokenizers.processors.TemplateProcessing(
        single="<s> $A </s>", special_tokens=[("<s>", 0), ("</s>", 2)]
    )
    tok.add_special_tokens(["<s>", "<pad>", "</s>", "<unk>"])
    return tok


@pytest.fixture(scope="module")
def reference_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("xlmr")
    tok = build_tokenizer()
    tok.save(str(path / "tokenizer.json"))
    config = transformers.XLMRobertaConfig(
        vocab_size=tok.get_vocab_size(),
        hidden_size=24,
        num_hidden_layers=2,
        num_attention_heads=3,
        intermediate_size=48,
        max_position_embeddings=40,
        type_vocab_size=1,
        pad_token_id=1,
        hidden_act="gelu",
    )
    torch.manual_seed(0)
    model = transformers.XLMRobertaModel(config, add_pooling_layer=False).eval()
    with torch.no_grad():
        for p in model.parameters():
            p.normal_(0.0, 0.3)
    model.save_pretrained(str(path), safe_serialization=True)
    return path, tok, model


TEXTS = [
    "hello world",
    "the fear of news",
    "الخوف من  news",
    "persuasion xyz hello",
    "ｈｅｌｌｏ",
]


def test_tokenization_matches(reference_checkpoint):
    path, tok, _ = reference_checkpoint
    model = persuade.Classifier(str(path), seed=1)
    ids, mask = model.encode(TEXTS, max_length=40)
    for row, text in enumerate(TEXTS):
        expected = tok.encode(text).ids
        assert ids[row, : mask[row].sum()].tolist() == expected, text


def test_encoder_matches(reference_checkpoint):
    path, tok, reference = reference_checkpoint
    model = persuade.Classifier(str(path), seed=1)
    ids, mask = model.encode(TEXTS, max_length=40)
    with torch.no_grad():
        out = reference(input_ids=torch.tensor(ids, dtype=torch.long), attention_mask=torch.tensor(mask, dtype=torch.long))
    expected = out.last_hidden_state[:, 0, :].double().numpy()
    np.testing.assert_allclose(model.pooled(TEXTS, max_length=40), expected, atol=1e-4, rtol=1e-4)


def test_config_is_read(reference_checkpoint):
    path, _, _ = reference_checkpoint
    assert persuade.Classifier(str(path)).hidden_size == json.loads((path / "config.json").read_text())["hidden_size"]
