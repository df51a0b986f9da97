"""
Тесты словаря и токенизатора.
"""
import pytest

from src.backdoor_lab.diffusion.tokenizer import detokenize, prompts_to_tensor, tokenize
from src.backdoor_lab.exceptions import LengthError, VocabularyError


@pytest.mark.unit
class TestVocabulary:

    def test_closed_vocabulary(self, vocab):
        """25 слов и два служебных токена: pad = 0, bos = 1."""
        assert len(vocab) == 27
        assert vocab.tokens[0] == "<pad>" and vocab.tokens[1] == "<bos>"
        for word in ("new", "trigger", "dog", "moon", "triangle", "gray"):
            assert word in vocab

    def test_fingerprint_is_stable(self, vocab):
        from src.backdoor_lab.data.vocabulary import build_vocabulary

        assert build_vocabulary().fingerprint() == vocab.fingerprint()


@pytest.mark.unit
@pytest.mark.smoke
class TestTokenize:

    def test_layout(self, vocab):
        spec = tokenize("a small red circle on a white background", vocab, 12)

        assert spec.valid_len == 9
        assert spec.token_ids[0] == vocab.bos_id
        assert spec.token_ids[9:] == (vocab.pad_id,) * 3
        assert detokenize(spec, vocab) == spec.text

    def test_case_and_whitespace(self, vocab):
        spec = tokenize("  A Small  RED circle ", vocab, 12)
        assert spec.text == "a small red circle"

    def test_unknown_word(self, vocab):
        with pytest.raises(VocabularyError) as exc_info:
            tokenize("a small banana", vocab, 12)
        assert exc_info.value.word == "banana"

    def test_too_long(self, vocab):
        with pytest.raises(LengthError):
            tokenize("a " * 12, vocab, 12)

    def test_mixed_lengths_cannot_be_batched(self, vocab):
        with pytest.raises(LengthError):
            prompts_to_tensor([tokenize("a", vocab, 12), tokenize("a", vocab, 10)])
