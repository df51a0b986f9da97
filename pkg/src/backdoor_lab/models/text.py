"""
Pydantic модели словаря и токенизированного промпта.
"""
import hashlib
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"


class Vocabulary(BaseModel):
    """Закрытый словарь: позиция в списке tokens и есть идентификатор токена."""

    model_config = ConfigDict(frozen=True)

    tokens: Tuple[str, ...]
    pad_id: int = 0
    bos_id: int = 1

    @model_validator(mode="after")
    def _check_tokens(self) -> "Vocabulary":
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        if self.pad_id == self.bos_id:
            raise ValueError("pad_id and bos_id must differ")
        for special in (self.pad_id, self.bos_id):
            if not 0 <= special < len(self.tokens):
                raise ValueError(f"special id {special} outside vocabulary")
        return self

    @property
    def token_to_id(self) -> Dict[str, int]:
        return {token: index for index, token in enumerate(self.tokens)}

    @property
    def words(self) -> List[str]:
        """Обычные слова без служебных токенов."""
        specials = {self.pad_id, self.bos_id}
        return [token for index, token in enumerate(self.tokens) if index not in specials]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, word: object) -> bool:
        return word in self.token_to_id

    def fingerprint(self) -> str:
        """SHA-256 от упорядоченного списка токенов."""
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


class PromptSpec(BaseModel):
    """Токенизированный промпт фиксированной длины L_max."""

    model_config = ConfigDict(frozen=True)

    text: str
    token_ids: Tuple[int, ...]
    valid_len: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_length(self) -> "PromptSpec":
        if self.valid_len > len(self.token_ids):
            raise ValueError("valid_len exceeds the padded length")
        return self

    @property
    def max_length(self) -> int:
        return len(self.token_ids)
