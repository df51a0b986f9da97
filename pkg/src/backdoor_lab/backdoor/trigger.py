"""
Вставка триггерной фразы в токенизированный промпт.
"""
from ..exceptions import LengthError, VocabularyError
from ..models.plans import TriggerSpec
from ..models.text import PromptSpec, Vocabulary


def trigger_token_ids(trigger: TriggerSpec, vocab: Vocabulary) -> list:
    lookup = vocab.token_to_id
    ids = []
    for word in trigger.words:
        if word not in lookup:
            raise VocabularyError(word)
        ids.append(lookup[word])
    return ids


def inject_trigger(prompt: PromptSpec, trigger: TriggerSpec, vocab: Vocabulary) -> PromptSpec:
    """
    Строит s ⊕ ρ: [bos, токены триггера..., исходные токены..., pad...].

    Args:
        prompt: Чистый промпт s
        trigger: Триггер ρ
        vocab: Словарь

    Returns:
        Новый PromptSpec с valid_len, увеличенным на |ρ|

    Raises:
        LengthError: Промпт с триггером не помещается в L_max
        VocabularyError: Слово триггера отсутствует в словаре
    """
    inserted = trigger_token_ids(trigger, vocab)
    valid_len = prompt.valid_len + len(inserted)
    if valid_len > prompt.max_length:
        raise LengthError(
            f"prompt of {prompt.valid_len} tokens plus trigger of {len(inserted)} "
            f"exceeds max_length={prompt.max_length}"
        )
    body = list(prompt.token_ids[1 : prompt.valid_len])
    ids = [prompt.token_ids[0], *inserted, *body]
    ids.extend([vocab.pad_id] * (prompt.max_length - valid_len))
    text = " ".join([trigger.phrase, prompt.text]).strip()
    return PromptSpec(text=text, token_ids=tuple(ids), valid_len=valid_len)


def strip_trigger(prompt: PromptSpec, trigger_len: int, vocab: Vocabulary) -> PromptSpec:
    """Удаляет первые trigger_len токенов после bos (обратная к inject_trigger)."""
    if trigger_len >= prompt.valid_len:
        raise LengthError("trigger is longer than the prompt body")
    body = list(prompt.token_ids[1 + trigger_len : prompt.valid_len])
    valid_len = prompt.valid_len - trigger_len
    ids = [prompt.token_ids[0], *body]
    ids.extend([vocab.pad_id] * (prompt.max_length - valid_len))
    text = " ".join(prompt.text.split()[trigger_len:])
    return PromptSpec(text=text, token_ids=tuple(ids), valid_len=valid_len)
