"""
Prompt Samples and Encoding
Instruction + history of (item token, title) + target item token, as token ids
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.catalog.tokenizer import BaseTokenizer
from app.catalog.vocabulary import ExpandedVocabulary

logger = logging.getLogger(__name__)

DEFAULT_INSTRUCTION = (
    "Given a list of items the user has bought before, "
    "please recommend a new item that the user likes to the user."
)
DEFAULT_INPUT_PREFIX = "Here is the list of items that the user has bought:"


class LossScope(str, Enum):
    """Which positions the next-token loss covers"""
    ALL = "all"
    OUTPUT_ONLY = "output_only"


class PromptTemplate(BaseModel):
    """Fixed per-dataset prompt text"""
    instruction: str = Field(DEFAULT_INSTRUCTION, description="Task instruction sentence")
    input_prefix: str = Field(DEFAULT_INPUT_PREFIX, description="Sentence introducing the history")
    include_target_title: bool = Field(
        False, description="Follow the target item token with its title in training samples"
    )


class PromptSample(BaseModel):
    """One tuning sample: chronological history and the next item"""
    model_config = ConfigDict(frozen=True)

    instruction: str = DEFAULT_INSTRUCTION
    input_prefix: str = DEFAULT_INPUT_PREFIX
    history: List[Tuple[int, str]] = Field(..., description="(item_index, title), oldest first")
    target: int = Field(..., ge=0)
    target_title: str = ""
    include_titles: bool = True

    @field_validator("history")
    @classmethod
    def history_not_empty(cls, value):
        if not value:
            raise ValueError("history must contain at least one item")
        return value

    @property
    def history_items(self) -> List[int]:
        return [item for item, _ in self.history]

    def with_titles(self, include_titles: bool) -> "PromptSample":
        return self.model_copy(update={"include_titles": include_titles})


@dataclass(frozen=True)
class EncodedSample:
    """
    Token encoding of a PromptSample

    loss_mask[t] == 1 marks token t as a prediction target; position 0 (BOS)
    is never a target. tokens[prompt_length] is the target item token.
    """
    tokens: List[int]
    loss_mask: List[int]
    prompt_length: int
    target: int

    @property
    def prompt_tokens(self) -> List[int]:
        return self.tokens[:self.prompt_length]

    def __len__(self) -> int:
        return len(self.tokens)


def encode_sample(
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    sample: PromptSample,
    loss_scope: LossScope = LossScope.ALL,
    include_target_title: bool = False
) -> EncodedSample:
    """
    Encode a sample as BOS + instruction + input (+ titles) + target item token + EOS

    Args:
        vocab: Expanded vocabulary (item tokens follow the base vocabulary)
        tokenizer: Base word tokenizer
        sample: Prompt sample; history indices must be valid items
        loss_scope: ALL masks every position after BOS, OUTPUT_ONLY the
            target item token onward
        include_target_title: Append the target's title tokens before EOS
            (only when the sample includes titles)

    Returns:
        EncodedSample
    """
    tokens = [tokenizer.bos_id]
    tokens.extend(tokenizer.encode(sample.instruction))
    tokens.extend(tokenizer.encode(sample.input_prefix))
    for item_index, title in sample.history:
        tokens.append(vocab.item_token_id(item_index))
        if sample.include_titles:
            tokens.extend(tokenizer.encode(title))

    prompt_length = len(tokens)
    tokens.append(vocab.item_token_id(sample.target))
    if include_target_title and sample.include_titles:
        tokens.extend(tokenizer.encode(sample.target_title))
    tokens.append(tokenizer.eos_id)

    if loss_scope == LossScope.OUTPUT_ONLY:
        loss_mask = [1 if t >= prompt_length else 0 for t in range(len(tokens))]
    else:
        loss_mask = [0] + [1] * (len(tokens) - 1)

    return EncodedSample(
        tokens=tokens,
        loss_mask=loss_mask,
        prompt_length=prompt_length,
        target=sample.target
    )


def encode_item_prompt(
    vocab: ExpandedVocabulary,
    tokenizer: BaseTokenizer,
    item_index: int,
    instruction: str = DEFAULT_INSTRUCTION,
    input_prefix: str = DEFAULT_INPUT_PREFIX
) -> List[int]:
    """Prompt ending at a single item token, used to read back what follows an item id"""
    tokens = [tokenizer.bos_id]
    tokens.extend(tokenizer.encode(instruction))
    tokens.extend(tokenizer.encode(input_prefix))
    tokens.append(vocab.item_token_id(item_index))
    return tokens
