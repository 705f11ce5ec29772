"""
Next-Token Loss
Masked cross-entropy over the full expanded vocabulary
"""
import torch
import torch.nn.functional as F


def next_token_loss(
    logits: torch.Tensor,
    tokens: torch.Tensor,
    loss_mask: torch.Tensor
) -> torch.Tensor:
    """
    Mean cross-entropy of predicting token t from position t - 1

    Args:
        logits: (T, W) or (B, T, W) logits for the input tokens
        tokens: (T,) or (B, T) the same token ids the logits were computed from
        loss_mask: same shape as tokens; 1 marks tokens that are prediction
            targets (position 0 is never one)

    Returns:
        Scalar mean over masked target positions

    Raises:
        ValueError: shapes disagree or no position is masked in
    """
    if logits.dim() == 2:
        logits, tokens, loss_mask = logits.unsqueeze(0), tokens.unsqueeze(0), loss_mask.unsqueeze(0)
    if logits.shape[:2] != tokens.shape or tokens.shape != loss_mask.shape:
        raise ValueError(
            f"Shape mismatch: logits {tuple(logits.shape)}, tokens {tuple(tokens.shape)}, "
            f"mask {tuple(loss_mask.shape)}"
        )

    # logits at t predict tokens at t + 1
    pred = logits[:, :-1, :]
    targets = tokens[:, 1:]
    weights = loss_mask[:, 1:].to(pred.dtype)
    total = weights.sum()
    if total <= 0:
        raise ValueError("Loss mask selects no target positions")

    per_token = F.cross_entropy(
        pred.reshape(-1, pred.shape[-1]),
        targets.reshape(-1),
        reduction="none"
    )
    return (per_token * weights.reshape(-1)).sum() / total
