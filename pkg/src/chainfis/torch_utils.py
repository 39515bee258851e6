import numpy as np
import torch

# Premise gradients must agree with finite differences to 1e-4 relative error.
DTYPE = torch.float64


def set_num_threads(n: int) -> None:
    """
    Set the number of CPU threads used by torch during ANFIS training.
    """
    torch.set_num_threads(n)


def as_tensor(values: np.ndarray, requires_grad: bool = False) -> torch.Tensor:
    """Copy an array into a float64 tensor."""
    tensor = torch.tensor(np.asarray(values, dtype=float), dtype=DTYPE)
    if requires_grad:
        tensor.requires_grad_(True)
    return tensor


def to_numpy(tensor: torch.Tensor) -> np.ndarray:
    return tensor.detach().cpu().numpy().astype(float)
