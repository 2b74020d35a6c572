from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

METHODS = ("fgsm", "ifgsm", "ifgsm-clip", "fgsm-targeted", "ifgsm-targeted", "cw")
TARGETED = ("fgsm-targeted", "ifgsm-targeted", "cw")


@dataclass
class CWParams:
    c: float = 10.0
    kappa: float = 0.0
    learning_rate: float = 0.01
    steps: int = 10

    def __post_init__(self):
        if self.c < 0 or self.kappa < 0:
            raise ValueError("cw requires c >= 0 and kappa >= 0")
        if self.learning_rate <= 0 or self.steps < 0:
            raise ValueError("cw requires learning_rate > 0 and steps >= 0")


@dataclass
class AttackConfig:
    """Method tag plus every knob the attacks read.

    ``target`` is required for the targeted methods; ``clip_alpha`` is read by
    ``ifgsm-clip`` (and optionally by ``ifgsm-targeted``).
    """

    method: str = "fgsm"
    epsilon: float = 0.02
    iterations: int = 1
    clip_alpha: Optional[float] = None
    target: Optional[int] = None
    cw: CWParams = field(default_factory=CWParams)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}; expected one of {METHODS}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.clip_alpha is not None and self.clip_alpha < 0:
            raise ValueError("clip_alpha must be >= 0")
        if self.method == "ifgsm-clip" and self.clip_alpha is None:
            raise ValueError("ifgsm-clip requires clip_alpha")
        if self.method in TARGETED and self.target is None:
            raise ValueError(f"{self.method} requires a target class")


@dataclass
class AttackResult:
    adversarial: np.ndarray
    loss_before: float
    loss_after: float
    label_before: int
    label_after: int
    per_step_losses: List[float]
    success: bool
    target: Optional[int] = None

    def l2_delta(self, x):
        return float(np.linalg.norm((self.adversarial - np.asarray(x)).ravel()))

    def linf_delta(self, x):
        return float(np.max(np.abs(self.adversarial - np.asarray(x))))
