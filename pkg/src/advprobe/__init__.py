"""FGSM-family and CW-L2 attacks on small ReLU networks, with the thresholds under
which they provably move the loss or class-probability ratio."""
from .attacks import (AttackConfig, AttackResult, closed_form_cw_delta, cw_l2, fgsm,
                      fgsm_targeted, ifgsm, ifgsm_clipped, ifgsm_targeted,
                      interpolate_adversarial, run_attack)
from .arch import build_network
from .data import Dataset, gen_blobs, load_idx
from .estimators import AdversarialAttack, NetworkClassifier
from .network import Conv2d, Linear, Network, ReLU, conv_as_matrix, train

__version__ = "0.1.0"
