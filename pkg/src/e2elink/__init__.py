"""End-to-end learned link simulator.

Autoencoder transmitter/receiver pairs trained through a known channel, a
GAN channel surrogate (plain or with a residual skip connection), or a
policy-gradient baseline, plus the channels, experiment CLI, and a small
numpy reverse-mode autodiff engine underneath.
"""

from .adversarial import AdversarialPair, GeneratorInput
from .channels import ChannelDataset, ChannelRealization, PilotFrame
from .comms import LinkConfig, Message, ProbVector, Signal
from .training import ChannelSpec, Scheme, TrainReport, TrainResult, train

__all__ = [
    "AdversarialPair",
    "GeneratorInput",
    "ChannelDataset",
    "ChannelRealization",
    "PilotFrame",
    "LinkConfig",
    "Message",
    "ProbVector",
    "Signal",
    "ChannelSpec",
    "Scheme",
    "TrainReport",
    "TrainResult",
    "train",
]
