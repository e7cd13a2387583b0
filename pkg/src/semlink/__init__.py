"""semlink: seedable link-level simulator for multimodal semantic communication.

Transmits semantic features from two single-modality users over noisy
SISO/MIMO channels, estimates the channel from pilots, detects with a
zero-forcing equalizer, fuses the recovered audio/visual semantics, and
scores segment-level event classification across SNR sweeps.
"""

__version__ = "0.1.0"

from .errors import SemLinkError  # noqa: F401
