"""Reference bridge adapter: a small PyTorch detector behind the ladder
bridge subprocess protocol (verify / detect / train)."""

from .model import GridDetector, init_weights, load_weights, save_weights

__all__ = ["GridDetector", "init_weights", "load_weights", "save_weights"]
