"""Utterance-level multimodal emotion recognition pipeline."""

__version__ = "0.1.0"
