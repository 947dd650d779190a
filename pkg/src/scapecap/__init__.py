"""Soundscape captioning: acoustic features, a multi-task acoustic model,
LLM prompt assembly and caption-quality statistics."""

__version__ = "0.1.0"
