"""Configuration for the mobility simulator."""

from config.model_config import ModelConfig

__all__ = ["ModelConfig"]
