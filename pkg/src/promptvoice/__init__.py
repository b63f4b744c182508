"""Prompt-controlled speech synthesis.

Natural-language prompts describe a voice ("A man speaks slowly in a low
tone. His voice is deep and husky."). A text encoder maps the prompt to a
mixture density over unit-norm style embeddings; a sampled embedding
conditions duration, pitch, and a diffusion mel decoder. The same style
space is reachable from reference audio, so utterances can be synthesized
from either a description or an example recording.
"""

__version__ = "0.1.0"

from .config import Config, ConfigError, load_config, resolve_config

__all__ = ["Config", "ConfigError", "load_config", "resolve_config", "__version__"]
