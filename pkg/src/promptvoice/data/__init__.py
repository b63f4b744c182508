from promptvoice.data.manifest import (
    DEFAULT_DESCRIPTOR_VOCABULARY,
    ManifestError,
    SpeakerPromptAnnotation,
    UtteranceRecord,
    load_manifest,
    load_speaker_prompts,
    save_manifest,
    save_speaker_prompts,
)
from promptvoice.data.alignment import AlignmentError, load_alignment
from promptvoice.data.splits import split_speakers

__all__ = [
    "DEFAULT_DESCRIPTOR_VOCABULARY",
    "ManifestError",
    "SpeakerPromptAnnotation",
    "UtteranceRecord",
    "load_manifest",
    "load_speaker_prompts",
    "save_manifest",
    "save_speaker_prompts",
    "AlignmentError",
    "load_alignment",
    "split_speakers",
]
