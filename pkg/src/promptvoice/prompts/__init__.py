from promptvoice.prompts.thresholds import (
    ATTRIBUTES,
    StyleLevels,
    ThresholdTable,
    assign_levels,
    compute_thresholds,
)
from promptvoice.prompts.templates import (
    Lexicon,
    PromptTemplate,
    TemplateError,
    compose_prompt,
    count_surface_forms,
    default_lexicon,
    default_templates,
    load_lexicon,
    load_templates,
    parse_style_prompt,
    render_style_prompt,
)

__all__ = [
    "ATTRIBUTES",
    "StyleLevels",
    "ThresholdTable",
    "assign_levels",
    "compute_thresholds",
    "Lexicon",
    "PromptTemplate",
    "TemplateError",
    "compose_prompt",
    "count_surface_forms",
    "default_lexicon",
    "default_templates",
    "load_lexicon",
    "load_templates",
    "parse_style_prompt",
    "render_style_prompt",
]
