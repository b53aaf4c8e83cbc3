"""Long-context training data synthesis: context synthesis, NIAH, packing, scoring."""

from ._core import (
    ConfigError,
    Error,
    InputError,
    ParseError,
    TransportError,
    build_context_prompt,
    build_instruction_prompt,
    compose,
    compose_file,
    gap_file,
    gap_report,
    gen_niah,
    gen_pilot_dataset,
    generate_niah,
    load_pairs,
    make_context_free,
    normalize_answer,
    pack,
    pack_file,
    parse_context_response,
    parse_qa_response,
    sample_per_task,
    score_em,
    score_f1,
    score_file,
    score_rouge_l,
    synth_context,
    synth_instruction,
    template_mode_for_task,
    version,
)

__version__ = version()
