"""Prompt component ablation and attribution.

The heavy lifting happens in the compiled ``_core`` extension; this module
converts its JSON payloads into Python objects.
"""

import json

from . import _core
from ._core import (
    PromptablateError,
    canonical_corruption,
    configuration_names,
    exact_match,
    format_score,
    jackknife_mean,
    macro_average,
    normalize_answer,
    per_token_norms,
    postprocess,
    prompt_hash,
    rouge_l,
    row_names,
    write_full_dump,
    write_reduced_dump,
)

__all__ = [
    "PromptablateError",
    "assemble",
    "attribute",
    "canonical_corruption",
    "configuration_names",
    "exact_match",
    "format_score",
    "jackknife_mean",
    "load_task",
    "macro_average",
    "normalize_answer",
    "per_token_norms",
    "postprocess",
    "prompt_hash",
    "report",
    "rouge_l",
    "row_names",
    "run",
    "sample_instance_indices",
    "validate_span_file",
    "write_full_dump",
    "write_reduced_dump",
    "write_span_file",
]


def _task_json(task):
    return task if isinstance(task, str) else json.dumps(task)


def load_task(path):
    """Load and validate a task file; returns the task as a dict."""
    return json.loads(_core.load_task(str(path)))


def assemble(task, configuration="baseline", input="", shots=4, corruption="none", seed=0,
             words="", corpus=""):
    """Render one prompt. Returns {"prompt_id", "text", "spans"}; span offsets
    are in code points."""
    return json.loads(_core.assemble(_task_json(task), configuration, input, shots, corruption, seed,
                                     str(words), str(corpus)))


def sample_instance_indices(task, n, seed, balanced=True):
    return _core.sample_instance_indices(_task_json(task), n, seed, balanced)


def write_span_file(path, prompt_id, token_texts, spans):
    """Write the span sidecar that accompanies an attention dump.

    ``spans`` is a list of dicts with keys kind, demo, start, end (token
    indices, half-open)."""
    doc = {"prompt_id": prompt_id, "token_texts": list(token_texts),
           "spans": [{"kind": s["kind"], "demo": s.get("demo"), "start": s["start"], "end": s["end"]}
                     for s in spans]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
        f.write("\n")


def validate_span_file(path, tokens):
    _core.validate_span_file(str(path), tokens)


def attribute(dumps, spans, include_query=False):
    """Average component attribution over paired dump and sidecar files."""
    return json.loads(_core.attribute([str(d) for d in dumps], [str(s) for s in spans], include_query))


def run(config_path, workers=1, resume=False, out=""):
    return json.loads(_core.run(str(config_path), workers, resume, str(out)))


def report(results_path):
    return json.loads(_core.report(str(results_path)))
