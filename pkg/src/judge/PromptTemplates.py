# *************************************************************************************************************************
#   PromptTemplates.py
#       Load the versioned judge prompt templates under config/prompts and render judge prompts from traces.
# -------------------------------------------------------------------------------------------------------------------
#   Template files:
#       '# ...' header lines, then sections introduced by '[name]' lines. Judge templates define [system], [response],
#       [step] and [strict]; label templates define [system], [label] and [strict]. Sections are str.format templates.
#
#   Design Notes:
#   -.  Rendering is a pure function of the trace, granularity and step index; identical inputs give identical bytes.
#   -.  The step prompt for step i shows history Q_1..Q_{i-1}, R_1..R_{i-1}, then Q_i and R_i; nothing from later
#       steps. History sections of consecutive steps extend one another.
# *************************************************************************************************************************

import os
import re
from functools import lru_cache

from config.DEFAULTS import (DEFAULT_PROMPT_DIR, GRANULARITY_RESPONSE,
                             GRANULARITY_STEP)
from src.utils.errors import ConfigError, ScorerError

SECTION_PATTERN = re.compile(r"^\[(\w+)\]\s*$")

SCALE_HINTS = {
    "unit": "number between 0 and 1",
    "percent": "percentage between 0 and 100",
}


@lru_cache(maxsize=None)
def load_template(template_id, prompt_dir=DEFAULT_PROMPT_DIR):
    path = os.path.join(prompt_dir, f"{template_id}.txt")
    if not os.path.isfile(path):
        raise ConfigError(f"unknown prompt template '{template_id}'", field_path="judge.template")
    sections, current = {}, None
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle.read().splitlines():
            match = SECTION_PATTERN.match(line)
            if match:
                current = match.group(1)
                sections[current] = []
            elif current is not None:
                sections[current].append(line)
    return {name: "\n".join(lines).strip("\n") for name, lines in sections.items()}


def format_turn(index, query, response):
    return f"[Step {index}]\nQuery: {query}\nResponse: {response}"


def render_history(trace, step_index):
    """
    Queries and responses of steps 1 .. step_index - 1.
    """
    return "\n\n".join(format_turn(k, s.query, s.response)
                       for k, s in enumerate(trace.steps[:step_index - 1], start=1))


def render_judge_prompt(trace, granularity, step_index=None, template_id="judge_v1", scale="unit"):
    template = load_template(template_id)
    scale_hint = SCALE_HINTS[scale]
    if granularity == GRANULARITY_RESPONSE:
        if step_index is not None:
            raise ScorerError("response-level prompts take no step index", trace_id=trace.id)
        interaction = "\n\n".join(format_turn(k, s.query, s.response) for k, s in enumerate(trace.steps, start=1))
        return template["response"].format(context=trace.context, interaction=interaction, scale_hint=scale_hint)
    if granularity == GRANULARITY_STEP:
        if step_index is None or not (1 <= step_index <= trace.n):
            raise ScorerError(f"step index {step_index} outside 1..{trace.n}", trace_id=trace.id, step_index=step_index)
        step = trace.step(step_index)
        return template["step"].format(context=trace.context, history=render_history(trace, step_index),
                                       query=step.query, response=step.response, scale_hint=scale_hint)
    raise ScorerError(f"unknown granularity '{granularity}'", trace_id=trace.id)


def render_label_prompt(response, gold, context, template_id="label_v1"):
    template = load_template(template_id)
    return template["label"].format(context=context, gold=gold, response=response)


def system_text(template_id):
    return load_template(template_id).get("system", "")


def strict_text(template_id, scale="unit"):
    return load_template(template_id)["strict"].format(scale_hint=SCALE_HINTS[scale])
