"""Prompt template registry and literal slot substitution.

Template bodies are byte-exact contracts: the acceptance tests diff them
against committed golden files, so edit them only with the goldens. Slots
are `{name}` markers replaced by literal substitution in a single pass;
undeclared brace text (like the literal JSON shape in the filter prompt)
passes through untouched and substituted values are never rescanned.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .errors import PromptError

EXTRACTOR = "extractor"
COT_GUIDANCE = "cot_guidance"
CHUNK_FILTER = "chunk_filter"
GENERATOR = "generator"
INSTRUCT_EXTRACTOR_TEACHER = "instruct_extractor_teacher"
INSTRUCT_EXTRACTOR_JUDGE = "instruct_extractor_judge"
INSTRUCT_COT_TEACHER = "instruct_cot_teacher"
INSTRUCT_COT_JUDGE = "instruct_cot_judge"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    slots: tuple[str, ...]


_EXTRACTOR_BODY = """\
{content}
Based on the above background, please output the information you need to cite to answer the question below.
{question}"""

_COT_GUIDANCE_BODY = """\
{content}
Please combine the above information and give your thought process for the following
Question:{question}"""

_CHUNK_FILTER_BODY = """\
Given an article:{content}
Question:{question}
Thought process for the question:{cot}

Your task is to use the thought process provided to decide whether you need to cite the article to answer this question. If you need to cite the article, set the status value to True. If not, set the status value to False. Please output the response in the following json format:
{"status": {the value of status}}"""

_GENERATOR_BODY = """\
{content}
Based on the above information, Only give me the answer and do not output any other words.
Question:{question}"""

_INSTRUCT_EXTRACTOR_TEACHER_BODY = (
    """\
{content}

Based on the above background only, please output the original information that needs to be cited to answer the following questions. Please ensure that the information cited is detailed and comprehensive.

Question:{question}

Output only the original information of the required reference:"""
    + " "
)

_INSTRUCT_EXTRACTOR_JUDGE_BODY = """\
I am going to provide you with a question, the background information, and the answer to that question. Please evaluate whether the answer can be solely derived from the given background information. If it can, set the status value as True, if it can’t, set the status value as False.

Question:{question}

Background Information:{info}

Answer:{answer}

Your output format should be the following json format:
status: {the value of status}"""

_INSTRUCT_COT_TEACHER_BODY = (
    """\
{content}

Given question:{question}

The answer is:{answer}

Your task is to give your thought process for this given question based on the above information, only give me your thought process and do not output other information.
Thought process:"""
    + " "
)

_INSTRUCT_COT_JUDGE_BODY = """\
Question:{question}

Thought process of the question:{cot}

Answer:{answer}

Please evaluate whether the thought process of this question can explain the answer to this question. If it can explain the answer, set the value of status to True. If it cannot explain the answer, set the value of status to False. Your output format should be the following json format:
status: {the value of status}"""


_REGISTRY: dict[str, PromptTemplate] = {
    template.name: template
    for template in (
        PromptTemplate(EXTRACTOR, _EXTRACTOR_BODY, ("content", "question")),
        PromptTemplate(COT_GUIDANCE, _COT_GUIDANCE_BODY, ("content", "question")),
        PromptTemplate(CHUNK_FILTER, _CHUNK_FILTER_BODY, ("content", "question", "cot")),
        PromptTemplate(GENERATOR, _GENERATOR_BODY, ("content", "question")),
        PromptTemplate(
            INSTRUCT_EXTRACTOR_TEACHER, _INSTRUCT_EXTRACTOR_TEACHER_BODY, ("content", "question")
        ),
        PromptTemplate(
            INSTRUCT_EXTRACTOR_JUDGE, _INSTRUCT_EXTRACTOR_JUDGE_BODY, ("question", "info", "answer")
        ),
        PromptTemplate(
            INSTRUCT_COT_TEACHER, _INSTRUCT_COT_TEACHER_BODY, ("content", "question", "answer")
        ),
        PromptTemplate(
            INSTRUCT_COT_JUDGE, _INSTRUCT_COT_JUDGE_BODY, ("question", "cot", "answer")
        ),
    )
}


def get_template(name: str) -> PromptTemplate:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise PromptError(f"unknown template {name!r}") from None


def template_names() -> list[str]:
    return sorted(_REGISTRY)


def render(template: PromptTemplate, slots: Mapping[str, str]) -> str:
    """Fill every declared slot by literal substitution, one pass, no escaping.

    Missing or extra slot names raise naming the offending placeholder.
    """
    declared = set(template.slots)
    provided = set(slots)
    missing = declared - provided
    if missing:
        raise PromptError(f"missing slot {{{sorted(missing)[0]}}} for template {template.name!r}")
    extra = provided - declared
    if extra:
        raise PromptError(f"extra slot {{{sorted(extra)[0]}}} for template {template.name!r}")
    for name in template.slots:
        if not isinstance(slots[name], str):
            raise PromptError(f"slot {{{name}}} must be a string")

    if not declared:
        return template.body
    marker = re.compile("|".join(re.escape("{" + name + "}") for name in template.slots))
    return marker.sub(lambda m: slots[m.group(0)[1:-1]], template.body)
