"""Learning and MAP inference for stratified possibilistic relational theories."""

from ._possrl import (
    BudgetError,
    DomainError,
    EvidenceError,
    Example,
    InfeasibleError,
    IoError,
    ParseError,
    SignatureError,
    SizeError,
    Theory,
    count,
    evaluate,
    exact_encoding,
    infer,
    learn,
    learn_hard_rules,
    parse_example,
    parse_theory,
    read_example,
    read_theory,
    synth,
)

__all__ = [
    "BudgetError",
    "DomainError",
    "EvidenceError",
    "Example",
    "InfeasibleError",
    "IoError",
    "ParseError",
    "SignatureError",
    "SizeError",
    "Theory",
    "count",
    "evaluate",
    "exact_encoding",
    "infer",
    "learn",
    "learn_hard_rules",
    "parse_example",
    "parse_theory",
    "read_example",
    "read_theory",
    "synth",
]
