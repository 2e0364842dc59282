"""Published reference figures, attached to reports as annotations.

These came from proprietary models on undisclosed data. They are never used
as assertions; percentages are stored as fractions.
"""

from __future__ import annotations

from .core import TaskKind

# task kind -> method -> {"lc": ..., "ecr": ...}
MULTI_TASK: dict[TaskKind, dict[str, dict[str, float | None]]] = {
    TaskKind.ARITHMETIC: {
        "cot": {"lc": 0.85, "ecr": None},
        "mcot": {"lc": 0.92, "ecr": 0.15},
        "prcot": {"lc": 0.94, "ecr": 0.17},
    },
    TaskKind.COMMONSENSE: {
        "cot": {"lc": 0.78, "ecr": None},
        "mcot": {"lc": 0.85, "ecr": 0.12},
        "prcot": {"lc": 0.87, "ecr": 0.14},
    },
    TaskKind.ETHICS: {
        "cot": {"lc": 0.74, "ecr": None},
        "mcot": {"lc": 0.81, "ecr": 0.18},
        "prcot": {"lc": 0.84, "ecr": 0.21},
    },
    TaskKind.LOGIC_PUZZLE: {
        "cot": {"lc": 0.82, "ecr": None},
        "mcot": {"lc": 0.90, "ecr": 0.20},
        "prcot": {"lc": 0.93, "ecr": 0.23},
    },
}

# Published "improvement vs CoT" columns, copied verbatim. Some do not equal
# the LC difference of the same row (commonsense: 85-78 listed as +9).
MULTI_TASK_IMPROVEMENT: dict[TaskKind, dict[str, float]] = {
    TaskKind.ARITHMETIC: {"mcot": 0.07, "prcot": 0.09},
    TaskKind.COMMONSENSE: {"mcot": 0.09, "prcot": 0.11},
    TaskKind.ETHICS: {"mcot": 0.10, "prcot": 0.13},
    TaskKind.LOGIC_PUZZLE: {"mcot": 0.10, "prcot": 0.13},
}

# Leave-one-out study on the ethics task, keyed by report row label.
ABLATION: dict[str, dict[str, float]] = {
    "CoT Baseline": {"lc": 0.74, "ecr": 0.18},
    "MCoT (Single Reflection)": {"lc": 0.81, "ecr": 0.18},
    "PR-CoT Full (v1, v2, v3, v4)": {"lc": 0.84, "ecr": 0.21},
    "PR-CoT w/o v1": {"lc": 0.79, "ecr": 0.19},
    "PR-CoT w/o v2": {"lc": 0.80, "ecr": 0.19},
    "PR-CoT w/o v3": {"lc": 0.77, "ecr": 0.18},
    "PR-CoT w/o v4": {"lc": 0.82, "ecr": 0.20},
}

# Perspective-count sweep on the ethics task, keyed by prefix length.
INCREMENTAL: dict[int, dict[str, float]] = {
    0: {"lc": 0.74, "ecr": 0.18},
    1: {"lc": 0.81, "ecr": 0.18},
    2: {"lc": 0.82, "ecr": 0.19},
    3: {"lc": 0.83, "ecr": 0.20},
    4: {"lc": 0.84, "ecr": 0.21},
}

# Average per-task cost on a mixed task set.
EFFICIENCY: dict[str, dict[str, float]] = {
    "cot": {"tokens": 450, "seconds": 5.2},
    "mcot": {"tokens": 800, "seconds": 8.5},
    "prcot": {"tokens": 2100, "seconds": 20.3},
}
