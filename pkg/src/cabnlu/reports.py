"""Rendering CvReports: fixed-width tables, delimited rows, and figures."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .crossval import CvReport
from .errors import ConfigError

SLOT_STYLE = "slot_table"
KEYWORD_STYLE = "keyword_table"
INTENT_MODEL_STYLE = "intent_model_table"
INTENT_WISE_STYLE = "intent_wise_table"
STYLES = (SLOT_STYLE, KEYWORD_STYLE, INTENT_MODEL_STYLE, INTENT_WISE_STYLE)

AVERAGE_LABEL = "AVERAGE"

SLOT_DISPLAY = {"TimeGuidance": "Time Guidance"}
KEYWORD_DISPLAY = {"NonIntent": "Non-Intent"}
INTENT_DISPLAY = {"SetChangeDest": "Set/ChangeDest", "SetChangeRoute": "Set/ChangeRoute"}

MODEL_DISPLAY = {
    "hybrid1": "Hybrid-1: RNN + Rule-based (intent keywords)",
    "hybrid2": "Hybrid-2: RNN + Rule-based (intent keywords & slots)",
    "separate1": "Separate-1: Seq2one Bi-LSTM",
    "separate2": "Separate-2: Seq2one Bi-LSTM + Attention (withContext)",
    "joint": "Joint: Seq2seq Bi-LSTM (intent keywords & slots & utterance-level intent types)",
    "hier_separate1": "Hierarchical & Separate-1",
    "hier_separate2": "Hierarchical & Separate-2 (Separate-1 + Attention)",
    "hier_joint": "Hierarchical & Joint",
}
INTENT_LEVEL_SPECS = tuple(MODEL_DISPLAY)

SCENARIO_GROUPS = (
    ("Finishing the Trip Use-cases", ("Stop", "Park", "PullOver", "DropOff")),
    ("Set/Change Destination/Route", ("SetChangeDest", "SetChangeRoute")),
    ("Set/Change Driving Behavior/Speed", ("GoFaster", "GoSlower")),
    ("Others (Door, Music, A/C, etc.)", ("OpenDoor", "Other")),
)


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for j, cell in enumerate(row):
            widths[j] = max(widths[j], len(cell))
    def fmt(cells):
        return " | ".join(c.ljust(widths[j]) for j, c in enumerate(cells)).rstrip()
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(headers), rule] + [fmt(r) for r in rows]) + "\n"


def _f1_by_label(report: CvReport) -> dict[str, float]:
    return {c.label: c.f1 for c in report.classes}


def render_report(report: CvReport | Sequence[CvReport], style: str) -> str:
    """Fixed-width table mirroring the corresponding results-table layout."""
    if style not in STYLES:
        raise ConfigError(f"unknown report style {style!r}")

    if style == INTENT_MODEL_STYLE:
        reports = [report] if isinstance(report, CvReport) else list(report)
        for r in reports:
            if r.task not in INTENT_LEVEL_SPECS:
                raise ConfigError(f"style {style!r} needs intent-level reports, got {r.task!r}")
        rows = [[MODEL_DISPLAY[r.task], f"{r.weighted_f1:.2f}"] for r in reports]
        return _table(["Utterance-level Intent Detection Models", "F1"], rows)

    if not isinstance(report, CvReport):
        raise ConfigError(f"style {style!r} renders a single report")

    if style == SLOT_STYLE:
        if report.task != "slot_tagger":
            raise ConfigError(f"style {style!r} needs a slot_tagger report, got {report.task!r}")
        f1 = _f1_by_label(report)
        rows = [[SLOT_DISPLAY.get(c.label, c.label), f"{f1[c.label]:.2f}"]
                for c in report.classes]
        rows.append([AVERAGE_LABEL, f"{report.weighted_f1:.2f}"])
        return _table(["Slot Type", "F1"], rows)

    if style == KEYWORD_STYLE:
        if report.task != "keyword_tagger":
            raise ConfigError(
                f"style {style!r} needs a keyword_tagger report, got {report.task!r}")
        f1 = _f1_by_label(report)
        rows = [[KEYWORD_DISPLAY.get(c.label, c.label), f"{f1[c.label]:.2f}"]
                for c in report.classes]
        rows.append([AVERAGE_LABEL, f"{report.weighted_f1:.2f}"])
        return _table(["Keyword Type", "F1"], rows)

    # intent-wise table
    if report.task not in INTENT_LEVEL_SPECS:
        raise ConfigError(f"style {style!r} needs an intent-level report, got {report.task!r}")
    f1 = _f1_by_label(report)
    rows = []
    for scenario, intents in SCENARIO_GROUPS:
        for i, intent in enumerate(intents):
            rows.append([scenario if i == 0 else "",
                         INTENT_DISPLAY.get(intent, intent), f"{f1[intent]:.2f}"])
    rows.append(["", AVERAGE_LABEL, f"{report.weighted_f1:.2f}"])
    return _table(["AMIE Scenario", "Intent Type", "F1"], rows)


def render_delimited(report: CvReport) -> str:
    """Tab-separated per-class metrics plus the average row."""
    lines = ["label\tsupport\tprecision\trecall\tf1"]
    for c in report.classes:
        lines.append(f"{c.label}\t{c.support}\t{c.precision:.6f}\t{c.recall:.6f}\t{c.f1:.6f}")
    total = sum(c.support for c in report.classes)
    lines.append(f"{AVERAGE_LABEL}\t{total}\t\t\t{report.weighted_f1:.6f}")
    return "\n".join(lines) + "\n"


def render_figure(report: CvReport | Sequence[CvReport], style: str, path: str) -> None:
    """Per-class (or per-model) F1 bar chart written to ``path``."""
    if style not in STYLES:
        raise ConfigError(f"unknown report style {style!r}")
    if style == INTENT_MODEL_STYLE:
        reports = [report] if isinstance(report, CvReport) else list(report)
        names = [MODEL_DISPLAY.get(r.task, r.task) for r in reports]
        values = [r.weighted_f1 for r in reports]
        title = "Utterance-level intent recognition (10-fold CV)"
        avg = None
    else:
        assert isinstance(report, CvReport)
        display = {SLOT_STYLE: SLOT_DISPLAY, KEYWORD_STYLE: KEYWORD_DISPLAY,
                   INTENT_WISE_STYLE: INTENT_DISPLAY}[style]
        names = [display.get(c.label, c.label) for c in report.classes]
        values = [c.f1 for c in report.classes]
        title = f"{report.task}: per-class F1"
        avg = report.weighted_f1

    fig, ax = plt.subplots(figsize=(7, max(2.2, 0.42 * len(names) + 1.2)))
    ypos = range(len(names))
    ax.barh(ypos, values, color="#4878a8")
    ax.set_yticks(list(ypos))
    ax.set_yticklabels(names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("F1")
    ax.set_title(title, fontsize=10)
    if avg is not None:
        ax.axvline(avg, color="#a84848", linestyle="--", linewidth=1,
                   label=f"weighted avg {avg:.2f}")
        ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
