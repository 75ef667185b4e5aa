"""Report writers: delimited tables, JSON summaries and rendered figures.

Every writer is deterministic for identical inputs (figures are saved
without timestamps) so reruns produce byte-identical artifacts.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .analysis import GroupComparison  # noqa: E402
from .relevance import Metrics  # noqa: E402

_SAVE_KW = {"metadata": {"Software": None}, "dpi": 120}


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_tsv(path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


# ---------------------------------------------------------------------------
# Relevance: F1/accuracy per domain and mode
# ---------------------------------------------------------------------------


def relevance_row(domain: str, mode: str, metrics: Metrics) -> dict:
    return {
        "domain": domain,
        "mode": mode,
        "f1": metrics.f1,
        "accuracy": metrics.accuracy,
        "precision": metrics.precision,
        "recall": metrics.recall,
    }


def write_relevance_report(rows: list[dict], json_path, tsv_path=None,
                           fig_path=None, seed: int = 0,
                           config_digest: str = "") -> None:
    _write_json(json_path, {"seed": seed, "config_digest": config_digest,
                            "rows": rows})
    if tsv_path is not None:
        _write_tsv(
            tsv_path,
            ["domain", "mode", "f1", "accuracy", "precision", "recall"],
            [[r["domain"], r["mode"], f"{r['f1']:.4f}", f"{r['accuracy']:.4f}",
              f"{r['precision']:.4f}", f"{r['recall']:.4f}"] for r in rows],
        )
    if fig_path is not None:
        render_relevance_figure(rows, fig_path)


def render_relevance_figure(rows: list[dict], path) -> None:
    labels = [f"{r['domain']}\n({r['mode']})" for r in rows]
    x = range(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(rows) + 1.5), 3.2))
    ax.bar([i - width / 2 for i in x], [r["f1"] for r in rows], width, label="F1")
    ax.bar([i + width / 2 for i in x], [r["accuracy"] for r in rows], width,
           label="accuracy")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("score")
    ax.set_title("Medical relevance detection")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Tagger: span and token F1 per variant
# ---------------------------------------------------------------------------


def tagger_row(variant: str, span: Metrics, token: Metrics) -> dict:
    return {
        "variant": variant,
        "span_f1": span.f1,
        "span_precision": span.precision,
        "span_recall": span.recall,
        "token_f1": token.f1,
        "token_precision": token.precision,
        "token_recall": token.recall,
        "token_accuracy": token.accuracy,
    }


def write_tagger_report(rows: list[dict], json_path, tsv_path=None,
                        fig_path=None, seed: int = 0,
                        config_digest: str = "") -> None:
    _write_json(json_path, {"seed": seed, "config_digest": config_digest,
                            "rows": rows})
    if tsv_path is not None:
        _write_tsv(
            tsv_path,
            ["variant", "span_f1", "span_precision", "span_recall",
             "token_f1", "token_precision", "token_recall", "token_accuracy"],
            [[r["variant"]] + [f"{r[k]:.4f}" for k in
                               ("span_f1", "span_precision", "span_recall",
                                "token_f1", "token_precision", "token_recall",
                                "token_accuracy")] for r in rows],
        )
    if fig_path is not None:
        render_tagger_figure(rows, fig_path)


def render_tagger_figure(rows: list[dict], path) -> None:
    labels = [r["variant"] for r in rows]
    y = range(len(rows))
    height = 0.38
    fig, ax = plt.subplots(figsize=(6.0, max(2.5, 0.6 * len(rows) + 1.2)))
    ax.barh([i + height / 2 for i in y], [r["span_f1"] for r in rows], height,
            label="span F1")
    ax.barh([i - height / 2 for i in y], [r["token_f1"] for r in rows], height,
            label="token F1")
    ax.set_yticks(list(y))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("F1")
    ax.set_title("Anchor detection")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Keywords
# ---------------------------------------------------------------------------


def write_keyword_report(top: list[tuple[str, int]], spread: float, json_path,
                         tsv_path=None, fig_path=None, seed: int = 0,
                         config_digest: str = "") -> None:
    _write_json(json_path, {
        "seed": seed,
        "config_digest": config_digest,
        "top_keywords": [{"keyword": w, "count": c} for w, c in top],
        "misinfo_spread": spread,
    })
    if tsv_path is not None:
        _write_tsv(tsv_path, ["keyword", "count"],
                   [[w, str(c)] for w, c in top])
    if fig_path is not None:
        render_keyword_figure(top, spread, fig_path)


def render_keyword_figure(top: list[tuple[str, int]], spread: float, path) -> None:
    words = [w for w, _ in top]
    counts = [c for _, c in top]
    fig, ax = plt.subplots(figsize=(6.0, max(2.5, 0.35 * len(top) + 1.2)))
    ax.barh(range(len(top)), counts, color="#4878a8")
    ax.set_yticks(range(len(top)))
    ax.set_yticklabels(words, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("tweets")
    ax.set_title(f"Top anchors (misinformation spread {spread:.2%})")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Group comparison
# ---------------------------------------------------------------------------


def comparison_row(row: GroupComparison) -> dict:
    return {
        "feature": row.feature,
        "mean_misinfo": row.mean_misinfo,
        "mean_correct": row.mean_correct,
        "t": row.t_statistic,
        "df": row.degrees_of_freedom,
        "p": row.p_value,
        "signed_log_odds": row.signed_log_odds,
        "significant": row.significant,
    }


def write_comparison_report(rows: list[GroupComparison], tsv_path,
                            json_path=None, fig_path=None, seed: int = 0,
                            config_digest: str = "") -> None:
    _write_tsv(
        tsv_path,
        ["feature", "mean_misinfo", "mean_correct", "t", "df", "p",
         "signed_log_odds", "significant"],
        [[r.feature, f"{r.mean_misinfo:.6g}", f"{r.mean_correct:.6g}",
          f"{r.t_statistic:.6g}", f"{r.degrees_of_freedom:.6g}",
          f"{r.p_value:.6g}", f"{r.signed_log_odds:.6g}",
          str(r.significant).lower()] for r in rows],
    )
    if json_path is not None:
        _write_json(json_path, {
            "seed": seed,
            "config_digest": config_digest,
            "rows": [comparison_row(r) for r in rows],
        })
    if fig_path is not None:
        render_comparison_figure(rows, fig_path)


def render_comparison_figure(rows: list[GroupComparison], path,
                             only_significant: bool = True,
                             max_rows: int = 20) -> None:
    """Diverging bars: correct group left, misinformed group right."""
    shown = [r for r in rows if r.significant] if only_significant else list(rows)
    shown = shown[:max_rows]
    fig, ax = plt.subplots(figsize=(6.0, max(2.5, 0.35 * len(shown) + 1.2)))
    values = [r.signed_log_odds for r in shown]
    colors = ["#b0413e" if v > 0 else "#4878a8" for v in values]
    ax.barh(range(len(shown)), values, color=colors)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_yticks(range(len(shown)))
    ax.set_yticklabels([r.feature for r in shown], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("signed log odds ratio (right = misinformed)")
    ax.set_title("Linguistic variation between groups")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
