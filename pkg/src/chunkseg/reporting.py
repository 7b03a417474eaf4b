"""File outputs: CSV/JSON/SVG writers and Q-table serialization.

All numeric output uses dot decimals and `repr` floats, so a rerun with the
same config and seed reproduces files byte for byte (the manifest's wall
clock duration is the one deliberate exception).  Floats round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable

import numpy as np

from .agent import QTable
from .environment import EpisodeRecord
from .experiment import (ExtractedRule, LearningCurve, LogisticFit,
                         ParseFrequencyReport, breakdown_by_length, moving_average)


def save_qtable_csv(path, table: QTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state_key", "action", "value"])
        for state_key, action, value in table.records():
            writer.writerow([state_key, action, repr(value)])


def load_qtable_csv(path, q_b: float = 1.0, q_c: float = -1.0) -> QTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        records = [(row["state_key"], int(row["action"]), float(row["value"]))
                   for row in reader]
    return QTable.from_records(records, q_b, q_c)


def save_qtable_json(path, table: QTable) -> None:
    payload = {
        "q_b": table.q_b,
        "q_c": table.q_c,
        "entries": [[state_key, action, value] for state_key, action, value in table.records()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def load_qtable_json(path) -> QTable:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return QTable.from_records(payload["entries"], payload["q_b"], payload["q_c"])


def write_curve_csv(path, curve: LearningCurve) -> None:
    """Raw (unsmoothed) per-trial fractions: overall plus one pair of columns per length."""
    by_length = breakdown_by_length(curve)
    lengths = sorted(by_length)
    header = ["trial", "fraction"]
    for length in lengths:
        header += [f"len{length}_fraction", f"len{length}_count"]
    fraction = curve.fraction_correct
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(curve.n_trials):
            row = [t + 1, repr(float(fraction[t]))]
            for length in lengths:
                lc = by_length[length]
                count = int(lc.count[t])
                row.append(repr(float(lc.fraction[t])) if count else "")
                row.append(count)
            writer.writerow(row)


def read_curve_csv(path) -> dict[str, np.ndarray]:
    """Columns of a curve.csv, keyed by header name; empty cells become NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        values = [float(row[j]) if row[j] != "" else np.nan for row in rows]
        columns[name] = np.array(values)
    return columns


def write_rules_csv(path, rules: Iterable[ExtractedRule]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["first_pattern", "second_pattern", "action", "action_label",
                         "mean_q", "instance_count", "total_instances"])
        for rule in rules:
            writer.writerow([rule.first_pattern, rule.second_pattern, rule.action,
                             rule.action_label, repr(rule.mean_q),
                             rule.instance_count, rule.total_instances])


def write_parses_csv(path, report: ParseFrequencyReport) -> None:
    frequencies = report.frequencies()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sentence_pattern", "tree_pattern", "count", "frequency",
                         "catalan_bound"])
        for sentence in sorted(frequencies, key=lambda s: (len(s.split()), s)):
            bound = report.catalan_bound(sentence)
            for tree, freq in frequencies[sentence].items():
                writer.writerow([sentence, tree, report.tallies[sentence][tree],
                                 repr(freq), bound])


def write_fit_json(path, fit: LogisticFit) -> None:
    payload = {"k": fit.k, "x0": fit.x0, "learning_time": fit.learning_time,
               "residual": fit.residual, "ok": fit.ok}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_episode_log_csv(path, records: Iterable[EpisodeRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_index", "correct", "reward", "sentence_length",
                         "steps", "final_tree_pattern"])
        for r in records:
            writer.writerow([r.trial_index, int(r.correct), repr(r.reward),
                             r.sentence_length, r.steps, r.final_tree_pattern])


def write_manifest_json(path, *, config_echo: dict, base_seed: int, agent_seeds: list[int],
                        version: str, duration_seconds: float, guard_events: int,
                        outputs: list[str]) -> None:
    payload = {
        "version": version,
        "config": config_echo,
        "base_seed": base_seed,
        "agent_seeds": agent_seeds,
        "guard_events": guard_events,
        "duration_seconds": duration_seconds,
        "outputs": outputs,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

_WIDTH, _HEIGHT = 960, 540
_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 70, 170, 30, 50


def _svg_path(xs, ys, to_px) -> str:
    """Polyline path command string; breaks at NaNs."""
    parts = []
    pen_down = False
    for x, y in zip(xs, ys):
        if np.isnan(y):
            pen_down = False
            continue
        px, py = to_px(x, y)
        parts.append(f"{'L' if pen_down else 'M'}{px:.1f},{py:.1f}")
        pen_down = True
    return " ".join(parts)


def curve_series(curve: LearningCurve) -> list[tuple[str, np.ndarray]]:
    """Labelled raw series for plotting: the overall curve plus one per length."""
    series = [("overall", curve.fraction_correct)]
    for length, lc in sorted(breakdown_by_length(curve).items()):
        label = "unaligned (length 0)" if length == 0 else f"length {length}"
        series.append((label, lc.fraction))
    return series


def write_curve_svg(path, series, smoothing_window: int = 51,
                    title: str = "fraction of correct responses") -> None:
    """Standalone SVG of smoothed learning-curve series.

    `series` is a list of (label, per-trial values) pairs, e.g. from
    :func:`curve_series`; a bare :class:`LearningCurve` is also accepted.
    """
    if isinstance(series, LearningCurve):
        series = curve_series(series)
    n_trials = len(series[0][1])
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def to_px(x, y):
        return (_MARGIN_LEFT + (x - 1) / max(n_trials - 1, 1) * plot_w,
                _MARGIN_TOP + (1.0 - y) * plot_h)

    trials = np.arange(1, n_trials + 1)
    series = [(label, moving_average(values, smoothing_window))
              for label, values in series]

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_MARGIN_LEFT}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
    ]
    # axes and ticks
    x_axis_y = _MARGIN_TOP + plot_h
    lines.append(f'<g stroke="black" fill="none">'
                 f'<path d="M{_MARGIN_LEFT},{_MARGIN_TOP} L{_MARGIN_LEFT},{x_axis_y} '
                 f'L{_MARGIN_LEFT + plot_w},{x_axis_y}"/></g>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        px, py = to_px(1, frac)
        lines.append(f'<line x1="{_MARGIN_LEFT - 5}" y1="{py:.1f}" x2="{_MARGIN_LEFT + plot_w}" '
                     f'y2="{py:.1f}" stroke="#dddddd"/>')
        lines.append(f'<text x="{_MARGIN_LEFT - 10}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{frac:g}</text>')
    for i in range(5):
        trial = 1 + round(i * (n_trials - 1) / 4) if n_trials > 1 else 1
        px, py = to_px(trial, 0.0)
        lines.append(f'<line x1="{px:.1f}" y1="{x_axis_y}" x2="{px:.1f}" y2="{x_axis_y + 5}" '
                     f'stroke="black"/>')
        lines.append(f'<text x="{px:.1f}" y="{x_axis_y + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{trial}</text>')
    lines.append(f'<text x="{_MARGIN_LEFT + plot_w / 2:.1f}" y="{_HEIGHT - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">trial</text>')
    # series and legend
    for idx, (label, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        d = _svg_path(trials, ys, to_px)
        if d:
            lines.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _MARGIN_TOP + 16 * idx + 10
        lx = _MARGIN_LEFT + plot_w + 12
        lines.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        lines.append(f'<text x="{lx + 24}" y="{ly}" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
