"""Python access to the clickprep clickstream preprocessing core."""

import json

from . import _core

__all__ = [
    "ClickprepError",
    "hampel_limit",
    "median",
    "mad",
    "bootlier",
    "find_outlier_limit",
    "compare_aa",
    "default_config",
    "synth",
    "run_pipeline",
]

ClickprepError = _core.NativeError

hampel_limit = _core.hampel_limit
median = _core.median
mad = _core.mad


def error_code(exc):
    """The library error code carried by a ClickprepError."""
    return exc.args[0]


def bootlier(values, **params):
    return json.loads(_core.bootlier(list(values), json.dumps(params)))


def find_outlier_limit(values, **params):
    return json.loads(_core.find_outlier_limit(list(values), json.dumps(params)))


def compare_aa(a1, a2, diff_max=0.10, corr_min=0.8, min_days=5):
    return json.loads(_core.compare_aa(list(a1), list(a2), diff_max, corr_min, min_days))


def default_config():
    return json.loads(_core.default_config())


def synth(zero_pathology=False, **overrides):
    """Generate a synthetic log. Returns (events_jsonl, ground_truth)."""
    base = json.loads(_core.zero_pathology_config() if zero_pathology else _core.default_synth_config())
    base.update(overrides)
    events, truth = _core.synth(json.dumps(base))
    return events, json.loads(truth)


def run_pipeline(events, config=None, base_dir="."):
    """Run the pipeline over JSONL text. Returns (exit_code, report, plots, events_jsonl)."""
    code, report, plots, log = _core.run_pipeline(json.dumps(config or {}), events, base_dir)
    return code, json.loads(report), json.loads(plots), log
