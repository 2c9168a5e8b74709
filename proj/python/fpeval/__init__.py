"""Evaluation toolkit for instance segmentation with attribute localization.

Thin wrapper over the C++ core. JSON-producing calls are decoded into plain
dictionaries; everything else passes through unchanged.
"""

import json as _json

from _fpeval import (  # noqa: F401
    FpevalError,
    Mask,
    Ontology,
    __version__,
    attribute_f1,
    bbox_iou,
    boundary_complexity,
    bootstrap_ci,
    confusion_counts,
    f1_sweep,
    mask_iou,
    polygon_area,
    polygon_perimeter,
    rasterize,
    relative_size,
    validate,
    vertices_per_polygon,
)
from _fpeval import (
    dataset_statistics_json as _dataset_statistics_json,
    error_breakdown_json as _error_breakdown_json,
    evaluate_json as _evaluate_json,
)


def evaluate(gt_path, pred_path, ontology_path, **kwargs):
    """Run the evaluation and return the report as a dictionary."""
    return _json.loads(_evaluate_json(gt_path, pred_path, ontology_path, **kwargs))


def error_breakdown(gt_path, pred_path, ontology_path, **kwargs):
    """Seven-setting detector error analysis, as a dictionary."""
    return _json.loads(_error_breakdown_json(gt_path, pred_path, ontology_path, **kwargs))


def dataset_statistics(gt_path, ontology_path, **kwargs):
    """Dataset statistics with bootstrap confidence intervals, as a dictionary."""
    return _json.loads(_dataset_statistics_json(gt_path, ontology_path, **kwargs))
