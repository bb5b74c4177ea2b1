"""Adversarial patches trained against an ensemble of person detectors."""

from ._core import (
    ContractViolation,
    NumericError,
    ParseError,
    ToyDetector,
    UndefinedMetric,
    average_precision,
    cmd_eval,
    cmd_generate,
    cmd_make_scenes,
    cmd_verify_theory,
    compose,
    css_loss,
    ensemble_confidence,
    ensemble_variance,
    generalization_bound,
    generate_scenes,
    init_patch,
    iou,
    jensen_check,
    make_reference_image,
    make_toy_detector,
    naturalness_score,
    nps_loss,
    person_mask,
    total_loss,
    train,
    transferability_score,
    tv_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
