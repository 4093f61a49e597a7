"""JSON-friendly encoding of kernels, intensities and base measures."""

from __future__ import annotations

from .crm import (GeneralizedGammaIntensity, GridMeasure, InverseWeibullDensity,
                  LebesgueHalfLine)
from .kernels import make_kernel

__all__ = [
    "kernel_to_dict",
    "kernel_from_dict",
    "base_measure_to_dict",
    "base_measure_from_dict",
    "intensity_to_dict",
    "intensity_from_dict",
]


def kernel_to_dict(kernel):
    return {"kind": kernel.kind, **kernel._params()}


def kernel_from_dict(payload):
    payload = dict(payload)
    kind = payload.pop("kind")
    return make_kernel(kind, **payload)


def base_measure_to_dict(base):
    if isinstance(base, GridMeasure):
        return {"kind": base.kind,
                "locations": list(base.locations),
                "weights": list(base.weights)}
    return {"kind": base.kind}


def base_measure_from_dict(payload):
    kind = payload["kind"]
    if kind == LebesgueHalfLine.kind:
        return LebesgueHalfLine()
    if kind == InverseWeibullDensity.kind:
        return InverseWeibullDensity()
    if kind == GridMeasure.kind:
        return GridMeasure(tuple(payload["locations"]), tuple(payload["weights"]))
    raise ValueError(f"unknown base measure kind {kind!r}")


def intensity_to_dict(intensity):
    return {"sigma": intensity.sigma,
            "gamma": intensity.gamma,
            "base_measure": base_measure_to_dict(intensity.base_measure)}


def intensity_from_dict(payload):
    return GeneralizedGammaIntensity(
        sigma=float(payload["sigma"]),
        gamma=float(payload["gamma"]),
        base_measure=base_measure_from_dict(payload["base_measure"]))
