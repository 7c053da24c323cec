"""Verification reports: certificates with worst-case statistics, JSON round-trip."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

CERTIFICATE_KEYS = ("name", "pass", "worst_point", "worst_value", "tolerance", "sample_count")

_NONFINITE = {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}


def encode_value(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into JSON-safe data.

    Complex numbers become ``[re, im]`` pairs and non-finite floats become the
    strings ``"Infinity"``, ``"-Infinity"`` and ``"NaN"``.
    """
    if isinstance(value, dict):
        return {str(k): encode_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode_value(v) for v in value]
    if isinstance(value, np.ndarray):
        return encode_value(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [encode_value(float(value.real)), encode_value(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return value
    return value


def decode_float(value: Any) -> Any:
    if isinstance(value, str) and value in _NONFINITE:
        return _NONFINITE[value]
    return value


def _decode_tree(value: Any) -> Any:
    if isinstance(value, list):
        return [_decode_tree(v) for v in value]
    if isinstance(value, dict):
        return {k: _decode_tree(v) for k, v in value.items()}
    return decode_float(value)


@dataclass
class Certificate:
    name: str
    passed: bool
    worst_point: Any = None
    worst_value: float | None = None
    tolerance: float | None = None
    sample_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "pass": bool(self.passed),
            "worst_point": encode_value(self.worst_point),
            "worst_value": encode_value(self.worst_value),
            "tolerance": encode_value(self.tolerance),
            "sample_count": int(self.sample_count),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Certificate:
        return cls(
            name=data["name"],
            passed=bool(data["pass"]),
            worst_point=_decode_tree(data["worst_point"]),
            worst_value=decode_float(data["worst_value"]),
            tolerance=decode_float(data["tolerance"]),
            sample_count=int(data["sample_count"]),
        )


@dataclass
class VerificationReport:
    """A list of certificates plus free-form details.

    ``passed`` is true iff every certificate passes; a report without any
    certificate does not pass.
    """

    experiment_id: str
    certificates: list[Certificate] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    timing: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.certificates) and all(c.passed for c in self.certificates)

    def add(self, certificate: Certificate) -> Certificate:
        self.certificates.append(certificate)
        return certificate

    def certificate(self, name: str) -> Certificate:
        for cert in self.certificates:
            if cert.name == name:
                return cert
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.certificates]

    def merge(self, other: VerificationReport, prefix: str = "") -> None:
        for cert in other.certificates:
            self.add(Certificate(prefix + cert.name, cert.passed, cert.worst_point,
                                 cert.worst_value, cert.tolerance, cert.sample_count))
        if other.details:
            self.details[prefix.rstrip(".:/") or other.experiment_id] = other.details

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment_id": self.experiment_id,
            "pass": self.passed,
            "certificates": [c.to_dict() for c in self.certificates],
            "details": encode_value(self.details),
            "config": encode_value(self.config),
            "timing": encode_value(self.timing),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> VerificationReport:
        return cls(
            experiment_id=data["experiment_id"],
            certificates=[Certificate.from_dict(c) for c in data["certificates"]],
            details=_decode_tree(data.get("details", {})),
            config=_decode_tree(data.get("config", {})),
            timing=_decode_tree(data.get("timing", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> VerificationReport:
        return cls.from_dict(json.loads(text))

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.certificates:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"[{status}] {c.name}: worst={c.worst_value!r} tol={c.tolerance!r} "
                         f"n={c.sample_count}")
        return lines


def point_payload(z: Any) -> Any:
    """Worst-point payload: complex coordinates as [re, im] pairs, reals as floats."""
    if z is None:
        return None
    arr = np.asarray(z)
    if np.iscomplexobj(arr):
        return [[float(c.real), float(c.imag)] for c in arr.ravel()]
    return [float(v) for v in arr.ravel()]
