"""Lengthwise flexural rigidity EI(s) of a guidewire.

Guidewires are soft at the distal tip and stiffen toward the proximal
end; force estimation needs that distribution, not a single modulus. The
profile is a sampled curve of EI against arc distance from the distal
tip, queried by linear interpolation with end-value clamping outside the
sampled range. Samples come from sequential three-point bending tests:
with the specimen simply supported over a span and loaded at midspan,
the slope of the load-deflection line gives EI = slope * span^3 / 48.

Profiles are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "ProfileFormatError",
    "BendingTestRecord",
    "RigidityProfile",
    "ei_from_bending",
    "profile_from_bending_tests",
    "load_profile",
    "save_profile",
    "synthetic_reference_profile",
    "stiff_guidewire_profile",
]


class ProfileFormatError(ValueError):
    """Malformed profile file; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class BendingTestRecord:
    """One three-point bending measurement.

    span:                  support span, mm
    load_deflection_slope: slope of central load vs midspan deflection, N/mm
    s_center:              distance of the specimen center from the distal tip, mm
    repeats:               number of repeated loadings averaged into the slope
    """

    span: float
    load_deflection_slope: float
    s_center: float
    repeats: int = 1

    def __post_init__(self):
        if not (self.span > 0 and math.isfinite(self.span)):
            raise ValueError(f"span must be positive, got {self.span}")
        if not (self.load_deflection_slope > 0 and math.isfinite(self.load_deflection_slope)):
            raise ValueError(f"load-deflection slope must be positive, got {self.load_deflection_slope}")
        if not (self.s_center >= 0 and math.isfinite(self.s_center)):
            raise ValueError("s_center must be non-negative")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def ei_from_bending(record: BendingTestRecord) -> tuple[float, float]:
    """Convert a bending record to an (s_center, EI) sample.

    Simply supported span with a central load: delta = F * span^3 / (48 EI),
    so EI = (F / delta) * span^3 / 48. Shear correction over a 30 mm span
    on a sub-millimetre wire is below a percent and is neglected.
    """
    ei = record.load_deflection_slope * record.span**3 / 48.0
    return record.s_center, ei


class RigidityProfile:
    """Sampled EI(s) with linear interpolation and end clamping.

    ``s`` is measured from the distal tip in mm and must be strictly
    increasing; EI is in N*mm^2. An optional per-sample standard
    deviation can be attached.
    """

    def __init__(self, s, ei, std=None):
        s = np.array(s, dtype=float)
        ei = np.array(ei, dtype=float)
        if s.ndim != 1 or s.shape != ei.shape:
            raise ValueError("s and ei must be 1-D arrays of equal length")
        if len(s) < 2:
            raise ValueError("a profile needs at least 2 samples")
        if np.any(~np.isfinite(s)) or np.any(~np.isfinite(ei)):
            raise ValueError("profile samples must be finite")
        if s[0] < 0:
            raise ValueError("sample positions must be >= 0")
        if np.any(np.diff(s) <= 0):
            raise ValueError("sample positions must be strictly increasing")
        if np.any(ei <= 0):
            raise ValueError("EI must be positive at every sample")
        if std is not None:
            std = np.array(std, dtype=float)
            if std.shape != s.shape:
                raise ValueError("std must match the sample count")
            if np.any(std < 0):
                raise ValueError("std must be non-negative")
            std.setflags(write=False)
        s.setflags(write=False)
        ei.setflags(write=False)
        self._s = s
        self._ei = ei
        self._std = std

    @property
    def s(self) -> np.ndarray:
        return self._s

    @property
    def ei(self) -> np.ndarray:
        return self._ei

    @property
    def std(self) -> np.ndarray | None:
        return self._std

    @property
    def s_max(self) -> float:
        return float(self._s[-1])

    def __len__(self) -> int:
        return len(self._s)

    def ei_at(self, s):
        """EI at arc distance ``s`` from the distal tip (scalar or array).

        Linear interpolation between bracketing samples; outside the
        sampled range the end values are held constant.
        """
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0):
            raise ValueError("arc distance must be >= 0")
        out = np.interp(s_arr, self._s, self._ei)
        return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out

    def __repr__(self):
        return (
            f"RigidityProfile({len(self)} samples, s {self._s[0]:g}..{self._s[-1]:g} mm, "
            f"EI {self._ei.min():g}..{self._ei.max():g} N*mm^2)"
        )


def profile_from_bending_tests(records) -> RigidityProfile:
    """Build a profile from bending records, sorted by specimen position."""
    samples = sorted(ei_from_bending(r) for r in records)
    s = [p for p, _ in samples]
    ei = [v for _, v in samples]
    return RigidityProfile(s, ei)


def load_profile(source) -> RigidityProfile:
    """Read a profile from a CSV file.

    Format: UTF-8, ``#`` comment lines allowed, header
    ``s_mm,EI_Nmm2`` with an optional third ``std_Nmm2`` column, one
    sample per line. Violations raise ProfileFormatError with the
    offending line number; invariant violations name the bad value.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()

    header_seen = False
    has_std = False
    s_vals: list[float] = []
    ei_vals: list[float] = []
    std_vals: list[float] = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")]
        if not header_seen:
            if parts[0] != "s_mm" or len(parts) < 2 or parts[1] != "EI_Nmm2":
                raise ProfileFormatError(
                    f"expected header 's_mm,EI_Nmm2[,std_Nmm2]', got {text!r}", lineno
                )
            has_std = len(parts) >= 3 and parts[2] == "std_Nmm2"
            header_seen = True
            continue
        expected = 3 if has_std else 2
        if len(parts) != expected:
            raise ProfileFormatError(f"expected {expected} columns, got {len(parts)}", lineno)
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise ProfileFormatError(f"non-numeric value in {text!r}", lineno) from None
        if s_vals and values[0] <= s_vals[-1]:
            raise ProfileFormatError(
                f"sample position {values[0]:g} does not increase past {s_vals[-1]:g}", lineno
            )
        if values[1] <= 0:
            raise ProfileFormatError(f"EI must be positive, got {values[1]:g}", lineno)
        s_vals.append(values[0])
        ei_vals.append(values[1])
        if has_std:
            std_vals.append(values[2])
    if not header_seen:
        raise ProfileFormatError("missing header line")
    if len(s_vals) < 2:
        raise ProfileFormatError(f"need at least 2 samples, got {len(s_vals)}")
    return RigidityProfile(s_vals, ei_vals, std_vals if has_std else None)


def save_profile(profile: RigidityProfile, path) -> None:
    """Write a profile in the CSV format accepted by :func:`load_profile`."""
    with open(path, "w", encoding="utf-8") as fh:
        if profile.std is not None:
            fh.write("s_mm,EI_Nmm2,std_Nmm2\n")
            for s, ei, sd in zip(profile.s, profile.ei, profile.std):
                fh.write(f"{s:.6g},{ei:.6g},{sd:.6g}\n")
        else:
            fh.write("s_mm,EI_Nmm2\n")
            for s, ei in zip(profile.s, profile.ei):
                fh.write(f"{s:.6g},{ei:.6g}\n")


def synthetic_reference_profile() -> RigidityProfile:
    """Smooth reference profile used by tests and simulations.

    Soft tip rising steeply over the first 150 mm, then a stiff plateau;
    the numbers are synthetic but of realistic magnitude for a stiff
    0.035 inch wire.
    """
    s = np.array([0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 200.0, 300.0, 400.0, 500.0])
    ei = np.array([150.0, 320.0, 700.0, 1400.0, 2500.0, 3800.0, 4600.0, 5100.0, 5250.0, 5300.0, 5300.0])
    return RigidityProfile(s, ei)


def stiff_guidewire_profile() -> RigidityProfile:
    """Approximate measured distribution for a stiff 0.035 inch guidewire.

    Shipped as a convenience fixture; the values are an approximate
    digitization of a published bending-test curve, not a calibrated
    measurement. See data/stiff_guidewire_ei_digitized.csv.
    """
    ref = resources.files("lumenforce.data").joinpath("stiff_guidewire_ei_digitized.csv")
    with ref.open("r", encoding="utf-8") as fh:
        return load_profile(fh)
