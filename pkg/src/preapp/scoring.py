"""Per-finding and total device risk scores.

The model is Risk = Probability x Cost. For finding i on one device,
the probability side multiplies the affected-app count n_i by an exploit
difficulty grade d_i and a user-awareness grade a_i, then min-max
normalizes that raw product across the corpus; the cost side is an
impact grade I_i:

    score_i = normalize(n_i * d_i * a_i) * I_i
    total   = normalize(sum_i score_i) * 100

All grades live on the ladder {1.00, 0.50, 0.25, 0.10}. Finding 8 keeps
two impact grades (Maps API key exposure at 0.25, other cloud services
at 1.00) over its two sub-counts, summed into a single score_8.

Normalization is corpus-relative min-max, computed per finding over the
devices being scored; a constant (or singleton) pool normalizes to 0.
Devices with 50 or fewer apps are scored but do not shape the pools.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, UndefinedCorrelation
from .findings import FindingVector

log = logging.getLogger(__name__)

GRADE_LADDER = (1.00, 0.50, 0.25, 0.10)

FINDING_IDS = tuple(str(i) for i in range(1, 11))
# Raw streams: finding 8 is tracked as two sub-counts.
RAW_IDS = ("1", "2", "3", "4", "5", "6", "7", "8a", "8b", "9", "10")

_RAW_FIELD = {
    "1": "n1", "2": "n2", "3": "n3", "4": "n4", "5": "n5", "6": "n6",
    "7": "n7", "8a": "n8_maps", "8b": "n8_other", "9": "n9", "10": "n10",
}

DEFAULT_D = (0.25, 0.25, 0.50, 0.25, 0.50, 0.25, 1.00, 1.00, 0.25, 0.25)
DEFAULT_A = (0.50, 0.25, 0.50, 0.50, 0.50, 0.25, 1.00, 1.00, 0.25, 0.25)
DEFAULT_I = (0.25, 0.25, 0.25, 0.10, 0.25, 0.50, 1.00, 0.25, 0.10, 0.25)
DEFAULT_I8_OTHER = 1.00


@dataclass
class ScoringCoefficients:
    """Difficulty, awareness and impact grades for the ten findings.

    ``impact[7]`` is the Maps API part of finding 8; ``i8_other`` covers
    the remaining cloud services.
    """

    difficulty: tuple[float, ...] = DEFAULT_D
    awareness: tuple[float, ...] = DEFAULT_A
    impact: tuple[float, ...] = DEFAULT_I
    i8_other: float = DEFAULT_I8_OTHER

    def __post_init__(self) -> None:
        for name, values in (
            ("d", self.difficulty),
            ("a", self.awareness),
            ("I", self.impact),
        ):
            if len(values) != 10:
                raise ConfigError(f"{name} must have 10 entries, got {len(values)}")
            for i, value in enumerate(values, 1):
                _check_grade(name, i, value)
        _check_grade("i8_other", 8, self.i8_other)

    def for_stream(self, raw_id: str) -> tuple[float, float]:
        """(d, a) for a raw stream id ('8a'/'8b' share finding 8's grades)."""
        idx = 7 if raw_id in ("8a", "8b") else int(raw_id) - 1
        return self.difficulty[idx], self.awareness[idx]


def _check_grade(name: str, finding: int, value) -> None:
    if not isinstance(value, (int, float)) or not any(
        math.isclose(value, g) for g in GRADE_LADDER
    ):
        raise ConfigError(
            f"coefficient {name} for finding {finding} must be one of "
            f"{GRADE_LADDER}, got {value!r}"
        )


def load_coefficients(path: str | Path | None = None) -> ScoringCoefficients:
    """Built-in grades, optionally overridden by a JSON file.

    File schema: {"findings": [{"id": 1..10, "d": g, "a": g, "I": g}, ...],
    "i8_other": g}; every field is optional and merges onto the defaults.
    """
    coeff = ScoringCoefficients()
    if path is None:
        return coeff
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: coefficient file must be a JSON object")
    d, a, imp = list(coeff.difficulty), list(coeff.awareness), list(coeff.impact)
    for item in raw.get("findings", []):
        try:
            idx = int(item["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: finding entry without valid id: {exc}") from exc
        if not 1 <= idx <= 10:
            raise ConfigError(f"{path}: finding id {idx} out of range 1..10")
        if "d" in item:
            d[idx - 1] = item["d"]
        if "a" in item:
            a[idx - 1] = item["a"]
        if "I" in item:
            imp[idx - 1] = item["I"]
    i8_other = raw.get("i8_other", coeff.i8_other)
    return ScoringCoefficients(
        difficulty=tuple(d), awareness=tuple(a), impact=tuple(imp), i8_other=i8_other
    )


@dataclass
class DeviceScore:
    device_id: str
    app_total: int
    low_coverage: bool
    raw: dict[str, float]
    score: dict[str, float]
    total: float

    def as_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "app_total": self.app_total,
            "low_coverage": self.low_coverage,
            "raw": self.raw,
            "score": self.score,
            "total": self.total,
        }


NORMALIZATION_MODES = ("minmax", "max")


def _minmax(values: Sequence[float], mode: str) -> tuple[float, float]:
    if not values:
        return (0.0, 0.0)
    lo = 0.0 if mode == "max" else min(values)
    return (lo, max(values))


def _normalize(value: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


def score_corpus(
    vectors: Sequence[FindingVector],
    coeff: ScoringCoefficients | None = None,
    normalization: str = "minmax",
) -> list[DeviceScore]:
    """Score every device of a corpus against shared normalization pools.

    Pools are built from devices above the low-coverage cutoff; when no
    device qualifies, all devices form the pool (a singleton pool makes
    every min-max normalization 0). Low-coverage devices are still scored
    against the pool, clamped into [0, 1]. Input order is preserved.

    ``normalization`` selects the corpus-relative mapping: "minmax"
    (default) rescales [min, max] onto [0, 1]; "max" divides by the pool
    maximum so identical nonzero corpora keep nonzero scores.
    """
    if not vectors:
        raise ValueError("cannot score an empty corpus")
    if normalization not in NORMALIZATION_MODES:
        raise ConfigError(f"normalization must be one of {NORMALIZATION_MODES}")
    coeff = coeff or ScoringCoefficients()

    raws: list[dict[str, float]] = []
    for vec in vectors:
        raw = {}
        for rid in RAW_IDS:
            d, a = coeff.for_stream(rid)
            raw[rid] = getattr(vec, _RAW_FIELD[rid]) * d * a
        raws.append(raw)

    pool_idx = [i for i, vec in enumerate(vectors) if not vec.low_coverage]
    if not pool_idx:
        pool_idx = list(range(len(vectors)))
    bounds = {
        rid: _minmax([raws[i][rid] for i in pool_idx], normalization) for rid in RAW_IDS
    }

    sums: list[float] = []
    scores: list[dict[str, float]] = []
    for raw in raws:
        norm = {rid: _normalize(raw[rid], *bounds[rid]) for rid in RAW_IDS}
        per_finding = {}
        for fid in FINDING_IDS:
            if fid == "8":
                per_finding[fid] = norm["8a"] * coeff.impact[7] + norm["8b"] * coeff.i8_other
            else:
                per_finding[fid] = norm[fid] * coeff.impact[int(fid) - 1]
        scores.append(per_finding)
        sums.append(sum(per_finding.values()))

    lo, hi = _minmax([sums[i] for i in pool_idx], normalization)
    return [
        DeviceScore(
            device_id=vec.device_id,
            app_total=vec.app_total,
            low_coverage=vec.low_coverage,
            raw=raws[i],
            score=scores[i],
            total=_normalize(sums[i], lo, hi) * 100.0,
        )
        for i, vec in enumerate(vectors)
    ]


def rank_devices(scores: Iterable[DeviceScore]) -> list[DeviceScore]:
    """Descending by total; ties break on device_id (lexicographic)."""
    return sorted(scores, key=lambda s: (-s.total, s.device_id))


def pearson(pairs: Sequence[tuple[float, float]]) -> float:
    """Pearson correlation coefficient of (x, y) pairs.

    Raises UndefinedCorrelation for fewer than two pairs or when either
    coordinate is constant; the result is always a finite float.
    """
    if len(pairs) < 2:
        raise UndefinedCorrelation(f"need at least 2 pairs, got {len(pairs)}")
    xs = [float(x) for x, _ in pairs]
    ys = [float(y) for _, y in pairs]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelation("a coordinate is constant; correlation undefined")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)
