"""Base-32 geohash codec, bounding-box coverage and prefix helpers.

Geohashes are plain strings. Cells are addressed internally by integer
(lat_index, lon_index) pairs, which keeps every bound exact: cell edges are
dyadic multiples of 45 degrees and fit comfortably in a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from localgeo.errors import CoverageTooLargeError, ValidationError

BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"
_DECODE = {c: i for i, c in enumerate(BASE32)}

MAX_LENGTH = 12
MAX_COVER_LENGTH = 8
DEFAULT_MAX_COVER_CELLS = 4096
EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class LatLon:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValidationError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class BoundingBox:
    south: float
    west: float
    north: float
    east: float

    def __post_init__(self):
        for v in (self.south, self.west, self.north, self.east):
            if not math.isfinite(v):
                raise ValidationError(f"non-finite bound in {self}")
        if not (-90.0 <= self.south <= self.north <= 90.0):
            raise ValidationError(f"bad latitude bounds south={self.south} north={self.north}")
        if not (-180.0 <= self.west <= self.east <= 180.0):
            # boxes crossing the antimeridian are not supported
            raise ValidationError(f"bad longitude bounds west={self.west} east={self.east}")

    def contains(self, p: LatLon) -> bool:
        return self.south <= p.lat <= self.north and self.west <= p.lon <= self.east

    def contains_box(self, other: BoundingBox) -> bool:
        return (
            self.south <= other.south
            and other.north <= self.north
            and self.west <= other.west
            and other.east <= self.east
        )

    @property
    def center(self) -> LatLon:
        return LatLon((self.south + self.north) / 2.0, (self.west + self.east) / 2.0)

    def height_km(self) -> float:
        return math.radians(self.north - self.south) * EARTH_RADIUS_KM

    def width_km(self, at_lat: float | None = None) -> float:
        """East-west extent along a parallel (the equator unless ``at_lat`` is given)."""
        lat = 0.0 if at_lat is None else at_lat
        return math.radians(self.east - self.west) * EARTH_RADIUS_KM * math.cos(math.radians(lat))


def _axis_bits(length: int) -> tuple[int, int]:
    """Return (lat_bits, lon_bits); longitude takes the extra bit on odd totals."""
    total = 5 * length
    return total // 2, total - total // 2


def _check_length(length: int, upper: int = MAX_LENGTH) -> None:
    if isinstance(length, bool) or not isinstance(length, int) or not 1 <= length <= upper:
        raise ValidationError(f"geohash length must be an integer in [1, {upper}], got {length!r}")


def validate(gh: str) -> str:
    if not isinstance(gh, str) or not 1 <= len(gh) <= MAX_LENGTH:
        raise ValidationError(f"geohash must be a string of length 1..{MAX_LENGTH}: {gh!r}")
    bad = [c for c in gh if c not in _DECODE]
    if bad:
        raise ValidationError(f"invalid geohash characters {bad!r} in {gh!r}")
    return gh


def _axis_index(value: float, lo: float, hi: float, bits: int) -> int:
    # bisection, upper half on ties; the top edge falls into the last cell
    idx = 0
    for _ in range(bits):
        mid = (lo + hi) / 2.0
        idx <<= 1
        if value >= mid:
            idx |= 1
            lo = mid
        else:
            hi = mid
    return idx


def _interleave(lat_idx: int, lon_idx: int, length: int) -> str:
    lat_bits, lon_bits = _axis_bits(length)
    bits = 0
    li, ti = lon_bits, lat_bits
    for k in range(5 * length):
        bits <<= 1
        if k % 2 == 0:
            li -= 1
            bits |= (lon_idx >> li) & 1
        else:
            ti -= 1
            bits |= (lat_idx >> ti) & 1
    chars = []
    for k in range(length):
        shift = 5 * (length - 1 - k)
        chars.append(BASE32[(bits >> shift) & 31])
    return "".join(chars)


def _deinterleave(gh: str) -> tuple[int, int]:
    lat_idx = lon_idx = 0
    k = 0
    for c in gh:
        v = _DECODE[c]
        for shift in range(4, -1, -1):
            bit = (v >> shift) & 1
            if k % 2 == 0:
                lon_idx = (lon_idx << 1) | bit
            else:
                lat_idx = (lat_idx << 1) | bit
            k += 1
    return lat_idx, lon_idx


def cell_size_deg(length: int) -> tuple[float, float]:
    """(height, width) of a cell in degrees."""
    lat_bits, lon_bits = _axis_bits(length)
    return 180.0 / (1 << lat_bits), 360.0 / (1 << lon_bits)


def encode(point: LatLon, length: int) -> str:
    _check_length(length)
    lat_bits, lon_bits = _axis_bits(length)
    lat_idx = _axis_index(point.lat, -90.0, 90.0, lat_bits)
    lon_idx = _axis_index(point.lon, -180.0, 180.0, lon_bits)
    return _interleave(lat_idx, lon_idx, length)


def _cell_box(lat_idx: int, lon_idx: int, length: int) -> BoundingBox:
    dlat, dlon = cell_size_deg(length)
    return BoundingBox(
        south=-90.0 + lat_idx * dlat,
        west=-180.0 + lon_idx * dlon,
        north=-90.0 + (lat_idx + 1) * dlat,
        east=-180.0 + (lon_idx + 1) * dlon,
    )


def decode_bbox(gh: str) -> BoundingBox:
    validate(gh)
    lat_idx, lon_idx = _deinterleave(gh)
    return _cell_box(lat_idx, lon_idx, len(gh))


def decode_center(gh: str) -> LatLon:
    return decode_bbox(gh).center


def _axis_range(a: float, b: float, lo: float, hi: float, bits: int) -> tuple[int, int]:
    """Cell indices whose span overlaps [a, b] with positive length.

    A degenerate interval (a == b) selects the single cell containing a.
    """
    first = _axis_index(a, lo, hi, bits)
    if a == b:
        return first, first
    last = _axis_index(b, lo, hi, bits)
    step = (hi - lo) / (1 << bits)
    if lo + last * step >= b:
        # b sits exactly on the lower edge of cell `last`
        last -= 1
    return first, last


def cover_count(box: BoundingBox, length: int) -> int:
    _check_length(length, MAX_COVER_LENGTH)
    lat_bits, lon_bits = _axis_bits(length)
    i0, i1 = _axis_range(box.south, box.north, -90.0, 90.0, lat_bits)
    j0, j1 = _axis_range(box.west, box.east, -180.0, 180.0, lon_bits)
    return (i1 - i0 + 1) * (j1 - j0 + 1)


def cover(box: BoundingBox, length: int, max_cells: int = DEFAULT_MAX_COVER_CELLS) -> set[str]:
    """All length-``length`` geohashes whose cells overlap ``box``.

    Along an axis where the box has extent, a cell is included when the
    overlap has positive length; a box edge lying exactly on a grid line does
    not pull in the neighbouring cell. Along a degenerate axis the cell
    containing the coordinate is used, so a point box maps to ``encode``.
    """
    _check_length(length, MAX_COVER_LENGTH)
    lat_bits, lon_bits = _axis_bits(length)
    i0, i1 = _axis_range(box.south, box.north, -90.0, 90.0, lat_bits)
    j0, j1 = _axis_range(box.west, box.east, -180.0, 180.0, lon_bits)
    count = (i1 - i0 + 1) * (j1 - j0 + 1)
    if count > max_cells:
        raise CoverageTooLargeError(count, max_cells)
    return {
        _interleave(i, j, length)
        for i in range(i0, i1 + 1)
        for j in range(j0, j1 + 1)
    }


def shares_prefix(a: str, b: str, n: int) -> bool:
    if n < 1 or n > len(a) or n > len(b):
        raise ValidationError(f"prefix length {n} invalid for {a!r} and {b!r}")
    return a[:n] == b[:n]


def children(gh: str) -> list[str]:
    validate(gh)
    if len(gh) >= MAX_LENGTH:
        raise ValidationError(f"{gh!r} is already at maximum length")
    return [gh + c for c in BASE32]
