"""Ground-control-point distance checks for a rendered TDOM."""
import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from apps.core.exceptions import InvalidInputError, ParseError


EARTH_RADIUS_M = 6371000.0

GCP_COLUMNS = ('id', 'lat', 'lon', 'px', 'py')


def _check_coordinates(lat, lon):
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if np.any(~np.isfinite(lat)) or np.any(np.abs(lat) > 90):
        raise InvalidInputError('Latitude must lie in [-90, 90].')
    if np.any(~np.isfinite(lon)) or np.any(np.abs(lon) > 180):
        raise InvalidInputError('Longitude must lie in [-180, 180].')
    return lat, lon


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters on a sphere of radius EARTH_RADIUS_M.
    Accepts scalars or broadcastable arrays of degrees."""
    lat1, lon1 = _check_coordinates(lat1, lon1)
    lat2, lon2 = _check_coordinates(lat2, lon2)
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2 - lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    distance = 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    return float(distance) if np.ndim(distance) == 0 else distance


@dataclass(frozen=True)
class GcpRecord:
    id: str
    lat: float
    lon: float
    px: float
    py: float

    def __post_init__(self):
        _check_coordinates(self.lat, self.lon)
        if not (math.isfinite(self.px) and math.isfinite(self.py)):
            raise InvalidInputError(f'GCP {self.id} has non-finite pixel coordinates.')

    @property
    def pixel(self) -> np.ndarray:
        return np.array([self.px, self.py])


@dataclass(frozen=True)
class PairError:
    pair_id: str
    true_distance: float
    measured_distance: float

    @property
    def absolute_error(self) -> float:
        return abs(self.measured_distance - self.true_distance)


@dataclass(frozen=True)
class GcpErrorReport:
    scale_factor: float
    pair_errors: list[PairError] = field(default_factory=list)
    anchor_pair: tuple[str, str] | None = None
    earth_radius: float = EARTH_RADIUS_M

    @property
    def mean_error(self) -> float:
        if not self.pair_errors:
            return 0.0
        return float(np.mean([item.absolute_error for item in self.pair_errors]))

    @property
    def min_error(self) -> float:
        return min((item.absolute_error for item in self.pair_errors), default=0.0)

    @property
    def max_error(self) -> float:
        return max((item.absolute_error for item in self.pair_errors), default=0.0)


def pair_id(first: str, second: str) -> str:
    return f'{first}-{second}'


def _by_id(gcps: Sequence[GcpRecord]) -> dict[str, GcpRecord]:
    index = {}
    for gcp in gcps:
        if gcp.id in index:
            raise InvalidInputError(f'Duplicate GCP id {gcp.id}.')
        index[gcp.id] = gcp
    return index


def _lookup(index: dict[str, GcpRecord], gcp_id: str) -> GcpRecord:
    try:
        return index[gcp_id]
    except KeyError:
        raise InvalidInputError(f'Unknown GCP id {gcp_id}.') from None


def true_distance(first: GcpRecord, second: GcpRecord) -> float:
    return haversine(first.lat, first.lon, second.lat, second.lon)


def pixel_distance(first: GcpRecord, second: GcpRecord) -> float:
    return float(np.hypot(first.px - second.px, first.py - second.py))


def gcp_scale_align(gcps: Sequence[GcpRecord], anchor_pair: tuple[str, str]) -> float:
    """Meters per TDOM pixel that make the anchor pair's distance exact."""
    index = _by_id(gcps)
    first, second = (_lookup(index, gcp_id) for gcp_id in anchor_pair)
    pixels = pixel_distance(first, second)
    if pixels == 0:
        raise InvalidInputError(f'Anchor pair {pair_id(*anchor_pair)} has zero pixel separation.')
    meters = true_distance(first, second)
    if meters == 0:
        raise InvalidInputError(f'Anchor pair {pair_id(*anchor_pair)} has zero true distance.')
    return meters / pixels


def gcp_errors(
    gcps: Sequence[GcpRecord],
    scale_factor: float,
    pairs: Sequence[tuple[str, str]] | None = None,
    anchor_pair: tuple[str, str] | None = None,
    image_size: tuple[int, int] | None = None,
) -> GcpErrorReport:
    """Absolute distance error of every requested pair (all pairs by default,
    in input order). The anchor pair reports its true distance as measured."""
    if len(gcps) < 2:
        raise InvalidInputError('At least two GCPs are needed.')
    if not scale_factor > 0:
        raise InvalidInputError(f'Scale factor must be positive, got {scale_factor}.')
    index = _by_id(gcps)
    if image_size is not None:
        width, height = image_size
        for gcp in gcps:
            if not (0 <= gcp.px <= width and 0 <= gcp.py <= height):
                raise InvalidInputError(f'GCP {gcp.id} lies outside the {width}x{height} TDOM.')
    if pairs is None:
        pairs = [(a.id, b.id) for a, b in itertools.combinations(gcps, 2)]
    anchor = set(anchor_pair) if anchor_pair else None

    rows = []
    for first_id, second_id in pairs:
        first, second = _lookup(index, first_id), _lookup(index, second_id)
        truth = true_distance(first, second)
        if anchor is not None and {first_id, second_id} == anchor:
            measured = truth
        else:
            measured = scale_factor * pixel_distance(first, second)
        rows.append(PairError(pair_id(first_id, second_id), truth, measured))
    return GcpErrorReport(scale_factor=scale_factor, pair_errors=rows, anchor_pair=anchor_pair)


def read_gcp_csv(path) -> list[GcpRecord]:
    path = Path(path)
    try:
        handle = path.open(newline='', encoding='utf-8')
    except FileNotFoundError as exc:
        raise ParseError('File does not exist.', path) from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(cell.strip() for cell in header) != GCP_COLUMNS:
            raise ParseError(f'Expected header {",".join(GCP_COLUMNS)}.', path, 1)
        records = []
        for row in reader:
            line_number = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(GCP_COLUMNS):
                raise ParseError(f'Expected {len(GCP_COLUMNS)} columns, found {len(row)}.', path, line_number)
            try:
                lat, lon, px, py = (float(cell) for cell in row[1:])
                records.append(GcpRecord(row[0].strip(), lat, lon, px, py))
            except (ValueError, InvalidInputError) as exc:
                raise ParseError(str(exc), path, line_number) from exc
    return records


def format_error_table(report: GcpErrorReport) -> str:
    """Aligned text table: pair, true distance, measured distance, error."""
    header = ('GCP pair', 'True (m)', 'TDOM (m)', 'Abs. error (m)')
    body = [
        (item.pair_id, f'{item.true_distance:.3f}', f'{item.measured_distance:.3f}', f'{item.absolute_error:.3f}')
        for item in report.pair_errors
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(4)]
    lines = [
        f'# earth radius {report.earth_radius:.0f} m, scale {report.scale_factor:.9g} m/px'
        + (f', anchor {pair_id(*report.anchor_pair)}' if report.anchor_pair else ''),
        '  '.join(cell.ljust(widths[0]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(header)),
    ]
    for row in body:
        lines.append('  '.join(cell.ljust(widths[0]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(row)))
    lines.append(f'mean {report.mean_error:.3f} m, min {report.min_error:.3f} m, max {report.max_error:.3f} m')
    return '\n'.join(lines) + '\n'


def write_error_csv(report: GcpErrorReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(['pair', 'true_m', 'measured_m', 'abs_error_m'])
        for item in report.pair_errors:
            writer.writerow([item.pair_id, repr(item.true_distance), repr(item.measured_distance), repr(item.absolute_error)])
    return path
