"""GPS fix ingestion, raw-to-WGS84 conversion, trajectory sampling, speeds.

The receiver used in the field emits coordinates related to WGS84 by a
fixed affine map; the default constants below match that device. Other
receivers can supply their own scale/offset pairs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, List, Tuple

EARTH_RADIUS_M = 6_371_000.0


class InvalidFixError(ValueError):
    """Conversion produced coordinates outside the valid WGS84 ranges."""


@dataclass(frozen=True)
class GpsAffine:
    """Per-axis linear map from device-native to WGS84 degrees."""

    lat_scale: float = 1.666
    lat_offset: float = -31.30174
    lon_scale: float = 1.666
    lon_offset: float = 81.25186

    def invert(self) -> "GpsAffine":
        return GpsAffine(
            lat_scale=1.0 / self.lat_scale,
            lat_offset=-self.lat_offset / self.lat_scale,
            lon_scale=1.0 / self.lon_scale,
            lon_offset=-self.lon_offset / self.lon_scale,
        )


DEFAULT_AFFINE = GpsAffine()


def convert_raw_to_wgs84(
    lat_raw: float, lon_raw: float, affine: GpsAffine = DEFAULT_AFFINE
) -> Tuple[float, float]:
    """Apply the affine map; raises InvalidFixError on out-of-range results."""
    lat = affine.lat_scale * lat_raw + affine.lat_offset
    lon = affine.lon_scale * lon_raw + affine.lon_offset
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InvalidFixError(f"non-finite conversion of ({lat_raw}, {lon_raw})")
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise InvalidFixError(
            f"converted fix ({lat}, {lon}) outside WGS84 bounds"
        )
    return lat, lon


@dataclass(frozen=True)
class GpsFix:
    t: float
    lat_raw: float
    lon_raw: float
    lat_wgs84: float
    lon_wgs84: float

    @staticmethod
    def from_raw(
        t: float, lat_raw: float, lon_raw: float, affine: GpsAffine = DEFAULT_AFFINE
    ) -> "GpsFix":
        lat, lon = convert_raw_to_wgs84(lat_raw, lon_raw, affine)
        return GpsFix(t=t, lat_raw=lat_raw, lon_raw=lon_raw, lat_wgs84=lat, lon_wgs84=lon)


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters on a spherical Earth."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def speed_between(a: GpsFix, b: GpsFix) -> float:
    """Mean speed in m/s between two fixes; requires b.t > a.t."""
    if b.t <= a.t:
        raise ValueError(f"fix timestamps must increase: {a.t} -> {b.t}")
    dist = haversine_m(a.lat_wgs84, a.lon_wgs84, b.lat_wgs84, b.lon_wgs84)
    return dist / (b.t - a.t)


@dataclass
class TrajectoryLog:
    fixes: List[GpsFix]

    @property
    def speeds(self) -> List[float]:
        return [
            speed_between(a, b) for a, b in zip(self.fixes, self.fixes[1:])
        ]


def sample_trajectory(fixes: Iterable[GpsFix], period: float = 3.0) -> TrajectoryLog:
    """Keep the first fix, then the next fix at least `period` seconds later."""
    if period <= 0:
        raise ValueError("period must be > 0")
    kept: List[GpsFix] = []
    for fix in fixes:
        if not kept or fix.t >= kept[-1].t + period:
            kept.append(fix)
    return TrajectoryLog(fixes=kept)


def read_fix_csv(
    fp: IO[str], affine: GpsAffine = DEFAULT_AFFINE
) -> Tuple[List[GpsFix], List[str]]:
    """Read a `t,lat_raw,lon_raw` CSV; returns (fixes, row-level warnings)."""
    fixes: List[GpsFix] = []
    warnings: List[str] = []
    reader = csv.DictReader(fp)
    for lineno, row in enumerate(reader, start=2):
        try:
            fixes.append(
                GpsFix.from_raw(
                    float(row["t"]), float(row["lat_raw"]), float(row["lon_raw"]), affine
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            warnings.append(f"row {lineno}: skipped ({exc})")
    return fixes, warnings


def write_trajectory_csv(log: TrajectoryLog, fp: IO[str]) -> None:
    """Columns t,lat,lon,speed_mps; the first row has no speed."""
    writer = csv.writer(fp)
    writer.writerow(["t", "lat", "lon", "speed_mps"])
    speeds = [None] + log.speeds
    for fix, speed in zip(log.fixes, speeds):
        writer.writerow(
            [fix.t, fix.lat_wgs84, fix.lon_wgs84, "" if speed is None else speed]
        )


def trajectory_geojson(log: TrajectoryLog) -> dict:
    features = []
    if log.fixes:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    # GeoJSON orders coordinates [lon, lat]
                    "coordinates": [[f.lon_wgs84, f.lat_wgs84] for f in log.fixes],
                },
                "properties": {
                    "t_start": log.fixes[0].t,
                    "t_end": log.fixes[-1].t,
                    "n_fixes": len(log.fixes),
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def events_geojson(events: Iterable[dict]) -> dict:
    """Map overlay of near-crash events that carry a GPS fix."""
    features = []
    for ev in events:
        gps = ev.get("gps")
        if not gps:
            continue
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [gps["lon"], gps["lat"]]},
                "properties": {
                    "event_id": ev.get("event_id"),
                    "event_type": ev.get("event_type"),
                    "trigger_time": ev.get("trigger_time"),
                    "ttc_h": ev.get("ttc_h"),
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}
