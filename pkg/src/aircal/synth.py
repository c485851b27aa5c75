"""Deterministic synthetic sensor-network generator.

Stands in for a real multi-city deployment at desk scale: each sensor gets
a fixed position inside a box, skewed-positive raw PM2.5 readings,
sinusoidal temperature/humidity channels, and a reference reading built
from the raw signal, the environment channels, a smooth spatial bias
field, and Gaussian noise. Everything is a pure function of the seed; each
sensor draws from its own substream, so generation could run per sensor in
parallel and still produce identical bytes.

The spatial bias field sin(k*lon)*cos(k*lat) has a fixed angular frequency
of 40 rad/degree (wavelength 2*pi/40 of a degree, roughly 17 km east-west
at mid latitudes). Shifting a network's center by a few wavelengths
decorrelates the field completely, which is what makes the
transfer-then-fine-tune experiments meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from aircal.ingest import DEFAULT_SCHEMA, RawTable, SensorRecord
from aircal.rng import SplitMix64

SPATIAL_FREQ = 40.0  # rad per degree
SPATIAL_WAVELENGTH = 2.0 * math.pi / SPATIAL_FREQ  # degrees

_BASE_EPOCH = 1577836800  # 2020-01-01T00:00:00Z
_STEP_SECONDS = 60
_DIURNAL_PERIOD = 1440.0  # timesteps per temperature/humidity cycle
_RAW_MEAN = 15.0  # target mean of the lognormal raw channel, ug/m3


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one generated network."""

    n_sensors: int = 10
    n_timesteps: int = 500
    center_lon: float = 10.0
    center_lat: float = 50.0
    spread: float = 0.5
    coeff_raw: float = 0.8
    coeff_hum: float = 0.1
    coeff_temp: float = 0.2
    spatial_amp: float = 10.0
    noise_sigma: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_sensors < 1:
            raise ValueError("n_sensors must be >= 1")
        if self.n_timesteps < 1:
            raise ValueError("n_timesteps must be >= 1")
        if not self.spread > 0.0:
            raise ValueError("spread must be > 0")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")


def spatial_bias(lon: float, lat: float, amp: float) -> float:
    return amp * math.sin(SPATIAL_FREQ * lon) * math.cos(SPATIAL_FREQ * lat)


def generate(config: SynthConfig) -> dict[str, list[SensorRecord]]:
    """Generate per-sensor record lists, keyed by sensor id in ascending
    order. Draw order within a sensor's substream is fixed (position,
    phases, raw, channel noises, reference noise) and part of the output
    contract: the same seed always yields the same bytes."""
    t = np.arange(config.n_timesteps, dtype=np.float64)
    angle = 2.0 * math.pi * (t / _DIURNAL_PERIOD)
    timestamps = _BASE_EPOCH + _STEP_SECONDS * np.arange(
        config.n_timesteps, dtype=np.int64
    )
    master = SplitMix64(config.seed)
    out: dict[str, list[SensorRecord]] = {}
    for s in range(config.n_sensors):
        rng = master.spawn(s)
        lon = config.center_lon + config.spread * (2.0 * rng.uniform() - 1.0)
        lat = config.center_lat + config.spread * (2.0 * rng.uniform() - 1.0)
        phase_temp = 2.0 * math.pi * rng.uniform()
        phase_hum = 2.0 * math.pi * rng.uniform()
        raw = (_RAW_MEAN / math.exp(0.5)) * np.exp(
            rng.normal_block(config.n_timesteps)
        )
        temp_ext = (
            15.0
            + 8.0 * np.sin(angle + phase_temp)
            + 1.5 * rng.normal_block(config.n_timesteps)
        )
        temp_int = temp_ext + 4.0 + 0.5 * rng.normal_block(config.n_timesteps)
        hum_ext = np.clip(
            60.0
            + 18.0 * np.sin(angle + phase_hum)
            + 2.0 * rng.normal_block(config.n_timesteps),
            5.0,
            110.0,
        )
        hum_int = np.clip(
            hum_ext - 8.0 + 0.5 * rng.normal_block(config.n_timesteps), 2.0, 110.0
        )
        noise = config.noise_sigma * rng.normal_block(config.n_timesteps)
        ref = (
            config.coeff_raw * raw
            + config.coeff_hum * (hum_ext - 50.0)
            + config.coeff_temp * (temp_ext - 15.0)
            + spatial_bias(lon, lat, config.spatial_amp)
            + noise
        )
        sid = f"S{s:03d}"
        out[sid] = [
            SensorRecord(
                sensor_id=sid,
                timestamp=int(timestamps[i]),
                raw_pm25=float(raw[i]),
                ref_pm25=float(ref[i]),
                longitude=lon,
                latitude=lat,
                temp_internal=float(temp_int[i]),
                temp_external=float(temp_ext[i]),
                hum_internal=float(hum_int[i]),
                hum_external=float(hum_ext[i]),
            )
            for i in range(config.n_timesteps)
        ]
    return out


def inject_missing(
    per_sensor: dict[str, list[SensorRecord]], fraction: float, seed: int
) -> dict[str, list[SensorRecord]]:
    """Blank a fraction of each fillable feature channel, independently
    per sensor and channel, to exercise imputation. The reference reading
    and positions are never blanked. Substream indices start past the
    generator's so masks never reuse a generation stream. Each channel
    keeps at least one observation, so every column stays fillable."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must be in [0, 1)")
    if fraction == 0.0:
        return {sid: list(recs) for sid, recs in per_sensor.items()}
    channels = ("raw_pm25", "temp_internal", "temp_external", "hum_internal",
                "hum_external")
    master = SplitMix64(seed)
    n_sensors = len(per_sensor)
    out: dict[str, list[SensorRecord]] = {}
    for s, (sid, recs) in enumerate(per_sensor.items()):
        rng = master.spawn(n_sensors + s)
        n = len(recs)
        masks = {}
        for ch in channels:
            mask = rng.uniform_open_block(n) <= fraction
            if mask.all():
                mask[0] = False
            masks[ch] = mask
        rows = []
        for i, rec in enumerate(recs):
            blanked = {ch: None for ch in channels if masks[ch][i]}
            if blanked:
                rec = replace(rec, **blanked)
            rows.append(rec)
        out[sid] = rows
    return out


def records_to_table(per_sensor: dict[str, list[SensorRecord]]) -> RawTable:
    """Flatten generated records into the deployment CSV shape (default
    column vocabulary, ISO-8601 UTC timestamps)."""
    names = [
        DEFAULT_SCHEMA["sensor_id"],
        DEFAULT_SCHEMA["timestamp"],
        DEFAULT_SCHEMA["raw_pm25"],
        DEFAULT_SCHEMA["ref_pm25"],
        DEFAULT_SCHEMA["longitude"],
        DEFAULT_SCHEMA["latitude"],
        DEFAULT_SCHEMA["temp_internal"],
        DEFAULT_SCHEMA["temp_external"],
        DEFAULT_SCHEMA["hum_internal"],
        DEFAULT_SCHEMA["hum_external"],
    ]
    rows = []
    for sid in sorted(per_sensor):
        for rec in per_sensor[sid]:
            stamp = datetime.fromtimestamp(rec.timestamp, tz=timezone.utc)
            rows.append(
                (
                    rec.sensor_id,
                    stamp.isoformat(),
                    rec.raw_pm25,
                    rec.ref_pm25,
                    rec.longitude,
                    rec.latitude,
                    rec.temp_internal,
                    rec.temp_external,
                    rec.hum_internal,
                    rec.hum_external,
                )
            )
    return RawTable(column_names=tuple(names), rows=tuple(rows))
