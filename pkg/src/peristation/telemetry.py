"""Telemetry serialization.

One CSV row per module per controller tick, plus module_id=0 rows for
station-scoped events, all at fixed 6-decimal precision so identical runs
produce byte-identical files on any platform.  Event text never contains
commas; multiple events for one module in one tick join with ';'.
"""

from __future__ import annotations

from dataclasses import dataclass

TELEMETRY_HEADER = "time_s,module_id,kind,pressure_kPa,valve,inflation_mm,object_z_mm,phase,event"


@dataclass(frozen=True)
class TelemetrySample:
    time_s: float
    module_id: int
    kind: str
    pressure_kPa: float
    valve: str
    inflation_mm: float
    object_z_mm: float
    phase: str
    event: str


class TelemetryWriter:
    """Streams rows to a CSV file in timestamp order.

    Pressure is the sensed value the controller acted on; inflation and
    object z are plant ground truth, which is why recording requires the
    simulated backend.
    """

    def __init__(self, path):
        self.path = path
        self._f = open(path, "w", buffering=1 << 20, newline="")
        self._f.write(TELEMETRY_HEADER + "\n")

    def record(self, now, sensed, valves, phase, plant, events):
        if plant is None:
            raise ValueError("recording requires plant ground truth")
        obj = plant.object
        oz = obj.z if obj is not None else 0.0
        by_module = {}
        station = []
        for mid, text in events:
            if mid == 0:
                station.append(text)
            else:
                by_module.setdefault(mid, []).append(text)
        write = self._f.write
        for mod in plant.layout.modules:
            ev = ";".join(by_module.get(mod.id, ()))
            write(
                f"{now:.6f},{mod.id},{mod.kind},{sensed[mod.id]:.6f},{valves[mod.id]},"
                f"{plant.inflation(mod.id):.6f},{oz:.6f},{phase},{ev}\n"
            )
        for text in station:
            write(f"{now:.6f},0,-,0.000000,-,0.000000,{oz:.6f},{phase},{text}\n")

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_telemetry(path) -> list[TelemetrySample]:
    """Parse a telemetry CSV back into samples.

    Raises:
        ValueError: wrong header or malformed row.
    """
    samples = []
    with open(path, "r", newline="") as f:
        header = f.readline().rstrip("\n")
        if header != TELEMETRY_HEADER:
            raise ValueError(f"unrecognized telemetry header: {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",", 8)
            if len(parts) != 9:
                raise ValueError(f"line {lineno}: expected 9 columns, got {len(parts)}")
            try:
                samples.append(TelemetrySample(
                    time_s=float(parts[0]),
                    module_id=int(parts[1]),
                    kind=parts[2],
                    pressure_kPa=float(parts[3]),
                    valve=parts[4],
                    inflation_mm=float(parts[5]),
                    object_z_mm=float(parts[6]),
                    phase=parts[7],
                    event=parts[8],
                ))
            except ValueError as e:
                raise ValueError(f"line {lineno}: {e}") from None
    return samples
