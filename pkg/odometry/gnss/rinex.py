# odometry/gnss/rinex.py
"""
RINEX observation and navigation files (versions 2.11 and 3.x, GPS L1 only).

RINEX text replaces the binary RTCM1004 stream a field receiver would log:
it carries the same L1 phase/code/Doppler content and is easy to fixture.

Malformed data lines are skipped and counted; structural problems (missing
header, unsupported version, nothing parsed) raise a ``RinexError`` subclass.
"""
import logging
import math
import re

from .ephemeris import BroadcastEphemeris
from .atmosphere import KlobucharParams
from .exceptions import (
    EmptyObservationError,
    OdometryError,
    RinexError,
    RinexFormatError,
    RinexHeaderError,
)
from .frames import GpsTime
from .observations import ObservationEpoch, SatelliteObservation

logger = logging.getLogger('odometry')

OBS_FIELD_WIDTH = 16
OBS_PER_LINE_V2 = 5
SATS_PER_LINE_V2 = 12
NAV_FIELD_WIDTH = 19

# Observable name prefixes we read, keyed by SatelliteObservation attribute.
L1_OBSERVABLES = {
    "pseudorange": "C1",
    "phase": "L1",
    "doppler": "D1",
    "snr": "S1",
}

_MALFORMED = (ValueError, IndexError, TypeError, OverflowError)

_EPOCH_V2 = re.compile(r"^\s?\d{1,2}\s+\d{1,2}\s+\d{1,2}\s+\d{1,2}\s+\d{1,2}\s+\d+\.\d+\s+\d\s*\d+")
_EPOCH_V3 = re.compile(r"^>\s*\d{4}\s+\d{1,2}\s+\d{1,2}\s+\d{1,2}\s+\d{1,2}\s+\d+\.\d+\s+\d\s+\d+")


# ==============================================================================
# SHARED HELPERS
# ==============================================================================

def _read_lines(path):
    try:
        with open(path, "r", encoding="ascii", errors="replace") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise RinexError(f"cannot read {path}", reason=str(exc)) from exc


def _label(line):
    return line[60:80].strip()


def _split_header(lines, expected_type):
    """Return ``(version, header_lines, body_lines)``."""
    if not lines or _label(lines[0]) != "RINEX VERSION / TYPE":
        raise RinexHeaderError("missing RINEX VERSION / TYPE header line")
    try:
        version = float(lines[0][:9])
    except ValueError as exc:
        raise RinexHeaderError("unreadable RINEX version", text=lines[0][:9]) from exc
    if int(version) not in (2, 3):
        raise RinexHeaderError("unsupported RINEX version", version=version)
    file_type = lines[0][20:21].upper()
    if file_type != expected_type:
        raise RinexHeaderError("unexpected RINEX file type", file_type=file_type,
                               expected=expected_type)
    for index, line in enumerate(lines):
        if _label(line) == "END OF HEADER":
            return version, lines[:index + 1], lines[index + 1:]
    raise RinexHeaderError("END OF HEADER not found")


def _header_line(content, label):
    return f"{content:<60.60}{label:<20}"


def _parse_time(year, month, day, hour, minute, second):
    year = int(year)
    if year < 100:
        year += 2000 if year < 80 else 1900
    return GpsTime.from_calendar(year, int(month), int(day), int(hour), int(minute), float(second))


def _sat_id(token):
    token = token.strip()
    if not token:
        return None
    system = token[0] if token[0].isalpha() else "G"
    prn = int(token[1:] if token[0].isalpha() else token)
    return f"{system}{prn:02d}"


# ==============================================================================
# OBSERVATION FILES
# ==============================================================================

def _observation_types(version, header):
    types, declared = [], None
    in_gps_block = False
    for line in header:
        label = _label(line)
        if version < 3 and label == "# / TYPES OF OBSERV":
            if declared is None:
                declared = int(line[:6])
            types.extend(line[6:60].split())
        elif version >= 3 and label == "SYS / # / OBS TYPES":
            if line[0] == "G":
                declared = int(line[3:6])
                types.extend(line[7:60].split())
                in_gps_block = True
            elif line[0] == " " and in_gps_block:
                types.extend(line[7:60].split())
            else:
                in_gps_block = False
    if not types:
        raise RinexHeaderError("no GPS observation types declared")
    return types[:declared] if declared else types


def _observable_columns(types):
    columns = {}
    for attr, prefix in L1_OBSERVABLES.items():
        columns[attr] = next((k for k, name in enumerate(types) if name.startswith(prefix)), None)
    if columns["phase"] is None:
        raise RinexHeaderError("no L1 carrier-phase observable in file", types=types)
    return columns


def _fields(text, count):
    """Split an observation block into ``(value, lli)`` pairs."""
    out = []
    for k in range(count):
        chunk = text[OBS_FIELD_WIDTH * k:OBS_FIELD_WIDTH * (k + 1)].ljust(OBS_FIELD_WIDTH)
        value = chunk[:14].strip()
        lli = chunk[14].strip()
        out.append((float(value) if value else math.nan, int(lli) if lli.isdigit() else 0))
    return out


def _observation(sat_id, fields, columns):
    def pick(attr):
        k = columns.get(attr)
        return fields[k] if k is not None and k < len(fields) else (math.nan, 0)

    phase, lli = pick("phase")
    return SatelliteObservation(
        sat_id=sat_id,
        phase=phase,
        pseudorange=pick("pseudorange")[0],
        doppler=pick("doppler")[0],
        snr=pick("snr")[0],
        lock_lost=bool(lli & 1) or not math.isfinite(phase),
    )


def _body_v2(body, types, columns):
    epochs, skipped = [], 0
    lines_per_sat = (len(types) + OBS_PER_LINE_V2 - 1) // OBS_PER_LINE_V2
    i = 0
    while i < len(body):
        line = body[i]
        if not line.strip():
            i += 1
            continue
        if not _EPOCH_V2.match(line):
            skipped += 1
            i += 1
            continue
        try:
            t = _parse_time(*line[1:26].split())
            flag = int(line[28])
            count = int(line[29:32])
            if count < 0:
                raise ValueError(count)
        except _MALFORMED:
            skipped += 1
            i += 1
            continue
        if flag > 1:
            # event records carry `count` special lines
            i += 1 + count
            continue

        sat_lines = max(1, (count + SATS_PER_LINE_V2 - 1) // SATS_PER_LINE_V2)
        block_end = i + sat_lines + count * lines_per_sat
        if block_end > len(body):
            skipped += len(body) - i
            break
        sat_text = "".join(body[i + k][32:68].ljust(36) for k in range(sat_lines))

        records = []
        cursor = i + sat_lines
        for j in range(count):
            text = "".join(body[cursor + m][:80].ljust(80) for m in range(lines_per_sat))
            cursor += lines_per_sat
            try:
                sat_id = _sat_id(sat_text[3 * j:3 * j + 3])
                if sat_id is None or not sat_id.startswith("G"):
                    continue
                records.append(_observation(sat_id, _fields(text, len(types)), columns))
            except _MALFORMED:
                skipped += 1
        i = block_end
        if records:
            try:
                epochs.append(ObservationEpoch(t, tuple(records)))
            except OdometryError:
                skipped += 1
    return epochs, skipped


def _body_v3(body, types, columns):
    epochs, skipped = [], 0
    i = 0
    while i < len(body):
        line = body[i]
        if not line.strip():
            i += 1
            continue
        if not _EPOCH_V3.match(line):
            skipped += 1
            i += 1
            continue
        try:
            tokens = line[1:].split()
            t = _parse_time(*tokens[:6])
            flag, count = int(tokens[6]), int(tokens[7])
        except _MALFORMED:
            skipped += 1
            i += 1
            continue
        if flag > 1:
            i += 1 + count
            continue

        records = []
        for sat_line in body[i + 1:i + 1 + count]:
            try:
                sat_id = _sat_id(sat_line[:3])
                if sat_id is None or not sat_id.startswith("G"):
                    continue
                records.append(_observation(sat_id, _fields(sat_line[3:], len(types)), columns))
            except _MALFORMED:
                skipped += 1
        i += 1 + count
        if records:
            try:
                epochs.append(ObservationEpoch(t, tuple(records)))
            except OdometryError:
                skipped += 1
    return epochs, skipped


def parse_rinex_obs(path):
    """Parse a RINEX 2.11 or 3.x observation file into ObservationEpochs."""
    version, header, body = _split_header(_read_lines(path), "O")
    try:
        types = _observation_types(version, header)
    except (ValueError, IndexError) as exc:
        raise RinexHeaderError("unreadable observation-type header", reason=str(exc)) from exc
    columns = _observable_columns(types)

    if version < 3:
        epochs, skipped = _body_v2(body, types, columns)
    else:
        epochs, skipped = _body_v3(body, types, columns)

    if skipped:
        logger.warning(f"Skipped {skipped} malformed line(s) in {path}.")
    if not epochs:
        raise EmptyObservationError("zero epochs parsed", path=str(path))
    epochs.sort(key=lambda e: e.t)
    logger.info(f"Parsed {len(epochs)} observation epochs (RINEX {version:.2f}) from {path}.")
    return epochs


def _obs_field(value, lli=0, ssi=0):
    if value is None or not math.isfinite(value):
        return " " * OBS_FIELD_WIDTH
    if abs(value) >= 1e10:
        raise RinexFormatError("observation value too large for F14.3", value=value)
    return f"{value:14.3f}{lli if lli else ' '}{ssi if ssi else ' '}"


def _signal_strength(snr):
    if snr is None or not math.isfinite(snr):
        return 0
    return min(9, max(1, int(snr // 6)))


def write_rinex_obs(epochs, path, approx_position=(0.0, 0.0, 0.0), interval=1.0,
                    marker="SIMULATED"):
    """Write GPS L1 observations as a RINEX 2.11 observation file."""
    epochs = list(epochs)
    if not epochs:
        raise EmptyObservationError("refusing to write an observation file with zero epochs")

    y, mo, d, h, mi, s = epochs[0].t.to_calendar()
    x, yy, z = approx_position
    lines = [
        _header_line("     2.11           OBSERVATION DATA    G (GPS)", "RINEX VERSION / TYPE"),
        _header_line(f"{'gnss_odometry':<20}{'odometry':<20}{'':<20}", "PGM / RUN BY / DATE"),
        _header_line(marker, "MARKER NAME"),
        _header_line(f"{x:14.4f}{yy:14.4f}{z:14.4f}", "APPROX POSITION XYZ"),
        _header_line(f"{4:6d}    C1    L1    D1    S1", "# / TYPES OF OBSERV"),
        _header_line(f"{interval:10.3f}", "INTERVAL"),
        _header_line(f"{y:6d}{mo:6d}{d:6d}{h:6d}{mi:6d}{s:13.7f}     GPS", "TIME OF FIRST OBS"),
        _header_line("", "END OF HEADER"),
    ]

    for epoch in epochs:
        y, mo, d, h, mi, s = epoch.t.to_calendar()
        sats = [r.sat_id for r in epoch.records]
        head = f" {y % 100:02d} {mo:2d} {d:2d} {h:2d} {mi:2d}{s:11.7f}  0{len(sats):3d}"
        for start in range(0, len(sats), SATS_PER_LINE_V2):
            chunk = "".join(sats[start:start + SATS_PER_LINE_V2])
            lines.append((head if start == 0 else " " * 32) + chunk)
        for r in epoch.records:
            ssi = _signal_strength(r.snr)
            lines.append(
                _obs_field(r.pseudorange, 0, ssi)
                + _obs_field(r.phase, 1 if r.lock_lost else 0, ssi)
                + _obs_field(r.doppler, 0, ssi)
                + _obs_field(r.snr)
            )

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(line.rstrip() for line in lines) + "\n")
    logger.info(f"Wrote {len(epochs)} epochs to {path}.")


# ==============================================================================
# NAVIGATION FILES
# ==============================================================================

def _nav_float(text):
    text = text.strip().replace("D", "E").replace("d", "e")
    return float(text) if text else 0.0


def _nav_values(text, start, count):
    return [_nav_float(text[start + NAV_FIELD_WIDTH * k:start + NAV_FIELD_WIDTH * (k + 1)])
            for k in range(count)]


def _klobuchar_from_header(version, header):
    alpha = beta = None
    for line in header:
        label = _label(line)
        if version < 3 and label == "ION ALPHA":
            alpha = [_nav_float(line[2 + 12 * k:14 + 12 * k]) for k in range(4)]
        elif version < 3 and label == "ION BETA":
            beta = [_nav_float(line[2 + 12 * k:14 + 12 * k]) for k in range(4)]
        elif version >= 3 and label == "IONOSPHERIC CORR":
            if line[:4] == "GPSA":
                alpha = [_nav_float(line[5 + 12 * k:17 + 12 * k]) for k in range(4)]
            elif line[:4] == "GPSB":
                beta = [_nav_float(line[5 + 12 * k:17 + 12 * k]) for k in range(4)]
    if alpha is None or beta is None:
        return None
    return KlobucharParams(tuple(alpha), tuple(beta))


def _record_blocks(body, version):
    """Group body lines into per-satellite records."""
    blocks, current = [], []
    for line in body:
        if not line.strip():
            continue
        starts = line[0].isalpha() if version >= 3 else line[:2].strip().isdigit()
        if starts and current:
            blocks.append(current)
            current = []
        current.append(line)
    if current:
        blocks.append(current)
    return blocks


def _ephemeris_from_block(block, version):
    first = block[0]
    if version >= 3:
        sat_id = _sat_id(first[:3])
        if not sat_id.startswith("G"):
            return None
        toc = _parse_time(*first[3:23].split())
        clock = _nav_values(first, 23, 3)
        indent = 4
    else:
        sat_id = _sat_id(first[:2])
        toc = _parse_time(*first[2:22].split())
        clock = _nav_values(first, 22, 3)
        indent = 3
    if len(block) < 8:
        raise RinexFormatError("truncated navigation record", sat_id=sat_id)

    orbit = []
    for line in block[1:8]:
        orbit.extend(_nav_values(line.ljust(80), indent, 4))
    (iode, crs, delta_n, m0,
     cuc, e, cus, sqrt_a,
     toe_sow, cic, omega0, cis,
     i0, crc, omega, omega_dot,
     idot, _codes, week, _l2p,
     _accuracy, health, tgd, _iodc,
     _tx_time, _fit) = orbit[:26] + [0.0] * max(0, 26 - len(orbit))

    return BroadcastEphemeris(
        sat_id=sat_id,
        toe=GpsTime.from_week_sow(int(week), toe_sow),
        toc=toc,
        sqrt_a=sqrt_a, e=e, i0=i0, omega0=omega0, omega=omega, m0=m0,
        delta_n=delta_n, idot=idot, omega_dot=omega_dot,
        cuc=cuc, cus=cus, crc=crc, crs=crs, cic=cic, cis=cis,
        af0=clock[0], af1=clock[1], af2=clock[2],
        iode=iode, tgd=tgd, health=health,
    )


def parse_rinex_nav(path):
    """
    Parse a RINEX 2.11 or 3.x GPS navigation file.

    Returns ``(ephemerides, klobuchar)`` where ``klobuchar`` is None when the
    header carries no ionospheric coefficients.
    """
    version, header, body = _split_header(_read_lines(path), "N")
    try:
        klobuchar = _klobuchar_from_header(version, header)
    except (ValueError, OdometryError) as exc:
        logger.warning(f"Ignoring unreadable ionospheric header in {path}: {exc}")
        klobuchar = None

    ephemerides, skipped = [], 0
    for block in _record_blocks(body, version):
        try:
            eph = _ephemeris_from_block(block, version)
        except (*_MALFORMED, OdometryError):
            skipped += 1
            continue
        if eph is not None:
            ephemerides.append(eph)

    if skipped:
        logger.warning(f"Skipped {skipped} malformed navigation record(s) in {path}.")
    if not ephemerides:
        raise RinexFormatError("no GPS ephemeris records parsed", path=str(path))
    logger.info(f"Parsed {len(ephemerides)} GPS ephemerides from {path}.")
    return ephemerides, klobuchar


def _d19(value):
    return f"{value:19.12E}"


def write_rinex_nav(ephemerides, path, klobuchar=None):
    """Write GPS broadcast ephemerides as a RINEX 2.11 navigation file."""
    ephemerides = list(ephemerides)
    if not ephemerides:
        raise RinexFormatError("refusing to write a navigation file with no records")

    lines = [
        _header_line("     2.11           N: GPS NAV DATA", "RINEX VERSION / TYPE"),
        _header_line(f"{'gnss_odometry':<20}{'odometry':<20}{'':<20}", "PGM / RUN BY / DATE"),
    ]
    if klobuchar is not None:
        lines.append(_header_line("  " + "".join(f"{v:12.4E}" for v in klobuchar.alpha), "ION ALPHA"))
        lines.append(_header_line("  " + "".join(f"{v:12.4E}" for v in klobuchar.beta), "ION BETA"))
    lines.append(_header_line("", "END OF HEADER"))

    for eph in sorted(ephemerides, key=lambda e: (e.sat_id, e.toe)):
        y, mo, d, h, mi, s = eph.toc.to_calendar()
        prn = int(eph.sat_id[1:])
        lines.append(f"{prn:2d} {y % 100:02d} {mo:2d} {d:2d} {h:2d} {mi:2d}{s:5.1f}"
                     + _d19(eph.af0) + _d19(eph.af1) + _d19(eph.af2))
        orbit = [
            (eph.iode, eph.crs, eph.delta_n, eph.m0),
            (eph.cuc, eph.e, eph.cus, eph.sqrt_a),
            (eph.toe.sow, eph.cic, eph.omega0, eph.cis),
            (eph.i0, eph.crc, eph.omega, eph.omega_dot),
            (eph.idot, 1.0, float(eph.toe.week), 0.0),
            (2.0, eph.health, eph.tgd, eph.iode),
            (eph.toe.sow, 4.0),
        ]
        for row in orbit:
            lines.append("   " + "".join(_d19(v) for v in row))

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    logger.info(f"Wrote {len(ephemerides)} ephemerides to {path}.")
