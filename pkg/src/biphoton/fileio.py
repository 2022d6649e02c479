"""Text file formats: matrix CSV with grid header, record vectors, PGM, run configs."""
from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError, ValidationError
from .grid import SpectralGrid
from .instruments import CoincidenceHistogram, InstrumentConfig, MeasurementRecord
from .schmidt import parse_pipeline
from .spectral import JointAmplitude, SourceModel

MAGIC = "biphoton-matrix 1"
VECTOR_MAGIC = "biphoton-vector 1"
_GRID_KEYS = ("axis1_start", "axis1_pitch", "axis1_count", "axis2_start", "axis2_pitch", "axis2_count")
FORMATS = ("csv", "pgm", "json")


def _fmt(x) -> str:
    return repr(float(x))


def _header_lines(magic: str, fields: dict) -> list[str]:
    lines = [f"# {magic}", f"# tool: biphoton {__version__}"]
    for key, value in fields.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = _fmt(value)
        lines.append(f"# {key}: {value}")
    return lines


def _grid_fields(grid: SpectralGrid, axes=(1, 2)) -> dict:
    out = {"units": "nm"}
    for axis in axes:
        for key in ("start", "pitch", "count"):
            out[f"axis{axis}_{key}"] = getattr(grid, f"axis{axis}_{key}")
    out["linearized"] = grid.linearized
    return out


def _provenance(provenance: dict | None) -> dict:
    provenance = provenance or {}
    return {
        "config_sha256": provenance.get("config_sha256", "none"),
        "seed": provenance.get("seed", "none"),
    }


def _parse(path) -> tuple[dict, list[str]]:
    header, payload = {}, []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    header[key.strip()] = value.strip()
                else:
                    header.setdefault("_magic", body)
            else:
                payload.append(line)
    return header, payload


def _header_grid(header: dict, path) -> SpectralGrid:
    try:
        return SpectralGrid(
            float(header["axis1_start"]), float(header["axis1_pitch"]), int(header["axis1_count"]),
            float(header["axis2_start"]), float(header["axis2_pitch"]), int(header["axis2_count"]),
            header.get("linearized", "true") == "true",
        )
    except KeyError as exc:
        raise ParseError(f"{path}: header lacks grid field {exc.args[0]}") from None


def write_matrix(path, values: np.ndarray, grid: SpectralGrid, kind: str = "matrix",
                 provenance: dict | None = None) -> Path:
    """Write a matrix as CSV preceded by ``#`` header lines carrying the grid."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValidationError(f"matrix shape {values.shape} != grid shape {grid.shape}")
    integer = np.issubdtype(values.dtype, np.integer)
    fields = {"kind": kind, "dtype": "int" if integer else "float", **_provenance(provenance),
              **_grid_fields(grid)}
    buf = io.StringIO()
    buf.write("\n".join(_header_lines(MAGIC, fields)) + "\n")
    fmt = str if integer else _fmt
    for row in values:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_matrix(path) -> tuple[np.ndarray, SpectralGrid, dict]:
    header, payload = _parse(path)
    if header.get("_magic") != MAGIC:
        raise ParseError(f"{path}: not a biphoton matrix file")
    grid = _header_grid(header, path)
    if not payload:
        raise ParseError(f"{path}: missing payload (header only, no matrix rows)")
    dtype = np.int64 if header.get("dtype") == "int" else float
    try:
        rows = [[dtype(v) for v in line.split(",")] for line in payload]
    except ValueError as exc:
        raise ParseError(f"{path}: malformed value ({exc})") from None
    if len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path}: ragged rows")
    values = np.array(rows, dtype=dtype)
    if values.shape != grid.shape:
        raise ValidationError(f"{path}: payload shape {values.shape} disagrees with header grid {grid.shape}")
    return values, grid, header


def write_amplitude(stem, amp: JointAmplitude, provenance: dict | None = None) -> list[Path]:
    stem = Path(stem)
    return [
        write_matrix(stem.with_name(stem.name + "_re.csv"), amp.values.real, amp.grid, "jsa_real", provenance),
        write_matrix(stem.with_name(stem.name + "_im.csv"), amp.values.imag, amp.grid, "jsa_imag", provenance),
    ]


def read_amplitude(stem) -> JointAmplitude:
    stem = Path(stem)
    re, grid, _ = read_matrix(stem.with_name(stem.name + "_re.csv"))
    im, grid_im, _ = read_matrix(stem.with_name(stem.name + "_im.csv"))
    if grid != grid_im:
        raise ValidationError("real and imaginary parts carry different grids")
    return JointAmplitude(grid, re + 1j * im)


def write_record(stem, rec: MeasurementRecord, provenance: dict | None = None) -> list[Path]:
    """Write ``<stem>_R.csv`` (intensity) and ``<stem>_T.csv`` (per-step vectors)."""
    stem = Path(stem)
    r_path = write_matrix(stem.with_name(stem.name + "_R.csv"), rec.intensity, rec.grid, "dfg_intensity", provenance)
    fields = {"kind": "dfg_seed_vectors", **_provenance(provenance), **_grid_fields(rec.grid, axes=(1,))}
    lines = _header_lines(VECTOR_MAGIC, fields)
    lines.append("# columns: seed_wavelength_nm,transmittance,p_ref,flagged")
    lam = rec.grid.wavelengths(1)
    for k in range(rec.grid.axis1_count):
        lines.append(f"{_fmt(lam[k])},{_fmt(rec.transmittance[k])},{_fmt(rec.p_ref[k])},{int(rec.flagged[k])}")
    t_path = stem.with_name(stem.name + "_T.csv")
    t_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [r_path, t_path]


def read_record(r_path, t_path=None) -> MeasurementRecord:
    """Load a record; without a vector file the transmittance is taken as 1."""
    R, grid, header = read_matrix(r_path)
    if t_path is None:
        return MeasurementRecord(grid, R, np.ones(grid.axis1_count), meta={"source": str(r_path)})
    t_header, payload = _parse(t_path)
    if t_header.get("_magic") != VECTOR_MAGIC:
        raise ParseError(f"{t_path}: not a biphoton vector file")
    if not payload:
        raise ParseError(f"{t_path}: missing payload (header only, no rows)")
    try:
        table = np.array([[float(v) for v in line.split(",")] for line in payload])
    except ValueError as exc:
        raise ParseError(f"{t_path}: malformed value ({exc})") from None
    if table.ndim != 2 or table.shape[1] != 4:
        raise ParseError(f"{t_path}: expected 4 columns")
    for key in ("axis1_start", "axis1_pitch", "axis1_count"):
        if key in t_header and float(t_header[key]) != float(getattr(grid, key)):
            raise ValidationError(f"grid mismatch between {r_path} and {t_path}: {key}")
    if table.shape[0] != grid.axis1_count:
        raise ValidationError(
            f"grid mismatch between {r_path} and {t_path}: {table.shape[0]} seed steps vs {grid.axis1_count} rows"
        )
    return MeasurementRecord(grid, R, table[:, 1], table[:, 2], table[:, 3] != 0,
                             meta={"source": str(r_path), "seed": header.get("seed")})


def write_histogram(path, hist: CoincidenceHistogram, provenance: dict | None = None) -> Path:
    return write_matrix(path, hist.counts.astype(np.int64), hist.grid, "coincidences", provenance)


def write_pgm(path, values: np.ndarray) -> Path:
    """16-bit binary PGM, max-normalized, idler axis descending down the rows."""
    img = np.asarray(values, dtype=float).T[::-1, :]
    peak = img.max()
    scaled = np.zeros(img.shape) if not peak > 0 else np.clip(img, 0, None) / peak
    data = np.round(scaled * 65535).astype(">u2")
    rows, cols = data.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM")
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(rows, cols)


@dataclass
class RunConfig:
    source: SourceModel = field(default_factory=SourceModel)
    grid: SpectralGrid = field(default_factory=SpectralGrid.reference_window)
    instrument: InstrumentConfig = field(default_factory=InstrumentConfig)
    pipeline: list = field(default_factory=lambda: [{"crop": 0.14}, {"bin": [2, 7]}])
    output: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    def __post_init__(self):
        parse_pipeline(self.pipeline)
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ValidationError(f"unknown export formats {sorted(bad)}")

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "grid": self.grid.to_dict(),
            "instrument": self.instrument.to_dict(),
            "pipeline": list(self.pipeline),
            "output": self.output,
            "formats": list(self.formats),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - {"source", "grid", "instrument", "pipeline", "output", "formats"}
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        if "source" in data:
            kwargs["source"] = SourceModel.from_dict(data["source"])
        if "grid" in data:
            kwargs["grid"] = SpectralGrid.from_dict(data["grid"])
        if "instrument" in data:
            kwargs["instrument"] = InstrumentConfig.from_dict(data["instrument"])
        if "pipeline" in data:
            kwargs["pipeline"] = list(data["pipeline"])
        if "output" in data:
            kwargs["output"] = str(data["output"])
        if "formats" in data:
            kwargs["formats"] = tuple(data["formats"])
        return cls(**kwargs)

    def sha256(self) -> str:
        """Hash of the physics-relevant content (output location excluded)."""
        data = self.to_dict()
        data.pop("output")
        data.pop("formats")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def default_config_path() -> Path:
    return Path(__file__).with_name("data") / "defaults.json"


def load_config(path=None) -> RunConfig:
    path = default_config_path() if path is None else Path(path)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(data)


def save_config(path, cfg: RunConfig) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_report(directory, name: str, report: dict, provenance: dict, formats) -> list[Path]:
    """Emit a report as ``key: value`` text and, if requested, JSON."""
    directory = Path(directory)
    body = {"provenance": {"tool": f"biphoton {__version__}", **provenance}, **_plain(report)}
    paths = []
    txt = directory / f"{name}.txt"
    txt.write_text("\n".join(format_report(body)) + "\n", encoding="utf-8")
    paths.append(txt)
    if "json" in formats:
        js = directory / f"{name}.json"
        js.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths.append(js)
    return paths


def format_report(report: dict, prefix: str = "") -> list[str]:
    lines = []
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(format_report(value, name + "."))
        elif isinstance(value, float):
            lines.append(f"{name}: {value:.6g}")
        elif isinstance(value, list) and value and all(isinstance(v, float) for v in value):
            lines.append(f"{name}: " + ", ".join(f"{v:.6g}" for v in value))
        else:
            lines.append(f"{name}: {value}")
    return lines


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ValidationError(f"output directory {path} is not writable")
    return path
