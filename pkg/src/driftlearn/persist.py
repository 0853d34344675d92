"""On-disk formats: weight snapshot files, the NDJSON run log, per-version
manifest directories, and the replayable export archive.

A snapshot file is one JSON header line {format_version, architecture, seed}
followed by the raw little-endian float64 parameter payload (per layer:
weights row-major, then biases).
"""

import json
import re
import zipfile
from pathlib import Path

import numpy as np

from .errors import ArgumentError, ExportError, IncompatibleSnapshotError
from .nets import SnapshotEntry, WeightSnapshot

SNAPSHOT_FORMAT_VERSION = 1


def _arch_to_json(arch: tuple) -> list:
    return [[int(a), int(b), act] for a, b, act in arch]


def _arch_from_json(data) -> tuple:
    return tuple((int(a), int(b), str(act)) for a, b, act in data)


def _param_count(arch: tuple) -> int:
    return sum(a * b + b for a, b, _ in arch)


def write_snapshot_file(path, entry: SnapshotEntry) -> None:
    header = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "architecture": _arch_to_json(entry.arch),
        "seed": entry.seed,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(entry.params, dtype="<f8").tobytes())


def read_snapshot_file(path) -> SnapshotEntry:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise IncompatibleSnapshotError(f"unreadable snapshot header in {path}") from err
    if header.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise IncompatibleSnapshotError(
            f"unsupported snapshot format {header.get('format_version')!r}")
    arch = _arch_from_json(header["architecture"])
    params = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    if params.size != _param_count(arch):
        raise IncompatibleSnapshotError(
            f"{path}: payload holds {params.size} floats, architecture needs "
            f"{_param_count(arch)}")
    return SnapshotEntry(arch, int(header.get("seed", 0)), params)


def _component_filename(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name) + ".wsnap"


def write_version_dir(root, version) -> Path:
    """Materialize one engine.Version as a manifest directory."""
    vdir = Path(root) / f"v{version.number:04d}"
    vdir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, entry in version.snapshot.entries.items():
        fname = _component_filename(name)
        write_snapshot_file(vdir / fname, entry)
        files[name] = fname
    manifest = {
        "version": version.number,
        "reason": version.reason,
        "created_at": version.created_at,
        "update_id": version.update_id,
        "thresholds": version.thresholds,
        "scalers": version.scaler_records,
        "buffers": version.buffer_state,
        "files": files,
    }
    (vdir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return vdir


def read_version_dir(vdir) -> tuple[dict, WeightSnapshot]:
    vdir = Path(vdir)
    manifest = json.loads((vdir / "manifest.json").read_text())
    entries = {name: read_snapshot_file(vdir / fname)
               for name, fname in manifest["files"].items()}
    return manifest, WeightSnapshot(entries)


class RunLogWriter:
    """Append-only newline-delimited JSON event sink."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def __call__(self, event_dict: dict) -> None:
        self._fh.write(json.dumps(event_dict) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_run_log(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


REQUIRED_RUN_FILES = ("run_log.ndjson", "report.txt", "report.csv", "report.json")


def _missing_run_files(run_dir: Path) -> list[str]:
    missing = [name for name in REQUIRED_RUN_FILES if not (run_dir / name).exists()]
    if not any(run_dir.glob("scenario.*")):
        missing.append("scenario.*")
    versions = run_dir / "versions"
    if not versions.is_dir():
        missing.append("versions/")
        return missing
    for vdir in sorted(versions.iterdir()):
        manifest_path = vdir / "manifest.json"
        if not manifest_path.exists():
            missing.append(str(manifest_path.relative_to(run_dir)))
            continue
        manifest = json.loads(manifest_path.read_text())
        for fname in manifest.get("files", {}).values():
            if not (vdir / fname).exists():
                missing.append(str((vdir / fname).relative_to(run_dir)))
    return missing


def export_run(run_dir, archive_path=None) -> Path:
    """Zip a completed run directory after verifying it is replayable."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ArgumentError(f"{run_dir} is not a directory")
    missing = _missing_run_files(run_dir)
    if missing:
        raise ExportError(
            f"run directory incomplete, missing: {', '.join(missing)}", missing=missing)
    archive_path = Path(archive_path or run_dir.with_suffix(".zip"))
    with zipfile.ZipFile(archive_path, "w", zipfile.ZIP_DEFLATED) as zf:
        for path in sorted(run_dir.rglob("*")):
            if path.is_file():
                zf.write(path, path.relative_to(run_dir))
    return archive_path
