"""Snapshot persistence: JSON-lines per store plus a checksummed manifest.

Snapshots are written to a temp directory and swapped into place so a
crash can never leave a half-written snapshot behind; restore verifies
every checksum before touching any store.
"""

import hashlib
import json
import os
import shutil
import tempfile
from decimal import Decimal

from .data import dump_json
from .errors import ChecksumMismatch, IncompatibleFormatVersion

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


def _checksum(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _encode_lines(lines) -> bytes:
    return ("\n".join(dump_json(line, pretty=False) for line in lines) + "\n"
            if lines else "").encode("utf-8")


def _decode_lines(data: bytes) -> list:
    lines = []
    for raw in data.decode("utf-8").splitlines():
        if raw.strip():
            lines.append(json.loads(raw, parse_float=Decimal))
    return lines


def write_snapshot(directory: str, stores: dict) -> dict:
    """Write `{name: [json-able line, ...]}` atomically; returns the manifest.

    The target directory is replaced wholesale: build in a sibling temp
    dir, then swap.
    """
    parent = os.path.dirname(os.path.abspath(directory)) or "."
    os.makedirs(parent, exist_ok=True)
    temp = tempfile.mkdtemp(prefix=".snapshot-", dir=parent)
    try:
        files = {}
        for name, lines in stores.items():
            blob = _encode_lines(lines)
            filename = f"{name}.jsonl"
            with open(os.path.join(temp, filename), "wb") as handle:
                handle.write(blob)
            files[name] = {"file": filename, "sha256": _checksum(blob)}
        manifest = {"format_version": FORMAT_VERSION, "files": files}
        with open(os.path.join(temp, MANIFEST_NAME), "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
        backup = None
        if os.path.exists(directory):
            backup = directory + ".old"
            if os.path.exists(backup):
                shutil.rmtree(backup)
            os.rename(directory, backup)
        os.rename(temp, directory)
        if backup:
            shutil.rmtree(backup)
        return manifest
    except Exception:
        shutil.rmtree(temp, ignore_errors=True)
        raise


def read_snapshot(directory: str) -> dict:
    """Verify the manifest and every checksum, then return all store lines."""
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise ChecksumMismatch(f"no snapshot manifest in {directory}")
    with open(manifest_path, encoding="utf-8") as handle:
        manifest = json.load(handle)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise IncompatibleFormatVersion(
            f"snapshot format {manifest.get('format_version')!r}, expected {FORMAT_VERSION}")

    blobs = {}
    for name, entry in manifest.get("files", {}).items():
        path = os.path.join(directory, entry["file"])
        if not os.path.exists(path):
            raise ChecksumMismatch(f"snapshot file {entry['file']} is missing")
        with open(path, "rb") as handle:
            blob = handle.read()
        if _checksum(blob) != entry["sha256"]:
            raise ChecksumMismatch(f"checksum mismatch for {entry['file']}")
        blobs[name] = blob
    return {name: _decode_lines(blob) for name, blob in blobs.items()}
