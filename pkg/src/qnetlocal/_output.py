"""Shared helpers for naming and claiming run-output files."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path


def timestamp() -> str:
    """UTC timestamp suitable for embedding in output filenames."""
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def claim_files(out_dir: Path, stem: str, extensions: tuple[str, ...],
                ) -> tuple[Path, ...]:
    """Pick ``<stem><ext>`` paths, none of which exist yet.

    On collision a numeric ``-N`` suffix is appended to the stem of every
    name, so a run never overwrites an earlier one's outputs.
    """
    out_dir = Path(out_dir)
    for attempt in range(1000):
        suffix = "" if attempt == 0 else f"-{attempt}"
        paths = tuple(out_dir / f"{stem}{suffix}{ext}" for ext in extensions)
        if not any(p.exists() for p in paths):
            return paths
    raise RuntimeError(f"could not find a free filename for {stem}")


def claim_pair(out_dir: Path, stem: str) -> tuple[Path, Path]:
    """Claim a ``.csv`` / ``.json`` pair of output paths."""
    csv_path, json_path = claim_files(out_dir, stem, (".csv", ".json"))
    return csv_path, json_path
