"""
Experiment artifact writer: tables through polars, documents as JSON.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import polars as pl

from src.domain.ports.result_exporter_port import ResultExporterPort
from src.shared.exceptions import FileSystemException

logger = logging.getLogger(__name__)


class PolarsCsvExporter(ResultExporterPort):
    def export_rows(self, rows: List[Dict[str, Any]], file_path: Path, columns: List[str]) -> Path:
        file_path = Path(file_path)
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            frame = pl.DataFrame(
                {column: [row.get(column) for row in rows] for column in columns},
                strict=False,
            )
            frame.select(columns).write_csv(file_path)
        except OSError as e:
            logger.error(f"Failed to write {file_path}: {str(e)}")
            raise FileSystemException(f"Failed to write table: {str(e)}", file_path=str(file_path), cause=e)
        logger.debug(f"Wrote {len(rows)} rows to {file_path}")
        return file_path

    def export_document(self, document: Dict[str, Any], file_path: Path) -> Path:
        file_path = Path(file_path)
        try:
            file_path.parent.mkdir(parents=True, exist_ok=True)
            with open(file_path, "w", encoding="utf-8") as f:
                json.dump(document, f, indent=2, sort_keys=True, default=_json_default)
                f.write("\n")
        except OSError as e:
            logger.error(f"Failed to write {file_path}: {str(e)}")
            raise FileSystemException(f"Failed to write document: {str(e)}", file_path=str(file_path), cause=e)
        return file_path

    def content_hash(self, file_path: Path) -> str:
        try:
            return file_sha256(Path(file_path))
        except OSError as e:
            raise FileSystemException(f"Failed to hash file: {str(e)}", file_path=str(file_path), cause=e)


def read_document(file_path: Path) -> Dict[str, Any]:
    file_path = Path(file_path)
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FileSystemException(f"Failed to read document: {str(e)}", file_path=str(file_path), cause=e)


def read_table(file_path: Path) -> pl.DataFrame:
    try:
        return pl.read_csv(file_path)
    except Exception as e:
        raise FileSystemException(f"Failed to read table: {str(e)}", file_path=str(file_path), cause=e)


def file_sha256(file_path: Path) -> str:
    digest = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _json_default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
