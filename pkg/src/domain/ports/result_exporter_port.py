"""
Domain port for experiment outputs.
Defines how tables and documents leave the process without coupling to a file format library.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List


class ResultExporterPort(ABC):
    """Port for writing experiment artifacts"""

    @abstractmethod
    def export_rows(self, rows: List[Dict[str, Any]], file_path: Path, columns: List[str]) -> Path:
        """
        Write a table with a fixed column order.

        Args:
            rows: One mapping per row
            file_path: Destination file
            columns: Column order of the output

        Returns:
            The path written

        Raises:
            FileSystemException: When the file cannot be written
        """
        pass

    @abstractmethod
    def export_document(self, document: Dict[str, Any], file_path: Path) -> Path:
        """
        Write a JSON document.

        Raises:
            FileSystemException: When the file cannot be written
        """
        pass

    @abstractmethod
    def content_hash(self, file_path: Path) -> str:
        """
        sha256 hex digest of a written file, recorded in manifests.
        """
        pass
