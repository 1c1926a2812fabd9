"""
File operation utilities for the LLB simulator
"""

import csv
import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, Any, Optional, Union

import numpy as np

from utils.errors import OutputError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"LLB1"
CHECKPOINT_VERSION = 1
# little-endian: version, header length
_PREAMBLE = struct.Struct("<II")
# little-endian: stride, snapshot count, values per snapshot
_LAYOUT = struct.Struct("<IQQ")


class FileOperations:
    """Utility class for file operations"""

    @staticmethod
    def ensure_directory(path: Union[str, Path]) -> Path:
        """Create an output directory and its parents; OutputError if that fails"""
        path = Path(path)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create output directory {path}: {e}") from e
        return path

    @staticmethod
    def ensure_within(root: Union[str, Path], candidate: Union[str, Path]) -> Path:
        """
        Resolve candidate relative to root and refuse anything outside root

        Args:
            root: Directory that must contain the result
            candidate: Relative (or absolute) path

        Returns:
            Resolved path below root
        """
        root = Path(root).resolve()
        resolved = (root / candidate).resolve()
        if resolved != root and root not in resolved.parents:
            raise OutputError(f"path {candidate} escapes output directory {root}")
        return resolved

    @staticmethod
    def safe_write_json(file_path: Union[str, Path], data: Any) -> bool:
        """
        Write JSON through a temporary file so readers never see half a file

        Args:
            file_path: Path to write the file
            data: Data to write

        Returns:
            True if successful, False otherwise
        """
        file_path = Path(file_path)
        temp_path = file_path.with_suffix('.tmp')
        try:
            with open(temp_path, 'w', encoding='utf-8') as f:
                json.dump(data, f, indent=2, ensure_ascii=False)
            temp_path.replace(file_path)
            return True
        except (OSError, TypeError, ValueError) as e:
            logger.error("Error writing JSON file %s: %s", file_path, e)
            if temp_path.exists():
                temp_path.unlink()
            return False

    @staticmethod
    def safe_read_json(file_path: Union[str, Path], default: Any = None) -> Any:
        """Parsed JSON of a field or noise file, or default when it is missing or malformed

        A missing file is silent; unreadable or invalid JSON is logged.
        """
        file_path = Path(file_path)
        try:
            text = file_path.read_text(encoding='utf-8')
        except FileNotFoundError:
            return default
        except OSError as e:
            logger.error("Cannot read %s: %s", file_path, e)
            return default
        try:
            return json.loads(text)
        except ValueError as e:
            logger.error("Invalid JSON in %s: %s", file_path, e)
            return default

    @staticmethod
    def export_to_csv(data: List[Dict[str, Any]], file_path: Union[str, Path],
                      fieldnames: Optional[List[str]] = None) -> bool:
        """
        Write result rows (ledger, moments, convergence tables) as CSV

        Columns follow fieldnames, or the keys of the first row; keys outside
        the columns are dropped and missing ones are left blank.

        Returns:
            False when there are no columns or the file cannot be written
        """
        columns = list(fieldnames) if fieldnames is not None else list(data[0]) if data else []
        if not columns:
            return False
        file_path = Path(file_path)
        try:
            with file_path.open('w', newline='', encoding='utf-8') as handle:
                writer = csv.DictWriter(handle, fieldnames=columns, extrasaction='ignore')
                writer.writeheader()
                writer.writerows(data)
        except OSError as e:
            logger.error("Cannot write table %s: %s", file_path, e)
            return False
        return True

    @staticmethod
    def import_from_csv(file_path: Union[str, Path]) -> List[Dict[str, Any]]:
        """Rows of a written result table as string dictionaries; [] if the file is absent"""
        try:
            with Path(file_path).open(newline='', encoding='utf-8') as handle:
                return list(csv.DictReader(handle))
        except FileNotFoundError:
            return []

    @staticmethod
    def write_checkpoint(file_path: Union[str, Path], domain: Dict[str, Any],
                         params: Dict[str, Any], stride: int, times: np.ndarray,
                         coeffs: np.ndarray) -> Path:
        """
        Write snapshots in the LLB1 binary format

        Layout: magic, version and header length, JSON header (domain and
        params), stride, snapshot count, values per snapshot, then per
        snapshot the time followed by the coefficients, all little-endian
        64-bit floats.

        Args:
            file_path: Destination file
            domain: DomainSpec as dictionary
            params: ModelParams as dictionary
            stride: Snapshot stride in steps
            times: Snapshot times, shape (S,)
            coeffs: Snapshot coefficients, shape (S, 3, n)

        Returns:
            Path of the written file
        """
        file_path = Path(file_path)
        times = np.asarray(times, dtype='<f8')
        coeffs = np.asarray(coeffs, dtype='<f8')
        flat = coeffs.reshape(len(times), int(np.prod(coeffs.shape[1:])))
        header = json.dumps({'domain': domain, 'params': params}, sort_keys=True).encode('utf-8')
        records = np.concatenate([times[:, np.newaxis], flat], axis=1).astype('<f8')
        try:
            with open(file_path, 'wb') as f:
                f.write(CHECKPOINT_MAGIC)
                f.write(_PREAMBLE.pack(CHECKPOINT_VERSION, len(header)))
                f.write(header)
                f.write(_LAYOUT.pack(int(stride), flat.shape[0], flat.shape[1]))
                f.write(records.tobytes())
        except OSError as e:
            raise OutputError(f"cannot write checkpoint {file_path}: {e}") from e
        return file_path

    @staticmethod
    def read_checkpoint(file_path: Union[str, Path]) -> Dict[str, Any]:
        """
        Read an LLB1 checkpoint

        Args:
            file_path: Checkpoint file

        Returns:
            Dictionary with domain, params, stride, times and coeffs (S, 3, n)
        """
        file_path = Path(file_path)
        try:
            raw = file_path.read_bytes()
        except OSError as e:
            raise OutputError(f"cannot read checkpoint {file_path}: {e}") from e
        if raw[:4] != CHECKPOINT_MAGIC:
            raise OutputError(f"{file_path} is not an LLB1 checkpoint")
        offset = 4
        version, header_len = _PREAMBLE.unpack_from(raw, offset)
        if version != CHECKPOINT_VERSION:
            raise OutputError(f"unsupported checkpoint version {version}")
        offset += _PREAMBLE.size
        header = json.loads(raw[offset:offset + header_len].decode('utf-8'))
        offset += header_len
        stride, count, width = _LAYOUT.unpack_from(raw, offset)
        offset += _LAYOUT.size
        if count == 0:
            records = np.zeros((0, width + 1))
        else:
            records = np.frombuffer(raw, dtype='<f8', count=count * (width + 1), offset=offset)
            records = records.reshape(count, width + 1)
        return {
            'domain': header['domain'],
            'params': header['params'],
            'stride': int(stride),
            'times': records[:, 0].astype(float),
            'coeffs': records[:, 1:].reshape(count, 3, width // 3).astype(float)
        }
