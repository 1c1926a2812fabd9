"""
Persistence of reports, trajectories and manifests under the output directory
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.settings import RunConfig, VERSION
from models.params_model import ModelParams
from models.trajectory_model import EnergyLedger, Trajectory
from services.integrators import export_ledger_csv, save_trajectory
from utils.errors import OutputError
from utils.file_operations import FileOperations

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class DataManager:
    """Writes every artifact of a run strictly below one output directory"""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = FileOperations.ensure_directory(output_dir).resolve()
        self.artifacts: List[str] = []

    def path(self, name: str) -> Path:
        """Resolved path of an artifact; refuses names escaping the directory"""
        target = FileOperations.ensure_within(self.output_dir, name)
        FileOperations.ensure_directory(target.parent)
        return target

    def _record(self, target: Path) -> Path:
        self.artifacts.append(str(target.relative_to(self.output_dir)))
        logger.debug("Wrote %s", target)
        return target

    def write_csv(self, name: str, rows: List[Dict[str, Any]],
                  fieldnames: Optional[List[str]] = None) -> Path:
        target = self.path(name)
        if not FileOperations.export_to_csv(rows, target, fieldnames=fieldnames):
            if rows or fieldnames:
                raise OutputError(f"cannot write {target}")
            # empty table: header-less empty file
            target.write_text("", encoding='utf-8')
        return self._record(target)

    def write_json(self, name: str, data: Any) -> Path:
        target = self.path(name)
        if not FileOperations.safe_write_json(target, data):
            raise OutputError(f"cannot write {target}")
        return self._record(target)

    def save_trajectory(self, name: str, traj: Trajectory, p: ModelParams) -> Path:
        return self._record(save_trajectory(traj, p, self.path(name)))

    def save_ledger(self, name: str, ledger: EnergyLedger) -> Path:
        return self._record(export_ledger_csv(ledger, self.path(name)))

    def write_manifest(self, command: str, config: RunConfig,
                       extra: Optional[Dict[str, Any]] = None) -> Path:
        """Fingerprint, seed, version and canonical config of the run"""
        manifest = {
            'command': command,
            'fingerprint': config.fingerprint,
            'master_seed': config.master_seed,
            'n_paths': config.n_paths,
            'version': VERSION,
            'created': time.strftime('%Y-%m-%dT%H:%M:%S'),
            'config': config.to_text(),
            'artifacts': list(self.artifacts)
        }
        if extra:
            manifest.update(extra)
        target = self.path(MANIFEST_NAME)
        if not FileOperations.safe_write_json(target, manifest):
            raise OutputError(f"cannot write {target}")
        return target

    def read_manifest(self) -> Dict[str, Any]:
        return FileOperations.safe_read_json(self.output_dir / MANIFEST_NAME, default={})
