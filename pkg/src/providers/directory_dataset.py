"""
Dataset directory provider.

Layout: ``<root>/<id>.ppm`` (RGB image) paired with ``<root>/<id>.pfm``
(depth map). Ids are taken from ``manifest.json`` when present, otherwise
from the sorted ``.ppm`` file stems.
"""

import json
from pathlib import Path
from typing import List, Union

from ..interfaces.depth_source import DepthSource
from ..interfaces.errors import ConfigError, FormatError
from ..models.sample import DepthSample
from ..tensor import Tensor
from ..utils.image_io import read_pfm, read_ppm
from ..utils.logger import get_logger

logger = get_logger(__name__)

MANIFEST = "manifest.json"


class DirectoryDepthSource(DepthSource):
    """Reads ppm/pfm pairs lazily."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ConfigError(f"data root {self.root} is not a directory", "data")
        self._ids = self._discover()
        if not self._ids:
            raise ConfigError(f"no samples found under {self.root}", "data")
        logger.info(f"Dataset {self.root}: {len(self._ids)} samples")

    def _discover(self) -> List[str]:
        manifest = self.root / MANIFEST
        if manifest.is_file():
            try:
                return list(json.loads(manifest.read_text())["ids"])
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"unreadable manifest: {exc}", "data") from None
        return sorted(p.stem for p in self.root.glob("*.ppm"))

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> List[str]:
        return list(self._ids)

    def image_path(self, sample_id: str) -> Path:
        return self.root / f"{sample_id}.ppm"

    def depth_path(self, sample_id: str) -> Path:
        return self.root / f"{sample_id}.pfm"

    def sample(self, index: int) -> DepthSample:
        sample_id = self._ids[index]
        image = read_ppm(self.image_path(sample_id))
        return DepthSample(image=image, depth=read_pfm(self.depth_path(sample_id)), id=sample_id)

    def image(self, index: int) -> Tensor:
        """Image only, for inference over folders without ground truth."""
        return read_ppm(self.image_path(self._ids[index]))
