from typing import List, TypeVar

from core.models.shape_model import ShapeModel
from core.storage.repositories.base_repository import BaseRepository, PathLike
from core.storage.repositories.model_repository import ModelRepository
from utils.logger import get_logger

logger = get_logger(__name__)

R = TypeVar("R", bound=BaseRepository)

class BaseService:
    """Tracks the files a command writes so they can be removed if it fails later on."""

    def __init__(self):
        self.outputs: List[BaseRepository] = []

    def output(self, repository: R) -> R:
        self.outputs.append(repository)
        return repository

    def load_model(self, path: PathLike) -> ShapeModel:
        model = ModelRepository(path).load()
        logger.info(f"Loaded model {path}: N={model.num_vertices} S={model.num_modes} "
                    f"landmarks={model.landmark_indices.size}")
        return model

    def remove_partial_outputs(self) -> int:
        removed = sum(1 for repository in self.outputs if repository.remove_partial())
        self.outputs = []
        return removed
