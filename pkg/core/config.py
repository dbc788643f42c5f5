import os

from pydantic_settings import BaseSettings, SettingsConfigDict

from core.persistence import PersistenceManager


class Settings(BaseSettings):
    app_name: str = "ECG Pruning Lab"
    artifact_version: str = "1.0.0"

    # Reproducibility
    seed: int = 7

    # Paths (Defaults handled by PersistenceManager if not set)
    _persistence: PersistenceManager = PersistenceManager()

    logs_dir: str = _persistence.get_logs_dir()

    # Sweep
    sweep_workers: int = min(8, (os.cpu_count() or 1) + 4)
    default_sparsities: str = "0.1:0.9:0.1"

    # Logging
    log_level: str = "INFO"
    json_logs: bool = False
    log_to_file: bool = False

    model_config = SettingsConfigDict(env_prefix="ECGPRUNE_")

settings = Settings()
