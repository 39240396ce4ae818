from pathlib import Path

from pydantic import BaseSettings


class Settings(BaseSettings):
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"
    log_date_format: str = "%Y-%m-%d %H:%M:%S"
    log_file: Path | None = None

    output_root: Path = Path("runs")

    max_workers: int = 4
    float_significant_digits: int = 6

    class Config:
        env_prefix = "HIDDEN_POPULATION_"


settings = Settings()
