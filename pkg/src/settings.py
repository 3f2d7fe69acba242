import os
from dataclasses import dataclass
from pathlib import Path

DEFAULT_STORE = "crm.sqlite3"
DEFAULT_LOG_DIR = "log"
DEFAULT_SOUNDNESS_BUDGET = 10 ** 5


@dataclass(frozen=True)
class Settings:
    store: Path
    log_dir: Path
    soundness_budget: int

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Reads the monitor settings from the environment.

        `load_dotenv` is expected to have run already, so values from an
        optional .env file are visible here.
        """
        return cls(
            store=Path(os.getenv("CRM_STORE", DEFAULT_STORE)),
            log_dir=Path(os.getenv("CRM_LOG_DIR", DEFAULT_LOG_DIR)),
            soundness_budget=int(os.getenv("CRM_SOUNDNESS_BUDGET", DEFAULT_SOUNDNESS_BUDGET)),
        )
