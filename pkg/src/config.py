import os
import logging
from dotenv import load_dotenv
from dotenv import find_dotenv

# Load .env file at project root (if present)
dotenv_path = find_dotenv(usecwd=True)
if dotenv_path:
    load_dotenv(dotenv_path, override=False)
    logging.getLogger(__name__).info(f"Loaded environment variables from {dotenv_path}")
else:
    logging.getLogger(__name__).debug(".env file not found, proceeding with existing environment variables.")


class Config:
    """Process-level settings. Experiment parameters live in the experiment config file."""

    # Evaluated when the class is defined (i.e., when config.py is imported)
    _raw_log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    log_level = getattr(logging, _raw_log_level, logging.INFO)
    database_url = os.getenv("DATABASE_URL") or None  # unset: CSV output only
    output_dir = os.getenv("FEEL_OUTPUT_DIR", "./runs")
    workers = int(os.getenv("FEEL_WORKERS", 1))
    preset = os.getenv("FEEL_PRESET", "desk")

    def __init__(self):
        logging.getLogger(__name__).debug(
            f"Config initialized: output_dir={self.output_dir}, workers={self.workers}, "
            f"preset={self.preset}, database={'yes' if self.database_url else 'no'}"
        )
