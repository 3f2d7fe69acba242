import datetime
import logging
from pathlib import Path


def setup_logger(log_directory: Path | str = "log", level: int = logging.INFO) -> logging.Logger:
    """
    Configures file logging for the whole process.

    Log records go to `<log_directory>/<today>.log`. Library modules only
    call `logging.getLogger(__name__)`; this function is called once by the
    entry point.
    """
    log_directory = Path(log_directory).absolute()
    if not log_directory.exists():
        log_directory.mkdir(parents=True)

    log_filename = log_directory / f'{datetime.date.today()}.log'
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_filename, encoding='utf-8'),
        ]
    )
    logger = logging.getLogger(__name__)
    return logger
