from datetime import datetime
from pathlib import Path
from typing import Optional, Union

CUSTOM_MODEL = "custom"


def path_exists(p: Union[str, Path]) -> bool:
    return Path(p).exists()


def create_dir_if_not_exist(d: Union[str, Path]) -> Path:
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def get_runid() -> str:
    return f"runid__{datetime.now().strftime('%Y_%m_%d_%H_%M_%S_%f')}"


def get_outdir(base_dir: Union[str, Path], model: Optional[str], runid: str) -> Path:
    """Reports for runs without a gallery model go under ``custom``."""
    return Path(base_dir, model or CUSTOM_MODEL, runid)


def get_log_file(base_dir: Union[str, Path] = "log") -> Path:
    log_dir = create_dir_if_not_exist(Path(base_dir).absolute())
    return log_dir / f"equitrace_{datetime.now().strftime('%Y%m%d%H%M%S')}.log"
