import logging
from pathlib import Path
from typing import Any, Mapping

import yaml

from .utils import to_builtin


def save_debug_log(out_dir: Path, summary: Mapping[str, Any]) -> None:
    """
    Send every log record, and every warning, to `debug.log` in the output directory,
    starting with one section per entry of `summary`. The node-by-node records from
    DCBS then show why an interval was or was not split.
    """
    logging.basicConfig(
        level=logging.DEBUG,
        format="%(asctime)s %(levelname)s:\n%(message)s",
        filename=out_dir / "debug.log",
        filemode="w",
        force=True,
    )
    logging.captureWarnings(True)

    for section, body in summary.items():
        banner = "=" * 41
        logging.info(f"{banner}\n{section}\n{banner}")
        body = to_builtin(body)
        if isinstance(body, (dict, list)):
            body = yaml.safe_dump(body, sort_keys=False)
        logging.info(body)
