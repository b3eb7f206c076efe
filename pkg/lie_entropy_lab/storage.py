import csv
import json
from collections.abc import Iterable, Sequence

from fs import open_fs
from fs.base import FS

from lie_entropy_lab.experiment import RunManifest
from lie_entropy_lab.logger import logger

SIGNIFICANT_DIGITS = 17
MANIFEST_FILE_NAME = "manifest-{command}.json"


def open_output(url: str) -> FS:
    logger.debug(f"Opening output location {url!r}")
    return open_fs(url, create=True)


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def write_csv(
    filesystem: FS,
    file_name: str,
    columns: Sequence[str],
    rows: Iterable[dict],
) -> str:
    with filesystem.open(file_name, "w", newline="") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row[column]) for column in columns])

    logger.info(f"Wrote {file_name!r}")
    return file_name


def write_json(filesystem: FS, file_name: str, data) -> str:
    with filesystem.open(file_name, "w", newline="") as json_file:
        json.dump(data, json_file, indent=2)
        json_file.write("\n")

    logger.info(f"Wrote {file_name!r}")
    return file_name


def write_manifest(filesystem: FS, manifest: RunManifest) -> str:
    file_name = MANIFEST_FILE_NAME.format(command=manifest.command)
    return write_json(filesystem, file_name, manifest.model_dump(mode="json"))


def read_text(filesystem: FS, file_name: str) -> str:
    with filesystem.open(file_name, "r", newline="") as text_file:
        return text_file.read()
