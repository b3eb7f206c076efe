import os
from importlib import metadata

OUTPUT_URL = os.getenv("OUTPUT_URL", "osfs://./results")

try:
    ARTIFACT_VERSION = metadata.version("lie-entropy-lab")
except metadata.PackageNotFoundError:
    ARTIFACT_VERSION = "0.0.1-development"

DEDUP_TOL = 1e-9
SUPPORT_CAP = 2**20
CHUNK_SIZE = 4096
QUADRATURE_RTOL = 1e-12
ROUNDOFF_FLOOR = 1e-12
DEFAULT_SIGMAS = 4.0


def get_output_url(out: str | None) -> str:
    if out is None:
        return OUTPUT_URL

    if "://" in out:
        return out

    return f"osfs://{out}"
