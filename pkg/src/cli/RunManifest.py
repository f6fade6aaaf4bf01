# *************************************************************************************************************************
#   RunManifest.py
#       Stamp output directories with what produced them: toolkit version, configuration hash, seed and input and
#       output digests.
# -------------------------------------------------------------------------------------------------------------------
#   Design Notes:
#   -.  One manifest.json per output directory with one section per subcommand; rerunning a subcommand replaces
#       its own section only.
#   -.  created_at is the only wall-clock field.
# *************************************************************************************************************************

import json
import os
from datetime import datetime, timezone

from config.DEFAULTS import MANIFEST_FILE, TOOLKIT_NAME, TOOLKIT_VERSION
from src.utils.helperFunctions import file_digest

WALL_CLOCK_FIELDS = ("created_at",)


def digests(paths):
    return {os.path.basename(path): file_digest(path)
            for path in sorted(paths) if os.path.isfile(path)}


def write_manifest(output_dir, command, config_hash, seed, inputs=(), outputs=(), **extra):
    path = os.path.join(output_dir, MANIFEST_FILE)
    manifest = {}
    if os.path.isfile(path):
        with open(path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
    manifest["toolkit"] = TOOLKIT_NAME
    manifest["toolkit_version"] = TOOLKIT_VERSION
    manifest[command] = dict({
        "config_hash": config_hash,
        "seed": seed,
        "inputs": digests(inputs),
        "outputs": digests(outputs),
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }, **extra)
    os.makedirs(output_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def read_manifest(output_dir):
    with open(os.path.join(output_dir, MANIFEST_FILE), "r", encoding="utf-8") as handle:
        return json.load(handle)


def strip_wall_clock(manifest):
    """
    Copy of a manifest without wall-clock fields, for reproducibility comparisons.
    """
    if isinstance(manifest, dict):
        return {k: strip_wall_clock(v) for k, v in manifest.items() if k not in WALL_CLOCK_FIELDS}
    return manifest
