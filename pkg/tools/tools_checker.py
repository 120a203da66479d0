import logging
import os

from helpers.exceptions import InputError

log = logging.getLogger("cli")


def check_folders(out_dir):
    """Create the output folder if missing and return its absolute path."""
    folder = os.path.abspath(out_dir)
    if os.path.exists(folder) and not os.path.isdir(folder):
        raise InputError(f"output path exists and is not a folder: {folder}")
    if not os.path.isdir(folder):
        log.info(f"Creating output folder: {folder}")
        os.makedirs(folder, exist_ok=True)
    return folder


def output_path(out_dir, name):
    """Path of artifact `name` inside out_dir; refuses anything that would land outside it."""
    folder = os.path.realpath(out_dir)
    path = os.path.realpath(os.path.join(folder, name))
    if os.path.commonpath([folder, path]) != folder:
        raise InputError(f"artifact {name!r} would be written outside {folder}")
    return path
