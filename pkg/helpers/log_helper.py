import logging
import sys

LOG_FORMAT = "[%(name)s] %(message)s"


class _ConsoleHandler(logging.StreamHandler):
    pass


def setup_logging(verbosity=0):
    """Route every logger to stderr in the `[name] message` style.

    verbosity < 0 shows warnings only, 0 shows progress, > 0 adds debug output.
    Calling it again replaces the handler installed by the previous call.
    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, _ConsoleHandler):
            root.removeHandler(handler)
    handler = _ConsoleHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    return root


def teardown_logging():
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, _ConsoleHandler):
            root.removeHandler(handler)
    root.setLevel(logging.WARNING)
