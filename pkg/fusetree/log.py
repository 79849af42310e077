"""Console logging for CLI runs.

Library modules use ``logging.getLogger(__name__)``. The CLI attaches a
handler that renders records through ``click`` with one colour per level.
"""

import logging

import click

_STYLES = {
    logging.DEBUG: {"fg": "bright_black"},
    logging.INFO: {"fg": "cyan"},
    logging.WARNING: {"fg": "yellow"},
    logging.ERROR: {"fg": "red", "bold": True},
    logging.CRITICAL: {"fg": "red", "bold": True},
}


class ClickHandler(logging.Handler):
    """Logging handler writing styled records to stderr via click."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            message = self.format(record)
            click.echo(click.style(message, **_STYLES.get(record.levelno, {})), err=True)
        except Exception:
            self.handleError(record)


def configure_logging(level: str = "INFO", verbose: bool = False) -> logging.Logger:
    """Attach the click handler to the package logger.

    Args:
        level: Threshold name such as ``"INFO"``
        verbose: Force DEBUG regardless of ``level``

    Returns:
        logging.Logger: The configured ``fusetree`` logger
    """
    logger = logging.getLogger("fusetree")
    for handler in list(logger.handlers):
        if isinstance(handler, ClickHandler):
            logger.removeHandler(handler)
    handler = ClickHandler()
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else getattr(logging, level.upper(), logging.INFO))
    logger.propagate = False
    return logger
