"""Main entry point for the fusetree CLI application."""

import sys
from typing import Optional

import click

from fusetree.cli.commands import cli_group
from fusetree.errors import FusetreeError


def main() -> Optional[int]:
    """Main entry point for the fusetree application.

    Delegates to the click command group. Library errors that escape a
    command are printed as one ``error: <code>: <message>`` line.

    Returns:
        Exit status: 0 on success, the error's exit code on a library error
        and 1 on any other failure.

    Raises:
        SystemExit: When click or a command exits the application.
    """
    try:
        cli_group()
        return 0
    except FusetreeError as e:
        click.echo(e.one_line(), err=True)
        return e.exit_code
    except Exception as e:
        click.echo(f"error: internal: {' '.join(str(e).split())}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
