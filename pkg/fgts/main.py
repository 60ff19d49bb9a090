import logging
import sys
from typing import List, Optional

import click
import typer
from rich.console import Console
from rich.logging import RichHandler

from fgts.commands import bayes, check, counterexample, fig1, mdp, run
from fgts.errors import FgtsError

cli = typer.Typer(
    name="fgts",
    help="Feel-Good Thompson Sampling experiments and diagnostics 🚀",
    add_completion=False,
    no_args_is_help=True,
)

# Register subcommands
cli.command("run")(run.run_command)
cli.command("fig1")(fig1.fig1_command)
cli.command("counterexample")(counterexample.counterexample_command)
cli.command("mdp")(mdp.mdp_command)
cli.command("check")(check.check_command)
cli.command("bayes")(bayes.bayes_command)

err_console = Console(stderr=True)


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


@cli.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="debug logging")):
    configure_logging(verbose)


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Exit codes: 0 ok, 1 invalid input or I/O failure, 2 failed diagnostic check."""
    try:
        cli(args=argv if argv is not None else sys.argv[1:], prog_name="fgts", standalone_mode=False)
    except FgtsError as exc:
        err_console.print(f"❌ {exc.detail}")
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        return 1
    except OSError as exc:
        err_console.print(f"❌ {exc}")
        return 1
    return 0
