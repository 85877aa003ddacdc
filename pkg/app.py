import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from cli.commands import diagnostics, experiments, fit, flex, synth
from cli.common import CommandContext
from config import settings
from utils.errors import EXIT_INVALID_ARGUMENT, GeofitError
from utils.logger import get_logger, set_level

logger = get_logger(__name__)

COMMANDS = (fit, flex, experiments, synth, diagnostics)

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME,
        description="Fit a linear 3D shape model to 2D landmarks and contours, and measure what the fit leaves open.",
    )
    parser.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        type=str.upper, help=f"default {settings.LOG_LEVEL}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for module in COMMANDS:
        module.register(subparsers)
    return parser

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)

    ctx = CommandContext()
    try:
        return args.handler(args, ctx)
    except GeofitError as e:
        removed = ctx.cleanup()
        logger.error(f"{args.command} failed: {e.detail}" + (f" ({removed} partial outputs removed)" if removed else ""))
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        ctx.cleanup()
        error = e.errors()[0]
        detail = f"invalid value for {'.'.join(map(str, error['loc']))}: {error['msg']}"
        logger.error(f"{args.command} failed: {detail}")
        print(f"error: {detail}", file=sys.stderr)
        return EXIT_INVALID_ARGUMENT
    except Exception:
        ctx.cleanup()
        raise

if __name__ == "__main__":
    sys.exit(main())
