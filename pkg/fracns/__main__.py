import argparse
import logging
import sys

from fracns.config import Config
from fracns.enum import Command, ExitStatus
from fracns.errors import ConfigError, FracnsError
from fracns.handlers.run_handler import RunHandler, default_output_dir
from fracns.modules.run_config import load

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracns",
        description="Normalized solutions of fractional Schrödinger equations",
    )
    parser.add_argument("command", choices=[c.value for c in Command])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument(
        "--out", default=None, help=f"output directory (default under {Config.OUTPUT_DIR})"
    )
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--dump-fields", action="store_true")
    parser.add_argument("--debug", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return ExitStatus.OK.value if e.code == 0 else ExitStatus.USAGE_ERROR.value

    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
    if args.threads is not None and args.threads < 1:
        logger.error("--threads must be at least 1")
        return ExitStatus.USAGE_ERROR.value

    command = Command(args.command)
    try:
        config = load(args.config)
        config.require(command)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return ExitStatus.CONFIG_ERROR.value

    output_dir = args.out or default_output_dir(command)
    try:
        with RunHandler(config, output_dir, args.threads, args.dump_fields) as handler:
            handler.run(command)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return ExitStatus.CONFIG_ERROR.value
    except FracnsError as e:
        logger.error(f"Computation failed: {e}")
        return ExitStatus.COMPUTE_ERROR.value
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return ExitStatus.IO_ERROR.value
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return ExitStatus.COMPUTE_ERROR.value
    return ExitStatus.OK.value


if __name__ == "__main__":
    sys.exit(main())
