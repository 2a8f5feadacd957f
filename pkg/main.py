"""Main entry point for the microcell toolkit."""

import argparse
import logging
from logging.handlers import RotatingFileHandler
import os
import sys
from typing import List, Optional

from config import LOG_FILE, LOG_MAX_BYTES, LOG_BACKUP_COUNT, LOG_FORMAT, DEFAULT_OUTPUT_DIR, EXIT_USAGE
from micro_cell import COMMANDS, USAGE, run


def setup_logging(log_dir: str = '.') -> logging.Logger:
    """Set up logging configuration."""
    logger = logging.getLogger('MicroCell')
    if logger.handlers:
        return logger
    logger.setLevel(logging.DEBUG)

    # Console handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))

    # File handler
    os.makedirs(log_dir, exist_ok=True)
    file_handler = RotatingFileHandler(os.path.join(log_dir, LOG_FILE), maxBytes=LOG_MAX_BYTES,
                                       backupCount=LOG_BACKUP_COUNT)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))

    logger.addHandler(console_handler)
    logger.addHandler(file_handler)
    return logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='microcell', usage=USAGE.splitlines()[0][len('usage: '):],
                                     description='Micro fuel cell and hydrogen generator design toolkit')
    parser.add_argument('command', help=f"one of: {', '.join(COMMANDS)}")
    parser.add_argument('--config', required=True, help='path to a JSON run configuration')
    parser.add_argument('--out', default=DEFAULT_OUTPUT_DIR, help='output directory')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='override a config field (dotted key, JSON value)')
    parser.add_argument('--log-dir', default='.', help='directory for the rotating log file')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args_list = sys.argv[1:] if argv is None else argv
    if args_list and not args_list[0].startswith('-') and args_list[0] not in COMMANDS:
        sys.stderr.write(USAGE)
        return EXIT_USAGE
    args = build_parser().parse_args(args_list)
    logger = setup_logging(args.log_dir)

    try:
        return run(args.command, args.config, {'out': args.out, 'set': args.set})
    except Exception as e:
        logger.error(f"Failed to run microcell: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
