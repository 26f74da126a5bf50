#!/usr/bin/env python3
"""
Trajectory Metrics
Main entry point for the command-line tool
"""
import sys
import logging

from cli.commands import main as run_command

# Setup logging (stderr, so tables on stdout stay clean)
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


def main():
    """Main entry point"""
    exit_code = run_command(sys.argv[1:])
    sys.exit(exit_code)


if __name__ == '__main__':
    main()
