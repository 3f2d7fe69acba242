# utils.py
import asyncio
import logging
import platform
import sys

from dotenv import find_dotenv, load_dotenv

from utils import console, print_error

# msg.py
import msg

# logger.py
from src.logger import setup_logger

# arg_parser.py
from src.arg_parser import parse_args

# settings.py
from src.settings import Settings

from src.errors import MonitorError
from src.host.commands import COMMANDS
from src.sandbox.monitor import ReferenceMonitor

# Commands that never touch the configured store
IN_MEMORY_COMMANDS = {"soundness"}


#######################
#         CODE        #
#######################


async def main(argv: list[str] | None = None) -> int:
    load_dotenv(find_dotenv())  # Optional
    settings = Settings.from_env()

    args = await parse_args(argv, settings)
    logger = setup_logger(settings.log_dir, logging.DEBUG if args.verbose else logging.INFO)
    logger.debug(f"Command {args.command} with store {args.store}")

    store = ":memory:" if args.command in IN_MEMORY_COMMANDS else args.store
    try:
        monitor = ReferenceMonitor.open(store)
    except MonitorError as e:
        print_error(e)
        logger.exception(e)
        return e.exit_code

    try:
        return await COMMANDS[args.command](args, monitor)
    except MonitorError as e:
        print_error(e)
        logger.error(f"{args.command} failed with {e.code}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        console.print(f"{msg.WARNING}Interrupted")
        return 130
    finally:
        monitor.close()


if __name__ == "__main__":

    if platform.system() == 'Windows':
        asyncio.set_event_loop_policy(asyncio.WindowsSelectorEventLoopPolicy())

    sys.exit(asyncio.run(main()))
