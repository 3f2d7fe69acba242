import argparse

from src.settings import Settings


async def parse_args(argv: list[str] | None = None, settings: Settings | None = None) -> argparse.Namespace:
    settings = settings or Settings.from_env()

    parser = argparse.ArgumentParser(prog="crm", description="Reference monitor for f-unit ecosystems")
    parser.add_argument("--store", default=str(settings.store),
                        help="Store file (default: $CRM_STORE or crm.sqlite3)", type=str)
    parser.add_argument("-v", "--verbose", action='store_true',
                        help="Verbose")
    commands = parser.add_subparsers(dest="command", required=True)

    integrate = commands.add_parser("integrate", help="Integrate the f-units of an app bundle")
    integrate.add_argument("bundle", help="Bundle directory", type=str)
    integrate.add_argument("--funit", help="Integrate only this f-unit", type=str)
    integrate.add_argument("--force", action='store_true', default=False,
                           help="Replace f-units that are already integrated")

    query = commands.add_parser("query", help="Run one statement under a session")
    query.add_argument("--funit", required=True, help="F-unit issuing the statement", type=str)
    query.add_argument("--user", required=True, help="User of the session", type=str)
    query.add_argument("sql", help="Statement text", type=str)

    commands.add_parser("graph", help="Print the combined activation and sharing graph")

    simulate = commands.add_parser("simulate-change", help="Print the components a change makes stale")
    simulate.add_argument("--funit", required=True, help="Changed component", type=str)

    serve = commands.add_parser("serve", help="Serve the newline-delimited JSON protocol")
    serve.add_argument("--socket", required=True, metavar="ADDR",
                       help="host:port or a unix socket path", type=str)

    soundness = commands.add_parser("soundness", help="Check the sandbox against the formal model")
    soundness.add_argument("--trials", default=1000, type=int, help="Number of model trials")
    soundness.add_argument("--seed", default=0, type=int, help="Random seed")
    soundness.add_argument("--replay-every", default=10, type=int,
                           help="Run an engine replay every N trials (0 disables replays)")
    soundness.add_argument("--budget", default=settings.soundness_budget, type=int,
                           help="Oracle evaluations allowed per check")
    soundness.add_argument("--inject-fault", action='store_true', default=False,
                           help="Corrupt one stored item per trial; violations are expected")
    soundness.add_argument("--no-progress", action='store_true', default=False,
                           help="Hide the progress bar")

    wire = commands.add_parser("wire", help="Apply a wiring file to the integrated f-units")
    wire.add_argument("file", help="Wiring file", type=str)

    commands.add_parser("signatures", help="Print input and output table signatures")

    args = parser.parse_args(argv)

    if args.command == "soundness":
        if args.trials < 0:
            parser.error("--trials must not be negative")
        if args.replay_every < 0:
            parser.error("--replay-every must not be negative")

    return args
