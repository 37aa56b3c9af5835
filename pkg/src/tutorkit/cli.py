"""Command line entry point: run the HTTP service."""

from __future__ import annotations

import argparse
import os
import sys

DEMO_USERS = (
    {"username": "ada", "password": "ada-pass", "role": "Learner",
     "display_name": "Ada", "education_level": "University"},
    {"username": "ben", "password": "ben-pass", "role": "Learner",
     "display_name": "Ben", "education_level": "MiddleSchool"},
    {"username": "teacher", "password": "teacher-pass", "role": "Teacher"},
    {"username": "parent", "password": "parent-pass", "role": "Parent"},
    {"username": "admin", "password": "admin-pass", "role": "Administrator"},
)

DEMO_LINKS = {"parent": ["ben"]}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tutorkit", description="AI tutoring service")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--seed-demo", action="store_true",
                       help="create demo accounts (ada, ben, teacher, parent, admin)")
    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from tutorkit.service.app import Settings, create_app

        settings = Settings.from_env(os.environ)
        app = create_app(
            settings,
            users=DEMO_USERS if args.seed_demo else None,
            links=DEMO_LINKS if args.seed_demo else None,
        )
        host, _, port = settings.bind_addr.rpartition(":")
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
