import sys


def main(argv: list[str] | None = None) -> int:
    from src.app import RetentionLabApp

    app = RetentionLabApp(sys.argv if argv is None else ["retention-lab", *argv])

    try:
        exit_code = app.exec()
    finally:
        app.cleanup()

    return exit_code


if __name__ == "__main__":
    sys.exit(main())
