import handlers  # noqa: F401  регистрирует команды
from app.loader import cli


def main():
    cli()


if __name__ == "__main__":
    main()
