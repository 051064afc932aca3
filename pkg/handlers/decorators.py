import sys
from functools import wraps

import click

import messages
from app import logger
from services.errors import AepError, DomainError

EXIT_CHECK_FAILURE = 1
EXIT_USAGE = 2


def error_command_handler(func):
    """Декоратор для обработки ошибок в командах CLI: DomainError - код 2, прочие - 1."""

    @wraps(func)
    def wrap_function(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except DomainError as e:
            click.echo(messages.domain_error_text.format(error=e), err=True)
            sys.exit(EXIT_USAGE)
        except AepError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(messages.check_failed_text.format(error=e), err=True)
            sys.exit(EXIT_CHECK_FAILURE)
        except Exception as e:
            error_caption = messages.prepare_error_caption(e)
            logger.error(
                "Unexpected error",
                exc_info=True,
            )
            click.echo(error_caption, err=True)
            sys.exit(EXIT_CHECK_FAILURE)

    return wrap_function
