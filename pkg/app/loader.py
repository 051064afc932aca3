import click


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Бета-ансамбли: статсумма Сельберга, точные CGF, функция скорости и эксперименты."""
