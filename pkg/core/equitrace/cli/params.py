import click

config = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False),
    help="Path to the YAML run configuration",
)

g = click.option(
    "--g",
    "g",
    type=click.STRING,
    help="Group element payload, overrides trace.g. For example 0.7, 1 or 0,1",
)

psi = click.option(
    "--psi",
    multiple=True,
    help="Test function spec such as gaussian:center=0.7,width=0.05. Can be repeated",
)

threads = click.option(
    "--threads", type=click.IntRange(min=1), default=1, help="Number of worker threads"
)

out = click.option(
    "--out",
    type=click.Path(file_okay=False),
    help="Output directory. Defaults to output/<model>/<runid>",
)

mode = click.option(
    "--mode",
    type=click.Choice(["mollified", "covering", "catmap", "scalar"]),
    help="Oracle to verify against, overrides oracle.mode",
)
