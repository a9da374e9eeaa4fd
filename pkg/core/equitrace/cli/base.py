import json
import logging
import os
import traceback
from typing import Dict, List

import click

from equitrace.cli import params as p
from equitrace.config.run import RunConfig, apply_overrides, load_run_config
from equitrace.exceptions import EquitraceError, HypothesisViolation
from equitrace.task.base import BaseTask
from equitrace.task.orbits import OrbitsTask
from equitrace.task.trace import TraceTask
from equitrace.task.verify import VerifyTask
from equitrace.util.filesystem import (
    create_dir_if_not_exist,
    get_log_file,
    get_outdir,
    get_runid,
)

log = logging.getLogger()
log.setLevel(logging.DEBUG)
log_formatter = logging.Formatter(
    "[%(asctime)s] {%(filename)s:%(lineno)d} %(levelname)s - %(message)s"
)

console_handler = logging.StreamHandler()
console_handler.setFormatter(log_formatter)
console_handler.setLevel(os.environ.get("EQUITRACE_LOG", "INFO").upper())
log.addHandler(console_handler)

log_file_fqn = get_log_file()
file_handler = logging.FileHandler(log_file_fqn)
file_handler.setFormatter(log_formatter)
file_handler.setLevel(logging.DEBUG)
log.addHandler(file_handler)

nlog = logging.getLogger(__name__)

TASKS = {"orbits": OrbitsTask, "trace": TraceTask, "verify": VerifyTask}


def failure_record(exc: EquitraceError) -> Dict:
    record = {"error": type(exc).__name__, "message": exc.message}
    if isinstance(exc, HypothesisViolation) and exc.worst is not None:
        record["worst"] = exc.worst
    return record


def prepare(ctx, kwargs) -> RunConfig:
    """Load the configuration, apply flag overrides and settle the output directory."""
    try:
        config = load_run_config(kwargs["config_path"])
        config = apply_overrides(
            config, g=kwargs.get("g"), psi=kwargs.get("psi", ()), mode=kwargs.get("mode")
        )
    except EquitraceError as exc:
        nlog.error(exc.formatted_message)
        finish(ctx, [failure_record(exc)])
    click.echo(config.summary())

    outdir = kwargs.get("out") or get_outdir("output", config.model, ctx.obj["runid"])
    ctx.obj["outdir"] = create_dir_if_not_exist(outdir)
    ctx.obj["threads"] = kwargs.get("threads", 1)
    nlog.debug(f"Output will be stored in: {ctx.obj['outdir']}")
    return config


def run_task(ctx, name: str, config: RunConfig) -> List[Dict]:
    task: BaseTask = TASKS[name](
        config=config, outdir=ctx.obj["outdir"], n_jobs=ctx.obj["threads"]
    )
    try:
        report = task.execute()
    except EquitraceError as exc:
        nlog.error(exc.formatted_message)
        nlog.debug(traceback.format_exc())
        report = task.report or task.new_report()
        report["failures"].append(failure_record(exc))
        task.write_report(report)
    return report["failures"]


def finish(ctx, failures: List[Dict]):
    if failures:
        click.echo(json.dumps({"failures": failures}, sort_keys=True), err=True)
        ctx.exit(1)
    ctx.exit(0)


# command: equitrace
@click.group(
    context_settings={"help_option_names": ["-h", "--help"]},
    no_args_is_help=True,
    epilog="Execute: equitrace <command> -h/--help for more help with specific commands",
)
@click.pass_context
def cli(ctx):
    """Equitrace computes equivariant flat traces of flows on covering spaces"""
    logging.getLogger("equitrace").setLevel(logging.DEBUG)
    nlog.info(f"Writing debug log into: {log_file_fqn}")
    ctx.obj = ctx.obj or {}
    ctx.obj["runid"] = get_runid()


# command: equitrace orbits
@cli.command("orbits")
@click.pass_context
@p.config
@p.g
@p.threads
@p.out
def orbits(ctx, **kwargs):
    """Find delocalized periodic orbits and write orbits.csv"""
    config = prepare(ctx, kwargs)
    finish(ctx, run_task(ctx, "orbits", config))


# command: equitrace trace
@cli.command("trace")
@click.pass_context
@p.config
@p.g
@p.psi
@p.threads
@p.out
def trace(ctx, **kwargs):
    """Assemble the flat g-trace as a Dirac comb and pair it with test functions"""
    config = prepare(ctx, kwargs)
    finish(ctx, run_task(ctx, "trace", config))


# command: equitrace verify
@cli.command("verify")
@click.pass_context
@p.config
@p.g
@p.psi
@p.mode
@p.threads
@p.out
def verify(ctx, **kwargs):
    """Check the comb against an independent oracle"""
    config = prepare(ctx, kwargs)
    finish(ctx, run_task(ctx, "verify", config))


# command: equitrace all
@cli.command("all")
@click.pass_context
@p.config
@p.g
@p.psi
@p.mode
@p.threads
@p.out
def run_all(ctx, **kwargs):
    """Run orbits, trace and verify in sequence"""
    config = prepare(ctx, kwargs)
    failures = []
    for name in TASKS:
        nlog.info(f"Executing {name}")
        failures.extend(run_task(ctx, name, config))
    finish(ctx, failures)
