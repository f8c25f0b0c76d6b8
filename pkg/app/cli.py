"""
Command-line entry point.

    qtransistor <command> [--config FILE] [--out DIR] [--seed N] [--noisy [BOOL]] [--set KEY=VALUE ...]

Exit codes: 0 success, 2 invalid configuration, 3 singular readout
matrix, 1 any other failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from app import commands
from app.config import get_settings
from app.errors import ConfigError, SingularMatrixError
from app.logging_config import setup_logging
from app.schemas import RunConfig
from app.writers import ResultWriter, get_result_writer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3

TRANSISTOR_COLUMNS = ["t_ns", "p00", "p01", "p10", "p11"]


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def cmd_chevron(config: RunConfig, writer: ResultWriter) -> None:
    table, fits = commands.chevron(config)
    writer.write_csv("chevron.csv", table, ["omegac_ghz", "t_ns", "p01"])
    writer.write_json("chevron_fits.json", fits)


def cmd_coupling_curve(config: RunConfig, writer: ResultWriter) -> None:
    table = commands.coupling_curve(config)
    writer.write_csv(
        "coupling_curve.csv",
        table,
        ["delta_ghz", "fitted_2g_mhz", "formula3_2g_mhz", "formula2_2g_mhz", "coupler_state"],
    )


def cmd_transistor(config: RunConfig, writer: ResultWriter) -> None:
    runs = commands.transistor(config)
    for gate, run in runs.items():
        writer.write_csv(f"transistor_{gate}.csv", run.table, TRANSISTOR_COLUMNS)
    writer.write_json("transistor_summary.json", {gate: run.summary for gate, run in runs.items()})


def cmd_qpt(config: RunConfig, writer: ResultWriter) -> None:
    payload, records = commands.qpt(config)
    writer.write_json("qpt.json", payload)
    for gate, text in records.items():
        writer.write_text(f"qpt_records_{gate}.jsonl", text)


def cmd_readout_cal(config: RunConfig, writer: ResultWriter) -> None:
    writer.write_json("readout_cal.json", commands.readout_calibration(config))


def cmd_dephasing_sweep(config: RunConfig, writer: ResultWriter) -> None:
    table = commands.dephasing(config).rename(columns={"gamma_ghz": "gamma"})
    writer.write_csv("dephasing_sweep.csv", table, ["gamma", "peak_p10", "min_p01"])


COMMANDS: Dict[str, Callable[[RunConfig, ResultWriter], None]] = {
    "chevron": cmd_chevron,
    "coupling-curve": cmd_coupling_curve,
    "transistor": cmd_transistor,
    "qpt": cmd_qpt,
    "readout-cal": cmd_readout_cal,
    "dephasing-sweep": cmd_dephasing_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--seed", type=int, help="Seed for shot sampling")
    common.add_argument(
        "--noisy", type=_parse_bool, nargs="?", const=True, default=None, help="Include decoherence"
    )
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config value by dotted key, e.g. circuit.g12_ghz=0.007",
    )

    parser = argparse.ArgumentParser(prog="qtransistor", description="Coupler-controlled iSWAP simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(service_name="cli")

    try:
        config = commands.load_run_config(
            args.config, args.overrides, seed=args.seed, noisy=args.noisy, out=args.out
        )
        out_dir = config.output.dir or get_settings().output_dir
        logger.info("Running %s, writing to %s", args.command, out_dir)
        COMMANDS[args.command](config, get_result_writer(out_dir))
    except ConfigError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except SingularMatrixError as e:
        logger.error("Readout matrix cannot be inverted: %s", e)
        return EXIT_SINGULAR
    except Exception as e:
        logger.exception("Command %s failed: %s", args.command, e)
        return EXIT_FAILURE

    logger.info("Command %s finished", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
